//! `maskflow` command line: track, eval, viz-pca, synth, ablate.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{fit_pca, render_pca_rgb, temporal_consistency_score};
use crate::engine::{downsample_mask, track_video_timed, with_threads, MemoryMode, TrackerConfig};
use crate::error::{Error, ErrorCategory, Result};
use crate::metrics::{aggregate, score_frame, EvalReport, FVariant, VideoScores};
use crate::record::{file_digest, RunRecord};
use crate::store::{
    load_manifest, read_feature_map, read_mask, write_mask, DatasetManifest, VideoEntry,
    FEATURE_EXT, MASK_EXT,
};
use crate::synth::{gen_sequence, write_dataset, SynthConfig};
use crate::tensor::{FeatureMap, LabelMask};

#[derive(Debug, Parser)]
#[command(
    name = "maskflow",
    version,
    about = "Mask propagation over per-frame feature maps",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "MASKFLOW_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate a first-frame mask through every later frame of each video.
    Track(TrackArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Render feature maps as RGB via their top three principal components.
    VizPca(VizArgs),
    /// Write a synthetic dataset with exact ground truth.
    Synth(SynthArgs),
    /// Sweep one tracking parameter and tabulate scores.
    ///
    /// Only tau, window and memory can be swept here. Diffusion timestep and
    /// decoder level are fixed when features are extracted; sweep them by
    /// extracting one feature set per value and running track + eval on each.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrackParams {
    #[arg(long, default_value_t = 0.2)]
    pub tau: f64,
    /// Spatial window size n in feature pixels; refs within n/2 are admitted.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    /// Number of past frames kept as references.
    #[arg(long, default_value_t = 10)]
    pub memory: usize,
    #[arg(long, default_value = "hard")]
    pub memory_mode: MemoryMode,
    /// Keep the first frame in memory for the whole video.
    #[arg(long)]
    pub anchor_first: bool,
}

impl TrackParams {
    fn config(&self) -> TrackerConfig {
        TrackerConfig {
            tau: self.tau,
            window: self.window,
            memory: self.memory,
            memory_mode: self.memory_mode,
            anchor_first_frame: self.anchor_first,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Only track this video (default: all).
    #[arg(long)]
    pub video: Option<String>,
    /// First-frame mask; defaults to the manifest's mask for the first frame.
    #[arg(long)]
    pub first_mask: Option<PathBuf>,
    #[command(flatten)]
    pub params: TrackParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FVariantArg {
    Pixel,
    Boundary,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value = "pixel")]
    pub f_variant: FVariantArg,
    #[arg(long, default_value_t = 1)]
    pub boundary_tol: usize,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-frame scores as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// A feature file or a directory of them; directories are fit jointly.
    #[arg(long)]
    pub features: PathBuf,
    /// Mask directory matching the feature files by name, for the
    /// temporal consistency score.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 32)]
    pub h: usize,
    #[arg(long, default_value_t = 32)]
    pub w: usize,
    #[arg(long, default_value_t = 8)]
    pub c: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: u16,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Per-frame motion as `dy,dx`.
    #[arg(long, default_value = "1,1", allow_hyphen_values = true)]
    pub motion: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth masks at this multiple of the feature resolution.
    #[arg(long, default_value_t = 1)]
    pub mask_scale: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// One of tau, window, memory.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<String>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Settings for the parameters not being swept.
    #[command(flatten)]
    pub params: TrackParams,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 success, 1 usage or config, 2 data or format, 3 internal.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = std::panic::catch_unwind(|| execute(cli));
    match result {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            report_error(e.category().as_str(), &e.to_string());
            exit_code(e.category())
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            report_error("internal", msg);
            3
        }
    }
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Config => 1,
        ErrorCategory::Io | ErrorCategory::Format | ErrorCategory::Dimension => 2,
    }
}

fn report_error(category: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "category": category, "message": message } }));
}

pub fn execute(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Track(a) => with_threads(threads, || cmd_track(&a)),
        Command::Eval(a) => with_threads(threads, || cmd_eval(&a)),
        Command::VizPca(a) => with_threads(threads, || cmd_viz_pca(&a)),
        Command::Synth(a) => cmd_synth(&a),
        Command::Ablate(a) => with_threads(threads, || cmd_ablate(&a)),
    }
}

struct TrackedVideo {
    id: String,
    first_index: u64,
    num_classes: u16,
    /// `(frame index, mask)` for every frame after the first.
    masks: Vec<(u64, LabelMask)>,
    frame_times_ms: Vec<f64>,
}

fn load_features(video: &VideoEntry) -> Result<Vec<FeatureMap>> {
    video
        .frames
        .iter()
        .map(|f| read_feature_map(&f.features))
        .collect()
}

fn first_mask_of(video: &VideoEntry) -> Result<LabelMask> {
    let first = video
        .frames
        .first()
        .ok_or_else(|| Error::Dimension(format!("video {} has no frames", video.id)))?;
    let path = first.mask.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "video {} has no first-frame mask; pass --first-mask",
            video.id
        ))
    })?;
    read_mask(path)
}

fn track_one(video: &VideoEntry, first: &LabelMask, cfg: &TrackerConfig) -> Result<TrackedVideo> {
    let features = load_features(video)?;
    let out = track_video_timed(&features, first, cfg)?;
    Ok(TrackedVideo {
        id: video.id.clone(),
        first_index: video.frames[0].index,
        num_classes: first.num_classes(),
        masks: video.frames[1..]
            .iter()
            .map(|f| f.index)
            .zip(out.masks)
            .collect(),
        frame_times_ms: out
            .frame_times
            .iter()
            .map(|d| d.as_secs_f64() * 1e3)
            .collect(),
    })
}

fn selected_videos<'a>(
    manifest: &'a DatasetManifest,
    video: Option<&str>,
) -> Result<Vec<&'a VideoEntry>> {
    match video {
        Some(id) => manifest
            .video(id)
            .map(|v| vec![v])
            .ok_or_else(|| Error::Config(format!("no video {id:?} in manifest"))),
        None => Ok(manifest.videos.iter().collect()),
    }
}

/// Tracks each video on its own worker; results come back in manifest order.
fn track_videos(
    videos: &[&VideoEntry],
    first_override: Option<&LabelMask>,
    cfg: &TrackerConfig,
) -> Result<Vec<TrackedVideo>> {
    cfg.validate()?;
    videos
        .par_iter()
        .map(|v| {
            let first = match first_override {
                Some(m) => m.clone(),
                None => first_mask_of(v)?,
            };
            track_one(v, &first, cfg)
        })
        .collect()
}

fn mask_path(dir: &Path, video: &str, index: u64) -> PathBuf {
    dir.join(video).join(format!("{index:05}.{MASK_EXT}"))
}

pub fn cmd_track(a: &TrackArgs) -> Result<()> {
    let cfg = a.params.config();
    cfg.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let videos = selected_videos(&manifest, a.video.as_deref())?;
    let first = match &a.first_mask {
        Some(p) if videos.len() != 1 => {
            return Err(Error::Config(format!(
                "--first-mask {} needs --video when the manifest has several videos",
                p.display()
            )))
        }
        Some(p) => Some(read_mask(p)?),
        None => None,
    };
    let tracked = track_videos(&videos, first.as_ref(), &cfg)?;

    let mut record = RunRecord::new(
        "track",
        json!({
            "manifest": a.manifest,
            "video": a.video,
            "first_mask": a.first_mask,
            "tracker": cfg,
        }),
    );
    record.manifest_digest = Some(file_digest(&a.manifest)?);
    for t in &tracked {
        for (index, mask) in &t.masks {
            let path = mask_path(&a.out, &t.id, *index);
            write_mask(&path, mask, t.num_classes)?;
            record.outputs.push(path);
        }
        record.frame_times_ms.extend(&t.frame_times_ms);
    }
    record.append(&a.out)?;
    Ok(())
}

/// Mask files under `dir`, grouped by video. Files directly in `dir` form a
/// video with an empty id; each subdirectory is a video named after it.
fn mask_tree(dir: &Path) -> Result<BTreeMap<String, BTreeMap<u64, PathBuf>>> {
    let mut tree: BTreeMap<String, BTreeMap<u64, PathBuf>> = BTreeMap::new();
    for (id, path) in list_dir(dir)? {
        if path.is_dir() {
            let frames = indexed_files(&path, MASK_EXT)?;
            if !frames.is_empty() {
                tree.insert(id, frames);
            }
        }
    }
    let flat = indexed_files(dir, MASK_EXT)?;
    if !flat.is_empty() {
        tree.insert(String::new(), flat);
    }
    Ok(tree)
}

fn list_dir(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((name, path));
    }
    out.sort();
    Ok(out)
}

fn indexed_files(dir: &Path, ext: &str) -> Result<BTreeMap<u64, PathBuf>> {
    let mut out = BTreeMap::new();
    for (_, path) in list_dir(dir)? {
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            let index = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| Error::BadFrameName(path.clone()))?;
            out.insert(index, path);
        }
    }
    Ok(out)
}

/// Video id, first annotated index, and (index, prediction, truth) frames.
type VideoPair = (String, u64, Vec<(u64, LabelMask, LabelMask)>);

fn eval_videos(
    pairs: Vec<VideoPair>,
    variant: FVariant,
) -> Result<EvalReport> {
    let videos = pairs
        .into_par_iter()
        .map(|(id, first_index, frames)| {
            let frames = frames
                .iter()
                .map(|(index, pred, gt)| {
                    let k = pred.num_classes().max(gt.num_classes()) as usize;
                    score_frame(*index, pred, gt, k, variant)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(VideoScores {
                id,
                first_index,
                frames,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(&videos)
}

fn f_variant(a: FVariantArg, tol: usize) -> FVariant {
    match a {
        FVariantArg::Pixel => FVariant::Pixel,
        FVariantArg::Boundary => FVariant::Boundary { tolerance: tol },
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let variant = f_variant(a.f_variant, a.boundary_tol);
    let gt = mask_tree(&a.gt)?;
    let pred = mask_tree(&a.pred)?;
    if gt.is_empty() {
        return Err(Error::Dimension(format!(
            "no ground-truth masks under {}",
            a.gt.display()
        )));
    }
    let mut pairs = Vec::new();
    for (id, gt_frames) in &gt {
        let name = if id.is_empty() { "." } else { id.as_str() };
        let pred_frames = pred.get(id).ok_or_else(|| {
            Error::Dimension(format!("no predictions for video {name}"))
        })?;
        let (&first_index, _) = gt_frames.iter().next().expect("non-empty");
        let n = gt_frames.len();
        if pred_frames.len() != n && pred_frames.len() + 1 != n {
            return Err(Error::Dimension(format!(
                "frame-count mismatch in video {name}: {} predicted, {n} ground truth",
                pred_frames.len()
            )));
        }
        let mut frames = Vec::with_capacity(n - 1);
        for (&index, gt_path) in gt_frames.iter().skip(1) {
            let pred_path = pred_frames.get(&index).ok_or_else(|| {
                Error::Dimension(format!("video {name} has no prediction for frame {index}"))
            })?;
            frames.push((index, read_mask(pred_path)?, read_mask(gt_path)?));
        }
        pairs.push((name.to_string(), first_index, frames));
    }
    let mut report = eval_videos(pairs, variant)?;
    report.config = json!({ "pred": a.pred, "gt": a.gt, "f": variant });
    println!("{}", report.summary_line());

    let mut record = RunRecord::new("eval", report.config.clone());
    if let Some(path) = &a.report {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        record.outputs.push(path.clone());
    }
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
        record.outputs.push(path.clone());
    }
    let log_dir = match &a.report {
        Some(p) => p.parent().map(Path::to_path_buf).unwrap_or_default(),
        None => a.pred.clone(),
    };
    record.append(&log_dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PcaSummary {
    frames: Vec<String>,
    explained: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temporal_consistency: Option<Vec<Option<f64>>>,
}

pub fn cmd_viz_pca(a: &VizArgs) -> Result<()> {
    let files: Vec<(String, PathBuf)> = if a.features.is_dir() {
        list_dir(&a.features)?
            .into_iter()
            .filter(|(_, p)| p.is_file() && p.extension().is_some_and(|e| e == FEATURE_EXT))
            .map(|(_, p)| (stem(&p), p))
            .collect()
    } else {
        vec![(stem(&a.features), a.features.clone())]
    };
    if files.is_empty() {
        return Err(Error::Dimension(format!(
            "no feature files under {}",
            a.features.display()
        )));
    }
    let grids = files
        .iter()
        .map(|(_, p)| read_feature_map(p))
        .collect::<Result<Vec<_>>>()?;
    let basis = fit_pca(&grids, 3.min(grids[0].channels()))?;

    let mut record = RunRecord::new("viz-pca", json!({ "features": a.features, "masks": a.masks }));
    let images = grids
        .par_iter()
        .map(|g| render_pca_rgb(g, &basis))
        .collect::<Result<Vec<_>>>()?;
    for ((name, _), img) in files.iter().zip(&images) {
        let path = a.out.join(format!("{name}.ppm"));
        write_bytes(&path, &img.to_ppm())?;
        record.outputs.push(path);
    }

    let temporal_consistency = match &a.masks {
        Some(dir) => {
            let masks = files
                .iter()
                .zip(&grids)
                .map(|((name, _), g)| {
                    let m = read_mask(dir.join(format!("{name}.{MASK_EXT}")))?;
                    if m.height() == g.height() && m.width() == g.width() {
                        Ok(m)
                    } else {
                        Ok(downsample_mask(&m, g.height(), g.width())?.argmax())
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Some(temporal_consistency_score(&grids, &masks)?)
        }
        None => None,
    };
    let summary = PcaSummary {
        frames: files.iter().map(|(n, _)| n.clone()).collect(),
        explained: basis.explained.clone(),
        temporal_consistency,
    };
    let path = a.out.join("pca.json");
    write_text(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    record.outputs.push(path);
    record.append(&a.out)?;
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_motion(s: &str) -> Result<(i64, i64)> {
    let bad = || Error::Config(format!("motion must be dy,dx integers, got {s:?}"));
    let (dy, dx) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        dy.trim().parse().map_err(|_| bad())?,
        dx.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        height: a.h,
        width: a.w,
        channels: a.c,
        num_classes: a.classes,
        frames: a.frames,
        noise: a.noise,
        motion: parse_motion(&a.motion)?,
        seed: a.seed,
        mask_scale: a.mask_scale,
    };
    let seq = gen_sequence(&cfg)?;
    let manifest = write_dataset(&a.out, &cfg, &seq)?;
    let mut record = RunRecord::new("synth", serde_json::to_value(&cfg)?);
    record.outputs.push(manifest);
    record.append(&a.out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateParam {
    Tau,
    Window,
    Memory,
}

impl std::str::FromStr for AblateParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(AblateParam::Tau),
            "window" => Ok(AblateParam::Window),
            "memory" => Ok(AblateParam::Memory),
            other => Err(Error::Config(format!(
                "unknown parameter {other:?} (expected tau, window or memory)"
            ))),
        }
    }
}

impl AblateParam {
    fn apply(self, base: &TrackerConfig, value: &str) -> Result<TrackerConfig> {
        let bad = || Error::Config(format!("bad value {value:?} for {self:?}"));
        let mut cfg = base.clone();
        match self {
            AblateParam::Tau => cfg.tau = value.parse().map_err(|_| bad())?,
            AblateParam::Window => cfg.window = value.parse().map_err(|_| bad())?,
            AblateParam::Memory => cfg.memory = value.parse().map_err(|_| bad())?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Tracks and scores every video of `manifest` under `cfg`, using the
/// manifest's own masks as ground truth.
pub fn track_and_score(manifest: &DatasetManifest, cfg: &TrackerConfig) -> Result<EvalReport> {
    let videos: Vec<&VideoEntry> = manifest.videos.iter().collect();
    let tracked = track_videos(&videos, None, cfg)?;
    let mut pairs = Vec::new();
    for (video, t) in videos.iter().zip(tracked) {
        let mut frames = Vec::new();
        for (entry, (index, pred)) in video.frames[1..].iter().zip(t.masks) {
            if let Some(gt) = &entry.mask {
                frames.push((index, pred, read_mask(gt)?));
            }
        }
        pairs.push((t.id, t.first_index, frames));
    }
    eval_videos(pairs, FVariant::Pixel)
}

pub const ABLATION_CSV: &str = "ablation.csv";

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let param: AblateParam = a.param.parse()?;
    let values: Vec<&str> = a
        .values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Config("no values to sweep".into()));
    }
    let base = a.params.config();
    let configs = values
        .iter()
        .map(|v| param.apply(&base, v))
        .collect::<Result<Vec<_>>>()?;
    let manifest = load_manifest(&a.manifest)?;

    let mut csv = String::from("value,j_mean,f_mean,pixel_accuracy\n");
    for (value, cfg) in values.iter().zip(&configs) {
        let s = track_and_score(&manifest, cfg)?.dataset;
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        csv.push_str(&format!(
            "{value},{},{},{}\n",
            cell(s.j_mean),
            cell(s.f_mean),
            cell(s.pixel_accuracy)
        ));
    }
    let path = a.out.join(ABLATION_CSV);
    write_text(&path, &csv)?;
    let mut record = RunRecord::new(
        "ablate",
        json!({ "param": a.param, "values": values, "base": base, "manifest": a.manifest }),
    );
    record.manifest_digest = Some(file_digest(&a.manifest)?);
    record.outputs.push(path);
    record.append(&a.out)?;
    Ok(())
}
