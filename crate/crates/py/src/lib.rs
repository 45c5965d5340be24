//! Python bindings. Grids cross the boundary as flat row-major lists; the
//! heavy lifting runs with the interpreter detached.

use std::path::PathBuf;

use maskflow::analysis::{self, PcaBasis as CorePca};
use maskflow::engine::{self, MemoryMode};
use maskflow::metrics::{self, FVariant};
use maskflow::{store, synth, ErrorCategory};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: maskflow::Error) -> PyErr {
    match e.category() {
        ErrorCategory::Io => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct FeatureMap(maskflow::FeatureMap);

#[pymethods]
impl FeatureMap {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> PyResult<Self> {
        maskflow::FeatureMap::new(height, width, channels, data)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels()
    }

    #[getter]
    fn data(&self) -> Vec<f32> {
        self.0.data().to_vec()
    }

    fn pixel(&self, y: usize, x: usize) -> PyResult<Vec<f32>> {
        if y >= self.0.height() || x >= self.0.width() {
            return Err(PyValueError::new_err(format!("pixel ({y}, {x}) out of range")));
        }
        Ok(self.0.pixel(y, x).to_vec())
    }

    /// Unit L2 norm per pixel; zero vectors stay zero.
    fn normalized(&self) -> Self {
        Self(self.0.normalized())
    }

    fn __repr__(&self) -> String {
        format!("FeatureMap({}x{}x{})", self.0.height(), self.0.width(), self.0.channels())
    }
}

#[pyclass(frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct LabelMask(maskflow::LabelMask);

#[pymethods]
impl LabelMask {
    #[new]
    fn new(height: usize, width: usize, num_classes: u16, labels: Vec<u16>) -> PyResult<Self> {
        maskflow::LabelMask::new(height, width, num_classes, labels)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn num_classes(&self) -> u16 {
        self.0.num_classes()
    }

    #[getter]
    fn labels(&self) -> Vec<u16> {
        self.0.labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "LabelMask({}x{}, {} classes)",
            self.0.height(),
            self.0.width(),
            self.0.num_classes()
        )
    }
}

#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct TrackerConfig(maskflow::TrackerConfig);

#[pymethods]
impl TrackerConfig {
    #[new]
    #[pyo3(signature = (tau=0.2, window=50, memory=10, memory_mode="hard", anchor_first_frame=false))]
    fn new(tau: f64, window: usize, memory: usize, memory_mode: &str, anchor_first_frame: bool) -> PyResult<Self> {
        let cfg = maskflow::TrackerConfig {
            tau,
            window,
            memory,
            memory_mode: memory_mode.parse().map_err(to_py)?,
            anchor_first_frame,
        };
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }

    #[getter]
    fn window(&self) -> usize {
        self.0.window
    }

    #[getter]
    fn memory(&self) -> usize {
        self.0.memory
    }

    #[getter]
    fn memory_mode(&self) -> &'static str {
        match self.0.memory_mode {
            MemoryMode::Hard => "hard",
            MemoryMode::Soft => "soft",
        }
    }

    #[getter]
    fn anchor_first_frame(&self) -> bool {
        self.0.anchor_first_frame
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(frozen, skip_from_py_object)]
struct PcaBasis(CorePca);

#[pymethods]
impl PcaBasis {
    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean.clone()
    }

    #[getter]
    fn directions(&self) -> Vec<Vec<f64>> {
        self.0.directions.clone()
    }

    #[getter]
    fn explained(&self) -> Vec<f64> {
        self.0.explained.clone()
    }

    fn project(&self, v: Vec<f32>) -> PyResult<Vec<f64>> {
        if v.len() != self.0.channels() {
            return Err(PyValueError::new_err(format!(
                "expected {} channels, got {}",
                self.0.channels(),
                v.len()
            )));
        }
        Ok(self.0.project(&v))
    }
}

fn unwrap_maps(maps: &[Bound<'_, FeatureMap>]) -> Vec<maskflow::FeatureMap> {
    maps.iter().map(|m| m.get().0.clone()).collect()
}

/// Masks for every frame after the first. `threads` 0 uses all cores.
#[pyfunction]
#[pyo3(signature = (features, first_mask, config=None, threads=0))]
fn track_video(
    py: Python<'_>,
    features: Vec<Bound<'_, FeatureMap>>,
    first_mask: &Bound<'_, LabelMask>,
    config: Option<&Bound<'_, TrackerConfig>>,
    threads: usize,
) -> PyResult<Vec<LabelMask>> {
    let features = unwrap_maps(&features);
    let first = first_mask.get().0.clone();
    let cfg = config.map_or_else(Default::default, |c| c.borrow().0.clone());
    let masks = py
        .detach(|| engine::track_video_with_threads(&features, &first, &cfg, threads))
        .map_err(to_py)?;
    Ok(masks.into_iter().map(LabelMask).collect())
}

/// Per-frame scores as a dict. Classes absent from both masks score None.
#[pyfunction]
#[pyo3(signature = (pred, gt, num_classes, boundary_tolerance=None))]
fn score_frame<'py>(
    py: Python<'py>,
    pred: &Bound<'py, LabelMask>,
    gt: &Bound<'py, LabelMask>,
    num_classes: usize,
    boundary_tolerance: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = boundary_tolerance.map_or(FVariant::Pixel, |tolerance| FVariant::Boundary { tolerance });
    let s = metrics::score_frame(0, &pred.get().0, &gt.get().0, num_classes, variant).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("jaccard", &s.jaccard)?;
    d.set_item("f_score", &s.f_score)?;
    d.set_item("pixel_accuracy", s.pixel_accuracy)?;
    d.set_item("j_mean", s.j_mean())?;
    d.set_item("f_mean", s.f_mean())?;
    Ok(d)
}

/// Synthetic sequence with exact ground truth: `(features, masks)`.
#[pyfunction]
#[pyo3(signature = (height=32, width=32, channels=8, num_classes=4, frames=10, noise=0.0, motion=(1, 1), seed=0, mask_scale=1))]
#[allow(clippy::too_many_arguments)]
fn gen_sequence(
    height: usize,
    width: usize,
    channels: usize,
    num_classes: u16,
    frames: usize,
    noise: f64,
    motion: (i64, i64),
    seed: u64,
    mask_scale: usize,
) -> PyResult<(Vec<FeatureMap>, Vec<LabelMask>)> {
    let cfg = synth::SynthConfig {
        height,
        width,
        channels,
        num_classes,
        frames,
        noise,
        motion,
        seed,
        mask_scale,
    };
    let seq = synth::gen_sequence(&cfg).map_err(to_py)?;
    Ok((
        seq.features.into_iter().map(FeatureMap).collect(),
        seq.masks.into_iter().map(LabelMask).collect(),
    ))
}

#[pyfunction]
fn read_feature_map(path: PathBuf) -> PyResult<FeatureMap> {
    store::read_feature_map(path).map(FeatureMap).map_err(to_py)
}

#[pyfunction]
fn write_feature_map(path: PathBuf, grid: &Bound<'_, FeatureMap>) -> PyResult<()> {
    store::write_feature_map(path, &grid.get().0).map_err(to_py)
}

#[pyfunction]
fn read_mask(path: PathBuf) -> PyResult<LabelMask> {
    store::read_mask(path).map(LabelMask).map_err(to_py)
}

/// `num_classes` defaults to the mask's own class count.
#[pyfunction]
#[pyo3(signature = (path, mask, num_classes=None))]
fn write_mask(path: PathBuf, mask: &Bound<'_, LabelMask>, num_classes: Option<u16>) -> PyResult<()> {
    let mask = &mask.get().0;
    store::write_mask(path, mask, num_classes.unwrap_or(mask.num_classes())).map_err(to_py)
}

/// Validated manifest as plain Python data, paths resolved.
#[pyfunction]
fn load_manifest(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let manifest = store::load_manifest(path).map_err(to_py)?;
    let text = serde_json::to_string(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyfunction]
fn fit_pca(py: Python<'_>, grids: Vec<Bound<'_, FeatureMap>>, k: usize) -> PyResult<PcaBasis> {
    let grids = unwrap_maps(&grids);
    py.detach(|| analysis::fit_pca(&grids, k))
        .map(PcaBasis)
        .map_err(to_py)
}

/// `(height, width, rgb)` with rgb flat row-major in `[0, 1]`.
#[pyfunction]
fn render_pca_rgb(
    grid: &Bound<'_, FeatureMap>,
    basis: &Bound<'_, PcaBasis>,
) -> PyResult<(usize, usize, Vec<f32>)> {
    let img = analysis::render_pca_rgb(&grid.get().0, &basis.get().0).map_err(to_py)?;
    Ok((img.height, img.width, img.data))
}

#[pymodule(name = "maskflow")]
fn maskflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FeatureMap>()?;
    m.add_class::<LabelMask>()?;
    m.add_class::<TrackerConfig>()?;
    m.add_class::<PcaBasis>()?;
    m.add_function(wrap_pyfunction!(track_video, m)?)?;
    m.add_function(wrap_pyfunction!(score_frame, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(read_feature_map, m)?)?;
    m.add_function(wrap_pyfunction!(write_feature_map, m)?)?;
    m.add_function(wrap_pyfunction!(read_mask, m)?)?;
    m.add_function(wrap_pyfunction!(write_mask, m)?)?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(render_pca_rgb, m)?)?;
    Ok(())
}
