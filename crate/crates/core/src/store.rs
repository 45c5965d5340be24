//! Portable on-disk formats: feature maps (`FMAP`), label masks (`LMSK`) and
//! the JSON dataset manifest.
//!
//! Feature map layout (all integers little-endian):
//!
//! ```text
//! 0   4  magic "FMAP"
//! 4   1  version (1)
//! 5   1  dtype (1 = f32 LE)
//! 6   1  ndim (3)
//! 7   1  reserved (0)
//! 8   12 H, W, C as u32
//! 20  .. H*W*C f32, row-major, channel fastest
//! ```
//!
//! Label mask layout:
//!
//! ```text
//! 0   4  magic "LMSK"
//! 4   1  version (1)
//! 5   2  num_classes K as u16
//! 7   8  H, W as u32
//! 15  .. H*W u16 labels, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask};

pub const FEATURE_MAGIC: &[u8; 4] = b"FMAP";
pub const MASK_MAGIC: &[u8; 4] = b"LMSK";
pub const FORMAT_VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;
pub const FEATURE_HEADER_LEN: usize = 20;
pub const MASK_HEADER_LEN: usize = 15;

pub const FEATURE_EXT: &str = "fmap";
pub const MASK_EXT: &str = "lmsk";

pub fn encode_feature_map(grid: &FeatureMap) -> Result<Vec<u8>> {
    if let Some(index) = grid.first_non_finite() {
        return Err(Error::NonFinite { index });
    }
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * grid.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&[FORMAT_VERSION, DTYPE_F32, 3, 0]);
    for dim in [grid.height(), grid.width(), grid.channels()] {
        out.extend_from_slice(&dim_u32(dim)?.to_le_bytes());
    }
    for v in grid.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < 4 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::NotFeatureFile);
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(Error::LengthMismatch {
            expected: FEATURE_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let (version, dtype, ndim, reserved) = (bytes[4], bytes[5], bytes[6], bytes[7]);
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported {
            what: "version",
            value: version.into(),
        });
    }
    if dtype != DTYPE_F32 {
        return Err(Error::Unsupported {
            what: "dtype",
            value: dtype.into(),
        });
    }
    if ndim != 3 {
        return Err(Error::Unsupported {
            what: "ndim",
            value: ndim.into(),
        });
    }
    if reserved != 0 {
        return Err(Error::Unsupported {
            what: "reserved byte",
            value: reserved.into(),
        });
    }
    let h = read_u32(bytes, 8) as usize;
    let w = read_u32(bytes, 12) as usize;
    let c = read_u32(bytes, 16) as usize;
    let payload = &bytes[FEATURE_HEADER_LEN..];
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Dimension(format!("feature dims {h}x{w}x{c} overflow")))?;
    if payload.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: payload.len(),
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    FeatureMap::new(h, w, c, data)
}

pub fn encode_mask(mask: &LabelMask) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + 2 * mask.labels().len());
    out.extend_from_slice(MASK_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&mask.num_classes().to_le_bytes());
    out.extend_from_slice(&dim_u32(mask.height())?.to_le_bytes());
    out.extend_from_slice(&dim_u32(mask.width())?.to_le_bytes());
    for l in mask.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

/// Parsed `LMSK` header: `(num_classes, height, width)`.
pub fn decode_mask_header(bytes: &[u8]) -> Result<(u16, usize, usize)> {
    if bytes.len() < 4 || &bytes[..4] != MASK_MAGIC {
        return Err(Error::NotMaskFile);
    }
    if bytes.len() < MASK_HEADER_LEN {
        return Err(Error::LengthMismatch {
            expected: MASK_HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Unsupported {
            what: "version",
            value: bytes[4].into(),
        });
    }
    let k = u16::from_le_bytes([bytes[5], bytes[6]]);
    let h = read_u32(bytes, 7) as usize;
    let w = read_u32(bytes, 11) as usize;
    Ok((k, h, w))
}

pub fn decode_mask(bytes: &[u8]) -> Result<LabelMask> {
    let (k, h, w) = decode_mask_header(bytes)?;
    let payload = &bytes[MASK_HEADER_LEN..];
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| Error::Dimension(format!("mask dims {h}x{w} overflow")))?;
    if payload.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: payload.len(),
        });
    }
    let labels = payload
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    LabelMask::new(h, w, k, labels)
}

pub fn write_feature_map(path: impl AsRef<Path>, grid: &FeatureMap) -> Result<()> {
    let bytes = encode_feature_map(grid)?;
    write_bytes(path.as_ref(), &bytes)
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_map(&bytes)
}

/// Writes `mask`, declaring `num_classes` classes in the header.
pub fn write_mask(path: impl AsRef<Path>, mask: &LabelMask, num_classes: u16) -> Result<()> {
    let mask = if num_classes == mask.num_classes() {
        mask.clone()
    } else {
        LabelMask::new(
            mask.height(),
            mask.width(),
            num_classes,
            mask.labels().to_vec(),
        )?
    };
    write_bytes(path.as_ref(), &encode_mask(&mask)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn dim_u32(dim: usize) -> Result<u32> {
    u32::try_from(dim).map_err(|_| Error::Dimension(format!("dimension {dim} exceeds u32")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: u16,
    pub name: String,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: u64,
    /// Raw frame image; informational only, frames enter as features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub frames: Vec<FrameEntry>,
}

/// Dataset description. Relative paths are resolved against the manifest's
/// directory by [`load_manifest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub palette: Vec<PaletteEntry>,
    pub videos: Vec<VideoEntry>,
}

impl DatasetManifest {
    pub fn video(&self, id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn num_classes(&self) -> usize {
        self.palette.len()
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for frame in self.videos.iter_mut().flat_map(|v| v.frames.iter_mut()) {
            fix(&mut frame.features);
            if let Some(p) = frame.image.as_mut() {
                fix(p);
            }
            if let Some(p) = frame.mask.as_mut() {
                fix(p);
            }
        }
    }

    /// Checks palette contiguity, frame order and that every referenced path
    /// exists. Mask headers are read to confirm the palette covers them.
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u16> = self.palette.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        for (expected, &id) in ids.iter().enumerate() {
            if id as usize != expected {
                return Err(Error::PaletteGap(expected as u16));
            }
        }
        for video in &self.videos {
            for pair in video.frames.windows(2) {
                if pair[1].index <= pair[0].index {
                    return Err(Error::FrameOrder {
                        video: video.id.clone(),
                        index: pair[1].index,
                    });
                }
            }
            for frame in &video.frames {
                let paths = std::iter::once(&frame.features)
                    .chain(frame.image.as_ref())
                    .chain(frame.mask.as_ref());
                for p in paths {
                    if !p.exists() {
                        return Err(Error::DanglingPath(p.clone()));
                    }
                }
                if let Some(mask_path) = &frame.mask {
                    let mut header = [0u8; MASK_HEADER_LEN];
                    read_prefix(mask_path, &mut header)?;
                    let (k, _, _) = decode_mask_header(&header)?;
                    if k as usize > self.palette.len() {
                        return Err(Error::PaletteTooSmall {
                            path: mask_path.clone(),
                            palette: self.palette.len(),
                            num_classes: k,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn read_prefix(path: &Path, buf: &mut [u8]) -> Result<()> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut filled = 0;
    while filled < buf.len() {
        let n = f.read(&mut buf[filled..]).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    if filled < 4 || &buf[..4] != MASK_MAGIC {
        return Err(Error::NotMaskFile);
    }
    if filled < buf.len() {
        return Err(Error::LengthMismatch {
            expected: buf.len(),
            found: filled,
        });
    }
    Ok(())
}

pub fn parse_manifest(text: &str, base: &Path, origin: &Path) -> Result<DatasetManifest> {
    let mut manifest: DatasetManifest =
        serde_json::from_str(text).map_err(|e| Error::MalformedManifest {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
    manifest.resolve_paths(base);
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base, path)
}

/// Writes `manifest` as pretty JSON. Paths are written as given.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}
