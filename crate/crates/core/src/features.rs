//! Raw-pixel feature extraction.
//!
//! Images are decoded to 8-bit RGB, resized with bilinear interpolation to a
//! square raster and flattened row-major with interleaved channels, then
//! scaled into `[0, 1]`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::DynamicImage;
use thiserror::Error;

use crate::util;

/// Side length of the square raster fed to the SVM.
pub const DEFAULT_SIDE: u32 = 100;
pub const DEFAULT_SCALE: f64 = 1.0 / 255.0;

pub const CACHE_MAGIC: [u8; 4] = *b"FBFC";
pub const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("{path}: cannot decode image: {reason}")]
    DecodeFile { path: PathBuf, reason: String },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("feature cache is corrupt: {0}")]
    CorruptCache(String),
    #[error("feature cache schema version {found} is not supported (expected {expected})")]
    CacheSchemaMismatch { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    /// `data` is row-major, RGB-interleaved.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, FeatureError> {
        if width == 0 || height == 0 {
            return Err(FeatureError::InvalidRaster(format!(
                "dimensions {width}x{height} must be positive"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(FeatureError::InvalidRaster(format!(
                "{width}x{height} RGB needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        RasterImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("raster length is validated at construction")
    }
}

fn from_dynamic(img: DynamicImage) -> RasterImage {
    let (width, height) = (img.width(), img.height());
    let data = if img.color().has_alpha() {
        let rgba = img.to_rgba8();
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for px in rgba.pixels() {
            let alpha = px[3] as f64 / 255.0;
            for c in &px.0[..3] {
                let blended = alpha * *c as f64 + (1.0 - alpha) * 255.0;
                data.push(blended.round().clamp(0.0, 255.0) as u8);
            }
        }
        data
    } else {
        img.to_rgb8().into_raw()
    };
    RasterImage {
        width,
        height,
        data,
    }
}

/// Decodes PNG or JPEG bytes to RGB. Grayscale is replicated across the
/// three channels; alpha is composited over white.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, FeatureError> {
    let img = image::load_from_memory(bytes).map_err(|e| FeatureError::Decode(e.to_string()))?;
    Ok(from_dynamic(img))
}

pub fn decode_image_file(path: &Path) -> Result<RasterImage, FeatureError> {
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes).map_err(|e| FeatureError::DecodeFile {
        path: path.to_path_buf(),
        reason: match e {
            FeatureError::Decode(reason) => reason,
            other => other.to_string(),
        },
    })
}

/// Source coordinate and blend weight along one axis, half-pixel centers.
fn sample_axis(out_len: u32, in_len: u32) -> Vec<(usize, usize, f64)> {
    let ratio = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, last);
            let lo = src.floor();
            let i0 = lo as usize;
            let i1 = (i0 + 1).min(in_len as usize - 1);
            (i0, i1, src - lo)
        })
        .collect()
}

/// Bilinear resize with half-pixel centers. Values are rounded to the
/// nearest integer; resizing to the source dimensions is the identity.
pub fn resize_bilinear(img: &RasterImage, out_w: u32, out_h: u32) -> RasterImage {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    let xs = sample_axis(out_w, img.width);
    let ys = sample_axis(out_h, img.height);
    let stride = img.width as usize * 3;
    let src = &img.data;
    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, ty) in &ys {
        let row0 = &src[y0 * stride..(y0 + 1) * stride];
        let row1 = &src[y1 * stride..(y1 + 1) * stride];
        for &(x0, x1, tx) in &xs {
            for c in 0..3 {
                let p00 = row0[x0 * 3 + c] as f64;
                let p01 = row0[x1 * 3 + c] as f64;
                let p10 = row1[x0 * 3 + c] as f64;
                let p11 = row1[x1 * 3 + c] as f64;
                let top = p00 + (p01 - p00) * tx;
                let bottom = p10 + (p11 - p10) * tx;
                let v = top + (bottom - top) * ty;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage {
        width: out_w,
        height: out_h,
        data,
    }
}

/// One image as a flat feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub sample_id: String,
    pub label: Option<usize>,
    pub values: Vec<f32>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn with_id(mut self, sample_id: impl Into<String>) -> Self {
        self.sample_id = sample_id.into();
        self
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }
}

/// Resizes to `side`×`side`, flattens row-major RGB-interleaved and
/// multiplies by `scale`. The result has `side² · 3` entries.
pub fn extract_features(img: &RasterImage, side: u32, scale: f64) -> FeatureVector {
    let resized = if img.width == side && img.height == side {
        img.clone()
    } else {
        resize_bilinear(img, side, side)
    };
    let values = resized
        .data
        .iter()
        .map(|&v| (v as f64 * scale) as f32)
        .collect();
    FeatureVector {
        sample_id: String::new(),
        label: None,
        values,
    }
}

pub fn extract_file_features(path: &Path, side: u32, scale: f64) -> Result<FeatureVector, FeatureError> {
    Ok(extract_features(&decode_image_file(path)?, side, scale))
}

/// Encodes feature vectors in the binary cache layout:
///
/// ```text
/// header:  magic "FBFC" | schema_version u32 | dim u32 | count u32
/// record:  id_len u32 | id bytes (UTF-8) | label i32 (-1 = none) | dim × f32
/// ```
///
/// All integers and floats are little-endian.
pub fn write_feature_cache<W: Write>(mut w: W, vectors: &[FeatureVector]) -> std::io::Result<()> {
    let dim = vectors.first().map_or(0, FeatureVector::dim);
    if vectors.iter().any(|v| v.dim() != dim) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "feature vectors have mixed dimensions",
        ));
    }
    w.write_all(&CACHE_MAGIC)?;
    w.write_all(&CACHE_SCHEMA_VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(vectors.len() as u32).to_le_bytes())?;
    for v in vectors {
        let id = v.sample_id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id)?;
        let label = v.label.map_or(-1i32, |l| l as i32);
        w.write_all(&label.to_le_bytes())?;
        for x in &v.values {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), FeatureError> {
    r.read_exact(buf)
        .map_err(|_| FeatureError::CorruptCache(format!("truncated while reading {what}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, FeatureError> {
    let mut b = [0u8; 4];
    read_exact_or_corrupt(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_feature_cache<R: Read>(mut r: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut magic = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut magic, "magic")?;
    if magic != CACHE_MAGIC {
        return Err(FeatureError::CorruptCache("bad magic".into()));
    }
    let version = read_u32(&mut r, "schema version")?;
    if version != CACHE_SCHEMA_VERSION {
        return Err(FeatureError::CacheSchemaMismatch {
            found: version,
            expected: CACHE_SCHEMA_VERSION,
        });
    }
    let dim = read_u32(&mut r, "dim")? as usize;
    let count = read_u32(&mut r, "count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    let mut floats = vec![0u8; dim * 4];
    for i in 0..count {
        let id_len = read_u32(&mut r, "id length")? as usize;
        let mut id = vec![0u8; id_len];
        read_exact_or_corrupt(&mut r, &mut id, "sample id")?;
        let sample_id = String::from_utf8(id)
            .map_err(|_| FeatureError::CorruptCache(format!("record {i}: id is not UTF-8")))?;
        let mut lb = [0u8; 4];
        read_exact_or_corrupt(&mut r, &mut lb, "label")?;
        let label = match i32::from_le_bytes(lb) {
            -1 => None,
            l if l >= 0 => Some(l as usize),
            l => {
                return Err(FeatureError::CorruptCache(format!(
                    "record {i}: invalid label {l}"
                )))
            }
        };
        read_exact_or_corrupt(&mut r, &mut floats, "feature values")?;
        let values = floats
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push(FeatureVector {
            sample_id,
            label,
            values,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).unwrap_or(0) != 0 {
        return Err(FeatureError::CorruptCache("trailing bytes after last record".into()));
    }
    Ok(out)
}

pub fn save_feature_cache(path: &Path, vectors: &[FeatureVector]) -> Result<(), FeatureError> {
    let mut buf = Vec::new();
    write_feature_cache(&mut buf, vectors).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    util::write_atomic(path, &buf).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_feature_cache(path: &Path) -> Result<Vec<FeatureVector>, FeatureError> {
    let file = std::fs::File::open(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_feature_cache(std::io::BufReader::new(file))
}
