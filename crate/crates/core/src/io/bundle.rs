//! Binary bundle, little-endian:
//!
//! ```text
//! "TPVM" | u32 version | u32 width | u32 height | u32 M | u32 K
//! | u8 fusion mode (0 sum, 1 mean) | u8 mask present
//! | X: N·M f64, frame-major | W: M·K f64, viewer-major | [mask: N·M f64, pixel-major]
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::masks::SpatialMask;
use crate::model::{Factorization, FusionMode, Image, WeightMatrix};

pub const BUNDLE_MAGIC: &[u8; 4] = b"TPVM";
pub const BUNDLE_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 5 + 2;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported bundle version {0} (expected {BUNDLE_VERSION})")]
    VersionMismatch(u32),

    #[error("truncated bundle: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("invalid bundle: {0}")]
    Invariant(String),
}

/// Atom frames, weights and an optional spatial mask, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub mode: FusionMode,
    pub frames: Vec<Image>,
    pub weights: WeightMatrix,
    pub mask: Option<SpatialMask>,
}

impl Bundle {
    pub fn new(frames: Vec<Image>, weights: WeightMatrix, mode: FusionMode) -> Result<Self, BundleError> {
        let b = Bundle {
            mode,
            frames,
            weights,
            mask: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn from_factorization(f: &Factorization, mode: FusionMode) -> Self {
        Bundle {
            mode,
            frames: f.frames().to_vec(),
            weights: f.weights().clone(),
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: SpatialMask) -> Result<Self, BundleError> {
        self.mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    pub fn to_factorization(&self) -> Factorization {
        Factorization::new(self.frames.clone(), self.weights.clone()).expect("validated bundle")
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn viewer_count(&self) -> usize {
        self.weights.viewers()
    }

    fn validate(&self) -> Result<(), BundleError> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| BundleError::Invariant("no atom frames".into()))?;
        if self.frames.iter().any(|f| !f.same_shape(first)) {
            return Err(BundleError::Invariant("atom frames differ in size".into()));
        }
        if self.weights.frames() != self.frames.len() {
            return Err(BundleError::Invariant(format!(
                "{} atom frames but W has {} rows",
                self.frames.len(),
                self.weights.frames()
            )));
        }
        if let Some(mask) = &self.mask {
            if mask.width() != first.width() || mask.height() != first.height() || mask.frames() != self.frames.len() {
                return Err(BundleError::Invariant(
                    "mask dimensions do not match the atom frames".into(),
                ));
            }
        }
        Ok(())
    }
}

fn u32_field(v: usize, what: &str) -> Result<u32, BundleError> {
    u32::try_from(v).map_err(|_| BundleError::Invariant(format!("{what} {v} does not fit in u32")))
}

pub fn encode_bundle(b: &Bundle) -> Result<Vec<u8>, BundleError> {
    b.validate()?;
    let (n, m, k) = (b.width() * b.height(), b.frame_count(), b.viewer_count());
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (n * m * 2 + m * k));
    out.extend_from_slice(BUNDLE_MAGIC);
    for v in [
        BUNDLE_VERSION,
        u32_field(b.width(), "width")?,
        u32_field(b.height(), "height")?,
        u32_field(m, "frame count")?,
        u32_field(k, "viewer count")?,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match b.mode {
        FusionMode::Sum => 0,
        FusionMode::Mean => 1,
    });
    out.push(b.mask.is_some() as u8);
    let floats = b
        .frames
        .iter()
        .flat_map(|f| f.pixels().iter())
        .chain(b.weights.as_slice())
        .chain(b.mask.iter().flat_map(|mask| mask.as_slice().iter()));
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    fn u8(&mut self) -> u8 {
        let v = self.bytes[self.pos];
        self.pos += 1;
        v
    }

    fn f64s(&mut self, count: usize) -> Vec<f64> {
        let end = self.pos + 8 * count;
        let v = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        v
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<Bundle, BundleError> {
    if bytes.len() < 4 {
        return Err(BundleError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != BUNDLE_MAGIC {
        return Err(BundleError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(BundleError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != BUNDLE_VERSION {
        return Err(BundleError::VersionMismatch(version));
    }
    let (width, height, m, k) = (r.u32() as usize, r.u32() as usize, r.u32() as usize, r.u32() as usize);
    let mode = match r.u8() {
        0 => FusionMode::Sum,
        1 => FusionMode::Mean,
        other => return Err(BundleError::Invariant(format!("unknown fusion mode byte {other}"))),
    };
    let has_mask = match r.u8() {
        0 => false,
        1 => true,
        other => return Err(BundleError::Invariant(format!("mask flag must be 0 or 1, got {other}"))),
    };
    if width == 0 || height == 0 || m == 0 || k == 0 {
        return Err(BundleError::Invariant(format!(
            "zero dimension: {width}x{height}, M={m}, K={k}"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| BundleError::Invariant("image dimensions overflow".into()))?;
    let floats = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_mul(if has_mask { 2 } else { 1 }))
        .and_then(|v| v.checked_add(m * k))
        .ok_or_else(|| BundleError::Invariant("payload size overflows".into()))?;
    let expected = HEADER_LEN + 8 * floats;
    if bytes.len() < expected {
        return Err(BundleError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(BundleError::Invariant(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let invariant = |e: crate::Error| BundleError::Invariant(e.to_string());
    let frames = (0..m)
        .map(|_| Image::new(width, height, r.f64s(n)).map_err(invariant))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = WeightMatrix::from_columns(m, k, r.f64s(m * k)).map_err(invariant)?;
    let mask = if has_mask {
        Some(SpatialMask::new(width, height, m, r.f64s(n * m)).map_err(invariant)?)
    } else {
        None
    };
    Ok(Bundle {
        mode,
        frames,
        weights,
        mask,
    })
}

pub fn write_bundle(b: &Bundle, path: impl AsRef<Path>) -> Result<(), BundleError> {
    fs::write(path, encode_bundle(b)?)?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<Bundle, BundleError> {
    decode_bundle(&fs::read(path)?)
}
