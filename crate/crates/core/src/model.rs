//! Domain types (images, target sets, weights, factorizations) and the fusion
//! simulator that computes what a viewer perceives from a cycle of atom frames.

use crate::error::{mismatch, Error, Result};
use crate::exec::{self, Execution};
use crate::masks::SpatialMask;

/// How the visual system combines the M weighted sub-frames of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// `y = Σ w_m x_m`, the plain `Y = XW` model.
    #[default]
    Sum,
    /// `y = (1/M) Σ w_m x_m`, time-averaged light.
    Mean,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Sum => "sum",
            FusionMode::Mean => "mean",
        }
    }
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(FusionMode::Sum),
            "mean" => Ok(FusionMode::Mean),
            other => Err(Error::InvalidConfig(format!("unknown fusion mode {other:?}"))),
        }
    }
}

/// Display refresh rate, flicker-fusion rate and the resulting frames per cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayConfig {
    refresh_rate_hz: f64,
    flicker_fusion_hz: f64,
    frames_per_cycle: usize,
}

impl DisplayConfig {
    /// Derives `M = f_d / f_v`; the ratio must be a positive integer.
    pub fn new(refresh_rate_hz: f64, flicker_fusion_hz: f64) -> Result<Self> {
        if !(refresh_rate_hz.is_finite() && refresh_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "refresh rate must be positive, got {refresh_rate_hz}"
            )));
        }
        if !(flicker_fusion_hz.is_finite() && flicker_fusion_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "flicker fusion rate must be positive, got {flicker_fusion_hz}"
            )));
        }
        let ratio = refresh_rate_hz / flicker_fusion_hz;
        let m = ratio.round();
        // Relative slack of a few ulps so that e.g. 120/60 or 239.76/59.94 are accepted.
        if m < 1.0 || (m * flicker_fusion_hz - refresh_rate_hz).abs() > 4.0 * f64::EPSILON * refresh_rate_hz {
            return Err(Error::InvalidConfig(format!(
                "refresh rate {refresh_rate_hz} Hz is not a positive integer multiple of {flicker_fusion_hz} Hz"
            )));
        }
        Ok(DisplayConfig {
            refresh_rate_hz,
            flicker_fusion_hz,
            frames_per_cycle: m as usize,
        })
    }

    pub fn refresh_rate_hz(&self) -> f64 {
        self.refresh_rate_hz
    }

    pub fn flicker_fusion_hz(&self) -> f64 {
        self.flicker_fusion_hz
    }

    pub fn frames_per_cycle(&self) -> usize {
        self.frames_per_cycle
    }
}

fn check_unit(v: f64, what: &str, index: usize) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{what}[{index}] = {v} is outside [0, 1]")))
    }
}

/// A grayscale image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(mismatch(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(mismatch(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            check_unit(v, "pixel", i)?;
        }
        Ok(Image { width, height, data })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(x, y)` evaluated at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image::new(width, height, data)
    }

    /// Caller guarantees the invariants (used after clamping).
    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Image { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels N.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// The K target images `y_1..y_K`, all with the same dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    images: Vec<Image>,
}

impl TargetSet {
    pub fn new(images: Vec<Image>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| mismatch("a target set needs at least one image"))?;
        if let Some((k, img)) = images.iter().enumerate().find(|(_, img)| !img.same_shape(first)) {
            return Err(mismatch(format!(
                "target {k} is {}x{}, target 0 is {}x{}",
                img.width, img.height, first.width, first.height
            )));
        }
        Ok(TargetSet { images })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    /// K
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// N
    pub fn pixel_count(&self) -> usize {
        self.images[0].len()
    }

    pub fn width(&self) -> usize {
        self.images[0].width
    }

    pub fn height(&self) -> usize {
        self.images[0].height
    }

    /// Target-major flat copy: target k occupies `[k*N, (k+1)*N)`.
    pub(crate) fn flatten(&self) -> Vec<f64> {
        self.images.iter().flat_map(|img| img.data.iter().copied()).collect()
    }
}

/// One viewer's modulation weights, one per atom frame, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(mismatch("a weight vector needs at least one entry"));
        }
        for (i, &w) in weights.iter().enumerate() {
            check_unit(w, "weight", i)?;
        }
        Ok(WeightVector(weights))
    }

    pub fn ones(m: usize) -> Self {
        WeightVector(vec![1.0; m])
    }

    pub fn zeros(m: usize) -> Self {
        WeightVector(vec![0.0; m])
    }

    /// Selects frame `index` alone.
    pub fn one_hot(m: usize, index: usize) -> Self {
        let mut w = vec![0.0; m];
        w[index] = 1.0;
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The M×K modulation matrix W, stored viewer-major (column k is contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    frames: usize,
    viewers: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    /// `data` is column-major: viewer 0's M weights, then viewer 1's, ...
    pub fn from_columns(frames: usize, viewers: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || viewers == 0 {
            return Err(mismatch(format!(
                "weight matrix must be at least 1x1, got {frames}x{viewers}"
            )));
        }
        if data.len() != frames * viewers {
            return Err(mismatch(format!(
                "weight matrix {frames}x{viewers} needs {} entries, got {}",
                frames * viewers,
                data.len()
            )));
        }
        for (i, &w) in data.iter().enumerate() {
            check_unit(w, "W", i)?;
        }
        Ok(WeightMatrix { frames, viewers, data })
    }

    /// Row-major construction, `rows[m][k]`, which reads like the matrix on paper.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let frames = rows.len();
        let viewers = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != viewers) {
            return Err(mismatch("ragged weight matrix rows"));
        }
        let mut data = vec![0.0; frames * viewers];
        for (m, row) in rows.iter().enumerate() {
            for (k, &w) in row.iter().enumerate() {
                data[k * frames + m] = w;
            }
        }
        WeightMatrix::from_columns(frames, viewers, data)
    }

    pub(crate) fn from_parts(frames: usize, viewers: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), frames * viewers);
        WeightMatrix { frames, viewers, data }
    }

    /// M
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// K
    pub fn viewers(&self) -> usize {
        self.viewers
    }

    pub fn get(&self, frame: usize, viewer: usize) -> f64 {
        self.data[viewer * self.frames + frame]
    }

    pub fn column(&self, viewer: usize) -> &[f64] {
        &self.data[viewer * self.frames..(viewer + 1) * self.frames]
    }

    pub fn weight_vector(&self, viewer: usize) -> WeightVector {
        WeightVector(self.column(viewer).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// M×K booleans; `true` marks a W entry held fixed by the solver. Column-major like W.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinMask {
    frames: usize,
    viewers: usize,
    pinned: Vec<bool>,
}

impl PinMask {
    pub fn none(frames: usize, viewers: usize) -> Self {
        PinMask {
            frames,
            viewers,
            pinned: vec![false; frames * viewers],
        }
    }

    pub fn is_pinned(&self, frame: usize, viewer: usize) -> bool {
        self.pinned[viewer * self.frames + frame]
    }

    pub fn pin(&mut self, frame: usize, viewer: usize) {
        self.pinned[viewer * self.frames + frame] = true;
    }

    pub fn any(&self) -> bool {
        self.pinned.iter().any(|&p| p)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn viewers(&self) -> usize {
        self.viewers
    }

    pub(crate) fn as_slice(&self) -> &[bool] {
        &self.pinned
    }
}

/// Why a solver run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    /// Not produced by a solver run (constructed or initialized directly).
    #[default]
    NotRun,
    Converged,
    /// Neither half-step could descend at the minimum step size.
    Stalled,
    MaxIterations,
}

/// Atom frames X (M images), modulation matrix W (M×K), pins and solver trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    frames: Vec<Image>,
    weights: WeightMatrix,
    pins: PinMask,
    objective_history: Vec<f64>,
    termination: Termination,
}

impl Factorization {
    pub fn new(frames: Vec<Image>, weights: WeightMatrix) -> Result<Self> {
        let pins = PinMask::none(weights.frames(), weights.viewers());
        Factorization::with_pins(frames, weights, pins)
    }

    pub fn with_pins(frames: Vec<Image>, weights: WeightMatrix, pins: PinMask) -> Result<Self> {
        check_frames(&frames)?;
        if frames.len() != weights.frames() {
            return Err(mismatch(format!(
                "{} atom frames but W has {} rows",
                frames.len(),
                weights.frames()
            )));
        }
        if pins.frames != weights.frames || pins.viewers != weights.viewers {
            return Err(mismatch(format!(
                "pin mask is {}x{}, W is {}x{}",
                pins.frames, pins.viewers, weights.frames, weights.viewers
            )));
        }
        Ok(Factorization {
            frames,
            weights,
            pins,
            objective_history: Vec::new(),
            termination: Termination::NotRun,
        })
    }

    pub(crate) fn from_solver(
        frames: Vec<Image>,
        weights: WeightMatrix,
        pins: PinMask,
        objective_history: Vec<f64>,
        termination: Termination,
    ) -> Self {
        Factorization {
            frames,
            weights,
            pins,
            objective_history,
            termination,
        }
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn pins(&self) -> &PinMask {
        &self.pins
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// M
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// K
    pub fn viewer_count(&self) -> usize {
        self.weights.viewers()
    }

    /// N
    pub fn pixel_count(&self) -> usize {
        self.frames[0].len()
    }

    /// Frame-major flat copy of X: frame m occupies `[m*N, (m+1)*N)`.
    pub(crate) fn flat_frames(&self) -> Vec<f64> {
        self.frames.iter().flat_map(|f| f.data.iter().copied()).collect()
    }
}

/// Result of fusing a cycle of frames: the clamped image plus how many pixels clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Perceived {
    pub image: Image,
    /// Pixels whose pre-clamp value exceeded 1.
    pub overflow_pixels: usize,
}

impl Perceived {
    pub fn overflowed(&self) -> bool {
        self.overflow_pixels > 0
    }
}

fn check_frames(frames: &[Image]) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| mismatch("at least one atom frame is required"))?;
    if let Some((m, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
        return Err(mismatch(format!(
            "atom frame {m} is {}x{}, frame 0 is {}x{}",
            f.width, f.height, first.width, first.height
        )));
    }
    Ok(())
}

const PIXEL_CHUNK: usize = 1024;

/// Pre-clamp fusion `Σ_m w[m]·X_m` (divided by M in mean mode).
///
/// Accumulation runs in frame order starting from `0.0`, so selecting a single
/// frame with weight 1 reproduces it bit-exactly.
pub fn fuse_raw(frames: &[Image], weights: &[f64], mode: FusionMode, exec: Execution) -> Result<Vec<f64>> {
    check_frames(frames)?;
    if weights.len() != frames.len() {
        return Err(mismatch(format!(
            "{} weights for {} atom frames",
            weights.len(),
            frames.len()
        )));
    }
    let m_count = frames.len();
    let mut out = vec![0.0; frames[0].len()];
    exec::for_each_chunk_mut(exec, &mut out, PIXEL_CHUNK, |c, chunk| {
        let base = c * PIXEL_CHUNK;
        for (i, o) in chunk.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (frame, &w) in frames.iter().zip(weights) {
                acc += w * frame.data[base + i];
            }
            *o = finish(acc, mode, m_count);
        }
    });
    Ok(out)
}

/// Pre-clamp per-pixel fusion `Σ_m mask[p][m]·X_m[p]`.
pub fn fuse_spatial_raw(frames: &[Image], mask: &SpatialMask, mode: FusionMode, exec: Execution) -> Result<Vec<f64>> {
    check_frames(frames)?;
    let first = &frames[0];
    if mask.width() != first.width || mask.height() != first.height || mask.frames() != frames.len() {
        return Err(mismatch(format!(
            "mask is {}x{} over {} frames, atom frames are {}x{} x {}",
            mask.width(),
            mask.height(),
            mask.frames(),
            first.width,
            first.height,
            frames.len()
        )));
    }
    let m_count = frames.len();
    let mut out = vec![0.0; first.len()];
    exec::for_each_chunk_mut(exec, &mut out, PIXEL_CHUNK, |c, chunk| {
        let base = c * PIXEL_CHUNK;
        for (i, o) in chunk.iter_mut().enumerate() {
            let p = base + i;
            let w = mask.pixel_weights(p);
            let mut acc = 0.0;
            for (frame, &wm) in frames.iter().zip(w) {
                acc += wm * frame.data[p];
            }
            *o = finish(acc, mode, m_count);
        }
    });
    Ok(out)
}

#[inline]
fn finish(acc: f64, mode: FusionMode, m_count: usize) -> f64 {
    match mode {
        FusionMode::Sum => acc,
        FusionMode::Mean => acc / m_count as f64,
    }
}

/// Clamps raw fused values into `[0, 1]`, counting pixels that exceeded 1.
pub fn clamp_fused(width: usize, height: usize, mut raw: Vec<f64>) -> Perceived {
    let mut overflow_pixels = 0;
    for v in raw.iter_mut() {
        if *v > 1.0 {
            overflow_pixels += 1;
            *v = 1.0;
        } else if *v < 0.0 {
            *v = 0.0;
        }
    }
    Perceived {
        image: Image::from_parts(width, height, raw),
        overflow_pixels,
    }
}

/// What a viewer with weight vector `w` perceives.
pub fn perceive(frames: &[Image], w: &WeightVector, mode: FusionMode) -> Result<Perceived> {
    perceive_with(frames, w, mode, Execution::default())
}

pub fn perceive_with(frames: &[Image], w: &WeightVector, mode: FusionMode, exec: Execution) -> Result<Perceived> {
    let raw = fuse_raw(frames, w.as_slice(), mode, exec)?;
    Ok(clamp_fused(frames[0].width, frames[0].height, raw))
}

/// The unaided-eye view: every atom frame fused with weight 1.
pub fn normal_view(frames: &[Image], mode: FusionMode) -> Result<Perceived> {
    check_frames(frames)?;
    perceive(frames, &WeightVector::ones(frames.len()), mode)
}

/// Fusion through a visor whose weights vary per pixel.
pub fn perceive_spatial(frames: &[Image], mask: &SpatialMask, mode: FusionMode) -> Result<Perceived> {
    perceive_spatial_with(frames, mask, mode, Execution::default())
}

pub fn perceive_spatial_with(
    frames: &[Image],
    mask: &SpatialMask,
    mode: FusionMode,
    exec: Execution,
) -> Result<Perceived> {
    let raw = fuse_spatial_raw(frames, mask, mode, exec)?;
    Ok(clamp_fused(frames[0].width, frames[0].height, raw))
}
