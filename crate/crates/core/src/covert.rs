//! Normal-view / shale-view bifurcations with two atom frames.
//!
//! Column 0 of W is the unaided (normal) view, pinned to `(1, 1)`. Column 1 is
//! the shale view seen through modulated glasses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{mismatch, Result};
use crate::model::{fuse_raw, normal_view, perceive, Factorization, FusionMode, Image, TargetSet, WeightMatrix};
use crate::solver::{factorize, PinSpec, SolverConfig};

/// Column of W holding the normal view.
pub const NORMAL_COLUMN: usize = 0;
/// Column of W holding the shale view.
pub const SHALE_COLUMN: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationResult {
    pub factorization: Factorization,
    pub normal_view_image: Image,
    pub shale_view_image: Image,
    /// Pearson correlation between the normal view and the secret/shale target.
    pub leakage: f64,
    /// Pixels that had to be clamped while building the atom frames.
    pub clamped_pixels: usize,
    /// RMS error of the normal and shale views against their targets.
    pub view_rmse: [f64; 2],
    /// Noise image the normal view realizes (covert construction only).
    pub noise: Option<Image>,
}

/// Hides `secret` behind a noise normal view.
///
/// `x1 = secret`; per pixel a noise level `n` is drawn uniform in
/// `[secret, 1]` and `x2 = n − secret`, so both frames stay in range without
/// clamping. The reported noise image is `secret + x2` as fused by the
/// display, which is the drawn level up to one rounding of the subtraction.
pub fn design_covert_noise(secret: &Image, seed: u64) -> Result<BifurcationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clamped_pixels = 0;
    let mut x2 = Vec::with_capacity(secret.len());
    let mut noise = Vec::with_capacity(secret.len());
    for &s in secret.pixels() {
        let drawn = if s < 1.0 { rng.random_range(s..=1.0) } else { 1.0 };
        let mut d = drawn - s;
        if !(0.0..=1.0).contains(&d) {
            clamped_pixels += 1;
            d = d.clamp(0.0, 1.0);
        }
        x2.push(d);
        noise.push(s + d);
    }
    let x2 = Image::new(secret.width(), secret.height(), x2)?;
    let noise = Image::new(secret.width(), secret.height(), noise)?;
    let weights = WeightMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 0.0]])?;
    let frames = vec![secret.clone(), x2];

    let normal = normal_view(&frames, FusionMode::Sum)?;
    clamped_pixels += normal.overflow_pixels;
    let shale = perceive(&frames, &weights.weight_vector(SHALE_COLUMN), FusionMode::Sum)?;
    let leakage = pearson(normal.image.pixels(), secret.pixels());
    let view_rmse = [0.0, rmse(shale.image.pixels(), secret.pixels())];
    let factorization = Factorization::new(frames, weights)?;
    Ok(BifurcationResult {
        factorization,
        normal_view_image: normal.image,
        shale_view_image: shale.image,
        leakage,
        clamped_pixels,
        view_rmse,
        noise: Some(noise),
    })
}

/// Options for [`design_dual_view`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualViewOptions {
    pub solver: SolverConfig,
    /// Pin the shale column to `(1, 0)`; otherwise the solver chooses it.
    pub pin_shale: bool,
}

impl Default for DualViewOptions {
    fn default() -> Self {
        DualViewOptions {
            solver: SolverConfig::default(),
            pin_shale: true,
        }
    }
}

/// Two atom frames whose unweighted fusion approximates `default_view` and whose
/// shale weighting approximates `shale_view`.
pub fn design_dual_view(default_view: &Image, shale_view: &Image, opts: &DualViewOptions) -> Result<BifurcationResult> {
    if !default_view.same_shape(shale_view) {
        return Err(mismatch(format!(
            "default view is {}x{}, shale view is {}x{}",
            default_view.width(),
            default_view.height(),
            shale_view.width(),
            shale_view.height()
        )));
    }
    let targets = TargetSet::new(vec![default_view.clone(), shale_view.clone()])?;
    let mut pins = PinSpec::new().column(NORMAL_COLUMN, &[1.0, 1.0]);
    if opts.pin_shale {
        pins = pins.column(SHALE_COLUMN, &[1.0, 0.0]);
    }
    let f = factorize(&targets, 2, Some(&pins), &opts.solver)?;

    let normal_raw = fuse_raw(
        f.frames(),
        f.weights().column(NORMAL_COLUMN),
        FusionMode::Sum,
        opts.solver.execution,
    )?;
    let shale_raw = fuse_raw(
        f.frames(),
        f.weights().column(SHALE_COLUMN),
        FusionMode::Sum,
        opts.solver.execution,
    )?;
    let view_rmse = [
        rmse(&normal_raw, default_view.pixels()),
        rmse(&shale_raw, shale_view.pixels()),
    ];

    let normal = normal_view(f.frames(), FusionMode::Sum)?;
    let shale = perceive(f.frames(), &f.weights().weight_vector(SHALE_COLUMN), FusionMode::Sum)?;
    let leakage = pearson(normal.image.pixels(), shale_view.pixels());
    Ok(BifurcationResult {
        clamped_pixels: normal.overflow_pixels + shale.overflow_pixels,
        factorization: f,
        normal_view_image: normal.image,
        shale_view_image: shale.image,
        leakage,
        view_rmse,
        noise: None,
    })
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let s = a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y));
    (s / a.len() as f64).sqrt()
}

/// Pearson correlation between two equally sized images; 0 when either is constant.
pub fn leakage_correlation(normal: &Image, secret: &Image) -> Result<f64> {
    if !normal.same_shape(secret) {
        return Err(mismatch(format!(
            "normal view is {}x{}, secret is {}x{}",
            normal.width(),
            normal.height(),
            secret.width(),
            secret.height()
        )));
    }
    if normal.len() < 2 {
        return Err(mismatch("correlation needs at least two pixels"));
    }
    Ok(pearson(normal.pixels(), secret.pixels()))
}

/// Zero-variance inputs (including a single pixel) correlate as 0.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / len;
    let mean_b = b.iter().sum::<f64>() / len;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
}
