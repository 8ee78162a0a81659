//! Reconstruction quality (RMSE, PSNR, Frobenius residual) and the
//! weights-versus-pixels bandwidth comparison.

use serde::{Serialize, Serializer};

use crate::error::{mismatch, Error, Result};
use crate::exec::Execution;
use crate::model::{fuse_raw, Factorization, FusionMode, TargetSet};
use crate::solver::objective;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub per_target_rmse: Vec<f64>,
    /// Peak 1.0; an exact reconstruction is `+∞`, serialized as `"inf"`.
    #[serde(serialize_with = "serialize_psnr")]
    pub per_target_psnr_db: Vec<f64>,
    pub frobenius_total: f64,
    pub overflow_pixel_counts: Vec<usize>,
}

fn serialize_psnr<S: Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    #[serde(untagged)]
    enum Db {
        Finite(f64),
        Text(&'static str),
    }
    let out: Vec<Db> = values
        .iter()
        .map(|&v| {
            if v == f64::INFINITY {
                Db::Text("inf")
            } else {
                Db::Finite(v)
            }
        })
        .collect();
    out.serialize(s)
}

/// PSNR in dB for intensities with peak 1.
pub fn psnr_db(rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * rmse.log10()
    }
}

/// Compares each target with what its viewer perceives (clamped fusion of W column k).
pub fn quality_report(targets: &TargetSet, f: &Factorization, mode: FusionMode) -> Result<QualityReport> {
    let frobenius_total = objective(targets, f)?;
    let n = targets.pixel_count() as f64;
    let mut per_target_rmse = Vec::with_capacity(targets.len());
    let mut overflow_pixel_counts = Vec::with_capacity(targets.len());
    for (k, target) in targets.images().iter().enumerate() {
        let raw = fuse_raw(f.frames(), f.weights().column(k), mode, Execution::default())?;
        let mut overflow = 0;
        let mut sq = 0.0;
        for (&v, &t) in raw.iter().zip(target.pixels()) {
            if v > 1.0 {
                overflow += 1;
            }
            let d = v.clamp(0.0, 1.0) - t;
            sq += d * d;
        }
        per_target_rmse.push((sq / n).sqrt());
        overflow_pixel_counts.push(overflow);
    }
    let per_target_psnr_db = per_target_rmse.iter().map(|&r| psnr_db(r)).collect();
    Ok(QualityReport {
        per_target_rmse,
        per_target_psnr_db,
        frobenius_total,
        overflow_pixel_counts,
    })
}

/// Values transmitted per second to the viewing devices versus pixels redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub weights_rate: f64,
    pub pixel_rate: f64,
    pub ratio: f64,
}

pub fn bandwidth_report(
    pixels: usize,
    frames: usize,
    viewers: usize,
    views_per_second: f64,
) -> Result<BandwidthReport> {
    if pixels == 0 || frames == 0 || viewers == 0 {
        return Err(mismatch(format!(
            "pixels, frames and viewers must be positive (got {pixels}, {frames}, {viewers})"
        )));
    }
    if !(views_per_second.is_finite() && views_per_second > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "views per second must be positive, got {views_per_second}"
        )));
    }
    let per_second = viewers as f64 * views_per_second;
    Ok(BandwidthReport {
        weights_rate: frames as f64 * per_second,
        pixel_rate: pixels as f64 * per_second,
        ratio: frames as f64 / pixels as f64,
    })
}
