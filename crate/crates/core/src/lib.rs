//! Temporal psychovisual modulation.
//!
//! A display cycling M atom frames faster than flicker fusion lets each viewer
//! perceive a different image, `y_k = Σ_m W[m][k] x_m`, by attenuating frames
//! with synchronized glasses. This crate finds atom frames and weights for a set
//! of target images (box-constrained NMF), simulates fusion globally and with
//! per-pixel masks, builds covert normal/shale view pairs, and reads and writes
//! the associated file formats.

pub mod covert;
mod error;
pub mod exec;
pub mod io;
pub mod masks;
pub mod metrics;
pub mod model;
pub mod solver;

pub use covert::{design_covert_noise, design_dual_view, leakage_correlation, BifurcationResult, DualViewOptions};
pub use error::{Error, Result};
pub use exec::Execution;
pub use masks::{alpha_blend_mask, make_concentric_mask, make_region_mask, ring_index, Region, RingOrder, SpatialMask};
pub use metrics::{bandwidth_report, psnr_db, quality_report, BandwidthReport, QualityReport};
pub use model::{
    normal_view, perceive, perceive_spatial, DisplayConfig, Factorization, FusionMode, Image, Perceived, PinMask,
    TargetSet, Termination, WeightMatrix, WeightVector,
};
pub use solver::{factorize, init, objective, step, InitStrategy, PinSpec, SolverConfig};
