//! Spatial modulation masks: weights that vary across the visor surface.
//!
//! Pixel `(x, y)` has its center at the real coordinates `(x, y)`; region
//! membership uses closed inequalities on that center.

use crate::error::{mismatch, Error, Result};
use crate::model::WeightVector;

/// Per-pixel, per-frame weight field, pixel-major (`weights[p * M + m]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMask {
    width: usize,
    height: usize,
    frames: usize,
    weights: Vec<f64>,
}

impl SpatialMask {
    pub fn new(width: usize, height: usize, frames: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || frames == 0 {
            return Err(mismatch(format!(
                "mask dimensions must be positive, got {width}x{height}x{frames}"
            )));
        }
        if weights.len() != width * height * frames {
            return Err(mismatch(format!(
                "mask {width}x{height} over {frames} frames needs {} weights, got {}",
                width * height * frames,
                weights.len()
            )));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(Error::OutOfRange(format!("mask weight {i} = {w} is outside [0, 1]")));
        }
        Ok(SpatialMask {
            width,
            height,
            frames,
            weights,
        })
    }

    /// Every pixel carries the same weight vector.
    pub fn uniform(width: usize, height: usize, w: &WeightVector) -> Result<Self> {
        let weights = w.as_slice().repeat(width * height);
        SpatialMask::new(width, height, w.len(), weights)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// M
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel_weights(&self, pixel: usize) -> &[f64] {
        &self.weights[pixel * self.frames..(pixel + 1) * self.frames]
    }

    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        self.pixel_weights(y * self.width + x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Inner-area geometry for a two-region visor partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Closed disk of the given radius.
    Disk { cx: f64, cy: f64, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Rect { x0, y0, x1, y1 } => x0 <= x && x <= x1 && y0 <= y && y <= y1,
            Region::Disk { cx, cy, radius } => {
                let (dx, dy) = (x - cx, y - cy);
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let in_x = |v: f64| v.is_finite() && v >= -0.5 && v <= width as f64 - 0.5;
        let in_y = |v: f64| v.is_finite() && v >= -0.5 && v <= height as f64 - 0.5;
        match *self {
            Region::Rect { x0, y0, x1, y1 } => {
                if !(in_x(x0) && in_x(x1) && in_y(y0) && in_y(y1)) {
                    return Err(Error::OutOfRange(format!(
                        "rectangle {self:?} lies outside the {width}x{height} grid"
                    )));
                }
                if x0 > x1 || y0 > y1 {
                    return Err(Error::InvalidConfig(format!(
                        "rectangle corners out of order: {self:?}"
                    )));
                }
            }
            Region::Disk { cx, cy, radius } => {
                if !(in_x(cx) && in_y(cy)) {
                    return Err(Error::OutOfRange(format!(
                        "disk center ({cx}, {cy}) lies outside the {width}x{height} grid"
                    )));
                }
                if !(radius.is_finite() && radius >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "disk radius must be non-negative, got {radius}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Two-region partition: pixels whose center lies in `region` get `inner`, all others `outer`.
pub fn make_region_mask(
    width: usize,
    height: usize,
    region: Region,
    inner: &WeightVector,
    outer: &WeightVector,
) -> Result<SpatialMask> {
    if inner.len() != outer.len() {
        return Err(mismatch(format!(
            "inner weights have {} frames, outer have {}",
            inner.len(),
            outer.len()
        )));
    }
    region.validate(width, height)?;
    let m = inner.len();
    let mut weights = Vec::with_capacity(width * height * m);
    for y in 0..height {
        for x in 0..width {
            let w = if region.contains(x as f64, y as f64) {
                inner
            } else {
                outer
            };
            weights.extend_from_slice(w.as_slice());
        }
    }
    SpatialMask::new(width, height, m, weights)
}

/// Which slice ring `j` (counted outward from the center) shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RingOrder {
    /// Ring j shows slice j.
    #[default]
    Identity,
    /// Ring j shows slice M-1-j.
    Reversed,
}

/// Index of the ring a distance falls into: smallest `j` with `d <= profile[j]`,
/// or the last ring when `d` is beyond every threshold.
pub fn ring_index(distance: f64, profile: &[f64]) -> usize {
    profile.iter().position(|&r| distance <= r).unwrap_or(profile.len() - 1)
}

/// Concentric one-hot mask: each ring around `center` selects a single slice,
/// giving a funnel-shaped mosaic of depth layers.
pub fn make_concentric_mask(
    width: usize,
    height: usize,
    center: (f64, f64),
    profile: &[f64],
    order: RingOrder,
) -> Result<SpatialMask> {
    if profile.is_empty() {
        return Err(Error::InvalidConfig("ring profile needs at least one radius".into()));
    }
    if profile.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ring radii must be finite and non-negative: {profile:?}"
        )));
    }
    if profile.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidConfig(format!(
            "ring profile must be strictly ascending: {profile:?}"
        )));
    }
    if !(center.0.is_finite() && center.1.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite center {center:?}")));
    }
    let m = profile.len();
    let mut weights = vec![0.0; width * height * m];
    for y in 0..height {
        for x in 0..width {
            let d = (x as f64 - center.0).hypot(y as f64 - center.1);
            let ring = ring_index(d, profile);
            let slice = match order {
                RingOrder::Identity => ring,
                RingOrder::Reversed => m - 1 - ring,
            };
            weights[(y * width + x) * m + slice] = 1.0;
        }
    }
    SpatialMask::new(width, height, m, weights)
}

/// Constant mask assigning `alphas[m]` to frame m everywhere.
pub fn alpha_blend_mask(width: usize, height: usize, alphas: &[f64]) -> Result<SpatialMask> {
    let w = WeightVector::new(alphas.to_vec())?;
    SpatialMask::uniform(width, height, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{perceive, perceive_spatial, FusionMode, Image};

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn equal_inner_outer_gives_constant_mask() {
        let w = wv(&[0.2, 0.7]);
        let mask = make_region_mask(
            5,
            4,
            Region::Disk {
                cx: 2.0,
                cy: 2.0,
                radius: 1.5,
            },
            &w,
            &w,
        )
        .unwrap();
        assert_eq!(mask, SpatialMask::uniform(5, 4, &w).unwrap());
    }

    #[test]
    fn zero_radius_disk_marks_only_the_coincident_center() {
        let (i, o) = (wv(&[1.0]), wv(&[0.0]));
        let mask = make_region_mask(
            5,
            5,
            Region::Disk {
                cx: 2.0,
                cy: 3.0,
                radius: 0.0,
            },
            &i,
            &o,
        )
        .unwrap();
        let inside: Vec<_> = (0..25).filter(|&p| mask.pixel_weights(p)[0] == 1.0).collect();
        assert_eq!(inside, vec![3 * 5 + 2]);

        let mask = make_region_mask(
            5,
            5,
            Region::Disk {
                cx: 2.5,
                cy: 2.5,
                radius: 0.0,
            },
            &i,
            &o,
        )
        .unwrap();
        assert!(mask.as_slice().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rectangle_boundary_is_closed() {
        let (i, o) = (wv(&[1.0]), wv(&[0.0]));
        let mask = make_region_mask(
            4,
            4,
            Region::Rect {
                x0: 1.0,
                y0: 1.0,
                x1: 2.0,
                y1: 2.0,
            },
            &i,
            &o,
        )
        .unwrap();
        let inside: usize = mask.as_slice().iter().filter(|&&w| w == 1.0).count();
        assert_eq!(inside, 4);
        assert_eq!(mask.at(1, 1), &[1.0]);
        assert_eq!(mask.at(2, 2), &[1.0]);
        assert_eq!(mask.at(3, 2), &[0.0]);
    }

    #[test]
    fn region_mask_errors() {
        assert!(matches!(
            make_region_mask(
                3,
                3,
                Region::Disk {
                    cx: 1.0,
                    cy: 1.0,
                    radius: 1.0
                },
                &wv(&[1.0]),
                &wv(&[1.0, 0.0])
            ),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(make_region_mask(
            3,
            3,
            Region::Disk {
                cx: 9.0,
                cy: 1.0,
                radius: 1.0
            },
            &wv(&[1.0]),
            &wv(&[0.0])
        )
        .is_err());
        assert!(make_region_mask(
            3,
            3,
            Region::Rect {
                x0: 2.0,
                y0: 0.0,
                x1: 1.0,
                y1: 1.0
            },
            &wv(&[1.0]),
            &wv(&[0.0])
        )
        .is_err());
    }

    #[test]
    fn inner_organ_outer_exterior() {
        let (w, h) = (9, 9);
        let frames: Vec<Image> = (0..3)
            .map(|m| Image::constant(w, h, 0.1 + 0.3 * m as f64).unwrap())
            .collect();
        let mask = make_region_mask(
            w,
            h,
            Region::Disk {
                cx: 4.0,
                cy: 4.0,
                radius: 2.0,
            },
            &wv(&[0.0, 0.0, 1.0]),
            &wv(&[1.0, 0.0, 0.0]),
        )
        .unwrap();
        let out = perceive_spatial(&frames, &mask, FusionMode::Sum).unwrap().image;
        assert_eq!(out.get(4, 4), frames[2].get(4, 4));
        assert_eq!(out.get(4, 6), frames[2].get(4, 6));
        assert_eq!(out.get(0, 0), frames[0].get(0, 0));
        assert_eq!(out.get(4, 7), frames[0].get(4, 7));
    }

    #[test]
    fn concentric_rings() {
        let mask = make_concentric_mask(9, 9, (4.0, 4.0), &[2.0, 4.0, 6.0], RingOrder::Identity).unwrap();
        assert_eq!(mask.at(4, 4), &[1.0, 0.0, 0.0]);
        // distance 3 lies in (2, 4]
        assert_eq!(mask.at(4, 7), &[0.0, 1.0, 0.0]);
        // corner distance sqrt(32) ≈ 5.66 lies in (4, 6]
        assert_eq!(mask.at(0, 0), &[0.0, 0.0, 1.0]);

        let rev = make_concentric_mask(9, 9, (4.0, 4.0), &[2.0, 4.0, 6.0], RingOrder::Reversed).unwrap();
        assert_eq!(rev.at(4, 4), &[0.0, 0.0, 1.0]);
        assert_eq!(rev.at(4, 7), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn concentric_beyond_last_ring_selects_last_slice() {
        let mask = make_concentric_mask(20, 1, (0.0, 0.0), &[1.0, 2.0], RingOrder::Identity).unwrap();
        assert_eq!(mask.at(19, 0), &[0.0, 1.0]);
    }

    #[test]
    fn concentric_single_slice_is_all_ones() {
        let mask = make_concentric_mask(6, 3, (2.5, 1.0), &[0.5], RingOrder::Identity).unwrap();
        assert!(mask.as_slice().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn concentric_rejects_non_ascending_profile() {
        assert!(make_concentric_mask(3, 3, (1.0, 1.0), &[2.0, 2.0], RingOrder::Identity).is_err());
        assert!(make_concentric_mask(3, 3, (1.0, 1.0), &[3.0, 1.0], RingOrder::Identity).is_err());
        assert!(make_concentric_mask(3, 3, (1.0, 1.0), &[], RingOrder::Identity).is_err());
    }

    #[test]
    fn alpha_blend() {
        let frames = [
            Image::new(1, 1, vec![0.2]).unwrap(),
            Image::new(1, 1, vec![0.6]).unwrap(),
        ];
        let mask = alpha_blend_mask(1, 1, &[0.5, 0.5]).unwrap();
        let v = perceive_spatial(&frames, &mask, FusionMode::Sum)
            .unwrap()
            .image
            .pixels()[0];
        approx::assert_abs_diff_eq!(v, 0.4, epsilon = 1e-15);

        let ones = alpha_blend_mask(1, 1, &[1.0, 1.0]).unwrap();
        let zeros = alpha_blend_mask(1, 1, &[0.0, 0.0]).unwrap();
        assert_eq!(
            perceive_spatial(&frames, &ones, FusionMode::Sum).unwrap(),
            perceive(&frames, &WeightVector::ones(2), FusionMode::Sum).unwrap()
        );
        assert_eq!(
            perceive_spatial(&frames, &zeros, FusionMode::Sum)
                .unwrap()
                .image
                .pixels(),
            &[0.0]
        );
        assert!(alpha_blend_mask(1, 1, &[1.2]).is_err());
    }
}
