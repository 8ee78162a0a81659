//! JSON document read by the browser explorer.
//!
//! Golden entries carry fused images computed here so the client-side renderer
//! can be checked for parity.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bundle::Bundle;
use crate::error::Result;
use crate::model::{perceive, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldenEntry {
    pub weights: Vec<f64>,
    pub fused_image: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UiBundle {
    pub width: usize,
    pub height: usize,
    #[serde(rename = "M")]
    pub frame_count: usize,
    #[serde(rename = "K")]
    pub viewer_count: usize,
    pub fusion_mode: String,
    /// One array of N pixels per atom frame.
    pub frames: Vec<Vec<f64>>,
    /// One array of M weights per viewer.
    pub weights: Vec<Vec<f64>>,
    /// One array of N per-pixel weights per atom frame.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub masks: Option<Vec<Vec<f64>>>,
    pub golden: Vec<GoldenEntry>,
}

/// Normal view, all-zero, every viewer column, then every single-frame selection,
/// without duplicates.
pub fn default_golden(bundle: &Bundle) -> Vec<WeightVector> {
    let m = bundle.frame_count();
    let mut out: Vec<WeightVector> = vec![WeightVector::ones(m), WeightVector::zeros(m)];
    out.extend((0..bundle.viewer_count()).map(|k| bundle.weights.weight_vector(k)));
    out.extend((0..m).map(|j| WeightVector::one_hot(m, j)));
    let mut unique: Vec<WeightVector> = Vec::with_capacity(out.len());
    for w in out {
        if !unique.contains(&w) {
            unique.push(w);
        }
    }
    unique
}

pub fn ui_document(bundle: &Bundle, golden: &[WeightVector]) -> Result<UiBundle> {
    let m = bundle.frame_count();
    let golden = golden
        .iter()
        .map(|w| {
            let fused = perceive(&bundle.frames, w, bundle.mode)?;
            Ok(GoldenEntry {
                weights: w.as_slice().to_vec(),
                fused_image: fused.image.into_pixels(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let masks = bundle.mask.as_ref().map(|mask| {
        (0..m)
            .map(|j| (0..mask.pixel_count()).map(|p| mask.pixel_weights(p)[j]).collect())
            .collect()
    });
    Ok(UiBundle {
        width: bundle.width(),
        height: bundle.height(),
        frame_count: m,
        viewer_count: bundle.viewer_count(),
        fusion_mode: bundle.mode.as_str().to_string(),
        frames: bundle.frames.iter().map(|f| f.pixels().to_vec()).collect(),
        weights: (0..bundle.viewer_count())
            .map(|k| bundle.weights.column(k).to_vec())
            .collect(),
        masks,
        golden,
    })
}

pub fn write_ui_document(doc: &UiBundle, path: impl AsRef<Path>) -> std::io::Result<()> {
    let text = serde_json::to_string(doc).map_err(std::io::Error::other)?;
    fs::write(path, text)
}

/// Builds the document and writes it to `path`.
pub fn export_ui_bundle(bundle: &Bundle, golden: &[WeightVector], path: impl AsRef<Path>) -> std::io::Result<UiBundle> {
    let doc = ui_document(bundle, golden).map_err(std::io::Error::other)?;
    write_ui_document(&doc, path)?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FusionMode, Image, WeightMatrix};

    #[test]
    fn single_frame_golden_is_the_frame() {
        let frame = Image::new(3, 1, vec![0.1, 1.0 / 3.0, 0.9]).unwrap();
        let b = Bundle::new(
            vec![frame.clone()],
            WeightMatrix::from_rows(&[&[1.0]]).unwrap(),
            FusionMode::Sum,
        )
        .unwrap();
        let golden = default_golden(&b);
        assert_eq!(golden, vec![WeightVector::ones(1), WeightVector::zeros(1)]);
        let doc = ui_document(&b, &golden).unwrap();
        assert_eq!(doc.golden[0].fused_image, frame.pixels());
        assert!(doc.golden[1].fused_image.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn json_shape_and_precision() {
        let frame = Image::new(2, 1, vec![0.1, 1.0 / 3.0]).unwrap();
        let b = Bundle::new(
            vec![frame],
            WeightMatrix::from_rows(&[&[0.7]]).unwrap(),
            FusionMode::Mean,
        )
        .unwrap();
        let doc = ui_document(&b, &default_golden(&b)).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["M"], 1);
        assert_eq!(v["K"], 1);
        assert_eq!(v["fusionMode"], "mean");
        assert!(v.get("masks").is_none());
        assert!(v["golden"][0].get("fusedImage").is_some());
        let back: UiBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back.frames[0][1].to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
