// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON model files.
//!
//! Layout (`format_version` 1):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "input_dim": K,
//!   "layer_dims": [{"input_dim": D, "hidden_dim": H}, ...],
//!   "layers": [{"w_x": [[..]], "w_h": [[..]], "b": [..]}, ...],
//!   "w_out": [[..]],
//!   "b_out": [..],
//!   "normalization": {"mean": [..], "std": [..]} | null
//! }
//! ```
//!
//! Matrices are nested row arrays; gate blocks are stacked `[i, f, g, o]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::persist::write_atomic;

use super::{ForecastModel, LstmLayerParams, Normalization};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDims {
    input_dim: usize,
    hidden_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerTensors {
    w_x: Matrix,
    w_h: Matrix,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    layer_dims: Vec<LayerDims>,
    layers: Vec<LayerTensors>,
    w_out: Matrix,
    b_out: Vec<f64>,
    normalization: Option<Normalization>,
}

pub fn model_to_json(model: &ForecastModel) -> Result<String> {
    let file = ModelFile {
        format_version: model.format_version,
        input_dim: model.input_dim,
        layer_dims: model
            .layers
            .iter()
            .map(|l| LayerDims {
                input_dim: l.input_dim,
                hidden_dim: l.hidden_dim,
            })
            .collect(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerTensors {
                w_x: l.w_x.clone(),
                w_h: l.w_h.clone(),
                b: l.b.clone(),
            })
            .collect(),
        w_out: model.w_out.clone(),
        b_out: model.b_out.clone(),
        normalization: model.normalization.clone(),
    };
    serde_json::to_string(&file).map_err(|e| Error::Parse(format!("model encode: {e}")))
}

/// Parses and validates a model file. Unknown versions are rejected before
/// the rest of the document is interpreted.
pub fn model_from_json(text: &str) -> Result<ForecastModel> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionedFormat {
            found: probe.format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    if file.layer_dims.len() != file.layers.len() {
        return Err(Error::Parse(
            "layer_dims and layers have different lengths".into(),
        ));
    }
    let layers = file
        .layer_dims
        .into_iter()
        .zip(file.layers)
        .map(|(d, t)| LstmLayerParams {
            input_dim: d.input_dim,
            hidden_dim: d.hidden_dim,
            w_x: t.w_x,
            w_h: t.w_h,
            b: t.b,
        })
        .collect();
    let model = ForecastModel {
        format_version: file.format_version,
        input_dim: file.input_dim,
        layers,
        w_out: file.w_out,
        b_out: file.b_out,
        normalization: file.normalization,
    };
    model
        .validate()
        .map_err(|e| Error::Parse(format!("model file: {e}")))?;
    Ok(model)
}

pub fn save_model(model: &ForecastModel, destination: &Path) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    write_atomic(destination, text.as_bytes())
}

pub fn load_model(source: &Path) -> Result<ForecastModel> {
    let text = std::fs::read_to_string(source)?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::{predict_profiles, ModelShape};
    use crate::numerics::{RandomSource, TimeCourses};

    fn sample_model() -> ForecastModel {
        let mut rng = RandomSource::new(11);
        let mut m =
            ForecastModel::initialized(3, &ModelShape::new(vec![4, 2]).unwrap(), 0.3, &mut rng)
                .unwrap();
        m.normalization = Some(Normalization {
            mean: vec![0.1, -0.2, 0.3],
            std: vec![1.0, 2.0, 0.5],
        });
        m
    }

    #[test]
    fn round_trip_preserves_predictions_bitwise() {
        let model = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let mut rng = RandomSource::new(2);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
            .collect();
        let seq = TimeCourses::new("s", Matrix::from_rows(&rows).unwrap()).unwrap();
        let a = predict_profiles(&model, &seq).unwrap();
        let b = predict_profiles(&back, &seq).unwrap();
        let bits = |m: &Matrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn unknown_version_is_a_versioned_error() {
        let text = model_to_json(&sample_model()).unwrap().replacen(
            "\"format_version\":1",
            "\"format_version\":999",
            1,
        );
        assert!(matches!(
            model_from_json(&text),
            Err(Error::VersionedFormat { found: 999, .. })
        ));
    }

    #[test]
    fn truncated_or_inconsistent_files_are_parse_errors() {
        let text = model_to_json(&sample_model()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(model_from_json(cut), Err(Error::Parse(_))));
        let wrong_dim = text.replacen("\"input_dim\":3", "\"input_dim\":4", 1);
        assert!(matches!(model_from_json(&wrong_dim), Err(Error::Parse(_))));
        assert!(matches!(model_from_json("{}"), Err(Error::Parse(_))));
    }
}
