//! Versioned model bundles: the trained model plus everything needed to turn
//! raw loaded columns into its inputs (column order, scaler, selection).
//!
//! Small models are stored as JSON. Forests, boosters, SVMs and ensembles use
//! a binary container:
//!
//! ```text
//! magic "KLDBNDL1" | u32 LE format version | sections...
//! section = 4-byte tag | u64 LE length | payload
//! ```
//!
//! with a `META` section (JSON header) followed by a `MODL` section (bincode
//! encoded model). Both encodings preserve every `f64` bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{normalize_column_name, FlowTable, ScalerParams};
use crate::learners::{Learner, ModelKind, TrainedModel};

pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 8] = b"KLDBNDL1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: ModelKind,
    /// Feature columns of the loaded table the scaler was fitted on.
    pub input_feature_names: Vec<String>,
    pub scaler: ScalerParams,
    /// Indices into `input_feature_names` the model consumes, in order.
    pub selected: Vec<usize>,
    pub model: TrainedModel,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: ModelKind,
    input_feature_names: Vec<String>,
    scaler: ScalerParams,
    selected: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Json,
    Binary,
}

impl ModelBundle {
    pub fn new(input_feature_names: Vec<String>, scaler: ScalerParams, selected: Vec<usize>, model: TrainedModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: model.kind(),
            input_feature_names,
            scaler,
            selected,
            model,
        }
    }

    pub fn model_feature_names(&self) -> Vec<String> {
        self.selected.iter().map(|&j| self.input_feature_names[j].clone()).collect()
    }

    /// Encoding chosen for this model kind.
    pub fn preferred_encoding(&self) -> Encoding {
        match self.kind {
            ModelKind::DecisionTree | ModelKind::LogisticRegression | ModelKind::NaiveBayes => Encoding::Json,
            _ => Encoding::Binary,
        }
    }

    /// `model.json` or `model.bin`.
    pub fn file_name(&self) -> &'static str {
        match self.preferred_encoding() {
            Encoding::Json => "model.json",
            Encoding::Binary => "model.bin",
        }
    }

    /// Reorders a loaded (unscaled) table's columns by name, scales them, and
    /// keeps the selected ones.
    pub fn prepare(&self, raw: &FlowTable) -> Result<FlowTable> {
        let index: Vec<usize> = self
            .input_feature_names
            .iter()
            .map(|name| {
                raw.feature_index(name)
                    .or_else(|| {
                        let key = normalize_column_name(name);
                        raw.feature_names().iter().position(|n| normalize_column_name(n) == key)
                    })
                    .ok_or_else(|| Error::SchemaMismatch(format!("column '{name}' missing from data")))
            })
            .collect::<Result<_>>()?;
        let ordered = raw.select_columns(&index)?;
        let scaled = crate::flowdata::apply_minmax(&ordered, &self.scaler)?;
        scaled.select_columns(&self.selected)
    }

    /// Checks that an already prepared table matches the model's inputs.
    pub fn check_prepared(&self, table: &FlowTable) -> Result<()> {
        let expected = self.model_feature_names();
        if table.feature_names() != expected.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} model features, table has {}",
                expected.len(),
                table.n_features()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: self.format_version,
            kind: self.kind,
            input_feature_names: self.input_feature_names.clone(),
            scaler: self.scaler.clone(),
            selected: self.selected.clone(),
        };
        let meta = serde_json::to_vec(&header)?;
        let model = bincode::serialize(&self.model)?;
        let mut out = Vec::with_capacity(meta.len() + model.len() + 40);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for (tag, payload) in [(b"META", &meta), (b"MODL", &model)] {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(bytes)
        } else {
            let bundle: ModelBundle = serde_json::from_slice(bytes)?;
            check_version(bundle.format_version)?;
            Ok(bundle)
        }
    }

    fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut pos = BINARY_MAGIC.len();
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
            let end = end.ok_or_else(|| Error::Corrupt("truncated bundle".into()))?;
            let s = &bytes[*pos..end];
            *pos = end;
            Ok(s)
        };
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        check_version(version)?;
        let mut header: Option<Header> = None;
        let mut model: Option<TrainedModel> = None;
        while pos < bytes.len() {
            let tag: [u8; 4] = take(&mut pos, 4)?.try_into().unwrap();
            let len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
            let len = usize::try_from(len).map_err(|_| Error::Corrupt("section too large".into()))?;
            let payload = take(&mut pos, len)?;
            match &tag {
                b"META" => header = Some(serde_json::from_slice(payload)?),
                b"MODL" => model = Some(bincode::deserialize(payload)?),
                _ => log::debug!("skipping unknown bundle section {:?}", String::from_utf8_lossy(&tag)),
            }
        }
        let header = header.ok_or_else(|| Error::Corrupt("missing META section".into()))?;
        let model = model.ok_or_else(|| Error::Corrupt("missing MODL section".into()))?;
        if model.kind() != header.kind {
            return Err(Error::Corrupt(format!(
                "header says {} but payload holds {}",
                header.kind,
                model.kind()
            )));
        }
        Ok(ModelBundle {
            format_version: header.format_version,
            kind: header.kind,
            input_feature_names: header.input_feature_names,
            scaler: header.scaler,
            selected: header.selected,
            model,
        })
    }

    pub fn encode(&self, encoding: Encoding) -> Result<Vec<u8>> {
        match encoding {
            Encoding::Json => Ok(self.to_json()?.into_bytes()),
            Encoding::Binary => self.to_binary(),
        }
    }

    /// Writes with the preferred encoding for the model kind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode(self.preferred_encoding())?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Reads either encoding, detected from the leading bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn predict_proba_raw(&self, raw: &FlowTable) -> Result<Vec<f64>> {
        Ok(self.model.predict_proba(&self.prepare(raw)?))
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Corrupt(format!("unsupported bundle format version {v}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::fit_minmax;
    use crate::learners::{ModelConfig, TreeConfig};

    fn raw() -> FlowTable {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 3.0, ((i * 7) % 11) as f64, 5.0]).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i > 22) as u8).collect();
        FlowTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            rows.concat(),
            labels,
        )
        .unwrap()
    }

    fn bundle(kind: ModelKind) -> ModelBundle {
        let raw = raw();
        let scaler = fit_minmax(&raw).unwrap();
        let selected = vec![0, 1];
        let train = crate::flowdata::apply_minmax(&raw, &scaler).unwrap().select_columns(&selected).unwrap();
        let cfg = match kind {
            ModelKind::DecisionTree => ModelConfig::DecisionTree(TreeConfig::default()),
            k => ModelConfig::default_for(k, 3),
        };
        ModelBundle::new(raw.feature_names().to_vec(), scaler, selected, cfg.fit(&train).unwrap())
    }

    #[test]
    fn both_encodings_round_trip_exactly() {
        for kind in [ModelKind::DecisionTree, ModelKind::GradientBoosting, ModelKind::Adaboost] {
            let b = bundle(kind);
            for enc in [Encoding::Json, Encoding::Binary] {
                let back = ModelBundle::from_bytes(&b.encode(enc).unwrap()).unwrap();
                assert_eq!(back, b);
                let p0 = b.predict_proba_raw(&raw()).unwrap();
                let p1 = back.predict_proba_raw(&raw()).unwrap();
                assert!(p0.iter().zip(&p1).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn columns_are_matched_by_name() {
        let b = bundle(ModelKind::DecisionTree);
        let r = raw();
        let shuffled = r.select_columns(&[2, 1, 0]).unwrap();
        assert_eq!(b.predict_proba_raw(&shuffled).unwrap(), b.predict_proba_raw(&r).unwrap());
        let missing = r.select_columns(&[1, 2]).unwrap();
        assert!(matches!(b.prepare(&missing), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn truncated_binary_is_corrupt() {
        let bytes = bundle(ModelKind::Adaboost).to_binary().unwrap();
        assert!(matches!(
            ModelBundle::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Corrupt(_))
        ));
    }
}
