//! Versioned JSON model documents.
//!
//! ```text
//! {
//!   "format": "lfbb-gbdt",
//!   "version": 1,
//!   "params": { "n_trees": .., "max_depth": .., "learning_rate": .., ... },
//!   "schema_fingerprint": "<16 hex digits>",
//!   "feature_mask": { "no_pos": false, "no_freq": false },
//!   "base_score": 0.0,
//!   "trees": [ { "nodes": [ {"split": {...}} | {"leaf": {"value": ..}} ] } ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! reloaded model predicts bitwise identically.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GbdtParams, RegressionTree};
use crate::error::{Error, Result};
use crate::features::{FeatureMask, FeatureSchema, NUM_FEATURES};
use crate::tsv;

pub const MODEL_FORMAT: &str = "lfbb-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub version: u32,
    pub params: GbdtParams,
    pub schema_fingerprint: String,
    #[serde(default)]
    pub feature_mask: FeatureMask,
    pub base_score: f64,
    /// Retriever mix weight chosen on held-out data, if tuned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuned_mix: Option<f64>,
    pub trees: Vec<RegressionTree>,
}

impl GbdtModel {
    pub fn new(params: GbdtParams) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            params,
            schema_fingerprint: FeatureSchema::fingerprint(),
            feature_mask: FeatureMask::default(),
            base_score: 0.0,
            tuned_mix: None,
            trees: Vec::new(),
        }
    }

    pub fn check_schema(&self) -> Result<()> {
        let current = FeatureSchema::fingerprint();
        if self.schema_fingerprint != current {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                found: current,
            });
        }
        Ok(())
    }
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(model).map_err(|e| Error::invalid(e.to_string()))?;
    tsv::write_with(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn format_error(text: &str, e: serde_json::Error) -> Error {
    Error::ModelFormat {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<u32>,
}

/// Parses a model document. The feature schema fingerprint is not checked
/// here; [`super::predict`] refuses mismatching models.
pub fn parse_model(text: &str) -> Result<GbdtModel> {
    let header: Header = serde_json::from_str(text).map_err(|e| format_error(text, e))?;
    if header.format.as_deref() != Some(MODEL_FORMAT) {
        return Err(Error::ModelFormat {
            offset: 0,
            message: format!("not a {MODEL_FORMAT} document"),
        });
    }
    match header.version {
        Some(MODEL_VERSION) => {}
        Some(found) => {
            return Err(Error::ModelVersion {
                expected: MODEL_VERSION,
                found,
            })
        }
        None => {
            return Err(Error::ModelFormat {
                offset: 0,
                message: "missing version".into(),
            })
        }
    }
    let model: GbdtModel = serde_json::from_str(text).map_err(|e| format_error(text, e))?;
    model.params.validate()?;
    for (i, t) in model.trees.iter().enumerate() {
        t.validate(NUM_FEATURES, model.params.max_depth)
            .map_err(|e| Error::invalid(format!("tree {i}: {e}")))?;
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

/// `round<TAB>train_map`, rounds numbered from 1.
pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    tsv::write_with(path, |w| {
        writeln!(w, "round\ttrain_map")?;
        for (i, m) in trace.iter().enumerate() {
            writeln!(w, "{}\t{m}", i + 1)?;
        }
        Ok(())
    })
}
