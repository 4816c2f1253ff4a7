use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::document::save_pg;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::features::{descriptor, list_bank, DescriptorId, FeatureCategory, Histogram, OrMultinomial};
use crate::graph::{NodeKind, ParseGraph};
use crate::learner::LearnConfig;

pub const MODEL_FORMAT: &str = "musicaog-model";
pub const MODEL_VERSION: u32 = 1;

/// Provenance stored next to the parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelMetadata {
    pub learn_config: Option<LearnConfig>,
    /// SHA-256 of the canonical documents of the training set, in input order.
    pub dataset_sha256: Option<String>,
    pub dataset_size: usize,
    pub parameter_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    smoothing: f64,
    selected: Vec<DescriptorId>,
    descriptors: Vec<DescriptorEntry>,
    or_multinomials: Vec<OrMultinomial>,
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorEntry {
    id: DescriptorId,
    name: String,
    category: FeatureCategory,
    bins: Vec<String>,
    lambda: Option<Vec<f64>>,
    prior: Option<PriorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorEntry {
    mass: Vec<f64>,
    observations: u64,
}

/// Self-describing text form of a model. Floats are written in shortest
/// round-trip form, so loading gives back a bit-identical model.
pub fn save_model(model: &EnergyModel, metadata: &ModelMetadata) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        smoothing: model.smoothing,
        selected: model.selected.clone(),
        descriptors: list_bank()
            .iter()
            .map(|d| DescriptorEntry {
                id: d.id,
                name: d.name.into(),
                category: d.category,
                bins: d.labels.clone(),
                lambda: model.lambda(d.id).map(<[f64]>::to_vec),
                prior: model.prior(d.id).map(|h| PriorEntry {
                    mass: h.mass.clone(),
                    observations: h.observations,
                }),
            })
            .collect(),
        or_multinomials: model.or_multinomials.values().cloned().collect(),
        metadata: ModelMetadata {
            parameter_count: model.parameter_count(),
            ..metadata.clone()
        },
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn load_model(text: &str) -> Result<(EnergyModel, ModelMetadata)> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    })?;
    if file.format != MODEL_FORMAT {
        return Err(Error::parse(format!("not a model file (format {:?})", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::SchemaVersion {
            found: file.version,
            expected: MODEL_VERSION,
        });
    }
    let mut lambdas = BTreeMap::new();
    let mut priors = BTreeMap::new();
    for d in file.descriptors {
        let bins = descriptor(d.id)?.bins();
        if d.bins.len() != bins {
            return Err(Error::BinMismatch(format!("descriptor {} stored with {} bins", d.id, d.bins.len())));
        }
        if let Some(l) = d.lambda {
            if l.len() != bins {
                return Err(Error::BinMismatch(format!("descriptor {} has {} weights", d.id, l.len())));
            }
            lambdas.insert(d.id, l);
        }
        if let Some(p) = d.prior {
            if p.mass.len() != bins {
                return Err(Error::BinMismatch(format!("prior of descriptor {} has {} bins", d.id, p.mass.len())));
            }
            priors.insert(
                d.id,
                Histogram {
                    descriptor: d.id,
                    mass: p.mass,
                    observations: p.observations,
                },
            );
        }
    }
    for d in &file.selected {
        if !lambdas.contains_key(d) {
            return Err(Error::parse(format!("selected descriptor {d} has no weights")));
        }
    }
    if lambdas.len() != file.selected.len() {
        return Err(Error::parse("weights given for an unselected descriptor"));
    }
    let or_multinomials: BTreeMap<NodeKind, OrMultinomial> =
        file.or_multinomials.into_iter().map(|m| (m.kind, m)).collect();
    let model = EnergyModel {
        selected: file.selected,
        lambdas,
        priors,
        or_multinomials,
        smoothing: file.smoothing,
    };
    Ok((model, file.metadata))
}

/// SHA-256 over the canonical documents of `pgs`, in order.
pub fn dataset_hash(pgs: &[ParseGraph]) -> String {
    let mut h = Sha256::new();
    for g in pgs {
        h.update(save_pg(g).as_bytes());
    }
    hex::encode(h.finalize())
}
