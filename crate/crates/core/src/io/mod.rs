//! File formats: parse-graph documents, model files, MIDI and CSV exports.

mod document;
mod midi;
mod model;
mod tables;

use std::path::Path;

pub use document::{load_pg, node_value, save_pg, DOCUMENT_FORMAT, DOCUMENT_VERSION};
pub use midi::{export_midi, midi_from_events, percussion_key, TICKS_PER_BEAT, VELOCITY};
pub use model::{dataset_hash, load_model, save_model, ModelMetadata, MODEL_FORMAT, MODEL_VERSION};
pub use tables::{write_histograms_csv, write_learn_report_csv, write_trace_csv};

use crate::error::{Error, Result};
use crate::graph::ParseGraph;

pub fn read_pg(path: &Path) -> Result<ParseGraph> {
    load_pg(&std::fs::read_to_string(path)?)
}

/// Every `*.json` parse-graph document directly inside `dir`, sorted by file name.
pub fn read_dataset(dir: &Path) -> Result<Vec<(std::path::PathBuf, ParseGraph)>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no .json documents in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| read_pg(&p).map(|g| (p, g)))
        .collect()
}
