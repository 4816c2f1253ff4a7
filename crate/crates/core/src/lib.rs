//! Attributed and-or graph (AOG) model of symbolic music.
//!
//! A piece is a [`ParseGraph`]: structural nodes (sections, periods) decompose
//! into ensembles, which hold an event tree of phrases and radicals next to a
//! metrical tree of musical time. Succession, diad and synchronization
//! relations are deduced from the production tree and node attributes.
//!
//! On top of the graph sit three layers:
//!
//! * [`features`]: the descriptor bank of histogram statistics over a graph;
//! * [`energy`]: a Gibbs energy `E = sum <lambda, h(pg)> - log P(child counts)`;
//! * [`sampler`] and [`learner`]: Metropolis-Hastings generation, tempered
//!   amendment with annealing, and minimax-entropy fitting of the energy.
//!
//! [`io`] holds the parse-graph document format, the model file, CSV exports and
//! MIDI rendering. [`fixtures`] bundles three labeled two-voice chorale excerpts.

pub mod energy;
mod error;
pub mod features;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod learner;
pub mod sampler;

pub use energy::{energy, energy_delta, EnergyModel};
pub use error::{Error, Result};
pub use features::{DescriptorId, FeatureDescriptor, Histogram, OrMultinomial};
pub use graph::{
    deduce_relations, flatten_events, validate, Beats, EdgeKind, EdgeRecord, FlatEvent, NodeId,
    NodeKind, NodeRecord, ParseGraph, PitchVector, ValidationReport,
};
pub use learner::{learn, LearnConfig, LearnReport};
pub use sampler::{
    accept_probability, anneal, init_sample, run_chain, Chain, ChainMode, ChainTrace, MoveSet,
    Proposal, Skeleton, SkeletonConfig, TemperatureMap,
};
