use thiserror::Error;

use crate::features::DescriptorId;
use crate::graph::{NodeId, ValidationReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("radical {0} starts outside every metrical span")]
    MissingMetricalCover(NodeId),

    #[error("no graph in the dataset has an observation for descriptor {0}")]
    AllEmpty(DescriptorId),

    #[error("histograms have different binning ({0})")]
    BinMismatch(String),

    #[error("unknown descriptor {0}")]
    UnknownDescriptor(DescriptorId),

    #[error("proposal is not applicable: {0}")]
    InapplicableProposal(String),

    #[error("prior is empty: {0}")]
    DegeneratePriors(String),

    #[error("temperature must be positive for a tempered acceptance")]
    ZeroTemperature,

    #[error("annealing step must be >= 1, got {0}")]
    BadStep(u64),

    #[error("no node is eligible for a proposal (all temperatures are zero)")]
    NoEligibleTarget,

    #[error("every descriptor in the bank is already selected")]
    BankExhausted,

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("unsupported document version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("parse graph is not well formed:\n{0}")]
    Validation(ValidationReport),

    #[error("pitch {midi} of radical {node} is outside the MIDI range")]
    PitchOutOfRange { node: NodeId, midi: i32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(reason: impl Into<String>) -> Self {
        Error::Parse {
            line: 0,
            column: 0,
            reason: reason.into(),
        }
    }
}
