//! Metropolis–Hastings sampling over parse graphs.

mod chain;
mod init;
mod proposal;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use chain::{run_chain, Chain, ChainTrace, TraceRecord};
pub use init::{init_sample, Skeleton, SkeletonConfig};
pub use proposal::{MoveKind, Proposal};

use crate::error::{Error, Result};
use crate::graph::{NodeId, ParseGraph};

/// Acceptance probability `min(1, exp(de / t))` where `de = E(current) - E(proposed)`.
pub fn accept_probability(de: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::ZeroTemperature);
    }
    let p = (de / t).exp().min(1.0);
    // inf - inf: no information, keep the current state
    Ok(if p.is_nan() { 0.0 } else { p })
}

/// Logarithmic cooling schedule `t0 / ln(1 + t)` for steps `t >= 1`.
pub fn anneal(t0: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::BadStep(t));
    }
    Ok(t0 / (1.0 + t as f64).ln())
}

/// Which proposal families a chain may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveSet {
    /// Resample the pitches of a radical.
    pub attributes: bool,
    /// Insert or delete radicals in leaf phrases.
    pub structure: bool,
    /// Add or remove variation edges.
    pub variation: bool,
}

impl MoveSet {
    pub const ALL: MoveSet = MoveSet {
        attributes: true,
        structure: true,
        variation: true,
    };
    /// Moves that change node attributes or structure, but not variation edges.
    pub const NODES: MoveSet = MoveSet {
        attributes: true,
        structure: true,
        variation: false,
    };
    pub const ATTRIBUTES: MoveSet = MoveSet {
        attributes: true,
        structure: false,
        variation: false,
    };

    pub(crate) fn kinds(self) -> Vec<MoveKind> {
        let mut v = Vec::new();
        if self.attributes {
            v.push(MoveKind::SetAttr);
        }
        if self.structure {
            v.extend([MoveKind::InsertChild, MoveKind::DeleteChild]);
        }
        if self.variation {
            v.extend([MoveKind::AddVariation, MoveKind::RemoveVariation]);
        }
        v
    }
}

impl Default for MoveSet {
    fn default() -> Self {
        MoveSet::ALL
    }
}

/// Per-node temperature overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemperatureMap(pub BTreeMap<NodeId, f64>);

impl TemperatureMap {
    /// Check that every id exists and every value is finite and non-negative.
    pub fn check(&self, pg: &ParseGraph) -> Result<()> {
        for (id, t) in &self.0 {
            if pg.node(*id).is_none() {
                return Err(Error::InvalidArgument(format!("unknown node {id}")));
            }
            if !t.is_finite() || *t < 0.0 {
                return Err(Error::InvalidArgument(format!("temperature of {id} must be finite and >= 0, got {t}")));
            }
        }
        Ok(())
    }

    /// The same temperature on every radical.
    pub fn radicals(pg: &ParseGraph, t: f64) -> Self {
        TemperatureMap(pg.radicals().map(|r| (r.id, t)).collect())
    }

    /// The temperatures stored on the graph's nodes, omitting zeros.
    pub fn of(pg: &ParseGraph) -> Self {
        TemperatureMap(pg.nodes().filter(|n| n.temperature != 0.0).map(|n| (n.id, n.temperature)).collect())
    }

    /// Set every node to the temperature in the map, and to 0 where absent.
    pub fn assign(&self, pg: &mut ParseGraph) -> Result<()> {
        self.check(pg)?;
        let ids: Vec<NodeId> = pg.nodes().map(|n| n.id).collect();
        for id in ids {
            pg.node_mut(id).expect("listed").temperature = self.0.get(&id).copied().unwrap_or(0.0);
        }
        Ok(())
    }

    /// Merge into the graph: listed nodes change, others keep their temperature.
    pub fn apply(&self, pg: &mut ParseGraph) -> Result<()> {
        self.check(pg)?;
        for (id, t) in &self.0 {
            pg.node_mut(*id).expect("checked").temperature = *t;
        }
        Ok(())
    }
}

/// How a chain picks targets and acceptance temperatures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ChainMode {
    /// Every node may change; acceptance at unit temperature.
    Generate,
    /// Only nodes with positive temperature change; acceptance at the target
    /// node's temperature, multiplied by the cooling schedule when `anneal` is set.
    Amend { t0: f64, anneal: bool },
}

impl ChainMode {
    pub fn amend(t0: f64) -> Self {
        ChainMode::Amend { t0, anneal: true }
    }
}
