use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use musicaog::io::{export_midi, load_pg, node_value, save_pg, write_trace_csv};
use musicaog::{Chain, ChainMode, ChainTrace, EnergyModel, Error, MoveSet, NodeId, ParseGraph, TemperatureMap};

use crate::error::ApiError;

/// Steps between automatic snapshots.
pub const SNAPSHOT_INTERVAL: u64 = 50;

/// One amendment chain over an uploaded graph.
pub struct Session {
    pub id: String,
    pub model_id: String,
    model: Arc<EnergyModel>,
    chain: Chain,
    seed: u64,
}

/// Everything needed to resume a session after a restart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub model: String,
    pub seed: u64,
    pub mode: ChainMode,
    pub document: String,
    pub rng: ChaCha8Rng,
    pub t: u64,
    pub trace: ChainTrace,
}

impl SessionSnapshot {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let tmp = dir.join(format!("{}.json.tmp", self.id));
        std::fs::write(&tmp, serde_json::to_vec(self).map_err(std::io::Error::other)?)?;
        std::fs::rename(tmp, dir.join(format!("{}.json", self.id)))
    }
}

pub(crate) fn read_snapshots(dir: &Path) -> musicaog::Result<Vec<SessionSnapshot>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            serde_json::from_slice(&std::fs::read(p)?)
                .map_err(|e| Error::InvalidArgument(format!("snapshot {}: {e}", p.display())))
        })
        .collect()
}

impl Session {
    /// A fresh session: every temperature is 0 and no step has been taken.
    pub fn create(
        id: String,
        model_id: String,
        model: Arc<EnergyModel>,
        pg: &ParseGraph,
        seed: u64,
        t0: f64,
    ) -> musicaog::Result<Self> {
        let mut pg = pg.clone();
        TemperatureMap::default().assign(&mut pg)?;
        let chain = Chain::new(&pg, ChainMode::amend(t0), MoveSet::ALL, seed)?;
        Ok(Session {
            id,
            model_id,
            model,
            chain,
            seed,
        })
    }

    pub fn restore(snap: SessionSnapshot, model: Arc<EnergyModel>) -> musicaog::Result<Self> {
        let pg = load_pg(&snap.document)?;
        if snap.trace.records.len() as u64 != snap.t {
            return Err(Error::InvalidArgument(format!("snapshot {} trace length differs from its step", snap.id)));
        }
        let chain = Chain::resume(&pg, snap.mode, MoveSet::ALL, snap.rng, snap.t, snap.trace)?;
        Ok(Session {
            id: snap.id,
            model_id: snap.model,
            model,
            chain,
            seed: snap.seed,
        })
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            model: self.model_id.clone(),
            seed: self.seed,
            mode: self.chain.mode(),
            document: save_pg(self.chain.graph()),
            rng: self.chain.rng().clone(),
            t: self.chain.steps(),
            trace: self.chain.trace().clone(),
        }
    }

    pub fn graph(&self) -> &ParseGraph {
        self.chain.graph()
    }

    pub fn steps(&self) -> u64 {
        self.chain.steps()
    }

    pub fn energy(&self) -> f64 {
        self.chain.energy(&self.model)
    }

    /// Temperature of every node, including zeros.
    pub fn temperatures(&self) -> BTreeMap<NodeId, f64> {
        self.graph().nodes().map(|n| (n.id, n.temperature)).collect()
    }

    pub fn set_temperatures(&mut self, temps: &TemperatureMap) -> musicaog::Result<()> {
        self.chain.set_temperatures(temps)
    }

    /// Full view: document, temperatures, energy and step counter.
    pub fn view(&self) -> Value {
        let graph: Value = serde_json::from_str(&save_pg(self.graph())).expect("canonical text is JSON");
        json!({
            "session_id": self.id,
            "model": self.model_id,
            "t": self.steps(),
            "energy": self.energy(),
            "temperatures": self.temperatures(),
            "graph": graph,
        })
    }

    /// Advance `n` steps; the response lists only what changed.
    pub fn step(&mut self, n: u64) -> Result<Value, ApiError> {
        let before = self.graph().clone();
        let first = self.chain.trace().records.len();
        for _ in 0..n {
            match self.chain.step(&self.model) {
                Ok(_) => {}
                Err(Error::NoEligibleTarget) => {
                    return Err(ApiError::conflict(
                        "no_eligible_target",
                        "every node is frozen; raise a temperature above 0 first",
                    ))
                }
                Err(e) => return Err(ApiError::internal(e.to_string())),
            }
        }
        let after = self.graph();
        let changed: Vec<Value> = after
            .nodes()
            .filter(|n| before.node(n.id) != Some(*n))
            .map(node_value)
            .collect();
        let removed: Vec<NodeId> = before.nodes().map(|n| n.id).filter(|id| after.node(*id).is_none()).collect();
        let records = &self.chain.trace().records[first..];
        Ok(json!({
            "t": self.steps(),
            "energy": self.energy(),
            "changed": changed,
            "removed": removed,
            "delta_energies": records.iter().map(|r| r.delta).collect::<Vec<_>>(),
            "trace": records,
        }))
    }

    pub fn export_pg(&self) -> String {
        save_pg(self.graph())
    }

    pub fn export_midi(&self) -> musicaog::Result<Vec<u8>> {
        export_midi(self.graph())
    }

    pub fn export_trace(&self) -> musicaog::Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, self.chain.trace())?;
        Ok(buf)
    }
}
