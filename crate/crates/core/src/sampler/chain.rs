use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::proposal::{propose, targets, MoveKind, PitchPrior};
use super::{accept_probability, anneal, ChainMode, MoveSet, TemperatureMap};
use crate::energy::{energy_delta, EnergyModel};
use crate::error::{Error, Result};
use crate::features::FeatureCounts;
use crate::graph::{deduce_relations, NodeRecord, ParseGraph};

/// One Metropolis–Hastings step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based step index.
    pub step: u64,
    pub kind: MoveKind,
    /// `E(proposed) - E(current)`; zero for inapplicable proposals.
    pub delta: f64,
    pub accepted: bool,
    /// Energy of the state after the step.
    pub energy: f64,
    /// Temperature used in the acceptance test.
    pub temperature: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainTrace {
    pub records: Vec<TraceRecord>,
}

impl ChainTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }
}

/// A Markov chain over parse graphs. The model is passed to every step so
/// that its weights can change between steps.
#[derive(Clone, Debug)]
pub struct Chain {
    graph: ParseGraph,
    counts: FeatureCounts,
    mode: ChainMode,
    moves: MoveSet,
    rng: ChaCha8Rng,
    t: u64,
    trace: ChainTrace,
}

impl Chain {
    pub fn new(graph: &ParseGraph, mode: ChainMode, moves: MoveSet, seed: u64) -> Result<Self> {
        Self::resume(graph, mode, moves, ChaCha8Rng::seed_from_u64(seed), 0, ChainTrace::default())
    }

    /// Rebuild a chain from a saved state.
    pub fn resume(
        graph: &ParseGraph,
        mode: ChainMode,
        moves: MoveSet,
        rng: ChaCha8Rng,
        t: u64,
        trace: ChainTrace,
    ) -> Result<Self> {
        if let ChainMode::Amend { t0, .. } = mode {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::InvalidArgument(format!("initial temperature must be positive, got {t0}")));
            }
        }
        let graph = deduce_relations(graph)?;
        let counts = FeatureCounts::of(&graph);
        Ok(Chain {
            graph,
            counts,
            mode,
            moves,
            rng,
            t,
            trace,
        })
    }

    pub fn graph(&self) -> &ParseGraph {
        &self.graph
    }

    pub fn counts(&self) -> &FeatureCounts {
        &self.counts
    }

    pub fn energy(&self, model: &EnergyModel) -> f64 {
        model.energy_of_counts(&self.counts)
    }

    pub fn mode(&self) -> ChainMode {
        self.mode
    }

    pub fn moves(&self) -> MoveSet {
        self.moves
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn trace(&self) -> &ChainTrace {
        &self.trace
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn into_parts(self) -> (ParseGraph, ChainTrace) {
        (self.graph, self.trace)
    }

    pub fn set_temperatures(&mut self, temps: &TemperatureMap) -> Result<()> {
        temps.apply(&mut self.graph)
    }

    fn gate(&self) -> impl Fn(&NodeRecord) -> bool {
        let generate = matches!(self.mode, ChainMode::Generate);
        move |n: &NodeRecord| generate || n.temperature > 0.0
    }

    /// Propose one edit and accept or reject it.
    pub fn step(&mut self, model: &EnergyModel) -> Result<&TraceRecord> {
        let t = self.t + 1;
        let idx = self.graph.index();
        let gate = self.gate();
        let mut available = Vec::new();
        for kind in self.moves.kinds() {
            let tg = targets(kind, &self.graph, &idx, &gate);
            if tg.len() > 0 {
                available.push((kind, tg));
            }
        }
        if available.is_empty() {
            return Err(Error::NoEligibleTarget);
        }
        // uniform over every (kind, target) pair
        let total: usize = available.iter().map(|(_, tg)| tg.len()).sum();
        let mut i = self.rng.gen_range(0..total);
        let mut pick = 0;
        while i >= available[pick].1.len() {
            i -= available[pick].1.len();
            pick += 1;
        }
        let (kind, tg) = &available[pick];
        let prior = PitchPrior::new(model, Some(model.smoothing));
        let proposal = propose(*kind, tg, i, &self.graph, &prior, &mut self.rng);
        let temperature = match self.mode {
            ChainMode::Generate => 1.0,
            ChainMode::Amend { t0, anneal: cool } => {
                let node = proposal
                    .governing_node(&self.graph)
                    .and_then(|id| self.graph.node(id))
                    .map_or(0.0, |n| n.temperature);
                if cool {
                    node * anneal(t0, t)?
                } else {
                    node
                }
            }
        };
        let u: f64 = self.rng.gen();
        let current = model.energy_of_counts(&self.counts);
        let record = match energy_delta(model, &self.graph, &self.counts, &proposal) {
            Ok(scored) => {
                let accepted = u < accept_probability(-scored.delta, temperature)?;
                let energy = if accepted { scored.energy } else { current };
                let delta = scored.delta;
                if accepted {
                    self.graph = scored.graph;
                    self.counts = scored.counts;
                }
                TraceRecord {
                    step: t,
                    kind: *kind,
                    delta,
                    accepted,
                    energy,
                    temperature,
                }
            }
            Err(Error::InapplicableProposal(_) | Error::MissingMetricalCover(_)) => TraceRecord {
                step: t,
                kind: *kind,
                delta: 0.0,
                accepted: false,
                energy: current,
                temperature,
            },
            Err(e) => return Err(e),
        };
        self.t = t;
        self.trace.records.push(record);
        Ok(self.trace.records.last().expect("just pushed"))
    }

    pub fn run(&mut self, model: &EnergyModel, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(model)?;
        }
        Ok(())
    }
}

/// Run `steps` steps from `init` and return the final graph with its trace.
pub fn run_chain(
    model: &EnergyModel,
    init: &ParseGraph,
    mode: ChainMode,
    moves: MoveSet,
    seed: u64,
    steps: u64,
) -> Result<(ParseGraph, ChainTrace)> {
    let mut chain = Chain::new(init, mode, moves, seed)?;
    chain.run(model, steps)?;
    Ok(chain.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::features::DescriptorId;
    use crate::graph::tests::{beats, tiny_graph};
    use crate::graph::{validate, NodeId};

    fn model() -> EnergyModel {
        let data = deduce_relations(&tiny_graph(&[
            (60, beats(0), beats(1)),
            (62, beats(1), beats(2)),
            (64, beats(2), beats(3)),
            (65, beats(3), beats(4)),
        ]))
        .unwrap();
        let mut m = EnergyModel::fit(&[data], 1e-4);
        m.select(DescriptorId::PITCH_CLASS).unwrap();
        let mut l = vec![0.0; 12];
        l[0] = 2.0;
        m.set_lambda(DescriptorId::PITCH_CLASS, l).unwrap();
        m
    }

    #[test]
    fn chain_is_reproducible() {
        let m = model();
        let g = tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2)), (64, beats(2), beats(4))]);
        let a = run_chain(&m, &g, ChainMode::Generate, MoveSet::ALL, 3, 200).unwrap();
        let b = run_chain(&m, &g, ChainMode::Generate, MoveSet::ALL, 3, 200).unwrap();
        assert_eq!(a, b);
        assert!(validate(&a.0).is_empty(), "{}", validate(&a.0));
        let last = a.1.records.last().unwrap();
        assert_eq!(last.step, 200);
        assert!((last.energy - energy(&m, &a.0)).abs() < 1e-12);
    }

    #[test]
    fn frozen_graph_has_no_targets() {
        let m = model();
        let g = tiny_graph(&[(60, beats(0), beats(1))]);
        let mut c = Chain::new(&g, ChainMode::amend(1.0), MoveSet::ALL, 1).unwrap();
        assert!(matches!(c.step(&m), Err(Error::NoEligibleTarget)));
    }

    #[test]
    fn amend_only_touches_hot_nodes() {
        let m = model();
        let mut g = tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2)), (64, beats(2), beats(4))]);
        g.node_mut(NodeId(11)).unwrap().temperature = 5.0;
        let (out, trace) = run_chain(&m, &g, ChainMode::amend(1.0), MoveSet::ALL, 9, 300).unwrap();
        for id in [NodeId(10), NodeId(12)] {
            assert_eq!(out.node(id), g.node(id));
        }
        assert!(trace.records.iter().all(|r| r.kind == MoveKind::SetAttr));
        assert!(trace.records.iter().any(|r| r.accepted));
    }

    #[test]
    fn energy_trace_is_consistent() {
        let m = model();
        let g = tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2)), (64, beats(2), beats(4))]);
        let mut c = Chain::new(&g, ChainMode::Generate, MoveSet::ALL, 11).unwrap();
        let mut prev = c.energy(&m);
        for _ in 0..100 {
            let r = c.step(&m).unwrap().clone();
            if r.accepted {
                assert!((r.energy - (prev + r.delta)).abs() < 1e-9);
            } else {
                assert_eq!(r.energy, prev);
            }
            prev = r.energy;
        }
    }
}
