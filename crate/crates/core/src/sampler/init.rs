use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::proposal::{weighted, PitchPrior};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::features::{DescriptorId, DURATION_CATEGORIES};
use crate::graph::{
    deduce_relations, Beats, EdgeRecord, MetricalAttrs, NodeId, NodeKind, NodeRecord, ParseGraph, RadicalAttrs,
};

/// A parse graph with its radicals stripped: the structure a sample is grown into.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub graph: ParseGraph,
    /// Timbre given to the radicals of each leaf phrase.
    pub timbres: BTreeMap<NodeId, String>,
}

impl Skeleton {
    /// Strip radicals and relation edges from `pg`, remembering each emptied
    /// phrase's timbre.
    pub fn from_graph(pg: &ParseGraph) -> Self {
        let mut g = pg.without_deduced();
        let idx = g.index();
        let mut timbres = BTreeMap::new();
        let radicals: Vec<NodeId> = g.radicals().map(|r| r.id).collect();
        for r in &radicals {
            if let (Some(p), Some(a)) = (idx.parent(*r), g.node(*r).and_then(|n| n.radical_attrs())) {
                timbres.entry(p).or_insert_with(|| a.timbre.clone());
            }
        }
        for r in radicals {
            g.remove_node(r);
        }
        Skeleton { graph: g, timbres }
    }

    /// Phrases without children, in id order.
    pub fn leaf_phrases(&self) -> Vec<NodeId> {
        let idx = self.graph.index();
        self.graph
            .nodes()
            .filter(|n| n.kind == NodeKind::Phrase && idx.children(n.id).is_empty())
            .map(|n| n.id)
            .collect()
    }
}

/// Parameters of a synthetic skeleton: one period holding one ensemble of
/// parallel voices over a regular meter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkeletonConfig {
    pub measures: u32,
    pub beats_per_measure: u32,
    pub tempo: f64,
    pub voices: u32,
    pub measures_per_phrase: u32,
    /// Metrical children per beat; 1 leaves beats undivided.
    pub beat_divisions: u32,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig {
            measures: 8,
            beats_per_measure: 4,
            tempo: 100.0,
            voices: 2,
            measures_per_phrase: 1,
            beat_divisions: 4,
        }
    }
}

impl SkeletonConfig {
    pub fn build(&self) -> Result<Skeleton> {
        if self.measures == 0 || self.beats_per_measure == 0 || self.voices == 0 || self.measures_per_phrase == 0 || self.beat_divisions == 0
        {
            return Err(Error::InvalidArgument("skeleton dimensions must be positive".into()));
        }
        if !(self.tempo > 0.0 && self.tempo.is_finite()) {
            return Err(Error::InvalidArgument("tempo must be positive".into()));
        }
        let bpm = i64::from(self.beats_per_measure);
        let end = Beats::from_integer(i64::from(self.measures) * bpm);
        let zero = Beats::from_integer(0);
        let mut next = 0u32;
        let mut id = || {
            next += 1;
            NodeId(next - 1)
        };
        let root = id();
        let mut g = ParseGraph::new(NodeRecord::group(root, NodeKind::Period, zero, end, "piece"));
        let ens = g.add_child(root, NodeRecord::group(id(), NodeKind::Ensemble, zero, end, "texture"))?;
        let mut timbres = BTreeMap::new();
        for v in 0..self.voices {
            let name = format!("voice{}", v + 1);
            let voice = g.add_child(ens, NodeRecord::group(id(), NodeKind::Phrase, zero, end, &name))?;
            let mut m = 0;
            while m < self.measures {
                let span = self.measures_per_phrase.min(self.measures - m);
                let on = Beats::from_integer(i64::from(m) * bpm);
                let off = Beats::from_integer(i64::from(m + span) * bpm);
                let p = g.add_child(
                    voice,
                    NodeRecord::group(id(), NodeKind::Phrase, on, off, &format!("{name}-m{}", m + 1)),
                )?;
                timbres.insert(p, name.clone());
                m += span;
            }
        }
        for m in 0..i64::from(self.measures) {
            let on = Beats::from_integer(m * bpm);
            let measure = g.add_child(
                ens,
                NodeRecord::metrical(id(), on, on + Beats::from_integer(bpm), MetricalAttrs::new(1, self.tempo)),
            )?;
            for b in 0..bpm {
                let t = on + Beats::from_integer(b);
                let beat = g.add_child(
                    measure,
                    NodeRecord::metrical(id(), t, t + Beats::from_integer(1), MetricalAttrs::new(0, self.tempo)),
                )?;
                if self.beat_divisions > 1 {
                    let div = i64::from(self.beat_divisions);
                    for k in 0..div {
                        let s = t + Beats::new(k, div);
                        g.add_child(
                            beat,
                            NodeRecord::metrical(id(), s, s + Beats::new(1, div), MetricalAttrs::new(-1, self.tempo)),
                        )?;
                    }
                }
            }
        }
        Ok(Skeleton { graph: g, timbres })
    }
}

/// Grow radicals into every leaf phrase of `skeleton`, drawing counts,
/// durations and pitches from the model's raw (unsmoothed) priors, then
/// deduce relations.
pub fn init_sample(model: &EnergyModel, skeleton: &Skeleton, seed: u64) -> Result<ParseGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_with(model, skeleton, &mut rng)
}

pub(crate) fn init_with<R: Rng>(model: &EnergyModel, skeleton: &Skeleton, rng: &mut R) -> Result<ParseGraph> {
    let need = |d: DescriptorId| {
        model
            .prior(d)
            .filter(|h| !h.is_empty())
            .ok_or_else(|| Error::DegeneratePriors(format!("no observations for descriptor {d}")))
    };
    let count_prior = need(DescriptorId::RADICALS_PER_PHRASE)?.mass.clone();
    let dur_prior = need(DescriptorId::DURATION)?.mass.clone();
    need(DescriptorId::PITCH_CLASS)?;
    let pitches = PitchPrior::new(model, None);
    let categories: Vec<Beats> = DURATION_CATEGORIES.iter().map(|&(n, d)| Beats::new(n, d)).collect();
    let quarter = categories[0];

    let mut g = skeleton.graph.without_deduced();
    for phrase in skeleton.leaf_phrases() {
        let p = g.node(phrase).expect("leaf phrase").clone();
        let span = p.duration();
        let fits = |k: usize| quarter * Beats::from_integer(k as i64) <= span;
        let w: Vec<f64> = count_prior
            .iter()
            .enumerate()
            .map(|(i, &m)| if fits(i + 1) { m } else { 0.0 })
            .collect();
        let k = if w.iter().any(|&x| x > 0.0) { weighted(&w, rng) + 1 } else { 1 };
        let timbre = skeleton.timbres.get(&phrase).cloned().unwrap_or_else(|| "voice".into());

        let mut t = p.t_on;
        let mut children = Vec::with_capacity(k);
        for i in 0..k {
            let remaining = p.t_off - t;
            let dur = if i + 1 == k {
                remaining
            } else {
                let reserve = quarter * Beats::from_integer((k - 1 - i) as i64);
                let feasible: Vec<f64> = categories
                    .iter()
                    .zip(&dur_prior)
                    .map(|(c, &m)| if *c <= remaining - reserve { m } else { 0.0 })
                    .collect();
                if feasible.iter().any(|&x| x > 0.0) {
                    categories[weighted(&feasible, rng)]
                } else {
                    quarter
                }
            };
            let id = g.next_id();
            let mut rec = NodeRecord::radical(id, t, t + dur, RadicalAttrs::note(pitches.draw(rng), timbre.clone()));
            rec.temperature = 1.0;
            g.add_child(phrase, rec)?;
            children.push(id);
            t += dur;
        }
        if k >= 2 {
            let a = rng.gen_range(0..k);
            let mut b = rng.gen_range(0..k - 1);
            if b >= a {
                b += 1;
            }
            // the pair is unordered; the edge runs from the earlier child
            g.add_edge(EdgeRecord::variation(children[a.min(b)], children[a.max(b)]));
        }
    }
    deduce_relations(&g)
}
