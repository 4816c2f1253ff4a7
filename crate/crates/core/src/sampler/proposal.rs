use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::features::{DescriptorId, DURATION_CATEGORIES, MAX_CHILDREN};
use crate::graph::{
    Beats, EdgeKind, EdgeRecord, FigureKind, GraphIndex, NodeId, NodeKind, NodeRecord, ParseGraph, PitchVector,
    RadicalAttrs,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    SetAttr,
    InsertChild,
    DeleteChild,
    AddVariation,
    RemoveVariation,
}

impl MoveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::SetAttr => "set_attr",
            MoveKind::InsertChild => "insert_child",
            MoveKind::DeleteChild => "delete_child",
            MoveKind::AddVariation => "add_variation",
            MoveKind::RemoveVariation => "remove_variation",
        }
    }
}

/// A local edit of a parse graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Replace the pitches of a pitched radical.
    SetPitches { node: NodeId, pitches: Vec<PitchVector> },
    /// Split the last `duration` beats off radical `split` into a new radical
    /// with `pitches`, inserted right after it under `parent`.
    InsertChild {
        parent: NodeId,
        split: NodeId,
        #[serde(with = "crate::graph::beats_serde")]
        duration: Beats,
        pitches: Vec<PitchVector>,
    },
    /// Remove radical `child`; its predecessor (or successor, for the first
    /// child) absorbs its span.
    DeleteChild { parent: NodeId, child: NodeId },
    AddVariation { src: NodeId, dst: NodeId },
    RemoveVariation { src: NodeId, dst: NodeId },
}

fn inapplicable(what: impl Into<String>) -> Error {
    Error::InapplicableProposal(what.into())
}

impl Proposal {
    pub fn kind(&self) -> MoveKind {
        match self {
            Proposal::SetPitches { .. } => MoveKind::SetAttr,
            Proposal::InsertChild { .. } => MoveKind::InsertChild,
            Proposal::DeleteChild { .. } => MoveKind::DeleteChild,
            Proposal::AddVariation { .. } => MoveKind::AddVariation,
            Proposal::RemoveVariation { .. } => MoveKind::RemoveVariation,
        }
    }

    /// The node whose temperature governs acceptance.
    pub fn governing_node(&self, pg: &ParseGraph) -> Option<NodeId> {
        match self {
            Proposal::SetPitches { node, .. } => Some(*node),
            Proposal::InsertChild { parent, .. } | Proposal::DeleteChild { parent, .. } => Some(*parent),
            Proposal::AddVariation { src, .. } | Proposal::RemoveVariation { src, .. } => pg.parent(*src),
        }
    }

    /// Apply in place and return the nodes whose own observations changed.
    /// Fails with [`Error::InapplicableProposal`] without modifying `pg`.
    pub fn apply(&self, pg: &mut ParseGraph) -> Result<Vec<NodeId>> {
        match self {
            Proposal::SetPitches { node, pitches } => {
                let n = pg.node(*node).ok_or_else(|| inapplicable(format!("unknown node {node}")))?;
                let attrs = n.radical_attrs().ok_or_else(|| inapplicable(format!("{node} is not a radical")))?;
                if !attrs.is_pitched() || pitches.is_empty() {
                    return Err(inapplicable(format!("{node} is unpitched or no pitches given")));
                }
                if pitches.iter().any(|p| p.pitch_class > 11) {
                    return Err(inapplicable("pitch class out of range"));
                }
                if let Some(crate::graph::NodeAttrs::Radical(r)) = pg.node_mut(*node).map(|n| &mut n.attrs) {
                    r.pitches = pitches.clone();
                }
                Ok(vec![*node])
            }
            Proposal::InsertChild {
                parent,
                split,
                duration,
                pitches,
            } => {
                let kids = pg.children(*parent);
                let s = pg
                    .node(*split)
                    .filter(|s| s.kind == NodeKind::Radical && kids.contains(split))
                    .ok_or_else(|| inapplicable(format!("{split} is not a radical child of {parent}")))?;
                if *duration <= Beats::from_integer(0) || *duration >= s.duration() || pitches.is_empty() {
                    return Err(inapplicable("split duration out of range"));
                }
                if kids.len() >= MAX_CHILDREN {
                    return Err(inapplicable(format!("{parent} is full")));
                }
                let s = s.clone();
                let timbre = s.radical_attrs().map(|r| r.timbre.clone()).unwrap_or_default();
                let cut = s.t_off - *duration;
                let id = pg.next_id();
                let attrs = RadicalAttrs {
                    figure_kind: if pitches.len() == 1 { FigureKind::Note } else { FigureKind::Chord },
                    pitches: pitches.clone(),
                    timbre,
                    articulation: Vec::new(),
                };
                let mut rec = NodeRecord::radical(id, cut, s.t_off, attrs);
                rec.temperature = s.temperature;
                pg.node_mut(*split).expect("exists").t_off = cut;
                pg.add_child(*parent, rec)?;
                Ok(vec![*split, id])
            }
            Proposal::DeleteChild { parent, child } => {
                let kids = pg.children(*parent);
                let pos = kids
                    .iter()
                    .position(|k| k == child)
                    .filter(|_| pg.node(*child).is_some_and(|c| c.kind == NodeKind::Radical))
                    .ok_or_else(|| inapplicable(format!("{child} is not a radical child of {parent}")))?;
                if kids.len() < 2 {
                    return Err(inapplicable(format!("{parent} would become empty")));
                }
                let c = pg.node(*child).expect("exists").clone();
                let absorber = if pos > 0 { kids[pos - 1] } else { kids[1] };
                let a = pg.node_mut(absorber).expect("exists");
                if pos > 0 {
                    a.t_off = a.t_off.max(c.t_off);
                } else {
                    a.t_on = a.t_on.min(c.t_on);
                }
                pg.remove_node(*child);
                Ok(vec![*child, absorber])
            }
            Proposal::AddVariation { src, dst } => {
                if src == dst || pg.node(*src).is_none() || pg.node(*dst).is_none() {
                    return Err(inapplicable("variation endpoints must be distinct existing nodes"));
                }
                if has_variation(pg, *src, *dst) {
                    return Err(inapplicable("variation already present"));
                }
                pg.add_edge(EdgeRecord::variation(*src, *dst));
                Ok(Vec::new())
            }
            Proposal::RemoveVariation { src, dst } => {
                let n = pg.remove_edge_where(|e| e.kind == EdgeKind::Variation && e.src == *src && e.dst == *dst);
                if n == 0 {
                    return Err(inapplicable("no such variation"));
                }
                Ok(Vec::new())
            }
        }
    }
}

fn has_variation(pg: &ParseGraph, a: NodeId, b: NodeId) -> bool {
    pg.edges_of(EdgeKind::Variation)
        .any(|e| (e.src == a && e.dst == b) || (e.src == b && e.dst == a))
}

/// Payload distributions for proposals. Pitches: a pitch class from the
/// pitch-class prior, then an octave in MIDI [36, 84) weighted by the register
/// prior. Durations of inserted radicals: the duration prior restricted to
/// the categories that fit.
#[derive(Clone, Debug)]
pub(crate) struct PitchPrior {
    pc: Vec<f64>,
    register: Vec<f64>,
    duration: Vec<f64>,
}

impl PitchPrior {
    /// `smoothing = None` uses the raw priors.
    pub fn new(model: &EnergyModel, smoothing: Option<f64>) -> Self {
        let get = |d: DescriptorId| match (model.prior(d), smoothing) {
            (Some(h), Some(eps)) => h.smoothed(eps),
            (Some(h), None) => h.mass.clone(),
            (None, _) => vec![1.0; 12],
        };
        PitchPrior {
            pc: get(DescriptorId::PITCH_CLASS),
            register: get(DescriptorId::MIDI_PITCH),
            duration: get(DescriptorId::DURATION),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> PitchVector {
        let pc = weighted(&self.pc, rng);
        let candidates: Vec<i32> = (0..4).map(|j| 36 + pc as i32 + 12 * j).collect();
        let w: Vec<f64> = candidates.iter().map(|m| self.register[((m - 36) / 4) as usize]).collect();
        PitchVector::from_midi(candidates[weighted(&w, rng)])
    }
}

/// Index drawn proportionally to `w`; uniform when every weight is zero.
pub(crate) fn weighted<R: Rng>(w: &[f64], rng: &mut R) -> usize {
    match WeightedIndex::new(w) {
        Ok(d) => d.sample(rng),
        Err(_) => rng.gen_range(0..w.len()),
    }
}

/// Phrases whose children are all radicals (at least one).
pub(crate) fn leaf_phrases<'g>(pg: &'g ParseGraph, idx: &'g GraphIndex) -> impl Iterator<Item = &'g NodeRecord> {
    pg.nodes().filter(move |n| {
        n.kind == NodeKind::Phrase && {
            let kids = idx.children(n.id);
            !kids.is_empty() && kids.iter().all(|k| pg.node(*k).is_some_and(|c| c.kind == NodeKind::Radical))
        }
    })
}

/// Every possible target of one move kind, in a deterministic order.
#[derive(Clone, Debug)]
pub(crate) enum Targets {
    Radicals(Vec<NodeId>),
    Pairs(Vec<(NodeId, NodeId)>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Radicals(v) => v.len(),
            Targets::Pairs(v) => v.len(),
        }
    }
}

pub(crate) fn targets(kind: MoveKind, pg: &ParseGraph, idx: &GraphIndex, gate: &dyn Fn(&NodeRecord) -> bool) -> Targets {
    let quarter = Beats::new(1, 4);
    match kind {
        MoveKind::SetAttr => Targets::Radicals(
            pg.radicals()
                .filter(|r| gate(r) && r.radical_attrs().is_some_and(RadicalAttrs::is_pitched))
                .map(|r| r.id)
                .collect(),
        ),
        MoveKind::InsertChild => Targets::Pairs(
            leaf_phrases(pg, idx)
                .filter(|p| gate(p) && idx.children(p.id).len() < MAX_CHILDREN)
                .flat_map(|p| {
                    idx.children(p.id)
                        .iter()
                        .filter(|k| {
                            let k = &pg.node(**k).expect("child");
                            gate(k) && k.duration() > quarter && k.radical_attrs().is_some_and(RadicalAttrs::is_pitched)
                        })
                        .map(move |k| (p.id, *k))
                })
                .collect(),
        ),
        MoveKind::DeleteChild => Targets::Pairs(
            leaf_phrases(pg, idx)
                .filter(|p| gate(p) && idx.children(p.id).len() >= 2)
                .flat_map(|p| {
                    let kids = idx.children(p.id);
                    (0..kids.len())
                        .filter(move |&i| {
                            let absorber = if i > 0 { kids[i - 1] } else { kids[1] };
                            gate(pg.node(kids[i]).expect("child")) && gate(pg.node(absorber).expect("child"))
                        })
                        .map(move |i| (p.id, kids[i]))
                })
                .collect(),
        ),
        MoveKind::AddVariation => Targets::Pairs(
            leaf_phrases(pg, idx)
                .filter(|p| gate(p))
                .flat_map(|p| {
                    let kids = idx.children(p.id);
                    (0..kids.len()).flat_map(move |i| (i + 1..kids.len()).map(move |j| (kids[i], kids[j])))
                })
                .filter(|&(a, b)| !has_variation(pg, a, b))
                .collect(),
        ),
        MoveKind::RemoveVariation => Targets::Pairs(
            pg.edges_of(EdgeKind::Variation)
                .filter(|e| idx.parent(e.src).and_then(|p| pg.node(p)).is_some_and(gate))
                .map(|e| (e.src, e.dst))
                .collect(),
        ),
    }
}

/// Draw a concrete proposal for target `i` of `targets`.
pub(crate) fn propose<R: Rng>(
    kind: MoveKind,
    targets: &Targets,
    i: usize,
    pg: &ParseGraph,
    prior: &PitchPrior,
    rng: &mut R,
) -> Proposal {
    match (kind, targets) {
        (MoveKind::SetAttr, Targets::Radicals(v)) => {
            let node = v[i];
            let k = pg.node(node).and_then(|n| n.radical_attrs()).map_or(1, |r| r.pitches.len());
            let mut pitches: Vec<PitchVector> = (0..k).map(|_| prior.draw(rng)).collect();
            pitches.sort_by_key(|p| p.midi());
            Proposal::SetPitches { node, pitches }
        }
        (MoveKind::InsertChild, Targets::Pairs(v)) => {
            let (parent, split) = v[i];
            let len = pg.node(split).expect("target").duration();
            let options: Vec<(usize, Beats)> = DURATION_CATEGORIES
                .iter()
                .map(|&(n, d)| Beats::new(n, d))
                .enumerate()
                .filter(|(_, d)| *d < len)
                .collect();
            let w: Vec<f64> = options.iter().map(|(bin, _)| prior.duration.get(*bin).copied().unwrap_or(1.0)).collect();
            let duration = options[weighted(&w, rng)].1;
            Proposal::InsertChild {
                parent,
                split,
                duration,
                pitches: vec![prior.draw(rng)],
            }
        }
        (MoveKind::DeleteChild, Targets::Pairs(v)) => Proposal::DeleteChild {
            parent: v[i].0,
            child: v[i].1,
        },
        (MoveKind::AddVariation, Targets::Pairs(v)) => {
            let (a, b) = v[i];
            let (src, dst) = if rng.gen::<bool>() { (a, b) } else { (b, a) };
            Proposal::AddVariation { src, dst }
        }
        (MoveKind::RemoveVariation, Targets::Pairs(v)) => Proposal::RemoveVariation { src: v[i].0, dst: v[i].1 },
        _ => unreachable!("target list shape matches move kind"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{b, beats, tiny_graph};
    use crate::graph::{deduce_relations, validate};

    fn g3() -> ParseGraph {
        tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2)), (64, beats(2), beats(4))])
    }

    #[test]
    fn insert_splits_the_tail() {
        let mut g = g3();
        let p = Proposal::InsertChild {
            parent: NodeId(2),
            split: NodeId(12),
            duration: b(1, 2),
            pitches: vec![PitchVector::from_midi(65)],
        };
        let touched = p.apply(&mut g).unwrap();
        assert_eq!(touched, vec![NodeId(12), NodeId(13)]);
        assert_eq!(g.node(NodeId(12)).unwrap().t_off, b(7, 2));
        assert_eq!(g.node(NodeId(13)).unwrap().t_on, b(7, 2));
        assert_eq!(g.children(NodeId(2)).len(), 4);
        let g = deduce_relations(&g).unwrap();
        assert!(validate(&g).is_empty(), "{}", validate(&g));
    }

    #[test]
    fn delete_is_absorbed_by_a_neighbour() {
        let mut g = g3();
        Proposal::DeleteChild {
            parent: NodeId(2),
            child: NodeId(11),
        }
        .apply(&mut g)
        .unwrap();
        assert_eq!(g.node(NodeId(10)).unwrap().t_off, beats(2));
        let mut g = g3();
        Proposal::DeleteChild {
            parent: NodeId(2),
            child: NodeId(10),
        }
        .apply(&mut g)
        .unwrap();
        assert_eq!(g.node(NodeId(11)).unwrap().t_on, beats(0));
    }

    #[test]
    fn inapplicable_proposals_leave_the_graph_alone() {
        let mut g = g3();
        let before = g.clone();
        let bad = [
            Proposal::SetPitches { node: NodeId(2), pitches: vec![PitchVector::from_midi(60)] },
            Proposal::InsertChild { parent: NodeId(2), split: NodeId(10), duration: beats(1), pitches: vec![PitchVector::from_midi(60)] },
            Proposal::DeleteChild { parent: NodeId(2), child: NodeId(3) },
            Proposal::AddVariation { src: NodeId(10), dst: NodeId(10) },
            Proposal::RemoveVariation { src: NodeId(10), dst: NodeId(11) },
        ];
        for p in bad {
            assert!(matches!(p.apply(&mut g), Err(Error::InapplicableProposal(_))), "{p:?}");
            assert_eq!(g, before);
        }
    }

    #[test]
    fn variation_round_trip() {
        let mut g = g3();
        Proposal::AddVariation { src: NodeId(10), dst: NodeId(12) }.apply(&mut g).unwrap();
        assert!(Proposal::AddVariation { src: NodeId(12), dst: NodeId(10) }.apply(&mut g).is_err());
        Proposal::RemoveVariation { src: NodeId(10), dst: NodeId(12) }.apply(&mut g).unwrap();
        assert_eq!(g.edges_of(EdgeKind::Variation).count(), 0);
    }

    #[test]
    fn targets_respect_the_gate() {
        let mut g = g3();
        g.node_mut(NodeId(11)).unwrap().temperature = 1.0;
        let idx = g.index();
        let hot = |n: &NodeRecord| n.temperature > 0.0;
        let t = targets(MoveKind::SetAttr, &g, &idx, &hot);
        assert!(matches!(t, Targets::Radicals(ref v) if v == &vec![NodeId(11)]));
        // parent phrase is frozen, so no structural moves
        assert_eq!(targets(MoveKind::InsertChild, &g, &idx, &hot).len(), 0);
        let all = |_: &NodeRecord| true;
        assert_eq!(targets(MoveKind::InsertChild, &g, &idx, &all).len(), 3);
        assert_eq!(targets(MoveKind::DeleteChild, &g, &idx, &all).len(), 3);
        assert_eq!(targets(MoveKind::AddVariation, &g, &idx, &all).len(), 3);
    }
}
