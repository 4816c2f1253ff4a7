use std::collections::{BTreeMap, HashSet};

use num_traits::{ToPrimitive, Zero};

use super::{list_bank, DescriptorId, BANK_SIZE, BRANCHING_KINDS, DURATION_CATEGORIES, MAX_CHILDREN};
use crate::graph::{
    Beats, EdgeAttrs, EdgeKind, EdgeRecord, GraphIndex, NodeId, NodeKind, NodeRecord, ParseGraph,
};

/// Which observations to count: everything, or only those anchored on a set
/// of nodes (node observations on a member, edge observations touching one).
#[derive(Clone, Debug)]
pub enum Scope<'a> {
    All,
    Nodes(&'a HashSet<NodeId>),
}

impl Scope<'_> {
    fn node(&self, id: NodeId) -> bool {
        match self {
            Scope::All => true,
            Scope::Nodes(s) => s.contains(&id),
        }
    }

    fn edge(&self, e: &EdgeRecord) -> bool {
        self.node(e.src) || self.node(e.dst)
    }
}

/// Integer bin counts for every descriptor of the bank plus the unclamped
/// (kind, child count) table behind the or-node selection term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureCounts {
    bins: Vec<Vec<i64>>,
    pub branching: BTreeMap<(NodeKind, usize), i64>,
}

impl FeatureCounts {
    pub fn zero() -> Self {
        FeatureCounts {
            bins: list_bank().iter().map(|d| vec![0; d.bins()]).collect(),
            branching: BTreeMap::new(),
        }
    }

    /// Counts over a whole relation-deduced graph.
    pub fn of(pg: &ParseGraph) -> Self {
        Self::scoped(pg, &pg.index(), &Scope::All)
    }

    pub fn scoped(pg: &ParseGraph, idx: &GraphIndex, scope: &Scope<'_>) -> Self {
        let mut c = FeatureCounts::zero();
        for n in pg.nodes() {
            if scope.node(n.id) {
                c.observe_node(pg, idx, n);
            }
        }
        for e in pg.edges() {
            if scope.edge(e) {
                c.observe_edge(pg, e);
            }
        }
        c
    }

    pub fn bins(&self, d: DescriptorId) -> &[i64] {
        &self.bins[d.slot()]
    }

    pub fn total(&self, d: DescriptorId) -> i64 {
        self.bins(d).iter().sum()
    }

    pub fn add_assign(&mut self, other: &FeatureCounts) {
        self.combine(other, 1);
    }

    pub fn sub_assign(&mut self, other: &FeatureCounts) {
        self.combine(other, -1);
    }

    fn combine(&mut self, other: &FeatureCounts, sign: i64) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += sign * y;
            }
        }
        for (k, v) in &other.branching {
            let e = self.branching.entry(*k).or_insert(0);
            *e += sign * v;
            if *e == 0 {
                self.branching.remove(k);
            }
        }
    }

    fn bump(&mut self, d: DescriptorId, bin: usize) {
        self.bins[d.slot()][bin] += 1;
    }

    fn observe_node(&mut self, pg: &ParseGraph, idx: &GraphIndex, n: &NodeRecord) {
        match n.kind {
            NodeKind::Radical => {
                let attrs = n.radical_attrs().expect("radical attributes");
                for p in &attrs.pitches {
                    self.bump(DescriptorId::PITCH_CLASS, usize::from(p.pitch_class % 12));
                    self.bump(DescriptorId::MIDI_PITCH, midi_bin(p.midi()));
                }
                self.bump(DescriptorId::DURATION, duration_bin(n.duration()));
                if let Some(&m) = idx.sync.get(&n.id) {
                    let metric = &pg.nodes[&m];
                    let measure = measure_of(pg, idx, m);
                    self.bump(DescriptorId::ONSET_IN_MEASURE, onset_bin(n.t_on, measure));
                    let level = metric.metrical_attrs().map_or(0, |a| a.level_ref);
                    self.bump(DescriptorId::SYNC_LEVEL, (level.clamp(-1, 2) + 1) as usize);
                }
            }
            NodeKind::Phrase => {
                self.bump(DescriptorId::PHRASE_DURATION, phrase_duration_bin(n.duration()));
                let radicals = idx
                    .children(n.id)
                    .iter()
                    .filter(|c| pg.nodes[c].kind == NodeKind::Radical)
                    .count();
                if radicals > 0 {
                    self.bump(DescriptorId::RADICALS_PER_PHRASE, radicals.min(8) - 1);
                }
            }
            _ => {}
        }
        let k = idx.children(n.id).len();
        if k > 0 {
            if let Some(ki) = BRANCHING_KINDS.iter().position(|&x| x == n.kind) {
                self.bump(DescriptorId::BRANCHING, ki * MAX_CHILDREN + k.min(MAX_CHILDREN) - 1);
            }
            *self.branching.entry((n.kind, k)).or_insert(0) += 1;
        }
    }

    fn observe_edge(&mut self, pg: &ParseGraph, e: &EdgeRecord) {
        match (&e.kind, &e.attrs) {
            (EdgeKind::Succession, EdgeAttrs::Succession(a)) => {
                self.bump(DescriptorId::SUCCESSION_GAP, gap_bin(a.rho));
                let s = (4.0 * a.sigma).floor().clamp(0.0, 3.0) as usize;
                self.bump(DescriptorId::SUCCESSION_SMOOTHNESS, s);
                let hp = |id: &NodeId| pg.nodes.get(id).and_then(|n| n.radical_attrs()?.highest_midi());
                if let (Some(a), Some(b)) = (hp(&e.src), hp(&e.dst)) {
                    let i = b - a;
                    self.bump(DescriptorId::MELODIC_INTERVAL, (i.clamp(-12, 12) + 12) as usize);
                    self.bump(DescriptorId::CONTOUR, (i.signum() + 1) as usize);
                }
            }
            (EdgeKind::Diad, EdgeAttrs::Diad { interval_semitones: i }) => {
                self.bump(DescriptorId::DIAD_CLASS, i.rem_euclid(12) as usize);
                self.bump(DescriptorId::DIAD_INTERVAL, (((i.clamp(&-24, &24) + 24) / 4).min(11)) as usize);
            }
            _ => {}
        }
    }
}

impl Default for FeatureCounts {
    fn default() -> Self {
        Self::zero()
    }
}

const _: () = assert!(BANK_SIZE == 14);

fn midi_bin(midi: i32) -> usize {
    ((midi.clamp(36, 83) - 36) / 4) as usize
}

pub(crate) fn duration_bin(d: Beats) -> usize {
    DURATION_CATEGORIES
        .iter()
        .position(|&(n, q)| d == Beats::new(n, q))
        .unwrap_or(DURATION_CATEGORIES.len())
}

fn phrase_duration_bin(d: Beats) -> usize {
    (1..=4)
        .position(|k| d <= Beats::from_integer(k))
        .unwrap_or(4)
}

fn gap_bin(rho: Beats) -> usize {
    if rho < Beats::zero() {
        0
    } else if rho.is_zero() {
        1
    } else if rho <= Beats::from_integer(1) {
        2
    } else {
        3
    }
}

fn onset_bin(t: Beats, measure: &NodeRecord) -> usize {
    let len = measure.duration();
    if len <= Beats::zero() {
        return 0;
    }
    let pos = (t - measure.t_on) / len * Beats::from_integer(16);
    pos.floor().to_i64().unwrap_or(0).clamp(0, 15) as usize
}

/// Nearest metrical ancestor-or-self at measure level, else the topmost
/// metrical ancestor.
fn measure_of<'g>(pg: &'g ParseGraph, idx: &GraphIndex, m: NodeId) -> &'g NodeRecord {
    let mut cur = &pg.nodes[&m];
    loop {
        if cur.metrical_attrs().is_some_and(|a| a.level_ref == 1) {
            return cur;
        }
        match idx.parent(cur.id).map(|p| &pg.nodes[&p]) {
            Some(p) if p.kind == NodeKind::Metrical => cur = p,
            _ => return cur,
        }
    }
}
