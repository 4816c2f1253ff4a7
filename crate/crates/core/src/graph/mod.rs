//! Parse-graph data model.
//!
//! Time is measured in quarter-note beats as exact rationals. The production
//! tree is stored as `Production` edges alongside the relation edges; derived
//! relations (succession, diad, synchronization) are rebuilt by
//! [`deduce_relations`] and never edited by hand.

mod canonical;
mod deduce;
mod flatten;
mod validate;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

pub use canonical::canonical_order;
pub use deduce::{deduce_relations, metrical_cover};
pub use flatten::{flatten_events, FlatEvent};
pub use validate::{validate, Rule, Subject, ValidationReport, Violation};

use crate::error::{Error, Result};

/// Musical time in quarter-note beats.
pub type Beats = Rational64;

/// Parse a beat position written as `"n/d"` or `"n"`.
pub fn parse_beats(s: &str) -> Result<Beats> {
    let bad = || Error::parse(format!("invalid rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if d == 0 {
        return Err(bad());
    }
    Ok(Beats::new(n, d))
}

/// Reduced `"n/d"` form of a beat position.
pub fn format_beats(b: Beats) -> String {
    format!("{}/{}", b.numer(), b.denom())
}

/// Serde adapter writing beats as reduced `"n/d"` strings.
pub mod beats_serde {
    use super::{format_beats, parse_beats, Beats};

    pub fn serialize<S: serde::Serializer>(b: &Beats, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_beats(*b))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Beats, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        parse_beats(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('n')
            .and_then(|digits| {
                if digits.starts_with('+') {
                    None
                } else {
                    digits.parse().ok()
                }
            })
            .map(NodeId)
            .ok_or_else(|| Error::parse(format!("node id `{s}` is not of the form n<integer>")))
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Section,
    Period,
    Ensemble,
    Phrase,
    Radical,
    Metrical,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Section,
        NodeKind::Period,
        NodeKind::Ensemble,
        NodeKind::Phrase,
        NodeKind::Radical,
        NodeKind::Metrical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Section => "section",
            NodeKind::Period => "period",
            NodeKind::Ensemble => "ensemble",
            NodeKind::Phrase => "phrase",
            NodeKind::Radical => "radical",
            NodeKind::Metrical => "metrical",
        }
    }

    pub fn is_structural(self) -> bool {
        matches!(self, NodeKind::Section | NodeKind::Period)
    }

    /// Phrases and radicals form the event tree.
    pub fn is_event(self) -> bool {
        matches!(self, NodeKind::Phrase | NodeKind::Radical)
    }

    /// Legal production `self -> child`.
    pub fn can_produce(self, child: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            Section => matches!(child, Section | Period),
            Period => matches!(child, Period | Ensemble),
            Ensemble => matches!(child, Phrase | Radical | Metrical),
            Phrase => matches!(child, Phrase | Radical),
            Metrical => matches!(child, Metrical),
            Radical => false,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::parse(format!("unknown node kind `{s}`")))
    }
}

/// Pitch as (pitch class, octave); octave 4 holds MIDI 60..=71.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PitchVector {
    pub pitch_class: u8,
    pub octave: i8,
}

impl PitchVector {
    pub fn new(pitch_class: u8, octave: i8) -> Self {
        PitchVector {
            pitch_class,
            octave,
        }
    }

    pub fn from_midi(midi: i32) -> Self {
        PitchVector {
            pitch_class: midi.rem_euclid(12) as u8,
            octave: (midi.div_euclid(12) - 1) as i8,
        }
    }

    pub fn midi(self) -> i32 {
        12 * (i32::from(self.octave) + 1) + i32::from(self.pitch_class)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Note,
    Chord,
    Figure,
    Percussion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadicalAttrs {
    pub figure_kind: FigureKind,
    pub pitches: Vec<PitchVector>,
    pub timbre: String,
    pub articulation: Vec<String>,
}

impl RadicalAttrs {
    pub fn note(pitch: PitchVector, timbre: impl Into<String>) -> Self {
        RadicalAttrs {
            figure_kind: FigureKind::Note,
            pitches: vec![pitch],
            timbre: timbre.into(),
            articulation: Vec::new(),
        }
    }

    pub fn is_pitched(&self) -> bool {
        !self.pitches.is_empty()
    }

    pub fn highest_midi(&self) -> Option<i32> {
        self.pitches.iter().map(|p| p.midi()).max()
    }

    pub fn lowest_midi(&self) -> Option<i32> {
        self.pitches.iter().map(|p| p.midi()).min()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricalAttrs {
    pub beat: u8,
    pub level_ref: i32,
    pub tempo: f64,
    pub harmony: Option<String>,
}

impl MetricalAttrs {
    pub fn new(level_ref: i32, tempo: f64) -> Self {
        MetricalAttrs {
            beat: 1,
            level_ref,
            tempo,
            harmony: None,
        }
    }
}

/// Attributes of sections, periods, ensembles and phrases: an opaque label plus tags.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructAttrs {
    pub label: String,
    pub semantic_tags: Vec<String>,
}

impl StructAttrs {
    pub fn labeled(label: impl Into<String>) -> Self {
        StructAttrs {
            label: label.into(),
            semantic_tags: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeAttrs {
    Struct(StructAttrs),
    Radical(RadicalAttrs),
    Metrical(MetricalAttrs),
}

impl NodeAttrs {
    pub fn matches_kind(&self, kind: NodeKind) -> bool {
        match self {
            NodeAttrs::Radical(_) => kind == NodeKind::Radical,
            NodeAttrs::Metrical(_) => kind == NodeKind::Metrical,
            NodeAttrs::Struct(_) => !matches!(kind, NodeKind::Radical | NodeKind::Metrical),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    pub t_on: Beats,
    pub t_off: Beats,
    pub attrs: NodeAttrs,
    pub temperature: f64,
}

impl NodeRecord {
    pub fn new(id: NodeId, kind: NodeKind, t_on: Beats, t_off: Beats, attrs: NodeAttrs) -> Self {
        NodeRecord {
            id,
            kind,
            t_on,
            t_off,
            attrs,
            temperature: 0.0,
        }
    }

    pub fn group(id: NodeId, kind: NodeKind, t_on: Beats, t_off: Beats, label: &str) -> Self {
        Self::new(id, kind, t_on, t_off, NodeAttrs::Struct(StructAttrs::labeled(label)))
    }

    pub fn radical(id: NodeId, t_on: Beats, t_off: Beats, attrs: RadicalAttrs) -> Self {
        Self::new(id, NodeKind::Radical, t_on, t_off, NodeAttrs::Radical(attrs))
    }

    pub fn metrical(id: NodeId, t_on: Beats, t_off: Beats, attrs: MetricalAttrs) -> Self {
        Self::new(id, NodeKind::Metrical, t_on, t_off, NodeAttrs::Metrical(attrs))
    }

    pub fn duration(&self) -> Beats {
        self.t_off - self.t_on
    }

    pub fn radical_attrs(&self) -> Option<&RadicalAttrs> {
        match &self.attrs {
            NodeAttrs::Radical(r) => Some(r),
            _ => None,
        }
    }

    pub fn metrical_attrs(&self) -> Option<&MetricalAttrs> {
        match &self.attrs {
            NodeAttrs::Metrical(m) => Some(m),
            _ => None,
        }
    }

    /// Half-open span membership.
    pub fn contains(&self, t: Beats) -> bool {
        self.t_on <= t && t < self.t_off
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Production,
    Variation,
    Succession,
    Diad,
    Synchronization,
}

impl EdgeKind {
    /// Relations rebuilt by [`deduce_relations`].
    pub fn is_deduced(self) -> bool {
        matches!(
            self,
            EdgeKind::Succession | EdgeKind::Diad | EdgeKind::Synchronization
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Production => "production",
            EdgeKind::Variation => "variation",
            EdgeKind::Succession => "succession",
            EdgeKind::Diad => "diad",
            EdgeKind::Synchronization => "synchronization",
        }
    }
}

/// Which side of an overlapping succession sounds over the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eclipse {
    None,
    SrcOver,
    DstOver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessionAttrs {
    pub gamma: Eclipse,
    /// `t_on(dst) - t_off(src)`: rest when positive, overlap when negative.
    pub rho: Beats,
    /// Smoothness of the transition in [0, 1]; 1 is a tie.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeAttrs {
    None,
    Succession(SuccessionAttrs),
    Diad { interval_semitones: i32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub kind: EdgeKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub attrs: EdgeAttrs,
}

impl EdgeRecord {
    pub fn production(src: NodeId, dst: NodeId) -> Self {
        EdgeRecord {
            kind: EdgeKind::Production,
            src,
            dst,
            attrs: EdgeAttrs::None,
        }
    }

    pub fn variation(src: NodeId, dst: NodeId) -> Self {
        EdgeRecord {
            kind: EdgeKind::Variation,
            src,
            dst,
            attrs: EdgeAttrs::None,
        }
    }

    pub fn touches(&self, id: NodeId) -> bool {
        self.src == id || self.dst == id
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphMetadata {
    pub title: Option<String>,
    pub source: Option<String>,
}

/// One piece of music: a production tree of attributed nodes plus relations.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseGraph {
    root: NodeId,
    pub(crate) nodes: BTreeMap<NodeId, NodeRecord>,
    pub(crate) edges: Vec<EdgeRecord>,
    pub metadata: GraphMetadata,
}

impl ParseGraph {
    pub fn new(root: NodeRecord) -> Self {
        let id = root.id;
        let mut nodes = BTreeMap::new();
        nodes.insert(id, root);
        ParseGraph {
            root: id,
            nodes,
            edges: Vec::new(),
            metadata: GraphMetadata::default(),
        }
    }

    /// Assemble a graph from raw parts; nothing is checked (see [`validate`]).
    pub fn from_parts(
        root: NodeId,
        nodes: impl IntoIterator<Item = NodeRecord>,
        edges: Vec<EdgeRecord>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if map.insert(n.id, n).is_some() {
                return Err(Error::InvalidArgument("duplicate node id".into()));
            }
        }
        Ok(ParseGraph {
            root,
            nodes: map,
            edges,
            metadata: GraphMetadata::default(),
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut NodeRecord> {
        self.nodes.get_mut(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> + '_ {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn radicals(&self) -> impl Iterator<Item = &NodeRecord> + '_ {
        self.nodes.values().filter(|n| n.kind == NodeKind::Radical)
    }

    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    /// Insert `record` below `parent` with a production edge.
    pub fn add_child(&mut self, parent: NodeId, record: NodeRecord) -> Result<NodeId> {
        if !self.nodes.contains_key(&parent) {
            return Err(Error::InvalidArgument(format!("unknown parent {parent}")));
        }
        let id = record.id;
        if self.nodes.insert(id, record).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate node id {id}")));
        }
        self.edges.push(EdgeRecord::production(parent, id));
        Ok(id)
    }

    pub fn add_edge(&mut self, edge: EdgeRecord) {
        self.edges.push(edge);
    }

    pub fn remove_edge_where(&mut self, pred: impl Fn(&EdgeRecord) -> bool) -> usize {
        let before = self.edges.len();
        self.edges.retain(|e| !pred(e));
        before - self.edges.len()
    }

    /// Remove a node together with every edge touching it.
    pub fn remove_node(&mut self, id: NodeId) -> Option<NodeRecord> {
        let rec = self.nodes.remove(&id)?;
        self.edges.retain(|e| !e.touches(id));
        Some(rec)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.edges
            .iter()
            .find(|e| e.kind == EdgeKind::Production && e.dst == id)
            .map(|e| e.src)
    }

    /// Production children in sibling order.
    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        let mut kids: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Production && e.src == id)
            .map(|e| e.dst)
            .filter(|k| self.nodes.contains_key(k))
            .collect();
        kids.sort_by(|a, b| sibling_order(&self.nodes[a], &self.nodes[b]));
        kids
    }

    /// Same graph with all derived relations dropped.
    pub fn without_deduced(&self) -> ParseGraph {
        let mut g = self.clone();
        g.edges.retain(|e| !e.kind.is_deduced());
        g
    }

    pub fn index(&self) -> GraphIndex {
        GraphIndex::build(self)
    }

    /// Relabel every node id through `map`; ids absent from the map keep their value.
    pub fn relabel(&self, map: &HashMap<NodeId, NodeId>) -> ParseGraph {
        let f = |id: NodeId| map.get(&id).copied().unwrap_or(id);
        let nodes = self
            .nodes
            .values()
            .map(|n| NodeRecord { id: f(n.id), ..n.clone() })
            .map(|n| (n.id, n))
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeRecord {
                src: f(e.src),
                dst: f(e.dst),
                ..e.clone()
            })
            .collect();
        ParseGraph {
            root: f(self.root),
            nodes,
            edges,
            metadata: self.metadata.clone(),
        }
    }
}

/// Order of siblings: by onset, then offset, then lowest pitch, then id.
pub fn sibling_order(a: &NodeRecord, b: &NodeRecord) -> Ordering {
    let low = |n: &NodeRecord| n.radical_attrs().and_then(|r| r.lowest_midi());
    a.t_on
        .cmp(&b.t_on)
        .then(a.t_off.cmp(&b.t_off))
        .then(low(a).cmp(&low(b)))
        .then(a.id.cmp(&b.id))
}

/// Adjacency lookups for one graph snapshot.
#[derive(Clone, Debug, Default)]
pub struct GraphIndex {
    pub parent: HashMap<NodeId, NodeId>,
    pub children: HashMap<NodeId, Vec<NodeId>>,
    /// Radical -> synchronized metrical node.
    pub sync: HashMap<NodeId, NodeId>,
}

impl GraphIndex {
    pub fn build(pg: &ParseGraph) -> Self {
        let mut idx = GraphIndex::default();
        for e in pg.edges() {
            match e.kind {
                EdgeKind::Production => {
                    idx.parent.insert(e.dst, e.src);
                    idx.children.entry(e.src).or_default().push(e.dst);
                }
                EdgeKind::Synchronization => {
                    idx.sync.insert(e.src, e.dst);
                }
                _ => {}
            }
        }
        for kids in idx.children.values_mut() {
            kids.retain(|k| pg.nodes.contains_key(k));
            kids.sort_by(|a, b| sibling_order(&pg.nodes[a], &pg.nodes[b]));
        }
        idx
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(&id).copied()
    }

    /// Ancestors of `id` from its parent upwards, stopping at the first repeat.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let mut seen = std::collections::HashSet::new();
        seen.insert(id);
        let mut cur = id;
        std::iter::from_fn(move || {
            let p = self.parent(cur)?;
            if !seen.insert(p) {
                return None;
            }
            cur = p;
            Some(p)
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn b(n: i64, d: i64) -> Beats {
        Beats::new(n, d)
    }

    pub fn beats(n: i64) -> Beats {
        Beats::from_integer(n)
    }

    /// period -> ensemble -> {phrase -> radicals, metrical leaf}
    pub fn tiny_graph(notes: &[(i32, Beats, Beats)]) -> ParseGraph {
        let end = notes.iter().map(|n| n.2).max().unwrap_or(beats(1));
        let mut g = ParseGraph::new(NodeRecord::group(NodeId(0), NodeKind::Period, beats(0), end, "p"));
        g.add_child(NodeId(0), NodeRecord::group(NodeId(1), NodeKind::Ensemble, beats(0), end, "e"))
            .unwrap();
        g.add_child(NodeId(1), NodeRecord::group(NodeId(2), NodeKind::Phrase, beats(0), end, "ph"))
            .unwrap();
        g.add_child(
            NodeId(1),
            NodeRecord::metrical(NodeId(3), beats(0), end, MetricalAttrs::new(1, 120.0)),
        )
        .unwrap();
        for (i, &(midi, on, off)) in notes.iter().enumerate() {
            let id = NodeId(10 + i as u32);
            g.add_child(
                NodeId(2),
                NodeRecord::radical(id, on, off, RadicalAttrs::note(PitchVector::from_midi(midi), "v")),
            )
            .unwrap();
        }
        g
    }

    #[test]
    fn pitch_vector_midi_round_trip() {
        for midi in 0..128 {
            assert_eq!(PitchVector::from_midi(midi).midi(), midi);
        }
        assert_eq!(PitchVector::new(0, 4).midi(), 60);
        assert_eq!(PitchVector::new(9, 4).midi(), 69);
    }

    #[test]
    fn node_id_parsing() {
        assert_eq!("n17".parse::<NodeId>().unwrap(), NodeId(17));
        assert!("17".parse::<NodeId>().is_err());
        assert!("n+1".parse::<NodeId>().is_err());
        assert!("x1".parse::<NodeId>().is_err());
        assert_eq!(NodeId(3).to_string(), "n3");
    }

    #[test]
    fn production_legality_table() {
        use NodeKind::*;
        assert!(Section.can_produce(Period));
        assert!(Period.can_produce(Ensemble));
        assert!(Ensemble.can_produce(Metrical));
        assert!(Phrase.can_produce(Phrase));
        assert!(!Phrase.can_produce(Metrical));
        assert!(!Radical.can_produce(Radical));
        assert!(!Metrical.can_produce(Radical));
    }

    #[test]
    fn children_are_time_ordered() {
        let g = tiny_graph(&[(62, beats(1), beats(2)), (60, beats(0), beats(1))]);
        assert_eq!(g.children(NodeId(2)), vec![NodeId(11), NodeId(10)]);
        assert_eq!(g.parent(NodeId(10)), Some(NodeId(2)));
        assert_eq!(g.next_id(), NodeId(12));
    }
}
