use std::collections::{HashMap, HashSet};
use std::fmt;

use num_traits::Zero;

use super::{EdgeAttrs, EdgeKind, Eclipse, FigureKind, NodeAttrs, NodeId, NodeKind, ParseGraph};

/// Well-formedness rule names, as reported in a [`ValidationReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Root,
    SingleParent,
    ProductionCycle,
    Unreachable,
    IllegalProduction,
    SpanOrder,
    SpanNesting,
    StructuralOverlap,
    AttrKind,
    RadicalPitches,
    PitchRange,
    MetricalBeat,
    MetricalLevel,
    MetricalTempo,
    Temperature,
    DanglingEdge,
    SuccessionConsistency,
    SyncConsistency,
    DiadConsistency,
    Variation,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Root => "root",
            Rule::SingleParent => "single-parent",
            Rule::ProductionCycle => "production-cycle",
            Rule::Unreachable => "unreachable",
            Rule::IllegalProduction => "illegal-production",
            Rule::SpanOrder => "span-order",
            Rule::SpanNesting => "span-nesting",
            Rule::StructuralOverlap => "structural-overlap",
            Rule::AttrKind => "attr-kind",
            Rule::RadicalPitches => "radical-pitches",
            Rule::PitchRange => "pitch-range",
            Rule::MetricalBeat => "metrical-beat",
            Rule::MetricalLevel => "metrical-level",
            Rule::MetricalTempo => "metrical-tempo",
            Rule::Temperature => "temperature",
            Rule::DanglingEdge => "dangling-edge",
            Rule::SuccessionConsistency => "succession-consistency",
            Rule::SyncConsistency => "sync-consistency",
            Rule::DiadConsistency => "diad-consistency",
            Rule::Variation => "variation",
        }
    }

    /// Rules about derived relations rather than the production tree.
    pub fn is_relation_rule(self) -> bool {
        matches!(
            self,
            Rule::SuccessionConsistency | Rule::SyncConsistency | Rule::DiadConsistency
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subject {
    Node(NodeId),
    Edge { index: usize, src: NodeId, dst: NodeId },
}

impl Subject {
    fn key(&self) -> (NodeId, usize) {
        match *self {
            Subject::Node(id) => (id, 0),
            Subject::Edge { index, src, .. } => (src, index + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub subject: Subject,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Node(id) => write!(f, "{id}: {}: {}", self.rule, self.detail),
            Subject::Edge { index, src, dst } => {
                write!(f, "edge #{index} {src}->{dst}: {}: {}", self.rule, self.detail)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn node(&mut self, id: NodeId, rule: Rule, detail: impl Into<String>) {
        self.0.push(Violation {
            subject: Subject::Node(id),
            rule,
            detail: detail.into(),
        });
    }

    fn edge(&mut self, index: usize, src: NodeId, dst: NodeId, rule: Rule, detail: impl Into<String>) {
        self.0.push(Violation {
            subject: Subject::Edge { index, src, dst },
            rule,
            detail: detail.into(),
        });
    }
}

/// Check every well-formedness rule. Violations are data: the report is empty
/// iff the graph is well formed, and is ordered by node id.
pub fn validate(pg: &ParseGraph) -> ValidationReport {
    let mut out = Collector(Vec::new());
    let nodes = &pg.nodes;

    match nodes.get(&pg.root) {
        None => out.node(pg.root, Rule::Root, "root id does not name a node"),
        Some(r) if !r.kind.is_structural() => {
            out.node(pg.root, Rule::Root, format!("root must be a section or period, found {}", r.kind))
        }
        _ => {}
    }

    // Production tree shape.
    let mut parents: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut children: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for (i, e) in pg.edges.iter().enumerate() {
        let ok_src = nodes.contains_key(&e.src);
        let ok_dst = nodes.contains_key(&e.dst);
        if !ok_src || !ok_dst {
            out.edge(i, e.src, e.dst, Rule::DanglingEdge, format!("{} edge names a missing node", e.kind.as_str()));
            continue;
        }
        if e.kind == EdgeKind::Production {
            parents.entry(e.dst).or_default().push(e.src);
            children.entry(e.src).or_default().push(e.dst);
        }
    }
    for n in nodes.values() {
        let ps = parents.get(&n.id).map_or(0, Vec::len);
        if n.id == pg.root {
            if ps > 0 {
                out.node(n.id, Rule::SingleParent, "root has a production parent");
            }
        } else if ps != 1 {
            out.node(n.id, Rule::SingleParent, format!("expected exactly one production parent, found {ps}"));
        }
    }

    // Cycles: peel nodes with no incoming (then no outgoing) production edges;
    // whatever survives both passes lies on a cycle.
    let mut in_cycle: HashSet<NodeId> = nodes.keys().copied().collect();
    for outgoing in [false, true] {
        loop {
            let peel: Vec<NodeId> = in_cycle
                .iter()
                .copied()
                .filter(|id| {
                    let adj = if outgoing { children.get(id) } else { parents.get(id) };
                    !adj.into_iter().flatten().any(|x| in_cycle.contains(x))
                })
                .collect();
            if peel.is_empty() {
                break;
            }
            for id in peel {
                in_cycle.remove(&id);
            }
        }
    }
    let mut cyc: Vec<_> = in_cycle.iter().copied().collect();
    cyc.sort();
    for id in cyc {
        out.node(id, Rule::ProductionCycle, "node is its own production ancestor");
    }

    // Reachability from the root.
    let mut reached = HashSet::new();
    let mut stack = vec![pg.root];
    while let Some(id) = stack.pop() {
        if reached.insert(id) {
            stack.extend(children.get(&id).into_iter().flatten().copied());
        }
    }
    for n in nodes.values() {
        if !reached.contains(&n.id) && !in_cycle.contains(&n.id) {
            out.node(n.id, Rule::Unreachable, "not reachable from the root");
        }
    }

    // Per-node attributes.
    for n in nodes.values() {
        if n.kind == NodeKind::Radical {
            if n.t_off < n.t_on {
                out.node(n.id, Rule::SpanOrder, "t_off precedes t_on");
            }
        } else if n.t_off <= n.t_on {
            out.node(n.id, Rule::SpanOrder, "span must have positive length");
        }
        if n.t_on < super::Beats::zero() {
            out.node(n.id, Rule::SpanOrder, "negative onset");
        }
        if !(n.temperature >= 0.0 && n.temperature.is_finite()) {
            out.node(n.id, Rule::Temperature, format!("temperature {} is not a finite value >= 0", n.temperature));
        }
        if !n.attrs.matches_kind(n.kind) {
            out.node(n.id, Rule::AttrKind, format!("attributes do not belong to a {} node", n.kind));
            continue;
        }
        match &n.attrs {
            NodeAttrs::Radical(r) => {
                let ok = match r.figure_kind {
                    FigureKind::Note => r.pitches.len() == 1,
                    FigureKind::Chord => r.pitches.len() >= 2,
                    FigureKind::Percussion => r.pitches.is_empty(),
                    FigureKind::Figure => true,
                };
                if !ok {
                    out.node(n.id, Rule::RadicalPitches, format!("{:?} with {} pitches", r.figure_kind, r.pitches.len()));
                }
                if r.pitches.iter().any(|p| p.pitch_class > 11) {
                    out.node(n.id, Rule::PitchRange, "pitch class outside 0..=11");
                }
            }
            NodeAttrs::Metrical(m) => {
                if m.beat != 1 {
                    out.node(n.id, Rule::MetricalBeat, format!("beat must be 1, found {}", m.beat));
                }
                if !(m.tempo > 0.0 && m.tempo.is_finite()) {
                    out.node(n.id, Rule::MetricalTempo, format!("tempo {} must be positive", m.tempo));
                }
            }
            NodeAttrs::Struct(_) => {}
        }
    }

    // Parent/child rules.
    for (&p, kids) in &children {
        let parent = &nodes[&p];
        for &c in kids {
            let child = &nodes[&c];
            if !parent.kind.can_produce(child.kind) {
                out.node(c, Rule::IllegalProduction, format!("{} cannot produce {}", parent.kind, child.kind));
            }
            if child.t_on < parent.t_on || child.t_off > parent.t_off {
                out.node(c, Rule::SpanNesting, format!("span escapes parent {p}"));
            }
            if let (Some(pm), Some(cm)) = (parent.metrical_attrs(), child.metrical_attrs()) {
                if cm.level_ref >= pm.level_ref {
                    out.node(c, Rule::MetricalLevel, format!("level {} not below parent level {}", cm.level_ref, pm.level_ref));
                }
            }
        }
        let mut structural: Vec<_> = kids.iter().map(|c| &nodes[c]).filter(|c| c.kind.is_structural()).collect();
        structural.sort_by(|a, b| super::sibling_order(a, b));
        for w in structural.windows(2) {
            if w[1].t_on < w[0].t_off {
                out.node(w[1].id, Rule::StructuralOverlap, format!("overlaps sibling {}", w[0].id));
            }
        }
    }

    // Relations.
    for (i, e) in pg.edges.iter().enumerate() {
        let (Some(s), Some(d)) = (nodes.get(&e.src), nodes.get(&e.dst)) else {
            continue;
        };
        match e.kind {
            EdgeKind::Production => {}
            EdgeKind::Succession => match &e.attrs {
                EdgeAttrs::Succession(a) => {
                    if a.rho != d.t_on - s.t_off {
                        out.edge(i, e.src, e.dst, Rule::SuccessionConsistency, "rho differs from t_on(dst) - t_off(src)");
                    }
                    if (a.gamma == Eclipse::None) != (a.rho >= super::Beats::zero()) {
                        out.edge(i, e.src, e.dst, Rule::SuccessionConsistency, "eclipse direction disagrees with the sign of rho");
                    }
                    if !(0.0..=1.0).contains(&a.sigma) {
                        out.edge(i, e.src, e.dst, Rule::SuccessionConsistency, "sigma outside [0, 1]");
                    }
                }
                _ => out.edge(i, e.src, e.dst, Rule::SuccessionConsistency, "missing succession attributes"),
            },
            EdgeKind::Synchronization => {
                if s.kind != NodeKind::Radical || d.kind != NodeKind::Metrical {
                    out.edge(i, e.src, e.dst, Rule::SyncConsistency, "must connect a radical to a metrical node");
                } else if !d.contains(s.t_on) {
                    out.edge(i, e.src, e.dst, Rule::SyncConsistency, "metrical span does not contain the radical onset");
                }
            }
            EdgeKind::Diad => {
                let pitched = |n: &super::NodeRecord| n.radical_attrs().is_some_and(|r| r.is_pitched());
                if !pitched(s) || !pitched(d) {
                    out.edge(i, e.src, e.dst, Rule::DiadConsistency, "diad endpoints must be pitched radicals");
                } else if !matches!(e.attrs, EdgeAttrs::Diad { .. }) {
                    out.edge(i, e.src, e.dst, Rule::DiadConsistency, "missing diad interval");
                }
            }
            EdgeKind::Variation => {
                if e.src == e.dst {
                    out.edge(i, e.src, e.dst, Rule::Variation, "variation must link two distinct nodes");
                }
            }
        }
    }

    let mut violations = out.0;
    violations.sort_by(|a, b| {
        let (ka, ia) = a.subject.key();
        let (kb, ib) = b.subject.key();
        ka.cmp(&kb).then(ia.cmp(&ib)).then(a.rule.cmp(&b.rule)).then(a.detail.cmp(&b.detail))
    });
    ValidationReport { violations }
}
