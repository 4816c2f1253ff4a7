use num_traits::Zero;

use super::{
    Beats, EdgeAttrs, EdgeKind, EdgeRecord, Eclipse, GraphIndex, NodeId, NodeKind, NodeRecord,
    ParseGraph, SuccessionAttrs,
};
use crate::error::{Error, Result};

/// Rebuild succession, synchronization and diad relations from the production
/// tree and node attributes. Production and variation edges pass through,
/// sorted by kind and endpoint ids; previously deduced edges are discarded.
pub fn deduce_relations(pg: &ParseGraph) -> Result<ParseGraph> {
    let mut out = pg.without_deduced();
    out.edges.sort_by(super::canonical::edge_order);
    let idx = GraphIndex::build(&out);

    let mut parents: Vec<NodeId> = idx.children.keys().copied().collect();
    parents.sort();
    for p in parents {
        let events: Vec<&NodeRecord> = idx
            .children(p)
            .iter()
            .map(|c| &out.nodes[c])
            .filter(|c| c.kind.is_event())
            .collect();
        for w in events.windows(2) {
            out.edges.push(succession(w[0], w[1]));
        }
    }

    let radicals: Vec<NodeId> = out.radicals().map(|r| r.id).collect();
    for &r in &radicals {
        let m = metrical_cover(&out, &idx, r)?;
        out.edges.push(EdgeRecord {
            kind: EdgeKind::Synchronization,
            src: r,
            dst: m,
            attrs: EdgeAttrs::None,
        });
    }

    // Diads: overlapping pitched radicals under different parents, swept by onset.
    let mut pitched: Vec<(&NodeRecord, i32, Option<NodeId>)> = radicals
        .iter()
        .map(|id| &out.nodes[id])
        .filter_map(|n| Some((n, n.radical_attrs()?.highest_midi()?, idx.parent(n.id))))
        .collect();
    pitched.sort_by(|a, b| a.0.t_on.cmp(&b.0.t_on).then(a.1.cmp(&b.1)).then(a.0.id.cmp(&b.0.id)));
    let mut diads = Vec::new();
    for (i, &(a, pa, par_a)) in pitched.iter().enumerate() {
        for &(b, pb, par_b) in &pitched[i + 1..] {
            if b.t_on > a.t_on && b.t_on >= a.t_off {
                // sorted by onset: nothing later can overlap `a` either
                break;
            }
            if par_a == par_b || !overlaps(a, b) {
                continue;
            }
            diads.push(EdgeRecord {
                kind: EdgeKind::Diad,
                src: a.id,
                dst: b.id,
                attrs: EdgeAttrs::Diad {
                    interval_semitones: pb - pa,
                },
            });
        }
    }
    diads.sort_by(|x, y| (x.src, x.dst).cmp(&(y.src, y.dst)));
    out.edges.extend(diads);
    Ok(out)
}

fn succession(prev: &NodeRecord, next: &NodeRecord) -> EdgeRecord {
    let rho = next.t_on - prev.t_off;
    let gamma = if rho >= Beats::zero() {
        Eclipse::None
    } else if prev.t_off >= next.t_off {
        Eclipse::SrcOver
    } else {
        Eclipse::DstOver
    };
    EdgeRecord {
        kind: EdgeKind::Succession,
        src: prev.id,
        dst: next.id,
        attrs: EdgeAttrs::Succession(SuccessionAttrs {
            gamma,
            rho,
            sigma: 0.0,
        }),
    }
}

/// Positive-length spans overlap when they intersect; a zero-length grace
/// radical overlaps any span that contains its instant.
fn overlaps(a: &NodeRecord, b: &NodeRecord) -> bool {
    let inside = |t: Beats, n: &NodeRecord| n.t_on <= t && t < n.t_off;
    match (a.t_on == a.t_off, b.t_on == b.t_off) {
        (false, false) => a.t_on < b.t_off && b.t_on < a.t_off,
        (true, false) => inside(a.t_on, b),
        (false, true) => inside(b.t_on, a),
        (true, true) => a.t_on == b.t_on,
    }
}

/// Deepest metrical node, within the radical's ensemble, whose span contains the
/// radical onset.
pub fn metrical_cover(pg: &ParseGraph, idx: &GraphIndex, radical: NodeId) -> Result<NodeId> {
    let r = pg.node(radical).ok_or(Error::MissingMetricalCover(radical))?;
    let ensemble = idx
        .ancestors(radical)
        .find(|a| pg.node(*a).is_some_and(|n| n.kind == NodeKind::Ensemble))
        .ok_or(Error::MissingMetricalCover(radical))?;
    let mut level: Vec<NodeId> = idx
        .children(ensemble)
        .iter()
        .copied()
        .filter(|c| pg.nodes[c].kind == NodeKind::Metrical)
        .collect();
    let mut found = None;
    while let Some(hit) = level.iter().copied().find(|c| pg.nodes[c].contains(r.t_on)) {
        found = Some(hit);
        level = idx.children(hit).to_vec();
    }
    found.ok_or(Error::MissingMetricalCover(radical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{b, beats, tiny_graph};
    use crate::graph::{validate, MetricalAttrs, PitchVector, RadicalAttrs};

    fn succ(g: &ParseGraph) -> Vec<&EdgeRecord> {
        g.edges_of(EdgeKind::Succession).collect()
    }

    #[test]
    fn attached_succession() {
        let g = deduce_relations(&tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2))])).unwrap();
        let s = succ(&g);
        assert_eq!(s.len(), 1);
        let EdgeAttrs::Succession(a) = &s[0].attrs else { panic!() };
        assert_eq!(a.rho, beats(0));
        assert_eq!(a.gamma, Eclipse::None);
        assert_eq!((s[0].src, s[0].dst), (NodeId(10), NodeId(11)));
    }

    #[test]
    fn rest_between_successive_radicals() {
        let g = deduce_relations(&tiny_graph(&[(60, beats(0), beats(1)), (62, b(3, 2), beats(2))])).unwrap();
        let EdgeAttrs::Succession(a) = &succ(&g)[0].attrs else { panic!() };
        assert_eq!(a.rho, b(1, 2));
        assert_eq!(a.gamma, Eclipse::None);
    }

    fn two_voice() -> ParseGraph {
        let mut g = tiny_graph(&[(60, beats(0), beats(2))]);
        g.add_child(NodeId(1), NodeRecord::group(NodeId(4), NodeKind::Phrase, beats(0), beats(2), "alto"))
            .unwrap();
        g.add_child(
            NodeId(4),
            NodeRecord::radical(NodeId(20), beats(1), beats(2), RadicalAttrs::note(PitchVector::new(4, 4), "a")),
        )
        .unwrap();
        g
    }

    #[test]
    fn diad_between_voices() {
        let g = deduce_relations(&two_voice()).unwrap();
        let d: Vec<_> = g.edges_of(EdgeKind::Diad).collect();
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].src, d[0].dst), (NodeId(10), NodeId(20)));
        assert_eq!(d[0].attrs, EdgeAttrs::Diad { interval_semitones: 4 });
        // voices overlap, so the phrase-level succession is an eclipse
        let s: Vec<_> = succ(&g).into_iter().filter(|e| e.src == NodeId(2)).collect();
        let EdgeAttrs::Succession(a) = &s[0].attrs else { panic!() };
        assert_eq!(a.rho, beats(-2));
        assert_eq!(a.gamma, Eclipse::SrcOver);
        assert!(validate(&g).is_empty(), "{}", validate(&g));
    }

    #[test]
    fn deduction_is_idempotent() {
        let once = deduce_relations(&two_voice()).unwrap();
        let twice = deduce_relations(&once).unwrap();
        assert_eq!(once.edges(), twice.edges());
    }

    #[test]
    fn sync_picks_the_deepest_cover() {
        let mut g = tiny_graph(&[(60, beats(0), b(1, 2)), (62, b(1, 2), beats(1))]);
        g.add_child(NodeId(3), NodeRecord::metrical(NodeId(30), beats(0), b(1, 2), MetricalAttrs::new(0, 120.0)))
            .unwrap();
        g.add_child(NodeId(3), NodeRecord::metrical(NodeId(31), b(1, 2), beats(1), MetricalAttrs::new(0, 120.0)))
            .unwrap();
        let g = deduce_relations(&g).unwrap();
        let idx = g.index();
        assert_eq!(idx.sync[&NodeId(10)], NodeId(30));
        assert_eq!(idx.sync[&NodeId(11)], NodeId(31));
    }

    #[test]
    fn missing_cover_is_an_error() {
        let mut g = tiny_graph(&[(60, beats(0), beats(1))]);
        g.node_mut(NodeId(3)).unwrap().t_on = b(1, 2);
        assert!(matches!(deduce_relations(&g), Err(Error::MissingMetricalCover(NodeId(10)))));
    }
}
