use std::cmp::Ordering;
use std::collections::HashMap;

use super::{EdgeKind, EdgeRecord, NodeId, ParseGraph};

/// Nodes in an order that depends only on graph content, not on ids: by
/// onset, then depth, then kind, offset, parent position, attributes and
/// temperature. Ids only break ties between otherwise identical siblings.
pub fn canonical_order(pg: &ParseGraph) -> Vec<NodeId> {
    let idx = pg.index();
    let depth: HashMap<NodeId, usize> = pg
        .nodes()
        .map(|n| (n.id, idx.ancestors(n.id).count()))
        .collect();
    let mut ids: Vec<NodeId> = pg.nodes().map(|n| n.id).collect();
    ids.sort_by(|a, b| {
        let (na, nb) = (&pg.nodes[a], &pg.nodes[b]);
        na.t_on.cmp(&nb.t_on).then(depth[a].cmp(&depth[b]))
    });

    // Parents sort strictly before their children (earlier or equal onset,
    // smaller depth), so their ranks are final by the time a group is ranked.
    let mut rank: HashMap<NodeId, usize> = HashMap::with_capacity(ids.len());
    let mut out = Vec::with_capacity(ids.len());
    let mut start = 0;
    while start < ids.len() {
        let key = |id: &NodeId| (pg.nodes[id].t_on, depth[id]);
        let end = start + ids[start..].iter().take_while(|id| key(id) == key(&ids[start])).count();
        let mut group: Vec<NodeId> = ids[start..end].to_vec();
        group.sort_by(|a, b| content_order(pg, &idx, &rank, *a, *b));
        for id in group {
            rank.insert(id, out.len());
            out.push(id);
        }
        start = end;
    }
    out
}

fn content_order(
    pg: &ParseGraph,
    idx: &super::GraphIndex,
    rank: &HashMap<NodeId, usize>,
    a: NodeId,
    b: NodeId,
) -> Ordering {
    let (na, nb) = (&pg.nodes[&a], &pg.nodes[&b]);
    let parent_rank = |id: NodeId| idx.parent(id).and_then(|p| rank.get(&p).copied());
    na.kind
        .cmp(&nb.kind)
        .then(na.t_off.cmp(&nb.t_off))
        .then(parent_rank(a).cmp(&parent_rank(b)))
        .then_with(|| format!("{:?}", na.attrs).cmp(&format!("{:?}", nb.attrs)))
        .then(na.temperature.total_cmp(&nb.temperature))
        .then(a.cmp(&b))
}

impl ParseGraph {
    /// Same graph with ids renumbered `n0, n1, ...` in canonical order and
    /// stored edges (production and variation only) sorted.
    pub fn canonicalized(&self) -> ParseGraph {
        let order = canonical_order(self);
        let map: HashMap<NodeId, NodeId> = order
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, NodeId(i as u32)))
            .collect();
        let mut g = self.without_deduced().relabel(&map);
        g.edges.sort_by(edge_order);
        g
    }
}

pub(super) fn edge_order(a: &EdgeRecord, b: &EdgeRecord) -> Ordering {
    let k = |e: &EdgeRecord| match e.kind {
        EdgeKind::Production => 0,
        EdgeKind::Variation => 1,
        _ => 2,
    };
    k(a).cmp(&k(b)).then(a.src.cmp(&b.src)).then(a.dst.cmp(&b.dst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{beats, tiny_graph};

    #[test]
    fn order_ignores_ids() {
        let g = tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2)), (64, beats(1), beats(2))]);
        let map: HashMap<NodeId, NodeId> = g.nodes().map(|n| (n.id, NodeId(100 - n.id.0))).collect();
        let h = g.relabel(&map);
        assert_eq!(g.canonicalized(), h.canonicalized());
        let order = canonical_order(&g);
        assert_eq!(order[0], g.root());
        assert_eq!(order.len(), g.node_count());
    }
}
