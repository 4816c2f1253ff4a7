use super::{metrical_cover, Beats, GraphIndex, NodeId, ParseGraph, RadicalAttrs};
use crate::error::Result;

/// One sounding radical in performance order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatEvent {
    pub node: NodeId,
    pub t_on: Beats,
    pub t_dur: Beats,
    pub radical: RadicalAttrs,
    /// Tempo (BPM) of the metrical node the radical is synchronized to.
    pub tempo: f64,
}

/// All radicals sorted by onset, then lowest pitch (unpitched first), then id.
pub fn flatten_events(pg: &ParseGraph) -> Result<Vec<FlatEvent>> {
    let idx = GraphIndex::build(pg);
    let mut events = Vec::new();
    for r in pg.radicals() {
        let m = match idx.sync.get(&r.id) {
            Some(&m) => m,
            None => metrical_cover(pg, &idx, r.id)?,
        };
        let tempo = pg.node(m).and_then(|n| n.metrical_attrs()).map_or(120.0, |a| a.tempo);
        events.push(FlatEvent {
            node: r.id,
            t_on: r.t_on,
            t_dur: r.duration(),
            radical: r.radical_attrs().cloned().expect("radical node carries radical attributes"),
            tempo,
        });
    }
    events.sort_by(|a, b| {
        a.t_on
            .cmp(&b.t_on)
            .then(a.radical.lowest_midi().cmp(&b.radical.lowest_midi()))
            .then(a.node.cmp(&b.node))
    });
    Ok(events)
}
