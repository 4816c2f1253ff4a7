//! Random valid parse graphs for property tests.
#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;

use musicaog::graph::{FigureKind, MetricalAttrs, RadicalAttrs};
use musicaog::{deduce_relations, Beats, EdgeRecord, NodeId, NodeKind, NodeRecord, ParseGraph, PitchVector};

#[derive(Clone, Debug)]
pub struct NoteSpec {
    /// Silence before the note, in quarter beats.
    pub rest: i64,
    /// Length in quarter beats.
    pub len: i64,
    pub midi: Vec<i32>,
    pub temperature: f64,
}

#[derive(Clone, Debug)]
pub struct GraphSpec {
    /// voices -> phrases -> notes
    pub voices: Vec<Vec<Vec<NoteSpec>>>,
    pub tempo: f64,
    pub beats_per_measure: i64,
    /// Beats split into four semiquavers, by beat index.
    pub subdivide: Vec<bool>,
    /// Variation edges as (phrase index, child a, child b), taken modulo sizes.
    pub variations: Vec<(usize, usize, usize)>,
    pub phrase_temperature: Vec<f64>,
}

fn temperature() -> impl Strategy<Value = f64> {
    prop_oneof![3 => Just(0.0), 1 => Just(0.5), 1 => Just(1.0), 1 => 0.01f64..4.0]
}

fn note() -> impl Strategy<Value = NoteSpec> {
    (
        prop_oneof![6 => Just(0i64), 1 => 1i64..4],
        prop_oneof![1 => Just(1i64), 3 => Just(2i64), 4 => Just(4i64), 1 => Just(6i64), 2 => Just(8i64), 1 => 1i64..12],
        prop::collection::vec(36i32..96, 1..3),
        temperature(),
    )
        .prop_map(|(rest, len, midi, temperature)| NoteSpec { rest, len, midi, temperature })
}

pub fn graph_spec() -> impl Strategy<Value = GraphSpec> {
    (
        prop::collection::vec(prop::collection::vec(prop::collection::vec(note(), 1..7), 1..4), 1..4),
        prop_oneof![Just(60.0), Just(96.0), 40.0f64..180.0],
        prop_oneof![Just(3i64), Just(4i64)],
        prop::collection::vec(any::<bool>(), 64),
        prop::collection::vec((0usize..16, 0usize..8, 0usize..8), 0..4),
        prop::collection::vec(temperature(), 16),
    )
        .prop_map(|(voices, tempo, beats_per_measure, subdivide, variations, phrase_temperature)| GraphSpec {
            voices,
            tempo,
            beats_per_measure,
            subdivide,
            variations,
            phrase_temperature,
        })
}

fn q(n: i64) -> Beats {
    Beats::new(n, 4)
}

/// Build the graph described by `spec` (relations not yet deduced).
pub fn build(spec: &GraphSpec) -> ParseGraph {
    let zero = Beats::from_integer(0);
    // lay out every voice first to find the total span
    let mut voices: Vec<Vec<Vec<(Beats, Beats, &NoteSpec)>>> = Vec::new();
    let mut end = zero;
    for v in &spec.voices {
        let mut t = zero;
        let mut phrases = Vec::new();
        for p in v {
            let mut notes = Vec::new();
            for n in p {
                t += q(n.rest);
                notes.push((t, t + q(n.len), n));
                t += q(n.len);
            }
            phrases.push(notes);
        }
        end = end.max(t);
        voices.push(phrases);
    }
    let bpm = spec.beats_per_measure;
    let measures = (end / Beats::from_integer(bpm)).ceil().to_integer().max(1);
    let end = Beats::from_integer(measures * bpm);

    let mut next = 0u32;
    let mut id = || {
        next += 1;
        NodeId(next - 1)
    };
    let root = id();
    let mut g = ParseGraph::new(NodeRecord::group(root, NodeKind::Period, zero, end, "piece"));
    let ens = g.add_child(root, NodeRecord::group(id(), NodeKind::Ensemble, zero, end, "texture")).unwrap();
    let mut leaf_phrases: Vec<Vec<NodeId>> = Vec::new();
    let mut pi = 0;
    for (vi, phrases) in voices.iter().enumerate() {
        let timbre = format!("v{vi}");
        let voice = g.add_child(ens, NodeRecord::group(id(), NodeKind::Phrase, zero, end, &timbre)).unwrap();
        for notes in phrases {
            let on = notes.first().unwrap().0;
            let off = notes.iter().map(|n| n.1).max().unwrap();
            let mut rec = NodeRecord::group(id(), NodeKind::Phrase, on, off.min(end), "p");
            rec.temperature = spec.phrase_temperature[pi % spec.phrase_temperature.len()];
            pi += 1;
            let phrase = g.add_child(voice, rec).unwrap();
            let mut kids = Vec::new();
            for (t_on, t_off, n) in notes {
                let pitches: Vec<PitchVector> = n.midi.iter().map(|&m| PitchVector::from_midi(m)).collect();
                let attrs = RadicalAttrs {
                    figure_kind: if pitches.len() == 1 { FigureKind::Note } else { FigureKind::Chord },
                    pitches,
                    timbre: timbre.clone(),
                    articulation: Vec::new(),
                };
                let mut r = NodeRecord::radical(id(), *t_on, *t_off, attrs);
                r.temperature = n.temperature;
                kids.push(g.add_child(phrase, r).unwrap());
            }
            leaf_phrases.push(kids);
        }
    }
    let mut beat_index = 0;
    for m in 0..measures {
        let on = Beats::from_integer(m * bpm);
        let measure = g
            .add_child(ens, NodeRecord::metrical(id(), on, on + Beats::from_integer(bpm), MetricalAttrs::new(1, spec.tempo)))
            .unwrap();
        for b in 0..bpm {
            let t = on + Beats::from_integer(b);
            let beat = g
                .add_child(measure, NodeRecord::metrical(id(), t, t + Beats::from_integer(1), MetricalAttrs::new(0, spec.tempo)))
                .unwrap();
            if spec.subdivide[beat_index % spec.subdivide.len()] {
                for s in 0..4 {
                    let st = t + q(s);
                    g.add_child(beat, NodeRecord::metrical(id(), st, st + q(1), MetricalAttrs::new(-1, spec.tempo)))
                        .unwrap();
                }
            }
            beat_index += 1;
        }
    }
    for &(p, a, b) in &spec.variations {
        let kids = &leaf_phrases[p % leaf_phrases.len()];
        let (a, b) = (kids[a % kids.len()], kids[b % kids.len()]);
        if a != b {
            g.add_edge(EdgeRecord::variation(a, b));
        }
    }
    g
}

pub fn deduced(spec: &GraphSpec) -> ParseGraph {
    deduce_relations(&build(spec)).expect("generated graphs are covered by their meter")
}

/// `pg` with ids replaced by a permutation derived from `key`.
pub fn shuffle_ids(pg: &ParseGraph, key: u64) -> ParseGraph {
    let ids: Vec<NodeId> = pg.nodes().map(|n| n.id).collect();
    let mut targets: Vec<u32> = (0..ids.len() as u32).map(|i| i * 3 + 7).collect();
    let mut state = key | 1;
    for i in (1..targets.len()).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        targets.swap(i, (state >> 33) as usize % (i + 1));
    }
    let map: HashMap<NodeId, NodeId> = ids.iter().zip(targets).map(|(a, b)| (*a, NodeId(b))).collect();
    pg.relabel(&map)
}
