use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::graph::{flatten_events, Beats, FigureKind, FlatEvent, ParseGraph};

pub const TICKS_PER_BEAT: u16 = 480;
pub const VELOCITY: u8 = 80;
const PERCUSSION_CHANNEL: u8 = 9;

/// General MIDI percussion key for a percussion timbre tag.
pub fn percussion_key(timbre: &str) -> u8 {
    match timbre {
        "kick" | "bass-drum" => 36,
        "rimshot" | "side-stick" => 37,
        "snare" => 38,
        "clap" => 39,
        "hihat" | "closed-hihat" => 42,
        "pedal-hihat" => 44,
        "tom" | "low-tom" => 45,
        "open-hihat" => 46,
        "mid-tom" => 47,
        "high-tom" => 50,
        "crash" => 49,
        "ride" => 51,
        "tambourine" => 54,
        "cowbell" => 56,
        "woodblock" => 76,
        "triangle" => 81,
        _ => 37,
    }
}

fn ticks(b: Beats) -> u32 {
    (b * Beats::from_integer(i64::from(TICKS_PER_BEAT)))
        .round()
        .to_u32()
        .unwrap_or(0)
}

/// Render a relation-deduced graph as a format-1 standard MIDI file.
pub fn export_midi(pg: &ParseGraph) -> Result<Vec<u8>> {
    midi_from_events(&flatten_events(pg)?)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Off,
    Text,
    On,
    /// note-off of a zero-length note: after its own note-on
    LateOff,
}

/// Render flattened events: tempo map on track 0, then one track per timbre
/// in order of first appearance.
pub fn midi_from_events(events: &[FlatEvent]) -> Result<Vec<u8>> {
    let mut timbres: Vec<&str> = Vec::new();
    for e in events {
        if !timbres.contains(&e.radical.timbre.as_str()) {
            timbres.push(&e.radical.timbre);
        }
    }
    // text payloads must outlive the borrowed events
    let names: Vec<Vec<u8>> = timbres.iter().map(|t| t.as_bytes().to_vec()).collect();
    let texts: Vec<Vec<Vec<u8>>> = events
        .iter()
        .map(|e| e.radical.articulation.iter().map(|a| format!("articulation:{a}").into_bytes()).collect())
        .collect();

    let mut tempo_track = Vec::new();
    let mut current: Option<u32> = None;
    let mut last = 0;
    for e in events {
        let us = (60_000_000.0 / e.tempo).round().clamp(1.0, f64::from(0x00FF_FFFF)) as u32;
        if current != Some(us) {
            let t = ticks(e.t_on);
            tempo_track.push(TrackEvent {
                delta: u28::new(t - last),
                kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(us))),
            });
            last = t;
            current = Some(us);
        }
    }
    tempo_track.push(end_of_track());
    let mut tracks = vec![tempo_track];

    let mut melodic_channel = 0u8;
    for (ti, timbre) in timbres.iter().enumerate() {
        let percussive = events
            .iter()
            .any(|e| e.radical.timbre == *timbre && e.radical.figure_kind == FigureKind::Percussion);
        let channel = if percussive {
            PERCUSSION_CHANNEL
        } else {
            let c = melodic_channel;
            melodic_channel = (melodic_channel + 1) % 16;
            if melodic_channel == PERCUSSION_CHANNEL {
                melodic_channel += 1;
            }
            c
        };
        let mut timed: Vec<(u32, Slot, usize, TrackEventKind)> = Vec::new();
        for (ei, e) in events.iter().enumerate().filter(|(_, e)| e.radical.timbre == *timbre) {
            let on = ticks(e.t_on);
            let off = ticks(e.t_on + e.t_dur);
            let keys: Vec<u8> = if e.radical.figure_kind == FigureKind::Percussion {
                vec![percussion_key(timbre)]
            } else {
                e.radical
                    .pitches
                    .iter()
                    .map(|p| {
                        let m = p.midi();
                        u8::try_from(m)
                            .ok()
                            .filter(|k| *k < 128)
                            .ok_or(Error::PitchOutOfRange { node: e.node, midi: m })
                    })
                    .collect::<Result<_>>()?
            };
            for t in &texts[ei] {
                timed.push((on, Slot::Text, timed.len(), TrackEventKind::Meta(MetaMessage::Text(t))));
            }
            let off_slot = if off == on { Slot::LateOff } else { Slot::Off };
            for k in keys {
                let ch = u4::new(channel);
                timed.push((
                    on,
                    Slot::On,
                    timed.len(),
                    TrackEventKind::Midi {
                        channel: ch,
                        message: MidiMessage::NoteOn {
                            key: u7::new(k),
                            vel: u7::new(VELOCITY),
                        },
                    },
                ));
                timed.push((
                    off,
                    off_slot,
                    timed.len(),
                    TrackEventKind::Midi {
                        channel: ch,
                        message: MidiMessage::NoteOff {
                            key: u7::new(k),
                            vel: u7::new(0),
                        },
                    },
                ));
            }
        }
        timed.sort_by_key(|(t, slot, seq, _)| (*t, *slot, *seq));
        let mut track = vec![TrackEvent {
            delta: u28::new(0),
            kind: TrackEventKind::Meta(MetaMessage::TrackName(&names[ti])),
        }];
        let mut last = 0;
        for (t, _, _, kind) in timed {
            track.push(TrackEvent {
                delta: u28::new(t - last),
                kind,
            });
            last = t;
        }
        track.push(end_of_track());
        tracks.push(track);
    }

    let smf = Smf {
        header: Header::new(Format::Parallel, Timing::Metrical(u15::new(TICKS_PER_BEAT))),
        tracks,
    };
    let mut out = Vec::new();
    smf.write_std(&mut out)?;
    Ok(out)
}

fn end_of_track<'a>() -> TrackEvent<'a> {
    TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{beats, tiny_graph};
    use crate::graph::{deduce_relations, NodeId, NodeKind, NodeRecord};

    #[test]
    fn one_note_golden_bytes() {
        let g = deduce_relations(&tiny_graph(&[(60, beats(0), beats(1))])).unwrap();
        let bytes = export_midi(&g).unwrap();
        #[rustfmt::skip]
        let expect: Vec<u8> = vec![
            b'M', b'T', b'h', b'd', 0, 0, 0, 6, 0, 1, 0, 2, 0x01, 0xE0,
            b'M', b'T', b'r', b'k', 0, 0, 0, 11,
            0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,
            0x00, 0xFF, 0x2F, 0x00,
            b'M', b'T', b'r', b'k', 0, 0, 0, 18,
            0x00, 0xFF, 0x03, 0x01, b'v',
            0x00, 0x90, 60, 80,
            0x83, 0x60, 0x80, 60, 0,
            0x00, 0xFF, 0x2F, 0x00,
        ];
        assert_eq!(bytes, expect);
        let smf = Smf::parse(&bytes).unwrap();
        assert_eq!(smf.tracks.len(), 2);
    }

    #[test]
    fn empty_graph_has_only_the_meta_track() {
        let g = crate::graph::ParseGraph::new(NodeRecord::group(NodeId(0), NodeKind::Period, beats(0), beats(4), "p"));
        let bytes = export_midi(&g).unwrap();
        let smf = Smf::parse(&bytes).unwrap();
        assert_eq!(smf.tracks.len(), 1);
        assert_eq!(smf.header.format, Format::Parallel);
    }

    #[test]
    fn out_of_range_pitch_is_an_error() {
        let g = deduce_relations(&tiny_graph(&[(130, beats(0), beats(1))])).unwrap();
        assert!(matches!(export_midi(&g), Err(Error::PitchOutOfRange { midi: 130, .. })));
    }
}
