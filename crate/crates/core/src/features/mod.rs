//! Histogram statistics over parse graphs.
//!
//! Every descriptor maps a graph to a bag of bin observations anchored on a
//! node or an edge. Counts are kept as integers so that the same histogram
//! computed over a whole graph, or patched from a local scope, is bit-identical.

mod extract;
mod multinomial;

use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extract::{FeatureCounts, Scope};
pub use multinomial::{fit_or_multinomial, OrMultinomial, MAX_CHILDREN};

use crate::error::{Error, Result};
use crate::graph::{NodeKind, ParseGraph};

/// 1-based position of a descriptor in the built-in bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptorId(pub u8);

impl DescriptorId {
    pub const PITCH_CLASS: DescriptorId = DescriptorId(1);
    pub const MIDI_PITCH: DescriptorId = DescriptorId(2);
    pub const DURATION: DescriptorId = DescriptorId(3);
    pub const ONSET_IN_MEASURE: DescriptorId = DescriptorId(4);
    pub const MELODIC_INTERVAL: DescriptorId = DescriptorId(5);
    pub const SUCCESSION_GAP: DescriptorId = DescriptorId(6);
    pub const SUCCESSION_SMOOTHNESS: DescriptorId = DescriptorId(7);
    pub const DIAD_CLASS: DescriptorId = DescriptorId(8);
    pub const DIAD_INTERVAL: DescriptorId = DescriptorId(9);
    pub const CONTOUR: DescriptorId = DescriptorId(10);
    pub const RADICALS_PER_PHRASE: DescriptorId = DescriptorId(11);
    pub const PHRASE_DURATION: DescriptorId = DescriptorId(12);
    pub const BRANCHING: DescriptorId = DescriptorId(13);
    pub const SYNC_LEVEL: DescriptorId = DescriptorId(14);

    pub(crate) fn slot(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureCategory {
    NodeAttr,
    Relation,
    Production,
    OrSelection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDescriptor {
    pub id: DescriptorId,
    pub name: &'static str,
    pub category: FeatureCategory,
    pub labels: Vec<String>,
}

impl FeatureDescriptor {
    pub fn bins(&self) -> usize {
        self.labels.len()
    }
}

/// Duration categories of descriptor 3, in quarter-note beats (numerator, denominator).
pub const DURATION_CATEGORIES: [(i64, i64); 7] = [(1, 4), (1, 2), (1, 1), (3, 2), (2, 1), (3, 1), (4, 1)];
/// Kinds that can have production children, in the bin order of descriptor 13.
pub const BRANCHING_KINDS: [NodeKind; 5] = [
    NodeKind::Section,
    NodeKind::Period,
    NodeKind::Ensemble,
    NodeKind::Phrase,
    NodeKind::Metrical,
];
pub const BANK_SIZE: usize = 14;

fn build_bank() -> Vec<FeatureDescriptor> {
    use FeatureCategory::*;
    const PC: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let d = |id: u8, name, category, labels| FeatureDescriptor {
        id: DescriptorId(id),
        name,
        category,
        labels,
    };
    vec![
        d(1, "radical-pitch-class", NodeAttr, s(&PC)),
        d(2, "radical-midi-pitch", NodeAttr, (0..12).map(|i| format!("[{},{})", 36 + 4 * i, 40 + 4 * i)).collect()),
        d(3, "radical-duration", NodeAttr, {
            let mut v: Vec<String> = DURATION_CATEGORIES.iter().map(|(n, d)| if *d == 1 { n.to_string() } else { format!("{n}/{d}") }).collect();
            v.push("other".into());
            v
        }),
        d(4, "onset-in-measure", NodeAttr, (0..16).map(|i| format!("{i}/16")).collect()),
        d(5, "melodic-interval", Relation, (-12..=12).map(|i| format!("{i:+}")).collect()),
        d(6, "succession-gap", Relation, s(&["<0", "0", "(0,1]", ">1"])),
        d(7, "succession-smoothness", Relation, s(&["[0,0.25)", "[0.25,0.5)", "[0.5,0.75)", "[0.75,1]"])),
        d(8, "diad-interval-class", Relation, (0..12).map(|i| i.to_string()).collect()),
        d(9, "diad-interval", Relation, (0..12).map(|i| format!("[{},{})", -24 + 4 * i, -20 + 4 * i)).collect()),
        d(10, "melodic-contour", Relation, s(&["down", "same", "up"])),
        d(11, "radicals-per-phrase", Production, (1..=8).map(|i| if i == 8 { "8+".to_string() } else { i.to_string() }).collect()),
        d(12, "phrase-duration", Production, s(&["<=1", "(1,2]", "(2,3]", "(3,4]", ">4"])),
        d(13, "or-branching", OrSelection, BRANCHING_KINDS
            .iter()
            .flat_map(|k| (1..=MAX_CHILDREN).map(move |n| format!("{}:{}{}", k.as_str(), n, if n == MAX_CHILDREN { "+" } else { "" })))
            .collect()),
        d(14, "sync-level", Relation, s(&["-1", "0", "1", "2"])),
    ]
}

/// The fourteen built-in descriptors, in bank order.
pub fn list_bank() -> &'static [FeatureDescriptor] {
    static BANK: OnceLock<Vec<FeatureDescriptor>> = OnceLock::new();
    BANK.get_or_init(build_bank)
}

pub fn descriptor(id: DescriptorId) -> Result<&'static FeatureDescriptor> {
    list_bank()
        .get(usize::from(id.0).wrapping_sub(1))
        .ok_or(Error::UnknownDescriptor(id))
}

/// Normalized bin masses of one descriptor; all-zero when nothing was observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub descriptor: DescriptorId,
    pub mass: Vec<f64>,
    pub observations: u64,
}

impl Histogram {
    pub fn from_counts(descriptor: DescriptorId, counts: &[i64]) -> Self {
        let total: i64 = counts.iter().sum();
        let mass = if total > 0 {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        } else {
            vec![0.0; counts.len()]
        };
        Histogram {
            descriptor,
            mass,
            observations: total.max(0) as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.observations == 0
    }

    /// Mass with `eps` added to every bin, renormalized. An empty histogram
    /// smooths to uniform.
    pub fn smoothed(&self, eps: f64) -> Vec<f64> {
        let n = self.mass.len() as f64;
        let sum: f64 = self.mass.iter().sum();
        if sum <= 0.0 {
            return vec![1.0 / n; self.mass.len()];
        }
        self.mass.iter().map(|m| (m / sum + eps) / (1.0 + n * eps)).collect()
    }

    pub fn mode(&self) -> Option<usize> {
        if self.is_empty() {
            return None;
        }
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        Some(best)
    }
}

/// Histogram of descriptor `d` for one relation-deduced graph.
pub fn extract_histogram(d: &FeatureDescriptor, pg: &ParseGraph) -> Histogram {
    let counts = FeatureCounts::of(pg);
    Histogram::from_counts(d.id, counts.bins(d.id))
}

/// Observation-weighted pooling: raw counts are summed over graphs, then normalized.
pub fn dataset_histogram(d: &FeatureDescriptor, pgs: &[ParseGraph]) -> Result<Histogram> {
    let counts = pooled_counts(pgs);
    let h = Histogram::from_counts(d.id, counts.bins(d.id));
    if h.is_empty() {
        return Err(Error::AllEmpty(d.id));
    }
    Ok(h)
}

/// Sum of per-graph counts, extracted in parallel and merged in input order.
pub fn pooled_counts(pgs: &[ParseGraph]) -> FeatureCounts {
    let per: Vec<FeatureCounts> = pgs.par_iter().map(FeatureCounts::of).collect();
    let mut total = FeatureCounts::zero();
    for c in &per {
        total.add_assign(c);
    }
    total
}

/// L1 distance between two histograms of the same descriptor and binning.
pub fn histogram_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.descriptor != b.descriptor || a.mass.len() != b.mass.len() {
        return Err(Error::BinMismatch(format!(
            "descriptor {} with {} bins vs descriptor {} with {} bins",
            a.descriptor,
            a.mass.len(),
            b.descriptor,
            b.mass.len()
        )));
    }
    Ok(l1(&a.mass, &b.mass))
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
