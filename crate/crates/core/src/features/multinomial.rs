use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pooled_counts;
use crate::graph::{NodeKind, ParseGraph};

/// Largest child count with its own category; larger counts share the last one.
pub const MAX_CHILDREN: usize = 16;

/// Empirical distribution of child counts for one node kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrMultinomial {
    pub kind: NodeKind,
    /// `probs[k - 1]` is the probability of `k` children.
    pub probs: Vec<f64>,
    pub observations: u64,
}

impl OrMultinomial {
    pub fn from_counts(kind: NodeKind, counts: &[u64; MAX_CHILDREN]) -> Self {
        let total: u64 = counts.iter().sum();
        let probs = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        OrMultinomial { kind, probs, observations: total }
    }

    fn category(children: usize) -> usize {
        children.clamp(1, MAX_CHILDREN) - 1
    }

    /// Raw probability of `children` children.
    pub fn probability(&self, children: usize) -> f64 {
        self.probs[Self::category(children)]
    }

    /// Probability after adding `eps` to every category and renormalizing.
    pub fn smoothed_probability(&self, children: usize, eps: f64) -> f64 {
        (self.probability(children) + eps) / (1.0 + MAX_CHILDREN as f64 * eps)
    }

    /// Number of child counts with nonzero probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Closed-form maximum-likelihood fit for every kind that has at least one
/// parent node in the dataset.
pub fn fit_or_multinomial(pgs: &[ParseGraph]) -> BTreeMap<NodeKind, OrMultinomial> {
    let counts = pooled_counts(pgs);
    let mut table: BTreeMap<NodeKind, [u64; MAX_CHILDREN]> = BTreeMap::new();
    for (&(kind, k), &n) in &counts.branching {
        table.entry(kind).or_insert([0; MAX_CHILDREN])[OrMultinomial::category(k)] += n as u64;
    }
    table
        .into_iter()
        .map(|(kind, c)| (kind, OrMultinomial::from_counts(kind, &c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::deduce_relations;
    use crate::graph::tests::{beats, tiny_graph};

    #[test]
    fn fit_counts_children_per_kind() {
        let a = deduce_relations(&tiny_graph(&[(60, beats(0), beats(1)), (62, beats(1), beats(2))])).unwrap();
        let b = deduce_relations(&tiny_graph(&[
            (60, beats(0), beats(1)),
            (62, beats(1), beats(2)),
            (64, beats(2), beats(3)),
            (65, beats(3), beats(4)),
        ]))
        .unwrap();
        let fit = fit_or_multinomial(&[a, b]);
        let phrase = &fit[&NodeKind::Phrase];
        assert_eq!(phrase.probability(2), 0.5);
        assert_eq!(phrase.probability(4), 0.5);
        assert_eq!(phrase.probability(3), 0.0);
        assert_eq!(phrase.support_size(), 2);
        assert_eq!(phrase.observations, 2);
        assert!(!fit.contains_key(&NodeKind::Radical));
    }

    #[test]
    fn large_counts_share_the_last_category() {
        let mut c = [0; MAX_CHILDREN];
        c[MAX_CHILDREN - 1] = 1;
        let m = OrMultinomial::from_counts(NodeKind::Phrase, &c);
        assert_eq!(m.probability(40), 1.0);
        let s = m.smoothed_probability(3, 1e-4);
        assert!((s - 1e-4 / (1.0 + 16e-4)).abs() < 1e-15);
    }
}
