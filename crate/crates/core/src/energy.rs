//! Gibbs energy of a parse graph under a learned model.
//!
//! The energy is a weighted sum of the normalized histograms of the selected
//! descriptors plus a negative log-likelihood term for how many children every
//! non-leaf node has. Both terms are computed from integer [`FeatureCounts`], so
//! a count table patched after a local edit scores bit-identically to one
//! extracted from scratch.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    descriptor, fit_or_multinomial, pooled_counts, DescriptorId, FeatureCounts, Histogram, OrMultinomial, Scope,
};
use crate::graph::{deduce_relations, NodeId, NodeKind, ParseGraph};
use crate::sampler::Proposal;

pub const DEFAULT_SMOOTHING: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Selected descriptors, in the order they were selected.
    pub selected: Vec<DescriptorId>,
    /// Potential weights, one vector per selected descriptor.
    pub lambdas: BTreeMap<DescriptorId, Vec<f64>>,
    /// Observed (pooled) histograms of every descriptor that had observations.
    pub priors: BTreeMap<DescriptorId, Histogram>,
    pub or_multinomials: BTreeMap<NodeKind, OrMultinomial>,
    pub smoothing: f64,
}

impl EnergyModel {
    /// A model with no selected descriptors, and priors and child-count
    /// multinomials fitted in closed form from `pgs` (which must be
    /// relation-deduced).
    pub fn fit(pgs: &[ParseGraph], smoothing: f64) -> Self {
        let counts = pooled_counts(pgs);
        let priors = crate::features::list_bank()
            .iter()
            .map(|d| Histogram::from_counts(d.id, counts.bins(d.id)))
            .filter(|h| !h.is_empty())
            .map(|h| (h.descriptor, h))
            .collect();
        EnergyModel {
            selected: Vec::new(),
            lambdas: BTreeMap::new(),
            priors,
            or_multinomials: fit_or_multinomial(pgs),
            smoothing,
        }
    }

    /// A model with explicit weights and no child-count term.
    pub fn with_lambdas(lambdas: impl IntoIterator<Item = (DescriptorId, Vec<f64>)>, smoothing: f64) -> Result<Self> {
        let mut m = EnergyModel {
            selected: Vec::new(),
            lambdas: BTreeMap::new(),
            priors: BTreeMap::new(),
            or_multinomials: BTreeMap::new(),
            smoothing,
        };
        for (d, l) in lambdas {
            m.select(d)?;
            m.set_lambda(d, l)?;
        }
        Ok(m)
    }

    /// Add `d` to the selected set with zero weights; a no-op if already selected.
    pub fn select(&mut self, d: DescriptorId) -> Result<()> {
        let bins = descriptor(d)?.bins();
        if !self.selected.contains(&d) {
            self.selected.push(d);
            self.lambdas.insert(d, vec![0.0; bins]);
        }
        Ok(())
    }

    pub fn set_lambda(&mut self, d: DescriptorId, lambda: Vec<f64>) -> Result<()> {
        let bins = descriptor(d)?.bins();
        if lambda.len() != bins {
            return Err(Error::BinMismatch(format!(
                "descriptor {d} has {bins} bins, got {} weights",
                lambda.len()
            )));
        }
        match self.lambdas.get_mut(&d) {
            Some(l) => *l = lambda,
            None => return Err(Error::UnknownDescriptor(d)),
        }
        Ok(())
    }

    pub fn lambda(&self, d: DescriptorId) -> Option<&[f64]> {
        self.lambdas.get(&d).map(Vec::as_slice)
    }

    pub fn prior(&self, d: DescriptorId) -> Option<&Histogram> {
        self.priors.get(&d)
    }

    /// Number of free parameters: bins of every selected descriptor plus the
    /// nonzero support of every child-count multinomial.
    pub fn parameter_count(&self) -> usize {
        let bins: usize = self.lambdas.values().map(Vec::len).sum();
        let support: usize = self.or_multinomials.values().map(OrMultinomial::support_size).sum();
        bins + support
    }

    /// Energy from a precomputed count table.
    pub fn energy_of_counts(&self, counts: &FeatureCounts) -> f64 {
        let mut e = 0.0;
        for d in &self.selected {
            let bins = counts.bins(*d);
            let total: i64 = bins.iter().sum();
            if total <= 0 {
                continue;
            }
            let lambda = &self.lambdas[d];
            for (l, &c) in lambda.iter().zip(bins) {
                e += l * (c as f64 / total as f64);
            }
        }
        for (&(kind, k), &n) in &counts.branching {
            if let Some(m) = self.or_multinomials.get(&kind) {
                e += n as f64 * -m.smoothed_probability(k, self.smoothing).ln();
            }
        }
        e
    }
}

/// Energy of a relation-deduced graph.
pub fn energy(model: &EnergyModel, pg: &ParseGraph) -> f64 {
    model.energy_of_counts(&FeatureCounts::of(pg))
}

/// Result of scoring a proposal against the current state.
#[derive(Clone, Debug)]
pub struct Scored {
    pub graph: ParseGraph,
    pub counts: FeatureCounts,
    pub energy: f64,
    /// `energy(proposed) - energy(current)`.
    pub delta: f64,
}

/// Apply `proposal` to a relation-deduced `pg` whose counts are `counts` and
/// score the result by patching the counts inside the edited neighbourhood.
pub fn energy_delta(
    model: &EnergyModel,
    pg: &ParseGraph,
    counts: &FeatureCounts,
    proposal: &Proposal,
) -> Result<Scored> {
    let current = model.energy_of_counts(counts);
    let mut next = pg.clone();
    let touched = proposal.apply(&mut next)?;
    let next = deduce_relations(&next)?;

    let old_idx = pg.index();
    let new_idx = next.index();
    let mut scope: HashSet<NodeId> = touched.iter().copied().collect();
    for id in &touched {
        scope.extend(old_idx.parent(*id));
        scope.extend(new_idx.parent(*id));
    }
    let mut patched = counts.clone();
    patched.sub_assign(&FeatureCounts::scoped(pg, &old_idx, &Scope::Nodes(&scope)));
    patched.add_assign(&FeatureCounts::scoped(&next, &new_idx, &Scope::Nodes(&scope)));
    let e = model.energy_of_counts(&patched);
    Ok(Scored {
        graph: next,
        counts: patched,
        energy: e,
        delta: e - current,
    })
}
