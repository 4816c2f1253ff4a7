//! Minimax-entropy learning.
//!
//! Descriptors are added one at a time, always the one whose synthesized
//! histogram is furthest from the observed one. For the newly added
//! descriptor, its weights follow the moment-matching gradient
//! `lambda += eta * (h_syn - h_obs)` while a population of synthesized graphs
//! is advanced by a few Metropolis–Hastings steps per update.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyModel, DEFAULT_SMOOTHING};
use crate::error::{Error, Result};
use crate::features::{l1, list_bank, DescriptorId, FeatureCounts, Histogram};
use crate::graph::{deduce_relations, ParseGraph};
use crate::sampler::{init_sample, Chain, ChainMode, MoveSet, Skeleton};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// Learning rate.
    pub eta: f64,
    /// Maximum weight updates per descriptor.
    pub max_iters: usize,
    /// The inner loop stops once the L1 discrepancy drops below this.
    pub epsilon: f64,
    /// Metropolis–Hastings steps per synthesized graph between updates.
    pub chain_steps: u64,
    /// Size of the synthesized population; defaults to the dataset size.
    pub n_syn: Option<usize>,
    pub seed: u64,
    pub smoothing: f64,
    pub moves: MoveSet,
    /// Descriptors to consider; the whole bank when `None`.
    pub bank: Option<Vec<DescriptorId>>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            eta: 1.0,
            max_iters: 500,
            epsilon: 0.1,
            chain_steps: 150,
            n_syn: None,
            seed: 0,
            smoothing: DEFAULT_SMOOTHING,
            moves: MoveSet::NODES,
            bank: None,
        }
    }
}

impl LearnConfig {
    fn check(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.eta.is_finite()
            && self.max_iters > 0
            && self.epsilon > 0.0
            && self.chain_steps > 0
            && self.n_syn != Some(0)
            && self.smoothing >= 0.0;
        if !ok {
            return Err(Error::InvalidArgument("learning configuration values must be positive".into()));
        }
        for d in self.bank.iter().flatten() {
            crate::features::descriptor(*d)?;
        }
        Ok(())
    }
}

/// Progress of one selected descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub descriptor: DescriptorId,
    /// Discrepancy before each weight update, starting with the one at
    /// selection time; the last entry is the final discrepancy.
    pub discrepancies: Vec<f64>,
    /// Number of weight updates performed.
    pub updates: usize,
    pub converged: bool,
    pub lambda: Vec<f64>,
}

impl FeatureReport {
    pub fn selection_discrepancy(&self) -> f64 {
        self.discrepancies[0]
    }

    pub fn final_discrepancy(&self) -> f64 {
        *self.discrepancies.last().expect("at least one entry")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    /// In selection order.
    pub features: Vec<FeatureReport>,
    pub parameter_count: usize,
    /// Descriptors skipped because no observed graph has an observation for them.
    pub skipped: Vec<DescriptorId>,
    /// Pooled histograms of the observed graphs, one per bank descriptor.
    pub observed: Vec<Histogram>,
    /// Pooled histograms of the final synthesized population, one per bank descriptor.
    pub synthesized: Vec<Histogram>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Elementwise `lambda + eta * (h_syn - h_obs)`.
pub fn update_lambda(lambda: &[f64], h_syn: &[f64], h_obs: &[f64], eta: f64) -> Result<Vec<f64>> {
    if lambda.len() != h_syn.len() || h_syn.len() != h_obs.len() {
        return Err(Error::BinMismatch(format!(
            "lambda has {} bins, histograms {} and {}",
            lambda.len(),
            h_syn.len(),
            h_obs.len()
        )));
    }
    Ok(lambda
        .iter()
        .zip(h_syn.iter().zip(h_obs))
        .map(|(l, (s, o))| l + eta * (s - o))
        .collect())
}

/// The unselected candidate with the largest L1 discrepancy between observed
/// and synthesized counts; ties go to the earlier candidate.
pub fn select_feature(
    candidates: &[DescriptorId],
    selected: &[DescriptorId],
    obs: &FeatureCounts,
    syn: &FeatureCounts,
) -> Result<(DescriptorId, f64)> {
    let mut best: Option<(DescriptorId, f64)> = None;
    for &d in candidates.iter().filter(|d| !selected.contains(d)) {
        let disc = discrepancy(d, obs, syn);
        if best.is_none_or(|(_, b)| disc > b) {
            best = Some((d, disc));
        }
    }
    best.ok_or(Error::BankExhausted)
}

fn discrepancy(d: DescriptorId, obs: &FeatureCounts, syn: &FeatureCounts) -> f64 {
    let o = Histogram::from_counts(d, obs.bins(d));
    let s = Histogram::from_counts(d, syn.bins(d));
    l1(&o.mass, &s.mass)
}

/// SplitMix64 step: derives independent chain seeds from one seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Learn an energy model from observed graphs.
pub fn learn(observed: &[ParseGraph], cfg: &LearnConfig) -> Result<(EnergyModel, LearnReport)> {
    let started = Instant::now();
    cfg.check()?;
    if observed.is_empty() {
        return Err(Error::InvalidArgument("at least one observed graph is required".into()));
    }
    // Canonical ids make the run independent of how the inputs were numbered.
    let obs: Vec<ParseGraph> = observed
        .iter()
        .map(|g| deduce_relations(&g.canonicalized()))
        .collect::<Result<_>>()?;
    let mut model = EnergyModel::fit(&obs, cfg.smoothing);
    let obs_counts = crate::features::pooled_counts(&obs);

    let bank: Vec<DescriptorId> = match &cfg.bank {
        Some(b) => b.clone(),
        None => list_bank().iter().map(|d| d.id).collect(),
    };
    let (candidates, skipped): (Vec<DescriptorId>, Vec<DescriptorId>) =
        bank.iter().partition(|d| obs_counts.total(**d) > 0);

    let n_syn = cfg.n_syn.unwrap_or(obs.len());
    let mut chains: Vec<Chain> = (0..n_syn)
        .into_par_iter()
        .map(|i| {
            let skeleton = Skeleton::from_graph(&obs[i % obs.len()]);
            let init = init_sample(&model, &skeleton, derive_seed(cfg.seed, 2 * i as u64))?;
            Chain::new(&init, ChainMode::Generate, cfg.moves, derive_seed(cfg.seed, 2 * i as u64 + 1))
        })
        .collect::<Result<_>>()?;

    let pooled = |chains: &[Chain]| {
        let mut total = FeatureCounts::zero();
        for c in chains {
            total.add_assign(c.counts());
        }
        total
    };

    let mut features = Vec::new();
    let mut syn = pooled(&chains);
    while let Ok((d, _)) = select_feature(&candidates, &model.selected, &obs_counts, &syn) {
        model.select(d)?;
        let h_obs = Histogram::from_counts(d, obs_counts.bins(d));
        let mut report = FeatureReport {
            descriptor: d,
            discrepancies: Vec::new(),
            updates: 0,
            converged: false,
            lambda: Vec::new(),
        };
        loop {
            let h_syn = Histogram::from_counts(d, syn.bins(d));
            let disc = l1(&h_syn.mass, &h_obs.mass);
            report.discrepancies.push(disc);
            if disc < cfg.epsilon {
                report.converged = true;
                break;
            }
            if report.updates == cfg.max_iters {
                break;
            }
            let lambda = update_lambda(model.lambda(d).expect("selected"), &h_syn.mass, &h_obs.mass, cfg.eta)?;
            model.set_lambda(d, lambda)?;
            report.updates += 1;
            let m = &model;
            chains.par_iter_mut().try_for_each(|c| c.run(m, cfg.chain_steps))?;
            syn = pooled(&chains);
        }
        report.lambda = model.lambda(d).expect("selected").to_vec();
        features.push(report);
    }

    let per_bank = |c: &FeatureCounts| -> Vec<Histogram> { bank.iter().map(|d| Histogram::from_counts(*d, c.bins(*d))).collect() };
    let report = LearnReport {
        parameter_count: model.parameter_count(),
        features,
        skipped,
        observed: per_bank(&obs_counts),
        synthesized: per_bank(&syn),
        wall_time: started.elapsed(),
    };
    Ok((model, report))
}
