// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Synthetic two-scan parity experiments and bootstrap fidelity estimates.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parity::{fidelity_from_parity, fit_parity, spam_correct, ParityScan, SpamConvention};
use super::{bin_of, misclassification_matrix, optimal_thresholds, HistogramModel, MixtureTable, ShotSampler};
use crate::dynamics::{analysis_pulse, bell_target, SpinDensity};
use crate::error::{GateError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Poissonian,
    Threshold,
    ParityCombined,
    /// Reserved for joint SPAM/tomography maximum likelihood; never produced.
    JointMaximumLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub mean: f64,
    /// 68% interval [lo, hi].
    pub ci68: [f64; 2],
    pub method: EstimateMethod,
    pub spam_corrected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spam_convention: Option<SpamConvention>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_spam: Option<f64>,
    pub resamples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl FidelityEstimate {
    pub fn contains(&self, f: f64) -> bool {
        self.ci68[0] <= f && f <= self.ci68[1]
    }
}

/// Shot layout of a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    /// Analysis-pulse phases (rad).
    pub phases: Vec<f64>,
    /// Shots per phase in each scan.
    pub shots_per_phase: u32,
    /// Parity scans, pooled per phase.
    pub scans: u32,
    /// Shots of the population record, taken without an analysis pulse.
    pub population_shots: u32,
    pub model: HistogramModel,
}

impl ExperimentDesign {
    /// `num_phases` phases evenly over [0, 2π); the population record holds as
    /// many shots as one scan.
    pub fn new(num_phases: usize, shots_per_phase: u32, scans: u32, model: HistogramModel) -> Self {
        ExperimentDesign {
            phases: (0..num_phases).map(|i| 2.0 * PI * i as f64 / num_phases as f64).collect(),
            shots_per_phase,
            scans,
            population_shots: shots_per_phase * num_phases as u32,
            model,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.phases.is_empty() || self.shots_per_phase == 0 || self.scans == 0 || self.population_shots == 0 {
            return Err(GateError::invalid("experiment design", "phases, shots and scans must be non-zero"));
        }
        Ok(())
    }
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        ExperimentDesign::new(DEFAULT_PHASES, 300, 2, HistogramModel::default())
    }
}

pub const DEFAULT_PHASES: usize = 100;

/// Raw photon counts of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentData {
    pub phases: Vec<f64>,
    /// Population record: counts without analysis pulse.
    pub population_counts: Vec<u32>,
    /// Counts per phase, scans concatenated.
    pub parity_counts: Vec<Vec<u32>>,
}

impl ExperimentData {
    fn max_count(&self) -> u32 {
        self.population_counts
            .iter()
            .chain(self.parity_counts.iter().flatten())
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Per-phase parity from the estimator's population assignment.
    pub fn parity_scan(&self, estimator: &Estimator) -> Result<ParityScan> {
        let prepared = Prepared::new(estimator, self.max_count())?;
        let mut occ = Vec::new();
        let parity = self
            .parity_counts
            .iter()
            .map(|counts| {
                fill(&mut occ, counts.iter().copied());
                let p = prepared.assign(&occ)?;
                Ok(p[0] + p[2] - p[1])
            })
            .collect::<Result<Vec<f64>>>()?;
        let shots = self.parity_counts.first().map_or(0, |c| c.len() as u32);
        ParityScan::new(self.phases.clone(), parity, shots)
    }
}

/// Mixes ρ with the convention's SPAM reference state: the |↑↑⟩/|↓↓⟩ mixture
/// (Bell fidelity 1/2) for the symmetric form, the orthogonal Bell state
/// (fidelity 0) for divide-only. Bell fidelity then maps exactly as
/// [`spam_forward`](super::spam_forward).
pub fn spam_forward_state(
    rho: &SpinDensity,
    epsilon: f64,
    convention: SpamConvention,
    phase_sign: i8,
) -> Result<SpinDensity> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(GateError::invalid("epsilon_spam", "must lie in [0, 1)"));
    }
    let reference = match convention {
        SpamConvention::Symmetric => {
            let mut m = SpinDensity::default();
            m.0[0][0] = 0.5.into();
            m.0[3][3] = 0.5.into();
            m
        }
        SpamConvention::DivideOnly => SpinDensity::pure(&bell_target(-phase_sign)),
    };
    let mut out = SpinDensity::default();
    out.add_scaled(rho, 1.0 - epsilon);
    out.add_scaled(&reference, epsilon);
    Ok(out)
}

fn clean(p: [f64; 3]) -> [f64; 3] {
    let p = p.map(|v| v.max(0.0));
    let s: f64 = p.iter().sum();
    p.map(|v| v / s)
}

/// Draws the population record and every parity scan for state ρ.
pub fn simulate_experiment(rho: &SpinDensity, design: &ExperimentDesign, seed: u64) -> Result<ExperimentData> {
    design.validate()?;
    let pop = ShotSampler::new(&clean(rho.populations()), &design.model)?;
    let mut r = rng::stream(seed, &[0]);
    let population_counts = (0..design.population_shots).map(|_| pop.sample(&mut r)).collect();
    let mut parity_counts = Vec::with_capacity(design.phases.len());
    for (i, &phi) in design.phases.iter().enumerate() {
        let p = clean(rho.transform(&analysis_pulse(phi)).populations());
        let sampler = ShotSampler::new(&p, &design.model)?;
        let mut counts = Vec::with_capacity((design.scans * design.shots_per_phase) as usize);
        for scan in 0..design.scans {
            let mut r = rng::stream(seed, &[1, scan as u64, i as u64]);
            counts.extend((0..design.shots_per_phase).map(|_| sampler.sample(&mut r)));
        }
        parity_counts.push(counts);
    }
    Ok(ExperimentData {
        phases: design.phases.clone(),
        population_counts,
        parity_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationMethod {
    /// Weighted-Poissonian mixture fit.
    Poissonian,
    /// Threshold binning.
    Threshold,
    /// Threshold binning, then the model's misclassification matrix inverted.
    ThresholdUnmixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpamCorrection {
    pub epsilon: f64,
    pub convention: SpamConvention,
}

/// Fidelity estimator: population assignment, then
/// (P↑↑ + P↓↓)/2 + A/2, then optional SPAM correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub method: PopulationMethod,
    pub model: HistogramModel,
    pub thresholds: (u32, u32),
    pub spam: Option<SpamCorrection>,
}

impl Estimator {
    pub fn poissonian(model: HistogramModel) -> Result<Self> {
        Ok(Estimator {
            method: PopulationMethod::Poissonian,
            model,
            thresholds: optimal_thresholds(&model)?,
            spam: None,
        })
    }

    /// Threshold binning at the model's optimal thresholds.
    pub fn threshold(model: HistogramModel) -> Result<Self> {
        Ok(Estimator {
            method: PopulationMethod::Threshold,
            ..Estimator::poissonian(model)?
        })
    }

    /// Threshold binning with misclassification between bins undone.
    pub fn threshold_unmixed(model: HistogramModel) -> Result<Self> {
        Ok(Estimator {
            method: PopulationMethod::ThresholdUnmixed,
            ..Estimator::poissonian(model)?
        })
    }

    pub fn with_spam(mut self, epsilon: f64, convention: SpamConvention) -> Self {
        self.spam = Some(SpamCorrection { epsilon, convention });
        self
    }

    pub fn estimate_method(&self) -> EstimateMethod {
        match self.method {
            PopulationMethod::Poissonian => EstimateMethod::Poissonian,
            PopulationMethod::Threshold | PopulationMethod::ThresholdUnmixed => EstimateMethod::Threshold,
        }
    }
}

struct Prepared<'a> {
    est: &'a Estimator,
    table: Option<MixtureTable>,
    unmix: Option<Matrix3<f64>>,
}

impl<'a> Prepared<'a> {
    fn new(est: &'a Estimator, max_count: u32) -> Result<Self> {
        let table = match est.method {
            PopulationMethod::Poissonian => Some(MixtureTable::new(&est.model, max_count)?),
            _ => None,
        };
        let unmix = match est.method {
            PopulationMethod::ThresholdUnmixed => {
                let m = misclassification_matrix(&est.model, est.thresholds)?;
                let m = Matrix3::from_fn(|r, c| m[r][c]);
                Some(m.try_inverse().ok_or_else(|| {
                    GateError::IllConditioned("misclassification matrix is singular".into())
                })?)
            }
            _ => None,
        };
        Ok(Prepared { est, table, unmix })
    }

    fn assign(&self, occ: &[u64]) -> Result<[f64; 3]> {
        match &self.table {
            Some(t) => t.fit(occ),
            None => {
                let n: u64 = occ.iter().sum();
                if n == 0 {
                    return Err(GateError::invalid("histogram", "no shots"));
                }
                let mut k = [0u64; 3];
                for (c, &o) in occ.iter().enumerate() {
                    k[bin_of(c as u32, self.est.thresholds)] += o;
                }
                let bins = k.map(|v| v as f64 / n as f64);
                Ok(match &self.unmix {
                    Some(inv) => {
                        let p = inv * Vector3::from(bins);
                        [p[0], p[1], p[2]]
                    }
                    None => bins,
                })
            }
        }
    }

    fn fidelity(&self, pop_occ: &[u64], phases: &[f64], parity_occ: &[Vec<u64>]) -> Result<f64> {
        let p = self.assign(pop_occ)?;
        let parity = parity_occ
            .iter()
            .map(|o| {
                let q = self.assign(o)?;
                Ok((q[0] + q[2] - q[1]).clamp(-1.0, 1.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        let fit = fit_parity(&ParityScan::new(phases.to_vec(), parity, 0)?)?;
        let raw = fidelity_from_parity(p[2], p[0], fit.amplitude);
        match self.est.spam {
            Some(s) => spam_correct(raw, s.epsilon, s.convention),
            None => Ok(raw.clamp(0.0, 1.0)),
        }
    }
}

fn fill(occ: &mut Vec<u64>, counts: impl Iterator<Item = u32>) {
    occ.iter_mut().for_each(|v| *v = 0);
    for c in counts {
        let c = c as usize;
        if c >= occ.len() {
            occ.resize(c + 1, 0);
        }
        occ[c] += 1;
    }
}

fn check_data(data: &ExperimentData) -> Result<()> {
    if data.parity_counts.len() != data.phases.len() {
        return Err(GateError::invalid("experiment data", "one count record per phase required"));
    }
    if data.population_counts.is_empty() || data.parity_counts.iter().any(|c| c.is_empty()) {
        return Err(GateError::invalid("experiment data", "empty count record"));
    }
    Ok(())
}

/// Point estimate on the full data.
pub fn estimate(data: &ExperimentData, estimator: &Estimator) -> Result<f64> {
    check_data(data)?;
    let prepared = Prepared::new(estimator, data.max_count())?;
    let mut pop = Vec::new();
    fill(&mut pop, data.population_counts.iter().copied());
    let parity: Vec<Vec<u64>> = data
        .parity_counts
        .iter()
        .map(|c| {
            let mut o = Vec::new();
            fill(&mut o, c.iter().copied());
            o
        })
        .collect();
    prepared.fidelity(&pop, &data.phases, &parity)
}

pub const MIN_RESAMPLES: usize = 100;

/// Bootstrap over shots: the population record and each phase of the parity
/// scans are resampled with replacement, independently. The estimate is the
/// mean of the bootstrap distribution with its 16th–84th percentile interval.
pub fn bootstrap(
    data: &ExperimentData,
    estimator: &Estimator,
    resamples: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    check_data(data)?;
    if resamples < MIN_RESAMPLES {
        return Err(GateError::invalid("resamples", format!("need at least {MIN_RESAMPLES}")));
    }
    let prepared = Prepared::new(estimator, data.max_count())?;
    let draw = |r: &mut rand_chacha::ChaCha8Rng, src: &[u32], occ: &mut Vec<u64>| {
        let n = src.len();
        fill(occ, (0..n).map(|_| src[r.random_range(0..n)]));
    };
    let values = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[i as u64]);
            let mut pop = Vec::new();
            draw(&mut r, &data.population_counts, &mut pop);
            let parity: Vec<Vec<u64>> = data
                .parity_counts
                .iter()
                .map(|c| {
                    let mut o = Vec::new();
                    draw(&mut r, c, &mut o);
                    o
                })
                .collect();
            prepared.fidelity(&pop, &data.phases, &parity)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(sorted[0], sorted[sorted.len() - 1]);
    let lo = percentile(&sorted, 0.16).min(mean);
    let hi = percentile(&sorted, 0.84).max(mean);
    Ok(FidelityEstimate {
        mean,
        ci68: [lo, hi],
        method: estimator.estimate_method(),
        spam_corrected: estimator.spam.is_some(),
        spam_convention: estimator.spam.map(|s| s.convention),
        epsilon_spam: estimator.spam.map(|s| s.epsilon),
        resamples,
        seed: Some(seed),
    })
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}
