// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Fluorescence-count statistics and Bell-state fidelity estimation.
//!
//! Populations are indexed by the number of bright ions, and an ion in |↑⟩
//! is bright, so `[p0, p1, p2]` lines up with
//! [`SpinDensity::populations`](crate::dynamics::SpinDensity::populations).

mod experiment;
mod parity;

pub use experiment::{
    bootstrap, estimate, simulate_experiment, spam_forward_state, EstimateMethod, Estimator,
    ExperimentData, ExperimentDesign, FidelityEstimate, PopulationMethod, SpamCorrection,
    DEFAULT_PHASES, MIN_RESAMPLES,
};
pub use parity::{
    fidelity_from_parity, fidelity_from_scan, fit_parity, spam_correct, spam_correct_vec,
    spam_forward, spam_forward_vec, ParityFit, ParityScan, SpamConvention,
};

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::rng;

pub const DEFAULT_LAMBDA_DARK: f64 = 2.0;
pub const DEFAULT_LAMBDA_BRIGHT: f64 = 30.0;
pub const DEFAULT_WINDOW_S: f64 = 400e-6;

/// Poisson count model of a two-ion detection window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    /// Mean counts per window from one dark ion.
    pub lambda_dark: f64,
    /// Mean counts per window from one bright ion.
    pub lambda_bright: f64,
    /// Detection window (s); metadata only.
    pub window: f64,
}

impl Default for HistogramModel {
    fn default() -> Self {
        HistogramModel {
            lambda_dark: DEFAULT_LAMBDA_DARK,
            lambda_bright: DEFAULT_LAMBDA_BRIGHT,
            window: DEFAULT_WINDOW_S,
        }
    }
}

impl HistogramModel {
    pub fn new(lambda_dark: f64, lambda_bright: f64) -> Result<Self> {
        let m = HistogramModel {
            lambda_dark,
            lambda_bright,
            window: DEFAULT_WINDOW_S,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_dark >= 0.0 && self.lambda_dark.is_finite() && self.lambda_bright.is_finite()) {
            return Err(GateError::invalid("lambda", "rates must be finite and non-negative"));
        }
        if self.lambda_bright <= self.lambda_dark {
            return Err(GateError::IllConditioned(format!(
                "bright rate {} does not exceed dark rate {}",
                self.lambda_bright, self.lambda_dark
            )));
        }
        Ok(())
    }

    /// Mean counts with 0, 1 and 2 ions bright.
    pub fn component_means(&self) -> [f64; 3] {
        [
            2.0 * self.lambda_dark,
            self.lambda_dark + self.lambda_bright,
            2.0 * self.lambda_bright,
        ]
    }

    /// Count above which every component's upper tail is negligible.
    fn count_ceiling(&self) -> u32 {
        let top = 2.0 * self.lambda_bright;
        (top + 12.0 * top.sqrt() + 20.0).ceil() as u32
    }
}

/// Occurrences of each photon count, indexed by count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub occurrences: Vec<u64>,
}

impl CountHistogram {
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut h = CountHistogram::default();
        for &c in counts {
            h.add(c);
        }
        h
    }

    pub fn add(&mut self, count: u32) {
        let c = count as usize;
        if c >= self.occurrences.len() {
            self.occurrences.resize(c + 1, 0);
        }
        self.occurrences[c] += 1;
    }

    pub fn total(&self) -> u64 {
        self.occurrences.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self
            .occurrences
            .iter()
            .enumerate()
            .map(|(c, &n)| c as f64 * n as f64)
            .sum();
        s / self.total() as f64
    }

    /// CSV with header `count,occurrences`, one row per count up to the largest seen.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("count,occurrences\n");
        for (c, n) in self.occurrences.iter().enumerate() {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("count,occurrences") {
            return Err(GateError::invalid("histogram csv", "expected header `count,occurrences`"));
        }
        let mut h = CountHistogram::default();
        for line in lines {
            let (c, n) = line
                .split_once(',')
                .ok_or_else(|| GateError::invalid("histogram csv", format!("bad row `{line}`")))?;
            let c: usize = c.trim().parse().map_err(|_| GateError::invalid("histogram csv", format!("bad count `{c}`")))?;
            let n: u64 = n.trim().parse().map_err(|_| GateError::invalid("histogram csv", format!("bad occurrences `{n}`")))?;
            if c >= h.occurrences.len() {
                h.occurrences.resize(c + 1, 0);
            }
            h.occurrences[c] += n;
        }
        Ok(h)
    }
}

fn check_populations(p: &[f64; 3]) -> Result<()> {
    if p.iter().any(|&x| !(x >= -1e-12 && x <= 1.0 + 1e-12)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GateError::invalid("populations", "must be probabilities summing to 1"));
    }
    Ok(())
}

/// Per-shot sampler: bright-ion number from the populations, then a Poisson count.
pub(crate) struct ShotSampler {
    cumulative: [f64; 2],
    poisson: [Option<Poisson<f64>>; 3],
}

impl ShotSampler {
    pub(crate) fn new(populations: &[f64; 3], model: &HistogramModel) -> Result<Self> {
        check_populations(populations)?;
        model.validate()?;
        let means = model.component_means();
        let make = |mu: f64| if mu > 0.0 { Poisson::new(mu).ok() } else { None };
        Ok(ShotSampler {
            cumulative: [populations[0], populations[0] + populations[1]],
            poisson: [make(means[0]), make(means[1]), make(means[2])],
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let j = if u < self.cumulative[0] {
            0
        } else if u < self.cumulative[1] {
            1
        } else {
            2
        };
        match &self.poisson[j] {
            Some(p) => p.sample(rng) as u32,
            None => 0,
        }
    }
}

/// Synthetic counts for `shots` repetitions of a state with bright-ion
/// populations `populations`.
pub fn simulate_counts(
    populations: [f64; 3],
    model: &HistogramModel,
    shots: usize,
    seed: u64,
) -> Result<CountHistogram> {
    let sampler = ShotSampler::new(&populations, model)?;
    let mut rng = rng::stream(seed, &[]);
    let mut h = CountHistogram::default();
    for _ in 0..shots {
        h.add(sampler.sample(&mut rng));
    }
    Ok(h)
}

/// Poisson pmf for counts 0..=cmax.
pub(crate) fn poisson_pmf(mu: f64, cmax: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(cmax as usize + 1);
    let mut log_fact = 0.0;
    for c in 0..=cmax {
        if c > 0 {
            log_fact += (c as f64).ln();
        }
        let v = if mu == 0.0 {
            if c == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (c as f64 * mu.ln() - mu - log_fact).exp()
        };
        out.push(v);
    }
    out
}

/// Component likelihoods per count, each row scaled to a maximum of 1.
pub(crate) struct MixtureTable {
    rows: Vec<[f64; 3]>,
}

impl MixtureTable {
    pub(crate) fn new(model: &HistogramModel, cmax: u32) -> Result<Self> {
        if model.lambda_bright == model.lambda_dark {
            return Err(GateError::IllConditioned(
                "bright and dark rates are equal; mixture weights are not identifiable".into(),
            ));
        }
        model.validate()?;
        let means = model.component_means();
        let mut rows = Vec::with_capacity(cmax as usize + 1);
        let mut log_fact = 0.0;
        for c in 0..=cmax {
            if c > 0 {
                log_fact += (c as f64).ln();
            }
            let lp = means.map(|mu| {
                if mu == 0.0 {
                    if c == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    c as f64 * mu.ln() - mu - log_fact
                }
            });
            let top = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            rows.push(lp.map(|v| (v - top).exp()));
        }
        Ok(MixtureTable { rows })
    }

    /// EM for the mixture weights of a histogram given as occurrences by count.
    pub(crate) fn fit(&self, occurrences: &[u64]) -> Result<[f64; 3]> {
        let n: u64 = occurrences.iter().sum();
        if n == 0 {
            return Err(GateError::invalid("histogram", "no shots"));
        }
        if occurrences.len() > self.rows.len() {
            return Err(GateError::invalid("histogram", "counts beyond the likelihood table"));
        }
        let bins: Vec<(usize, f64)> = occurrences
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(c, &k)| (c, k as f64))
            .collect();
        let inv_n = 1.0 / n as f64;
        let mut w = [1.0 / 3.0; 3];
        for _ in 0..EM_MAX_ITER {
            let mut next = [0.0; 3];
            for &(c, k) in &bins {
                let l = &self.rows[c];
                let a = [w[0] * l[0], w[1] * l[1], w[2] * l[2]];
                let s = a[0] + a[1] + a[2];
                let f = k / s;
                next[0] += a[0] * f;
                next[1] += a[1] * f;
                next[2] += a[2] * f;
            }
            let next = next.map(|v| v * inv_n);
            let change = (0..3).map(|j| (next[j] - w[j]).abs()).fold(0.0, f64::max);
            w = next;
            if change < EM_TOL {
                break;
            }
        }
        let s = w[0] + w[1] + w[2];
        Ok(w.map(|v| (v / s).clamp(0.0, 1.0)))
    }
}

const EM_MAX_ITER: usize = 20_000;
const EM_TOL: f64 = 1e-13;

/// Maximum-likelihood weights of the three-component Poisson mixture with
/// the model's fixed component means.
pub fn fit_poissonians(hist: &CountHistogram, model: &HistogramModel) -> Result<[f64; 3]> {
    let cmax = model.count_ceiling().max(hist.occurrences.len() as u32);
    MixtureTable::new(model, cmax)?.fit(&hist.occurrences)
}

/// Rates from reference histograms of the four prepared basis states, in the
/// order both dark, ↑↓, ↓↑, both bright. Joint Poisson maximum likelihood.
pub fn calibrate_model(references: &[CountHistogram; 4]) -> Result<HistogramModel> {
    // Mean of reference h is a[h]·λ_b + b[h]·λ_d.
    const A: [f64; 4] = [0.0, 1.0, 1.0, 2.0];
    const B: [f64; 4] = [2.0, 1.0, 1.0, 0.0];
    let mut shots = [0.0; 4];
    let mut sums = [0.0; 4];
    for (h, r) in references.iter().enumerate() {
        if r.is_empty() {
            return Err(GateError::Calibration(format!("reference histogram {h} is empty")));
        }
        shots[h] = r.total() as f64;
        sums[h] = r.mean() * shots[h];
    }
    let mut lb = sums[3] / (2.0 * shots[3]);
    let mut ld = sums[0] / (2.0 * shots[0]);
    if !(lb > 0.0) {
        return Err(GateError::Calibration("both-bright reference has no counts".into()));
    }
    // Multiplicative EM updates keep both rates non-negative and raise the
    // likelihood monotonically.
    let den_b: f64 = (0..4).map(|h| A[h] * shots[h]).sum();
    let den_d: f64 = (0..4).map(|h| B[h] * shots[h]).sum();
    for _ in 0..10_000 {
        let mu: Vec<f64> = (0..4).map(|h| A[h] * lb + B[h] * ld).collect();
        let ratio = |h: usize| if sums[h] == 0.0 { 0.0 } else { sums[h] / mu[h] };
        let nb = lb * (0..4).map(|h| A[h] * ratio(h)).sum::<f64>() / den_b;
        let nd = ld * (0..4).map(|h| B[h] * ratio(h)).sum::<f64>() / den_d;
        let change = ((nb - lb).abs() / lb).max((nd - ld).abs() / ld.max(1e-300));
        lb = nb;
        ld = nd;
        if change < 1e-14 {
            break;
        }
    }
    if lb <= ld * (1.0 + 1e-9) {
        return Err(GateError::Calibration(format!(
            "bright rate {lb} is not above dark rate {ld}"
        )));
    }
    Ok(HistogramModel {
        lambda_dark: ld,
        lambda_bright: lb,
        window: DEFAULT_WINDOW_S,
    })
}

/// Bin fractions from [`threshold_bin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBins {
    /// Fractions with count ≤ t1, t1 < count ≤ t2 and count > t2.
    pub populations: [f64; 3],
    /// All shots fell in one bin, e.g. thresholds outside the data range.
    pub single_bin: bool,
}

/// Threshold assignment: count ≤ t1 is zero ions bright, t1 < count ≤ t2 one,
/// count > t2 two.
pub fn threshold_bin(hist: &CountHistogram, thresholds: (u32, u32)) -> Result<ThresholdBins> {
    let (t1, t2) = thresholds;
    if t1 > t2 {
        return Err(GateError::invalid("thresholds", "need t1 ≤ t2"));
    }
    let n = hist.total();
    if n == 0 {
        return Err(GateError::invalid("histogram", "no shots"));
    }
    let mut k = [0u64; 3];
    for (c, &occ) in hist.occurrences.iter().enumerate() {
        k[bin_of(c as u32, thresholds)] += occ;
    }
    Ok(ThresholdBins {
        populations: k.map(|v| v as f64 / n as f64),
        single_bin: k.iter().filter(|&&v| v > 0).count() == 1,
    })
}

pub(crate) fn bin_of(count: u32, (t1, t2): (u32, u32)) -> usize {
    if count <= t1 {
        0
    } else if count <= t2 {
        1
    } else {
        2
    }
}

/// `m[bin][state]`: probability that a shot with `state` ions bright lands in `bin`.
pub fn misclassification_matrix(model: &HistogramModel, thresholds: (u32, u32)) -> Result<[[f64; 3]; 3]> {
    model.validate()?;
    let cmax = model.count_ceiling().max(thresholds.1 + 1);
    let mut m = [[0.0; 3]; 3];
    for (state, mu) in model.component_means().into_iter().enumerate() {
        let pmf = poisson_pmf(mu, cmax);
        let below_t1: f64 = pmf[..=thresholds.0 as usize].iter().sum();
        let below_t2: f64 = pmf[..=thresholds.1 as usize].iter().sum();
        m[0][state] = below_t1;
        m[1][state] = below_t2 - below_t1;
        m[2][state] = 1.0 - below_t2;
    }
    Ok(m)
}

/// Thresholds minimising the total misclassification probability with equal
/// priors, by exhaustive search over integer pairs t1 < t2.
pub fn optimal_thresholds(model: &HistogramModel) -> Result<(u32, u32)> {
    model.validate()?;
    let cmax = model.count_ceiling();
    let cdf: Vec<Vec<f64>> = model
        .component_means()
        .iter()
        .map(|&mu| {
            poisson_pmf(mu, cmax)
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let mut best = (0, 1);
    let mut best_err = f64::INFINITY;
    for t1 in 0..cmax {
        for t2 in t1 + 1..=cmax {
            let (a, b) = (t1 as usize, t2 as usize);
            let err = (1.0 - cdf[0][a]) + (cdf[1][a] + 1.0 - cdf[1][b]) + cdf[2][b];
            if err < best_err {
                best_err = err;
                best = (t1, t2);
            }
        }
    }
    Ok(best)
}
