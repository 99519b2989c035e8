// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{FidelityEstimate, EstimateMethod};
use crate::error::{GateError, Result};

/// Parity measured after a common π/2 analysis pulse at each phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityScan {
    pub phases: Vec<f64>,
    pub parity: Vec<f64>,
    pub shots_per_phase: u32,
}

impl ParityScan {
    pub fn new(phases: Vec<f64>, parity: Vec<f64>, shots_per_phase: u32) -> Result<Self> {
        if phases.len() != parity.len() {
            return Err(GateError::invalid("parity scan", "phases and parity differ in length"));
        }
        if parity.iter().any(|p| !(p.abs() <= 1.0 + 1e-9)) {
            return Err(GateError::invalid("parity scan", "parity outside [-1, 1]"));
        }
        Ok(ParityScan {
            phases,
            parity,
            shots_per_phase,
        })
    }

    /// CSV with header `phase_rad,parity,shots`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("phase_rad,parity,shots\n");
        for (phi, p) in self.phases.iter().zip(&self.parity) {
            let _ = writeln!(s, "{phi},{p},{}", self.shots_per_phase);
        }
        s
    }
}

/// Least-squares fit of parity(φ) = A·cos(2φ + φ₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    /// A ≥ 0.
    pub amplitude: f64,
    /// φ₀ in (−π, π].
    pub phase_offset: f64,
    /// Standard error of A from the fit residuals; 0 for fewer than three
    /// points or an exact fit.
    pub amplitude_stderr: f64,
}

pub fn fit_parity(scan: &ParityScan) -> Result<ParityFit> {
    if scan.phases.len() != scan.parity.len() {
        return Err(GateError::invalid("parity scan", "phases and parity differ in length"));
    }
    let mut distinct = scan.phases.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(GateError::Fit(format!("need at least 4 distinct phases, got {}", distinct.len())));
    }
    // A cos(2φ + φ₀) = a cos 2φ + b sin 2φ with a = A cos φ₀, b = −A sin φ₀.
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&phi, &y) in scan.phases.iter().zip(&scan.parity) {
        let (s, c) = (2.0 * phi).sin_cos();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += y * c;
        sys += y * s;
    }
    let det = scc * sss - scs * scs;
    let scale = 0.25 * (scc + sss) * (scc + sss);
    if det <= 1e-12 * scale {
        return Err(GateError::Fit("phases are degenerate modulo π; design is rank-deficient".into()));
    }
    let a = (sss * syc - scs * sys) / det;
    let b = (scc * sys - scs * syc) / det;
    let amplitude = a.hypot(b);
    let phase_offset = if amplitude == 0.0 { 0.0 } else { (-b).atan2(a) };

    let n = scan.phases.len();
    let mut amplitude_stderr = 0.0;
    if n > 2 && amplitude > 0.0 {
        let rss: f64 = scan
            .phases
            .iter()
            .zip(&scan.parity)
            .map(|(&phi, &y)| {
                let (s, c) = (2.0 * phi).sin_cos();
                (y - a * c - b * s).powi(2)
            })
            .sum();
        let s2 = rss / (n - 2) as f64;
        let (vaa, vbb, vab) = (s2 * sss / det, s2 * scc / det, -s2 * scs / det);
        let var = (a * a * vaa + b * b * vbb + 2.0 * a * b * vab) / (amplitude * amplitude);
        amplitude_stderr = var.max(0.0).sqrt();
    }
    Ok(ParityFit {
        amplitude,
        phase_offset,
        amplitude_stderr,
    })
}

/// Bell-state fidelity from the |↑↑⟩ and |↓↓⟩ populations and the parity
/// contrast: (P↑↑ + P↓↓)/2 + A/2.
pub fn fidelity_from_parity(p_uu: f64, p_dd: f64, parity_amplitude: f64) -> f64 {
    (p_uu + p_dd) / 2.0 + parity_amplitude / 2.0
}

/// Fidelity from given populations and a parity scan, with a one-standard-error
/// interval from the amplitude fit.
pub fn fidelity_from_scan(p_uu: f64, p_dd: f64, scan: &ParityScan) -> Result<FidelityEstimate> {
    let fit = fit_parity(scan)?;
    let mean = fidelity_from_parity(p_uu, p_dd, fit.amplitude).clamp(0.0, 1.0);
    let half = fit.amplitude_stderr / 2.0;
    Ok(FidelityEstimate {
        mean,
        ci68: [(mean - half).max(0.0), (mean + half).min(1.0)],
        method: EstimateMethod::ParityCombined,
        spam_corrected: false,
        spam_convention: None,
        epsilon_spam: None,
        resamples: 0,
        seed: None,
    })
}

/// Linear SPAM model relating a true probability vector to the measured one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpamConvention {
    /// measured = (1 − ε)·true + ε/n for an n-outcome vector, so a fidelity
    /// (n = 2) is pulled towards 1/2.
    #[default]
    Symmetric,
    /// measured = (1 − ε)·true.
    DivideOnly,
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(GateError::invalid("epsilon_spam", "must lie in [0, 1)"));
    }
    Ok(())
}

/// Inverts the SPAM map for each entry of an n-outcome probability vector,
/// clipping to [0, 1].
pub fn spam_correct_vec(raw: &[f64], epsilon: f64, convention: SpamConvention) -> Result<Vec<f64>> {
    check_eps(epsilon)?;
    let floor = match convention {
        SpamConvention::Symmetric => epsilon / raw.len() as f64,
        SpamConvention::DivideOnly => 0.0,
    };
    Ok(raw.iter().map(|&p| ((p - floor) / (1.0 - epsilon)).clamp(0.0, 1.0)).collect())
}

pub fn spam_forward_vec(truth: &[f64], epsilon: f64, convention: SpamConvention) -> Result<Vec<f64>> {
    check_eps(epsilon)?;
    let floor = match convention {
        SpamConvention::Symmetric => epsilon / truth.len() as f64,
        SpamConvention::DivideOnly => 0.0,
    };
    Ok(truth.iter().map(|&p| (1.0 - epsilon) * p + floor).collect())
}

/// SPAM-corrected fidelity; symmetric form (F − ε/2)/(1 − ε), divide-only
/// F/(1 − ε), clipped to [0, 1].
pub fn spam_correct(raw: f64, epsilon: f64, convention: SpamConvention) -> Result<f64> {
    Ok(spam_correct_vec(&[raw, 1.0 - raw], epsilon, convention)?[0])
}

pub fn spam_forward(truth: f64, epsilon: f64, convention: SpamConvention) -> Result<f64> {
    Ok(spam_forward_vec(&[truth, 1.0 - truth], epsilon, convention)?[0])
}
