// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Mode-frequency noise: quasi-static Gaussian offsets averaged by
//! Gauss–Hermite quadrature, and Ornstein–Uhlenbeck trajectories sampled by
//! Monte Carlo.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    fock_propagate_with, ground_state, spin_density_from_fga, static_detuning_fidelity,
    ErrorModel, FockOptions, ThermalSpec,
};
use crate::error::{GateError, Result};
use crate::rng;
use crate::solver::GateSolution;
use crate::trajectory::{fga_path_with_phase, Tolerance};

/// Gaussian FWHM in units of σ, 2√(2 ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    QuasiStatic,
    OrnsteinUhlenbeck,
}

/// How each Monte Carlo sample is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagator {
    /// Exact (F, G, A) along the noisy drive phase; valid whenever the error
    /// model has no Zeeman shift and no heating.
    Analytic,
    Fock,
    /// Analytic when valid, otherwise Fock.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// FWHM of the mode-frequency distribution (Hz).
    pub fwhm_hz: f64,
    /// OU correlation time (s); defaults to 10τ of the gate it is applied to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr_time: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn quasi_static(fwhm_hz: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::QuasiStatic,
            fwhm_hz,
            corr_time: None,
            samples: 1,
            seed: 0,
        }
    }

    pub fn ornstein_uhlenbeck(fwhm_hz: f64, corr_time: Option<f64>, samples: usize, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::OrnsteinUhlenbeck,
            fwhm_hz,
            corr_time,
            samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_hz >= 0.0 && self.fwhm_hz.is_finite()) {
            return Err(GateError::invalid("fwhm_hz", "must be finite and non-negative"));
        }
        if self.samples == 0 {
            return Err(GateError::invalid("samples", "need at least one sample"));
        }
        if let Some(tc) = self.corr_time {
            if !(tc > 0.0) {
                return Err(GateError::invalid("corr_time", "must be positive"));
            }
        }
        Ok(())
    }

    /// σ of the mode-frequency offset in rad/s.
    pub fn sigma_rad(&self) -> f64 {
        2.0 * PI * fwhm_to_sigma(self.fwhm_hz)
    }
}

/// Nodes and weights for ∫e^{−x²} f(x) dx. Nodes are eigenvalues of the
/// Jacobi matrix, polished by Newton on the normalized Hermite recurrence,
/// which also gives the weights. Nodes descend.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(GateError::invalid("n", "need at least one node"));
    }
    let jacobi = DMatrix::from_fn(n, n, |r, c| {
        if r.abs_diff(c) == 1 {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut d: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    d.sort_by(|a, b| b.total_cmp(a));

    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = if n % 2 == 1 && i == n / 2 { 0.0 } else { d[i] };
        let mut pp = 0.0;
        for _ in 0..4 {
            let (mut p1, mut p2) = (pim4, 0.0f64);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            if !step.is_finite() {
                break;
            }
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = if pp.is_finite() { 2.0 / (pp * pp) } else { 0.0 };
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// E[f(Z)] for Z ~ N(0, 1) with an n-node rule.
pub fn normal_expectation<F: Fn(f64) -> Result<f64>>(f: F, n: usize) -> Result<f64> {
    let (x, w) = gauss_hermite(n)?;
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        acc += wi * f(std::f64::consts::SQRT_2 * xi)?;
    }
    Ok(acc / PI.sqrt())
}

/// Quasi-static average with a fixed node count; σ given as FWHM in Hz.
pub fn quasistatic_average_nodes(
    sol: &GateSolution<f64>,
    fwhm_hz: f64,
    thermal: &ThermalSpec,
    nodes: usize,
) -> Result<f64> {
    let sigma = 2.0 * PI * fwhm_to_sigma(fwhm_hz);
    if sigma == 0.0 {
        return static_detuning_fidelity(sol, 0.0, thermal);
    }
    normal_expectation(|z| static_detuning_fidelity(sol, sigma * z, thermal), nodes)
}

/// Node counts tried in turn by [`quasistatic_average`].
const NODE_LADDER: [usize; 6] = [16, 32, 64, 128, 256, 512];
const QUASISTATIC_TOL: f64 = 1e-9;

/// Mean Bell fidelity over a static Gaussian mode-frequency offset. Node
/// count doubles until the result moves by less than 1e-9.
pub fn quasistatic_average(
    sol: &GateSolution<f64>,
    noise: &NoiseSpec,
    thermal: &ThermalSpec,
) -> Result<f64> {
    noise.validate()?;
    if noise.kind != NoiseKind::QuasiStatic {
        return Err(GateError::invalid("noise.kind", "expected quasi_static"));
    }
    let mut prev = quasistatic_average_nodes(sol, noise.fwhm_hz, thermal, NODE_LADDER[0])?;
    for &n in &NODE_LADDER[1..] {
        let next = quasistatic_average_nodes(sol, noise.fwhm_hz, thermal, n)?;
        if (next - prev).abs() < QUASISTATIC_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(GateError::NumericFailure {
        context: "Gauss-Hermite average did not converge",
        achieved: prev,
        requested: QUASISTATIC_TOL,
    })
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McSummary {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        McSummary {
            mean,
            std_error,
            samples: n,
        }
    }
}

/// Cells per gate of the piecewise-constant OU path.
const OU_CELLS: usize = 256;

/// One stationary OU path sampled exactly on `cells` equal cells over [0, τ];
/// returns the cell values (rad/s).
pub fn ou_path<R: Rng + ?Sized>(rng: &mut R, sigma: f64, corr_time: f64, tau: f64, cells: usize) -> Vec<f64> {
    let decay = (-(tau / cells as f64) / corr_time).exp();
    let kick = sigma * (1.0 - decay * decay).sqrt();
    let mut x = sigma * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(cells);
    for _ in 0..cells {
        out.push(x);
        x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Monte Carlo over OU mode-frequency trajectories ε(t). `errors` adds on top
/// (its static detuning shifts every path). Samples use the exact analytic
/// propagator unless the error model needs the Fock oracle.
pub fn ou_noise_mc(
    sol: &GateSolution<f64>,
    noise: &NoiseSpec,
    errors: &ErrorModel,
    thermal: &ThermalSpec,
) -> Result<McSummary> {
    ou_noise_mc_stream(sol, noise, errors, thermal, Propagator::Auto, &[])
}

/// As [`ou_noise_mc`], with samples drawn from the sub-stream `path` of the seed.
pub fn ou_noise_mc_stream(
    sol: &GateSolution<f64>,
    noise: &NoiseSpec,
    errors: &ErrorModel,
    thermal: &ThermalSpec,
    propagator: Propagator,
    path: &[u64],
) -> Result<McSummary> {
    noise.validate()?;
    errors.validate()?;
    if noise.kind != NoiseKind::OrnsteinUhlenbeck {
        return Err(GateError::invalid("noise.kind", "expected ornstein_uhlenbeck"));
    }
    let tau = sol.duration();
    let corr_time = noise.corr_time.unwrap_or(10.0 * tau);
    let sigma = noise.sigma_rad();
    let use_fock = match propagator {
        Propagator::Fock => true,
        Propagator::Analytic => {
            if errors.has_zeeman() || errors.heating_rate > 0.0 {
                return Err(GateError::invalid(
                    "propagator",
                    "the analytic route has no Zeeman or heating terms",
                ));
            }
            false
        }
        Propagator::Auto => errors.has_zeeman() || errors.heating_rate > 0.0,
    };
    let cell = tau / OU_CELLS as f64;
    let edges: Vec<f64> = (1..OU_CELLS).map(|i| i as f64 * cell).collect();
    let values: Vec<Result<f64>> = (0..noise.samples)
        .into_par_iter()
        .map(|i| {
            let mut sub = path.to_vec();
            sub.push(i as u64);
            let mut rng = rng::stream(noise.seed, &sub);
            let eps = ou_path(&mut rng, sigma, corr_time, tau, OU_CELLS);
            // θ(t) = (δ + ε_static)t + ∫ε, with cumulative phase at cell edges.
            let mut cumulative = Vec::with_capacity(OU_CELLS + 1);
            cumulative.push(0.0);
            for e in &eps {
                cumulative.push(cumulative.last().unwrap() + e * cell);
            }
            let base = sol.delta() + errors.static_detuning;
            let phase = move |t: f64| {
                let j = ((t / cell) as usize).min(OU_CELLS - 1);
                base * t + cumulative[j] + eps[j] * (t - j as f64 * cell)
            };
            if use_fock {
                let bound = eps_bound(sigma) + base.abs();
                let opts = FockOptions {
                    phase: Some(&phase),
                    phase_breakpoints: edges.clone(),
                    phase_rate_bound: Some(bound),
                    ..Default::default()
                };
                Ok(fock_propagate_with(sol, errors, thermal, &opts)?.bell_fidelity)
            } else {
                let p = fga_path_with_phase(sol.envelope(), &phase, &[tau], &edges, Tolerance::default())?[0];
                Ok(spin_density_from_fga(p, thermal.nbar, &ground_state()).bell_fidelity(sol.phase_sign()))
            }
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(McSummary::from_values(&values))
}

fn eps_bound(sigma: f64) -> f64 {
    6.0 * sigma
}

/// Averaging used by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SweepMethod {
    QuasiStatic,
    OrnsteinUhlenbeck {
        /// Correlation time in units of each gate's τ.
        corr_time_factor: f64,
        samples: usize,
        seed: u64,
    },
}

/// One (scheme, FWHM) cell of a robustness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: String,
    pub fwhm_hz: f64,
    pub fidelity: f64,
    pub stderr: f64,
}

/// Every scheme at every FWHM, rows ordered scheme-major.
pub fn sweep(
    sols: &[GateSolution<f64>],
    fwhm_grid: &[f64],
    method: &SweepMethod,
    thermal: &ThermalSpec,
) -> Result<Vec<SweepRow>> {
    let cells: Vec<(usize, usize)> = (0..sols.len())
        .flat_map(|s| (0..fwhm_grid.len()).map(move |f| (s, f)))
        .collect();
    let rows: Vec<Result<SweepRow>> = cells
        .par_iter()
        .map(|&(s, f)| {
            let sol = &sols[s];
            let fwhm = fwhm_grid[f];
            let (fidelity, stderr) = match *method {
                SweepMethod::QuasiStatic => {
                    (quasistatic_average(sol, &NoiseSpec::quasi_static(fwhm), thermal)?, 0.0)
                }
                SweepMethod::OrnsteinUhlenbeck {
                    corr_time_factor,
                    samples,
                    seed,
                } => {
                    let spec = NoiseSpec::ornstein_uhlenbeck(
                        fwhm,
                        Some(corr_time_factor * sol.duration()),
                        samples,
                        seed,
                    );
                    let mc = ou_noise_mc_stream(
                        sol,
                        &spec,
                        &ErrorModel::default(),
                        thermal,
                        Propagator::Analytic,
                        &[s as u64, f as u64],
                    )?;
                    (mc.mean, mc.std_error)
                }
            };
            Ok(SweepRow {
                scheme: sol.label(),
                fwhm_hz: fwhm,
                fidelity,
                stderr,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// CSV with header `scheme,fwhm_hz,fidelity,stderr`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("scheme,fwhm_hz,fidelity,stderr\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.scheme, r.fwhm_hz, r.fidelity, r.stderr);
    }
    s
}

/// Grid points (FWHM > 0) where infidelity does not strictly increase along
/// `schemes`, as human-readable messages.
pub fn ordering_violations(rows: &[SweepRow], schemes: &[String]) -> Vec<String> {
    let mut grid: Vec<f64> = rows.iter().map(|r| r.fwhm_hz).filter(|&f| f > 0.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut out = Vec::new();
    for f in grid {
        let infid: Vec<Option<f64>> = schemes
            .iter()
            .map(|s| {
                rows.iter()
                    .find(|r| &r.scheme == s && r.fwhm_hz == f)
                    .map(|r| 1.0 - r.fidelity)
            })
            .collect();
        for (i, pair) in infid.windows(2).enumerate() {
            match (pair[0], pair[1]) {
                (Some(a), Some(b)) if a < b => {}
                (Some(a), Some(b)) => out.push(format!(
                    "fwhm {f} Hz: infidelity {} = {a:.4e} is not below {} = {b:.4e}",
                    schemes[i],
                    schemes[i + 1]
                )),
                _ => out.push(format!(
                    "fwhm {f} Hz: missing row for {} or {}",
                    schemes[i],
                    schemes[i + 1]
                )),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwhm_conversion() {
        assert_eq!(fwhm_to_sigma(0.0), 0.0);
        assert!((fwhm_to_sigma(2.0 * (2.0 * 2f64.ln()).sqrt()) - 1.0).abs() < 1e-15);
        assert!((fwhm_to_sigma(100.0) - 42.466).abs() < 1e-3);
    }

    #[test]
    fn hermite_rule_moments() {
        for n in [1, 2, 5, 16, 64, 200, 256, 512] {
            let (x, w) = gauss_hermite(n).unwrap();
            let total: f64 = w.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "n={n}: {total}");
            assert!(x.windows(2).all(|p| p[0] > p[1]));
        }
        let m2 = normal_expectation(|z| Ok(z * z), 8).unwrap();
        let m4 = normal_expectation(|z| Ok(z.powi(4)), 8).unwrap();
        let m6 = normal_expectation(|z| Ok(z.powi(6)), 8).unwrap();
        assert!((m2 - 1.0).abs() < 1e-13 && (m4 - 3.0).abs() < 1e-12 && (m6 - 15.0).abs() < 1e-11);
        let c = normal_expectation(|z| Ok((2.5 * z).cos()), 64).unwrap();
        assert!((c - (-2.5f64 * 2.5 / 2.0).exp()).abs() < 1e-13);
    }

    #[test]
    fn ou_path_statistics() {
        let mut rng = rng::stream(3, &[]);
        let (sigma, tc, tau) = (2.0, 1.0, 4.0);
        let mut lag1 = 0.0;
        let mut var = 0.0;
        let reps = 4000;
        for _ in 0..reps {
            let p = ou_path(&mut rng, sigma, tc, tau, 8);
            var += p.iter().map(|v| v * v).sum::<f64>() / 8.0;
            lag1 += p.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / 7.0;
        }
        var /= reps as f64;
        lag1 /= reps as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "{var}");
        let expected = sigma * sigma * (-0.5f64).exp();
        assert!((lag1 / expected - 1.0).abs() < 0.06, "{lag1} vs {expected}");
    }

    #[test]
    fn ordering_report() {
        let row = |s: &str, f: f64, fid: f64| SweepRow {
            scheme: s.into(),
            fwhm_hz: f,
            fidelity: fid,
            stderr: 0.0,
        };
        let rows = vec![
            row("a", 0.0, 1.0),
            row("a", 100.0, 0.99),
            row("b", 0.0, 1.0),
            row("b", 100.0, 0.98),
        ];
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(ordering_violations(&rows, &names).is_empty());
        let swapped = vec!["b".to_string(), "a".to_string()];
        assert_eq!(ordering_violations(&rows, &swapped).len(), 1);
        assert!(sweep_csv(&rows).starts_with("scheme,fwhm_hz,fidelity,stderr\na,0,1,0\n"));
    }
}
