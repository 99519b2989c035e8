// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use msgate::dynamics::{
    analytic_populations, analytic_state, fock_propagate, fock_propagate_with, FockOptions, PopulationRecord,
};
use msgate::noise::{ordering_violations, sweep, sweep_csv, SweepMethod};
use msgate::rng::derive_seed;
use msgate::solver::{verify_closure, SolutionRecord};
use msgate::tomography::{
    bootstrap, calibrate_model, fit_parity, optimal_thresholds, simulate_counts, simulate_experiment,
    spam_forward_state, CountHistogram, Estimator, ExperimentDesign, FidelityEstimate, HistogramModel, ParityFit,
    PopulationMethod,
};
use msgate::trajectory::sample_trajectory;
use msgate::Solution;
use serde::Serialize;

use crate::config::{NoiseMethodChoice, PropagatorChoice, RunConfig};
use crate::{Artifact, Assertion, CliError, Report};

/// Closure tolerance used by `solve`.
pub const CLOSURE_TOL: f64 = 1e-8;

/// Largest drift allowed between rows recorded after the pulse has ended.
const FROZEN_TOL: f64 = 1e-12;

fn require_seed(cfg: &RunConfig, what: &str) -> Result<u64, CliError> {
    cfg.seed
        .ok_or_else(|| CliError::Config(format!("{what} is stochastic and needs a seed (`seed` or --seed)")))
}

fn seeds_of(cfg: &RunConfig) -> BTreeMap<String, u64> {
    cfg.seed.into_iter().map(|s| ("seed".to_string(), s)).collect()
}

fn json(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut records = Vec::new();
    let mut assertions = Vec::new();
    for sol in cfg.solutions()? {
        let c = verify_closure(&sol, CLOSURE_TOL)?;
        assertions.push(Assertion::new(
            format!("closure {}", sol.label()),
            c.passed,
            format!(
                "|F|={:.3e} |G|={:.3e} ||A|-pi/2|={:.3e} tol={:.0e}",
                c.f_residual,
                c.g_residual,
                c.phase_residual.abs(),
                c.tol
            ),
        ));
        records.push(SolutionRecord::new(&sol, c));
    }
    Ok(Report {
        artifacts: vec![Artifact {
            file: "solve.json".into(),
            contents: json(&records)?,
            assertions,
        }],
        seeds: seeds_of(cfg),
    })
}

pub fn trajectory(cfg: &RunConfig) -> Result<Report, CliError> {
    let tol = cfg.trajectory.closure_tol;
    let mut artifacts = Vec::new();
    for sol in cfg.solutions()? {
        let traj = sample_trajectory(sol.envelope(), sol.delta(), cfg.trajectory.num_points)?;
        let end = traj.point(traj.len() - 1);
        artifacts.push(Artifact {
            file: format!("trajectory_{}.csv", sol.label()),
            contents: traj.to_csv(),
            assertions: vec![Assertion::new(
                format!("trajectory closes {}", sol.label()),
                end.f.abs() <= tol && end.g.abs() <= tol,
                format!("final (F,G)=({:.3e},{:.3e}) tol={tol:.0e}", end.f, end.g),
            )],
        });
    }
    Ok(Report {
        artifacts,
        seeds: seeds_of(cfg),
    })
}

fn evolve_times(cfg: &RunConfig, tau: f64) -> Vec<f64> {
    let n = cfg.evolve.num_points;
    if n == 1 {
        return vec![0.0];
    }
    let t_max = cfg.evolve.t_max_over_tau * tau;
    (0..n)
        .map(|i| if i == n - 1 { t_max } else { t_max * i as f64 / (n - 1) as f64 })
        .collect()
}

fn evolve_one(cfg: &RunConfig, sol: &Solution, times: &[f64]) -> Result<PopulationRecord, CliError> {
    let thermal = cfg.thermal()?;
    let use_fock = match cfg.evolve.propagator {
        PropagatorChoice::Analytic => {
            if !cfg.errors.is_ideal() {
                return Err(CliError::Config(
                    "evolve.propagator = \"analytic\" only covers the error-free gate".into(),
                ));
            }
            false
        }
        PropagatorChoice::Fock => true,
        PropagatorChoice::Auto => !cfg.errors.is_ideal(),
    };
    if !use_fock {
        return Ok(analytic_populations(sol, &thermal, times)?);
    }
    let opts = FockOptions {
        record_times: times.to_vec(),
        ..FockOptions::default()
    };
    let out = fock_propagate_with(sol, &cfg.errors.model(), &thermal, &opts)?;
    out.record
        .ok_or_else(|| CliError::Config("propagator returned no population record".into()))
}

pub fn evolve(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut artifacts = Vec::new();
    for sol in cfg.solutions()? {
        let tau = sol.duration();
        let times = evolve_times(cfg, tau);
        let rec = evolve_one(cfg, &sol, &times)?;
        let label = sol.label();
        let mut assertions = Vec::new();

        if times[0] == 0.0 {
            let p = rec.row(0);
            let dev = (p[0] - 1.0).abs().max(p[1].abs()).max(p[2].abs());
            assertions.push(Assertion::new(
                format!("initial state {label}"),
                dev <= FROZEN_TOL,
                format!("row 0 = ({}, {}, {})", p[0], p[1], p[2]),
            ));
        }
        let after: Vec<usize> = (0..rec.len()).filter(|&i| times[i] >= tau).collect();
        if let Some(&first) = after.first() {
            let p0 = rec.row(first);
            let drift = after
                .iter()
                .map(|&i| {
                    let p = rec.row(i);
                    (0..3).map(|j| (p[j] - p0[j]).abs()).fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            assertions.push(Assertion::new(
                format!("frozen after pulse {label}"),
                drift <= FROZEN_TOL,
                format!("max drift {drift:.3e} over {} rows at t >= tau", after.len()),
            ));
            if cfg.errors.is_ideal() {
                let tol = cfg.evolve.final_tol;
                let dev = (p0[0] - 0.5).abs().max(p0[1].abs()).max((p0[2] - 0.5).abs());
                assertions.push(Assertion::new(
                    format!("final populations {label}"),
                    dev <= tol,
                    format!("(p0,p1,p2)=({:.9}, {:.3e}, {:.9}) tol={tol:.0e}", p0[0], p0[1], p0[2]),
                ));
            }
        }
        artifacts.push(Artifact {
            file: format!("evolve_{label}.csv"),
            contents: rec.to_csv(),
            assertions,
        });
    }
    Ok(Report {
        artifacts,
        seeds: seeds_of(cfg),
    })
}

pub fn noise_sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let sols = cfg.solutions()?;
    let n = &cfg.noise;
    let method = match n.method {
        NoiseMethodChoice::QuasiStatic => SweepMethod::QuasiStatic,
        NoiseMethodChoice::OrnsteinUhlenbeck => SweepMethod::OrnsteinUhlenbeck {
            corr_time_factor: n.corr_time_factor,
            samples: n.samples,
            seed: require_seed(cfg, "an Ornstein-Uhlenbeck sweep")?,
        },
    };
    let rows = sweep(&sols, &n.fwhm_hz, &method, &cfg.thermal()?)?;

    let mut assertions = Vec::new();
    for r in rows.iter().filter(|r| r.fwhm_hz == 0.0) {
        let dev = (1.0 - r.fidelity).abs();
        assertions.push(Assertion::new(
            format!("noiseless fidelity {}", r.scheme),
            dev <= n.zero_width_tol,
            format!("|1-F|={dev:.3e} tol={:.0e}", n.zero_width_tol),
        ));
    }
    if n.assert_ordering && sols.len() > 1 {
        let labels: Vec<String> = sols.iter().map(|s| s.label()).collect();
        let violations = ordering_violations(&rows, &labels);
        let detail = if violations.is_empty() {
            format!("infidelity increases along {}", labels.join(" < "))
        } else {
            violations.join("; ")
        };
        assertions.push(Assertion::new("robustness ordering", violations.is_empty(), detail));
    }
    Ok(Report {
        artifacts: vec![Artifact {
            file: "noise_sweep.csv".into(),
            contents: sweep_csv(&rows),
            assertions,
        }],
        seeds: seeds_of(cfg),
    })
}

#[derive(Serialize)]
struct ParitySummary<'a> {
    scheme: String,
    true_fidelity: f64,
    measured_fidelity: f64,
    model: HistogramModel,
    calibrated_model: HistogramModel,
    thresholds: (u32, u32),
    parity_fit: ParityFit,
    /// Population assignment behind each entry of `estimates`.
    population_methods: [PopulationMethod; 2],
    estimates: [&'a FidelityEstimate; 2],
}

pub fn parity(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = require_seed(cfg, "parity")?;
    let sols = cfg.solutions()?;
    let [sol] = sols.as_slice() else {
        return Err(CliError::Config(format!("parity needs exactly one scheme, got {}", sols.len())));
    };
    let p = &cfg.parity;
    let sign = sol.phase_sign();
    let thermal = cfg.thermal()?;
    let rho = if cfg.errors.is_ideal() {
        analytic_state(sol, &thermal, sol.duration())?
    } else {
        fock_propagate(sol, &cfg.errors.model(), &thermal)?.spin
    };
    let truth = rho.bell_fidelity(sign);
    let measured = spam_forward_state(&rho, p.epsilon_spam, p.spam_convention, sign)?;

    let model = HistogramModel::new(p.lambda_dark, p.lambda_bright)?.with_window(p.window_s);
    let design = ExperimentDesign::new(p.num_phases, p.shots_per_phase, p.scans, model);
    let data = simulate_experiment(&measured, &design, derive_seed(seed, &[1]))?;

    // Calibration references: both dark, ↑↓, ↓↑, both bright.
    let refs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .iter()
        .enumerate()
        .map(|(i, &pops)| simulate_counts(pops, &model, p.reference_shots, derive_seed(seed, &[2, i as u64])))
        .collect::<msgate::Result<Vec<CountHistogram>>>()?;
    let refs: [CountHistogram; 4] = refs.try_into().expect("four references");
    let calibrated = calibrate_model(&refs)?.with_window(p.window_s);

    let pois = Estimator::poissonian(calibrated)?.with_spam(p.epsilon_spam, p.spam_convention);
    let thr = Estimator::threshold_unmixed(calibrated)?.with_spam(p.epsilon_spam, p.spam_convention);
    let est_p = bootstrap(&data, &pois, p.resamples, derive_seed(seed, &[3]))?;
    let est_t = bootstrap(&data, &thr, p.resamples, derive_seed(seed, &[4]))?;
    let scan = data.parity_scan(&pois)?;
    let fit = fit_parity(&scan)?;

    let err = (est_p.mean - truth).abs();
    let accuracy = Assertion::new(
        "poissonian estimate matches truth",
        err <= p.fidelity_tol,
        format!("estimate {:.6} truth {truth:.6} |diff|={err:.2e} tol={}", est_p.mean, p.fidelity_tol),
    );
    let half = |e: &FidelityEstimate| 0.5 * (e.ci68[1] - e.ci68[0]);
    let combined = half(&est_p).hypot(half(&est_t));
    let diff = (est_p.mean - est_t.mean).abs();
    let agreement = Assertion::new(
        "threshold and poissonian agree",
        diff <= p.agreement_sigmas * combined,
        format!(
            "poissonian {:.6} threshold {:.6} |diff|={diff:.2e} limit {:.2e}",
            est_p.mean,
            est_t.mean,
            p.agreement_sigmas * combined
        ),
    );

    let summary = ParitySummary {
        scheme: sol.label(),
        true_fidelity: truth,
        measured_fidelity: measured.bell_fidelity(sign),
        model,
        calibrated_model: calibrated,
        thresholds: optimal_thresholds(&calibrated)?,
        parity_fit: fit,
        population_methods: [pois.method, thr.method],
        estimates: [&est_p, &est_t],
    };
    let mut seeds = seeds_of(cfg);
    seeds.insert("experiment".into(), derive_seed(seed, &[1]));
    seeds.insert("bootstrap_poissonian".into(), derive_seed(seed, &[3]));
    seeds.insert("bootstrap_threshold".into(), derive_seed(seed, &[4]));
    Ok(Report {
        artifacts: vec![
            Artifact {
                file: "parity_scan.csv".into(),
                contents: scan.to_csv(),
                assertions: Vec::new(),
            },
            Artifact {
                file: "population_histogram.csv".into(),
                contents: CountHistogram::from_counts(&data.population_counts).to_csv(),
                assertions: Vec::new(),
            },
            Artifact {
                file: "fidelity_estimate.json".into(),
                contents: json(&summary)?,
                assertions: vec![accuracy, agreement],
            },
        ],
        seeds,
    })
}
