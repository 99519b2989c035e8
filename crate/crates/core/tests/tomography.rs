// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use msgate::dynamics::{analytic_state, bell_target, SpinDensity, ThermalSpec};
use msgate::rng;
use msgate::solver::solve_sin2;
use msgate::tomography::*;
use msgate::GateError;
use proptest::prelude::*;
use rand::Rng;

const OMEGA: f64 = 2.0 * PI * 1180.0;

fn model() -> HistogramModel {
    HistogramModel::default()
}

/// P(X ≤ k) for X ~ Poisson(mu), summed directly.
fn poisson_cdf(mu: f64, k: u32) -> f64 {
    let mut term = (-mu).exp();
    let mut acc = term;
    for i in 1..=k {
        term *= mu / i as f64;
        acc += term;
    }
    acc
}

fn multinomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn simulated_count_means() {
    let m = HistogramModel::new(1.0, 30.0).unwrap();
    let n = 100_000;
    let dark = simulate_counts([1.0, 0.0, 0.0], &m, n, 1).unwrap();
    let bright = simulate_counts([0.0, 0.0, 1.0], &m, n, 2).unwrap();
    assert_eq!(dark.total(), n as u64);
    assert!((dark.mean() - 2.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    assert!((bright.mean() - 60.0).abs() < 4.0 * (60.0 / n as f64).sqrt());
    assert_eq!(simulate_counts([0.3, 0.3, 0.4], &m, 500, 9).unwrap(), simulate_counts([0.3, 0.3, 0.4], &m, 500, 9).unwrap());
    assert!(simulate_counts([0.5, 0.0, 0.4], &m, 10, 0).is_err());
}

#[test]
fn poissonian_fit_examples() {
    let h = simulate_counts([1.0, 0.0, 0.0], &model(), 10_000, 3).unwrap();
    assert!(fit_poissonians(&h, &model()).unwrap()[0] >= 0.99);

    let h = simulate_counts([0.5, 0.0, 0.5], &model(), 10_000, 4).unwrap();
    let p = fit_poissonians(&h, &model()).unwrap();
    for (est, truth) in p.iter().zip([0.5, 0.0, 0.5]) {
        assert!((est - truth).abs() < 0.02, "{p:?}");
    }
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let h = CountHistogram::from_counts(&vec![4; 1000]);
    assert!(fit_poissonians(&h, &model()).unwrap()[0] > 0.999);

    let flat = HistogramModel {
        lambda_dark: 5.0,
        lambda_bright: 5.0,
        window: 400e-6,
    };
    assert!(matches!(fit_poissonians(&h, &flat), Err(GateError::IllConditioned(_))));
    assert!(fit_poissonians(&CountHistogram::default(), &model()).is_err());
}

#[test]
fn estimators_are_consistent() {
    let truth = [0.3, 0.45, 0.25];
    let mut rms = Vec::new();
    for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let mut sq = 0.0;
        for rep in 0..6 {
            let h = simulate_counts(truth, &model(), n, 100 * i as u64 + rep).unwrap();
            let p = fit_poissonians(&h, &model()).unwrap();
            for j in 0..3 {
                sq += (p[j] - truth[j]).powi(2);
                if n == 100_000 {
                    assert!((p[j] - truth[j]).abs() < 3.0 * multinomial_se(truth[j], n), "{p:?}");
                }
            }
        }
        rms.push((sq / 18.0).sqrt());
    }
    assert!(rms[0] > rms[1] && rms[1] > rms[2], "{rms:?}");
}

#[test]
fn threshold_bins_converge_to_misclassified_populations() {
    // Overlapping Poissons leak between bins: bins estimate M·p, not p.
    let t = optimal_thresholds(&model()).unwrap();
    let m = misclassification_matrix(&model(), t).unwrap();
    let truth = [0.49, 0.02, 0.49];
    let expected: Vec<f64> = (0..3).map(|b| (0..3).map(|s| m[b][s] * truth[s]).sum()).collect();
    let n = 100_000;
    let h = simulate_counts(truth, &model(), n, 77).unwrap();
    let bins = threshold_bin(&h, t).unwrap().populations;
    for b in 0..3 {
        assert!((bins[b] - expected[b]).abs() < 3.0 * multinomial_se(expected[b], n), "{bins:?} vs {expected:?}");
    }
    // The leak out of the two-bright bin is several standard errors at 1e5 shots.
    assert!(truth[2] - expected[2] > 5.0 * multinomial_se(truth[2], n));

    let mut rms = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        let mut sq = 0.0;
        for rep in 0..6 {
            let h = simulate_counts(truth, &model(), n, 1000 + n as u64 + rep).unwrap();
            let bins = threshold_bin(&h, t).unwrap().populations;
            sq += (0..3).map(|b| (bins[b] - expected[b]).powi(2)).sum::<f64>();
        }
        rms.push(sq.sqrt());
    }
    assert!(rms[0] > rms[1] && rms[1] > rms[2], "{rms:?}");
}

#[test]
fn unmixed_thresholds_recover_populations() {
    let est = Estimator::threshold_unmixed(model()).unwrap();
    let truth = [0.49, 0.02, 0.49];
    let n = 100_000;
    let h = simulate_counts(truth, &model(), n, 78).unwrap();
    let m = misclassification_matrix(&model(), est.thresholds).unwrap();
    let bins = threshold_bin(&h, est.thresholds).unwrap().populations;
    // Solve M p = bins by Cramer's rule as an independent check.
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    for j in 0..3 {
        let mut mj = m;
        for r in 0..3 {
            mj[r][j] = bins[r];
        }
        let p = det(mj) / d;
        assert!((p - truth[j]).abs() < 3.5 * multinomial_se(truth[j], n), "{j}: {p}");
    }
}

#[test]
fn threshold_examples() {
    // Both dark gives Poisson(2λ_d) = Poisson(4); its mass at ≤ 8 is 0.9786.
    let h = simulate_counts([1.0, 0.0, 0.0], &model(), 100_000, 5).unwrap();
    let bins = threshold_bin(&h, (8, 22)).unwrap();
    let exact = poisson_cdf(4.0, 8);
    assert!((exact - 0.978_636).abs() < 1e-6);
    assert!((bins.populations[0] - exact).abs() < 3.0 * multinomial_se(exact, 100_000));

    let mid = threshold_bin(&h, (15, 15)).unwrap();
    assert_eq!(mid.populations[1], 0.0);

    let bell = simulate_counts([0.5, 0.0, 0.5], &model(), 10_000, 6).unwrap();
    let t = optimal_thresholds(&model()).unwrap();
    let p = threshold_bin(&bell, t).unwrap().populations;
    for (est, truth) in p.iter().zip([0.5, 0.0, 0.5]) {
        assert!((est - truth).abs() < 0.02, "{p:?}");
    }

    let outside = threshold_bin(&bell, (1000, 2000)).unwrap();
    assert!(outside.single_bin);
    assert_eq!(outside.populations, [1.0, 0.0, 0.0]);
    assert!(threshold_bin(&bell, (20, 10)).is_err());
}

fn references(m: &HistogramModel, seed: u64) -> [CountHistogram; 4] {
    let states = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut i = 0;
    states.map(|p| {
        i += 1;
        simulate_counts(p, m, 20_000, seed + i).unwrap()
    })
}

#[test]
fn calibration_round_trip() {
    let refs = references(&model(), 10);
    let fitted = calibrate_model(&refs).unwrap();
    assert!((fitted.lambda_dark / 2.0 - 1.0).abs() < 0.02, "{fitted:?}");
    assert!((fitted.lambda_bright / 30.0 - 1.0).abs() < 0.02, "{fitted:?}");

    // Stationarity of the joint Poisson likelihood.
    let shots: Vec<f64> = refs.iter().map(|h| h.total() as f64).collect();
    let sums: Vec<f64> = refs.iter().map(|h| h.mean() * h.total() as f64).collect();
    let (a, b) = ([0.0, 1.0, 1.0, 2.0], [2.0, 1.0, 1.0, 0.0]);
    let mu = |h: usize| a[h] * fitted.lambda_bright + b[h] * fitted.lambda_dark;
    let gb: f64 = (0..4).map(|h| a[h] * (sums[h] / mu(h) - shots[h])).sum();
    let gd: f64 = (0..4).map(|h| b[h] * (sums[h] / mu(h) - shots[h])).sum();
    assert!(gb.abs() < 1e-6 && gd.abs() < 1e-6, "{gb} {gd}");
}

#[test]
fn calibration_ignores_shot_order_and_rejects_inverted_references() {
    let mut r = rng::stream(5, &[]);
    let counts: Vec<u32> = (0..5000).map(|_| r.random_range(0..70)).collect();
    let mut reversed = counts.clone();
    reversed.reverse();
    assert_eq!(CountHistogram::from_counts(&counts), CountHistogram::from_counts(&reversed));

    let refs = references(&model(), 20);
    let mut shuffled = refs.clone();
    shuffled[0] = CountHistogram::from_counts(&{
        let mut c: Vec<u32> = refs[0]
            .occurrences
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k as u32, n as usize))
            .collect();
        c.reverse();
        c
    });
    assert_eq!(calibrate_model(&refs).unwrap(), calibrate_model(&shuffled).unwrap());

    let same = [refs[0].clone(), refs[0].clone(), refs[0].clone(), refs[0].clone()];
    assert!(matches!(calibrate_model(&same), Err(GateError::Calibration(_))));
    let inverted = [refs[3].clone(), refs[1].clone(), refs[2].clone(), refs[0].clone()];
    assert!(matches!(calibrate_model(&inverted), Err(GateError::Calibration(_))));
}

#[test]
fn finite_shot_parity_fit() {
    let mut r = rng::stream(42, &[]);
    let phases: Vec<f64> = (0..24).map(|i| i as f64 * PI / 12.0).collect();
    let shots = 600;
    let parity: Vec<f64> = phases
        .iter()
        .map(|phi| {
            let p_even = (1.0 + 0.99 * (2.0 * phi).cos()) / 2.0;
            let even = (0..shots).filter(|_| r.random::<f64>() < p_even).count();
            2.0 * even as f64 / shots as f64 - 1.0
        })
        .collect();
    let fit = fit_parity(&ParityScan::new(phases, parity, shots).unwrap()).unwrap();
    assert!(fit.amplitude_stderr > 0.0);
    assert!((fit.amplitude - 0.99).abs() < 3.0 * fit.amplitude_stderr, "{fit:?}");
}

#[test]
fn ideal_gate_parity_has_unit_contrast() {
    let sol = solve_sin2(OMEGA, 17).unwrap();
    let rho = analytic_state(&sol, &ThermalSpec::new(0.4).unwrap(), sol.duration()).unwrap();
    let phases: Vec<f64> = (0..8).map(|i| i as f64 * PI / 8.0).collect();
    let parity: Vec<f64> = phases.iter().map(|&phi| rho.parity_after_analysis(phi)).collect();
    let fit = fit_parity(&ParityScan::new(phases.clone(), parity.clone(), 1).unwrap()).unwrap();
    assert!((fit.amplitude - 1.0).abs() < 1e-9);
    for (phi, p) in phases.iter().zip(&parity) {
        assert!((p - (2.0 * phi + fit.phase_offset).cos()).abs() < 1e-9);
    }
}

#[test]
fn fidelity_formula_examples() {
    assert_eq!(fidelity_from_parity(0.5, 0.5, 1.0), 1.0);
    assert_eq!(fidelity_from_parity(0.5, 0.5, 0.0), 0.5);
    assert!((fidelity_from_parity(0.497, 0.498, 0.995) - 0.995).abs() < 1e-15);
}

proptest! {
    #[test]
    fn fidelity_formula_is_monotone(
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..0.5
    ) {
        let f = fidelity_from_parity(a, b, c);
        prop_assert!(fidelity_from_parity((a + d).min(1.0), b, c) >= f);
        prop_assert!(fidelity_from_parity(a, (b + d).min(1.0), c) >= f);
        prop_assert!(fidelity_from_parity(a, b, (c + d).min(1.0)) >= f);
    }

    #[test]
    fn spam_round_trip(f in 0.0f64..1.0, eps in 0.0f64..0.5) {
        for conv in [SpamConvention::Symmetric, SpamConvention::DivideOnly] {
            let back = spam_correct(spam_forward(f, eps, conv).unwrap(), eps, conv).unwrap();
            prop_assert!((back - f).abs() < 1e-12);
        }
    }
}

fn bell_with_error(f_target: f64) -> SpinDensity {
    let bell = SpinDensity::pure(&bell_target(-1));
    spam_forward_state(&bell, 2.0 * (1.0 - f_target), SpamConvention::Symmetric, -1).unwrap()
}

#[test]
fn bootstrap_contracts() {
    let data = ExperimentData {
        phases: (0..6).map(|i| i as f64 * 0.5).collect(),
        population_counts: vec![0; 50],
        parity_counts: vec![vec![0; 20]; 6],
    };
    let est = Estimator::threshold(model()).unwrap();
    let b = bootstrap(&data, &est, 100, 1).unwrap();
    assert_eq!(b.ci68[0], b.ci68[1]);
    assert!(bootstrap(&data, &est, 99, 1).is_err());

    let rho = bell_with_error(0.995);
    let design = ExperimentDesign::new(20, 100, 2, model());
    let data = simulate_experiment(&rho, &design, 3).unwrap();
    assert_eq!(data, simulate_experiment(&rho, &design, 3).unwrap());
    let est = Estimator::poissonian(model()).unwrap();
    let a = bootstrap(&data, &est, 150, 8).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap(&data, &est, 150, 8).unwrap())
    };
    assert_eq!(a, run(1));
    assert_eq!(a, run(3));
    assert_ne!(a, bootstrap(&data, &est, 150, 9).unwrap());
    assert!(a.ci68[0] <= a.mean && a.mean <= a.ci68[1]);
    assert_eq!(a.method, EstimateMethod::Poissonian);
    assert_eq!(a.seed, Some(8));
}

#[test]
fn end_to_end_pipeline_recovers_fidelity() {
    let rho = bell_with_error(0.995);
    assert!((rho.bell_fidelity(-1) - 0.995).abs() < 1e-12);
    let data = simulate_experiment(&rho, &ExperimentDesign::default(), 2024).unwrap();
    let b = bootstrap(&data, &Estimator::poissonian(model()).unwrap(), 1000, 1).unwrap();
    assert!((b.mean - 0.995).abs() < 0.005, "{b:?}");
    assert!(b.ci68[1] - b.ci68[0] < 0.01);
}

#[test]
fn spam_forwarded_state_is_corrected() {
    let sol = solve_sin2(OMEGA, 17).unwrap();
    let ideal = analytic_state(&sol, &ThermalSpec::new(0.4).unwrap(), sol.duration()).unwrap();
    let raw = spam_forward_state(&ideal, 0.015, SpamConvention::Symmetric, sol.phase_sign()).unwrap();
    let f_raw = raw.bell_fidelity(sol.phase_sign());
    assert!((f_raw - spam_forward(1.0, 0.015, SpamConvention::Symmetric).unwrap()).abs() < 1e-8);
    let data = simulate_experiment(&raw, &ExperimentDesign::default(), 6).unwrap();
    let est = Estimator::poissonian(model()).unwrap().with_spam(0.015, SpamConvention::Symmetric);
    let f = estimate(&data, &est).unwrap();
    assert!((f - 1.0).abs() < 0.005, "{f}");
}

#[test]
fn scan_from_data_and_combined_estimate() {
    let rho = bell_with_error(0.99);
    let data = simulate_experiment(&rho, &ExperimentDesign::new(16, 300, 2, model()), 12).unwrap();
    let scan = data.parity_scan(&Estimator::poissonian(model()).unwrap()).unwrap();
    assert_eq!(scan.shots_per_phase, 600);
    assert!(scan.to_csv().starts_with("phase_rad,parity,shots\n0,"));
    let est = fidelity_from_scan(0.5, 0.5, &scan).unwrap();
    assert_eq!(est.method, EstimateMethod::ParityCombined);
    assert!(est.ci68[0] <= est.mean && est.mean <= est.ci68[1]);
    assert!((est.mean - 0.99).abs() < 0.02);
}

#[test]
fn bootstrap_interval_coverage() {
    let rho = bell_with_error(0.995);
    let design = ExperimentDesign::default();
    let est = Estimator::poissonian(model()).unwrap();
    let trials = 200;
    let hits = (0..trials)
        .filter(|&i| {
            let data = simulate_experiment(&rho, &design, rng::derive_seed(500, &[i])).unwrap();
            bootstrap(&data, &est, 200, i).unwrap().contains(0.995)
        })
        .count();
    let coverage = hits as f64 / trials as f64;
    assert!((coverage - 0.68).abs() <= 0.07, "coverage {coverage}");
}
