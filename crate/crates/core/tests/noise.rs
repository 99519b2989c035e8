// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use msgate::dynamics::{static_detuning_fidelity, ErrorModel, ThermalSpec};
use msgate::noise::{
    normal_expectation, ordering_violations, ou_noise_mc, ou_noise_mc_stream, quasistatic_average,
    quasistatic_average_nodes, sweep, NoiseSpec, Propagator, SweepMethod,
};
use msgate::solver::{solve_sin2, solve_square, solve_walsh, GateSolution};

const OMEGA: f64 = 2.0 * PI * 1180.0;

fn fig_schemes() -> Vec<GateSolution<f64>> {
    vec![
        solve_sin2(OMEGA, 20).unwrap(),
        solve_walsh(OMEGA, 8, 7).unwrap(),
        solve_square(OMEGA, 8).unwrap(),
    ]
}

fn grid() -> Vec<f64> {
    (0..=10).map(|i| 100.0 * i as f64).collect()
}

#[test]
fn zero_width_is_ideal() {
    let th = ThermalSpec::new(0.4).unwrap();
    for sol in fig_schemes() {
        let f = quasistatic_average(&sol, &NoiseSpec::quasi_static(0.0), &th).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
    }
}

#[test]
fn node_count_converged_across_grid() {
    let th = ThermalSpec::new(0.4).unwrap();
    let sols = fig_schemes();
    for fwhm in grid() {
        let a = quasistatic_average_nodes(&sols[0], fwhm, &th, 32).unwrap();
        let b = quasistatic_average_nodes(&sols[0], fwhm, &th, 64).unwrap();
        assert!((a - b).abs() < 1e-8, "sin2 at {fwhm} Hz: {a} vs {b}");
    }
    // Square-edged gates have fidelity oscillating in ε and need more nodes.
    for sol in &sols {
        for fwhm in grid() {
            let a = quasistatic_average_nodes(sol, fwhm, &th, 128).unwrap();
            let b = quasistatic_average_nodes(sol, fwhm, &th, 256).unwrap();
            assert!((a - b).abs() < 1e-8, "{} at {fwhm} Hz: {a} vs {b}", sol.label());
        }
    }
    let sq = &sols[2];
    let a = quasistatic_average_nodes(sq, 1000.0, &th, 32).unwrap();
    let b = quasistatic_average_nodes(sq, 1000.0, &th, 64).unwrap();
    assert!((a - b).abs() > 1e-6);
}

#[test]
fn quadrature_matches_brute_force_average() {
    // Midpoint sum over ±8σ of the Gaussian density.
    let sol = solve_square(OMEGA, 8).unwrap();
    let th = ThermalSpec::new(0.4).unwrap();
    let fwhm = 700.0;
    let sigma = 2.0 * PI * fwhm / 2.354_820_045_030_949;
    let n = 4000;
    let h = 16.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let z = -8.0 + (i as f64 + 0.5) * h;
        let w = (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
        acc += w * h * static_detuning_fidelity(&sol, sigma * z, &th).unwrap();
    }
    let gh = quasistatic_average(&sol, &NoiseSpec::quasi_static(fwhm), &th).unwrap();
    assert!((gh - acc).abs() < 1e-9, "{gh} vs {acc}");
}

#[test]
fn robustness_ordering_and_monotonicity() {
    let th = ThermalSpec::new(0.4).unwrap();
    let sols = fig_schemes();
    let rows = sweep(&sols, &grid(), &SweepMethod::QuasiStatic, &th).unwrap();
    assert_eq!(rows.len(), 33);
    let names: Vec<String> = sols.iter().map(|s| s.label()).collect();
    assert_eq!(names, ["sin2_k20", "walsh_8_7", "square_8"]);
    let bad = ordering_violations(&rows, &names);
    assert!(bad.is_empty(), "{bad:?}");
    for chunk in rows.chunks(11) {
        assert!((1.0 - chunk[0].fidelity) < 1e-8);
        assert!(chunk.windows(2).all(|w| w[1].fidelity < w[0].fidelity));
    }
}

#[test]
fn sweep_cells_match_direct_calls() {
    let th = ThermalSpec::ground();
    let sols = vec![solve_sin2(OMEGA, 3).unwrap()];
    assert!(sweep(&sols, &[], &SweepMethod::QuasiStatic, &th).unwrap().is_empty());
    assert!(sweep(&[], &[100.0], &SweepMethod::QuasiStatic, &th).unwrap().is_empty());
    let rows = sweep(&sols, &[250.0], &SweepMethod::QuasiStatic, &th).unwrap();
    let direct = quasistatic_average(&sols[0], &NoiseSpec::quasi_static(250.0), &th).unwrap();
    assert_eq!(rows[0].fidelity, direct);
    assert_eq!(rows[0].stderr, 0.0);
}

#[test]
fn ou_without_noise_is_ideal() {
    let sol = solve_sin2(OMEGA, 5).unwrap();
    let spec = NoiseSpec::ornstein_uhlenbeck(0.0, None, 20, 1);
    let mc = ou_noise_mc(&sol, &spec, &ErrorModel::default(), &ThermalSpec::new(0.4).unwrap()).unwrap();
    assert!((mc.mean - 1.0).abs() < 1e-8);
    assert!(mc.std_error < 1e-10);
    assert_eq!(mc.samples, 20);
}

#[test]
fn slow_ou_noise_approaches_quasi_static() {
    let sol = solve_square(OMEGA, 8).unwrap();
    let th = ThermalSpec::new(0.4).unwrap();
    let fwhm = 600.0;
    let spec = NoiseSpec::ornstein_uhlenbeck(fwhm, Some(1000.0 * sol.duration()), 1000, 11);
    let mc = ou_noise_mc(&sol, &spec, &ErrorModel::default(), &th).unwrap();
    let qs = quasistatic_average(&sol, &NoiseSpec::quasi_static(fwhm), &th).unwrap();
    // Residual drift within the gate shifts the mean by O(τ/τ_c).
    assert!((mc.mean - qs).abs() < 2.0 * mc.std_error + 1e-3 * (1.0 - qs), "{mc:?} vs {qs}");
}

#[test]
fn ou_is_seeded_and_error_scales_as_root_n() {
    let sol = solve_sin2(OMEGA, 4).unwrap();
    let th = ThermalSpec::ground();
    let none = ErrorModel::default();
    let spec = |n, seed| NoiseSpec::ornstein_uhlenbeck(800.0, None, n, seed);
    let a = ou_noise_mc(&sol, &spec(100, 5), &none, &th).unwrap();
    let b = ou_noise_mc(&sol, &spec(100, 5), &none, &th).unwrap();
    let c = ou_noise_mc(&sol, &spec(100, 6), &none, &th).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    assert_ne!(a.mean, c.mean);
    let big = ou_noise_mc(&sol, &spec(1600, 5), &none, &th).unwrap();
    let ratio = a.std_error / big.std_error;
    assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn fock_route_agrees_with_analytic_route() {
    let sol = solve_sin2(OMEGA, 2).unwrap();
    let th = ThermalSpec::ground();
    let spec = NoiseSpec::ornstein_uhlenbeck(900.0, Some(0.3 * sol.duration()), 3, 21);
    let none = ErrorModel::default();
    let an = ou_noise_mc_stream(&sol, &spec, &none, &th, Propagator::Analytic, &[4]).unwrap();
    let fo = ou_noise_mc_stream(&sol, &spec, &none, &th, Propagator::Fock, &[4]).unwrap();
    assert!((an.mean - fo.mean).abs() < 1e-6, "{an:?} vs {fo:?}");
    assert!(an.mean < 1.0 - 1e-6);
}

#[test]
fn analytic_route_rejects_fock_only_errors() {
    let sol = solve_sin2(OMEGA, 2).unwrap();
    let spec = NoiseSpec::ornstein_uhlenbeck(100.0, None, 2, 0);
    let heating = ErrorModel {
        heating_rate: 10.0,
        ..Default::default()
    };
    let r = ou_noise_mc_stream(&sol, &spec, &heating, &ThermalSpec::ground(), Propagator::Analytic, &[]);
    assert!(r.is_err());
    assert!(quasistatic_average(&sol, &spec, &ThermalSpec::ground()).is_err());
    assert!(ou_noise_mc(&sol, &NoiseSpec::quasi_static(1.0), &ErrorModel::default(), &ThermalSpec::ground()).is_err());
    assert!(NoiseSpec::quasi_static(-1.0).validate().is_err());
}

#[test]
fn sweep_is_thread_count_independent() {
    let sols = vec![solve_sin2(OMEGA, 3).unwrap(), solve_square(OMEGA, 3).unwrap()];
    let method = SweepMethod::OrnsteinUhlenbeck {
        corr_time_factor: 2.0,
        samples: 16,
        seed: 99,
    };
    let th = ThermalSpec::ground();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&sols, &[0.0, 300.0, 600.0], &method, &th).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert!(one[1].stderr > 0.0);
}

#[test]
fn gaussian_expectation_of_a_fidelity_like_function() {
    // E[exp(−a z²)] = 1/√(1 + 2a)
    let a = 0.37;
    let v = normal_expectation(|z| Ok((-a * z * z).exp()), 64).unwrap();
    assert!((v - 1.0 / (1.0 + 2.0 * a).sqrt()).abs() < 1e-13);
}
