// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use msgate::envelopes::{FnProfile, PulseEnvelope};
use msgate::solver::{sin2_detuning, solve_sin2, solve_square};
use msgate::trajectory::{
    fga_closed_form, fga_quadrature, sample_trajectory, PhaseSpacePoint, Tolerance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OMEGA: f64 = 2.0 * PI * 1180.0;

fn tight() -> Tolerance<f64> {
    Tolerance { fg: 1e-12, a: 1e-11 }
}

fn close(a: PhaseSpacePoint<f64>, b: PhaseSpacePoint<f64>, tol: f64) -> bool {
    (a.f - b.f).abs() < tol && (a.g - b.g).abs() < tol && (a.a - b.a).abs() < tol
}

/// Nested integral for A by brute force: trapezoid on a fine grid.
fn brute_force(profile: impl Fn(f64) -> f64, delta: f64, t: f64, n: usize) -> PhaseSpacePoint<f64> {
    let h = t / n as f64;
    let mut p = PhaseSpacePoint::origin();
    let mut prev = (profile(0.0), 0.0f64);
    for i in 1..=n {
        let s = i as f64 * h;
        let cur = (profile(s), s);
        let fc = |(om, s): (f64, f64)| om * (delta * s).cos();
        let fs = |(om, s): (f64, f64)| om * (delta * s).sin();
        let f_prev = p.f;
        let d_f = -SQRT_2 * 0.5 * h * (fc(prev) + fc(cur));
        p.g += -SQRT_2 * 0.5 * h * (fs(prev) + fs(cur));
        p.f += d_f;
        p.a += SQRT_2 * 0.5 * h * (f_prev * fs(prev) + p.f * fs(cur));
        prev = cur;
    }
    p
}

#[test]
fn origin_at_time_zero() {
    let env = PulseEnvelope::sin2(OMEGA, 1e-3).unwrap();
    let p = fga_quadrature(&env, 3e4, 0.0, Tolerance::default()).unwrap();
    assert_eq!(p, PhaseSpacePoint::origin());
}

#[test]
fn square_quadrature_matches_antiderivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tau = 3e-3;
    let env = PulseEnvelope::square(OMEGA, tau).unwrap();
    for _ in 0..20 {
        let delta = 2.0 * PI * rng.random_range(500.0..20e3);
        let t = rng.random_range(0.0..tau);
        let p = fga_quadrature(&env, delta, t, Tolerance::default()).unwrap();
        let f = -SQRT_2 * OMEGA * (delta * t).sin() / delta;
        let g = SQRT_2 * OMEGA * ((delta * t).cos() - 1.0) / delta;
        assert!((p.f - f).abs() < 1e-10, "F at δ={delta} t={t}");
        assert!((p.g - g).abs() < 1e-10, "G at δ={delta} t={t}");
    }
}

#[test]
fn square_loops_close_with_expected_area() {
    for loops in 1..=10u32 {
        let delta = 2.0 * PI * 4e3;
        let tau = 2.0 * PI * loops as f64 / delta;
        let env = PulseEnvelope::square(OMEGA, tau).unwrap();
        let p = fga_quadrature(&env, delta, tau, tight()).unwrap();
        let a = -2.0 * PI * loops as f64 * OMEGA * OMEGA / (delta * delta);
        assert!(p.f.abs() < 1e-10 && p.g.abs() < 1e-10);
        assert!((p.a - a).abs() < 1e-9, "K={loops}: {} vs {a}", p.a);
    }
}

#[test]
fn quadrature_matches_brute_force_nested_integral() {
    let tau = 2.2e-3;
    let delta = 2.0 * PI * 3.1e3;
    let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
    let t = 0.77 * tau;
    let q = fga_quadrature(&env, delta, t, tight()).unwrap();
    let b = brute_force(|s| OMEGA * (PI * s / tau).sin().powi(2), delta, t, 400_000);
    assert!(close(q, b, 1e-8), "{q:?} vs {b:?}");
}

#[test]
fn sin2_area_formula_for_selected_orders() {
    let tau = 2.5e-3;
    let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
    for k in [1u32, 2, 17, 20] {
        let kk = 2.0 * (k + 1) as f64;
        let bracket = 1.0 / (4.0 * kk) + 1.0 / (16.0 * (kk - 2.0)) + 1.0 / (16.0 * (kk + 2.0));
        let expected = -(OMEGA * OMEGA * tau * tau / PI) * bracket;
        let delta = sin2_detuning(k, tau);
        let q = fga_quadrature(&env, delta, tau, tight()).unwrap();
        let c = fga_closed_form(&env, delta, tau).unwrap();
        assert!((q.a - expected).abs() < 1e-9, "k={k}: quad {} vs {expected}", q.a);
        assert!((c.a - expected).abs() < 1e-9, "k={k}: closed {} vs {expected}", c.a);
    }
}

#[test]
fn sin2_closes_for_first_25_orders() {
    let tau = 2.9e-3;
    let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
    for k in 1..=25u32 {
        let p = fga_quadrature(&env, sin2_detuning(k, tau), tau, Tolerance::default()).unwrap();
        assert!(p.f.abs() < 1e-9 && p.g.abs() < 1e-9, "k={k}: {p:?}");
    }
}

#[test]
fn k17_gate_at_published_duration() {
    // At the published τ the loop closes exactly; |A| is off π/2 only by the
    // rounding of τ and Ω_MS, i.e. by (2938/τ₁₇)² − 1.
    let tau = 2938e-6;
    let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
    let p = fga_quadrature(&env, 2.0 * PI * 18.0 / tau, tau, tight()).unwrap();
    assert!(p.f.abs() < 1e-9 && p.g.abs() < 1e-9);
    assert!(p.a < 0.0);
    assert!((p.a.abs() / FRAC_PI_2 - 1.0).abs() < 5e-3);

    let sol = solve_sin2(OMEGA, 17).unwrap();
    let p = fga_quadrature(sol.envelope(), sol.delta(), sol.duration(), tight()).unwrap();
    assert!(close(p, PhaseSpacePoint { f: 0.0, g: 0.0, a: -FRAC_PI_2 }, 1e-6), "{p:?}");
}

#[test]
fn scaling_in_rabi_frequency() {
    let tau = 1.9e-3;
    let delta = 2.0 * PI * 5.5e3;
    let t = 0.61 * tau;
    for env in [
        PulseEnvelope::sin2(OMEGA, tau).unwrap(),
        PulseEnvelope::square(OMEGA, tau).unwrap(),
        PulseEnvelope::walsh(OMEGA, tau, 5).unwrap(),
    ] {
        let p1 = fga_quadrature(&env, delta, t, tight()).unwrap();
        let p2 = fga_quadrature(&env.with_omega(2.0 * OMEGA).unwrap(), delta, t, tight()).unwrap();
        assert!((p2.f - 2.0 * p1.f).abs() < 1e-10);
        assert!((p2.g - 2.0 * p1.g).abs() < 1e-10);
        assert!((p2.a - 4.0 * p1.a).abs() < 1e-9);
    }
}

#[test]
fn sin2_endpoint_is_stationary() {
    let sol = solve_sin2(OMEGA, 17).unwrap();
    let tau = sol.duration();
    let env = sol.envelope();
    let h = tau * 1e-5;
    let deriv = |t: f64| {
        let a = fga_closed_form(env, sol.delta(), t - h).unwrap();
        let b = fga_closed_form(env, sol.delta(), t + h).unwrap();
        [(b.f - a.f) / (2.0 * h), (b.g - a.g) / (2.0 * h), (b.a - a.a) / (2.0 * h)]
    };
    let mid = (0..200)
        .map(|i| deriv(tau * (0.25 + 0.5 * i as f64 / 199.0)))
        .fold([0.0f64; 3], |m, d| [m[0].max(d[0].abs()), m[1].max(d[1].abs()), m[2].max(d[2].abs())]);
    // One-sided difference at τ (the envelope is zero beyond it).
    let a = fga_closed_form(env, sol.delta(), tau - h).unwrap();
    let b = fga_closed_form(env, sol.delta(), tau).unwrap();
    let end = [(b.f - a.f) / h, (b.g - a.g) / h, (b.a - a.a) / h];
    for i in 0..3 {
        assert!(end[i].abs() < 1e-6 * mid[i], "component {i}: {} vs {}", end[i], mid[i]);
    }
}

#[test]
fn square_single_loop_traces_a_circle() {
    let sol = solve_square(OMEGA, 1).unwrap();
    let r = SQRT_2 * OMEGA / sol.delta();
    let traj = sample_trajectory(sol.envelope(), sol.delta(), 257).unwrap();
    let worst = (0..traj.len())
        .map(|i| (((traj.g[i] + r).powi(2) + traj.f[i].powi(2)).sqrt() - r).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn sin2_k1_stays_closer_to_origin_than_square() {
    let sin2 = solve_sin2(OMEGA, 1).unwrap();
    let square = solve_square(OMEGA, 1).unwrap();
    let max_radius = |t: &msgate::trajectory::Trajectory<f64>| {
        (0..t.len()).map(|i| t.point(i).radius()).fold(0.0, f64::max)
    };
    let a = sample_trajectory(sin2.envelope(), sin2.delta(), 2001).unwrap();
    let b = sample_trajectory(square.envelope(), square.delta(), 2001).unwrap();
    assert!(max_radius(&a) < max_radius(&b));
}

#[test]
fn two_point_trajectory_ends_at_origin() {
    let sol = solve_sin2(OMEGA, 4).unwrap();
    let traj = sample_trajectory(sol.envelope(), sol.delta(), 2).unwrap();
    assert_eq!(traj.len(), 2);
    assert_eq!(traj.times, vec![0.0, sol.duration()]);
    assert!(traj.point(1).radius() < 1e-9);
    assert!(sample_trajectory(sol.envelope(), sol.delta(), 1).is_err());
    let csv = traj.to_csv();
    assert!(csv.starts_with("t,F,G,A\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn callable_profile_matches_envelope() {
    let tau = 1.5e-3;
    let delta = 2.0 * PI * 7e3;
    let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
    let custom = FnProfile::new(move |t: f64| OMEGA * (PI * t / tau).sin().powi(2), tau);
    let a = fga_quadrature(&env, delta, tau, tight()).unwrap();
    let b = fga_quadrature(&custom, delta, tau, tight()).unwrap();
    assert!(close(a, b, 1e-10));
}

#[test]
fn single_precision_path() {
    let sol = solve_sin2(OMEGA as f32, 3).unwrap();
    let p = fga_quadrature(sol.envelope(), sol.delta(), sol.duration(), Tolerance::default())
        .unwrap();
    assert!(p.f.abs() < 1e-3 && p.g.abs() < 1e-3);
    assert!((p.a.abs() - std::f32::consts::FRAC_PI_2).abs() < 1e-3);
}

fn check_oracle(env: &PulseEnvelope<f64>, delta: f64, t: f64) -> Result<(), TestCaseError> {
    let q = fga_quadrature(env, delta, t, tight()).unwrap();
    let c = fga_closed_form(env, delta, t).unwrap();
    prop_assert!(close(q, c, 1e-9), "quadrature {:?} vs closed form {:?}", q, c);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_matches_quadrature_square(
        tau in 0.3e-3..4e-3f64, df in 0.3e3..15e3f64, frac in 0.0..1.0f64,
    ) {
        let env = PulseEnvelope::square(OMEGA, tau).unwrap();
        check_oracle(&env, 2.0 * PI * df, frac * tau)?;
    }

    #[test]
    fn closed_form_matches_quadrature_sin2(
        tau in 0.3e-3..4e-3f64, k in 1u32..30, offset in -0.4..0.4f64, frac in 0.0..1.0f64,
    ) {
        let env = PulseEnvelope::sin2(OMEGA, tau).unwrap();
        // Detunings around the gate orders, not only on them.
        let delta = 2.0 * PI * ((k + 1) as f64 + offset) / tau;
        check_oracle(&env, delta, frac * tau)?;
    }

    #[test]
    fn closed_form_matches_quadrature_walsh(
        tau in 0.5e-3..4e-3f64, index in 0u32..16, df in 2e3..15e3f64, frac in 0.0..1.0f64,
    ) {
        let env = PulseEnvelope::walsh(OMEGA, tau, index).unwrap();
        check_oracle(&env, 2.0 * PI * df, frac * tau)?;
    }
}
