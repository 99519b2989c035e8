// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Analytic F, G, A for piecewise-constant envelopes (square, Walsh) and for
//! even powers sin^{2p}(mπt/τ), which are finite cosine series.

use std::f64::consts::SQRT_2;

use crate::envelopes::{PulseEnvelope, Shape};
use crate::error::{GateError, Result};
use crate::scalar::{sinc, Real};

use super::PhaseSpacePoint;

/// Smallest |ν|·τ for which the closed forms are evaluated; closer to a
/// resonance the divided differences lose too many digits.
const RESONANCE_GUARD: f64 = 1e-3;

pub fn fga_closed_form<T: Real>(
    env: &PulseEnvelope<T>,
    delta: T,
    t: T,
) -> Result<PhaseSpacePoint<T>> {
    if !(t >= T::zero()) {
        return Err(GateError::invalid("t", "must be non-negative"));
    }
    let t = t.min(env.duration());
    match env.shape() {
        Shape::Square => piecewise_constant(env, &[1], delta, t),
        Shape::Walsh { segments, .. } => piecewise_constant(env, segments, delta, t),
        Shape::SinN { n, m } => {
            if n % 2 != 0 {
                return Err(GateError::UnsupportedShape(format!(
                    "sin^{n} has no cosine-series closed form"
                )));
            }
            let series = even_sine_power_series(*n / 2, *m, env.duration());
            let terms: Vec<(T, T)> = series
                .iter()
                .map(|&(c, w)| (env.omega_ms() * c, w))
                .collect();
            cosine_series(&terms, delta, t, env.duration())
        }
    }
}

/// sin^{2p}(mπt/τ) = Σ c_j cos(ω_j t), returned as (c_j, ω_j).
fn even_sine_power_series<T: Real>(p: u32, m: u32, tau: T) -> Vec<(T, T)> {
    let two_p = 2 * p;
    let norm = T::lit(0.25f64.powi(p as i32));
    let base = T::lit(m as f64) * T::PI() / tau;
    let mut out = vec![(norm * T::lit(binomial(two_p, p)), T::zero())];
    for j in 0..p {
        let sign = if (p - j) % 2 == 0 { 1.0 } else { -1.0 };
        let c = norm * T::lit(2.0 * sign * binomial(two_p, j));
        out.push((c, base * T::lit(2.0 * (p - j) as f64)));
    }
    out
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// ∫₀ᵗ cos(νs) ds
#[inline]
fn int_cos<T: Real>(nu: T, t: T) -> T {
    t * sinc(nu * t)
}

/// ∫₀ᵗ sin(νs) ds
#[inline]
fn int_sin<T: Real>(nu: T, t: T) -> T {
    let half = nu * t * T::lit(0.5);
    t * half.sin() * sinc(half)
}

/// Ω(t) = Σ a_j cos(ω_j t) on [0, τ].
fn cosine_series<T: Real>(
    terms: &[(T, T)],
    delta: T,
    t: T,
    tau: T,
) -> Result<PhaseSpacePoint<T>> {
    // Ω(t)e^{iδt} = Σ b_k e^{iν_k t}
    let half = T::lit(0.5);
    let mut modes: Vec<(T, T)> = Vec::with_capacity(2 * terms.len());
    for &(a, w) in terms {
        if w == T::zero() {
            modes.push((a, delta));
        } else {
            modes.push((a * half, delta + w));
            modes.push((a * half, delta - w));
        }
    }
    for &(_, nu) in &modes {
        if (nu * tau).abs() < T::lit(RESONANCE_GUARD) {
            return Err(GateError::UnsupportedShape(format!(
                "drive frequency component {nu} rad/s is resonant with the loop"
            )));
        }
    }
    let sqrt2 = T::lit(SQRT_2);
    let mut f = T::zero();
    let mut g = T::zero();
    let mut a = T::zero();
    for &(bk, nk) in &modes {
        f += bk * int_cos(nk, t);
        g += bk * int_sin(nk, t);
        for &(bl, nl) in &modes {
            let j = (int_cos(nk - nl, t) - int_cos(nk + nl, t)) / (T::lit(2.0) * nk);
            a += bk * bl * j;
        }
    }
    Ok(PhaseSpacePoint {
        f: -sqrt2 * f,
        g: -sqrt2 * g,
        a: -T::lit(2.0) * a,
    })
}

fn piecewise_constant<T: Real>(
    env: &PulseEnvelope<T>,
    signs: &[i8],
    delta: T,
    t: T,
) -> Result<PhaseSpacePoint<T>> {
    let tau = env.duration();
    let seg_len = tau / T::from_usize(signs.len()).unwrap();
    if (delta * seg_len).abs() < T::lit(RESONANCE_GUARD) {
        return Err(GateError::UnsupportedShape(format!(
            "detuning {delta} rad/s too close to resonance for the segment length"
        )));
    }
    let sqrt2 = T::lit(SQRT_2);
    let two = T::lit(2.0);
    let mut p: PhaseSpacePoint<T> = PhaseSpacePoint::origin();
    for (j, &sign) in signs.iter().enumerate() {
        let a = seg_len * T::from_usize(j).unwrap();
        if a >= t {
            break;
        }
        let b = (a + seg_len).min(t);
        let c = env.omega_ms() * T::lit(sign as f64);
        let mid = delta * (a + b) * T::lit(0.5);
        let half_span = delta * (b - a) * T::lit(0.5);
        let sd = two * mid.cos() * half_span.sin(); // sin δb − sin δa
        let cd = -two * mid.sin() * half_span.sin(); // cos δb − cos δa
        let d_f = -sqrt2 * c * sd / delta;
        let d_g = sqrt2 * c * cd / delta;
        let sin_sq = (b - a) * T::lit(0.5)
            - two * (two * mid).cos() * (two * half_span).sin() / (T::lit(4.0) * delta);
        let sin_int = -cd / delta;
        let local = -(two * c * c / delta) * (sin_sq - (delta * a).sin() * sin_int);
        p.a += -p.f * d_g + local;
        p.f += d_f;
        p.g += d_g;
    }
    Ok(p)
}
