// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Adaptive evaluation of F, G and the nested phase integral A on one grid.
//!
//! A(t) = √2∫F Ω sinθ needs F at every node. Panels are processed left to
//! right, so on panel [a, b]
//!
//!   A(b) = A(a) − F(a)·ΔG + √2∫_a^b (F(s) − F(a)) Ω(s) sinθ(s) ds
//!
//! and the last term only needs short inner integrals local to the panel.

use std::f64::consts::SQRT_2;

use crate::envelopes::RabiProfile;
use crate::error::{GateError, Result};
use crate::quadrature::{kronrod, partition, PanelRule, MAX_DEPTH, MAX_PANELS};
use crate::scalar::Real;

use super::{PhaseSpacePoint, Tolerance};

struct Accumulator<T> {
    point: PhaseSpacePoint<T>,
    err_fg: T,
    err_a: T,
    panels: usize,
    exhausted: bool,
}

/// F, G, A at each of `times` (non-decreasing, ≥ 0) for drive phase θ(t).
///
/// With θ(t) = δt this is the plain gate; a time-dependent detuning ε(t)
/// enters as θ(t) = δt + ∫ε. `extra_breakpoints` mark kinks of θ.
pub fn fga_path_with_phase<T, P, Ph>(
    profile: &P,
    phase: &Ph,
    times: &[T],
    extra_breakpoints: &[T],
    tol: Tolerance<T>,
) -> Result<Vec<PhaseSpacePoint<T>>>
where
    T: Real,
    P: RabiProfile<T> + ?Sized,
    Ph: Fn(T) -> T + ?Sized,
{
    if !(tol.fg > T::zero() && tol.a > T::zero()) {
        return Err(GateError::invalid("tol", "tolerances must be positive"));
    }
    let mut prev = T::zero();
    for &t in times {
        if !(t >= prev) {
            return Err(GateError::invalid(
                "times",
                "must be finite, non-negative and non-decreasing",
            ));
        }
        prev = t;
    }
    let tau = profile.duration();
    let horizon = times.last().copied().unwrap_or(T::zero()).min(tau);
    let mut breaks = profile.breakpoints();
    breaks.extend_from_slice(extra_breakpoints);

    let mut acc = Accumulator {
        point: PhaseSpacePoint::origin(),
        err_fg: T::zero(),
        err_a: T::zero(),
        panels: 0,
        exhausted: false,
    };
    let mut out = Vec::with_capacity(times.len());
    let mut reached = T::zero();
    for &t in times {
        let end = t.min(tau);
        if end > reached {
            integrate_interval(profile, phase, reached, end, horizon, &breaks, tol, &mut acc);
            reached = end;
        }
        out.push(acc.point);
    }
    if acc.err_fg > tol.fg || acc.err_a > tol.a {
        let (achieved, requested) = if acc.err_fg / tol.fg > acc.err_a / tol.a {
            (acc.err_fg, tol.fg)
        } else {
            (acc.err_a, tol.a)
        };
        return Err(GateError::NumericFailure {
            context: if acc.exhausted {
                "phase-space quadrature (refinement limit)"
            } else {
                "phase-space quadrature"
            },
            achieved: achieved.to_f64_lossy(),
            requested: requested.to_f64_lossy(),
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn integrate_interval<T, P, Ph>(
    profile: &P,
    phase: &Ph,
    start: T,
    end: T,
    horizon: T,
    breaks: &[T],
    tol: Tolerance<T>,
    acc: &mut Accumulator<T>,
) where
    T: Real,
    P: RabiProfile<T> + ?Sized,
    Ph: Fn(T) -> T + ?Sized,
{
    let sqrt2 = T::lit(SQRT_2);
    let cos_term = |s: T| profile.rabi(s) * phase(s).cos();
    // Start with roughly one panel per half oscillation of the drive phase.
    let swing = (phase(end) - phase(start)).abs() / T::PI();
    let min_panels = swing.ceil().to_usize().unwrap_or(1).max(1) + 1;
    let cuts = partition(start, end, breaks, min_panels);

    for w in cuts.windows(2) {
        let mut stack = vec![(w[0], w[1], 0u32)];
        while let Some((lo, hi, depth)) = stack.pop() {
            if hi <= lo {
                continue;
            }
            let rule = PanelRule::new(lo, hi);
            let mut fc = [T::zero(); 15];
            let mut fs = [T::zero(); 15];
            let mut local = [T::zero(); 15];
            for i in 0..15 {
                let s = rule.nodes[i];
                let om = profile.rabi(s);
                let th = phase(s);
                fc[i] = om * th.cos();
                fs[i] = om * th.sin();
            }
            for i in 0..15 {
                let f_local = -sqrt2 * kronrod(&cos_term, lo, rule.nodes[i]);
                local[i] = sqrt2 * f_local * fs[i];
            }
            let (ic, ec) = rule.apply(&fc);
            let (is, es) = rule.apply(&fs);
            let (il, el) = rule.apply(&local);
            let d_f = -sqrt2 * ic;
            let d_g = -sqrt2 * is;
            let e_f = sqrt2 * ec;
            let e_g = sqrt2 * es;
            let e_a = el + acc.point.f.abs() * e_g;

            acc.panels += 1;
            let frac = (hi - lo) / horizon;
            let ok = e_f <= tol.fg * frac && e_g <= tol.fg * frac && e_a <= tol.a * frac;
            let stop = depth >= MAX_DEPTH || acc.panels >= MAX_PANELS;
            if ok || stop {
                if !ok {
                    acc.exhausted = true;
                }
                let p = &mut acc.point;
                p.a += -p.f * d_g + il;
                p.f += d_f;
                p.g += d_g;
                acc.err_fg += e_f.max(e_g);
                acc.err_a += e_a;
            } else {
                let mid = (lo + hi) * T::lit(0.5);
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
    }
}
