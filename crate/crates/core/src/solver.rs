// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Gate parameters (τ, δ) that close every phase-space loop with |A(τ)| = π/2.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::envelopes::{walsh_segment_count, EnvelopeKind, PulseEnvelope, Shape};
use crate::error::{GateError, Result};
use crate::scalar::Real;
use crate::trajectory::{fga, fga_closed_form, fga_quadrature, PhaseSpacePoint, Tolerance};

/// Envelope family a gate is solved in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GateFamily {
    /// sin²(πt/τ), order k, δτ = 2π(k+1)
    Sin2,
    /// Constant amplitude, K loops, δτ = 2πK
    Square,
    /// Square amplitude with Walsh sign modulation
    Walsh { index: u32 },
}

/// A solved gate: envelope (with τ), detuning and order metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSolution<T> {
    envelope: PulseEnvelope<T>,
    delta: T,
    order: u32,
    phase_sign: i8,
}

impl<T: Real> GateSolution<T> {
    /// Assembles a solution from arbitrary parts; the phase sign is read off
    /// A(τ). No closure is implied, see [`verify_closure`].
    pub fn from_parts(envelope: PulseEnvelope<T>, delta: T, order: u32) -> Result<Self> {
        let end = fga(&envelope, delta, envelope.duration())?;
        Ok(GateSolution {
            envelope,
            delta,
            order,
            phase_sign: if end.a < T::zero() { -1 } else { 1 },
        })
    }

    pub fn envelope(&self) -> &PulseEnvelope<T> {
        &self.envelope
    }

    pub fn duration(&self) -> T {
        self.envelope.duration()
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn omega_ms(&self) -> T {
        self.envelope.omega_ms()
    }

    /// k for sin² gates, loop count for square and Walsh gates.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Sign of A(τ); selects the Bell state the gate produces.
    pub fn phase_sign(&self) -> i8 {
        self.phase_sign
    }

    pub fn family(&self) -> GateFamily {
        match self.envelope.shape() {
            Shape::Square => GateFamily::Square,
            Shape::SinN { .. } => GateFamily::Sin2,
            Shape::Walsh { index, .. } => GateFamily::Walsh { index: *index },
        }
    }

    /// Short scheme label, e.g. `sin2_k17`, `square_7`, `walsh_8_7`.
    pub fn label(&self) -> String {
        match self.family() {
            GateFamily::Sin2 => format!("sin2_k{}", self.order),
            GateFamily::Square => format!("square_{}", self.order),
            GateFamily::Walsh { index } => format!("walsh_{}_{}", self.order, index),
        }
    }

    pub fn pulse_energy(&self) -> T {
        self.envelope.pulse_energy_closed_form()
    }

    /// Same gate with the drive detuned by `epsilon` (rad/s), evaluated at `t`.
    pub fn fga_detuned(&self, epsilon: T, t: T) -> Result<PhaseSpacePoint<T>> {
        fga(&self.envelope, self.delta + epsilon, t)
    }
}

/// The sin² (n = 2, m = 1) gate of order k ≥ 1.
///
/// With δτ = 2π(k+1) both F(τ) and G(τ) vanish and A(τ) = −c_k·Ω²τ², so τ
/// follows from one closed-form evaluation at a reference length.
pub fn solve_sin2<T: Real>(omega_ms: T, k: u32) -> Result<GateSolution<T>> {
    if k == 0 {
        return Err(GateError::UnsupportedOrder(0));
    }
    let tau_ref = T::one() / omega_ms;
    let reference = PulseEnvelope::sin2(omega_ms, tau_ref)?;
    let a_ref = fga_closed_form(&reference, sin2_detuning(k, tau_ref), tau_ref)?.a;
    let tau = tau_ref * (T::lit(FRAC_PI_2) / a_ref.abs()).sqrt();
    Ok(GateSolution {
        envelope: reference.with_duration(tau)?,
        delta: sin2_detuning(k, tau),
        order: k,
        phase_sign: if a_ref < T::zero() { -1 } else { 1 },
    })
}

/// δ_k = 2π(k+1)/τ
pub fn sin2_detuning<T: Real>(k: u32, tau: T) -> T {
    T::lit(2.0 * PI * (k + 1) as f64) / tau
}

/// Bracket in |A(τ)| = (Ω²τ²/π)·c for the sin² gate of order k, with
/// K = 2(k+1): c = 1/(4K) + 1/(16(K−2)) + 1/(16(K+2)).
pub fn sin2_area_coefficient<T: Real>(k: u32) -> Result<T> {
    if k == 0 {
        return Err(GateError::UnsupportedOrder(0));
    }
    let kk = 2.0 * (k + 1) as f64;
    Ok(T::lit(
        1.0 / (4.0 * kk) + 1.0 / (16.0 * (kk - 2.0)) + 1.0 / (16.0 * (kk + 2.0)),
    ))
}

/// Same gate as [`solve_sin2`], found by a bracketed root search on the
/// quadrature value of |A(τ)| − π/2. Needs no closed form.
pub fn solve_sin2_root_search<T: Real>(omega_ms: T, k: u32) -> Result<GateSolution<T>> {
    let c = sin2_area_coefficient::<T>(k)?;
    let estimate = T::PI() / (omega_ms * (T::lit(2.0) * c).sqrt());
    let tol = Tolerance {
        fg: T::lit(1e-12).max(T::epsilon() * T::lit(1e3)),
        a: T::lit(1e-12).max(T::epsilon() * T::lit(1e4)),
    };
    let residual = |tau: T| -> Result<T> {
        let env = PulseEnvelope::sin2(omega_ms, tau)?;
        let end = fga_quadrature(&env, sin2_detuning(k, tau), tau, tol)?;
        Ok(end.a.abs() - T::lit(FRAC_PI_2))
    };
    let tau = find_root(
        residual,
        estimate * T::lit(0.5),
        estimate * T::lit(2.0),
        estimate * T::epsilon() * T::lit(8.0),
    )?;
    GateSolution::from_parts(
        PulseEnvelope::sin2(omega_ms, tau)?,
        sin2_detuning(k, tau),
        k,
    )
}

/// Illinois-modified regula falsi on a sign-changing bracket.
fn find_root<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, lo: T, hi: T, xtol: T) -> Result<T> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa < T::zero()) == (fb < T::zero()) {
        return Err(GateError::IllConditioned(
            "root search bracket does not change sign".into(),
        ));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc == T::zero() || (b - a).abs() < xtol {
            return Ok(c);
        }
        if (fc < T::zero()) == (fb < T::zero()) {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa * T::lit(0.5);
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb * T::lit(0.5);
            }
            side = 1;
        }
        if (b - a).abs() < xtol {
            return Ok((a + b) * T::lit(0.5));
        }
    }
    Err(GateError::NumericFailure {
        context: "root search",
        achieved: (b - a).abs().to_f64_lossy(),
        requested: xtol.to_f64_lossy(),
    })
}

/// The square gate with K loops: δ = 2Ω√K, τ = π√K/Ω.
pub fn solve_square<T: Real>(omega_ms: T, loops: u32) -> Result<GateSolution<T>> {
    if loops == 0 {
        return Err(GateError::invalid("loops", "need at least one loop"));
    }
    let (tau, delta) = square_parameters(omega_ms, loops);
    GateSolution::from_parts(PulseEnvelope::square(omega_ms, tau)?, delta, loops)
}

fn square_parameters<T: Real>(omega_ms: T, loops: u32) -> (T, T) {
    let root = T::lit(loops as f64).sqrt();
    (T::PI() * root / omega_ms, T::lit(2.0) * omega_ms * root)
}

/// Square-amplitude gate whose sign follows Walsh function `walsh_index`.
///
/// Each Walsh segment holds a whole number of loops, so every segment closes
/// on its own and the sign flips leave the enclosed area unchanged.
pub fn solve_walsh<T: Real>(omega_ms: T, loops: u32, walsh_index: u32) -> Result<GateSolution<T>> {
    if loops == 0 {
        return Err(GateError::invalid("loops", "need at least one loop"));
    }
    let segments = walsh_segment_count(walsh_index) as u32;
    if loops % segments != 0 {
        return Err(GateError::invalid(
            "loops",
            format!("{loops} loops cannot be split evenly over {segments} Walsh segments"),
        ));
    }
    let (tau, delta) = square_parameters(omega_ms, loops);
    GateSolution::from_parts(PulseEnvelope::walsh(omega_ms, tau, walsh_index)?, delta, loops)
}

pub fn solve<T: Real>(omega_ms: T, family: GateFamily, order: u32) -> Result<GateSolution<T>> {
    match family {
        GateFamily::Sin2 => solve_sin2(omega_ms, order),
        GateFamily::Square => solve_square(omega_ms, order),
        GateFamily::Walsh { index } => solve_walsh(omega_ms, order, index),
    }
}

/// Residuals of a solution checked by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub f_residual: f64,
    pub g_residual: f64,
    /// |A(τ)| − π/2
    pub phase_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn verify_closure<T: Real>(sol: &GateSolution<T>, tol: T) -> Result<ClosureReport> {
    let default = Tolerance::<T>::default();
    let floor = T::epsilon() * T::lit(1e3);
    let quad_tol = Tolerance {
        fg: (tol * T::lit(0.1)).min(default.fg).max(floor),
        a: (tol * T::lit(0.1)).min(default.a).max(floor),
    };
    let end = fga_quadrature(sol.envelope(), sol.delta(), sol.duration(), quad_tol)?;
    let f_residual = end.f.abs().to_f64_lossy();
    let g_residual = end.g.abs().to_f64_lossy();
    let phase_residual = (end.a.abs() - T::lit(FRAC_PI_2)).to_f64_lossy();
    let t = tol.to_f64_lossy();
    Ok(ClosureReport {
        f_residual,
        g_residual,
        phase_residual,
        tol: t,
        passed: f_residual < t && g_residual < t && phase_residual.abs() < t,
    })
}

/// Result of pairing a gate with an equal-energy gate of another family.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatch<T> {
    pub solution: GateSolution<T>,
    /// (E − E_ref)/E_ref
    pub mismatch: T,
}

/// Gate of `family` at the reference's Ω_MS whose pulse energy matches.
///
/// With `free_param = Some(p)` the order (k, or loop count) is fixed and only
/// the mismatch is reported. With `None` the highest order whose energy does
/// not exceed the reference is chosen (the lowest order if none qualifies).
pub fn match_energy<T: Real>(
    reference: &GateSolution<T>,
    family: GateFamily,
    free_param: Option<u32>,
) -> Result<EnergyMatch<T>> {
    let omega = reference.omega_ms();
    let target = reference.pulse_energy();
    let finish = |solution: GateSolution<T>| {
        let mismatch = (solution.pulse_energy() - target) / target;
        Ok(EnergyMatch { solution, mismatch })
    };
    if let Some(order) = free_param {
        return finish(solve(omega, family, order)?);
    }
    let step = match family {
        GateFamily::Walsh { index } => walsh_segment_count(index) as u32,
        _ => 1,
    };
    let first = match family {
        GateFamily::Sin2 => 1,
        _ => step,
    };
    let mut best = solve(omega, family, first)?;
    let mut order = first + step;
    // Energy grows monotonically with order in every family.
    loop {
        let candidate = solve(omega, family, order)?;
        if candidate.pulse_energy() > target {
            break;
        }
        best = candidate;
        order += step;
        if order > 100_000 {
            return Err(GateError::IllConditioned(
                "no equal-energy order below 100000".into(),
            ));
        }
    }
    finish(best)
}

/// Serializable summary of a gate solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub kind: EnvelopeKind,
    pub label: String,
    pub omega_ms_hz: f64,
    pub k_or_loops: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walsh_index: Option<u32>,
    pub tau_s: f64,
    pub delta_hz: f64,
    pub phase_sign: i8,
    /// Pulse energy in units of a single-loop square gate at the same Ω_MS (Ω_MS·π).
    pub energy_rel: f64,
    pub closure_residuals: ClosureReport,
}

impl SolutionRecord {
    pub fn new<T: Real>(sol: &GateSolution<T>, closure: ClosureReport) -> Self {
        let omega = sol.omega_ms().to_f64_lossy();
        SolutionRecord {
            kind: sol.envelope().kind(),
            label: sol.label(),
            omega_ms_hz: omega / (2.0 * PI),
            k_or_loops: sol.order(),
            walsh_index: match sol.family() {
                GateFamily::Walsh { index } => Some(index),
                _ => None,
            },
            tau_s: sol.duration().to_f64_lossy(),
            delta_hz: sol.delta().to_f64_lossy() / (2.0 * PI),
            phase_sign: sol.phase_sign(),
            energy_rel: sol.pulse_energy().to_f64_lossy() / (omega * PI),
            closure_residuals: closure,
        }
    }
}
