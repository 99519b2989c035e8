// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Phase-space functions of the bichromatic gate:
//!
//! ```text
//! F(t) = −√2 ∫₀ᵗ Ω(t') cos(δt') dt'
//! G(t) = −√2 ∫₀ᵗ Ω(t') sin(δt') dt'
//! A(t) =  √2 ∫₀ᵗ F(t') Ω(t') sin(δt') dt'
//! ```
//!
//! (F, G) is the motional displacement of an S_y eigenstate, A the geometric
//! phase. Two independent routes are provided: adaptive quadrature for any
//! [`RabiProfile`] and closed forms for square, Walsh and even sin^n shapes.

mod closed_form;
mod integrator;

use std::fmt::Write as _;

use crate::envelopes::{PulseEnvelope, RabiProfile};
use crate::error::{GateError, Result};
use crate::scalar::Real;

pub use closed_form::fga_closed_form;
pub use integrator::fga_path_with_phase;

/// (F, G, A) at one instant; all dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseSpacePoint<T> {
    pub f: T,
    pub g: T,
    pub a: T,
}

impl<T: Real> PhaseSpacePoint<T> {
    pub fn origin() -> Self {
        PhaseSpacePoint {
            f: T::zero(),
            g: T::zero(),
            a: T::zero(),
        }
    }

    /// Distance of the motional displacement from the origin.
    pub fn radius(&self) -> T {
        self.f.hypot(self.g)
    }
}

/// Absolute quadrature tolerances on F/G and on A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub fg: T,
    pub a: T,
}

impl<T: Real> Tolerance<T> {
    pub fn uniform(tol: T) -> Self {
        Tolerance { fg: tol, a: tol }
    }
}

impl<T: Real> Default for Tolerance<T> {
    /// 1e-10 on F, G and 1e-9 on A, floored at what the scalar type can resolve.
    fn default() -> Self {
        let floor = T::epsilon() * T::lit(1e3);
        Tolerance {
            fg: T::lit(1e-10).max(floor),
            a: T::lit(1e-9).max(floor * T::lit(10.0)),
        }
    }
}

/// F, G, A at time `t` for drive detuning `delta` by adaptive quadrature.
pub fn fga_quadrature<T: Real, P: RabiProfile<T> + ?Sized>(
    profile: &P,
    delta: T,
    t: T,
    tol: Tolerance<T>,
) -> Result<PhaseSpacePoint<T>> {
    if !(t >= T::zero()) {
        return Err(GateError::invalid("t", "must be non-negative"));
    }
    let phase = |s: T| delta * s;
    let path = fga_path_with_phase(profile, &phase, &[t], &[], tol)?;
    Ok(path[0])
}

/// Quadrature at a sequence of non-decreasing times.
pub fn fga_path<T: Real, P: RabiProfile<T> + ?Sized>(
    profile: &P,
    delta: T,
    times: &[T],
    tol: Tolerance<T>,
) -> Result<Vec<PhaseSpacePoint<T>>> {
    let phase = |s: T| delta * s;
    fga_path_with_phase(profile, &phase, times, &[], tol)
}

/// Closed form where one exists, otherwise quadrature at the default tolerance.
pub fn fga<T: Real>(env: &PulseEnvelope<T>, delta: T, t: T) -> Result<PhaseSpacePoint<T>> {
    match fga_closed_form(env, delta, t) {
        Ok(p) => Ok(p),
        Err(GateError::UnsupportedShape(_)) => fga_quadrature(env, delta, t, Tolerance::default()),
        Err(e) => Err(e),
    }
}

/// Sampled phase-space path of a spin eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub a: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> PhaseSpacePoint<T> {
        PhaseSpacePoint {
            f: self.f[i],
            g: self.g[i],
            a: self.a[i],
        }
    }

    /// CSV with header `t,F,G,A` (seconds, dimensionless).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,F,G,A\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{},{}", self.times[i], self.f[i], self.g[i], self.a[i]);
        }
        s
    }
}

/// Samples the trajectory on `num_points` uniformly spaced times over [0, τ].
pub fn sample_trajectory<T: Real, P: RabiProfile<T> + ?Sized>(
    profile: &P,
    delta: T,
    num_points: usize,
) -> Result<Trajectory<T>> {
    if num_points < 2 {
        return Err(GateError::invalid("num_points", "need at least 2 points"));
    }
    let tau = profile.duration();
    let last = T::from_usize(num_points - 1).unwrap();
    let times: Vec<T> = (0..num_points)
        .map(|i| {
            if i == num_points - 1 {
                tau
            } else {
                tau * T::from_usize(i).unwrap() / last
            }
        })
        .collect();
    let points = fga_path(profile, delta, &times, Tolerance::default())?;
    Ok(Trajectory {
        f: points.iter().map(|p| p.f).collect(),
        g: points.iter().map(|p| p.g).collect(),
        a: points.iter().map(|p| p.a).collect(),
        times,
    })
}
