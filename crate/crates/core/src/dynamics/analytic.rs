// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Closed-form spin state for U = e^{−iA S_y²} e^{−iF S_y x} e^{−iG S_y p}.
//!
//! In the S_y eigenbasis (eigenvalue m) the propagator is
//! e^{−i(A + FG/2)m²} D(mβ) with |β|² = (F² + G²)/2, and a thermal trace of
//! D((m − m')β) gives exp(−(m − m')²(F² + G²)(2n̄ + 1)/4).

use num_complex::Complex64 as C;

use crate::error::{GateError, Result};
use crate::solver::GateSolution;
use crate::trajectory::{fga_closed_form, fga_path, PhaseSpacePoint, Tolerance};

use super::spin::{ground_state, sy_eigenbasis, SpinDensity, SpinVector};
use super::{check_times, PopulationRecord, ThermalSpec};

/// Reduced spin state after a propagator with the given (F, G, A).
pub fn spin_density_from_fga(
    p: PhaseSpacePoint<f64>,
    nbar: f64,
    initial: &SpinVector,
) -> SpinDensity {
    let (v, m) = sy_eigenbasis();
    let c: Vec<C> = (0..4)
        .map(|col| (0..4).map(|row| v[row][col].conj() * initial[row]).sum())
        .collect();
    let phase = p.a + 0.5 * p.f * p.g;
    let spread = (p.f * p.f + p.g * p.g) * (2.0 * nbar + 1.0) / 4.0;
    let mut rho_y = [[C::new(0.0, 0.0); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let dm = m[a] - m[b];
            let dm2 = m[a] * m[a] - m[b] * m[b];
            rho_y[a][b] = c[a] * c[b].conj()
                * C::from_polar((-dm * dm * spread).exp(), -phase * dm2);
        }
    }
    let mut rho = [[C::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            let mut acc = C::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    acc += v[r][a] * rho_y[a][b] * v[s][b].conj();
                }
            }
            rho[r][s] = acc;
        }
    }
    SpinDensity(rho)
}

/// (F, G, A) of the gate with the drive detuned by `epsilon`, at each time.
/// Times past τ return the values at τ.
pub fn phase_space_path(
    sol: &GateSolution<f64>,
    epsilon: f64,
    times: &[f64],
) -> Result<Vec<PhaseSpacePoint<f64>>> {
    check_times(times)?;
    let delta = sol.delta() + epsilon;
    let closed: Result<Vec<_>> = times
        .iter()
        .map(|&t| fga_closed_form(sol.envelope(), delta, t))
        .collect();
    match closed {
        Err(GateError::UnsupportedShape(_)) => {
            fga_path(sol.envelope(), delta, times, Tolerance::default())
        }
        other => other,
    }
}

/// Spin state at time t starting from |↓↓⟩ with a thermal mode.
pub fn analytic_state(sol: &GateSolution<f64>, thermal: &ThermalSpec, t: f64) -> Result<SpinDensity> {
    let p = phase_space_path(sol, 0.0, &[t])?[0];
    Ok(spin_density_from_fga(p, thermal.nbar, &ground_state()))
}

/// Populations of the error-free gate from |↓↓⟩ at the given times.
pub fn analytic_populations(
    sol: &GateSolution<f64>,
    thermal: &ThermalSpec,
    times: &[f64],
) -> Result<PopulationRecord> {
    let path = phase_space_path(sol, 0.0, times)?;
    let states: Vec<SpinDensity> = path
        .into_iter()
        .map(|p| spin_density_from_fga(p, thermal.nbar, &ground_state()))
        .collect();
    Ok(PopulationRecord::from_states(times, &states))
}

/// Bell-state fidelity when the mode sits `epsilon` (rad/s) away from its
/// calibrated frequency for the whole gate.
pub fn static_detuning_fidelity(
    sol: &GateSolution<f64>,
    epsilon: f64,
    thermal: &ThermalSpec,
) -> Result<f64> {
    let p = phase_space_path(sol, epsilon, &[sol.duration()])?[0];
    Ok(spin_density_from_fga(p, thermal.nbar, &ground_state()).bell_fidelity(sol.phase_sign()))
}
