// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Two spins coupled to one motional mode: an analytic model built on
//! (F, G, A) and a truncated-Fock-space propagator that also handles AC
//! Zeeman shifts, detuning errors and heating.

mod analytic;
mod fock;
pub mod spin;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::solver::GateSolution;

pub use analytic::{
    analytic_populations, analytic_state, phase_space_path, spin_density_from_fga,
    static_detuning_fidelity,
};
pub use fock::{fock_propagate, fock_propagate_with, FockOptions, FockOutcome};
pub use spin::{analysis_pulse, bell_target, ground_state, SpinDensity};

/// Thermal weight below which Fock states are dropped.
pub const THERMAL_WEIGHT_CUTOFF: f64 = 1e-8;

/// Initial thermal state of the gate mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub nbar: f64,
    /// Fock-space dimension for the numeric propagator; chosen automatically
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_cutoff: Option<usize>,
}

impl ThermalSpec {
    pub fn new(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(GateError::invalid("nbar", "must be finite and non-negative"));
        }
        Ok(ThermalSpec {
            nbar,
            fock_cutoff: None,
        })
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.fock_cutoff = Some(cutoff);
        self
    }

    /// Ground-state cooled mode.
    pub fn ground() -> Self {
        ThermalSpec {
            nbar: 0.0,
            fock_cutoff: None,
        }
    }

    /// Bose–Einstein probability of Fock state n.
    pub fn occupation(&self, n: usize) -> f64 {
        if self.nbar == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let r = self.nbar / (self.nbar + 1.0);
        r.powi(n as i32) / (self.nbar + 1.0)
    }

    /// Number of Fock states whose thermal weight is at least [`THERMAL_WEIGHT_CUTOFF`].
    pub fn populated_levels(&self) -> usize {
        let mut n = 0;
        while self.occupation(n) >= THERMAL_WEIGHT_CUTOFF {
            n += 1;
        }
        n.max(1)
    }

    /// Normalized thermal weights of the retained Fock states.
    pub fn weights(&self) -> Vec<f64> {
        let w: Vec<f64> = (0..self.populated_levels()).map(|n| self.occupation(n)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Default qubit splitting ω₀/2π in Hz.
pub const QUBIT_FREQUENCY_HZ: f64 = 1082.55e6;
/// Default gate-mode frequency ω_r/2π in Hz.
pub const MODE_FREQUENCY_HZ: f64 = 6.16e6;

/// Imperfections applied on top of the ideal gate Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    /// Offset ε of the true mode frequency from its calibrated value (rad/s).
    pub static_detuning: f64,
    /// Peak AC Zeeman shift of each ion (Hz), scaled by P²(t).
    pub zeeman_peak_hz: [f64; 2],
    /// ṅ in quanta per second.
    pub heating_rate: f64,
    /// Drive tones track the mean Zeeman shift, ω(t) = ω₀ + ΔP²(t) ± (ω_r + δ).
    pub compensation: bool,
    /// ω₀/2π, used only for tone frequencies.
    pub qubit_frequency_hz: f64,
    /// ω_r/2π, used only for tone frequencies.
    pub mode_frequency_hz: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            static_detuning: 0.0,
            zeeman_peak_hz: [0.0, 0.0],
            heating_rate: 0.0,
            compensation: false,
            qubit_frequency_hz: QUBIT_FREQUENCY_HZ,
            mode_frequency_hz: MODE_FREQUENCY_HZ,
        }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.heating_rate >= 0.0 && self.heating_rate.is_finite()) {
            return Err(GateError::invalid("heating_rate", "must be finite and non-negative"));
        }
        if !self.static_detuning.is_finite() || self.zeeman_peak_hz.iter().any(|z| !z.is_finite())
        {
            return Err(GateError::invalid("error model", "values must be finite"));
        }
        Ok(())
    }

    pub fn has_zeeman(&self) -> bool {
        self.zeeman_peak_hz.iter().any(|&z| z != 0.0)
    }

    /// Zeeman shift the drive tones follow (Hz): the mean over both ions when
    /// compensation is on, else zero.
    pub fn tracked_shift_hz(&self) -> f64 {
        if self.compensation {
            0.5 * (self.zeeman_peak_hz[0] + self.zeeman_peak_hz[1])
        } else {
            0.0
        }
    }

    /// Residual peak shift of each ion in the tone frame (rad/s).
    pub(crate) fn residual_zeeman(&self) -> [f64; 2] {
        let c = self.tracked_shift_hz();
        [
            2.0 * PI * (self.zeeman_peak_hz[0] - c),
            2.0 * PI * (self.zeeman_peak_hz[1] - c),
        ]
    }

    /// Blue and red sideband tone frequencies (Hz) at time t.
    pub fn tone_frequencies_hz(&self, sol: &GateSolution<f64>, t: f64) -> (f64, f64) {
        let p = sol.envelope().shape_value(t);
        let carrier = self.qubit_frequency_hz + self.tracked_shift_hz() * p * p;
        let offset = self.mode_frequency_hz + (sol.delta() + self.static_detuning) / (2.0 * PI);
        (carrier + offset, carrier - offset)
    }
}

/// Populations with 0, 1 and 2 ions in |↑⟩ over time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub times: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl PopulationRecord {
    pub fn from_states(times: &[f64], states: &[SpinDensity]) -> Self {
        let mut rec = PopulationRecord {
            times: times.to_vec(),
            ..Default::default()
        };
        for s in states {
            let p = s.populations();
            rec.p0.push(p[0]);
            rec.p1.push(p[1]);
            rec.p2.push(p[2]);
        }
        rec
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> [f64; 3] {
        [self.p0[i], self.p1[i], self.p2[i]]
    }

    /// Largest absolute population difference over all samples.
    pub fn max_abs_diff(&self, other: &PopulationRecord) -> f64 {
        (0..self.len().min(other.len()))
            .flat_map(|i| {
                let (a, b) = (self.row(i), other.row(i));
                (0..3).map(move |j| (a[j] - b[j]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,p0,p1,p2`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,p0,p1,p2\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{},{}", self.times[i], self.p0[i], self.p1[i], self.p2[i]);
        }
        s
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev) || !t.is_finite() {
            return Err(GateError::invalid(
                "times",
                "must be finite, non-negative and non-decreasing",
            ));
        }
        prev = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_weights() {
        let th = ThermalSpec::new(0.4).unwrap();
        let w = th.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let dropped: f64 = (w.len()..w.len() + 200).map(|n| th.occupation(n)).sum();
        assert!(dropped < 1e-7);
        assert!(th.occupation(w.len()) < THERMAL_WEIGHT_CUTOFF);
        assert_eq!(ThermalSpec::ground().weights(), vec![1.0]);
        assert!(ThermalSpec::new(-1.0).is_err());
        let mean: f64 = (0..400).map(|n| n as f64 * th.occupation(n)).sum();
        assert!((mean - 0.4).abs() < 1e-12);
    }

    #[test]
    fn compensation_tracks_mean_shift() {
        let mut e = ErrorModel {
            zeeman_peak_hz: [20.0, 0.0],
            ..Default::default()
        };
        assert_eq!(e.residual_zeeman(), [2.0 * PI * 20.0, 0.0]);
        e.compensation = true;
        let r = e.residual_zeeman();
        assert!((r[0] - 2.0 * PI * 10.0).abs() < 1e-12 && (r[1] + 2.0 * PI * 10.0).abs() < 1e-12);
        e.zeeman_peak_hz = [20.0, 20.0];
        assert_eq!(e.residual_zeeman(), [0.0, 0.0]);
        assert!(ErrorModel {
            heating_rate: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn tone_frequencies_follow_envelope() {
        let sol = crate::solver::solve_sin2(2.0 * PI * 1180.0, 17).unwrap();
        let e = ErrorModel {
            zeeman_peak_hz: [20.0, 20.0],
            compensation: true,
            ..Default::default()
        };
        let mid = sol.duration() / 2.0;
        let (blue, red) = e.tone_frequencies_hz(&sol, mid);
        let offset = MODE_FREQUENCY_HZ + sol.delta() / (2.0 * PI);
        assert!((blue - (QUBIT_FREQUENCY_HZ + 20.0 + offset)).abs() < 1e-6);
        assert!((red - (QUBIT_FREQUENCY_HZ + 20.0 - offset)).abs() < 1e-6);
        let (blue0, _) = e.tone_frequencies_hz(&sol, 0.0);
        assert!((blue0 - (QUBIT_FREQUENCY_HZ + offset)).abs() < 1e-6);
    }

    #[test]
    fn record_csv() {
        let rec = PopulationRecord::from_states(
            &[0.0, 1e-3],
            &[SpinDensity::pure(&ground_state()), SpinDensity::pure(&bell_target(-1))],
        );
        let csv = rec.to_csv();
        assert!(csv.starts_with("t,p0,p1,p2\n0,1,0,0\n"));
        assert_eq!(rec.row(1)[1], 0.0);
    }
}
