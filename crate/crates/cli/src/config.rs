// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Run configuration, read from TOML. Top-level keys hold the shared
//! parameters, each gate is a `[[scheme]]` table, and every subcommand has its
//! own optional section.
//!
//! ```toml
//! omega_ms_hz = 1180.0
//! nbar = 0.4
//! seed = 7
//!
//! [[scheme]]
//! kind = "sin2"
//! k = 20
//!
//! [[scheme]]
//! kind = "walsh"
//! loops = 8
//! walsh_index = 7
//!
//! [noise]
//! fwhm_hz = [0.0, 500.0, 1000.0]
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use msgate::dynamics::{ErrorModel, ThermalSpec, MODE_FREQUENCY_HZ, QUBIT_FREQUENCY_HZ};
use msgate::solver::{solve, GateFamily};
use msgate::tomography::{SpamConvention, DEFAULT_LAMBDA_BRIGHT, DEFAULT_LAMBDA_DARK, DEFAULT_WINDOW_S};
use msgate::Solution;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_OMEGA_MS_HZ: f64 = 1180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_omega")]
    pub omega_ms_hz: f64,
    #[serde(default)]
    pub nbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory; `--out` takes precedence. Not echoed in sidecars.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, rename = "scheme")]
    pub schemes: Vec<SchemeConfig>,
    #[serde(default)]
    pub errors: ErrorsConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub parity: ParityConfig,
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA_MS_HZ
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega_ms_hz: DEFAULT_OMEGA_MS_HZ,
            nbar: 0.0,
            fock_cutoff: None,
            seed: None,
            out: None,
            schemes: Vec::new(),
            errors: ErrorsConfig::default(),
            trajectory: TrajectoryConfig::default(),
            evolve: EvolveConfig::default(),
            noise: NoiseConfig::default(),
            parity: ParityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Sin2,
    Square,
    Walsh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walsh_index: Option<u32>,
}

impl SchemeConfig {
    pub fn sin2(k: u32) -> Self {
        SchemeConfig {
            kind: SchemeKind::Sin2,
            k: Some(k),
            loops: None,
            walsh_index: None,
        }
    }

    pub fn square(loops: u32) -> Self {
        SchemeConfig {
            kind: SchemeKind::Square,
            k: None,
            loops: Some(loops),
            walsh_index: None,
        }
    }

    pub fn walsh(loops: u32, walsh_index: u32) -> Self {
        SchemeConfig {
            kind: SchemeKind::Walsh,
            k: None,
            loops: Some(loops),
            walsh_index: Some(walsh_index),
        }
    }

    fn family_and_order(&self) -> Result<(GateFamily, u32), CliError> {
        let need = |v: Option<u32>, key: &str| {
            v.ok_or_else(|| CliError::Config(format!("{:?} scheme needs `{key}`", self.kind).to_lowercase()))
        };
        let stray = |v: Option<u32>, key: &str| match v {
            Some(_) => Err(CliError::Config(format!("`{key}` does not apply to a {:?} scheme", self.kind))),
            None => Ok(()),
        };
        match self.kind {
            SchemeKind::Sin2 => {
                stray(self.loops, "loops")?;
                stray(self.walsh_index, "walsh_index")?;
                Ok((GateFamily::Sin2, need(self.k, "k")?))
            }
            SchemeKind::Square => {
                stray(self.k, "k")?;
                stray(self.walsh_index, "walsh_index")?;
                Ok((GateFamily::Square, need(self.loops, "loops")?))
            }
            SchemeKind::Walsh => {
                stray(self.k, "k")?;
                let index = need(self.walsh_index, "walsh_index")?;
                Ok((GateFamily::Walsh { index }, need(self.loops, "loops")?))
            }
        }
    }
}

/// Imperfections for `evolve` and `parity`. Frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorsConfig {
    pub static_detuning_hz: f64,
    pub zeeman_peak_hz: [f64; 2],
    /// Quanta per second.
    pub heating_rate: f64,
    pub compensation: bool,
    pub qubit_frequency_hz: f64,
    pub mode_frequency_hz: f64,
}

impl Default for ErrorsConfig {
    fn default() -> Self {
        ErrorsConfig {
            static_detuning_hz: 0.0,
            zeeman_peak_hz: [0.0, 0.0],
            heating_rate: 0.0,
            compensation: false,
            qubit_frequency_hz: QUBIT_FREQUENCY_HZ,
            mode_frequency_hz: MODE_FREQUENCY_HZ,
        }
    }
}

impl ErrorsConfig {
    pub fn model(&self) -> ErrorModel {
        ErrorModel {
            static_detuning: 2.0 * PI * self.static_detuning_hz,
            zeeman_peak_hz: self.zeeman_peak_hz,
            heating_rate: self.heating_rate,
            compensation: self.compensation,
            qubit_frequency_hz: self.qubit_frequency_hz,
            mode_frequency_hz: self.mode_frequency_hz,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.static_detuning_hz == 0.0 && self.zeeman_peak_hz == [0.0, 0.0] && self.heating_rate == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub num_points: usize,
    /// Largest |F|, |G| allowed in the final row.
    pub closure_tol: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            num_points: 501,
            closure_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorChoice {
    /// Closed form when there are no errors, Fock propagation otherwise.
    #[default]
    Auto,
    Analytic,
    Fock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Uniform grid over [0, t_max_over_tau·τ]; a single point means t = 0.
    pub num_points: usize,
    pub t_max_over_tau: f64,
    pub propagator: PropagatorChoice,
    /// Checked against (½, 0, ½) at t ≥ τ when the gate is ideal.
    pub final_tol: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            num_points: 201,
            t_max_over_tau: 1.0,
            propagator: PropagatorChoice::Auto,
            final_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMethodChoice {
    #[default]
    QuasiStatic,
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub fwhm_hz: Vec<f64>,
    pub method: NoiseMethodChoice,
    /// OU correlation time in units of each gate's τ.
    pub corr_time_factor: f64,
    /// OU trajectories per cell.
    pub samples: usize,
    /// Require infidelity to increase strictly along the scheme list at every
    /// FWHM > 0.
    pub assert_ordering: bool,
    /// Largest |1 − F| allowed at FWHM = 0.
    pub zero_width_tol: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            fwhm_hz: (0..11).map(|i| 100.0 * i as f64).collect(),
            method: NoiseMethodChoice::QuasiStatic,
            corr_time_factor: 10.0,
            samples: 200,
            assert_ordering: true,
            zero_width_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParityConfig {
    pub num_phases: usize,
    pub shots_per_phase: u32,
    pub scans: u32,
    pub epsilon_spam: f64,
    pub spam_convention: SpamConvention,
    pub lambda_dark: f64,
    pub lambda_bright: f64,
    pub window_s: f64,
    /// Shots in each of the four calibration references.
    pub reference_shots: usize,
    pub resamples: usize,
    /// Allowed |estimate − true fidelity| for the Poissonian estimate.
    pub fidelity_tol: f64,
    /// Allowed gap between the Poissonian and threshold estimates, in combined
    /// standard errors.
    pub agreement_sigmas: f64,
}

impl Default for ParityConfig {
    fn default() -> Self {
        ParityConfig {
            num_phases: 100,
            shots_per_phase: 300,
            scans: 2,
            epsilon_spam: 0.015,
            spam_convention: SpamConvention::Symmetric,
            lambda_dark: DEFAULT_LAMBDA_DARK,
            lambda_bright: DEFAULT_LAMBDA_BRIGHT,
            window_s: DEFAULT_WINDOW_S,
            reference_shots: 20_000,
            resamples: 1000,
            fidelity_tol: 0.005,
            agreement_sigmas: 2.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.omega_ms_hz > 0.0 && self.omega_ms_hz.is_finite()) {
            return Err(CliError::Config("omega_ms_hz must be positive".into()));
        }
        self.thermal()?;
        self.errors.model().validate()?;
        for s in &self.schemes {
            s.family_and_order()?;
        }
        if self.noise.fwhm_hz.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return Err(CliError::Config("noise.fwhm_hz entries must be finite and non-negative".into()));
        }
        if self.evolve.num_points == 0 {
            return Err(CliError::Config("evolve.num_points must be at least 1".into()));
        }
        if !(self.evolve.t_max_over_tau >= 0.0 && self.evolve.t_max_over_tau.is_finite()) {
            return Err(CliError::Config("evolve.t_max_over_tau must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn thermal(&self) -> Result<ThermalSpec, CliError> {
        let t = ThermalSpec::new(self.nbar)?;
        Ok(match self.fock_cutoff {
            Some(n) => t.with_cutoff(n),
            None => t,
        })
    }

    pub fn omega_ms(&self) -> f64 {
        2.0 * PI * self.omega_ms_hz
    }

    /// Solves every scheme in config order.
    pub fn solutions(&self) -> Result<Vec<Solution>, CliError> {
        self.schemes
            .iter()
            .map(|s| {
                let (family, order) = s.family_and_order()?;
                Ok(solve(self.omega_ms(), family, order)?)
            })
            .collect()
    }
}
