// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Design and simulation toolkit for amplitude-modulated Mølmer–Sørensen gates.

pub mod dynamics;
pub mod envelopes;
pub mod error;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod tomography;
pub mod trajectory;

pub use error::{GateError, Result};
pub use scalar::Real;

pub type Envelope = envelopes::PulseEnvelope<f64>;
pub type Envelope32 = envelopes::PulseEnvelope<f32>;
pub type Solution = solver::GateSolution<f64>;
pub type Solution32 = solver::GateSolution<f32>;
pub type Point = trajectory::PhaseSpacePoint<f64>;
pub type Point32 = trajectory::PhaseSpacePoint<f32>;
pub type Path = trajectory::Trajectory<f64>;
pub type Path32 = trajectory::Trajectory<f32>;
