// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Pulse envelopes P(t) and the Rabi-frequency profiles Ω(t) = Ω_MS·P(t).

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::quadrature;
use crate::scalar::Real;

/// Largest accepted Walsh index (2^16 segments).
pub const MAX_WALSH_INDEX: u32 = (1 << 16) - 1;

/// Anything that can drive the gate: a time-dependent Rabi frequency
/// supported on [0, duration].
pub trait RabiProfile<T: Real>: Sync {
    /// Ω(t) in rad/s. Must vanish outside [0, duration].
    fn rabi(&self, t: T) -> T;

    fn duration(&self) -> T;

    /// Interior discontinuities of Ω(t); integrators never straddle them.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Wraps a closure as a [`RabiProfile`]; the closure is only sampled on [0, duration].
pub struct FnProfile<T, F> {
    f: F,
    duration: T,
    breakpoints: Vec<T>,
}

impl<T: Real, F: Fn(T) -> T + Sync> FnProfile<T, F> {
    pub fn new(f: F, duration: T) -> Self {
        FnProfile {
            f,
            duration,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<T>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

impl<T: Real, F: Fn(T) -> T + Sync> RabiProfile<T> for FnProfile<T, F> {
    fn rabi(&self, t: T) -> T {
        if t < T::zero() || t > self.duration {
            T::zero()
        } else {
            (self.f)(t)
        }
    }

    fn duration(&self) -> T {
        self.duration
    }

    fn breakpoints(&self) -> Vec<T> {
        self.breakpoints.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Square,
    SinN,
    Walsh,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Square,
    /// sin^n(mπt/τ)
    SinN { n: u32, m: u32 },
    /// Square amplitude with sign pattern of the sequency-ordered Walsh function.
    Walsh { index: u32, segments: Vec<i8> },
}

/// A dimensionless envelope shape with its peak Rabi frequency and length.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope<T> {
    shape: Shape,
    omega_ms: T,
    duration: T,
}

fn check_positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(GateError::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

impl<T: Real> PulseEnvelope<T> {
    pub fn square(omega_ms: T, tau: T) -> Result<Self> {
        check_positive("omega_ms", omega_ms)?;
        check_positive("tau", tau)?;
        Ok(PulseEnvelope {
            shape: Shape::Square,
            omega_ms,
            duration: tau,
        })
    }

    /// P(t) = sin^n(mπt/τ); `n = 2, m = 1` is the standard shaped gate.
    pub fn sin_n(omega_ms: T, n: u32, m: u32, tau: T) -> Result<Self> {
        check_positive("omega_ms", omega_ms)?;
        check_positive("tau", tau)?;
        if n == 0 {
            return Err(GateError::invalid("n", "exponent must be at least 1"));
        }
        if m == 0 {
            return Err(GateError::invalid("m", "lobe count must be at least 1"));
        }
        Ok(PulseEnvelope {
            shape: Shape::SinN { n, m },
            omega_ms,
            duration: tau,
        })
    }

    pub fn sin2(omega_ms: T, tau: T) -> Result<Self> {
        Self::sin_n(omega_ms, 2, 1, tau)
    }

    pub fn walsh(omega_ms: T, tau: T, walsh_index: u32) -> Result<Self> {
        check_positive("omega_ms", omega_ms)?;
        check_positive("tau", tau)?;
        if walsh_index > MAX_WALSH_INDEX {
            return Err(GateError::invalid(
                "walsh_index",
                format!("{walsh_index} exceeds {MAX_WALSH_INDEX}"),
            ));
        }
        Ok(PulseEnvelope {
            shape: Shape::Walsh {
                index: walsh_index,
                segments: walsh_signs(walsh_index),
            },
            omega_ms,
            duration: tau,
        })
    }

    pub fn kind(&self) -> EnvelopeKind {
        match self.shape {
            Shape::Square => EnvelopeKind::Square,
            Shape::SinN { .. } => EnvelopeKind::SinN,
            Shape::Walsh { .. } => EnvelopeKind::Walsh,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn omega_ms(&self) -> T {
        self.omega_ms
    }

    /// Same shape, new total length (a new α for sin^n).
    pub fn with_duration(&self, tau: T) -> Result<Self> {
        check_positive("tau", tau)?;
        Ok(PulseEnvelope {
            duration: tau,
            ..self.clone()
        })
    }

    pub fn with_omega(&self, omega_ms: T) -> Result<Self> {
        check_positive("omega_ms", omega_ms)?;
        Ok(PulseEnvelope {
            omega_ms,
            ..self.clone()
        })
    }

    /// Walsh sign segments; empty for other shapes.
    pub fn segments(&self) -> &[i8] {
        match &self.shape {
            Shape::Walsh { segments, .. } => segments,
            _ => &[],
        }
    }

    /// Dimensionless P(t).
    pub fn shape_value(&self, t: T) -> T {
        if t < T::zero() || t > self.duration {
            return T::zero();
        }
        match &self.shape {
            Shape::Square => T::one(),
            Shape::SinN { n, m } => {
                let arg = T::lit(*m as f64) * T::PI() * t / self.duration;
                arg.sin().powi(*n as i32)
            }
            Shape::Walsh { segments, .. } => {
                let count = segments.len();
                let pos = (t / self.duration * T::from_usize(count).unwrap())
                    .floor()
                    .to_usize()
                    .unwrap_or(0)
                    .min(count - 1);
                T::lit(segments[pos] as f64)
            }
        }
    }

    /// Ω(t) = Ω_MS·P(t), exactly zero outside [0, τ].
    pub fn evaluate(&self, t: T) -> T {
        self.omega_ms * self.shape_value(t)
    }

    /// ∫₀^τ Ω²(t) dt by adaptive quadrature (rad²/s).
    pub fn pulse_energy(&self) -> Result<T> {
        let scale = self.omega_ms * self.omega_ms * self.duration;
        let v = quadrature::integrate(
            |t| {
                let o = self.evaluate(t);
                o * o
            },
            T::zero(),
            self.duration,
            &RabiProfile::breakpoints(self),
            scale * T::epsilon() * T::lit(256.0),
        )?;
        Ok(v)
    }

    /// Closed-form pulse energy: Ω²τ for |P| = 1, Ω²τ·(2n−1)!!/(2n)!! for sin^n.
    pub fn pulse_energy_closed_form(&self) -> T {
        let base = self.omega_ms * self.omega_ms * self.duration;
        match self.shape {
            Shape::Square | Shape::Walsh { .. } => base,
            Shape::SinN { n, .. } => {
                let mut ratio = T::one();
                for j in 1..=n {
                    ratio *= T::lit((2 * j - 1) as f64) / T::lit((2 * j) as f64);
                }
                base * ratio
            }
        }
    }
}

impl<T: Real> RabiProfile<T> for PulseEnvelope<T> {
    fn rabi(&self, t: T) -> T {
        self.evaluate(t)
    }

    fn duration(&self) -> T {
        self.duration
    }

    fn breakpoints(&self) -> Vec<T> {
        match &self.shape {
            Shape::Walsh { segments, .. } => {
                let count = T::from_usize(segments.len()).unwrap();
                (1..segments.len())
                    .map(|j| self.duration * T::from_usize(j).unwrap() / count)
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

impl<T: Real> PulseEnvelope<T> {
    pub fn duration(&self) -> T {
        self.duration
    }
}

/// Number of equal segments spanned by the Walsh function of this index.
pub fn walsh_segment_count(index: u32) -> usize {
    (index as usize + 1).next_power_of_two()
}

/// Signs of the sequency-ordered Walsh function `index` on its segments.
///
/// Sequency row `i` is Hadamard (natural-order) row `bitrev(gray(i))`, and the
/// Hadamard entry is (−1)^popcount(row & col).
pub fn walsh_signs(index: u32) -> Vec<i8> {
    let count = walsh_segment_count(index);
    let bits = count.trailing_zeros();
    let gray = (index ^ (index >> 1)) as usize;
    let row = if bits == 0 {
        0
    } else {
        gray.reverse_bits() >> (usize::BITS - bits)
    };
    (0..count)
        .map(|col| if (row & col).count_ones() % 2 == 0 { 1 } else { -1 })
        .collect()
}
