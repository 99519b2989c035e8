// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Two-qubit states in the basis |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ (σ_z|↑⟩ = +|↑⟩).

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64 as C;

pub type SpinVector = [C; 4];
pub type SpinMatrix = [[C; 4]; 4];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// |↓↓⟩
pub fn ground_state() -> SpinVector {
    [ZERO, ZERO, ZERO, ONE]
}

/// (|↑↑⟩ − i·s|↓↓⟩)/√2, the state a closed gate with A(τ) of sign s makes from |↓↓⟩.
pub fn bell_target(phase_sign: i8) -> SpinVector {
    let s = if phase_sign < 0 { -1.0 } else { 1.0 };
    [C::new(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, -I * s * FRAC_1_SQRT_2]
}

/// Number of ions in |↑⟩ for each basis state.
pub(crate) const UP_COUNT: [usize; 4] = [2, 1, 1, 0];

/// S_y = (σ_y ⊗ 1 + 1 ⊗ σ_y)/2
pub(crate) fn sy_matrix() -> SpinMatrix {
    // σ_y|↑⟩ = i|↓⟩, σ_y|↓⟩ = −i|↑⟩
    let sigma_y = [[ZERO, -I], [I, ZERO]];
    let mut m = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let (r1, r2) = (r / 2, r % 2);
            let (c1, c2) = (c / 2, c % 2);
            let mut v = ZERO;
            if r2 == c2 {
                v += sigma_y[r1][c1];
            }
            if r1 == c1 {
                v += sigma_y[r2][c2];
            }
            m[r][c] = v * 0.5;
        }
    }
    m
}

/// Columns are S_y eigenvectors |s₁ s₂⟩_y with |±y⟩ = (|↑⟩ ± i|↓⟩)/√2;
/// returned with their eigenvalues m = (s₁ + s₂)/2.
pub(crate) fn sy_eigenbasis() -> (SpinMatrix, [f64; 4]) {
    let single = |s: f64| [C::new(FRAC_1_SQRT_2, 0.0), I * s * FRAC_1_SQRT_2];
    let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let mut v = [[ZERO; 4]; 4];
    let mut m = [0.0; 4];
    for (col, &(s1, s2)) in signs.iter().enumerate() {
        let (a, b) = (single(s1), single(s2));
        for row in 0..4 {
            v[row][col] = a[row / 2] * b[row % 2];
        }
        m[col] = (s1 + s2) / 2.0;
    }
    (v, m)
}

/// Single-qubit π/2 rotation about cos φ·x + sin φ·y, applied to both ions.
pub fn analysis_pulse(phi: f64) -> SpinMatrix {
    let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    let axis = C::new(phi.cos(), phi.sin());
    // exp(−iπ/4 (cos φ σx + sin φ σy)) = c·1 − i s (0, e^{−iφ}; e^{iφ}, 0)
    let r = [[C::new(c, 0.0), -I * s * axis.conj()], [-I * s * axis, C::new(c, 0.0)]];
    let mut u = [[ZERO; 4]; 4];
    for row in 0..4 {
        for col in 0..4 {
            u[row][col] = r[row / 2][col / 2] * r[row % 2][col % 2];
        }
    }
    u
}

/// Two-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDensity(pub SpinMatrix);

impl Default for SpinDensity {
    fn default() -> Self {
        SpinDensity([[ZERO; 4]; 4])
    }
}

impl SpinDensity {
    pub fn pure(psi: &SpinVector) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = psi[r] * psi[c].conj();
            }
        }
        SpinDensity(m)
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[i][i].re).sum()
    }

    /// (p0, p1, p2): probabilities of 0, 1 and 2 ions in |↑⟩.
    pub fn populations(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for i in 0..4 {
            p[UP_COUNT[i]] += self.0[i][i].re;
        }
        p
    }

    /// ⟨ψ|ρ|ψ⟩
    pub fn fidelity(&self, psi: &SpinVector) -> f64 {
        let mut f = ZERO;
        for r in 0..4 {
            for c in 0..4 {
                f += psi[r].conj() * self.0[r][c] * psi[c];
            }
        }
        f.re
    }

    pub fn bell_fidelity(&self, phase_sign: i8) -> f64 {
        self.fidelity(&bell_target(phase_sign))
    }

    /// U ρ U†
    pub fn transform(&self, u: &SpinMatrix) -> Self {
        let mut tmp = [[ZERO; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                tmp[r][c] = (0..4).map(|k| u[r][k] * self.0[k][c]).sum();
            }
        }
        let mut out = [[ZERO; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] = (0..4).map(|k| tmp[r][k] * u[c][k].conj()).sum();
            }
        }
        SpinDensity(out)
    }

    /// ⟨σ_z ⊗ σ_z⟩ = p0 + p2 − p1
    pub fn parity(&self) -> f64 {
        let p = self.populations();
        p[0] + p[2] - p[1]
    }

    /// Parity after a π/2 analysis pulse of phase φ on both ions.
    pub fn parity_after_analysis(&self, phi: f64) -> f64 {
        self.transform(&analysis_pulse(phi)).parity()
    }

    pub(crate) fn add_scaled(&mut self, other: &SpinDensity, w: f64) {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] += other.0[r][c] * w;
            }
        }
    }
}
