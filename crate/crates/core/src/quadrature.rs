// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The same panel rule drives [`integrate`] and the phase-space integrator in
//! [`crate::trajectory`], which needs nested integrals on a shared grid.

use crate::error::{GateError, Result};
use crate::scalar::Real;

/// Kronrod abscissae on [-1, 1], non-negative half, outermost first.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the embedded 7-point rule (abscissae XGK[1], XGK[3], XGK[5], XGK[7]).
pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub(crate) const MAX_DEPTH: u32 = 40;
/// Panel evaluations after which refinement stops and failure is reported.
pub(crate) const MAX_PANELS: usize = 200_000;

/// 15 Kronrod nodes mapped to [a, b], together with Kronrod and Gauss weights
/// (Gauss weight is zero on the Kronrod-only nodes).
#[derive(Debug, Clone)]
pub(crate) struct PanelRule<T> {
    pub nodes: [T; 15],
    pub wk: [T; 15],
    pub wg: [T; 15],
}

impl<T: Real> PanelRule<T> {
    pub fn new(a: T, b: T) -> Self {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut nodes = [T::zero(); 15];
        let mut wk = [T::zero(); 15];
        let mut wg = [T::zero(); 15];
        for i in 0..7 {
            let x = T::lit(XGK[i]) * half;
            nodes[i] = mid - x;
            nodes[14 - i] = mid + x;
            wk[i] = T::lit(WGK[i]) * half;
            wk[14 - i] = wk[i];
            if i % 2 == 1 {
                wg[i] = T::lit(WG[i / 2]) * half;
                wg[14 - i] = wg[i];
            }
        }
        nodes[7] = mid;
        wk[7] = T::lit(WGK[7]) * half;
        wg[7] = T::lit(WG[3]) * half;
        PanelRule { nodes, wk, wg }
    }

    /// Kronrod estimate and |Kronrod − Gauss| error estimate of Σ w·values.
    #[inline]
    pub fn apply(&self, values: &[T; 15]) -> (T, T) {
        let mut k = T::zero();
        let mut g = T::zero();
        for i in 0..15 {
            k += self.wk[i] * values[i];
            g += self.wg[i] * values[i];
        }
        (k, (k - g).abs())
    }
}

/// Kronrod-only estimate of ∫_a^b f, used for short inner integrals.
#[inline]
pub(crate) fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> T {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut s = T::lit(WGK[7]) * f(mid);
    for i in 0..7 {
        let x = T::lit(XGK[i]) * half;
        s += T::lit(WGK[i]) * (f(mid - x) + f(mid + x));
    }
    s * half
}

/// Sorted, de-duplicated partition of [a, b] that includes every breakpoint
/// strictly inside the interval, with at least `min_panels` panels.
pub(crate) fn partition<T: Real>(a: T, b: T, breakpoints: &[T], min_panels: usize) -> Vec<T> {
    let mut cuts: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let coarse = cuts.len() - 1;
    if coarse >= min_panels || b <= a {
        return cuts;
    }
    // Subdivide each coarse panel proportionally to its length.
    let total = b - a;
    let mut out = vec![a];
    for w in cuts.windows(2) {
        let frac = ((w[1] - w[0]) / total).to_f64_lossy();
        let n = ((frac * min_panels as f64).ceil() as usize).max(1);
        let step = (w[1] - w[0]) / T::from_usize(n).unwrap();
        for j in 1..n {
            out.push(w[0] + step * T::from_usize(j).unwrap());
        }
        out.push(w[1]);
    }
    out
}

/// Adaptive integral of `f` over [a, b] to absolute tolerance `tol`.
///
/// `breakpoints` mark discontinuities of `f`; panels never straddle them.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    tol: T,
) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let total = b - a;
    let mut sum = T::zero();
    let mut err_sum = T::zero();
    let cuts = partition(a, b, breakpoints, 1);
    let mut panels = 0usize;
    for w in cuts.windows(2) {
        let mut stack = vec![(w[0], w[1], 0u32)];
        while let Some((lo, hi, depth)) = stack.pop() {
            let rule = PanelRule::new(lo, hi);
            let mut vals = [T::zero(); 15];
            for (v, &x) in vals.iter_mut().zip(rule.nodes.iter()) {
                *v = f(x);
            }
            let (est, err) = rule.apply(&vals);
            panels += 1;
            let budget = tol * (hi - lo) / total;
            if err <= budget || depth >= MAX_DEPTH || panels >= MAX_PANELS {
                err_sum += err;
                sum += est;
            } else {
                let mid = (lo + hi) * T::lit(0.5);
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
    }
    if err_sum > tol {
        return Err(GateError::NumericFailure {
            context: "adaptive quadrature",
            achieved: err_sum.to_f64_lossy(),
            requested: tol.to_f64_lossy(),
        });
    }
    Ok(sum)
}
