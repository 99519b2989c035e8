// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! Brute-force propagation in spin ⊗ truncated Fock space.
//!
//! H(t) = S_y ⊗ (F'(t)x + G'(t)p) + P²(t) Σ_j Δ_j/2 σ_z^j with
//! F' = −√2Ω cos θ, G' = −√2Ω sin θ and θ(t) the drive phase, which
//! reproduces U = e^{−iA S_y²} e^{−iF S_y x} e^{−iG S_y p}. Steps use the
//! fourth-order commutator-free exponential integrator, each exponential
//! applied to the state by a Taylor series. Heating adds Lindblad terms
//! √ṅ·a and √ṅ·a†, Strang-split around the unitary step.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::envelopes::RabiProfile;
use crate::error::{GateError, Result};
use crate::solver::GateSolution;

use super::spin::{ground_state, sy_matrix, SpinDensity, SpinMatrix, SpinVector};
use super::{check_times, ErrorModel, PopulationRecord, ThermalSpec};

const ZERO: C = C::new(0.0, 0.0);
const TAYLOR_MAX_TERMS: usize = 60;

/// Settings of the numeric propagator.
#[derive(Clone)]
pub struct FockOptions<'a> {
    /// Overrides `ThermalSpec::fock_cutoff` and the automatic choice.
    pub cutoff: Option<usize>,
    /// Steps per period of the fastest frequency in the problem.
    pub steps_per_period: f64,
    /// Repeat at twice the cutoff and fail if results move by more than
    /// `convergence_tol`.
    pub check_convergence: bool,
    pub convergence_tol: f64,
    /// Times at which the spin state is recorded (non-decreasing; values past
    /// τ repeat the final state).
    pub record_times: Vec<f64>,
    pub initial: SpinVector,
    /// Drive phase θ(t) replacing (δ + ε)t, for time-dependent detuning.
    pub phase: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    /// Kinks of `phase`; steps are aligned to them.
    pub phase_breakpoints: Vec<f64>,
    /// Largest |dθ/dt| of `phase` (rad/s); sets the step size.
    pub phase_rate_bound: Option<f64>,
}

impl Default for FockOptions<'_> {
    fn default() -> Self {
        FockOptions {
            cutoff: None,
            steps_per_period: 200.0,
            check_convergence: false,
            convergence_tol: 1e-6,
            record_times: Vec::new(),
            initial: ground_state(),
            phase: None,
            phase_breakpoints: Vec::new(),
            phase_rate_bound: None,
        }
    }
}

/// Final spin state of a propagation and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOutcome {
    pub spin: SpinDensity,
    pub populations: [f64; 3],
    pub bell_fidelity: f64,
    pub cutoff: usize,
    pub steps: usize,
    /// Largest |‖ψ‖² − 1| over mixture members, or |Tr ρ − 1| with heating.
    pub norm_error: f64,
    /// Largest change of populations and fidelity on doubling the cutoff.
    pub convergence_change: Option<f64>,
    pub record: Option<PopulationRecord>,
}

pub fn fock_propagate(
    sol: &GateSolution<f64>,
    errors: &ErrorModel,
    thermal: &ThermalSpec,
) -> Result<FockOutcome> {
    fock_propagate_with(sol, errors, thermal, &FockOptions::default())
}

pub fn fock_propagate_with(
    sol: &GateSolution<f64>,
    errors: &ErrorModel,
    thermal: &ThermalSpec,
    opts: &FockOptions<'_>,
) -> Result<FockOutcome> {
    errors.validate()?;
    check_times(&opts.record_times)?;
    if !(opts.steps_per_period >= 1.0) {
        return Err(GateError::invalid("steps_per_period", "must be at least 1"));
    }
    let cutoff = match opts.cutoff.or(thermal.fock_cutoff) {
        Some(n) if n < thermal.populated_levels() => {
            return Err(GateError::invalid(
                "fock_cutoff",
                format!(
                    "{n} levels drop thermal weight above {}",
                    super::THERMAL_WEIGHT_CUTOFF
                ),
            ))
        }
        Some(n) => n,
        None => auto_cutoff(sol, errors, thermal),
    };
    let first = run(sol, errors, thermal, opts, cutoff)?;
    if !opts.check_convergence {
        return Ok(first);
    }
    let second = run(sol, errors, thermal, opts, 2 * cutoff)?;
    let mut change = (first.bell_fidelity - second.bell_fidelity).abs();
    for i in 0..3 {
        change = change.max((first.populations[i] - second.populations[i]).abs());
    }
    if let (Some(a), Some(b)) = (&first.record, &second.record) {
        change = change.max(a.max_abs_diff(b));
    }
    if change > opts.convergence_tol {
        return Err(GateError::NumericFailure {
            context: "Fock cutoff convergence (change on doubling)",
            achieved: change,
            requested: opts.convergence_tol,
        });
    }
    Ok(FockOutcome {
        convergence_change: Some(change),
        ..first
    })
}

/// Thermal levels plus room for the largest coherent displacement and heating.
fn auto_cutoff(sol: &GateSolution<f64>, errors: &ErrorModel, thermal: &ThermalSpec) -> usize {
    // A constant drive at detuning δ reaches |α|² = (F² + G²)/2 ≤ 4Ω²/δ²;
    // envelopes only shrink the loops.
    let delta = (sol.delta() + errors.static_detuning).abs();
    let disp = 4.0 * (sol.omega_ms() / delta).powi(2);
    let heating = errors.heating_rate * sol.duration();
    thermal.populated_levels() + 8 + (8.0 * disp + 20.0 * heating).ceil() as usize
}

struct Model<'a> {
    sol: &'a GateSolution<f64>,
    sy: SpinMatrix,
    zeeman: [f64; 4],
    delta: f64,
    phase: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    n: usize,
    sqrt: Vec<f64>,
}

/// Coefficients of H at one instant: M = κa + κ*a† with κ = (F' − iG')/√2,
/// and the weight P² of the Zeeman term.
#[derive(Clone, Copy)]
struct Coeffs {
    kappa: C,
    z: f64,
}

impl Model<'_> {
    fn coeffs(&self, t: f64) -> Coeffs {
        let env = self.sol.envelope();
        let om = env.rabi(t);
        let theta = match self.phase {
            Some(ph) => ph(t),
            None => self.delta * t,
        };
        let fp = -SQRT_2 * om * theta.cos();
        let gp = -SQRT_2 * om * theta.sin();
        let p = env.shape_value(t);
        Coeffs {
            kappa: C::new(fp, -gp) / SQRT_2,
            z: p * p,
        }
    }

    fn dim(&self) -> usize {
        4 * self.n
    }

    /// out = H ψ
    fn apply(&self, h: Coeffs, psi: &[C], out: &mut [C], scratch: &mut [C]) {
        let n = self.n;
        let kc = h.kappa.conj();
        for s in 0..4 {
            let src = &psi[s * n..(s + 1) * n];
            let dst = &mut scratch[s * n..(s + 1) * n];
            for k in 0..n {
                let mut v = ZERO;
                if k + 1 < n {
                    v += h.kappa * self.sqrt[k + 1] * src[k + 1];
                }
                if k > 0 {
                    v += kc * self.sqrt[k] * src[k - 1];
                }
                dst[k] = v;
            }
        }
        for s in 0..4 {
            let zs = h.z * self.zeeman[s];
            for k in 0..n {
                let mut v = C::new(0.0, 0.0);
                for (sp, &m) in self.sy[s].iter().enumerate() {
                    if m != ZERO {
                        v += m * scratch[sp * n + k];
                    }
                }
                out[s * n + k] = v + psi[s * n + k] * zs;
            }
        }
    }

    /// ψ ← exp(−i dt H) ψ
    fn expm(&self, h: Coeffs, dt: f64, psi: &mut [C], work: &mut Work) -> Result<()> {
        work.term.copy_from_slice(psi);
        let mut scale = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt();
        if scale == 0.0 {
            return Ok(());
        }
        for j in 1..=TAYLOR_MAX_TERMS {
            self.apply(h, &work.term, &mut work.next, &mut work.scratch);
            let f = C::new(0.0, -dt / j as f64);
            let mut size = 0.0f64;
            for (t, nx) in work.term.iter_mut().zip(work.next.iter()) {
                *t = nx * f;
                size = size.max(t.norm_sqr());
            }
            for (p, t) in psi.iter_mut().zip(work.term.iter()) {
                *p += t;
            }
            if size.sqrt() <= 1e-17 * scale {
                return Ok(());
            }
            scale = scale.max(size.sqrt());
        }
        Err(GateError::NumericFailure {
            context: "Taylor exponential did not converge; step too large",
            achieved: dt,
            requested: 0.0,
        })
    }

    /// One CF4 step of length h from t.
    fn step(&self, t: f64, h: f64, psi: &mut [C], work: &mut Work) -> Result<()> {
        let (e1, e2) = cf4_exponents(self, t, h);
        self.expm(e1, h, psi, work)?;
        self.expm(e2, h, psi, work)
    }
}

fn cf4_exponents(model: &Model<'_>, t: f64, h: f64) -> (Coeffs, Coeffs) {
    let r3 = 3f64.sqrt();
    let (a1, a2) = ((3.0 - 2.0 * r3) / 12.0, (3.0 + 2.0 * r3) / 12.0);
    let h1 = model.coeffs(t + (0.5 - r3 / 6.0) * h);
    let h2 = model.coeffs(t + (0.5 + r3 / 6.0) * h);
    let mix = |x: f64, y: f64| Coeffs {
        kappa: h1.kappa * x + h2.kappa * y,
        z: h1.z * x + h2.z * y,
    };
    // exp(−ih(α₁H₁ + α₂H₂)) · exp(−ih(α₂H₁ + α₁H₂)), rightmost first
    (mix(a2, a1), mix(a1, a2))
}

struct Work {
    term: Vec<C>,
    next: Vec<C>,
    scratch: Vec<C>,
}

impl Work {
    fn new(dim: usize) -> Self {
        Work {
            term: vec![ZERO; dim],
            next: vec![ZERO; dim],
            scratch: vec![ZERO; dim],
        }
    }
}

/// Step grid over [0, τ], aligned to breakpoints and record times.
fn step_grid(sol: &GateSolution<f64>, opts: &FockOptions<'_>, max_step: f64) -> Vec<(f64, f64, usize)> {
    let tau = sol.duration();
    let mut cuts = vec![0.0, tau];
    cuts.extend(sol.envelope().breakpoints());
    cuts.extend(opts.record_times.iter().copied());
    cuts.extend(opts.phase_breakpoints.iter().copied());
    cuts.retain(|&t| (0.0..=tau).contains(&t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * tau);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let steps = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
            (w[0], w[1], steps)
        })
        .collect()
}

fn run(
    sol: &GateSolution<f64>,
    errors: &ErrorModel,
    thermal: &ThermalSpec,
    opts: &FockOptions<'_>,
    cutoff: usize,
) -> Result<FockOutcome> {
    let residual = errors.residual_zeeman();
    let mut zeeman = [0.0; 4];
    for (s, z) in zeeman.iter_mut().enumerate() {
        let (up1, up2) = (s / 2 == 0, s % 2 == 0);
        let sz = |up: bool| if up { 1.0 } else { -1.0 };
        *z = 0.5 * (residual[0] * sz(up1) + residual[1] * sz(up2));
    }
    let delta = sol.delta() + errors.static_detuning;
    let model = Model {
        sol,
        sy: sy_matrix(),
        zeeman,
        delta,
        phase: opts.phase,
        n: cutoff,
        sqrt: (0..=cutoff).map(|k| (k as f64).sqrt()).collect(),
    };
    let rate = opts.phase_rate_bound.unwrap_or(delta.abs());
    let fastest = rate
        .max(sol.omega_ms())
        .max(residual[0].abs() + residual[1].abs());
    let max_step = 2.0 * PI / (opts.steps_per_period * fastest);
    let grid = step_grid(sol, opts, max_step);
    let steps = grid.iter().map(|g| g.2).sum();

    let (states, final_state, norm_error) = if errors.heating_rate > 0.0 {
        open_system(&model, errors.heating_rate, thermal, opts, &grid)?
    } else {
        closed_system(&model, thermal, opts, &grid)?
    };
    let record = if opts.record_times.is_empty() {
        None
    } else {
        Some(PopulationRecord::from_states(&opts.record_times, &states))
    };
    Ok(FockOutcome {
        populations: final_state.populations(),
        bell_fidelity: final_state.bell_fidelity(sol.phase_sign()),
        spin: final_state,
        cutoff,
        steps,
        norm_error,
        convergence_change: None,
        record,
    })
}

/// Walks the grid, calling `advance(t, h)` per step and `snapshot()` at
/// every record time reached.
fn walk<S>(
    grid: &[(f64, f64, usize)],
    record_times: &[f64],
    mut advance: impl FnMut(f64, f64) -> Result<()>,
    mut snapshot: impl FnMut() -> S,
) -> Result<Vec<S>> {
    let mut out = Vec::with_capacity(record_times.len());
    let mut next = 0;
    let emit = |t: f64, out: &mut Vec<S>, next: &mut usize, snap: &mut dyn FnMut() -> S| {
        while *next < record_times.len() && record_times[*next] <= t {
            out.push(snap());
            *next += 1;
        }
    };
    if let Some(&(start, _, _)) = grid.first() {
        emit(start, &mut out, &mut next, &mut snapshot);
    }
    for &(a, b, n) in grid {
        let h = (b - a) / n as f64;
        for i in 0..n {
            advance(a + i as f64 * h, h)?;
        }
        emit(b, &mut out, &mut next, &mut snapshot);
    }
    while next < record_times.len() {
        out.push(snapshot());
        next += 1;
    }
    Ok(out)
}

fn reduce_pure(psi: &[C], n: usize) -> SpinDensity {
    let mut rho = SpinDensity::default();
    for r in 0..4 {
        for c in 0..4 {
            rho.0[r][c] = (0..n).map(|k| psi[r * n + k] * psi[c * n + k].conj()).sum();
        }
    }
    rho
}

type Propagated = (Vec<SpinDensity>, SpinDensity, f64);

fn closed_system(
    model: &Model<'_>,
    thermal: &ThermalSpec,
    opts: &FockOptions<'_>,
    grid: &[(f64, f64, usize)],
) -> Result<Propagated> {
    let n = model.n;
    let weights = thermal.weights();
    let members: Vec<Result<Propagated>> = weights
        .par_iter()
        .enumerate()
        .map(|(level, _)| {
            let mut psi = vec![ZERO; model.dim()];
            for s in 0..4 {
                psi[s * n + level] = opts.initial[s];
            }
            let norm0: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            let mut work = Work::new(model.dim());
            let cell = std::cell::RefCell::new(psi);
            let states = walk(
                grid,
                &opts.record_times,
                |t, h| model.step(t, h, &mut cell.borrow_mut(), &mut work),
                || reduce_pure(&cell.borrow(), n),
            )?;
            let psi = cell.into_inner();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            Ok((states, reduce_pure(&psi, n), (norm - norm0).abs()))
        })
        .collect();
    let mut states = vec![SpinDensity::default(); opts.record_times.len()];
    let mut total = SpinDensity::default();
    let mut norm_error = 0.0f64;
    for (member, &w) in members.into_iter().zip(&weights) {
        let (s, fin, err) = member?;
        for (acc, x) in states.iter_mut().zip(&s) {
            acc.add_scaled(x, w);
        }
        total.add_scaled(&fin, w);
        norm_error = norm_error.max(err);
    }
    Ok((states, total, norm_error))
}

/// Density matrix stored column-major, D×D with D = 4N.
struct Density {
    d: usize,
    n: usize,
    data: Vec<C>,
}

impl Density {
    fn reduce(&self) -> SpinDensity {
        let mut rho = SpinDensity::default();
        for r in 0..4 {
            for c in 0..4 {
                rho.0[r][c] = (0..self.n)
                    .map(|k| self.data[(c * self.n + k) * self.d + r * self.n + k])
                    .sum();
            }
        }
        rho
    }

    fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.data[i * self.d + i].re).sum()
    }

    fn conj_transpose_into(&self, out: &mut [C]) {
        for c in 0..self.d {
            for r in 0..self.d {
                out[r * self.d + c] = self.data[c * self.d + r].conj();
            }
        }
    }
}

/// ρ ← ρ + dt·L[ρ] by classic RK4, with L the heating dissipator at rate γ.
fn dissipate(rho: &mut Density, gamma: f64, dt: f64, k: &mut [Vec<C>; 5]) {
    let (d, n) = (rho.d, rho.n);
    let lindblad = |src: &[C], dst: &mut [C]| {
        for col in 0..d {
            let (sc, kc) = (col / n, col % n);
            for row in 0..d {
                let (sr, kr) = (row / n, row % n);
                let at = |r: usize, c: usize| src[(sc * n + c) * d + sr * n + r];
                let mut v = ZERO;
                // a ρ a†
                if kr + 1 < n && kc + 1 < n {
                    v += at(kr + 1, kc + 1) * ((kr + 1) as f64 * (kc + 1) as f64).sqrt();
                }
                // a† ρ a
                if kr > 0 && kc > 0 {
                    v += at(kr - 1, kc - 1) * (kr as f64 * kc as f64).sqrt();
                }
                // −½{a†a + a a†, ρ}; a a† loses its top level under truncation
                let occ = |k: usize| k as f64 + if k + 1 < n { (k + 1) as f64 } else { 0.0 };
                v -= at(kr, kc) * (0.5 * (occ(kr) + occ(kc)));
                dst[col * d + row] = v * gamma;
            }
        }
    };
    let [k1, k2, k3, k4, tmp] = k;
    lindblad(&rho.data, k1);
    for i in 0..d * d {
        tmp[i] = rho.data[i] + k1[i] * (0.5 * dt);
    }
    lindblad(tmp, k2);
    for i in 0..d * d {
        tmp[i] = rho.data[i] + k2[i] * (0.5 * dt);
    }
    lindblad(tmp, k3);
    for i in 0..d * d {
        tmp[i] = rho.data[i] + k3[i] * dt;
    }
    lindblad(tmp, k4);
    for i in 0..d * d {
        rho.data[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
}

fn open_system(
    model: &Model<'_>,
    gamma: f64,
    thermal: &ThermalSpec,
    opts: &FockOptions<'_>,
    grid: &[(f64, f64, usize)],
) -> Result<Propagated> {
    let (n, d) = (model.n, model.dim());
    let weights = thermal.weights();
    let mut rho = Density {
        d,
        n,
        data: vec![ZERO; d * d],
    };
    for (level, &w) in weights.iter().enumerate() {
        for sr in 0..4 {
            for sc in 0..4 {
                let v = opts.initial[sr] * opts.initial[sc].conj() * w;
                rho.data[(sc * n + level) * d + sr * n + level] = v;
            }
        }
    }
    let trace0 = rho.trace();
    let cell = std::cell::RefCell::new(rho);
    let mut buf = vec![ZERO; d * d];
    let mut k: [Vec<C>; 5] = std::array::from_fn(|_| vec![ZERO; d * d]);
    let states = walk(
        grid,
        &opts.record_times,
        |t, h| {
            let mut rho = cell.borrow_mut();
            dissipate(&mut rho, gamma, 0.5 * h, &mut k);
            let (e1, e2) = cf4_exponents(model, t, h);
            // ρ ← U ρ U† as (U (U ρ)†)†, columns in parallel.
            for _ in 0..2 {
                let cols: Vec<Result<()>> = rho
                    .data
                    .par_chunks_mut(d)
                    .map_init(
                        || Work::new(d),
                        |work, col| {
                            model.expm(e1, h, col, work)?;
                            model.expm(e2, h, col, work)
                        },
                    )
                    .collect();
                cols.into_iter().collect::<Result<()>>()?;
                rho.conj_transpose_into(&mut buf);
                std::mem::swap(&mut rho.data, &mut buf);
            }
            dissipate(&mut rho, gamma, 0.5 * h, &mut k);
            Ok(())
        },
        || cell.borrow().reduce(),
    )?;
    let rho = cell.into_inner();
    let norm_error = (rho.trace() - trace0).abs();
    Ok((states, rho.reduce(), norm_error))
}
