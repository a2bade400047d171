//! Time integration of the Galerkin ODE system with an integrating-factor
//! IMEX scheme, plus an independent finite-difference reference path.
//!
//! The diffusion operator is diagonal in the sine basis, so the integrating
//! factor treats it exactly and unconditionally stably; only the reaction
//! law is stepped explicitly (Euler or midpoint in the transformed
//! variable). Blow-up is reported, never silently clamped: the continuous
//! system cannot blow up, so a non-finite state always means the step size
//! was too large for the explicit part.

use crate::error::{Error, Result};
use crate::model::{self, Parameters};
use crate::spectral::{self, ModalState, NormReport, SineBasis};
use serde::{Deserialize, Serialize};

/// Time stepping scheme for the explicit (reaction) part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Integrating factor with explicit Euler on the transformed variable.
    IfEuler,
    /// Integrating factor with explicit midpoint (second order).
    IfRk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Observable sampling stride, in steps.
    pub sample_every: usize,
    /// State storage stride, in steps; 0 disables state storage.
    pub store_every: usize,
    /// Halve the step on non-finite states or embedded-error violations.
    pub adaptive: bool,
    /// Relative error tolerance driving adaptive halving (if_rk2 only).
    pub tol: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, t_end: f64, sample_every: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            scheme,
            t_end,
            sample_every,
            store_every: 0,
            adaptive: false,
            tol: 1e-4,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_storage(mut self, store_every: usize) -> Self {
        self.store_every = store_every;
        self
    }

    pub fn with_adaptive(mut self, tol: f64) -> Self {
        self.adaptive = true;
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::NonPositive {
                name: "dt",
                value: self.dt,
            });
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::NonPositive {
                name: "t_end",
                value: self.t_end,
            });
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidArgument {
                what: "IntegratorConfig",
                message: "sample_every must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Suggested step size: `dt` such that `dt * |f'| <= 0.1`, with the local
/// Lipschitz scale estimated from the state's grid sup-norm.
pub fn suggested_dt(ms: &ModalState, basis: &SineBasis, prm: &Parameters) -> Result<f64> {
    let grid = spectral::to_grid(ms, basis)?;
    let s = grid.sup_norm();
    let scale = jacobian_scale(s, prm);
    Ok(0.1 / scale)
}

fn jacobian_scale(sup: f64, prm: &Parameters) -> f64 {
    // Row-sum bound of the reaction Jacobian at sup-norm amplitude `sup`.
    let s2 = sup * sup;
    let row1 = 3.0 * s2 + prm.b() + prm.k() + 2.0 * prm.c1() + prm.n_rev();
    let row2 = 3.0 * s2 + prm.b() + 2.0 * prm.c2();
    let row3 = prm.k() + prm.lambda() + prm.n_rev() + 2.0 * prm.c3();
    row1.max(row2).max(row3).max(1e-12)
}

/// One time-stamped observable sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub norms: NormReport,
}

/// Time-stamped sequence of observable samples plus optionally stored
/// states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// States stored every `store_every` steps (always includes the first
    /// and last step when enabled).
    pub states: Vec<ModalState>,
    pub initial: ModalState,
    /// The state at the end of the run, independent of `store_every`.
    pub final_state: ModalState,
    /// Step size actually used at the end of the run (smaller than the
    /// configured `dt` if adaptive halving triggered).
    pub dt_final: f64,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }
}

/// Precomputed integrating factors for one step size.
pub(crate) struct Stepper<'a> {
    basis: &'a SineBasis,
    prm: &'a Parameters,
    pub(crate) dt: f64,
    scheme: Scheme,
    /// `exp(-d_c lambda_j dt)` per component block.
    pub(crate) e_full: [Vec<f64>; 6],
    /// `exp(-d_c lambda_j dt / 2)`.
    pub(crate) e_half: [Vec<f64>; 6],
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(basis: &'a SineBasis, prm: &'a Parameters, dt: f64, scheme: Scheme) -> Self {
        let diff = model::diffusivities(prm);
        let e_full: [Vec<f64>; 6] = std::array::from_fn(|c| {
            basis
                .eigenvalues()
                .iter()
                .map(|l| (-diff[c] * l * dt).exp())
                .collect()
        });
        let e_half: [Vec<f64>; 6] = std::array::from_fn(|c| {
            basis
                .eigenvalues()
                .iter()
                .map(|l| (-diff[c] * l * dt * 0.5).exp())
                .collect()
        });
        Self {
            basis,
            prm,
            dt,
            scheme,
            e_full,
            e_half,
        }
    }

    pub(crate) fn apply_factor(state: &mut ModalState, factors: &[Vec<f64>; 6]) {
        for comp in 0..6 {
            for (c, e) in state.block_mut(comp).iter_mut().zip(&factors[comp]) {
                *c *= e;
            }
        }
    }

    /// Advances one step. Returns the new state; non-finite results are the
    /// caller's to detect.
    pub(crate) fn advance(&self, ms: &ModalState) -> Result<ModalState> {
        self.advance_keep_stage(ms).map(|(next, _)| next)
    }

    /// As [`Self::advance`], also returning the first-stage evaluation
    /// `f(ms)` so callers can form the embedded Euler comparison for free.
    pub(crate) fn advance_keep_stage(&self, ms: &ModalState) -> Result<(ModalState, ModalState)> {
        let dt = self.dt;
        match self.scheme {
            Scheme::IfEuler => {
                let f = spectral::nonlinear_galerkin(ms, self.basis, self.prm)?;
                let mut next = ms.clone();
                next.axpy(dt, &f);
                Self::apply_factor(&mut next, &self.e_full);
                next.time = ms.time + dt;
                Ok((next, f))
            }
            Scheme::IfRk2 => {
                let f0 = spectral::nonlinear_galerkin(ms, self.basis, self.prm)?;
                // Half-advanced stage in the transformed variable.
                let mut qh = ms.clone();
                qh.axpy(0.5 * dt, &f0);
                Self::apply_factor(&mut qh, &self.e_half);
                qh.time = ms.time + 0.5 * dt;
                let f1 = spectral::nonlinear_galerkin(&qh, self.basis, self.prm)?;
                let mut next = ms.clone();
                Self::apply_factor(&mut next, &self.e_full);
                let mut incr = f1;
                Self::apply_factor(&mut incr, &self.e_half);
                next.axpy(dt, &incr);
                next.time = ms.time + dt;
                Ok((next, f0))
            }
        }
    }
}

/// Cheap upper bound on the grid sup-norm from the coefficient l1 norm.
fn coeff_sup_bound(ms: &ModalState, basis: &SineBasis) -> f64 {
    let amp: f64 = basis
        .domain()
        .lengths()
        .iter()
        .map(|l| (2.0 / l).sqrt())
        .product();
    let max_sum = (0..6)
        .map(|c| ms.block(c).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    amp * max_sum
}

fn max_abs_coeff(ms: &ModalState) -> f64 {
    ms.blocks()
        .iter()
        .flat_map(|b| b.iter())
        .fold(0.0_f64, |m, c| {
            if c.is_finite() {
                m.max(c.abs())
            } else {
                f64::INFINITY
            }
        })
}

/// Full Galerkin right-hand side `Lambda q + P_m f(g_m)`: diagonal diffusion
/// plus the projected reaction law.
pub fn galerkin_rhs(ms: &ModalState, basis: &SineBasis, prm: &Parameters) -> Result<ModalState> {
    let mut rhs = spectral::nonlinear_galerkin(ms, basis, prm)?;
    let diff = model::diffusivities(prm);
    for comp in 0..6 {
        let d = diff[comp];
        for (r, (c, l)) in rhs
            .block_mut(comp)
            .iter_mut()
            .zip(ms.block(comp).iter().zip(basis.eigenvalues()))
        {
            *r -= d * l * c;
        }
    }
    Ok(rhs)
}

/// Advances one step of the configured scheme.
pub fn step(
    ms: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
    cfg: &IntegratorConfig,
) -> Result<ModalState> {
    cfg.validate()?;
    let stepper = Stepper::new(basis, prm, cfg.dt, cfg.scheme);
    let next = stepper.advance(ms)?;
    if !next.is_finite() {
        return Err(Error::BlowUp {
            time: next.time,
            sup_norm: max_abs_coeff(&next),
        });
    }
    Ok(next)
}

/// Integrates from `g0` to `t_end`, sampling norm observables every
/// `sample_every` steps (plus the initial and final step) and storing states
/// on the `store_every` stride when enabled.
///
/// Deterministic for fixed inputs. With `adaptive` set, the step is halved
/// and the run restarted from the last accepted state when a step produces a
/// non-finite state or (for `if_rk2`) the embedded Euler/midpoint difference
/// exceeds `tol` relative to the state norm.
pub fn simulate(
    g0: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut dt = cfg.dt;
    let mut n_steps = steps_for(cfg.t_end, dt);
    let t0 = g0.time;

    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut current = g0.clone();
    current.time = t0;
    samples.push(Sample {
        t: t0,
        norms: spectral::norms(&current, basis)?,
    });
    if cfg.store_every > 0 {
        states.push(current.clone());
    }

    let mut stepper = Stepper::new(basis, prm, dt, cfg.scheme);
    let mut halvings = 0u32;
    let mut i = 0usize;
    while i < n_steps {
        let (mut next, f0) = stepper.advance_keep_stage(&current)?;
        next.time = t0 + (i as f64 + 1.0) * dt;

        let mut reject = !next.is_finite();
        if !reject && cfg.adaptive {
            // Reject incipient blow-up before the state becomes non-finite:
            // either a violent one-step norm jump, or a step size that
            // exceeds the explicit-midpoint stability budget at the landing
            // state's amplitude.
            let grown = next.h_norm_sq().sqrt() > 10.0 * (current.h_norm_sq().sqrt() + 1.0);
            let stiff = dt * jacobian_scale(coeff_sup_bound(&next, basis), prm) > 1.0;
            reject = grown || stiff;
            if !reject && cfg.scheme == Scheme::IfRk2 {
                // Embedded first-order comparison, reusing the first stage.
                let mut euler = current.clone();
                euler.axpy(dt, &f0);
                Stepper::apply_factor(&mut euler, &stepper.e_full);
                let scale = current.h_norm_sq().sqrt().max(1.0);
                reject = euler.distance(&next) / scale > cfg.tol;
            }
        }
        if reject {
            if !cfg.adaptive || halvings >= 40 {
                return Err(Error::BlowUp {
                    time: next.time,
                    sup_norm: max_abs_coeff(&next),
                });
            }
            // Restart with a halved step; the already-computed portion of
            // the trajectory stays valid because halving divides the old
            // step boundaries.
            halvings += 1;
            dt *= 0.5;
            i *= 2;
            n_steps *= 2;
            stepper = Stepper::new(basis, prm, dt, cfg.scheme);
            continue;
        }

        current = next;
        i += 1;
        let step_scaling = 1usize << halvings;
        let on_original_grid = i % step_scaling == 0;
        let orig_index = i / step_scaling;
        if on_original_grid && (orig_index % cfg.sample_every == 0 || i == n_steps) {
            samples.push(Sample {
                t: current.time,
                norms: spectral::norms(&current, basis)?,
            });
        }
        if cfg.store_every > 0
            && on_original_grid
            && (orig_index % cfg.store_every == 0 || i == n_steps)
        {
            states.push(current.clone());
        }
    }

    Ok(Trajectory {
        samples,
        states,
        initial: g0.clone(),
        final_state: current,
        dt_final: dt,
    })
}

fn steps_for(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) - 1e-9).ceil().max(1.0) as usize
}

pub mod fd {
    //! Independent method-of-lines reference on a uniform 1D grid:
    //! second-order centered Laplacian with Strang splitting, Crank-Nicolson
    //! on diffusion (Thomas solves) and explicit midpoint on the reaction.
    //! Shares no code with the spectral path.

    use super::*;

    /// Reference trajectory: per-sample L2 norms of each component and the
    /// final grid fields.
    #[derive(Debug, Clone)]
    pub struct FdTrajectory {
        /// Full grid including both boundary nodes.
        pub x: Vec<f64>,
        pub times: Vec<f64>,
        pub l2_sq: Vec<[f64; 6]>,
        pub final_fields: [Vec<f64>; 6],
    }

    /// Solves a constant-coefficient tridiagonal system `(-alpha, beta,
    /// -alpha) x = rhs` in place via the Thomas algorithm.
    fn thomas(alpha: f64, beta: f64, rhs: &mut [f64], scratch: &mut [f64]) {
        let n = rhs.len();
        scratch[0] = -alpha / beta;
        rhs[0] /= beta;
        for i in 1..n {
            let m = beta + alpha * scratch[i - 1];
            scratch[i] = -alpha / m;
            rhs[i] = (rhs[i] + alpha * rhs[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
    }

    /// Crank-Nicolson half of the splitting: advances diffusion of one
    /// component by `tau`.
    fn cn_diffusion(field: &mut [f64], d: f64, tau: f64, h: f64, scratch: &mut Vec<f64>) {
        let n_int = field.len() - 2;
        let alpha = d * tau / (2.0 * h * h);
        let beta = 1.0 + 2.0 * alpha;
        let mut rhs = vec![0.0; n_int];
        for i in 0..n_int {
            let (l, c, r) = (field[i], field[i + 1], field[i + 2]);
            rhs[i] = alpha * l + (1.0 - 2.0 * alpha) * c + alpha * r;
        }
        scratch.resize(n_int, 0.0);
        thomas(alpha, beta, &mut rhs, scratch);
        field[1..=n_int].copy_from_slice(&rhs);
        field[0] = 0.0;
        *field.last_mut().unwrap() = 0.0;
    }

    fn reaction_midpoint(fields: &mut [Vec<f64>; 6], prm: &Parameters, dt: f64) {
        let n = fields[0].len();
        for i in 1..n - 1 {
            let s: [f64; 6] = std::array::from_fn(|c| fields[c][i]);
            let f0 = model::reaction_rates(s, prm);
            let mid: [f64; 6] = std::array::from_fn(|c| s[c] + 0.5 * dt * f0[c]);
            let f1 = model::reaction_rates(mid, prm);
            for c in 0..6 {
                fields[c][i] = s[c] + dt * f1[c];
            }
        }
    }

    fn l2_sq(field: &[f64], h: f64) -> f64 {
        // Trapezoid with zero boundary values.
        h * field[1..field.len() - 1].iter().map(|v| v * v).sum::<f64>()
    }

    /// Integrates the same system on a uniform 1D grid (`g0` given on the
    /// full grid including boundary nodes, which are held at zero).
    pub fn fd_reference_simulate(
        g0: &[Vec<f64>; 6],
        dom: &crate::spectral::DomainSpec,
        prm: &Parameters,
        cfg: &IntegratorConfig,
    ) -> Result<FdTrajectory> {
        cfg.validate()?;
        if dom.dim() != 1 {
            return Err(Error::InvalidArgument {
                what: "fd_reference_simulate",
                message: "the finite-difference reference path supports 1D domains only".into(),
            });
        }
        let nodes = g0[0].len();
        if nodes < 3 {
            return Err(Error::InvalidArgument {
                what: "fd_reference_simulate",
                message: format!("need at least 3 grid nodes, got {nodes}"),
            });
        }
        for f in g0.iter() {
            if f.len() != nodes {
                return Err(Error::ShapeMismatch {
                    what: "fd_reference_simulate",
                    expected: nodes,
                    got: f.len(),
                });
            }
        }
        let l = dom.lengths()[0];
        let h = l / (nodes as f64 - 1.0);
        let x: Vec<f64> = (0..nodes).map(|i| i as f64 * h).collect();
        let diff = model::diffusivities(prm);

        let mut fields = g0.clone();
        for f in fields.iter_mut() {
            f[0] = 0.0;
            *f.last_mut().unwrap() = 0.0;
        }
        let dt = cfg.dt;
        let n_steps = steps_for(cfg.t_end, dt);
        let mut scratch = Vec::new();
        let mut times = vec![0.0];
        let mut l2 = vec![std::array::from_fn(|c| l2_sq(&fields[c], h))];

        for i in 0..n_steps {
            for c in 0..6 {
                cn_diffusion(&mut fields[c], diff[c], 0.5 * dt, h, &mut scratch);
            }
            reaction_midpoint(&mut fields, prm, dt);
            for c in 0..6 {
                cn_diffusion(&mut fields[c], diff[c], 0.5 * dt, h, &mut scratch);
            }
            let t = (i as f64 + 1.0) * dt;
            if (i + 1) % cfg.sample_every == 0 || i + 1 == n_steps {
                times.push(t);
                l2.push(std::array::from_fn(|c| l2_sq(&fields[c], h)));
            }
            if fields.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
                let sup = fields.iter().flat_map(|f| f.iter()).fold(0.0_f64, |m, v| {
                    if v.is_finite() {
                        m.max(v.abs())
                    } else {
                        f64::INFINITY
                    }
                });
                return Err(Error::BlowUp {
                    time: t,
                    sup_norm: sup,
                });
            }
        }

        Ok(FdTrajectory {
            x,
            times,
            l2_sq: l2,
            final_fields: fields,
        })
    }
}
