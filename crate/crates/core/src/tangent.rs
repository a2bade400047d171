//! Variational (tangent-linear) dynamics along simulated trajectories:
//! Lyapunov exponents via QR reorthonormalization, time-averaged traces of
//! the linearized generator over evolving tangent subspaces, and the
//! resulting empirical and analytic attractor dimension bounds.
//!
//! The tangent step is the exact linearization of the discrete base step,
//! so finite differences of the nonlinear flow converge to the tangent
//! propagation as the perturbation size shrinks. The trace of the
//! linearized generator restricted to an orthonormal frame `zeta_1..zeta_m`
//! is
//!
//! ```text
//! sum_j ( -sum_c d_c ||grad zeta_j^c||^2 + int zeta_j . f'(g) zeta_j dx )
//! ```
//!
//! and its time average `q_m` bounds the attractor dimension: the smallest
//! `m` with `q_m < 0` is the empirical dimension bound `m*`.

use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, Scheme, Stepper};
use crate::model::{self, Parameters};
use crate::spectral::{self, GridState, ModalState, SineBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Orthonormality tolerance enforced on tangent frames fed to the trace.
pub const GRAM_TOL: f64 = 1e-8;

/// A set of tangent fields co-evolving with a base trajectory.
#[derive(Debug, Clone)]
pub struct TangentBlock {
    tangents: Vec<ModalState>,
    /// Accumulated `ln` growth per direction since averaging started.
    log_sums: Vec<f64>,
    /// Steps between QR reorthonormalizations.
    renorm_every: usize,
    orthonormal: bool,
}

impl TangentBlock {
    /// Seeded random tangents, orthonormalized.
    pub fn random(basis: &SineBasis, m: usize, renorm_every: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > 6 * basis.m_tot() {
            return Err(Error::InvalidArgument {
                what: "TangentBlock",
                message: format!(
                    "tangent count must be in 1..={}, got {m}",
                    6 * basis.m_tot()
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tangents: Vec<ModalState> = (0..m)
            .map(|_| {
                let mut t = ModalState::zero(basis);
                for comp in 0..6 {
                    for c in t.block_mut(comp).iter_mut() {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                }
                t
            })
            .collect();
        orthonormalize(&mut tangents);
        Ok(Self {
            tangents,
            log_sums: vec![0.0; m],
            renorm_every,
            orthonormal: true,
        })
    }

    pub fn tangents(&self) -> &[ModalState] {
        &self.tangents
    }

    pub fn m(&self) -> usize {
        self.tangents.len()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn renorm_every(&self) -> usize {
        self.renorm_every
    }
}

fn dot(a: &ModalState, b: &ModalState) -> f64 {
    let mut acc = 0.0;
    for comp in 0..6 {
        for (x, y) in a.block(comp).iter().zip(b.block(comp)) {
            acc += x * y;
        }
    }
    acc
}

/// Modified Gram-Schmidt with reorthogonalization. Returns the diagonal of
/// `R` (the pre-normalization lengths); after the call the frame's Gram
/// matrix is the identity to roundoff.
fn orthonormalize(tangents: &mut [ModalState]) -> Vec<f64> {
    let m = tangents.len();
    let mut diag = vec![0.0; m];
    for j in 0..m {
        for _pass in 0..2 {
            for i in 0..j {
                let (head, tail) = tangents.split_at_mut(j);
                let proj = dot(&head[i], &tail[0]);
                tail[0].axpy(-proj, &head[i]);
            }
        }
        let norm = tangents[j].h_norm_sq().sqrt();
        diag[j] = norm;
        if norm > 0.0 {
            tangents[j].scale(1.0 / norm);
        }
    }
    diag
}

fn gram_defect(tangents: &[ModalState]) -> f64 {
    let m = tangents.len();
    let mut defect = 0.0_f64;
    for i in 0..m {
        for j in i..m {
            let g = dot(&tangents[i], &tangents[j]);
            let expect = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((g - expect).abs());
        }
    }
    defect
}

/// Projected Jacobian action `P_m [f'(base(x)) G(x)]` evaluated
/// pseudospectrally on the dealiased grid.
fn projected_jacobian_action(
    base_grid: &GridState,
    g: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<ModalState> {
    let gg = spectral::to_grid(g, basis)?;
    let npts = basis.grid_tot();
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
    for p in 0..npts {
        let s: [f64; 6] = std::array::from_fn(|c| base_grid.fields[c][p]);
        let gp: [f64; 6] = std::array::from_fn(|c| gg.fields[c][p]);
        let a = model::jacobian_action(s, gp, prm);
        for c in 0..6 {
            out[c][p] = a[c];
        }
    }
    let mut blocks: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for c in 0..6 {
        blocks[c] = basis.to_modes_block(&out[c])?;
    }
    ModalState::from_blocks(g.time, blocks)
}

/// Right-hand side of the variational equation: diagonal diffusion plus the
/// Galerkin projection of the pointwise Jacobian action along `base`.
pub fn tangent_rhs(
    base: &ModalState,
    g: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<ModalState> {
    let base_grid = spectral::to_grid(base, basis)?;
    let mut rhs = projected_jacobian_action(&base_grid, g, basis, prm)?;
    let diff = model::diffusivities(prm);
    for comp in 0..6 {
        let d = diff[comp];
        for (r, (c, l)) in rhs
            .block_mut(comp)
            .iter_mut()
            .zip(g.block(comp).iter().zip(basis.eigenvalues()))
        {
            *r -= d * l * c;
        }
    }
    Ok(rhs)
}

/// Co-evolves the base state and a tangent frame by one step of the same
/// integrating-factor scheme; the tangent update is the exact linearization
/// of the discrete base map (Jacobian frozen at the stage states).
struct CoStepper<'a> {
    stepper: Stepper<'a>,
    basis: &'a SineBasis,
    prm: &'a Parameters,
    scheme: Scheme,
}

impl<'a> CoStepper<'a> {
    fn new(basis: &'a SineBasis, prm: &'a Parameters, dt: f64, scheme: Scheme) -> Self {
        Self {
            stepper: Stepper::new(basis, prm, dt, scheme),
            basis,
            prm,
            scheme,
        }
    }

    fn advance(&self, base: &ModalState, tangents: &mut [ModalState]) -> Result<ModalState> {
        let dt = self.stepper.dt;
        match self.scheme {
            Scheme::IfEuler => {
                let base_grid = spectral::to_grid(base, self.basis)?;
                for t in tangents.iter_mut() {
                    let jg = projected_jacobian_action(&base_grid, t, self.basis, self.prm)?;
                    t.axpy(dt, &jg);
                    Stepper::apply_factor(t, &self.stepper.e_full);
                }
                self.stepper.advance(base)
            }
            Scheme::IfRk2 => {
                // Reproduce the base stages to linearize around them.
                let f0 = spectral::nonlinear_galerkin(base, self.basis, self.prm)?;
                let mut base_half = base.clone();
                base_half.axpy(0.5 * dt, &f0);
                Stepper::apply_factor(&mut base_half, &self.stepper.e_half);

                let grid0 = spectral::to_grid(base, self.basis)?;
                let grid_half = spectral::to_grid(&base_half, self.basis)?;
                for t in tangents.iter_mut() {
                    let j0 = projected_jacobian_action(&grid0, t, self.basis, self.prm)?;
                    let mut t_half = t.clone();
                    t_half.axpy(0.5 * dt, &j0);
                    Stepper::apply_factor(&mut t_half, &self.stepper.e_half);
                    let j_half =
                        projected_jacobian_action(&grid_half, &t_half, self.basis, self.prm)?;
                    Stepper::apply_factor(t, &self.stepper.e_full);
                    let mut incr = j_half;
                    Stepper::apply_factor(&mut incr, &self.stepper.e_half);
                    t.axpy(dt, &incr);
                }

                let mut next = base.clone();
                Stepper::apply_factor(&mut next, &self.stepper.e_full);
                let f_half = spectral::nonlinear_galerkin(&base_half, self.basis, self.prm)?;
                let mut incr = f_half;
                Stepper::apply_factor(&mut incr, &self.stepper.e_half);
                next.axpy(dt, &incr);
                next.time = base.time + dt;
                Ok(next)
            }
        }
    }
}

/// Propagates a single tangent along the base flow for `n_steps` without
/// renormalization (used by the finite-difference consistency checks).
pub fn propagate_tangent(
    base0: &ModalState,
    g0: &ModalState,
    n_steps: usize,
    basis: &SineBasis,
    prm: &Parameters,
    cfg: &IntegratorConfig,
) -> Result<(ModalState, ModalState)> {
    cfg.validate()?;
    let co = CoStepper::new(basis, prm, cfg.dt, cfg.scheme);
    let mut base = base0.clone();
    let mut tangents = vec![g0.clone()];
    for _ in 0..n_steps {
        base = co.advance(&base, &mut tangents)?;
        if !base.is_finite() || !tangents[0].is_finite() {
            return Err(Error::BlowUp {
                time: base.time,
                sup_norm: f64::INFINITY,
            });
        }
    }
    Ok((base, tangents.pop().unwrap()))
}

/// Lyapunov spectrum estimate from QR-reorthonormalized tangent dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub m: usize,
    /// Leading exponents, descending.
    pub exponents: Vec<f64>,
    pub kaplan_yorke: f64,
    /// Running estimates at each renormalization after warmup.
    pub history: Vec<(f64, Vec<f64>)>,
    pub renorm_every: usize,
    /// Time discarded before averaging starts.
    pub warmup_time: f64,
    pub averaging_time: f64,
    pub seed: u64,
    /// Automatic renormalization-interval reductions triggered by
    /// near-underflow of the QR diagonal.
    pub renorm_adjustments: usize,
}

/// Kaplan-Yorke dimension from exponents sorted descending: `j + S_j /
/// |lambda_{j+1}|` where `S_j` is the last nonnegative partial sum; 0 when
/// the leading exponent is negative; saturates at `m` when every partial
/// sum is nonnegative.
pub fn kaplan_yorke(exponents: &[f64]) -> f64 {
    if exponents.is_empty() || exponents[0] < 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut last_nonneg = 0usize;
    let mut sum_at = 0.0;
    for (i, l) in exponents.iter().enumerate() {
        sum += l;
        if sum >= 0.0 {
            last_nonneg = i + 1;
            sum_at = sum;
        }
    }
    if last_nonneg == exponents.len() {
        return exponents.len() as f64;
    }
    last_nonneg as f64 + sum_at / exponents[last_nonneg].abs()
}

/// Co-evolves `m` tangents with the base flow from `base0`, renormalizing
/// every `renorm_every` steps, and returns the leading Lyapunov exponents
/// as time-averaged logs of the QR diagonal. The first `warmup_steps`
/// steps align the frame and are excluded from the averages.
#[allow(clippy::too_many_arguments)]
pub fn evolve_tangents(
    base0: &ModalState,
    m: usize,
    cfg: &IntegratorConfig,
    renorm_every: usize,
    warmup_steps: usize,
    basis: &SineBasis,
    prm: &Parameters,
    seed: u64,
) -> Result<LyapunovReport> {
    cfg.validate()?;
    if renorm_every == 0 {
        return Err(Error::InvalidArgument {
            what: "evolve_tangents",
            message: "renorm_every must be >= 1".into(),
        });
    }
    let mut block = TangentBlock::random(basis, m, renorm_every, seed)?;
    let co = CoStepper::new(basis, prm, cfg.dt, cfg.scheme);
    let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;

    let mut base = base0.clone();
    let mut renorm_every = renorm_every;
    let mut renorm_adjustments = 0usize;
    let mut since_renorm = 0usize;
    let mut averaging_time = 0.0;
    let mut time_since_renorm = 0.0;
    let mut history = Vec::new();

    for i in 0..n_steps {
        base = co.advance(&base, &mut block.tangents)?;
        if !base.is_finite() {
            return Err(Error::BlowUp {
                time: base.time,
                sup_norm: f64::INFINITY,
            });
        }
        block.orthonormal = false;
        since_renorm += 1;
        time_since_renorm += cfg.dt;

        if since_renorm == renorm_every || i + 1 == n_steps {
            let diag = orthonormalize(&mut block.tangents);
            block.orthonormal = true;
            // Near-underflow of a growth factor loses that direction's log;
            // tighten the interval for the rest of the run.
            if diag.iter().any(|&r| r < 1e-150) && renorm_every > 1 {
                renorm_every /= 2;
                block.renorm_every = renorm_every;
                renorm_adjustments += 1;
            }
            if i + 1 > warmup_steps {
                for (ls, r) in block.log_sums.iter_mut().zip(&diag) {
                    *ls += r.ln();
                }
                averaging_time += time_since_renorm;
                let est: Vec<f64> = block.log_sums.iter().map(|l| l / averaging_time).collect();
                history.push((base.time, est));
            }
            since_renorm = 0;
            time_since_renorm = 0.0;
        }
    }

    if averaging_time == 0.0 {
        return Err(Error::InvalidArgument {
            what: "evolve_tangents",
            message: "warmup consumed the whole run; nothing was averaged".into(),
        });
    }
    let exponents: Vec<f64> = block.log_sums.iter().map(|l| l / averaging_time).collect();
    let ky = kaplan_yorke(&exponents);
    Ok(LyapunovReport {
        m,
        exponents,
        kaplan_yorke: ky,
        history,
        renorm_every,
        warmup_time: warmup_steps as f64 * cfg.dt,
        averaging_time,
        seed,
        renorm_adjustments,
    })
}

/// Trace of the linearized generator restricted to the orthonormal frame
/// `zetas` at the state `base`: the diffusion quadratic forms by Parseval
/// plus the reaction Jacobian form by dealiased quadrature.
pub fn trace_qm(
    base: &ModalState,
    zetas: &[ModalState],
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<f64> {
    let defect = gram_defect(zetas);
    if defect > GRAM_TOL {
        return Err(Error::NotOrthonormal {
            defect,
            tol: GRAM_TOL,
        });
    }
    let base_grid = spectral::to_grid(base, basis)?;
    let mut total = 0.0;
    for zeta in zetas {
        total += trace_contribution(&base_grid, zeta, basis, prm)?;
    }
    Ok(total)
}

/// Single-direction contribution
/// `-sum_c d_c ||grad zeta^c||^2 + int zeta . f'(base) zeta dx`.
fn trace_contribution(
    base_grid: &GridState,
    zeta: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<f64> {
    let diff = model::diffusivities(prm);
    let mut diffusion = 0.0;
    for comp in 0..6 {
        diffusion += diff[comp] * basis.h1_seminorm_sq(zeta.block(comp));
    }
    let zg = spectral::to_grid(zeta, basis)?;
    let npts = basis.grid_tot();
    let mut form = 0.0;
    for p in 0..npts {
        let s: [f64; 6] = std::array::from_fn(|c| base_grid.fields[c][p]);
        let zp: [f64; 6] = std::array::from_fn(|c| zg.fields[c][p]);
        let a = model::jacobian_action(s, zp, prm);
        form += zp.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(-diffusion + basis.cell() * form)
}

/// Time-averaged traces over the evolving tangent flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmReport {
    /// `q_m` estimates for `m = 1..=m_max`.
    pub q_m: Vec<f64>,
    /// Smallest `m` with `q_m < 0`, if any.
    pub m_star: Option<usize>,
    /// `q_m` averaged over the first and second halves of the averaging
    /// window, for stationarity checks.
    pub q_m_first_half: Vec<f64>,
    pub q_m_second_half: Vec<f64>,
    pub m_max: usize,
    pub warmup_time: f64,
    pub averaging_time: f64,
    pub seed: u64,
    /// Set when no warmup was requested: the averages then include
    /// transient data, and the window disagreement quantifies the effect.
    pub warning: Option<String>,
}

/// Runs the base flow from `base0` with `m_max` co-evolving tangents and
/// time-averages the trace of the linearized generator over the leading
/// `m`-dimensional subspaces of the QR flag, for every `m <= m_max`.
///
/// QR preserves nested flags, so a single frame yields all `m`
/// simultaneously. Traces are evaluated at each renormalization point and
/// weighted by the interval length.
#[allow(clippy::too_many_arguments)]
pub fn qm_average(
    base0: &ModalState,
    m_max: usize,
    cfg: &IntegratorConfig,
    renorm_every: usize,
    warmup_steps: usize,
    basis: &SineBasis,
    prm: &Parameters,
    seed: u64,
) -> Result<QmReport> {
    cfg.validate()?;
    if renorm_every == 0 {
        return Err(Error::InvalidArgument {
            what: "qm_average",
            message: "renorm_every must be >= 1".into(),
        });
    }
    let mut block = TangentBlock::random(basis, m_max, renorm_every, seed)?;
    let co = CoStepper::new(basis, prm, cfg.dt, cfg.scheme);
    let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;

    let mut base = base0.clone();
    let mut since_renorm = 0usize;
    let mut time_since_renorm = 0.0;
    // Time-weighted per-direction sums, split into two halves of the
    // averaging window for the stationarity check.
    let mut sums_first = vec![0.0; m_max];
    let mut sums_second = vec![0.0; m_max];
    let mut time_first = 0.0;
    let mut time_second = 0.0;
    let half_point = warmup_steps + (n_steps.saturating_sub(warmup_steps)) / 2;

    for i in 0..n_steps {
        base = co.advance(&base, &mut block.tangents)?;
        if !base.is_finite() {
            return Err(Error::BlowUp {
                time: base.time,
                sup_norm: f64::INFINITY,
            });
        }
        since_renorm += 1;
        time_since_renorm += cfg.dt;
        if since_renorm == renorm_every || i + 1 == n_steps {
            orthonormalize(&mut block.tangents);
            if i + 1 > warmup_steps {
                let base_grid = spectral::to_grid(&base, basis)?;
                let first = i < half_point;
                for (j, zeta) in block.tangents.iter().enumerate() {
                    let contribution = trace_contribution(&base_grid, zeta, basis, prm)?;
                    if first {
                        sums_first[j] += contribution * time_since_renorm;
                    } else {
                        sums_second[j] += contribution * time_since_renorm;
                    }
                }
                if first {
                    time_first += time_since_renorm;
                } else {
                    time_second += time_since_renorm;
                }
            }
            since_renorm = 0;
            time_since_renorm = 0.0;
        }
    }

    let total_time = time_first + time_second;
    if total_time == 0.0 {
        return Err(Error::InvalidArgument {
            what: "qm_average",
            message: "warmup consumed the whole run; nothing was averaged".into(),
        });
    }
    let prefix_avg = |sums: &[f64], time: f64| -> Vec<f64> {
        let mut acc = 0.0;
        sums.iter()
            .map(|s| {
                acc += s;
                if time > 0.0 {
                    acc / time
                } else {
                    f64::NAN
                }
            })
            .collect()
    };
    let combined: Vec<f64> = sums_first
        .iter()
        .zip(&sums_second)
        .map(|(a, b)| a + b)
        .collect();
    let q_m = prefix_avg(&combined, total_time);
    let q_m_first_half = prefix_avg(&sums_first, time_first);
    let q_m_second_half = prefix_avg(&sums_second, time_second);
    let m_star = q_m.iter().position(|&q| q < 0.0).map(|i| i + 1);

    let warning = if warmup_steps == 0 {
        let max_gap = q_m_first_half
            .iter()
            .zip(&q_m_second_half)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        Some(format!(
            "no transient discarded; first/second window estimates differ by up to {max_gap:.3e}"
        ))
    } else {
        None
    };

    Ok(QmReport {
        q_m,
        m_star,
        q_m_first_half,
        q_m_second_half,
        m_max,
        warmup_time: warmup_steps as f64 * cfg.dt,
        averaging_time: total_time,
        seed,
        warning,
    })
}

/// The Young-inequality constant absorbing the interpolation term of the
/// trace estimate: `Q3 = max_{s >= 0} [K s^{n/4} - (d0/2) s]` with
/// `K = 5 delta (Q1 + Q2) C^2`, in closed form from the stationarity
/// condition.
pub fn q3_constant(n: usize, delta: f64, c_gn: f64, q1_plus_q2: f64, d0: f64) -> f64 {
    let k = 5.0 * delta * q1_plus_q2 * c_gn * c_gn;
    if k == 0.0 {
        return 0.0;
    }
    if !k.is_finite() {
        return f64::INFINITY;
    }
    let p = n as f64 / 4.0;
    // Stationarity: K p s^(p-1) = d0/2.
    let s_star = (2.0 * k * p / d0).powf(1.0 / (1.0 - p));
    k * s_star.powf(p) - 0.5 * d0 * s_star
}

/// Analytic dimension bound from the trace condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    /// `(2 (Q3 + b + k) / (d0 Q*))^(n/2) |O|`.
    #[serde(with = "crate::bounds::float_repr")]
    pub threshold: f64,
    /// Smallest integer strictly above the threshold (`floor + 1`), as f64
    /// because the threshold can overflow.
    #[serde(with = "crate::bounds::float_repr")]
    pub m: f64,
    #[serde(with = "crate::bounds::float_repr")]
    pub d_hausdorff: f64,
    #[serde(with = "crate::bounds::float_repr")]
    pub d_fractal: f64,
    pub qstar: f64,
    #[serde(with = "crate::bounds::float_repr")]
    pub q3: f64,
}

/// Evaluates the dimension condition: `m` is the unique integer with
/// `m - 1 <= (2 (Q3 + b + k) / (d0 Q*))^(n/2) |O| < m`, giving the bounds
/// `d_H <= m` and `d_F <= 2m`.
pub fn analytic_dimension_bound(
    prm: &Parameters,
    bs: &crate::bounds::BoundSet,
    qstar: f64,
    q3: f64,
) -> DimensionBound {
    let n = bs.inputs.dim as f64;
    let vol = bs.inputs.volume;
    let threshold = (2.0 * (q3 + prm.b() + prm.k()) / (prm.d0() * qstar)).powf(n / 2.0) * vol;
    let m = threshold.floor() + 1.0;
    DimensionBound {
        threshold,
        m,
        d_hausdorff: m,
        d_fractal: 2.0 * m,
        qstar,
        q3,
    }
}
