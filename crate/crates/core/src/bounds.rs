//! Closed-form absorbing-set constants of the dissipativity estimates and
//! verification of the corresponding inequalities against simulated
//! trajectories.
//!
//! Constant map (default scenario values on `(0, pi)` with `gamma = 1`,
//! `d_i = 1`, `D_i = 0.1`, `a = 1`, `b = 2`, `k = lambda = N = 1`):
//!
//! - `R0 = b^2 |O| / (gamma d2)` bounds the tail of `||(v,z)||^2` (= 4 pi).
//! - `R1` bounds `||y||^2 + ||xi||^2` for the grouped variables (1 + 36 pi).
//! - `R2` bounds `||p||^2 + ||theta||^2` (1 + 30 pi).
//! - `K1 = 7 R0 + 3 (R1 + R2)` bounds `||g||^2` (6 + 226 pi).
//! - `K2, K3` bound the L4^4 and L6^6 tails of `(v, z)`.
//! - `Q1, Q2` bound the H1 seminorms via uniform-Gronwall arguments; their
//!   double-exponential structure overflows f64 at generic parameters, so
//!   every constant carries its natural log alongside the value and all
//!   comparisons fall back to log space.
//!
//! The intermediate constants `C14..C18` are recorded because `Q1, Q2` are
//! assembled from them. `C15` has no closed form in the source estimates
//! ("there exists a constant"); the formula used here mirrors the `C14`
//! derivation applied to the `p`-equation inequality and is flagged as
//! implementer-derived in its formula string.

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::model::Parameters;
use crate::spectral::SineBasis;
use serde::{Deserialize, Serialize};

/// Default relative tolerance for inequality residuals (absorbs the
/// time-differencing error of the sampled observables).
pub const RESIDUAL_TOL_REL: f64 = 0.05;
/// Absolute floor for residual comparisons (zero-trajectory case).
pub const RESIDUAL_TOL_ABS: f64 = 1e-9;

/// One named constant with provenance. `value` may overflow to `+inf`;
/// `ln_value` is computed in log space and stays finite much longer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstant {
    pub name: String,
    #[serde(with = "float_repr")]
    pub value: f64,
    #[serde(with = "float_repr")]
    pub ln_value: f64,
    pub formula: String,
}

impl BoundConstant {
    fn from_value(name: &str, value: f64, formula: &str) -> Self {
        Self {
            name: name.to_string(),
            value,
            ln_value: value.ln(),
            formula: formula.to_string(),
        }
    }

    fn from_ln(name: &str, ln_value: f64, formula: &str) -> Self {
        Self {
            name: name.to_string(),
            value: ln_value.exp(),
            ln_value,
            formula: formula.to_string(),
        }
    }

    /// Multiplies the constant by `factor` (used by the falsification
    /// injection of the verification harness).
    pub fn scale(&mut self, factor: f64) {
        self.value *= factor;
        self.ln_value += factor.ln();
    }
}

/// Serialize possibly non-finite floats losslessly into JSON.
pub mod float_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!(
                    "invalid float literal {other:?}"
                ))),
            },
        }
    }
}

/// Inputs the constants were computed from, echoed for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    pub volume: f64,
    pub dim: usize,
    pub delta: f64,
    pub eta: f64,
}

/// Every closed-form constant of the absorbing-set estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub r0: BoundConstant,
    pub r1: BoundConstant,
    pub r2: BoundConstant,
    pub k1: BoundConstant,
    pub k2: BoundConstant,
    pub k3: BoundConstant,
    pub c14: BoundConstant,
    pub c15: BoundConstant,
    pub c16: BoundConstant,
    pub c17: BoundConstant,
    pub c18: BoundConstant,
    pub q1: BoundConstant,
    pub q2: BoundConstant,
    pub inputs: BoundInputs,
}

impl BoundSet {
    pub fn constants(&self) -> [&BoundConstant; 13] {
        [
            &self.r0, &self.r1, &self.r2, &self.k1, &self.k2, &self.k3, &self.c14, &self.c15,
            &self.c16, &self.c17, &self.c18, &self.q1, &self.q2,
        ]
    }

    pub fn constant_mut(&mut self, name: &str) -> Option<&mut BoundConstant> {
        [
            &mut self.r0,
            &mut self.r1,
            &mut self.r2,
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.c14,
            &mut self.c15,
            &mut self.c16,
            &mut self.c17,
            &mut self.c18,
            &mut self.q1,
            &mut self.q2,
        ]
        .into_iter()
        .find(|c| c.name == name)
    }

    /// `Q1 + Q2` in log space (the value typically overflows f64).
    pub fn q1_plus_q2_ln(&self) -> f64 {
        ln_add_exp(self.q1.ln_value, self.q2.ln_value)
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a.is_infinite() || b.is_infinite() {
        return f64::INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Evaluates every constant by literal transcription of the closed-form
/// estimates, from the parameters and the basis data `gamma = lambda_1`,
/// `volume = |Omega|`, and the embedding constants `delta` (L4) and `eta`
/// (L6) valid on the subspace.
pub fn compute_bound_set(
    prm: &Parameters,
    gamma: f64,
    volume: f64,
    dim: usize,
    delta: f64,
    eta: f64,
) -> BoundSet {
    let (d1, d2, d3) = (prm.d1(), prm.d2(), prm.d3());
    let (cp1, cp2, cp3) = (prm.c1(), prm.c2(), prm.c3());
    let (a, b, k) = (prm.a(), prm.b(), prm.k());
    let (lambda, n) = (prm.lambda(), prm.n_rev());
    let (mu, d) = (prm.mu(), prm.d());
    let g = gamma;
    let vol = volume;
    let bsq = b * b;
    let max_mu = mu.max(1.0);
    let dd = (d1 - d2).abs();
    let coupling_sq = (k + 2.0 * (cp1 - cp2)).abs().powi(2);

    let r0 = bsq * vol / (g * d2);
    let r1 = 1.0
        + max_mu
            * (4.0 * bsq / (g.powi(3) * d * d1 * d2)
                + 16.0 * a * a / (g * g * d * d1)
                + k * k * bsq / (mu * g.powi(3) * d * d2 * d3)
                + 2.0 * dd * dd / (g * d1 * d2) * (1.0 / d + 1.0 / d2) * bsq)
            * vol;
    let r2 = 1.0
        + max_mu
            * (2.0 * dd * dd / (g * d1 * d2) * (1.0 / d + 1.0 / d2)
                + 1.0 / (2.0 * g * g * d * d2) * (coupling_sq / cp1 + k * k / (2.0 * mu * cp3)))
            * bsq
            * vol;
    let k1 = 7.0 * r0 + 3.0 * (r1 + r2);
    let k2 = 1.0 + b.powi(4) * vol / (3.0 * g * g * d2 * d2);
    let k3 = 1.0 + 3.0 * b.powi(6) * vol / (20.0 * g.powi(3) * d2.powi(3));

    // Unit-window integral bound on ||grad(v,z)||^2, reused below.
    let bracket = k1 + (1.0 + 1.0 / (2.0 * g * d2)) * bsq * vol;

    let c14 = 4.0 * dd * dd / (d1 * d1 * d2) * bracket
        + (1.0 / d1) * ((4.0 * k / mu + 1.0) * k1 + 8.0 / g * (k1 + 2.0 * a * a * vol));
    let c15 = dd * dd / (2.0 * d1 * d1) * (4.0 / d2) * bracket
        + (1.0 / d1) * (k1 + coupling_sq * k1 / (2.0 * cp1) + 2.0 * k / mu * k1);
    let c16 = c14 + c15 + 4.0 / d2 * bracket;

    let q1_ln = (c16 + 2.0 / d1 * (a * a * vol + n * n * k1)).ln() + delta * delta * k1 * c16 / d1;
    let q1 = q1_ln.exp();
    // The L6 constant enters as eta^6 in the source estimate (stated for
    // the unsquared embedding inequality); kept literally.
    let c17_exponent = 2.0 * eta.powi(6) * (q1 * q1) / d2;
    let c17_ln = (bracket / d2 + k1 * (d2 + 2.0 * bsq / d2)).ln() + c17_exponent;
    let c18 = k1 / (2.0 * d3) * (1.0 + k + k * k) * (2.0 * (lambda + n)).exp();
    let q2_ln = ln_add_exp(c17_ln, c18.ln());

    BoundSet {
        r0: BoundConstant::from_value("R0", r0, "b^2 |O| / (gamma d2)"),
        r1: BoundConstant::from_value(
            "R1",
            r1,
            "1 + max(1,mu) (4 b^2/(gamma^3 d d1 d2) + 16 a^2/(gamma^2 d d1) + k^2 b^2/(mu gamma^3 d d2 d3) + 2|d1-d2|^2/(gamma d1 d2) (1/d + 1/d2) b^2) |O|",
        ),
        r2: BoundConstant::from_value(
            "R2",
            r2,
            "1 + max(1,mu) (2|d1-d2|^2/(gamma d1 d2) (1/d + 1/d2) + (|k+2(D1-D2)|^2/D1 + k^2/(2 mu D3)) / (2 gamma^2 d d2)) b^2 |O|",
        ),
        k1: BoundConstant::from_value("K1", k1, "7 R0 + 3 (R1 + R2)"),
        k2: BoundConstant::from_value("K2", k2, "1 + b^4 |O| / (3 gamma^2 d2^2)"),
        k3: BoundConstant::from_value("K3", k3, "1 + 3 b^6 |O| / (20 gamma^3 d2^3)"),
        c14: BoundConstant::from_value(
            "C14",
            c14,
            "4|d1-d2|^2/(d1^2 d2) [K1 + (1 + 1/(2 gamma d2)) b^2 |O|] + (1/d1)[(4 k/mu + 1) K1 + (8/gamma)(K1 + 2 a^2 |O|)]",
        ),
        c15: BoundConstant::from_value(
            "C15",
            c15,
            "implementer-derived, mirrors C14 via the p-equation: |d1-d2|^2/(2 d1^2) (4/d2)[K1 + (1 + 1/(2 gamma d2)) b^2 |O|] + (1/d1)[K1 + |k+2(D1-D2)|^2 K1/(2 D1) + 2 k K1/mu]",
        ),
        c16: BoundConstant::from_value(
            "C16",
            c16,
            "C14 + C15 + (4/d2)[K1 + (1 + 1/(2 gamma d2)) b^2 |O|]",
        ),
        c17: BoundConstant::from_ln(
            "C17",
            c17_ln,
            "([K1 + (1 + 1/(2 gamma d2)) b^2 |O|]/d2 + K1 (d2 + 2 b^2/d2)) exp(2 eta^6 Q1^2 / d2)",
        ),
        c18: BoundConstant::from_value(
            "C18",
            c18,
            "(K1/(2 d3)) (1 + k + k^2) exp(2 (lambda + N))",
        ),
        q1: BoundConstant::from_ln(
            "Q1",
            q1_ln,
            "(C16 + (2/d1)(a^2 |O| + N^2 K1)) exp(delta^2 K1 C16 / d1)",
        ),
        q2: BoundConstant::from_ln("Q2", q2_ln, "C17 + C18"),
        inputs: BoundInputs {
            gamma,
            volume,
            dim,
            delta,
            eta,
        },
    }
}

/// The decaying prefactor `beta(t) = e^{-gamma d t} int_0^t
/// e^{gamma (d1 - 2 d2) tau} dtau` of the initial-data terms, evaluated in
/// closed form. Continuous across the `d1 = 2 d2` branch.
pub fn beta(t: f64, prm: &Parameters, gamma: f64) -> f64 {
    let d = prm.d();
    let rate = gamma * (prm.d1() - 2.0 * prm.d2());
    if rate == 0.0 {
        t * (-gamma * d * t).exp()
    } else {
        (-gamma * d * t).exp() * ((rate * t).exp() - 1.0) / rate
    }
}

/// Pointwise-in-time decay envelope for `||v(t)||^2 + ||z(t)||^2`:
/// `e^{-2 gamma d2 t} (||v0||^2 + ||z0||^2) + b^2 |O| / (2 gamma d2)`.
pub fn transient_envelope_vz(
    vz0_sq: f64,
    prm: &Parameters,
    gamma: f64,
    volume: f64,
    t: f64,
) -> f64 {
    (-2.0 * gamma * prm.d2() * t).exp() * vz0_sq
        + prm.b() * prm.b() * volume / (2.0 * gamma * prm.d2())
}

/// Outcome of one tail-bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub name: String,
    pub t_tail: f64,
    pub t_end: f64,
    pub observed: f64,
    #[serde(with = "float_repr")]
    pub bound: f64,
    #[serde(with = "float_repr")]
    pub ln_bound: f64,
    /// `observed / bound`, computed in log space (0 for non-finite bounds).
    pub margin_ratio: f64,
    pub pass: bool,
}

fn verdict(
    name: &str,
    t_tail: f64,
    t_end: f64,
    observed: f64,
    bound: &BoundConstant,
    tol: f64,
) -> BoundVerdict {
    let ln_obs = observed.ln();
    let pass = observed == 0.0 || ln_obs <= bound.ln_value + tol.ln_1p();
    let margin_ratio = if observed == 0.0 {
        0.0
    } else {
        (ln_obs - bound.ln_value).exp()
    };
    BoundVerdict {
        name: name.to_string(),
        t_tail,
        t_end,
        observed,
        bound: bound.value,
        ln_bound: bound.ln_value,
        margin_ratio,
        pass,
    }
}

/// Compares tail maxima of the trajectory observables against the absorbing
/// constants. `tail_fraction` selects the trailing fraction of the run;
/// `tol` is the relative slack (0 by default: the bounds are loose, so any
/// violation indicates a bug).
pub fn verify_absorption(
    traj: &Trajectory,
    bs: &BoundSet,
    tail_fraction: f64,
    tol: f64,
) -> Result<Vec<BoundVerdict>> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument {
            what: "verify_absorption",
            message: format!("tail_fraction must be in (0, 1], got {tail_fraction}"),
        });
    }
    let t_start = traj.samples.first().map(|s| s.t).unwrap_or(0.0);
    let t_end = traj.t_end();
    let t_tail = t_end - tail_fraction * (t_end - t_start);
    let tail: Vec<_> = traj
        .samples
        .iter()
        .filter(|s| s.t >= t_tail - 1e-12)
        .collect();
    if tail.is_empty() {
        return Err(Error::EmptyTail { t_tail, t_end });
    }

    let max_of = |f: &dyn Fn(&crate::spectral::NormReport) -> f64| {
        tail.iter()
            .map(|s| f(&s.norms))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut verdicts = vec![
        verdict(
            "vz_l2",
            t_tail,
            t_end,
            max_of(&|n| n.vz_l2_sq()),
            &bs.r0,
            tol,
        ),
        verdict(
            "yxi_l2",
            t_tail,
            t_end,
            max_of(&|n| n.yxi_sq()),
            &bs.r1,
            tol,
        ),
        verdict(
            "ptheta_l2",
            t_tail,
            t_end,
            max_of(&|n| n.ptheta_sq()),
            &bs.r2,
            tol,
        ),
        verdict("g_l2", t_tail, t_end, max_of(&|n| n.g_l2_sq()), &bs.k1, tol),
        verdict("vz_l4", t_tail, t_end, max_of(&|n| n.vz_l4()), &bs.k2, tol),
        verdict("vz_l6", t_tail, t_end, max_of(&|n| n.vz_l6()), &bs.k3, tol),
        verdict(
            "uw_h1",
            t_tail,
            t_end,
            max_of(&|n| n.uw_h1_sq()),
            &bs.q1,
            tol,
        ),
        verdict(
            "vzphipsi_h1",
            t_tail,
            t_end,
            max_of(&|n| n.vz_h1_sq() + n.phipsi_h1_sq()),
            &bs.q2,
            tol,
        ),
    ];
    // Sup-norm boundedness carries no explicit constant; the verdict is
    // finiteness of the tail maximum.
    let sup_max = max_of(&|n| n.sup);
    verdicts.push(BoundVerdict {
        name: "sup_norm".to_string(),
        t_tail,
        t_end,
        observed: sup_max,
        bound: f64::INFINITY,
        ln_bound: f64::INFINITY,
        margin_ratio: 0.0,
        pass: sup_max.is_finite(),
    });
    Ok(verdicts)
}

/// One discrete inequality-residual check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    /// Largest residual (left-hand side) over the evaluated samples.
    pub max_residual: f64,
    /// Bound value at the sample attaining the maximum excess.
    pub bound_at_max: f64,
    /// Largest excess `residual - bound` over the samples.
    pub max_excess: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub dt_sample: f64,
    pub n_states: usize,
}

impl ResidualReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Per-state quantities entering the residual checks.
struct StateQuantities {
    t: f64,
    /// `||v||^2 + ||z||^2`
    x2: f64,
    /// `||grad v||^2 + ||grad z||^2`
    g2: f64,
    /// `int [(uv - b/2)^2 + (wz - b/2)^2 + D2 (v - z)^2] dx`
    sign_definite: f64,
    /// `int v^4 + int z^4`
    x4: f64,
    /// `||grad v^2||^2 + ||grad z^2||^2`
    n4: f64,
    /// `int v^6 + int z^6`
    x6: f64,
    /// `||grad v^3||^2 + ||grad z^3||^2`
    n6: f64,
    /// `||grad phi||^2 + ||grad psi||^2`
    h_phipsi: f64,
    /// `||g||^2`
    g_l2: f64,
}

fn state_quantities(
    ms: &crate::spectral::ModalState,
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<StateQuantities> {
    let b = prm.b();
    let coupling = prm.c2();
    let vol = basis.domain().volume();
    let n_axes = basis.dim();
    let npts = basis.grid_tot();

    let gu = basis.to_grid_block(ms.block(0))?;
    let gv = basis.to_grid_block(ms.block(1))?;
    let gw = basis.to_grid_block(ms.block(3))?;
    let gz = basis.to_grid_block(ms.block(4))?;

    // Sign-definite integrand expanded into boundary-vanishing monomials:
    // (uv - b/2)^2 = u^2 v^2 - b uv + b^2/4, the constant handled exactly.
    let mut quad_uv = 0.0;
    let mut quad_sq = 0.0;
    let mut quad_diff = 0.0;
    let mut s4 = 0.0;
    let mut s6 = 0.0;
    for p in 0..npts {
        let (u, v, w, z) = (gu[p], gv[p], gw[p], gz[p]);
        quad_uv += u * v + w * z;
        quad_sq += u * u * v * v + w * w * z * z;
        let dvz = v - z;
        quad_diff += dvz * dvz;
        let v2 = v * v;
        let z2 = z * z;
        s4 += v2 * v2 + z2 * z2;
        s6 += v2 * v2 * v2 + z2 * z2 * z2;
    }
    let cell = basis.cell();
    let sign_definite = cell * (quad_sq - b * quad_uv + coupling * quad_diff) + b * b * vol / 2.0;

    // Gradient quadratures: |grad(v^2)|^2 = 4 v^2 |grad v|^2 and
    // |grad(v^3)|^2 = 9 v^4 |grad v|^2, all boundary-vanishing.
    let mut n4 = 0.0;
    let mut n6 = 0.0;
    for axis in 0..n_axes {
        let dv = basis.to_grid_deriv_block(ms.block(1), axis)?;
        let dz = basis.to_grid_deriv_block(ms.block(4), axis)?;
        for p in 0..npts {
            let (v, z) = (gv[p], gz[p]);
            let (dvp, dzp) = (dv[p], dz[p]);
            n4 += 4.0 * (v * v * dvp * dvp + z * z * dzp * dzp);
            n6 += 9.0 * (v.powi(4) * dvp * dvp + z.powi(4) * dzp * dzp);
        }
    }
    n4 *= cell;
    n6 *= cell;

    let l2 = |c: usize| ms.block(c).iter().map(|x| x * x).sum::<f64>();
    Ok(StateQuantities {
        t: ms.time,
        x2: l2(1) + l2(4),
        g2: basis.h1_seminorm_sq(ms.block(1)) + basis.h1_seminorm_sq(ms.block(4)),
        sign_definite,
        x4: cell * s4,
        n4,
        x6: cell * s6,
        n6,
        h_phipsi: basis.h1_seminorm_sq(ms.block(2)) + basis.h1_seminorm_sq(ms.block(5)),
        g_l2: (0..6).map(l2).sum(),
    })
}

/// Evaluates the discrete residuals of the differential inequalities on a
/// trajectory with stored states (central differences in time):
///
/// - the `(v, z)` energy identity, whose residual must equal `b^2 |O| / 2`;
/// - the L4 ladder `d/dt (int v^4 + z^4) + 3 d2 ||grad(v^2, z^2)||^2 <=
///   2 b^2 ||(v, z)||^2`;
/// - the L6 ladder with `(10/3) d2` and bound `3 b^2 ||(v, z)||_L4^4`;
/// - the `(phi, psi)` gradient inequality `d/dt ||grad(phi,psi)||^2 +
///   2 (lambda + N) ||grad(phi,psi)||^2 <= k^2 K1 / (2 d3)`, checked on the
///   trailing `tail_fraction` of the run because it presupposes absorption.
pub fn inequality_residuals(
    traj: &Trajectory,
    basis: &SineBasis,
    prm: &Parameters,
    tail_fraction: f64,
) -> Result<ResidualReport> {
    let states = &traj.states;
    if states.len() < 3 {
        return Err(Error::InsufficientStates {
            needed: 3,
            got: states.len(),
        });
    }
    let dt_sample = states[1].time - states[0].time;
    for w in states.windows(2) {
        let step = w[1].time - w[0].time;
        if (step - dt_sample).abs() > 1e-9 * dt_sample.max(1.0) {
            return Err(Error::InvalidArgument {
                what: "inequality_residuals",
                message: "stored states are not uniformly spaced in time".into(),
            });
        }
    }

    let quants: Vec<StateQuantities> = states
        .iter()
        .map(|ms| state_quantities(ms, basis, prm))
        .collect::<Result<_>>()?;

    let vol = basis.domain().volume();
    let b = prm.b();
    let d2 = prm.d2();
    // K1 needs no embedding estimates.
    let k1 = compute_bound_set(prm, basis.gamma(), vol, basis.dim(), 1.0, 1.0)
        .k1
        .value;

    let t_start = quants.first().unwrap().t;
    let t_end = quants.last().unwrap().t;
    let t_tail = t_end - tail_fraction * (t_end - t_start);

    let mut energy = ResidualAcc::new("energy_identity_vz");
    let mut l4 = ResidualAcc::new("l4_ladder");
    let mut l6 = ResidualAcc::new("l6_ladder");
    let mut phps = ResidualAcc::new("phipsi_gradient");

    for i in 1..quants.len() - 1 {
        let (prev, cur, next) = (&quants[i - 1], &quants[i], &quants[i + 1]);
        let two_dt = next.t - prev.t;

        let ddt_x2 = (next.x2 - prev.x2) / two_dt;
        energy.push(
            0.5 * ddt_x2 + d2 * cur.g2 + cur.sign_definite,
            b * b * vol / 2.0,
        );

        let ddt_x4 = (next.x4 - prev.x4) / two_dt;
        l4.push(ddt_x4 + 3.0 * d2 * cur.n4, 2.0 * b * b * cur.x2);

        let ddt_x6 = (next.x6 - prev.x6) / two_dt;
        l6.push(ddt_x6 + 10.0 / 3.0 * d2 * cur.n6, 3.0 * b * b * cur.x4);

        // Valid once the trajectory is inside the absorbing ball.
        if cur.t >= t_tail - 1e-12 && cur.g_l2 <= k1 {
            let ddt_h = (next.h_phipsi - prev.h_phipsi) / two_dt;
            phps.push(
                ddt_h + 2.0 * (prm.lambda() + prm.n_rev()) * cur.h_phipsi,
                prm.k() * prm.k() * k1 / (2.0 * prm.d3()),
            );
        }
    }

    Ok(ResidualReport {
        entries: vec![
            energy.finish(RESIDUAL_TOL_ABS, RESIDUAL_TOL_REL),
            l4.finish(RESIDUAL_TOL_ABS, RESIDUAL_TOL_REL),
            l6.finish(RESIDUAL_TOL_ABS, RESIDUAL_TOL_REL),
            phps.finish(RESIDUAL_TOL_ABS, RESIDUAL_TOL_REL),
        ],
        dt_sample,
        n_states: states.len(),
    })
}

struct ResidualAcc {
    name: &'static str,
    max_residual: f64,
    bound_at_max: f64,
    max_excess: f64,
    worst_bound: f64,
    samples: usize,
}

impl ResidualAcc {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            max_residual: f64::NEG_INFINITY,
            bound_at_max: 0.0,
            max_excess: f64::NEG_INFINITY,
            worst_bound: 0.0,
            samples: 0,
        }
    }

    fn push(&mut self, residual: f64, bound: f64) {
        self.samples += 1;
        if residual > self.max_residual {
            self.max_residual = residual;
        }
        let excess = residual - bound;
        if excess > self.max_excess {
            self.max_excess = excess;
            self.bound_at_max = bound;
        }
        if residual > bound + RESIDUAL_TOL_ABS + RESIDUAL_TOL_REL * bound.abs() {
            self.worst_bound = bound;
        }
    }

    fn finish(self, tol_abs: f64, tol_rel: f64) -> ResidualEntry {
        // Pass when every sample satisfied residual <= bound + tol_abs +
        // tol_rel |bound|; vacuous with no samples.
        let pass =
            self.samples == 0 || self.max_excess <= tol_abs + tol_rel * self.bound_at_max.abs();
        ResidualEntry {
            name: self.name.to_string(),
            max_residual: if self.samples == 0 {
                0.0
            } else {
                self.max_residual
            },
            bound_at_max: self.bound_at_max,
            max_excess: if self.samples == 0 {
                0.0
            } else {
                self.max_excess
            },
            tol_abs,
            tol_rel,
            samples: self.samples,
            pass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{simulate, IntegratorConfig, Scheme};
    use crate::spectral::{self, DomainSpec, ModalState, SineBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn default_bounds() -> BoundSet {
        compute_bound_set(&Parameters::default_scenario(), 1.0, PI, 1, 0.7, 0.8)
    }

    #[test]
    fn default_scenario_constants_match_hand_evaluation() {
        let bs = default_bounds();
        let cases = [
            (bs.r0.value, 4.0 * PI),
            (bs.r1.value, 1.0 + 36.0 * PI),
            (bs.r2.value, 1.0 + 30.0 * PI),
            (bs.k1.value, 6.0 + 226.0 * PI),
            (bs.k2.value, 1.0 + 16.0 * PI / 3.0),
            (bs.k3.value, 1.0 + 9.6 * PI),
        ];
        for (got, want) in cases {
            assert!((got - want).abs() <= 1e-12 * want, "got {got}, want {want}");
        }
    }

    #[test]
    fn k1_identity_holds_exactly() {
        let bs = default_bounds();
        assert_eq!(
            bs.k1.value,
            7.0 * bs.r0.value + 3.0 * (bs.r1.value + bs.r2.value)
        );
    }

    #[test]
    fn constants_positive_with_finite_logs_where_expected() {
        let bs = default_bounds();
        for c in bs.constants() {
            assert!(c.ln_value > f64::NEG_INFINITY, "{} not positive", c.name);
        }
        assert!(bs.c14.value.is_finite());
        assert!(bs.c15.value.is_finite());
        assert!(bs.c16.value.is_finite());
        assert!(bs.c18.value.is_finite());
        // Q1 is representable only in log space at the default scenario.
        assert!(bs.q1.ln_value.is_finite());
        assert!(bs.q1.ln_value > 700.0, "Q1 should be astronomically large");
        assert!(bs.q2.value.is_infinite());
    }

    #[test]
    fn r0_monotonicity() {
        let gamma = 1.0;
        let vol = PI;
        let base = Parameters::default_scenario();
        let bump =
            |d2, b| Parameters::new(1.0, d2, 1.0, 0.1, 0.1, 0.1, 1.0, b, 1.0, 1.0, 1.0).unwrap();
        let r0 = |p: &Parameters, g: f64, v: f64| compute_bound_set(p, g, v, 1, 1.0, 1.0).r0.value;
        assert!(r0(&bump(1.0, 2.1), gamma, vol) > r0(&base, gamma, vol));
        assert!(r0(&base, gamma, vol * 1.1) > r0(&base, gamma, vol));
        assert!(r0(&bump(1.1, 2.0), gamma, vol) < r0(&base, gamma, vol));
        assert!(r0(&base, gamma * 1.1, vol) < r0(&base, gamma, vol));
    }

    #[test]
    fn equal_diffusivities_kill_every_difference_term() {
        // With d1 == d2 the |d1-d2|^2 contributions are exactly zero: R1
        // and R2 equal their formulas with those terms dropped.
        let vol = PI;
        let bs = default_bounds();
        let r1_no_dd = 1.0 + (16.0 + 16.0 + 4.0) * vol;
        let r2_no_dd = 1.0 + 0.5 * (1.0 / 0.1 + 1.0 / 0.2) * 4.0 * vol;
        assert_eq!(bs.r1.value, r1_no_dd);
        assert_eq!(bs.r2.value, r2_no_dd);
    }

    #[test]
    fn beta_worked_values_and_decay() {
        let p = Parameters::default_scenario();
        assert_eq!(beta(0.0, &p, 1.0), 0.0);
        let b1 = beta(1.0, &p, 1.0);
        let expect = (-1.0_f64).exp() - (-2.0_f64).exp();
        assert!((b1 - expect).abs() < 1e-14, "{b1} vs {expect}");
        assert!(beta(100.0, &p, 1.0) < 1e-10);
        for i in 0..50 {
            assert!(beta(i as f64 * 0.2, &p, 1.0) >= 0.0);
        }
        // Branch-point parameters: d1 == 2 d2.
        let pb = Parameters::new(2.0, 1.0, 2.0, 0.1, 0.1, 0.1, 1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(beta(0.0, &pb, 1.0), 0.0);
        assert!((beta(1.5, &pb, 1.0) - 1.5 * (-3.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn beta_continuous_across_branch() {
        let gamma = 1.0;
        let t = 1.3;
        let eps = 1e-8;
        let near =
            Parameters::new(2.0 + eps, 1.0, 2.0, 0.1, 0.1, 0.1, 1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let at = Parameters::new(2.0, 1.0, 2.0, 0.1, 0.1, 0.1, 1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let gap = (beta(t, &near, gamma) - beta(t, &at, gamma)).abs();
        assert!(gap <= 1e-6 * beta(t, &at, gamma), "gap {gap}");
    }

    #[test]
    fn envelope_endpoints() {
        let p = Parameters::default_scenario();
        let vz0 = 3.7;
        let at0 = transient_envelope_vz(vz0, &p, 1.0, PI, 0.0);
        assert!((at0 - (vz0 + 2.0 * PI)).abs() < 1e-14);
        let late = transient_envelope_vz(vz0, &p, 1.0, PI, 1e3);
        assert!((late - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn energy_identity_residual_on_short_run() {
        let prm = Parameters::default_scenario();
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g0 = ModalState::random_ball(&basis, 4.0, &mut rng);
        let cfg = IntegratorConfig::new(5e-4, Scheme::IfRk2, 0.5, 50)
            .unwrap()
            .with_storage(1);
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        let report = inequality_residuals(&traj, &basis, &prm, 0.4).unwrap();
        let energy = &report.entries[0];
        // The residual is an identity equal to b^2 |O| / 2 up to
        // time-differencing error.
        let target = prm.b() * prm.b() * PI / 2.0;
        assert!(
            (energy.max_residual - target).abs() <= 0.01 * target,
            "max residual {} vs identity value {target}",
            energy.max_residual
        );
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn l4_identity_at_single_state_matches_direct_quadrature() {
        // At a band-limited state every term is quadrature-exact: the modal
        // route 4 <P(v^3), dv/dt> must equal the grid route
        // -3 d2 ||grad v^2||^2 + 4 int (b u v^3 - u^2 v^4 + D2 (z - v) v^3).
        let prm = Parameters::default_scenario();
        let m = 12;
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut ms = ModalState::zero(&basis);
        for comp in 0..6 {
            for j in 0..m / 3 {
                ms.set_coeff(comp, j, 0.4 * rand::Rng::gen_range(&mut rng, -1.0..1.0));
            }
        }
        let rhs = crate::integrate::galerkin_rhs(&ms, &basis, &prm).unwrap();

        let mut modal_route = 0.0;
        for comp in [1usize, 4] {
            let grid = basis.to_grid_block(ms.block(comp)).unwrap();
            let cubed: Vec<f64> = grid.iter().map(|x| x * x * x).collect();
            let proj = basis.to_modes_block(&cubed).unwrap();
            modal_route += 4.0
                * proj
                    .iter()
                    .zip(rhs.block(comp))
                    .map(|(p, r)| p * r)
                    .sum::<f64>();
        }

        let q = state_quantities(&ms, &basis, &prm).unwrap();
        let gu = basis.to_grid_block(ms.block(0)).unwrap();
        let gv = basis.to_grid_block(ms.block(1)).unwrap();
        let gw = basis.to_grid_block(ms.block(3)).unwrap();
        let gz = basis.to_grid_block(ms.block(4)).unwrap();
        let mut reaction = 0.0;
        for p in 0..basis.grid_tot() {
            let (u, v, w, z) = (gu[p], gv[p], gw[p], gz[p]);
            reaction +=
                prm.b() * u * v.powi(3) - u * u * v.powi(4) + prm.c2() * (z - v) * v.powi(3);
            reaction +=
                prm.b() * w * z.powi(3) - w * w * z.powi(4) + prm.c2() * (v - z) * z.powi(3);
        }
        let grid_route = -3.0 * prm.d2() * q.n4 + 4.0 * basis.cell() * reaction;
        assert!(
            (modal_route - grid_route).abs() <= 1e-8 * grid_route.abs().max(1.0),
            "modal {modal_route} vs grid {grid_route}"
        );
    }

    #[test]
    fn residuals_reject_insufficient_states() {
        let prm = Parameters::default_scenario();
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 4).unwrap();
        let g0 = ModalState::zero(&basis);
        let cfg = IntegratorConfig::new(0.01, Scheme::IfRk2, 0.1, 1).unwrap();
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        assert!(matches!(
            inequality_residuals(&traj, &basis, &prm, 0.4),
            Err(Error::InsufficientStates { .. })
        ));
    }

    #[test]
    fn verdicts_pass_on_attractor_and_fail_when_shrunken() {
        let prm = Parameters::default_scenario();
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let g0 = ModalState::random_ball(&basis, 5.0, &mut rng);
        let cfg = IntegratorConfig::new(2e-3, Scheme::IfRk2, 10.0, 50).unwrap();
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        let est = spectral::embedding_constants(&basis, 1000, 7).unwrap();
        let bs = compute_bound_set(&prm, basis.gamma(), PI, 1, est.delta, est.eta);
        let verdicts = verify_absorption(&traj, &bs, 0.4, 0.0).unwrap();
        assert_eq!(verdicts.len(), 9);
        assert!(verdicts.iter().all(|v| v.pass), "{verdicts:#?}");
        assert!(verdicts.iter().all(|v| v.margin_ratio <= 1.0));

        // Falsifiability: shrinking R0 a hundredfold must flip its verdict.
        let mut shrunk = bs.clone();
        shrunk.constant_mut("R0").unwrap().scale(0.01);
        let verdicts = verify_absorption(&traj, &shrunk, 0.4, 0.0).unwrap();
        let vz = verdicts.iter().find(|v| v.name == "vz_l2").unwrap();
        assert!(!vz.pass, "shrunken R0 should fail: {vz:?}");
    }

    #[test]
    fn empty_tail_is_rejected() {
        let prm = Parameters::default_scenario();
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 4).unwrap();
        let g0 = ModalState::zero(&basis);
        let cfg = IntegratorConfig::new(0.01, Scheme::IfRk2, 0.1, 1).unwrap();
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        let bs = default_bounds();
        assert!(verify_absorption(&traj, &bs, 0.0, 0.0).is_err());
    }

    #[test]
    fn bound_set_json_roundtrip_with_infinities() {
        let bs = default_bounds();
        let json = serde_json::to_string(&bs).unwrap();
        let back: BoundSet = serde_json::from_str(&json).unwrap();
        for (a, b) in bs.constants().iter().zip(back.constants()) {
            assert_eq!(a.name, b.name);
            assert!(
                a.value == b.value || (a.value.is_infinite() && b.value.is_infinite()),
                "{}: {} vs {}",
                a.name,
                a.value,
                b.value
            );
        }
    }
}
