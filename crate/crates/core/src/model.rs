//! Physical parameters, the pointwise reaction law and its Jacobian, and the
//! grouping/re-scaling change of variables.
//!
//! The system couples two compartments of cubic autocatalytic kinetics
//! (components `u, v` and `w, z`) through linear exchange terms, with a
//! reversible conversion step producing the intermediates `phi, psi`:
//!
//! ```text
//! u_t   = d1 lap u   + a - (b+k) u + u^2 v + D1 (w - u) + N phi
//! v_t   = d2 lap v   + b u - u^2 v + D2 (z - v)
//! phi_t = d3 lap phi + k u - (lambda + N) phi + D3 (psi - phi)
//! w_t   = d1 lap w   + a - (b+k) w + w^2 z + D1 (u - w) + N psi
//! z_t   = d2 lap z   + b w - w^2 z + D2 (v - z)
//! psi_t = d3 lap psi + k w - (lambda + N) psi + D3 (phi - psi)
//! ```
//!
//! No positivity of concentrations is assumed anywhere: the dissipativity
//! estimates hold for sign-indefinite states, and clamping would invalidate
//! the inequality checks performed in [`crate::bounds`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Component names in block order, used in diagnostics and reports.
pub const COMPONENT_NAMES: [&str; 6] = ["u", "v", "phi", "w", "z", "psi"];

/// Per-component diffusivity pattern: `(d1, d2, d3, d1, d2, d3)`.
#[inline]
pub fn diffusivities(prm: &Parameters) -> [f64; 6] {
    [prm.d1(), prm.d2(), prm.d3(), prm.d1(), prm.d2(), prm.d3()]
}

/// The eleven positive coefficients of the system plus cached derived
/// scalars.
///
/// Derived scalars are computed once at construction (they appear in every
/// bound formula): `mu = k / N`, `d = min(d1, d3)`, `d0 = min(d1, d2, d3)`.
/// Fields are private so the invariants cannot be broken after validation;
/// construct via [`Parameters::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters", into = "RawParameters")]
pub struct Parameters {
    d1: f64,
    d2: f64,
    d3: f64,
    // Compartment coupling rates: c1 couples u<->w, c2 couples v<->z,
    // c3 couples phi<->psi.
    c1: f64,
    c2: f64,
    c3: f64,
    a: f64,
    b: f64,
    k: f64,
    lambda: f64,
    n_rev: f64,
    mu: f64,
    d_min: f64,
    d0_min: f64,
}

/// Serialization mirror of [`Parameters`] carrying only the primary fields.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawParameters {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    #[serde(rename = "D1")]
    pub c1: f64,
    #[serde(rename = "D2")]
    pub c2: f64,
    #[serde(rename = "D3")]
    pub c3: f64,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n_rev: f64,
}

impl Parameters {
    /// Validates positivity of all eleven coefficients and caches the
    /// derived scalars. Argument order: diffusivities `d1, d2, d3`,
    /// coupling rates `D1, D2, D3`, then `a, b, k, lambda, N`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d1: f64,
        d2: f64,
        d3: f64,
        c1: f64,
        c2: f64,
        c3: f64,
        a: f64,
        b: f64,
        k: f64,
        lambda: f64,
        n_rev: f64,
    ) -> Result<Self> {
        let named = [
            ("d1", d1),
            ("d2", d2),
            ("d3", d3),
            ("D1", c1),
            ("D2", c2),
            ("D3", c3),
            ("a", a),
            ("b", b),
            ("k", k),
            ("lambda", lambda),
            ("N", n_rev),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositive { name, value });
            }
        }
        Ok(Self {
            d1,
            d2,
            d3,
            c1,
            c2,
            c3,
            a,
            b,
            k,
            lambda,
            n_rev,
            mu: k / n_rev,
            d_min: d1.min(d3),
            d0_min: d1.min(d2).min(d3),
        })
    }

    /// The reference scenario used throughout the tests and documentation:
    /// `d1 = d2 = d3 = 1`, `D1 = D2 = D3 = 0.1`, `a = 1`, `b = 2`, `k = 1`,
    /// `lambda = 1`, `N = 1` (so `mu = d = d0 = 1`).
    pub fn default_scenario() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 1.0, 2.0, 1.0, 1.0, 1.0)
            .expect("default scenario is valid")
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }
    pub fn d2(&self) -> f64 {
        self.d2
    }
    pub fn d3(&self) -> f64 {
        self.d3
    }
    /// Coupling rate of the `u <-> w` exchange.
    pub fn c1(&self) -> f64 {
        self.c1
    }
    /// Coupling rate of the `v <-> z` exchange.
    pub fn c2(&self) -> f64 {
        self.c2
    }
    /// Coupling rate of the `phi <-> psi` exchange.
    pub fn c3(&self) -> f64 {
        self.c3
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    /// Reverse-reaction rate `N`.
    pub fn n_rev(&self) -> f64 {
        self.n_rev
    }
    /// Re-scaling factor `mu = k / N`.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// `d = min(d1, d3)`.
    pub fn d(&self) -> f64 {
        self.d_min
    }
    /// `d0 = min(d1, d2, d3)`.
    pub fn d0(&self) -> f64 {
        self.d0_min
    }

    pub fn raw(&self) -> RawParameters {
        RawParameters {
            d1: self.d1,
            d2: self.d2,
            d3: self.d3,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            a: self.a,
            b: self.b,
            k: self.k,
            lambda: self.lambda,
            n_rev: self.n_rev,
        }
    }
}

impl TryFrom<RawParameters> for Parameters {
    type Error = Error;
    fn try_from(r: RawParameters) -> Result<Self> {
        Parameters::new(
            r.d1, r.d2, r.d3, r.c1, r.c2, r.c3, r.a, r.b, r.k, r.lambda, r.n_rev,
        )
    }
}

impl From<Parameters> for RawParameters {
    fn from(p: Parameters) -> Self {
        p.raw()
    }
}

/// Concentrations of the six components at one spatial point. Values may be
/// negative; only finiteness is required.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointState {
    pub u: f64,
    pub v: f64,
    pub phi: f64,
    pub w: f64,
    pub z: f64,
    pub psi: f64,
}

impl PointState {
    pub fn from_array(s: [f64; 6]) -> Self {
        Self {
            u: s[0],
            v: s[1],
            phi: s[2],
            w: s[3],
            z: s[4],
            psi: s[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.u, self.v, self.phi, self.w, self.z, self.psi]
    }

    fn check_finite(&self, what: &'static str) -> Result<()> {
        for (name, value) in COMPONENT_NAMES.iter().zip(self.as_array()) {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what,
                    component: (*name).to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Grouped/re-scaled view of a point state:
/// `y = u+v+w+z`, `xi = phi+psi`, `p = u+v-w-z`, `theta = phi-psi`,
/// and the re-scaled `Xi = xi/mu`, `Theta = theta/mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedView {
    pub y: f64,
    pub xi: f64,
    pub p: f64,
    pub theta: f64,
    pub xi_rescaled: f64,
    pub theta_rescaled: f64,
}

/// Reaction rates without the diffusion terms, on a raw 6-array. Hot-path
/// kernel shared by the pseudospectral evaluation; no validation.
#[inline]
pub(crate) fn reaction_rates(s: [f64; 6], prm: &Parameters) -> [f64; 6] {
    let [u, v, phi, w, z, psi] = s;
    let (a, b, k) = (prm.a, prm.b, prm.k);
    let (c1, c2, c3) = (prm.c1, prm.c2, prm.c3);
    let ln = prm.lambda + prm.n_rev;
    let uuv = u * u * v;
    let wwz = w * w * z;
    [
        a - (b + k) * u + uuv + c1 * (w - u) + prm.n_rev * phi,
        b * u - uuv + c2 * (z - v),
        k * u - ln * phi + c3 * (psi - phi),
        a - (b + k) * w + wwz + c1 * (u - w) + prm.n_rev * psi,
        b * w - wwz + c2 * (v - z),
        k * w - ln * psi + c3 * (phi - psi),
    ]
}

/// Jacobian of [`reaction_rates`] on a raw 6-array; no validation.
#[inline]
pub(crate) fn reaction_jacobian(s: [f64; 6], prm: &Parameters) -> [[f64; 6]; 6] {
    let [u, v, _phi, w, z, _psi] = s;
    let (b, k) = (prm.b, prm.k);
    let (c1, c2, c3) = (prm.c1, prm.c2, prm.c3);
    let n = prm.n_rev;
    let ln = prm.lambda + n;
    let mut m = [[0.0; 6]; 6];
    // First compartment rows (u, v, phi).
    m[0][0] = 2.0 * u * v - (b + k) - c1;
    m[0][1] = u * u;
    m[0][2] = n;
    m[0][3] = c1;
    m[1][0] = b - 2.0 * u * v;
    m[1][1] = -u * u - c2;
    m[1][4] = c2;
    m[2][0] = k;
    m[2][2] = -ln - c3;
    m[2][5] = c3;
    // Second compartment rows mirror the first with (w, z) in place of
    // (u, v) and the couplings reversed.
    m[3][3] = 2.0 * w * z - (b + k) - c1;
    m[3][4] = w * w;
    m[3][5] = n;
    m[3][0] = c1;
    m[4][3] = b - 2.0 * w * z;
    m[4][4] = -w * w - c2;
    m[4][1] = c2;
    m[5][3] = k;
    m[5][5] = -ln - c3;
    m[5][2] = c3;
    m
}

/// Action of the reaction Jacobian at state `s` on a direction `g`,
/// written out entry by entry. Hot-path kernel of the variational dynamics.
#[inline]
pub(crate) fn jacobian_action(s: [f64; 6], g: [f64; 6], prm: &Parameters) -> [f64; 6] {
    let [u, v, _phi, w, z, _psi] = s;
    let (b, k) = (prm.b, prm.k);
    let (c1, c2, c3) = (prm.c1, prm.c2, prm.c3);
    let n = prm.n_rev;
    let ln = prm.lambda + n;
    let uv2 = 2.0 * u * v;
    let wz2 = 2.0 * w * z;
    let usq = u * u;
    let wsq = w * w;
    [
        (uv2 - (b + k) - c1) * g[0] + usq * g[1] + n * g[2] + c1 * g[3],
        (b - uv2) * g[0] - (usq + c2) * g[1] + c2 * g[4],
        k * g[0] - (ln + c3) * g[2] + c3 * g[5],
        c1 * g[0] + (wz2 - (b + k) - c1) * g[3] + wsq * g[4] + n * g[5],
        c2 * g[1] + (b - wz2) * g[3] - (wsq + c2) * g[4],
        c3 * g[2] + k * g[3] - (ln + c3) * g[5],
    ]
}

/// Pointwise reaction rates `f(s)` (everything except diffusion).
///
/// Rejects non-finite inputs with a diagnostic naming the offending
/// component.
pub fn reaction_pointwise(s: &PointState, prm: &Parameters) -> Result<[f64; 6]> {
    s.check_finite("reaction_pointwise input")?;
    Ok(reaction_rates(s.as_array(), prm))
}

/// Pointwise Jacobian `f'(s)` of the reaction law, a 6x6 matrix in the
/// component order `(u, v, phi, w, z, psi)`.
pub fn reaction_jacobian_pointwise(s: &PointState, prm: &Parameters) -> Result<[[f64; 6]; 6]> {
    s.check_finite("reaction_jacobian_pointwise input")?;
    Ok(reaction_jacobian(s.as_array(), prm))
}

/// Grouping/re-scaling change of variables at one point.
pub fn group_forward(s: &PointState, prm: &Parameters) -> GroupedView {
    let y = s.u + s.v + s.w + s.z;
    let xi = s.phi + s.psi;
    let p = s.u + s.v - s.w - s.z;
    let theta = s.phi - s.psi;
    GroupedView {
        y,
        xi,
        p,
        theta,
        xi_rescaled: xi / prm.mu,
        theta_rescaled: theta / prm.mu,
    }
}

/// Recovers `(u, w, phi, psi)` from a grouped view and the `(v, z)` values,
/// via the halving identities
/// `u = ((y-v-z) + (p-v+z))/2`, `w = ((y-v-z) - (p-v+z))/2`,
/// `phi = (xi+theta)/2`, `psi = (xi-theta)/2`.
pub fn group_inverse(gv: &GroupedView, v: f64, z: f64) -> (f64, f64, f64, f64) {
    let uw_sum = gv.y - v - z;
    let uw_diff = gv.p - v + z;
    let u = 0.5 * (uw_sum + uw_diff);
    let w = 0.5 * (uw_sum - uw_diff);
    let phi = 0.5 * (gv.xi + gv.theta);
    let psi = 0.5 * (gv.xi - gv.theta);
    (u, w, phi, psi)
}

/// Compartment swap `(u, v, phi) <-> (w, z, psi)` on a raw 6-array.
pub fn swap_compartments(s: [f64; 6]) -> [f64; 6] {
    [s[3], s[4], s[5], s[0], s[1], s[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prm() -> Parameters {
        Parameters::default_scenario()
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let err = Parameters::new(1.0, -1.0, 1.0, 0.1, 0.1, 0.1, 1.0, 2.0, 1.0, 1.0, 1.0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("d2"), "{err}");
        assert!(err.contains("positive"), "{err}");
        assert!(Parameters::new(1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 1.0, 2.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn derived_scalars_cached_exactly() {
        let p = Parameters::new(0.5, 2.0, 0.25, 0.1, 0.2, 0.3, 1.0, 2.0, 3.0, 1.0, 4.0).unwrap();
        assert_eq!(p.mu(), 3.0 / 4.0);
        assert_eq!(p.d(), 0.25);
        assert_eq!(p.d0(), 0.25);
        let q = Parameters::new(3.0, 0.5, 2.0, 0.1, 0.2, 0.3, 1.0, 2.0, 3.0, 1.0, 4.0).unwrap();
        assert_eq!(q.d(), 2.0);
        assert_eq!(q.d0(), 0.5);
    }

    #[test]
    fn reaction_at_zero_is_feed_only() {
        let f = reaction_pointwise(&PointState::default(), &prm()).unwrap();
        assert_eq!(f, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn reaction_worked_example() {
        // All-ones state in the default scenario.
        let s = PointState::from_array([1.0; 6]);
        let f = reaction_pointwise(&s, &prm()).unwrap();
        let expect = [0.0, 1.0, -1.0, 0.0, 1.0, -1.0];
        for (got, want) in f.iter().zip(expect) {
            assert!((got - want).abs() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn reaction_rejects_non_finite() {
        let s = PointState {
            z: f64::NAN,
            ..PointState::default()
        };
        let err = reaction_pointwise(&s, &prm()).unwrap_err().to_string();
        assert!(err.contains("component z"), "{err}");
    }

    #[test]
    fn swap_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = prm();
        for _ in 0..200 {
            let s: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
            let f_swapped = reaction_rates(swap_compartments(s), &p);
            let swapped_f = swap_compartments(reaction_rates(s, &p));
            for i in 0..6 {
                assert_eq!(f_swapped[i], swapped_f[i]);
            }
        }
    }

    #[test]
    fn jacobian_at_zero_matches_constant_matrix() {
        let p = prm();
        let m = reaction_jacobian_pointwise(&PointState::default(), &p).unwrap();
        let (b, k, n, lam) = (p.b(), p.k(), p.n_rev(), p.lambda());
        assert_eq!(m[0][0], -(b + k) - p.c1());
        assert_eq!(m[1][1], -p.c2());
        assert_eq!(m[2][2], -(lam + n) - p.c3());
        assert_eq!(m[0][1], 0.0);
        assert_eq!(m[0][2], n);
        assert_eq!(m[0][3], p.c1());
        assert_eq!(m[1][0], b);
        assert_eq!(m[2][0], k);
        assert_eq!(m[4][1], p.c2());
        assert_eq!(m[5][2], p.c3());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[i + 3][j + 3]);
            }
        }
    }

    /// Central-difference oracle: the analytic Jacobian must agree with
    /// finite differences of the reaction law.
    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = prm();
        let h = 1e-6;
        for _ in 0..100 {
            let s: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
            let jac = reaction_jacobian(s, &p);
            let scale = jac
                .iter()
                .flatten()
                .fold(1.0_f64, |acc, x| acc.max(x.abs()));
            for col in 0..6 {
                let mut sp = s;
                let mut sm = s;
                sp[col] += h;
                sm[col] -= h;
                let fp = reaction_rates(sp, &p);
                let fm = reaction_rates(sm, &p);
                for row in 0..6 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!(
                        (fd - jac[row][col]).abs() <= 1e-6 * scale,
                        "entry ({row},{col}): fd {fd}, analytic {}",
                        jac[row][col]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_commutes_with_swap_on_synchronized_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = prm();
        for _ in 0..50 {
            let (u, v, phi) = (
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let s = [u, v, phi, u, v, phi];
            let m = reaction_jacobian(s, &p);
            // P M = M P where P is the compartment swap permutation.
            for i in 0..6 {
                for j in 0..6 {
                    let pi = (i + 3) % 6;
                    let pj = (j + 3) % 6;
                    assert_eq!(m[pi][pj], m[i][j], "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn group_forward_worked_example() {
        let s = PointState::from_array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let gv = group_forward(&s, &prm());
        assert_eq!(gv.y, 12.0);
        assert_eq!(gv.xi, 9.0);
        assert_eq!(gv.p, -6.0);
        assert_eq!(gv.theta, -3.0);
        assert_eq!(gv.xi_rescaled, 9.0);
        assert_eq!(gv.theta_rescaled, -3.0);
    }

    #[test]
    fn group_forward_vanishes_on_synchronized_and_zero_states() {
        let p = prm();
        let sync = PointState::from_array([1.5, -0.5, 2.0, 1.5, -0.5, 2.0]);
        let gv = group_forward(&sync, &p);
        assert_eq!(gv.p, 0.0);
        assert_eq!(gv.theta, 0.0);
        let zero = group_forward(&PointState::default(), &p);
        assert_eq!(
            (
                zero.y,
                zero.xi,
                zero.p,
                zero.theta,
                zero.xi_rescaled,
                zero.theta_rescaled
            ),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn group_inverse_worked_example() {
        let gv = GroupedView {
            y: 12.0,
            xi: 9.0,
            p: -6.0,
            theta: -3.0,
            xi_rescaled: 9.0,
            theta_rescaled: -3.0,
        };
        let (u, w, phi, psi) = group_inverse(&gv, 2.0, 5.0);
        assert_eq!((u, w, phi, psi), (1.0, 4.0, 3.0, 6.0));
        let zero = GroupedView {
            y: 0.0,
            xi: 0.0,
            p: 0.0,
            theta: 0.0,
            xi_rescaled: 0.0,
            theta_rescaled: 0.0,
        };
        assert_eq!(group_inverse(&zero, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rescale_consistency() {
        let p = Parameters::new(1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 1.0, 2.0, 3.0, 1.0, 2.0).unwrap();
        let s = PointState::from_array([0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
        let gv = group_forward(&s, &p);
        assert!((gv.xi_rescaled * p.mu() - gv.xi).abs() < 1e-15);
        assert!((gv.theta_rescaled * p.mu() - gv.theta).abs() < 1e-15);
    }
}
