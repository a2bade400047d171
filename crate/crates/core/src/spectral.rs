//! Sine-basis Galerkin discretization on boxes with homogeneous Dirichlet
//! conditions.
//!
//! The eigenpairs of the Dirichlet Laplacian on a box are closed-form:
//! `e_j(x) = prod_i sqrt(2/L_i) sin(j_i pi x_i / L_i)` with eigenvalue
//! `lambda_j = pi^2 sum_i (j_i / L_i)^2`. All transforms here are dense
//! per-axis matrix applications on a padded collocation grid chosen so that
//! every quadrature this crate performs (projection of cubic terms, L4/L6
//! norms, tangent trace forms) is exact for the trigonometric degrees
//! present, up to roundoff. Products of sine-series fields extend to
//! trigonometric polynomials of period `2 L_i` per axis, and the interior
//! rectangle sum equals the full-period trapezoid rule whenever the
//! integrand vanishes at the endpoints, which holds for every integrand we
//! quadrature (each contains at least one boundary-vanishing factor). The
//! full-period trapezoid rule is exact for degrees below `2 (n_g + 1)`, so
//! `n_g >= 3 M + 2` covers the degree-`6M` integrands of the L6 norms and
//! everything below.

use crate::error::{Error, Result};
use crate::model::{self, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Memory budget for grid storage, in f64 slots (~1.6 GB).
const GRID_BUDGET: usize = 200_000_000;

/// Box domain in dimension 1..=3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    lengths: Vec<f64>,
}

impl DomainSpec {
    pub fn new(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(Error::InvalidArgument {
                what: "DomainSpec",
                message: format!("dimension must be 1..=3, got {}", lengths.len()),
            });
        }
        for &l in lengths {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::NonPositive {
                    name: "domain length",
                    value: l,
                });
            }
        }
        Ok(Self {
            lengths: lengths.to_vec(),
        })
    }

    /// The interval `(0, L)`.
    pub fn interval(l: f64) -> Result<Self> {
        Self::new(&[l])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// `|Omega|`, the product of the side lengths.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// One per-axis factor of the tensor transforms.
#[derive(Debug, Clone)]
struct AxisTables {
    /// `sin_eval[i * m + j] = sqrt(2/L) sin((j+1) pi x_i / L)`, grid-major.
    sin_eval: Vec<f64>,
    /// `quad[j * n_g + i] = h * sin_eval[i * m + j]`; one application of this
    /// matrix performs exact integration against the basis along the axis.
    quad: Vec<f64>,
    /// Derivative values `sqrt(2/L) ((j+1) pi / L) cos((j+1) pi x_i / L)`.
    dsin_eval: Vec<f64>,
    /// Interior collocation nodes.
    nodes: Vec<f64>,
}

/// Orthonormal sine eigenbasis of the Dirichlet Laplacian on a box, with a
/// padded collocation grid for dealiased quadrature.
#[derive(Debug, Clone)]
pub struct SineBasis {
    domain: DomainSpec,
    modes_per_axis: usize,
    grid_per_axis: usize,
    /// Eigenvalues sorted ascending; ties broken lexicographically by the
    /// 1-based index tuple, which makes mode indexing deterministic.
    eigenvalues: Vec<f64>,
    /// Sorted mode -> 1-based per-axis indices (unused axes hold 1).
    indices: Vec<[usize; 3]>,
    /// Sorted mode -> linear index in the tensor coefficient layout.
    sorted_to_tensor: Vec<usize>,
    gamma: f64,
    axes: Vec<AxisTables>,
    /// Product of the per-axis node spacings (quadrature cell measure).
    cell: f64,
    /// `int e_j dx` per sorted mode, in closed form. Constants are not
    /// band-limited, so their projection must bypass grid quadrature.
    const_proj: Vec<f64>,
}

impl SineBasis {
    /// Builds the basis with `m` modes per axis and the default padded grid
    /// of `3 m + 2` interior points per axis.
    pub fn new(domain: DomainSpec, m: usize) -> Result<Self> {
        let grid = 3 * m + 2;
        Self::with_grid(domain, m, grid)
    }

    /// Builds the basis with an explicit collocation grid size per axis.
    /// `grid >= 2 m + 1` is required for alias-free cubic projection.
    pub fn with_grid(domain: DomainSpec, m: usize, grid: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument {
                what: "SineBasis",
                message: "modes per axis must be >= 1".into(),
            });
        }
        if grid < 2 * m + 1 {
            return Err(Error::InvalidArgument {
                what: "SineBasis",
                message: format!(
                    "collocation grid {grid} is below the dealiasing minimum {}",
                    2 * m + 1
                ),
            });
        }
        let n = domain.dim();
        let grid_total = grid.pow(n as u32);
        // Six component fields live on the grid at once.
        if grid_total.saturating_mul(6) > GRID_BUDGET {
            return Err(Error::ResourceLimit {
                requested: grid_total.saturating_mul(6),
                budget: GRID_BUDGET,
            });
        }

        let mut axes = Vec::with_capacity(n);
        let mut cell = 1.0;
        for &l in domain.lengths() {
            let h = l / (grid as f64 + 1.0);
            cell *= h;
            let norm = (2.0 / l).sqrt();
            let nodes: Vec<f64> = (1..=grid).map(|i| i as f64 * h).collect();
            let mut sin_eval = vec![0.0; grid * m];
            let mut dsin_eval = vec![0.0; grid * m];
            let mut quad = vec![0.0; m * grid];
            for (i, &x) in nodes.iter().enumerate() {
                for j in 0..m {
                    let freq = (j as f64 + 1.0) * PI / l;
                    let s = norm * (freq * x).sin();
                    sin_eval[i * m + j] = s;
                    dsin_eval[i * m + j] = norm * freq * (freq * x).cos();
                    quad[j * grid + i] = h * s;
                }
            }
            axes.push(AxisTables {
                sin_eval,
                quad,
                dsin_eval,
                nodes,
            });
        }

        // Tensor eigenvalues, sorted with lexicographic tie-break.
        let m_tot = m.pow(n as u32);
        let mut order: Vec<(f64, [usize; 3], usize)> = Vec::with_capacity(m_tot);
        for lin in 0..m_tot {
            let mut idx = [1usize; 3];
            let mut rest = lin;
            for axis in 0..n {
                idx[axis] = rest % m + 1;
                rest /= m;
            }
            let lam: f64 = (0..n)
                .map(|axis| {
                    let r = idx[axis] as f64 / domain.lengths()[axis];
                    PI * PI * r * r
                })
                .sum();
            order.push((lam, idx, lin));
        }
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let eigenvalues: Vec<f64> = order.iter().map(|e| e.0).collect();
        let indices: Vec<[usize; 3]> = order.iter().map(|e| e.1).collect();
        let sorted_to_tensor: Vec<usize> = order.iter().map(|e| e.2).collect();
        let const_proj: Vec<f64> = indices
            .iter()
            .map(|idx| {
                (0..n)
                    .map(|axis| {
                        let l = domain.lengths()[axis];
                        let j = idx[axis] as f64;
                        let parity = 1.0 - (j * PI).cos();
                        (2.0 / l).sqrt() * l / (j * PI) * parity
                    })
                    .product()
            })
            .collect();
        let gamma: f64 = (0..n)
            .map(|axis| {
                let r = 1.0 / domain.lengths()[axis];
                PI * PI * r * r
            })
            .sum();
        debug_assert_eq!(gamma, eigenvalues[0]);

        let basis = Self {
            domain,
            modes_per_axis: m,
            grid_per_axis: grid,
            eigenvalues,
            indices,
            sorted_to_tensor,
            gamma,
            axes,
            cell,
            const_proj,
        };
        basis.verify_orthonormality()?;
        Ok(basis)
    }

    /// Checks the discrete orthonormality `h S^T S = I` per axis.
    fn verify_orthonormality(&self) -> Result<()> {
        let m = self.modes_per_axis;
        let g = self.grid_per_axis;
        for ax in &self.axes {
            for j in 0..m {
                for k in j..m {
                    let mut dot = 0.0;
                    for i in 0..g {
                        dot += ax.quad[j * g + i] * ax.sin_eval[i * m + k];
                    }
                    let expect = if j == k { 1.0 } else { 0.0 };
                    if (dot - expect).abs() > 1e-12 {
                        return Err(Error::InvalidArgument {
                            what: "SineBasis",
                            message: format!(
                                "discrete orthonormality defect {:.3e} at modes ({j},{k})",
                                (dot - expect).abs()
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }
    pub fn grid_per_axis(&self) -> usize {
        self.grid_per_axis
    }
    /// Total number of retained modes, `M^n`.
    pub fn m_tot(&self) -> usize {
        self.eigenvalues.len()
    }
    /// Total number of collocation points, `n_g^n`.
    pub fn grid_tot(&self) -> usize {
        self.grid_per_axis.pow(self.dim() as u32)
    }
    /// Poincare constant: the smallest Dirichlet eigenvalue.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Eigenvalues in sorted mode order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    /// 1-based per-axis indices of each sorted mode.
    pub fn mode_indices(&self) -> &[[usize; 3]] {
        &self.indices
    }
    /// Quadrature cell measure of the collocation grid.
    pub fn cell(&self) -> f64 {
        self.cell
    }
    /// Interior collocation nodes along one axis.
    pub fn nodes(&self, axis: usize) -> &[f64] {
        &self.axes[axis].nodes
    }
    /// Closed-form projections of the constant 1 onto each sorted mode.
    pub fn constant_projection(&self) -> &[f64] {
        &self.const_proj
    }

    fn check_block(&self, what: &'static str, block: &[f64]) -> Result<()> {
        if block.len() != self.m_tot() {
            return Err(Error::ShapeMismatch {
                what,
                expected: self.m_tot(),
                got: block.len(),
            });
        }
        Ok(())
    }

    /// Applies a per-axis matrix (`rows x cols`, row-major) along `axis` of a
    /// tensor with extents `dims`, returning the transformed tensor.
    fn apply_axis(
        mat: &[f64],
        rows: usize,
        cols: usize,
        input: &[f64],
        dims: &mut [usize; 3],
        axis: usize,
        ndim: usize,
    ) -> Vec<f64> {
        let before: usize = dims[..axis].iter().product();
        let after: usize = dims[axis + 1..ndim].iter().product();
        let mut out = vec![0.0; before * rows * after];
        if before == 1 {
            // Contiguous along the contracted index: plain dot products.
            for ib in 0..after {
                let in_chunk = &input[ib * cols..(ib + 1) * cols];
                let out_chunk = &mut out[ib * rows..(ib + 1) * rows];
                for (o, row) in out_chunk.iter_mut().zip(mat.chunks_exact(cols)) {
                    *o = row.iter().zip(in_chunk).map(|(m, x)| m * x).sum();
                }
            }
        } else {
            for ib in 0..after {
                let in_base = ib * before * cols;
                let out_base = ib * before * rows;
                for (i, row) in mat.chunks_exact(cols).enumerate() {
                    let out_chunk = &mut out[out_base + i * before..out_base + (i + 1) * before];
                    for (j, &mj) in row.iter().enumerate() {
                        let in_chunk = &input[in_base + j * before..in_base + (j + 1) * before];
                        for (o, x) in out_chunk.iter_mut().zip(in_chunk) {
                            *o += mj * x;
                        }
                    }
                }
            }
        }
        dims[axis] = rows;
        out
    }

    /// Evaluates one coefficient block on the collocation grid.
    pub fn to_grid_block(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_block("to_grid", coeffs)?;
        Ok(self.synthesize(coeffs, None))
    }

    /// Evaluates the spatial derivative along `axis` of one block on the
    /// collocation grid.
    pub fn to_grid_deriv_block(&self, coeffs: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_block("to_grid_deriv", coeffs)?;
        Ok(self.synthesize(coeffs, Some(axis)))
    }

    fn synthesize(&self, coeffs: &[f64], deriv_axis: Option<usize>) -> Vec<f64> {
        let n = self.dim();
        let m = self.modes_per_axis;
        let g = self.grid_per_axis;
        // Scatter sorted coefficients into tensor layout.
        let mut tensor = vec![0.0; self.m_tot()];
        for (s, &lin) in self.sorted_to_tensor.iter().enumerate() {
            tensor[lin] = coeffs[s];
        }
        let mut dims = [1usize; 3];
        dims[..n].copy_from_slice(&vec![m; n]);
        let mut data = tensor;
        for axis in 0..n {
            let mat = if deriv_axis == Some(axis) {
                &self.axes[axis].dsin_eval
            } else {
                &self.axes[axis].sin_eval
            };
            data = Self::apply_axis(mat, g, m, &data, &mut dims, axis, n);
        }
        data
    }

    /// Projects a grid field onto the retained modes (exact L2 projection
    /// for band-limited data).
    pub fn to_modes_block(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.len() != self.grid_tot() {
            return Err(Error::ShapeMismatch {
                what: "to_modes",
                expected: self.grid_tot(),
                got: grid.len(),
            });
        }
        let n = self.dim();
        let m = self.modes_per_axis;
        let g = self.grid_per_axis;
        let mut dims = [1usize; 3];
        dims[..n].copy_from_slice(&vec![g; n]);
        let mut data = grid.to_vec();
        for axis in 0..n {
            data = Self::apply_axis(&self.axes[axis].quad, m, g, &data, &mut dims, axis, n);
        }
        // Gather tensor layout into sorted order.
        let mut out = vec![0.0; self.m_tot()];
        for (s, &lin) in self.sorted_to_tensor.iter().enumerate() {
            out[s] = data[lin];
        }
        Ok(out)
    }

    /// Exact integral of a product of grid fields that vanish on the
    /// boundary (interior rectangle rule, exact for the degrees present).
    pub fn quad_sum(&self, grid: &[f64]) -> f64 {
        self.cell * grid.iter().sum::<f64>()
    }

    /// `||grad f||^2` of a coefficient block via Parseval.
    pub fn h1_seminorm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l * c * c)
            .sum()
    }
}

/// Six blocks of sine coefficients (component order `u, v, phi, w, z, psi`)
/// plus a timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub time: f64,
    blocks: [Vec<f64>; 6],
}

impl ModalState {
    pub fn zero(basis: &SineBasis) -> Self {
        Self {
            time: 0.0,
            blocks: std::array::from_fn(|_| vec![0.0; basis.m_tot()]),
        }
    }

    pub fn from_blocks(time: f64, blocks: [Vec<f64>; 6]) -> Result<Self> {
        let len = blocks[0].len();
        for b in &blocks {
            if b.len() != len {
                return Err(Error::ShapeMismatch {
                    what: "ModalState blocks",
                    expected: len,
                    got: b.len(),
                });
            }
        }
        Ok(Self { time, blocks })
    }

    pub fn m_tot(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn block(&self, comp: usize) -> &[f64] {
        &self.blocks[comp]
    }

    pub fn block_mut(&mut self, comp: usize) -> &mut [f64] {
        &mut self.blocks[comp]
    }

    pub fn blocks(&self) -> &[Vec<f64>; 6] {
        &self.blocks
    }

    /// Sets the coefficient of sorted mode `mode` of component `comp`.
    pub fn set_coeff(&mut self, comp: usize, mode: usize, value: f64) {
        self.blocks[comp][mode] = value;
    }

    /// Squared H-norm (sum of the six Parseval L2 norms).
    pub fn h_norm_sq(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|c| c.is_finite()))
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in &mut self.blocks {
            for c in b.iter_mut() {
                *c *= alpha;
            }
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModalState) {
        for (b, ob) in self.blocks.iter_mut().zip(&other.blocks) {
            for (c, oc) in b.iter_mut().zip(ob) {
                *c += alpha * oc;
            }
        }
    }

    /// Euclidean distance between coefficient vectors.
    pub fn distance(&self, other: &ModalState) -> f64 {
        let mut acc = 0.0;
        for (b, ob) in self.blocks.iter().zip(&other.blocks) {
            for (c, oc) in b.iter().zip(ob) {
                let d = c - oc;
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// Smooth random state: coefficients i.i.d. uniform with decay
    /// `rank^(-2)` in the sorted mode order, rescaled to H-norm `rho`.
    pub fn random_ball(basis: &SineBasis, rho: f64, rng: &mut impl Rng) -> Self {
        let mut s = Self::zero(basis);
        for comp in 0..6 {
            for (j, c) in s.blocks[comp].iter_mut().enumerate() {
                let decay = ((j + 1) as f64).powi(-2);
                *c = rng.gen_range(-1.0..1.0) * decay;
            }
        }
        let norm = s.h_norm_sq().sqrt();
        if norm > 0.0 {
            s.scale(rho / norm);
        }
        s
    }

    /// Largest departure from compartment symmetry,
    /// `||u-w|| + ||v-z|| + ||phi-psi||`.
    pub fn sync_defect(&self) -> f64 {
        let pair = |a: usize, b: usize| {
            self.blocks[a]
                .iter()
                .zip(&self.blocks[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        pair(0, 3) + pair(1, 4) + pair(2, 5)
    }
}

/// The six component fields sampled on the collocation grid.
#[derive(Debug, Clone)]
pub struct GridState {
    pub fields: [Vec<f64>; 6],
}

impl GridState {
    pub fn sup_norm(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Evaluates all six component blocks on the grid.
pub fn to_grid(ms: &ModalState, basis: &SineBasis) -> Result<GridState> {
    let mut fields: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for comp in 0..6 {
        fields[comp] = basis.to_grid_block(ms.block(comp))?;
    }
    Ok(GridState { fields })
}

/// Projects six grid fields back onto the retained modes.
pub fn to_modes(grid: &GridState, basis: &SineBasis, time: f64) -> Result<ModalState> {
    let mut blocks: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for comp in 0..6 {
        blocks[comp] = basis.to_modes_block(&grid.fields[comp])?;
    }
    ModalState::from_blocks(time, blocks)
}

/// Galerkin projection of the reaction law: evaluates `f(g_m)` pointwise on
/// the padded grid and projects back onto the retained modes.
///
/// The state-dependent part of `f` is band-limited (degree at most `3M` per
/// axis), so its grid projection is quadrature-exact. The constant feed `a`
/// is not band-limited; it is subtracted before the transform and its exact
/// closed-form projection is added back, making the whole projection exact
/// up to roundoff.
pub fn nonlinear_galerkin(
    ms: &ModalState,
    basis: &SineBasis,
    prm: &Parameters,
) -> Result<ModalState> {
    let grid = to_grid(ms, basis)?;
    let npts = basis.grid_tot();
    let a = prm.a();
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; npts]);
    for p in 0..npts {
        let s = [
            grid.fields[0][p],
            grid.fields[1][p],
            grid.fields[2][p],
            grid.fields[3][p],
            grid.fields[4][p],
            grid.fields[5][p],
        ];
        let f = model::reaction_rates(s, prm);
        out[0][p] = f[0] - a;
        out[1][p] = f[1];
        out[2][p] = f[2];
        out[3][p] = f[3] - a;
        out[4][p] = f[4];
        out[5][p] = f[5];
    }
    let mut blocks: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for comp in 0..6 {
        blocks[comp] = basis.to_modes_block(&out[comp])?;
        if comp == 0 || comp == 3 {
            for (c, e) in blocks[comp].iter_mut().zip(basis.constant_projection()) {
                *c += a * e;
            }
        }
    }
    ModalState::from_blocks(ms.time, blocks)
}

/// Coefficient blocks of the grouped/re-scaled variables of a state. The
/// grouping is linear, so it acts directly on sine coefficients (and hence
/// pointwise on the synthesized fields).
#[derive(Debug, Clone)]
pub struct GroupedModal {
    /// `u + v + w + z`
    pub y: Vec<f64>,
    /// `phi + psi`
    pub xi: Vec<f64>,
    /// `u + v - w - z`
    pub p: Vec<f64>,
    /// `phi - psi`
    pub theta: Vec<f64>,
    /// `xi / mu`
    pub xi_rescaled: Vec<f64>,
    /// `theta / mu`
    pub theta_rescaled: Vec<f64>,
}

/// Field-level grouping change of variables, coefficient-wise.
pub fn group_forward_modal(ms: &ModalState, prm: &Parameters) -> GroupedModal {
    let n = ms.m_tot();
    let mut y = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for j in 0..n {
        let (u, v, phi, w, z, psi) = (
            ms.block(0)[j],
            ms.block(1)[j],
            ms.block(2)[j],
            ms.block(3)[j],
            ms.block(4)[j],
            ms.block(5)[j],
        );
        y.push(u + v + w + z);
        xi.push(phi + psi);
        p.push(u + v - w - z);
        theta.push(phi - psi);
    }
    let inv_mu = 1.0 / prm.mu();
    let xi_rescaled = xi.iter().map(|c| c * inv_mu).collect();
    let theta_rescaled = theta.iter().map(|c| c * inv_mu).collect();
    GroupedModal {
        y,
        xi,
        p,
        theta,
        xi_rescaled,
        theta_rescaled,
    }
}

/// Norm observables of a state: per-component L2 and H1 (Parseval-exact),
/// L4/L6 by exact grid quadrature, grid sup-norm, and the grouped-variable
/// L2 norms used by the absorbing-set estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `||comp||^2`
    pub l2_sq: [f64; 6],
    /// `||grad comp||^2`
    pub h1_sq: [f64; 6],
    /// `int comp^4`
    pub l4_pow4: [f64; 6],
    /// `int comp^6`
    pub l6_pow6: [f64; 6],
    /// `max_x max_comp |comp(x)|` over the collocation grid
    pub sup: f64,
    /// `||u+v+w+z||^2`
    pub y_sq: f64,
    /// `||phi+psi||^2`
    pub xi_sq: f64,
    /// `||u+v-w-z||^2`
    pub p_sq: f64,
    /// `||phi-psi||^2`
    pub theta_sq: f64,
}

impl NormReport {
    pub fn vz_l2_sq(&self) -> f64 {
        self.l2_sq[1] + self.l2_sq[4]
    }
    pub fn g_l2_sq(&self) -> f64 {
        self.l2_sq.iter().sum()
    }
    pub fn yxi_sq(&self) -> f64 {
        self.y_sq + self.xi_sq
    }
    pub fn ptheta_sq(&self) -> f64 {
        self.p_sq + self.theta_sq
    }
    /// `||v||_L4^4 + ||z||_L4^4`
    pub fn vz_l4(&self) -> f64 {
        self.l4_pow4[1] + self.l4_pow4[4]
    }
    /// `||v||_L6^6 + ||z||_L6^6`
    pub fn vz_l6(&self) -> f64 {
        self.l6_pow6[1] + self.l6_pow6[4]
    }
    /// `||grad(u,w)||^2`
    pub fn uw_h1_sq(&self) -> f64 {
        self.h1_sq[0] + self.h1_sq[3]
    }
    /// `||grad(v,z)||^2`
    pub fn vz_h1_sq(&self) -> f64 {
        self.h1_sq[1] + self.h1_sq[4]
    }
    /// `||grad(phi,psi)||^2`
    pub fn phipsi_h1_sq(&self) -> f64 {
        self.h1_sq[2] + self.h1_sq[5]
    }
}

/// Computes the full [`NormReport`] of a state. The grouped norms need a
/// `mu`-bearing parameter set only for the re-scaled blocks, which do not
/// enter any norm here, so the unscaled combinations are formed directly.
pub fn norms(ms: &ModalState, basis: &SineBasis) -> Result<NormReport> {
    let grid = to_grid(ms, basis)?;
    let mut l2_sq = [0.0; 6];
    let mut h1_sq = [0.0; 6];
    let mut l4 = [0.0; 6];
    let mut l6 = [0.0; 6];
    for comp in 0..6 {
        l2_sq[comp] = ms.block(comp).iter().map(|c| c * c).sum();
        h1_sq[comp] = basis.h1_seminorm_sq(ms.block(comp));
        let mut s4 = 0.0;
        let mut s6 = 0.0;
        for &v in &grid.fields[comp] {
            let v2 = v * v;
            s4 += v2 * v2;
            s6 += v2 * v2 * v2;
        }
        l4[comp] = basis.cell() * s4;
        l6[comp] = basis.cell() * s6;
    }
    // Grouped norms via Parseval on combined coefficient blocks.
    let mut y_sq = 0.0;
    let mut xi_sq = 0.0;
    let mut p_sq = 0.0;
    let mut theta_sq = 0.0;
    for j in 0..ms.m_tot() {
        let (u, v, phi, w, z, psi) = (
            ms.block(0)[j],
            ms.block(1)[j],
            ms.block(2)[j],
            ms.block(3)[j],
            ms.block(4)[j],
            ms.block(5)[j],
        );
        let y = u + v + w + z;
        let xi = phi + psi;
        let p = u + v - w - z;
        let th = phi - psi;
        y_sq += y * y;
        xi_sq += xi * xi;
        p_sq += p * p;
        theta_sq += th * th;
    }
    Ok(NormReport {
        l2_sq,
        h1_sq,
        l4_pow4: l4,
        l6_pow6: l6,
        sup: grid.sup_norm(),
        y_sq,
        xi_sq,
        p_sq,
        theta_sq,
    })
}

/// Numerically estimated embedding constants over the Galerkin subspace.
///
/// These are lower witnesses for the true domain constants: each is the
/// maximum of the corresponding Rayleigh-type ratio over sampled and locally
/// refined fields in the subspace, not a certified constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEstimate {
    /// `delta`: max of `||f||_L4^2 / ||grad f||^2`
    pub delta: f64,
    /// `eta`: max of `||f||_L6^2 / ||grad f||^2`
    pub eta: f64,
    /// Gagliardo-Nirenberg constant: max of
    /// `||f||_L4 / (||grad f||^(n/4) ||f||^(1-n/4))`
    pub c_gn: f64,
    pub sample_budget: usize,
    pub seed: u64,
    /// Coefficients of the field achieving `delta` (for reproducibility).
    pub delta_maximizer: Vec<f64>,
    pub eta_maximizer: Vec<f64>,
    pub c_gn_maximizer: Vec<f64>,
}

struct ScalarRatios {
    l4_pow4: f64,
    l6_pow6: f64,
    l2_sq: f64,
    h1_sq: f64,
}

fn scalar_ratios(basis: &SineBasis, coeffs: &[f64]) -> ScalarRatios {
    let grid = basis.to_grid_block(coeffs).expect("shape checked");
    let mut s4 = 0.0;
    let mut s6 = 0.0;
    for &v in &grid {
        let v2 = v * v;
        s4 += v2 * v2;
        s6 += v2 * v2 * v2;
    }
    ScalarRatios {
        l4_pow4: basis.cell() * s4,
        l6_pow6: basis.cell() * s6,
        l2_sq: coeffs.iter().map(|c| c * c).sum(),
        h1_sq: basis.h1_seminorm_sq(coeffs),
    }
}

fn ratio_delta(r: &ScalarRatios) -> f64 {
    r.l4_pow4.sqrt() / r.h1_sq
}

fn ratio_eta(r: &ScalarRatios) -> f64 {
    r.l6_pow6.cbrt() / r.h1_sq
}

fn ratio_cgn(r: &ScalarRatios, n: usize) -> f64 {
    let exp_h1 = n as f64 / 4.0;
    let exp_l2 = 1.0 - exp_h1;
    r.l4_pow4.powf(0.25) / (r.h1_sq.sqrt().powf(exp_h1) * r.l2_sq.sqrt().powf(exp_l2))
}

/// Gradient of `int f^4` with respect to the coefficients: `4 <f^3, e_j>`.
fn grad_l4(basis: &SineBasis, coeffs: &[f64]) -> Vec<f64> {
    let grid = basis.to_grid_block(coeffs).expect("shape checked");
    let cubed: Vec<f64> = grid.iter().map(|v| 4.0 * v * v * v).collect();
    basis.to_modes_block(&cubed).expect("shape checked")
}

fn grad_l6(basis: &SineBasis, coeffs: &[f64]) -> Vec<f64> {
    let grid = basis.to_grid_block(coeffs).expect("shape checked");
    let p5: Vec<f64> = grid.iter().map(|v| 6.0 * v * v * v * v * v).collect();
    basis.to_modes_block(&p5).expect("shape checked")
}

/// Refines from several starting points and keeps the best result.
fn refine_multi(
    basis: &SineBasis,
    starts: &[&Vec<f64>],
    objective: &dyn Fn(&SineBasis, &[f64]) -> f64,
    gradient: &dyn Fn(&SineBasis, &[f64]) -> Vec<f64>,
    iters: usize,
) -> (f64, Vec<f64>) {
    starts
        .iter()
        .map(|s| refine(basis, s, objective, gradient, iters))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least one start")
}

/// Maximizes a scale-invariant log-ratio by normalized gradient ascent with
/// backtracking. `objective` and `gradient` act on normalized coefficients.
fn refine(
    basis: &SineBasis,
    start: &[f64],
    objective: &dyn Fn(&SineBasis, &[f64]) -> f64,
    gradient: &dyn Fn(&SineBasis, &[f64]) -> Vec<f64>,
    iters: usize,
) -> (f64, Vec<f64>) {
    let mut c = start.to_vec();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in c.iter_mut() {
        *x /= norm;
    }
    let mut best = objective(basis, &c);
    let mut step = 0.1;
    for _ in 0..iters {
        let g = gradient(basis, &c);
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < 1e-14 || step < 1e-13 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = c
                .iter()
                .zip(&g)
                .map(|(x, gx)| x + step * gx / gnorm)
                .collect();
            let tn = trial.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in trial.iter_mut() {
                *x /= tn;
            }
            let val = objective(basis, &trial);
            if val > best {
                best = val;
                c = trial;
                improved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (best, c)
}

/// Estimates the smallest valid embedding constants over the Galerkin
/// subspace by random sampling plus local gradient refinement of the
/// Rayleigh-type ratios.
pub fn embedding_constants(
    basis: &SineBasis,
    sample_budget: usize,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    if sample_budget < 1000 {
        return Err(Error::InvalidArgument {
            what: "embedding_constants",
            message: format!("sample budget must be >= 1000, got {sample_budget}"),
        });
    }
    let n = basis.dim();
    let m_tot = basis.m_tot();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // The ground mode is always a candidate start: the optimal profiles are
    // low-mode bumps, so this keeps the estimates stable across bases.
    let mut ground = vec![0.0; m_tot];
    ground[0] = 1.0;
    let mut best_delta = (f64::NEG_INFINITY, ground.clone());
    let mut best_eta = (f64::NEG_INFINITY, ground.clone());
    let mut best_cgn = (f64::NEG_INFINITY, ground.clone());
    for _ in 0..sample_budget {
        let coeffs: Vec<f64> = (0..m_tot)
            .map(|j| rng.gen_range(-1.0..1.0) / ((j + 1) as f64))
            .collect();
        let r = scalar_ratios(basis, &coeffs);
        if r.h1_sq == 0.0 || r.l2_sq == 0.0 {
            continue;
        }
        let vd = ratio_delta(&r);
        if vd > best_delta.0 {
            best_delta = (vd, coeffs.clone());
        }
        let ve = ratio_eta(&r);
        if ve > best_eta.0 {
            best_eta = (ve, coeffs.clone());
        }
        let vc = ratio_cgn(&r, n);
        if vc > best_cgn.0 {
            best_cgn = (vc, coeffs);
        }
    }

    // Local refinement. The ratios are scale invariant, so the ascent is run
    // on L2-normalized coefficients for conditioning.
    let obj_delta = |b: &SineBasis, c: &[f64]| ratio_delta(&scalar_ratios(b, c));
    let grad_delta = |b: &SineBasis, c: &[f64]| {
        // d/dc [ sqrt(Q4) / G ] with Q4 = int f^4, G = ||grad f||^2.
        let r = scalar_ratios(b, c);
        let gq = grad_l4(b, c);
        let q4 = r.l4_pow4;
        let g = r.h1_sq;
        c.iter()
            .zip(b.eigenvalues())
            .zip(&gq)
            .map(|((ci, li), gqi)| {
                gqi / (2.0 * q4.sqrt() * g) - q4.sqrt() / (g * g) * 2.0 * li * ci
            })
            .collect()
    };
    let (delta, delta_max) = refine_multi(
        basis,
        &[&ground, &best_delta.1],
        &obj_delta,
        &grad_delta,
        300,
    );

    let obj_eta = |b: &SineBasis, c: &[f64]| ratio_eta(&scalar_ratios(b, c));
    let grad_eta = |b: &SineBasis, c: &[f64]| {
        let r = scalar_ratios(b, c);
        let gq = grad_l6(b, c);
        let q6 = r.l6_pow6;
        let g = r.h1_sq;
        let dq = q6.powf(-2.0 / 3.0) / 3.0;
        c.iter()
            .zip(b.eigenvalues())
            .zip(&gq)
            .map(|((ci, li), gqi)| dq * gqi / g - q6.cbrt() / (g * g) * 2.0 * li * ci)
            .collect()
    };
    let (eta, eta_max) = refine_multi(basis, &[&ground, &best_eta.1], &obj_eta, &grad_eta, 300);

    let obj_cgn = move |b: &SineBasis, c: &[f64]| ratio_cgn(&scalar_ratios(b, c), n);
    let grad_cgn = move |b: &SineBasis, c: &[f64]| {
        // Gradient of log R = (1/4) ln Q4 - (n/8) ln G - (1-n/4)/2 ln M2.
        let r = scalar_ratios(b, c);
        let gq = grad_l4(b, c);
        let val = ratio_cgn(&r, n);
        let wq = 0.25 / r.l4_pow4;
        let wg = n as f64 / 8.0 / r.h1_sq;
        let wm = (1.0 - n as f64 / 4.0) / 2.0 / r.l2_sq;
        c.iter()
            .zip(b.eigenvalues())
            .zip(&gq)
            .map(|((ci, li), gqi)| val * (wq * gqi - wg * 2.0 * li * ci - wm * 2.0 * ci))
            .collect()
    };
    let (c_gn, cgn_max) = refine_multi(basis, &[&ground, &best_cgn.1], &obj_cgn, &grad_cgn, 300);

    Ok(EmbeddingEstimate {
        delta,
        eta,
        c_gn,
        sample_budget,
        seed,
        delta_maximizer: delta_max,
        eta_maximizer: eta_max,
        c_gn_maximizer: cgn_max,
    })
}
