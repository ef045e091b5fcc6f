//! Neumann eigenproblem for `A = -d²/dx² + V` on [0,1].
//!
//! The operator is discretized with the three-point Laplacian and a ghost-node
//! Neumann closure. The ghost closure makes the boundary rows non-symmetric
//! (`2/h² + V`, `-2/h²`); the similarity `W^{1/2} A W^{-1/2}` with trapezoid
//! weights `W = diag(1/2, 1, ..., 1, 1/2)` turns it into a symmetric
//! tridiagonal matrix with off-diagonal `-√2/h²` in the two boundary rows.

use serde::Serialize;

use crate::error::{KblError, Result};
use crate::grid::{derivative, integrate, inner, l2_norm, Grid, ScalarField};
use crate::tridiag::SymTridiagonal;

/// Strictly positive potential samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    field: ScalarField,
    min_value: f64,
    max_value: f64,
}

impl Potential {
    pub fn new(field: ScalarField) -> Result<Self> {
        let min_value = field.min();
        let max_value = field.max();
        if min_value <= 0.0 {
            let i = field
                .values()
                .iter()
                .position(|&v| v <= 0.0)
                .unwrap_or_default();
            return Err(KblError::Domain(format!(
                "potential must be strictly positive; V(x_{i}) = {min_value}"
            )));
        }
        Ok(Self {
            field,
            min_value,
            max_value,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(ScalarField::from_fn(grid, f)?)
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(ScalarField::constant(grid, value))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> Grid {
        self.field.grid()
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    /// Exactly constant on the grid.
    pub fn is_constant(&self) -> bool {
        self.min_value == self.max_value
    }

    /// `C_V = max(1, sup V)`.
    pub fn c_v(&self) -> f64 {
        self.max_value.max(1.0)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.field)
    }
}

/// Discretized `-∂²xx + V` with Neumann closure.
#[derive(Debug, Clone)]
pub struct NeumannOperator {
    grid: Grid,
    symmetric: SymTridiagonal,
}

impl NeumannOperator {
    /// Symmetrized matrix `W^{1/2} A W^{-1/2}`.
    pub fn symmetric(&self) -> &SymTridiagonal {
        &self.symmetric
    }

    /// Applies the (non-symmetric) ghost-node operator to a grid function.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.grid() != self.grid {
            return Err(KblError::GridMismatch {
                left: self.grid.n_points(),
                right: f.grid().n_points(),
            });
        }
        let y = self.symmetric.matvec(&to_symmetric(f.values()));
        ScalarField::new(self.grid, from_symmetric(&y))
    }
}

fn boundary_scale(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        std::f64::consts::FRAC_1_SQRT_2
    } else {
        1.0
    }
}

/// `y = W^{1/2} u`.
fn to_symmetric(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    u.iter()
        .enumerate()
        .map(|(i, v)| v * boundary_scale(i, n))
        .collect()
}

/// `u = W^{-1/2} y`.
fn from_symmetric(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    y.iter()
        .enumerate()
        .map(|(i, v)| v / boundary_scale(i, n))
        .collect()
}

pub fn assemble_operator(potential: &Potential, grid: Grid) -> Result<NeumannOperator> {
    if potential.grid() != grid {
        return Err(KblError::GridMismatch {
            left: grid.n_points(),
            right: potential.grid().n_points(),
        });
    }
    let n = grid.n_points();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let diag: Vec<f64> = potential
        .field()
        .values()
        .iter()
        .map(|v| 2.0 * inv_h2 + v)
        .collect();
    let mut off = vec![-inv_h2; n - 1];
    off[0] = -std::f64::consts::SQRT_2 * inv_h2;
    off[n - 2] = -std::f64::consts::SQRT_2 * inv_h2;
    Ok(NeumannOperator {
        grid,
        symmetric: SymTridiagonal::new(diag, off)?,
    })
}

/// Lowest Neumann eigenpairs of `-∂²xx + V` and the constants derived from
/// them.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: Grid,
    potential: Potential,
    mu: Vec<f64>,
    modes: Vec<ScalarField>,
    mode_derivatives: Vec<ScalarField>,
    m0: f64,
    i0: f64,
    p: Vec<f64>,
    v_int: Vec<f64>,
    one_coeffs: Vec<f64>,
}

/// Serializable digest of a basis.
#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub n_points: usize,
    pub count: usize,
    pub m0: f64,
    pub i0: f64,
    pub c_v: f64,
    pub v_l2: f64,
    pub mu: Vec<f64>,
    pub p: Vec<f64>,
    pub v_int: Vec<f64>,
    pub one_coeffs: Vec<f64>,
}

/// Diagonalizes the Neumann operator and keeps the `count` lowest modes.
///
/// Modes are normalized to unit Simpson L² norm. Signs: `e_0 > 0`, and
/// `e_n(0) > 0` for `n >= 1` (first clearly nonzero node if `e_n(0)` vanishes).
pub fn solve_eigen(potential: &Potential, grid: Grid, count: usize) -> Result<SpectralBasis> {
    if count < 2 {
        return Err(KblError::Config(format!(
            "at least two modes are needed (spectral gap), got {count}"
        )));
    }
    if count > grid.n_points() / 4 {
        return Err(KblError::Resolution(format!(
            "{count} modes exceed the resolution limit n_points/4 = {}",
            grid.n_points() / 4
        )));
    }
    let op = assemble_operator(potential, grid)?;
    let (mu, vectors) = op.symmetric().lowest_eigenpairs(count)?;

    let mut modes = Vec::with_capacity(count);
    for (n, y) in vectors.iter().enumerate() {
        let raw = ScalarField::new(grid, from_symmetric(y))?;
        let norm = l2_norm(&raw);
        let mut e = raw.scale(1.0 / norm);
        if sign_reference(&e) < 0.0 {
            e = e.scale(-1.0);
        }
        if n == 0 && e.min() <= 0.0 {
            return Err(KblError::Numerical(format!(
                "ground state changes sign (min {}); refine the grid",
                e.min()
            )));
        }
        modes.push(e);
    }
    if mu[1] <= mu[0] {
        return Err(KblError::Numerical(format!(
            "ground eigenvalue is not simple: mu0 = {}, mu1 = {}",
            mu[0], mu[1]
        )));
    }
    Ok(SpectralBasis::from_parts(potential.clone(), mu, modes))
}

fn sign_reference(e: &ScalarField) -> f64 {
    let v = e.values();
    let cutoff = 1e-8 * e.sup_norm();
    v.iter().copied().find(|x| x.abs() > cutoff).unwrap_or(1.0)
}

impl SpectralBasis {
    fn from_parts(potential: Potential, mu: Vec<f64>, modes: Vec<ScalarField>) -> Self {
        let grid = potential.grid();
        let mode_derivatives: Vec<ScalarField> = modes.iter().map(derivative).collect();
        let mut one_coeffs: Vec<f64> = modes.iter().map(integrate).collect();
        let mut v_int: Vec<f64> = modes
            .iter()
            .map(|e| inner(potential.field(), e).expect("same grid"))
            .collect();
        if potential.is_constant() {
            // e_0 is constant, so ∫e_q = 0 for q >= 1; Simpson would leave
            // an O(h⁴) residue on the discrete cosines
            for q in 1..modes.len() {
                one_coeffs[q] = 0.0;
                v_int[q] = 0.0;
            }
        }
        let i0 = one_coeffs[0];
        let p = one_coeffs.iter().map(|c| c / i0).collect();
        let m0 = modes[0].min();
        Self {
            grid,
            potential,
            mu,
            modes,
            mode_derivatives,
            m0,
            i0,
            p,
            v_int,
            one_coeffs,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn count(&self) -> usize {
        self.mu.len()
    }

    /// Eigenvalues, ascending.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn gap(&self) -> f64 {
        self.mu[1] - self.mu[0]
    }

    pub fn mode(&self, n: usize) -> &ScalarField {
        &self.modes[n]
    }

    pub fn modes(&self) -> &[ScalarField] {
        &self.modes
    }

    /// Finite-difference derivative of `e_n`.
    pub fn mode_derivative(&self, n: usize) -> &ScalarField {
        &self.mode_derivatives[n]
    }

    /// `m0 = min e_0`.
    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// `∫ e_0`.
    pub fn i0(&self) -> f64 {
        self.i0
    }

    /// `p_q = ∫e_q / ∫e_0` (with `p_0 = 1`).
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `v_q = ∫ V e_q`.
    pub fn v_int(&self) -> &[f64] {
        &self.v_int
    }

    pub fn c_v(&self) -> f64 {
        self.potential.c_v()
    }

    /// `c_q(1) = ∫ e_q`.
    pub fn one_coeffs(&self) -> &[f64] {
        &self.one_coeffs
    }

    /// `‖1 - c_0(1) e_0‖_{L²}`.
    pub fn one_deviation(&self) -> f64 {
        let one = ScalarField::constant(self.grid, 1.0);
        let mut d = one;
        d.axpy(-self.one_coeffs[0], &self.modes[0])
            .expect("same grid");
        l2_norm(&d)
    }

    /// `c_n(f) = ∫ e_n f`.
    pub fn coeff(&self, f: &ScalarField, n: usize) -> Result<f64> {
        if n >= self.count() {
            return Err(KblError::Domain(format!(
                "mode index {n} out of range (count {})",
                self.count()
            )));
        }
        inner(&self.modes[n], f)
    }

    /// All retained coefficients of `f`.
    pub fn coefficients(&self, f: &ScalarField) -> Result<Vec<f64>> {
        self.modes.iter().map(|e| inner(e, f)).collect()
    }

    /// `Σ weights[n] e_n`.
    pub fn synthesize(&self, weights: &[f64]) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for (w, e) in weights.iter().zip(&self.modes) {
            if *w != 0.0 {
                out.axpy(*w, e).expect("same grid");
            }
        }
        out
    }

    /// L² norm of the part of `f` the retained modes miss.
    pub fn tail_energy(&self, f: &ScalarField) -> Result<f64> {
        let c = self.coefficients(f)?;
        let r = f.sub(&self.synthesize(&c))?;
        Ok(l2_norm(&r))
    }

    /// `f - c_0(f) e_0`.
    pub fn ground_deviation(&self, f: &ScalarField) -> Result<ScalarField> {
        let c0 = self.coeff(f, 0)?;
        let mut d = f.clone();
        d.axpy(-c0, &self.modes[0])?;
        Ok(d)
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            n_points: self.grid.n_points(),
            count: self.count(),
            m0: self.m0,
            i0: self.i0,
            c_v: self.c_v(),
            v_l2: self.potential.l2_norm(),
            mu: self.mu.clone(),
            p: self.p.clone(),
            v_int: self.v_int.clone(),
            one_coeffs: self.one_coeffs.clone(),
        }
    }

    /// Fault-injection hook: negates `e_n` on `x > 1/2`, which destroys its
    /// eigenfunction property. Used by `verify` to prove the checks can fail.
    #[doc(hidden)]
    pub fn with_corrupted_mode(&self, n: usize) -> Result<Self> {
        if n >= self.count() {
            return Err(KblError::Domain(format!("mode index {n} out of range")));
        }
        let mut modes = self.modes.clone();
        let grid = self.grid;
        let vals: Vec<f64> = modes[n]
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| if grid.node(i) > 0.5 { -v } else { *v })
            .collect();
        modes[n] = ScalarField::new(grid, vals)?;
        Ok(Self::from_parts(self.potential.clone(), self.mu.clone(), modes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norms;
    use std::f64::consts::PI;

    const PI2: f64 = PI * PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn affine_basis(n: usize, k: usize) -> SpectralBasis {
        let g = grid(n);
        let v = Potential::from_fn(g, |x| 10.0 + 5.0 * x).unwrap();
        solve_eigen(&v, g, k).unwrap()
    }

    #[test]
    fn rejects_non_positive_potential() {
        let g = grid(11);
        assert!(matches!(Potential::constant(g, 0.0), Err(KblError::Domain(_))));
        assert!(Potential::from_fn(g, |x| x - 0.5).is_err());
    }

    #[test]
    fn stencil_rows() {
        let g = grid(3);
        let v = Potential::constant(g, 1.0).unwrap();
        let op = assemble_operator(&v, g).unwrap();
        let inv_h2 = 4.0;
        let s = op.symmetric();
        assert_eq!(s.diag, vec![2.0 * inv_h2 + 1.0; 3]);
        let r2 = std::f64::consts::SQRT_2;
        assert!((s.off[0] + r2 * inv_h2).abs() < 1e-14);
        assert!((s.off[1] + r2 * inv_h2).abs() < 1e-14);

        let g = grid(7);
        let v = Potential::constant(g, 1.0).unwrap();
        let op = assemble_operator(&v, g).unwrap();
        let inv_h2 = 36.0;
        assert!((op.symmetric().off[2] + inv_h2).abs() < 1e-12);
        // ghost-node form: boundary row (2/h²+V, -2/h²)
        let e0 = ScalarField::from_fn(g, |x| if x == 0.0 { 1.0 } else { 0.0 }).unwrap();
        let a = op.apply(&e0).unwrap();
        assert!((a.values()[0] - (2.0 * inv_h2 + 1.0)).abs() < 1e-10);
        assert!((a.values()[1] + inv_h2).abs() < 1e-10);
        let e1 = ScalarField::from_fn(g, |x| if (x - 1.0 / 6.0).abs() < 1e-9 { 1.0 } else { 0.0 }).unwrap();
        let a = op.apply(&e1).unwrap();
        assert!((a.values()[0] + 2.0 * inv_h2).abs() < 1e-10);
    }

    #[test]
    fn constant_potential_lowest_eigenvalue() {
        let g = grid(2001);
        let v = Potential::constant(g, PI2).unwrap();
        let op = assemble_operator(&v, g).unwrap();
        let mu0 = op.symmetric().eigenvalue(0);
        assert!((mu0 - PI2).abs() / PI2 < 1e-6);
    }

    #[test]
    fn constant_potential_closed_form() {
        let g = grid(2001);
        let v = Potential::constant(g, PI2).unwrap();
        let b = solve_eigen(&v, g, 11).unwrap();
        for n in 0..11 {
            let exact = PI2 * (1.0 + (n * n) as f64);
            assert!((b.mu()[n] - exact).abs() / b.mu()[n] < 1e-3, "n={n}");
            let cosine = ScalarField::from_fn(g, |x| {
                if n == 0 { 1.0 } else { 2f64.sqrt() * (n as f64 * PI * x).cos() }
            })
            .unwrap();
            assert!(b.mode(n).sup_distance(&cosine).unwrap() < 1e-3, "n={n}");
        }
        assert!((b.m0() - 1.0).abs() < 1e-10);
        assert!((b.i0() - 1.0).abs() < 1e-10);
        assert!(b.p()[1..].iter().all(|p| p.abs() < 1e-10));
        assert!(b.v_int()[1..].iter().all(|p| p.abs() < 1e-9));
        assert!((b.c_v() - PI2).abs() < 1e-12);
        assert!(b.one_deviation() < 1e-10);
    }

    #[test]
    fn orthonormal_positive_ground_state() {
        let b = affine_basis(2001, 40);
        for i in 0..b.count() {
            for j in 0..b.count() {
                let d = inner(b.mode(i), b.mode(j)).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-8, "({i},{j}): {d}");
            }
        }
        assert!(b.mu()[0] < b.mu()[1]);
        assert!(b.m0() > 0.0);
        assert!(b.mode(0).values().iter().all(|&v| v > 0.0));
        for n in 1..b.count() {
            assert!(b.mode(n).values()[0] > 0.0);
        }
    }

    #[test]
    fn residual_and_neumann_ends() {
        let g = grid(2001);
        let v = Potential::from_fn(g, |x| 10.0 + 5.0 * x).unwrap();
        let b = solve_eigen(&v, g, 30).unwrap();
        let op = assemble_operator(&v, g).unwrap();
        let h = g.spacing();
        for n in 0..b.count() {
            let ae = op.apply(b.mode(n)).unwrap();
            let r = ae.sub(&b.mode(n).scale(b.mu()[n])).unwrap();
            assert!(l2_norm(&r) <= 1e-6 * b.mu()[n], "n={n}");
            let d = b.mode_derivative(n).values();
            let bound = 10.0 * (1.0 + b.mu()[n]).powi(2) * h * h;
            assert!(d[0].abs() < bound && d[d.len() - 1].abs() < bound, "n={n}");
        }
    }

    #[test]
    fn analytic_mode_bounds_hold_with_slack() {
        let b = affine_basis(2001, 60);
        let h = b.grid().spacing();
        let slack = 1.0 + 10.0 * h;
        for n in 0..b.count() {
            let mu = b.mu()[n];
            let e = b.mode(n);
            assert!(norms(e).h1 <= (1.0 + mu).sqrt() * slack, "H1 n={n}");
            assert!(e.sup_norm() <= 1.0 + mu.sqrt() * slack, "sup n={n}");
            assert!(b.mode_derivative(n).sup_norm() <= b.c_v() * (1.0 + mu) * slack, "d n={n}");
        }
    }

    #[test]
    fn eigenvalue_growth_and_inverse_sum() {
        let g = grid(2001);
        let v = Potential::constant(g, PI2).unwrap();
        let b = solve_eigen(&v, g, 11).unwrap();
        for n in 0..=10 {
            let mu = b.mu()[n];
            assert!((mu - PI2 * (1.0 + (n * n) as f64)).abs() / mu <= 1e-3);
        }
        let inc: Vec<f64> = b.mu().iter().map(|m| 1.0 / m).collect();
        assert!(inc.windows(2).all(|w| w[1] < w[0]));
        assert!(inc.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn coefficient_examples() {
        let b = affine_basis(1001, 20);
        for n in 0..b.count() {
            let c = b.coeff(b.mode(2), n).unwrap();
            let target = if n == 2 { 1.0 } else { 0.0 };
            assert!((c - target).abs() < 1e-8);
        }
        assert!(matches!(b.coeff(b.mode(0), 20), Err(KblError::Domain(_))));

        let g = grid(1001);
        let v = Potential::constant(g, PI2).unwrap();
        let cb = solve_eigen(&v, g, 8).unwrap();
        let c0 = cb.coeff(&ScalarField::constant(g, 1.0), 0).unwrap();
        assert!((c0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_too_many_modes() {
        let g = grid(41);
        let v = Potential::constant(g, 1.0).unwrap();
        assert!(matches!(solve_eigen(&v, g, 11), Err(KblError::Resolution(_))));
        assert!(solve_eigen(&v, g, 10).is_ok());
    }

    #[test]
    fn deterministic_solve() {
        let a = affine_basis(501, 12);
        let b = affine_basis(501, 12);
        assert_eq!(a.mu(), b.mu());
        for n in 0..12 {
            assert_eq!(a.mode(n), b.mode(n));
        }
    }
}
