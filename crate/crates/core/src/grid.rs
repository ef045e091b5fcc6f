//! Uniform-grid calculus on [0,1].
//!
//! Every field carries the [`Grid`] it was sampled on. Binary operations on
//! fields from different grids fail with [`KblError::GridMismatch`]; nothing is
//! ever resampled.

use serde::{Deserialize, Serialize};

use crate::error::{KblError, Result};

/// Uniform mesh `x_i = i / (n - 1)` on [0,1] with an odd number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
}

impl Grid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(KblError::Config(format!(
                "grid needs at least 3 points, got {n_points}"
            )));
        }
        if n_points % 2 == 0 {
            return Err(KblError::Config(format!(
                "composite Simpson quadrature needs an odd point count, got {n_points}"
            )));
        }
        Ok(Self { n_points })
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_points - 1 {
            1.0
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Composite Simpson weight of node `i`.
    #[inline]
    pub fn simpson_weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i == self.n_points - 1 {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        }
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_points != other.n_points {
            return Err(KblError::GridMismatch {
                left: self.n_points,
                right: other.n_points,
            });
        }
        Ok(())
    }
}

/// Real samples of a function on a [`Grid`]. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(KblError::Config(format!(
                "field has {} samples but grid has {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KblError::Numerical(format!(
                "non-finite sample {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_points()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `f` pointwise. Fails if any output is non-finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Combines two fields on the same grid pointwise.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self += alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm of `self - other`.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Composite Simpson approximation of the integral over [0,1].
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.simpson_weight(i) * v)
        .sum()
}

/// Simpson inner product of two fields on the same grid.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.grid().check_same(&g.grid())?;
    let grid = f.grid();
    Ok(f.values()
        .iter()
        .zip(g.values())
        .enumerate()
        .map(|(i, (a, b))| grid.simpson_weight(i) * a * b)
        .sum())
}

/// Second-order finite-difference derivative: central in the interior,
/// one-sided three-point at both ends.
pub fn derivative(f: &ScalarField) -> ScalarField {
    let v = f.values();
    let n = v.len();
    let inv2h = 0.5 / f.grid().spacing();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2h;
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) * inv2h;
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv2h;
    ScalarField {
        grid: f.grid(),
        values: d,
    }
}

/// Running integral `F(x_i) = ∫_0^{x_i} f`.
///
/// Even nodes use composite Simpson on `[0, x_i]`; odd nodes add a trapezoid
/// on the last, unpaired panel.
pub fn cumulative_integral(f: &ScalarField) -> ScalarField {
    let v = f.values();
    let n = v.len();
    let h = f.grid().spacing();
    let mut out = vec![0.0; n];
    let mut even_acc = 0.0;
    for i in 1..n {
        if i % 2 == 0 {
            even_acc += h / 3.0 * (v[i - 2] + 4.0 * v[i - 1] + v[i]);
            out[i] = even_acc;
        } else {
            out[i] = even_acc + 0.5 * h * (v[i - 1] + v[i]);
        }
    }
    ScalarField {
        grid: f.grid(),
        values: out,
    }
}

/// L², H¹ and sup norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub sup: f64,
}

pub fn norms(f: &ScalarField) -> Norms {
    let l2_sq = integrate_square(f);
    let d = derivative(f);
    let dl2_sq = integrate_square(&d);
    Norms {
        l2: l2_sq.sqrt(),
        h1: (l2_sq + dl2_sq).sqrt(),
        sup: f.sup_norm(),
    }
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    integrate_square(f).sqrt()
}

pub fn h1_norm(f: &ScalarField) -> f64 {
    norms(f).h1
}

fn integrate_square(f: &ScalarField) -> f64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.simpson_weight(i) * v * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn rejects_even_and_tiny_grids() {
        assert!(matches!(Grid::new(2000), Err(KblError::Config(_))));
        assert!(matches!(Grid::new(1), Err(KblError::Config(_))));
        let g = grid(5);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(4), 1.0);
        assert_eq!(g.spacing(), 0.25);
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let g = grid(5);
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0; 4]).is_err());
        let a = ScalarField::zeros(g);
        let b = ScalarField::zeros(grid(7));
        assert!(matches!(a.add(&b), Err(KblError::GridMismatch { .. })));
    }

    #[test]
    fn integrate_examples() {
        let g = grid(2001);
        assert!((integrate(&ScalarField::constant(g, 1.0)) - 1.0).abs() < 1e-14);
        let sq = ScalarField::from_fn(g, |x| x * x).unwrap();
        assert!((integrate(&sq) - 1.0 / 3.0).abs() < 1e-12);
        let cubic = ScalarField::from_fn(grid(3), |x| x * x * x).unwrap();
        assert!((integrate(&cubic) - 0.25).abs() < 1e-15);
        let s = ScalarField::from_fn(g, |x| (PI * x).sin()).unwrap();
        assert!((integrate(&s) - 2.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn simpson_order_on_exponential() {
        let exact = std::f64::consts::E - 1.0;
        let err = |n| {
            let f = ScalarField::from_fn(grid(n), f64::exp).unwrap();
            (integrate(&f) - exact).abs()
        };
        let (e1, e2) = (err(21), err(41));
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order}");
    }

    #[test]
    fn derivative_examples() {
        let g = grid(2001);
        let d = derivative(&ScalarField::constant(g, 3.5));
        assert!(d.sup_norm() < 1e-9);
        let d = derivative(&ScalarField::from_fn(g, |x| x).unwrap());
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let f = ScalarField::from_fn(g, |x| (PI * x).cos()).unwrap();
        let exact = ScalarField::from_fn(g, |x| -PI * (PI * x).sin()).unwrap();
        assert!(derivative(&f).sup_distance(&exact).unwrap() < 1e-5);
    }

    #[test]
    fn norm_examples() {
        let g = grid(2001);
        let n = norms(&ScalarField::constant(g, 1.0));
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert!((n.h1 - 1.0).abs() < 1e-9);
        assert_eq!(n.sup, 1.0);
        let f = ScalarField::from_fn(g, |x| 2f64.sqrt() * (PI * x).cos()).unwrap();
        let n = norms(&f);
        assert!((n.l2 - 1.0).abs() < 1e-10);
        assert!((n.h1 - (1.0 + PI * PI).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn cumulative_matches_closed_forms() {
        let g = grid(201);
        let c = cumulative_integral(&ScalarField::constant(g, 2.0));
        for (i, x) in g.nodes().enumerate() {
            assert!((c.values()[i] - 2.0 * x).abs() < 1e-13);
        }
        let c = cumulative_integral(&ScalarField::from_fn(g, |x| x * x).unwrap());
        // even nodes are Simpson-exact on quadratics
        for i in (0..g.n_points()).step_by(2) {
            let x = g.node(i);
            assert!((c.values()[i] - x * x * x / 3.0).abs() < 1e-14);
        }
        let total = integrate(&ScalarField::from_fn(g, |x| x * x).unwrap());
        assert!((c.values()[g.n_points() - 1] - total).abs() < 1e-15);
    }
}
