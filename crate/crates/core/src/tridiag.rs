//! Symmetric tridiagonal eigensolver for the lowest part of the spectrum.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration with a pivoted tridiagonal factorization. Both steps are
//! deterministic, so repeated solves return bit-identical results.

use crate::error::{KblError, Result};

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(KblError::Config(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.dim();
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            if q.abs() < tiny {
                q = if q < 0.0 { -tiny } else { tiny };
            }
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit-norm eigenvector for the eigenvalue `shift`, by inverse iteration.
    /// `previous` vectors with nearby eigenvalues are projected out.
    pub fn eigenvector(&self, shift: f64, previous: &[&[f64]]) -> Result<Vec<f64>> {
        let n = self.dim();
        let lu = ShiftedLu::factor(self, shift);
        // deterministic start vector with content in every mode
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).sin())
            .collect();
        normalize(&mut x);
        for _ in 0..4 {
            let mut y = lu.solve(&x);
            for p in previous {
                let d: f64 = y.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                for (yi, pi) in y.iter_mut().zip(p.iter()) {
                    *yi -= d * pi;
                }
            }
            let nrm = normalize(&mut y);
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(KblError::Numerical(
                    "inverse iteration produced a degenerate vector".into(),
                ));
            }
            x = y;
        }
        Ok(x)
    }

    /// The `count` smallest eigenpairs, ascending.
    pub fn lowest_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if count > self.dim() {
            return Err(KblError::Resolution(format!(
                "requested {count} eigenpairs of a {}x{} matrix",
                self.dim(),
                self.dim()
            )));
        }
        let values: Vec<f64> = (0..count).map(|k| self.eigenvalue(k)).collect();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for (k, &lam) in values.iter().enumerate() {
            let cluster_tol = 1e-3 * lam.abs().max(1.0);
            let near: Vec<&[f64]> = (0..k)
                .filter(|&j| (values[j] - lam).abs() < cluster_tol)
                .map(|j| vectors[j].as_slice())
                .collect();
            vectors.push(self.eigenvector(lam, &near)?);
        }
        Ok((values, vectors))
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
    nrm
}

/// Gaussian elimination with partial pivoting of `T - shift I`.
struct ShiftedLu {
    // row i of U holds u0[i] on the diagonal and u1[i], u2[i] to its right
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, shift: f64) -> Self {
        let n = t.dim();
        let norm = t
            .diag
            .iter()
            .map(|d| (d - shift).abs())
            .chain(t.off.iter().map(|e| e.abs()))
            .fold(0.0_f64, f64::max);
        let tiny = f64::EPSILON * if norm > 0.0 { norm } else { 1.0 };
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];

        // current row being reduced: (a, b, c) at columns (i, i+1, i+2)
        let mut a = t.diag[0] - shift;
        let mut b = if n > 1 { t.off[0] } else { 0.0 };
        let mut c = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < tiny { tiny } else { a };
                break;
            }
            let sub = t.off[i];
            let next_diag = t.diag[i + 1] - shift;
            let next_sup = if i + 2 < n { t.off[i + 1] } else { 0.0 };
            if sub.abs() > a.abs() {
                // swap current row with next row
                swapped[i] = true;
                u0[i] = sub;
                u1[i] = next_diag;
                u2[i] = next_sup;
                let m = a / sub;
                mult[i] = m;
                a = b - m * next_diag;
                b = c - m * next_sup;
                c = 0.0;
            } else {
                let piv = if a.abs() < tiny { tiny } else { a };
                u0[i] = piv;
                u1[i] = b;
                u2[i] = c;
                let m = sub / piv;
                mult[i] = m;
                a = next_diag - m * b;
                b = next_sup - m * c;
                c = 0.0;
            }
        }
        Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}
