//! Koopman spectral elements of the nonlinear heat and Burgers flows, their
//! series decompositions and the certificates that say when those series
//! converge.
//!
//! A multi-index `ν = (q₀; q₁,…,q_m)` labels the product eigenfunctional
//! `ψ_ν = Π c_{qᵢ}/c₀` with rate `λ_ν = Σ (μ_{qᵢ} - μ₀)`. The heat modes
//! `b_ν` are multiples of `e_{q₀}`; the Burgers modes `a_ν` are products of
//! eigenfunction ratios.

mod certificates;
mod series;

pub use certificates::{
    absolute_tail_bound, burgers_certificate, heat_certificate, tau_b, tau_n, tau_tilde_b, tau_tilde_n,
    verify_estimates, ConvergenceProfile, EstimateReport, EstimateRow, SeriesCertificate, SeriesData,
    TailBound, Threshold, SOBOLEV_C1,
};
pub use series::{
    burgers_series, burgers_series_with, heat_series, heat_series_with, SeriesOptions, SummationOrder,
};

use std::fmt;

use serde::Serialize;

use crate::cole_hopf::{hopf, StateClass};
use crate::error::{KblError, Result};
use crate::grid::ScalarField;
use crate::spectral::SpectralBasis;

/// Hard cap on the number of enumerated multi-indices.
pub const MAX_TERMS: u128 = 10_000_000;

/// `ν = (q₀; q₁,…,q_m)`, tail entries `>= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MultiIndex {
    pub q0: usize,
    pub tail: Vec<usize>,
}

impl MultiIndex {
    pub fn new(q0: usize, tail: Vec<usize>) -> Result<Self> {
        if tail.contains(&0) {
            return Err(KblError::Domain(format!(
                "tail entries of a multi-index must be >= 1, got {tail:?}"
            )));
        }
        Ok(Self { q0, tail })
    }

    pub fn single(q0: usize) -> Self {
        Self { q0, tail: Vec::new() }
    }

    /// Order `m` (tail length).
    pub fn m(&self) -> usize {
        self.tail.len()
    }

    /// `q₀, q₁, …, q_m`.
    pub fn entries(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.q0).chain(self.tail.iter().copied())
    }

    pub fn max_entry(&self) -> usize {
        self.entries().max().unwrap_or(0)
    }

    /// Tail written as `q1-q2-…`, empty for `m = 0`.
    pub fn tail_label(&self) -> String {
        self.tail.iter().map(|q| q.to_string()).collect::<Vec<_>>().join("-")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tail.is_empty() {
            write!(f, "({})", self.q0)
        } else {
            let t: Vec<String> = self.tail.iter().map(|q| q.to_string()).collect();
            write!(f, "({};{})", self.q0, t.join(","))
        }
    }
}

/// Which finite part of the infinite decomposition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationSpec {
    /// Highest eigenmode index `Q`.
    pub max_mode: usize,
    /// Highest product order `M`.
    pub max_order: usize,
    /// Terms with `e^{-λ_ν t}` below this are dropped.
    pub lambda_cut: Option<f64>,
}

impl TruncationSpec {
    pub fn new(max_mode: usize, max_order: usize) -> Result<Self> {
        let t = Self {
            max_mode,
            max_order,
            lambda_cut: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_lambda_cut(mut self, cut: f64) -> Result<Self> {
        self.lambda_cut = Some(cut);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_mode < 1 {
            return Err(KblError::Config("truncation needs max_mode >= 1".into()));
        }
        if let Some(c) = self.lambda_cut {
            if !(c > 0.0 && c < 1.0) {
                return Err(KblError::Config(format!("lambda_cut must lie in (0, 1), got {c}")));
            }
        }
        Ok(())
    }

    /// `(Q+1) Σ_{m<=M} Q^m`, saturating.
    pub fn term_count(&self) -> u128 {
        let q = self.max_mode as u128;
        let mut total: u128 = 0;
        let mut pow: u128 = 1;
        for _ in 0..=self.max_order {
            total = total.saturating_add(pow);
            pow = pow.saturating_mul(q);
        }
        total.saturating_mul(q + 1)
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        let n = self.term_count();
        if n > MAX_TERMS {
            return Err(KblError::SizeGuard(n));
        }
        Ok(())
    }

    pub(crate) fn check_basis(&self, basis: &SpectralBasis) -> Result<()> {
        self.validate()?;
        if self.max_mode >= basis.count() {
            return Err(KblError::Config(format!(
                "max_mode {} needs at least {} modes, basis has {}",
                self.max_mode,
                self.max_mode + 1,
                basis.count()
            )));
        }
        self.check_size()
    }
}

/// All multi-indices of a truncation in summation order: `q₀ = 0…Q`, then
/// `m = 0…M`, then tails in lexicographic order over `{1…Q}^m`.
pub fn enumerate(trunc: &TruncationSpec) -> Result<Vec<MultiIndex>> {
    trunc.validate()?;
    trunc.check_size()?;
    let q = trunc.max_mode;
    let mut out = Vec::with_capacity(trunc.term_count() as usize);
    for q0 in 0..=q {
        for m in 0..=trunc.max_order {
            let mut tail = vec![1; m];
            loop {
                out.push(MultiIndex { q0, tail: tail.clone() });
                // odometer increment, last digit fastest
                let mut k = m;
                while k > 0 && tail[k - 1] == q {
                    tail[k - 1] = 1;
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
                tail[k - 1] += 1;
            }
        }
    }
    Ok(out)
}

fn check_index(basis: &SpectralBasis, nu: &MultiIndex) -> Result<()> {
    if nu.max_entry() >= basis.count() {
        return Err(KblError::Domain(format!(
            "multi-index {nu} uses mode {} but the basis has {}",
            nu.max_entry(),
            basis.count()
        )));
    }
    Ok(())
}

/// `λ_ν = Σ_{i=0}^m (μ_{qᵢ} - μ₀)`.
pub fn lambda_of(basis: &SpectralBasis, nu: &MultiIndex) -> Result<f64> {
    check_index(basis, nu)?;
    let mu = basis.mu();
    Ok(nu.entries().map(|q| mu[q] - mu[0]).sum())
}

/// Rate of `σ_ν` under the linear heat flow: `Σ μ_{qᵢ}`.
pub fn sigma_rate(basis: &SpectralBasis, nu: &MultiIndex) -> Result<f64> {
    check_index(basis, nu)?;
    Ok(nu.entries().map(|q| basis.mu()[q]).sum())
}

/// `ψ_ν(v0) = Π c_{qᵢ}(v0) / c₀(v0)`.
pub fn psi(basis: &SpectralBasis, nu: &MultiIndex, v0: &StateClass) -> Result<f64> {
    check_index(basis, nu)?;
    let c0 = basis.coeff(v0.field(), 0)?;
    if !(c0 > 0.0) {
        return Err(KblError::Numerical(format!("c0 = {c0} is not positive")));
    }
    let mut prod = 1.0;
    for q in nu.entries() {
        prod *= basis.coeff(v0.field(), q)? / c0;
    }
    Ok(prod)
}

/// `σ_ν(v0) = Π c_{qᵢ}(v0)`.
pub fn sigma(basis: &SpectralBasis, nu: &MultiIndex, v0: &StateClass) -> Result<f64> {
    check_index(basis, nu)?;
    let mut prod = 1.0;
    for q in nu.entries() {
        prod *= basis.coeff(v0.field(), q)?;
    }
    Ok(prod)
}

/// `φ_ν(u0) = ψ_ν(H(u0))`.
pub fn phi(basis: &SpectralBasis, nu: &MultiIndex, u0: &ScalarField) -> Result<f64> {
    psi(basis, nu, &hopf(u0)?)
}

/// Scalar factor of `b_ν` in front of `e_{q₀}`: `(-1)^m Π p_{qᵢ} / ∫e₀`.
pub fn mode_b_scale(basis: &SpectralBasis, nu: &MultiIndex) -> Result<f64> {
    check_index(basis, nu)?;
    let p = basis.p();
    let sign = if nu.m() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * nu.tail.iter().map(|&q| p[q]).product::<f64>() / basis.i0())
}

/// Heat Koopman mode `b_ν = (-1)^m (Π p_{qᵢ}) e_{q₀} / ∫e₀`.
pub fn mode_b(basis: &SpectralBasis, nu: &MultiIndex) -> Result<ScalarField> {
    Ok(basis.mode(nu.q0).scale(mode_b_scale(basis, nu)?))
}

/// Burgers Koopman mode `a_ν = 2(-1)^{m+1} (∂ₓe_{q₀}/e₀) Π e_{qᵢ}/e₀`.
pub fn mode_a(basis: &SpectralBasis, nu: &MultiIndex) -> Result<ScalarField> {
    check_index(basis, nu)?;
    let e0 = basis.mode(0).values();
    let sign = if nu.m() % 2 == 0 { -2.0 } else { 2.0 };
    let mut out: Vec<f64> = basis
        .mode_derivative(nu.q0)
        .values()
        .iter()
        .zip(e0)
        .map(|(d, e)| sign * d / e)
        .collect();
    for &q in &nu.tail {
        for ((o, eq), e) in out.iter_mut().zip(basis.mode(q).values()).zip(e0) {
            *o *= eq / e;
        }
    }
    ScalarField::new(basis.grid(), out)
}

/// One term of a decomposition, with its spatial mode materialized.
#[derive(Debug, Clone)]
pub struct KoopmanTerm {
    pub index: MultiIndex,
    pub lambda: f64,
    /// `ψ_ν(ṽ₀)` or `φ_ν(u₀)`.
    pub coefficient: f64,
    /// `b_ν` or `a_ν`.
    pub mode: ScalarField,
}

/// Upper bound on `terms × n_points` for materialized term lists.
pub const MAX_MATERIALIZED: u128 = 50_000_000;

fn check_materialize(basis: &SpectralBasis, trunc: &TruncationSpec) -> Result<()> {
    let n = trunc.term_count().saturating_mul(basis.grid().n_points() as u128);
    if n > MAX_MATERIALIZED {
        return Err(KblError::SizeGuard(trunc.term_count()));
    }
    Ok(())
}

/// Terms `(λ_ν, ψ_ν(v0), b_ν)` of the heat decomposition.
pub fn heat_terms(basis: &SpectralBasis, v0: &StateClass, trunc: &TruncationSpec) -> Result<Vec<KoopmanTerm>> {
    trunc.check_basis(basis)?;
    check_materialize(basis, trunc)?;
    enumerate(trunc)?
        .into_iter()
        .map(|nu| {
            Ok(KoopmanTerm {
                lambda: lambda_of(basis, &nu)?,
                coefficient: psi(basis, &nu, v0)?,
                mode: mode_b(basis, &nu)?,
                index: nu,
            })
        })
        .collect()
}

/// Terms `(λ_ν, φ_ν(u0), a_ν)` of the Burgers decomposition.
pub fn burgers_terms(basis: &SpectralBasis, u0: &ScalarField, trunc: &TruncationSpec) -> Result<Vec<KoopmanTerm>> {
    trunc.check_basis(basis)?;
    check_materialize(basis, trunc)?;
    let v0 = hopf(u0)?;
    enumerate(trunc)?
        .into_iter()
        .map(|nu| {
            Ok(KoopmanTerm {
                lambda: lambda_of(basis, &nu)?,
                coefficient: psi(basis, &nu, &v0)?,
                mode: mode_a(basis, &nu)?,
                index: nu,
            })
        })
        .collect()
}

/// Row of an exported decomposition. The mode is `mode_scale` times the
/// pointwise product of the named factor fields.
#[derive(Debug, Clone, Serialize)]
pub struct TermRecord {
    pub q0: usize,
    pub tail: String,
    pub m: usize,
    pub lambda: f64,
    pub coefficient: f64,
    pub mode_scale: f64,
    pub factors: Vec<String>,
}

/// Which decomposition a record list describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Target {
    Heat,
    Burgers,
}

/// Lightweight records for every enumerated term; the coefficient comes
/// from `v0` (heat) or `H(u0)` (Burgers) without materializing modes.
pub fn term_records(
    basis: &SpectralBasis,
    target: Target,
    heat_state: &StateClass,
    trunc: &TruncationSpec,
) -> Result<Vec<TermRecord>> {
    trunc.check_basis(basis)?;
    let c = basis.coefficients(heat_state.field())?;
    let c0 = c[0];
    if !(c0 > 0.0) {
        return Err(KblError::Numerical(format!("c0 = {c0} is not positive")));
    }
    let mu = basis.mu();
    let p = basis.p();
    enumerate(trunc)?
        .into_iter()
        .map(|nu| {
            let lambda: f64 = nu.entries().map(|q| mu[q] - mu[0]).sum();
            let coefficient: f64 = nu.entries().map(|q| c[q] / c0).product();
            let even = nu.m() % 2 == 0;
            let (mode_scale, factors) = match target {
                Target::Heat => {
                    let s: f64 = nu.tail.iter().map(|&q| p[q]).product::<f64>() / basis.i0();
                    (if even { s } else { -s }, vec![format!("e{}", nu.q0)])
                }
                Target::Burgers => {
                    let mut f = vec![format!("de{}_over_e0", nu.q0)];
                    f.extend(nu.tail.iter().map(|q| format!("e{q}_over_e0")));
                    (if even { -2.0 } else { 2.0 }, f)
                }
            };
            Ok(TermRecord {
                q0: nu.q0,
                tail: nu.tail_label(),
                m: nu.m(),
                lambda,
                coefficient,
                mode_scale,
                factors,
            })
        })
        .collect()
}
