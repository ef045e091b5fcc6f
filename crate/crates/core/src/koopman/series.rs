//! Evaluation of the truncated heat and Burgers decompositions.

use rayon::prelude::*;

use super::certificates::{burgers_certificate, heat_certificate, SeriesCertificate};
use super::TruncationSpec;
use crate::cole_hopf::{hopf, StateClass, StateTag};
use crate::error::{KblError, Result};
use crate::grid::ScalarField;
use crate::spectral::SpectralBasis;

/// Order in which the finite set of terms is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SummationOrder {
    /// `q₀` ascending, then `m`, then tails lexicographically.
    #[default]
    Forward,
    /// Exactly the reverse sequence.
    Reversed,
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    pub trunc: TruncationSpec,
    pub order: SummationOrder,
    /// Evaluate even when `t` is not certified; the failed certificate is
    /// still returned, flagged `unsafe_override`.
    pub allow_uncertified: bool,
}

impl SeriesOptions {
    pub fn new(trunc: TruncationSpec) -> Self {
        Self {
            trunc,
            order: SummationOrder::Forward,
            allow_uncertified: false,
        }
    }
}

fn ordered(n: usize, first: usize, order: SummationOrder) -> Box<dyn Iterator<Item = usize>> {
    match order {
        SummationOrder::Forward => Box::new(first..=n),
        SummationOrder::Reversed => Box::new((first..=n).rev()),
    }
}

fn gate(mut cert: SeriesCertificate, opts: &SeriesOptions) -> Result<SeriesCertificate> {
    if !cert.valid {
        if !opts.allow_uncertified {
            return Err(KblError::CertFail {
                t: cert.t,
                threshold: cert.threshold().value(),
            });
        }
        cert.unsafe_override = true;
    }
    Ok(cert)
}

/// Heat decomposition `Σ e^{-λ_ν t} ψ_ν(ṽ₀) b_ν` of `Φ_N^t(ṽ₀)`.
pub fn heat_series(
    basis: &SpectralBasis,
    v0: &StateClass,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<(ScalarField, SeriesCertificate)> {
    heat_series_with(basis, v0, t, &SeriesOptions::new(*trunc))
}

pub fn heat_series_with(
    basis: &SpectralBasis,
    v0: &StateClass,
    t: f64,
    opts: &SeriesOptions,
) -> Result<(ScalarField, SeriesCertificate)> {
    if v0.tag() != StateTag::POne {
        return Err(KblError::Domain("the heat decomposition needs a unit-mass state".into()));
    }
    let cert = gate(heat_certificate(basis, v0, t, &opts.trunc)?, opts)?;
    let trunc = &opts.trunc;
    let q_max = trunc.max_mode;
    let mu = basis.mu();
    let rate: Vec<f64> = mu[..=q_max].iter().map(|m| m - mu[0]).collect();
    let coeffs = basis.coefficients(v0.field())?;
    let c0 = coeffs[0];
    // signed tail factors e^{-(μ_q-μ₀)t} (c_q/c₀) p_q
    let factor: Vec<f64> = (0..=q_max)
        .map(|q| (-rate[q] * t).exp() * coeffs[q] / c0 * basis.p()[q])
        .collect();
    let walker = Walker {
        rate: &rate,
        q_max,
        t,
        cut: trunc.lambda_cut,
        order: opts.order,
    };

    let mut out = ScalarField::zeros(basis.grid());
    for q0 in ordered(q_max, 0, opts.order) {
        let mut block = 0.0;
        for m in ordered(trunc.max_order, 0, opts.order) {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            walker.scalar(0, m, rate[q0], sign, &factor, &mut block);
        }
        let lead = (-rate[q0] * t).exp() * coeffs[q0] / c0 / basis.i0();
        out.axpy(lead * block, basis.mode(q0))?;
    }
    Ok((out, cert))
}

/// Burgers decomposition `Σ e^{-λ_ν t} φ_ν(u₀) a_ν` of `Φ_B^t(u₀)`.
pub fn burgers_series(
    basis: &SpectralBasis,
    u0: &ScalarField,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<(ScalarField, SeriesCertificate)> {
    burgers_series_with(basis, u0, t, &SeriesOptions::new(*trunc))
}

pub fn burgers_series_with(
    basis: &SpectralBasis,
    u0: &ScalarField,
    t: f64,
    opts: &SeriesOptions,
) -> Result<(ScalarField, SeriesCertificate)> {
    let cert = gate(burgers_certificate(basis, u0, t, &opts.trunc)?, opts)?;
    let trunc = &opts.trunc;
    let q_max = trunc.max_mode;
    let v0 = hopf(u0)?;
    let mu = basis.mu();
    let rate: Vec<f64> = mu[..=q_max].iter().map(|m| m - mu[0]).collect();
    let coeffs = basis.coefficients(v0.field())?;
    let c0 = coeffs[0];
    let e0 = basis.mode(0).values();
    let weight = |q: usize| (-rate[q] * t).exp() * coeffs[q] / c0;
    // e^{-(μ_q-μ₀)t} (c_q/c₀) e_q/e₀ for the tail, 2 e^{..} (c/c₀) ∂ₓe/e₀ for the head
    let ratio: Vec<Vec<f64>> = (0..=q_max)
        .map(|q| {
            let w = weight(q);
            basis.mode(q).values().iter().zip(e0).map(|(e, z)| w * e / z).collect()
        })
        .collect();
    let head: Vec<Vec<f64>> = (0..=q_max)
        .map(|q| {
            let w = 2.0 * weight(q);
            basis.mode_derivative(q).values().iter().zip(e0).map(|(d, z)| w * d / z).collect()
        })
        .collect();
    let walker = Walker {
        rate: &rate,
        q_max,
        t,
        cut: trunc.lambda_cut,
        order: opts.order,
    };
    let n = e0.len();
    let blocks: Vec<Vec<f64>> = (0..=q_max)
        .into_par_iter()
        .map(|q0| {
            let mut acc = vec![0.0; n];
            let mut stack = vec![vec![0.0; n]; trunc.max_order + 1];
            for m in ordered(trunc.max_order, 0, opts.order) {
                stack[0].copy_from_slice(&head[q0]);
                let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
                walker.field(0, m, rate[q0], sign, &ratio, &mut stack, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for q0 in ordered(q_max, 0, opts.order) {
        for (o, b) in out.iter_mut().zip(&blocks[q0]) {
            *o += b;
        }
    }
    Ok((ScalarField::new(basis.grid(), out)?, cert))
}

/// Depth-first traversal of the tails `(q₁,…,q_m)` of one `(q₀, m)` block in
/// lexicographic (or reversed) order, pruning subtrees whose accumulated
/// `e^{-λt}` has fallen below the cut.
struct Walker<'a> {
    rate: &'a [f64],
    q_max: usize,
    t: f64,
    cut: Option<f64>,
    order: SummationOrder,
}

impl Walker<'_> {
    fn pruned(&self, lam: f64) -> bool {
        matches!(self.cut, Some(c) if (-lam * self.t).exp() < c)
    }

    fn scalar(&self, depth: usize, m: usize, lam: f64, prefix: f64, factor: &[f64], acc: &mut f64) {
        if self.pruned(lam) {
            return;
        }
        if depth == m {
            *acc += prefix;
            return;
        }
        for q in ordered(self.q_max, 1, self.order) {
            self.scalar(depth + 1, m, lam + self.rate[q], prefix * factor[q], factor, acc);
        }
    }

    /// `stack[0]` holds the running product; deeper slots are scratch.
    #[allow(clippy::too_many_arguments)]
    fn field(
        &self,
        depth: usize,
        m: usize,
        lam: f64,
        sign: f64,
        ratio: &[Vec<f64>],
        stack: &mut [Vec<f64>],
        acc: &mut [f64],
    ) {
        if self.pruned(lam) {
            return;
        }
        if depth == m {
            for (a, p) in acc.iter_mut().zip(&stack[0]) {
                *a += sign * p;
            }
            return;
        }
        let (cur, rest) = stack.split_at_mut(1);
        for q in ordered(self.q_max, 1, self.order) {
            for ((n, p), r) in rest[0].iter_mut().zip(&cur[0]).zip(&ratio[q]) {
                *n = p * r;
            }
            self.field(depth + 1, m, lam + self.rate[q], sign, ratio, rest, acc);
        }
    }
}
