//! Validity thresholds, the h-functions behind them, absolute-convergence tail
//! bounds, and the two asymptotic estimates of the linear heat flow.

use std::f64::consts::{PI, SQRT_2};

use serde::{Serialize, Serializer};

use super::{Target, TruncationSpec};
use crate::cole_hopf::{hopf, StateClass};
use crate::error::{KblError, Result};
use crate::flows::{HeatOrbit, RESOLUTION_TOL};
use crate::grid::{h1_norm, l2_norm, ScalarField};
use crate::spectral::SpectralBasis;

/// Sobolev constant in `sup|f| <= C₁ ‖f‖_{H¹}` on `[0,1]`.
pub const SOBOLEV_C1: f64 = SQRT_2;

/// Deviations from the sink at or below this fraction of the state norm are
/// indistinguishable from zero at the spectral resolution.
const DEGENERATE_REL: f64 = RESOLUTION_TOL;

/// Bisection tolerance for inverted h-functions.
const INVERT_TOL: f64 = 1e-8;

/// A certified lower time limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// The defining logarithm degenerates: valid for every `t >= 0`.
    AlwaysValid,
    At(f64),
}

impl Threshold {
    /// Whether `t` lies strictly beyond the threshold.
    pub fn admits(&self, t: f64) -> bool {
        match *self {
            Threshold::AlwaysValid => true,
            Threshold::At(tau) => t > tau,
        }
    }

    /// Numeric value, `-∞` for [`Threshold::AlwaysValid`].
    pub fn value(&self) -> f64 {
        match *self {
            Threshold::AlwaysValid => f64::NEG_INFINITY,
            Threshold::At(tau) => tau,
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Threshold::AlwaysValid => s.serialize_str("ALWAYS_VALID"),
            Threshold::At(t) if t == f64::INFINITY => s.serialize_str("INFINITY"),
            Threshold::At(t) => s.serialize_f64(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HKind {
    /// `(1+μ)`, from `n = 1`
    H1,
    /// `μ^{-3}`, from `n = 1`
    H2,
    /// `(1+μ)²`, from `n = 0`
    H4,
    /// `(1+√μ)²`, from `n = 1`
    H5,
}

impl HKind {
    fn weight(self, mu: f64) -> f64 {
        match self {
            HKind::H1 => 1.0 + mu,
            HKind::H2 => mu.powi(-3),
            HKind::H4 => (1.0 + mu) * (1.0 + mu),
            HKind::H5 => (1.0 + mu.sqrt()).powi(2),
        }
    }

    fn start(self) -> usize {
        if self == HKind::H4 {
            0
        } else {
            1
        }
    }
}

/// The h-functions of a basis, each a finite sum over the retained modes plus
/// a conservative majorant of the unresolved tail.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceProfile<'a> {
    basis: &'a SpectralBasis,
    c1: f64,
}

impl<'a> ConvergenceProfile<'a> {
    pub fn new(basis: &'a SpectralBasis) -> Self {
        Self {
            basis,
            c1: SOBOLEV_C1,
        }
    }

    pub fn sobolev_c1(&self) -> f64 {
        self.c1
    }

    fn partial_sq(&self, kind: HKind, t: f64, from: usize, to: usize) -> f64 {
        let mu = self.basis.mu();
        (from..to)
            .map(|n| kind.weight(mu[n]) * (-2.0 * (mu[n] - mu[0]) * t).exp())
            .sum()
    }

    /// Majorant of the sum over `n >= K`, using
    /// `μ_n >= μ_{K-1} + ½π²(n-K+1)²`; `+∞` if it does not converge.
    fn tail_sq(&self, kind: HKind, t: f64) -> f64 {
        let mu = self.basis.mu();
        let mu0 = mu[0];
        let top = mu[mu.len() - 1];
        let c = 0.5 * PI * PI;
        // (1+√μ)² <= 2(1+μ) keeps the envelope in closed form
        let (scale, peak) = match kind {
            HKind::H2 => (1.0, f64::NEG_INFINITY),
            HKind::H1 | HKind::H5 if t > 0.0 => (if kind == HKind::H5 { 2.0 } else { 1.0 }, 0.5 / t - 1.0),
            HKind::H4 if t > 0.0 => (1.0, 1.0 / t - 1.0),
            _ => return f64::INFINITY,
        };
        let envelope = |lb: f64| {
            let m = lb.max(peak);
            let w = match kind {
                HKind::H2 => m.powi(-3),
                HKind::H4 => (1.0 + m) * (1.0 + m),
                _ => 1.0 + m,
            };
            scale * w * (-2.0 * (m - mu0) * t).exp()
        };
        let mut sum = 0.0;
        for j in 1..=2_000_000u64 {
            let jf = j as f64;
            let lb = top + c * jf * jf;
            let term = envelope(lb);
            sum += term;
            if lb <= peak {
                continue;
            }
            // past the peak: bound the remainder by a geometric series in the
            // exponential, or by the μ^{-3} power law for H2
            let mut rest = f64::INFINITY;
            if t > 0.0 {
                let r = (-2.0 * c * (2.0 * jf + 1.0) * t).exp();
                if r < 1.0 {
                    rest = term * r / (1.0 - r);
                }
            }
            if kind == HKind::H2 {
                rest = rest.min(1.0 / (c * c * c * 5.0 * jf.powi(5)));
            }
            if rest <= 1e-17 * sum || (sum == 0.0 && rest == 0.0) {
                return sum + rest;
            }
        }
        f64::INFINITY
    }

    fn h(&self, kind: HKind, t: f64) -> f64 {
        let k = self.basis.count();
        (self.partial_sq(kind, t, kind.start(), k) + self.tail_sq(kind, t)).sqrt()
    }

    /// `h₁(t) = C₁ (Σ_{n>=1} (1+μ_n) e^{-2(μ_n-μ₀)t})^{1/2}`.
    pub fn h1(&self, t: f64) -> f64 {
        self.c1 * self.h(HKind::H1, t)
    }

    /// `h₂(t) = (Σ_{q>=1} e^{-2(μ_q-μ₀)t} / μ_q³)^{1/2}`.
    pub fn h2(&self, t: f64) -> f64 {
        self.h(HKind::H2, t)
    }

    /// `h₃(t,u₀) = Σ_{q>=1} e^{-(μ_q-μ₀)t} (1+√μ_q) |c'_q| / m₀²` from the
    /// coefficients of `H(u₀)`; `tail_c` bounds `(Σ_{q>=K} c'_q²)^{1/2}`.
    pub fn h3(&self, t: f64, coeffs: &[f64], tail_c: f64) -> f64 {
        let mu = self.basis.mu();
        let m0sq = self.basis.m0() * self.basis.m0();
        let head: f64 = (1..self.basis.count())
            .map(|q| (-(mu[q] - mu[0]) * t).exp() * (1.0 + mu[q].sqrt()) * coeffs[q].abs())
            .sum();
        let tail = if tail_c == 0.0 { 0.0 } else { tail_c * self.tail_sq(HKind::H5, t).sqrt() };
        (head + tail) / m0sq
    }

    /// `h₄(t) = (Σ_{q>=0} (1+μ_q)² e^{-2(μ_q-μ₀)t})^{1/2}`.
    pub fn h4(&self, t: f64) -> f64 {
        self.h(HKind::H4, t)
    }

    /// `h₅(t) = (Σ_{q>=1} e^{-2(μ_q-μ₀)t} (1+√μ_q)²)^{1/2}`.
    pub fn h5(&self, t: f64) -> f64 {
        self.h(HKind::H5, t)
    }

    fn tail_root(&self, kind: HKind, t: f64) -> f64 {
        self.tail_sq(kind, t).sqrt()
    }

    /// Smallest `t >= 0` (to [`INVERT_TOL`]) with `h(t) < target` for a
    /// decreasing `h`.
    fn invert(h: impl Fn(f64) -> f64, target: f64) -> f64 {
        if h(0.0) < target {
            return 0.0;
        }
        let mut hi = 1e-3;
        while h(hi) >= target {
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        while hi - lo > INVERT_TOL {
            let mid = 0.5 * (lo + hi);
            if h(mid) < target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Spectral data of a positive heat state used by every certificate.
struct HeatState {
    coeffs: Vec<f64>,
    c0: f64,
    dev_l2: f64,
    dev_h1: f64,
    tail_c: f64,
    norm: f64,
}

impl HeatState {
    fn new(basis: &SpectralBasis, v: &ScalarField) -> Result<Self> {
        let coeffs = basis.coefficients(v)?;
        let c0 = coeffs[0];
        if !(c0 > 0.0) {
            return Err(KblError::Numerical(format!("c0 = {c0} is not positive")));
        }
        let dev = basis.ground_deviation(v)?;
        let tail = v.sub(&basis.synthesize(&coeffs))?;
        Ok(Self {
            c0,
            dev_l2: l2_norm(&dev),
            dev_h1: h1_norm(&dev),
            tail_c: l2_norm(&tail),
            norm: l2_norm(v),
            coeffs,
        })
    }

    fn degenerate(&self, deviation: f64) -> bool {
        deviation <= DEGENERATE_REL * self.norm
    }
}

/// `τ_N = log(‖ṽ₀-c₀e₀‖ ‖1-c₀(1)e₀‖ / (c₀ ∫e₀)) / (μ₁-μ₀)`.
pub fn tau_n(basis: &SpectralBasis, v0: &StateClass) -> Result<Threshold> {
    let s = HeatState::new(basis, v0.field())?;
    Ok(tau_n_of(basis, &s))
}

fn omega_n_ratio(basis: &SpectralBasis, s: &HeatState) -> f64 {
    s.dev_l2 * basis.one_deviation() / (s.c0 * basis.i0())
}

fn tau_n_of(basis: &SpectralBasis, s: &HeatState) -> Threshold {
    if s.degenerate(s.dev_l2) || basis.one_deviation() <= DEGENERATE_REL {
        return Threshold::AlwaysValid;
    }
    Threshold::At(omega_n_ratio(basis, s).ln() / basis.gap())
}

/// `τ̃_N = inf{t > 0 : h₂(t) < c₀∫e₀ / (C_V ‖V‖ ‖ṽ₀-c₀e₀‖_{H¹})}`.
pub fn tau_tilde_n(basis: &SpectralBasis, v0: &StateClass) -> Result<Threshold> {
    let s = HeatState::new(basis, v0.field())?;
    Ok(tau_tilde_n_of(basis, &s))
}

fn tau_tilde_n_of(basis: &SpectralBasis, s: &HeatState) -> Threshold {
    if s.degenerate(s.dev_h1) {
        return Threshold::AlwaysValid;
    }
    let target = s.c0 * basis.i0() / (basis.c_v() * basis.potential().l2_norm() * s.dev_h1);
    let prof = ConvergenceProfile::new(basis);
    Threshold::At(ConvergenceProfile::invert(|t| prof.h2(t), target))
}

/// `τ_B = h₁⁻¹(m₀² / ‖H(u₀) - f̃₀‖)`.
pub fn tau_b(basis: &SpectralBasis, u0: &ScalarField) -> Result<Threshold> {
    let v0 = hopf(u0)?;
    let s = HeatState::new(basis, v0.field())?;
    Ok(tau_b_of(basis, v0.field(), &s)?)
}

fn sink_distance(basis: &SpectralBasis, v0: &ScalarField) -> Result<f64> {
    let f0 = basis.mode(0).scale(1.0 / basis.i0());
    Ok(l2_norm(&v0.sub(&f0)?))
}

fn tau_b_of(basis: &SpectralBasis, v0: &ScalarField, s: &HeatState) -> Result<Threshold> {
    let d = sink_distance(basis, v0)?;
    if s.degenerate(d) {
        return Ok(Threshold::AlwaysValid);
    }
    let prof = ConvergenceProfile::new(basis);
    let target = basis.m0() * basis.m0() / d;
    Ok(Threshold::At(ConvergenceProfile::invert(|t| prof.h1(t), target)))
}

/// `τ̃_B` with `h₅(τ̃_B) = m₀² / ‖H(u₀) - c₀e₀‖`.
pub fn tau_tilde_b(basis: &SpectralBasis, u0: &ScalarField) -> Result<Threshold> {
    let v0 = hopf(u0)?;
    let s = HeatState::new(basis, v0.field())?;
    Ok(tau_tilde_b_of(basis, &s))
}

fn tau_tilde_b_of(basis: &SpectralBasis, s: &HeatState) -> Threshold {
    if s.degenerate(s.dev_l2) {
        return Threshold::AlwaysValid;
    }
    let prof = ConvergenceProfile::new(basis);
    let target = basis.m0() * basis.m0() / s.dev_l2;
    Threshold::At(ConvergenceProfile::invert(|t| prof.h5(t), target))
}

/// Everything known about the validity of one series evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesCertificate {
    pub target: Target,
    pub t: f64,
    /// `t` lies beyond the ordered-summation threshold.
    pub valid: bool,
    #[serde(rename = "tau_N", skip_serializing_if = "Option::is_none")]
    pub tau_n: Option<Threshold>,
    #[serde(rename = "tau_tilde_N", skip_serializing_if = "Option::is_none")]
    pub tau_tilde_n: Option<Threshold>,
    #[serde(rename = "tau_B", skip_serializing_if = "Option::is_none")]
    pub tau_b: Option<Threshold>,
    #[serde(rename = "tau_tilde_B", skip_serializing_if = "Option::is_none")]
    pub tau_tilde_b: Option<Threshold>,
    /// Heat: `ṽ₀ ∈ Ω_N`. Burgers: `u₀ ∈ Ω_B(t)`.
    pub in_omega: bool,
    /// Heat: `ṽ₀ ∈ Ω̃_N`. Burgers: `u₀ ∈ Ω̃_B(t)`.
    pub in_omega_tilde: bool,
    /// Heat: `|k̃(t)|`. Burgers: `sup_x |k̃_B(t,x)|`.
    pub k_tilde: f64,
    /// A priori bound on `k_tilde` from the asymptotic estimates.
    pub k_bound: f64,
    /// Heat: `ε(t)`. Burgers: `h₃(t,u₀)`.
    pub eps: f64,
    /// Ratio of the directly summed majorant series.
    pub ratio: f64,
    pub absolutely_convergent: bool,
    /// Majorant of the sup norms of all discarded terms.
    pub tail_bound: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub truncation: TruncationSpec,
    pub terms: u64,
    /// Set when a series was evaluated even though `valid` is false.
    pub unsafe_override: bool,
}

impl SeriesCertificate {
    /// The threshold that decides `valid`.
    pub fn threshold(&self) -> Threshold {
        self.tau_n.or(self.tau_b).unwrap_or(Threshold::AlwaysValid)
    }
}

/// Result of [`absolute_tail_bound`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailBound {
    pub bound: f64,
    pub ratio: f64,
    pub absolutely_convergent: bool,
}

/// Initial data of a decomposition.
#[derive(Debug, Clone, Copy)]
pub enum SeriesData<'a> {
    Heat(&'a StateClass),
    Burgers(&'a ScalarField),
}

/// Per-mode majorants: a term `ν` is bounded by `a[q₀] Π β[qᵢ]`; the `_tail`
/// entries bound the sums over `q >= K`.
struct Majorant {
    a: Vec<f64>,
    beta: Vec<f64>,
    a_tail: f64,
    beta_tail: f64,
}

fn rates(basis: &SpectralBasis) -> Vec<f64> {
    basis.mu().iter().map(|m| m - basis.mu()[0]).collect()
}

fn heat_majorant(basis: &SpectralBasis, s: &HeatState, t: f64) -> Majorant {
    let k = basis.count();
    let r = rates(basis);
    let p = basis.p();
    let i0 = basis.i0();
    let prof = ConvergenceProfile::new(basis);
    let mut a = vec![0.0; k];
    let mut beta = vec![0.0; k];
    a[0] = basis.mode(0).sup_norm() / i0;
    for q in 1..k {
        let w = (-r[q] * t).exp() * (s.coeffs[q] / s.c0).abs();
        a[q] = w * basis.mode(q).sup_norm() / i0;
        beta[q] = w * p[q].abs();
    }
    let rest_v = residual_potential(basis);
    let mu_lb = basis.mu()[k - 1] + 0.5 * PI * PI;
    let (a_tail, beta_tail) = if s.tail_c == 0.0 {
        (0.0, 0.0)
    } else {
        (
            s.tail_c / s.c0 / i0 * prof.tail_root(HKind::H5, t),
            s.tail_c / (s.c0 * i0) * rest_v * (-(mu_lb - basis.mu()[0]) * t).exp() / mu_lb,
        )
    };
    Majorant {
        a,
        beta,
        a_tail,
        beta_tail,
    }
}

/// `(‖V‖² - Σ_{q<K} v_q²)^{1/2}`, the part of `V` beyond the retained modes.
fn residual_potential(basis: &SpectralBasis) -> f64 {
    if basis.potential().is_constant() {
        return 0.0;
    }
    let total = basis.potential().l2_norm().powi(2);
    let kept: f64 = basis.v_int().iter().map(|v| v * v).sum();
    (total - kept).max(0.0).sqrt()
}

fn burgers_majorant(basis: &SpectralBasis, s: &HeatState, t: f64) -> Majorant {
    let k = basis.count();
    let r = rates(basis);
    let e0 = basis.mode(0).values();
    let prof = ConvergenceProfile::new(basis);
    let ratio_sup = |f: &ScalarField| f.values().iter().zip(e0).fold(0.0_f64, |m, (v, e)| m.max((v / e).abs()));
    let mut a = vec![0.0; k];
    let mut beta = vec![0.0; k];
    a[0] = 2.0 * ratio_sup(basis.mode_derivative(0));
    for q in 1..k {
        let w = (-r[q] * t).exp() * (s.coeffs[q] / s.c0).abs();
        a[q] = w * 2.0 * ratio_sup(basis.mode_derivative(q));
        beta[q] = w * ratio_sup(basis.mode(q));
    }
    let m0 = basis.m0();
    let (a_tail, beta_tail) = if s.tail_c == 0.0 {
        (0.0, 0.0)
    } else {
        (
            s.tail_c / s.c0 * 2.0 * basis.c_v() / m0 * prof.tail_root(HKind::H4, t),
            s.tail_c / s.c0 / m0 * prof.tail_root(HKind::H5, t),
        )
    };
    Majorant {
        a,
        beta,
        a_tail,
        beta_tail,
    }
}

/// Majorant of the terms a `lambda_cut` removes from the truncation.
fn pruned_majorant(maj: &Majorant, r: &[f64], trunc: &TruncationSpec, t: f64) -> f64 {
    let cut = match trunc.lambda_cut {
        Some(c) => c,
        None => return 0.0,
    };
    let q_max = trunc.max_mode;
    let b_in: f64 = maj.beta[1..=q_max].iter().sum();
    #[allow(clippy::too_many_arguments)]
    fn walk(maj: &Majorant, r: &[f64], q_max: usize, b_in: f64, cut: f64, t: f64, depth: usize, m: usize, lam: f64, pref: f64) -> f64 {
        if (-lam * t).exp() < cut {
            return pref * b_in.powi((m - depth) as i32);
        }
        if depth == m {
            return 0.0;
        }
        (1..=q_max)
            .map(|q| walk(maj, r, q_max, b_in, cut, t, depth + 1, m, lam + r[q], pref * maj.beta[q]))
            .sum()
    }
    let mut total = 0.0;
    for q0 in 0..=q_max {
        for m in 0..=trunc.max_order {
            total += walk(maj, r, q_max, b_in, cut, t, 0, m, r[q0], maj.a[q0]);
        }
    }
    total
}

/// Sum of the majorants of every term outside the truncation.
fn tail_from_majorant(maj: &Majorant, r: &[f64], trunc: &TruncationSpec, t: f64) -> TailBound {
    let q_max = trunc.max_mode;
    let k = maj.a.len();
    let b_in: f64 = maj.beta[1..=q_max].iter().sum();
    let b_out: f64 = maj.beta[q_max + 1..k].iter().sum::<f64>() + maj.beta_tail;
    let a_in: f64 = maj.a[..=q_max].iter().sum();
    let a_out: f64 = maj.a[q_max + 1..k].iter().sum::<f64>() + maj.a_tail;
    let bf = b_in + b_out;
    if !(bf < 1.0) || !a_out.is_finite() {
        return TailBound {
            bound: f64::INFINITY,
            ratio: bf,
            absolutely_convergent: false,
        };
    }
    let s = 1.0 / (1.0 - bf);
    // Σ_{m<=M} (B_f^m - B_in^m) without cancellation
    let mut diff = 0.0;
    for m in 1..=trunc.max_order {
        let inner: f64 = (0..m).map(|j| bf.powi(j as i32) * b_in.powi((m - 1 - j) as i32)).sum();
        diff += b_out * inner;
    }
    let order_tail = bf.powi(trunc.max_order as i32 + 1) * s;
    let bound = a_out * s + a_in * (order_tail + diff) + pruned_majorant(maj, r, trunc, t);
    TailBound {
        bound,
        ratio: bf,
        absolutely_convergent: true,
    }
}

/// Majorant of the discarded part of a truncated decomposition at time `t`.
pub fn absolute_tail_bound(basis: &SpectralBasis, data: SeriesData<'_>, t: f64, trunc: &TruncationSpec) -> Result<TailBound> {
    trunc.check_basis(basis)?;
    let r = rates(basis);
    let maj = match data {
        SeriesData::Heat(v0) => heat_majorant(basis, &HeatState::new(basis, v0.field())?, t),
        SeriesData::Burgers(u0) => {
            let v0 = hopf(u0)?;
            burgers_majorant(basis, &HeatState::new(basis, v0.field())?, t)
        }
    };
    Ok(tail_from_majorant(&maj, &r, trunc, t))
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(KblError::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Certificate of the heat decomposition of `ṽ₀ ∈ P₁` at time `t`.
pub fn heat_certificate(basis: &SpectralBasis, v0: &StateClass, t: f64, trunc: &TruncationSpec) -> Result<SeriesCertificate> {
    check_t(t)?;
    trunc.check_basis(basis)?;
    let s = HeatState::new(basis, v0.field())?;
    let r = rates(basis);
    let prof = ConvergenceProfile::new(basis);
    let i0 = basis.i0();
    let tau = tau_n_of(basis, &s);
    let tau_tilde = tau_tilde_n_of(basis, &s);

    let k_tilde: f64 = (1..basis.count())
        .map(|q| (-r[q] * t).exp() * s.coeffs[q] / s.c0 * basis.p()[q])
        .sum::<f64>()
        .abs();
    let k_bound = (-basis.gap() * t).exp() * omega_n_ratio(basis, &s);

    // ε(t) before the Cauchy-Schwarz step that introduces ‖V‖ h₂(t)
    let rho = basis.c_v() * s.dev_h1 / s.c0 / i0;
    let head: f64 = (1..basis.count())
        .map(|q| {
            let mu = basis.mu()[q];
            (-r[q] * t).exp() * basis.v_int()[q].abs() / mu.powf(1.5)
        })
        .sum();
    let eps = rho * (head + residual_potential(basis) * prof.tail_root(HKind::H2, t));

    let omega_tilde_limit = s.c0 * i0
        / (basis.c_v() * basis.potential().l2_norm() * prof.h2(0.0)).max(basis.one_deviation());
    let tail = tail_from_majorant(&heat_majorant(basis, &s, t), &r, trunc, t);
    Ok(SeriesCertificate {
        target: Target::Heat,
        t,
        valid: tau.admits(t),
        tau_n: Some(tau),
        tau_tilde_n: Some(tau_tilde),
        tau_b: None,
        tau_tilde_b: None,
        in_omega: matches!(tau, Threshold::AlwaysValid) || omega_n_ratio(basis, &s) < 1.0,
        in_omega_tilde: s.degenerate(s.dev_h1) || s.dev_h1 < omega_tilde_limit,
        k_tilde,
        k_bound,
        eps,
        ratio: tail.ratio,
        absolutely_convergent: tail.absolutely_convergent,
        tail_bound: tail.bound,
        c1: prof.sobolev_c1(),
        truncation: *trunc,
        terms: trunc.term_count() as u64,
        unsafe_override: false,
    })
}

/// Certificate of the Burgers decomposition of `u₀` at time `t`.
pub fn burgers_certificate(basis: &SpectralBasis, u0: &ScalarField, t: f64, trunc: &TruncationSpec) -> Result<SeriesCertificate> {
    check_t(t)?;
    trunc.check_basis(basis)?;
    let v0 = hopf(u0)?;
    let s = HeatState::new(basis, v0.field())?;
    let r = rates(basis);
    let prof = ConvergenceProfile::new(basis);
    let tau = tau_b_of(basis, v0.field(), &s)?;
    let tau_tilde = tau_tilde_b_of(basis, &s);

    let weights: Vec<f64> = (0..basis.count())
        .map(|q| if q == 0 { 0.0 } else { (-r[q] * t).exp() * s.coeffs[q] / s.c0 })
        .collect();
    let k_field = basis.synthesize(&weights);
    let k_tilde = k_field
        .values()
        .iter()
        .zip(basis.mode(0).values())
        .fold(0.0_f64, |m, (k, e)| m.max((k / e).abs()));
    let k_bound = s.dev_l2 * prof.h1(t) / (s.c0 * basis.m0());
    let eps = prof.h3(t, &s.coeffs, s.tail_c);
    let tail = tail_from_majorant(&burgers_majorant(basis, &s, t), &r, trunc, t);
    Ok(SeriesCertificate {
        target: Target::Burgers,
        t,
        valid: tau.admits(t),
        tau_n: None,
        tau_tilde_n: None,
        tau_b: Some(tau),
        tau_tilde_b: Some(tau_tilde),
        in_omega: tau.admits(t),
        in_omega_tilde: tau_tilde.admits(t),
        k_tilde,
        k_bound,
        eps,
        ratio: tail.ratio,
        absolutely_convergent: tail.absolutely_convergent,
        tail_bound: tail.bound,
        c1: prof.sobolev_c1(),
        truncation: *trunc,
        terms: trunc.term_count() as u64,
        unsafe_override: false,
    })
}

/// Both sides of the two asymptotic estimates of the linear heat flow.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub t: f64,
    /// `|e^{μ₀t} g(t) - c₀ ∫e₀|`
    pub mean_lhs: f64,
    /// `e^{-(μ₁-μ₀)t} ‖v₀-c₀e₀‖ ‖1-c₀(1)e₀‖`
    pub mean_rhs: f64,
    pub mean_margin: f64,
    /// `sup|e^{μ₀t} v(t) - c₀ e₀|`
    pub sup_lhs: f64,
    /// `‖v₀-c₀e₀‖ h₁(t)`
    pub sup_rhs: f64,
    pub sup_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    pub pass: bool,
}

fn margin(lhs: f64, rhs: f64) -> f64 {
    rhs * (1.0 + 1e-4) + 1e-10 - lhs
}

/// Checks the mean and sup-norm estimates at each sampled time.
pub fn verify_estimates(basis: &SpectralBasis, v0: &StateClass, t_samples: &[f64]) -> Result<EstimateReport> {
    let orbit = HeatOrbit::new(basis, v0.field())?;
    let s = HeatState::new(basis, v0.field())?;
    let prof = ConvergenceProfile::new(basis);
    let ground = basis.mode(0).scale(s.c0);
    let one_dev = basis.one_deviation();
    let mut rows = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        check_t(t)?;
        let mean_lhs = (orbit.scaled_mean(t) - s.c0 * basis.i0()).abs();
        let mean_rhs = (-basis.gap() * t).exp() * s.dev_l2 * one_dev;
        let sup_lhs = orbit.scaled_state(t).sup_distance(&ground)?;
        let sup_rhs = s.dev_l2 * prof.h1(t);
        rows.push(EstimateRow {
            t,
            mean_lhs,
            mean_rhs,
            mean_margin: margin(mean_lhs, mean_rhs),
            sup_lhs,
            sup_rhs,
            sup_margin: margin(sup_lhs, sup_rhs),
        });
    }
    let pass = rows.iter().all(|r| r.mean_margin >= 0.0 && r.sup_margin >= 0.0);
    Ok(EstimateReport { rows, pass })
}
