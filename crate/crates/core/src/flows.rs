//! The linear heat flow, the nonlinear heat flow, the forced Burgers flow and
//! their sinks.
//!
//! The linear heat flow is evaluated spectrally and serves as the exact
//! propagator for the other two: the nonlinear flow on unit-mass states is the
//! heat flow divided by its mean, and the Burgers flow is its Cole-Hopf image.
//! [`burgers_fd_oracle`] is the only time-marching code; it exists to
//! cross-check the conjugated flows against a direct discretization.

use serde::Serialize;

use crate::cole_hopf::{cole, cole_field, hopf, StateClass};
use crate::error::{KblError, Result};
use crate::grid::{derivative, inner, l2_norm, ScalarField};
use crate::spectral::{Potential, SpectralBasis};

/// Relative L² tail the retained modes may miss in an initial heat state.
pub const RESOLUTION_TOL: f64 = 1e-6;

/// Threshold on `(g̃ - 1)/g̃` at which the nonlinear heat flow is declared
/// blown up.
pub const BLOWUP_LEVEL: f64 = 1.0 - 1e-10;

/// Bisection tolerance on the blow-up time.
pub const BLOWUP_TIME_TOL: f64 = 1e-8;

/// Sampled orbit of a flow.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ScalarField>,
    /// `g(t)` for the linear flow, `g̃(t)` for the nonlinear one.
    pub means: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, t: f64, state: ScalarField, mean: f64) {
        self.times.push(t);
        self.states.push(state);
        self.means.push(mean);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    pub blew_up: bool,
    /// Blow-up time, or the horizon when no blow-up happened.
    pub t_star: f64,
    /// `(t, g̃(t))` at the sampled times before `t_star`.
    pub g_trace: Vec<(f64, f64)>,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(KblError::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Spectral coefficients of a heat state, checked for resolution once and
/// evaluated at any number of times.
#[derive(Debug, Clone)]
pub struct HeatOrbit<'a> {
    basis: &'a SpectralBasis,
    coeffs: Vec<f64>,
}

impl<'a> HeatOrbit<'a> {
    pub fn new(basis: &'a SpectralBasis, v0: &ScalarField) -> Result<Self> {
        let coeffs = basis.coefficients(v0)?;
        let tail = l2_norm(&v0.sub(&basis.synthesize(&coeffs))?);
        let scale = l2_norm(v0);
        if tail > RESOLUTION_TOL * scale {
            return Err(KblError::Resolution(format!(
                "{} modes leave an L2 tail of {tail:.3e} (limit {:.3e}); \
                 use more modes or a state compatible with Neumann ends",
                basis.count(),
                RESOLUTION_TOL * scale
            )));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &'a SpectralBasis {
        self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `e^{-(μ_n - μ_0) t} c_n`.
    fn relative_weights(&self, t: f64) -> Vec<f64> {
        let mu0 = self.basis.mu()[0];
        self.coeffs
            .iter()
            .zip(self.basis.mu())
            .map(|(c, mu)| (-(mu - mu0) * t).exp() * c)
            .collect()
    }

    /// `v(t) = Σ e^{-μ_n t} c_n e_n`.
    pub fn state(&self, t: f64) -> ScalarField {
        let w: Vec<f64> = self
            .coeffs
            .iter()
            .zip(self.basis.mu())
            .map(|(c, mu)| (-mu * t).exp() * c)
            .collect();
        self.basis.synthesize(&w)
    }

    /// `e^{μ_0 t} v(t)`; same shape as [`Self::state`] without underflow.
    pub fn scaled_state(&self, t: f64) -> ScalarField {
        self.basis.synthesize(&self.relative_weights(t))
    }

    /// `g(t) = Σ c_n e^{-μ_n t} ∫e_n`.
    pub fn mean(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.mu())
            .zip(self.basis.one_coeffs())
            .map(|((c, mu), i)| c * (-mu * t).exp() * i)
            .sum()
    }

    /// `e^{μ_0 t} g(t)`.
    pub fn scaled_mean(&self, t: f64) -> f64 {
        self.relative_weights(t)
            .iter()
            .zip(self.basis.one_coeffs())
            .map(|(w, i)| w * i)
            .sum()
    }

    /// `v(t) / g(t)`, the nonlinear heat flow of a unit-mass state.
    pub fn normalized(&self, t: f64) -> Result<ScalarField> {
        let w = self.relative_weights(t);
        let g: f64 = w.iter().zip(self.basis.one_coeffs()).map(|(w, i)| w * i).sum();
        if !(g > 0.0) {
            return Err(KblError::Numerical(format!(
                "heat mean {g} is not positive; the state is under-resolved"
            )));
        }
        Ok(self.basis.synthesize(&w).scale(1.0 / g))
    }

    /// `w(t) = ∫ V v(t) / ∫ v(t)`, the growth rate entering the mean equation
    /// of the nonlinear flow.
    pub fn potential_average(&self, t: f64) -> f64 {
        let w = self.relative_weights(t);
        let num: f64 = w.iter().zip(self.basis.v_int()).map(|(w, v)| w * v).sum();
        let den: f64 = w.iter().zip(self.basis.one_coeffs()).map(|(w, i)| w * i).sum();
        num / den
    }
}

/// Linear heat flow `Φ_H^t(v0)`.
pub fn heat_flow(basis: &SpectralBasis, v0: &StateClass, t: f64) -> Result<ScalarField> {
    check_time(t)?;
    Ok(HeatOrbit::new(basis, v0.field())?.state(t))
}

/// `g(t) = ∫ Φ_H^t(v0)`.
pub fn heat_mean(basis: &SpectralBasis, v0: &StateClass, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(HeatOrbit::new(basis, v0.field())?.mean(t))
}

/// Nonlinear heat flow `Φ_N^t` on unit-mass states.
pub fn nonlinear_heat_flow(basis: &SpectralBasis, v0: &StateClass, t: f64) -> Result<StateClass> {
    check_time(t)?;
    let orbit = HeatOrbit::new(basis, v0.field())?;
    p_one_or_numerical(orbit.normalized(t)?)
}

fn p_one_or_numerical(field: ScalarField) -> Result<StateClass> {
    StateClass::p_one(field).map_err(|e| KblError::Numerical(format!("evolved state left P1: {e}")))
}

/// Nonlinear heat flow on positive states of any mass.
///
/// With `z̃ = ṽ/g̃` evolving as the unit-mass flow, the mean satisfies
/// `(g̃-1)/g̃ = ((g̃₀-1)/g̃₀) exp(∫₀ᵗ w)` with `w = ∫V z̃`. The time integral is
/// computed by adaptive Simpson, and blow-up (`g̃₀ > 1` only) is the root of
/// the monotone exponent, bracketed by bisection.
pub fn nonlinear_heat_general(
    basis: &SpectralBasis,
    v0: &StateClass,
    times: &[f64],
    horizon: f64,
) -> Result<(Trajectory, BlowupReport)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(KblError::Domain(format!("horizon must be positive, got {horizon}")));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(KblError::Domain("time mesh must be strictly increasing".into()));
        }
    }
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
        return Err(KblError::Domain(format!("time {t} outside [0, {horizon}]")));
    }
    let g0 = v0.mass();
    let z0 = StateClass::p_one(v0.field().scale(1.0 / g0))?;
    let orbit = HeatOrbit::new(basis, z0.field())?;
    let y0 = (g0 - 1.0) / g0;
    let exponent = |t: f64| adaptive_simpson(&|s| orbit.potential_average(s), 0.0, t, 1e-12);

    let (blew_up, t_star) = if y0 > 0.0 {
        let target = (BLOWUP_LEVEL / y0).ln();
        if exponent(horizon) < target {
            (false, horizon)
        } else {
            let (mut lo, mut hi) = (0.0, horizon);
            while hi - lo > BLOWUP_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                if exponent(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (true, 0.5 * (lo + hi))
        }
    } else {
        (false, horizon)
    };

    let mut traj = Trajectory::default();
    let mut g_trace = Vec::new();
    for &t in times {
        if blew_up && t >= t_star {
            break;
        }
        let g = 1.0 / (1.0 - y0 * exponent(t).exp());
        let z = orbit.normalized(t)?;
        traj.push(t, z.scale(g), g);
        g_trace.push((t, g));
    }
    Ok((
        traj,
        BlowupReport {
            blew_up,
            t_star,
            g_trace,
        },
    ))
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Burgers orbit obtained by conjugating the heat flow of `H(u0)`.
#[derive(Debug, Clone)]
pub struct BurgersOrbit<'a> {
    heat: HeatOrbit<'a>,
    v0: StateClass,
}

impl<'a> BurgersOrbit<'a> {
    pub fn new(basis: &'a SpectralBasis, u0: &ScalarField) -> Result<Self> {
        let v0 = hopf(u0)?;
        let heat = HeatOrbit::new(basis, v0.field())?;
        Ok(Self { heat, v0 })
    }

    /// `H(u0)`.
    pub fn heat_initial(&self) -> &StateClass {
        &self.v0
    }

    pub fn heat(&self) -> &HeatOrbit<'a> {
        &self.heat
    }

    pub fn state(&self, t: f64) -> Result<ScalarField> {
        check_time(t)?;
        cole_field(&self.heat.scaled_state(t))
            .map_err(|e| KblError::Numerical(format!("heat state lost positivity: {e}")))
    }
}

/// Forced Burgers flow `Φ_B^t(u0) = C(Φ_H^t(H(u0)))`.
pub fn burgers_flow(basis: &SpectralBasis, u0: &ScalarField, t: f64) -> Result<ScalarField> {
    BurgersOrbit::new(basis, u0)?.state(t)
}

/// Unique steady state of the nonlinear heat flow on P1: `e_0 / ∫e_0`.
pub fn sink_heat(basis: &SpectralBasis) -> Result<StateClass> {
    StateClass::normalized(basis.mode(0).clone())
}

/// Unique steady state of the Burgers flow: `-2 e_0' / e_0`.
pub fn sink_burgers(basis: &SpectralBasis) -> Result<ScalarField> {
    cole(&StateClass::p_plus(basis.mode(0).clone())?)
}

/// Residual of the steady nonlinear heat equation
/// `s'' - V s + (∫ V s) s` at a state, using the discrete Neumann operator.
pub fn steady_residual(basis: &SpectralBasis, s: &StateClass) -> Result<f64> {
    let op = crate::spectral::assemble_operator(basis.potential(), basis.grid())?;
    let a_s = op.apply(s.field())?;
    let vs = inner(basis.potential().field(), s.field())?;
    let mut r = s.field().scale(vs);
    r.axpy(-1.0, &a_s)?;
    Ok(l2_norm(&r))
}

/// Sup-norm growth that the direct Burgers stepper treats as instability.
pub const FD_BLOWUP: f64 = 1e6;

/// Crank-Nicolson diffusion with Heun-corrected explicit advection and forcing
/// for `∂ₜu + u∂ₓu = ∂²ₓₓu + 2∂ₓV`, `u(0) = u(1) = 0`.
#[derive(Debug, Clone)]
pub struct FdBurgers {
    u: Vec<f64>,
    forcing: Vec<f64>,
    h: f64,
    time: f64,
    dt: f64,
    // Thomas factors of (I - dt/2 L) on the interior
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    grid: crate::grid::Grid,
}

impl FdBurgers {
    pub fn new(potential: &Potential, u0: &ScalarField, dt: f64) -> Result<Self> {
        let grid = u0.grid();
        if potential.grid() != grid {
            return Err(KblError::GridMismatch {
                left: grid.n_points(),
                right: potential.grid().n_points(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(KblError::Domain(format!("time step must be positive, got {dt}")));
        }
        let h = grid.spacing();
        let forcing = derivative(potential.field()).scale(2.0).into_values();
        let mut u = u0.values().to_vec();
        let n = u.len();
        u[0] = 0.0;
        u[n - 1] = 0.0;
        let mut s = Self {
            u,
            forcing,
            h,
            time: 0.0,
            dt,
            c_prime: Vec::new(),
            denom: Vec::new(),
            grid,
        };
        s.factor(dt);
        Ok(s)
    }

    fn factor(&mut self, dt: f64) {
        let m = self.u.len() - 2;
        let r = dt / (self.h * self.h);
        let (a, b) = (-0.5 * r, 1.0 + r);
        let mut c_prime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        for i in 0..m {
            let d = if i == 0 { b } else { b - a * c_prime[i - 1] };
            denom[i] = d;
            c_prime[i] = a / d;
        }
        self.c_prime = c_prime;
        self.denom = denom;
        self.dt = dt;
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        let a = -0.5 * self.dt / (self.h * self.h);
        rhs[0] /= self.denom[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - a * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }

    /// `-(u²/2)ₓ + 2Vₓ` on interior nodes.
    fn explicit_rhs(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let inv4h = 0.25 / self.h;
        (1..n - 1)
            .map(|i| -(u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) * inv4h + self.forcing[i])
            .collect()
    }

    fn step(&mut self) -> Result<()> {
        let n = self.u.len();
        let r = self.dt / (self.h * self.h);
        let base: Vec<f64> = (1..n - 1)
            .map(|i| self.u[i] + 0.5 * r * (self.u[i + 1] - 2.0 * self.u[i] + self.u[i - 1]))
            .collect();
        let n0 = self.explicit_rhs(&self.u);
        let mut pred: Vec<f64> = base.iter().zip(&n0).map(|(b, f)| b + self.dt * f).collect();
        self.solve(&mut pred);
        let mut star = vec![0.0; n];
        star[1..n - 1].copy_from_slice(&pred);
        let n1 = self.explicit_rhs(&star);
        let mut corr: Vec<f64> = base
            .iter()
            .zip(n0.iter().zip(&n1))
            .map(|(b, (f0, f1))| b + 0.5 * self.dt * (f0 + f1))
            .collect();
        self.solve(&mut corr);
        self.u[1..n - 1].copy_from_slice(&corr);
        let sup = self.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() || sup > FD_BLOWUP {
            return Err(KblError::Numerical(format!(
                "finite-difference Burgers stepper unstable at t = {:.4e} (sup {sup:.3e}); reduce dt",
                self.time
            )));
        }
        self.time += self.dt;
        Ok(())
    }

    /// Advances to time `t` with steps no larger than the configured `dt`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time {
            return Err(KblError::Domain("cannot step backwards in time".into()));
        }
        let span = t - self.time;
        if span == 0.0 {
            return Ok(());
        }
        let max_dt = self.dt;
        let steps = (span / max_dt).ceil().max(1.0) as usize;
        self.factor(span / steps as f64);
        for _ in 0..steps {
            self.step()?;
        }
        self.time = t;
        self.factor(max_dt);
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.u.clone())
    }
}

/// Direct time integration of the forced Burgers equation up to `t`.
pub fn burgers_fd_oracle(potential: &Potential, u0: &ScalarField, t: f64, dt: f64) -> Result<ScalarField> {
    check_time(t)?;
    let mut stepper = FdBurgers::new(potential, u0, dt)?;
    stepper.advance_to(t)?;
    stepper.state()
}
