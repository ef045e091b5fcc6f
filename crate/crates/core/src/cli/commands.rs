//! The subcommands. Each writes its files through [`Outputs`] and returns
//! `Err` on failure; the caller turns that into the report and exit code.

use serde::Serialize;
use std::f64::consts::PI;
use std::path::Path;

use super::config::{ExperimentConfig, FieldSpec};
use super::output::{Cell, CertificateSummary, Csv, Outputs};
use crate::cole_hopf::{hopf, StateClass, UNIT_MASS_TOL};
use crate::error::{KblError, Result};
use crate::flows::{
    nonlinear_heat_flow, nonlinear_heat_general, sink_burgers, sink_heat, BurgersOrbit, FdBurgers, HeatOrbit,
};
use crate::grid::{integrate, ScalarField};
use crate::invariants::{run_suite, Check, SuiteOptions};
use crate::koopman::{
    burgers_certificate, burgers_series_with, heat_certificate, heat_series_with, term_records, SeriesCertificate,
    SeriesOptions, Target, TermRecord,
};
use crate::spectral::{solve_eigen, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Flow {
    Heat,
    Nheat,
    Burgers,
    BurgersFd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KoopmanTarget {
    Heat,
    Burgers,
}

/// What a command needs besides the output sink.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub base_dir: &'a Path,
    pub out: &'a mut Outputs,
    pub certificates: &'a mut Vec<CertificateSummary>,
}

fn basis(ctx: &Ctx) -> Result<SpectralBasis> {
    let potential = ctx.cfg.potential(ctx.base_dir)?;
    solve_eigen(&potential, ctx.cfg.grid()?, ctx.cfg.modes)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Heat,
    Burgers,
}

/// Resolves the initial condition. Sink perturbations use a cosine for heat
/// states (keeps the Neumann condition) and a sine for velocities (keeps
/// `u = 0` at the ends); heat perturbations are renormalized to unit mass.
fn initial(ctx: &Ctx, basis: &SpectralBasis, role: Role) -> Result<ScalarField> {
    let grid = basis.grid();
    match (&ctx.cfg.initial, role) {
        (FieldSpec::Sink, Role::Heat) => Ok(sink_heat(basis)?.into_field()),
        (FieldSpec::Sink, Role::Burgers) => sink_burgers(basis),
        (FieldSpec::SinkPerturbation { amplitude, mode }, Role::Heat) => {
            let k = *mode as f64;
            let bump = ScalarField::from_fn(grid, |x| amplitude * (k * PI * x).cos())?;
            let raw = sink_heat(basis)?.field().add(&bump)?;
            Ok(StateClass::normalized(raw)
                .map_err(|e| KblError::Config(format!("initial: perturbed sink is not positive ({e})")))?
                .into_field())
        }
        (FieldSpec::SinkPerturbation { amplitude, mode }, Role::Burgers) => {
            let k = *mode as f64;
            let bump = ScalarField::from_fn(grid, |x| amplitude * (k * PI * x).sin())?;
            sink_burgers(basis)?.add(&bump)
        }
        (spec, _) => spec.evaluate(grid, ctx.base_dir, "initial"),
    }
}

fn positive_state(field: ScalarField) -> Result<StateClass> {
    StateClass::p_plus(field).map_err(|e| KblError::Config(format!("initial: {e}")))
}

pub fn cmd_eigen(ctx: &mut Ctx) -> Result<()> {
    let b = basis(ctx)?;
    let mut spectrum = Csv::new(&["n", "mu_n"]);
    for (n, mu) in b.mu().iter().enumerate() {
        spectrum.row(&[Cell::U(n as u64), Cell::F(*mu)]);
    }
    ctx.out.write_csv("spectrum.csv", &spectrum)?;
    ctx.out.write_json("basis.json", &b.summary())?;
    for (n, mode) in b.modes().iter().enumerate() {
        ctx.out.write_csv(&format!("modes/e{n}.csv"), &profile(mode))?;
    }
    Ok(())
}

/// `(x, value)` samples of a static field.
fn profile(f: &ScalarField) -> Csv {
    let mut csv = Csv::new(&["x", "value"]);
    let grid = f.grid();
    for (i, v) in f.values().iter().enumerate() {
        csv.row(&[Cell::F(grid.node(i)), Cell::F(*v)]);
    }
    csv
}

struct Evolution {
    trajectory: Csv,
    means: Csv,
}

impl Evolution {
    fn new(burgers: bool) -> Self {
        let cols: &[&str] = if burgers {
            &["t", "mean", "drift", "sink_distance"]
        } else {
            &["t", "mean", "drift"]
        };
        Self {
            trajectory: Csv::new(&["t", "x", "value"]),
            means: Csv::new(cols),
        }
    }

    fn push(&mut self, t: f64, state: &ScalarField, mean: f64, start: &ScalarField, sink: Option<&ScalarField>) -> Result<()> {
        self.trajectory.field_rows(t, state);
        let drift = state.sup_distance(start)?;
        match sink {
            Some(s) => self.means.row(&[Cell::F(t), Cell::F(mean), Cell::F(drift), Cell::F(state.sup_distance(s)?)]),
            None => self.means.row(&[Cell::F(t), Cell::F(mean), Cell::F(drift)]),
        }
        Ok(())
    }

    fn write(self, out: &mut Outputs) -> Result<()> {
        out.write_csv("trajectory.csv", &self.trajectory)?;
        out.write_csv("means.csv", &self.means)
    }
}

pub fn cmd_evolve(ctx: &mut Ctx, flow: Flow) -> Result<()> {
    let b = basis(ctx)?;
    let times = ctx.cfg.times.clone();
    match flow {
        Flow::Heat => {
            let v0 = positive_state(initial(ctx, &b, Role::Heat)?)?;
            let orbit = HeatOrbit::new(&b, v0.field())?;
            // g(t) Φ_N^t(v0/m) must reproduce Φ_H^t(v0)
            let z0 = StateClass::p_one(v0.field().scale(1.0 / v0.mass()))?;
            let mut ev = Evolution::new(false);
            let mut identity = Csv::new(&["t", "sup_abs_diff"]);
            for &t in &times {
                let v = orbit.state(t);
                let g = orbit.mean(t);
                ev.push(t, &v, g, v0.field(), None)?;
                let vt = nonlinear_heat_flow(&b, &z0, t)?;
                identity.row(&[Cell::F(t), Cell::F(vt.field().scale(g).sup_distance(&v)?)]);
            }
            ev.write(ctx.out)?;
            ctx.out.write_csv("identity.csv", &identity)
        }
        Flow::Nheat => {
            let v0 = positive_state(initial(ctx, &b, Role::Heat)?)?;
            if (v0.mass() - 1.0).abs() <= UNIT_MASS_TOL {
                let v0 = StateClass::p_one(v0.into_field())?;
                let mut ev = Evolution::new(false);
                for &t in &times {
                    let v = nonlinear_heat_flow(&b, &v0, t)?;
                    ev.push(t, v.field(), integrate(v.field()), v0.field(), None)?;
                }
                ev.write(ctx.out)
            } else {
                general_nheat(ctx, &b, &v0)
            }
        }
        Flow::Burgers | Flow::BurgersFd => {
            let u0 = initial(ctx, &b, Role::Burgers)?;
            let s0 = sink_burgers(&b)?;
            let mut ev = Evolution::new(true);
            if flow == Flow::Burgers {
                let orbit = BurgersOrbit::new(&b, &u0)?;
                for &t in &times {
                    let u = orbit.state(t)?;
                    ev.push(t, &u, integrate(&u), &u0, Some(&s0))?;
                }
            } else {
                let mut fd = FdBurgers::new(b.potential(), &u0, ctx.cfg.dt)?;
                for &t in &times {
                    fd.advance_to(t)?;
                    let u = fd.state()?;
                    ev.push(t, &u, integrate(&u), &u0, Some(&s0))?;
                }
            }
            ev.write(ctx.out)
        }
    }
}

/// Trajectory of a state of arbitrary mass; samples at or after a blow-up
/// are omitted and the report says where it happened.
fn general_nheat(ctx: &mut Ctx, b: &SpectralBasis, v0: &StateClass) -> Result<()> {
    let (traj, report) = nonlinear_heat_general(b, v0, &ctx.cfg.times, ctx.cfg.horizon)?;
    let mut ev = Evolution::new(false);
    for ((t, v), g) in traj.times.iter().zip(&traj.states).zip(&traj.means) {
        ev.push(*t, v, *g, v0.field(), None)?;
    }
    ev.write(ctx.out)?;
    ctx.out.write_json("blowup.json", &report)
}

pub fn cmd_blowup(ctx: &mut Ctx) -> Result<()> {
    let b = basis(ctx)?;
    let v0 = positive_state(initial(ctx, &b, Role::Heat)?)?;
    if !(v0.mass() > 1.0 + UNIT_MASS_TOL) {
        return Err(KblError::Config(format!(
            "initial: blowup needs mass > 1, got {}",
            v0.mass()
        )));
    }
    general_nheat(ctx, &b, &v0)
}

fn summarize(c: &SeriesCertificate) -> CertificateSummary {
    CertificateSummary {
        target: match c.target {
            Target::Heat => "HEAT".into(),
            Target::Burgers => "BURGERS".into(),
        },
        t: c.t,
        valid: c.valid,
        threshold: serde_json::to_value(c.threshold()).unwrap_or(serde_json::Value::Null),
        absolutely_convergent: c.absolutely_convergent,
        tail_bound: c.tail_bound,
    }
}

fn decomposition(records: &[TermRecord]) -> Csv {
    let mut csv = Csv::new(&["q0", "tail", "m", "lambda", "coefficient", "mode_scale", "mode_file"]);
    for r in records {
        let files: Vec<String> = r.factors.iter().map(|f| format!("modes/{f}.csv")).collect();
        csv.row(&[
            Cell::U(r.q0 as u64),
            Cell::S(&r.tail),
            Cell::U(r.m as u64),
            Cell::F(r.lambda),
            Cell::F(r.coefficient),
            Cell::F(r.mode_scale),
            Cell::S(&files.join("*")),
        ]);
    }
    csv
}

/// Factor fields referenced by the decomposition rows.
fn factor_files(out: &mut Outputs, b: &SpectralBasis, target: Target, q_max: usize) -> Result<()> {
    match target {
        Target::Heat => {
            for q in 0..=q_max {
                out.write_csv(&format!("modes/e{q}.csv"), &profile(b.mode(q)))?;
            }
        }
        Target::Burgers => {
            let e0 = b.mode(0);
            for q in 0..=q_max {
                let d = b.mode_derivative(q).zip_with(e0, |d, z| d / z)?;
                out.write_csv(&format!("modes/de{q}_over_e0.csv"), &profile(&d))?;
                if q > 0 {
                    let r = b.mode(q).zip_with(e0, |e, z| e / z)?;
                    out.write_csv(&format!("modes/e{q}_over_e0.csv"), &profile(&r))?;
                }
            }
        }
    }
    Ok(())
}

pub fn cmd_koopman(ctx: &mut Ctx, target: KoopmanTarget) -> Result<()> {
    let b = basis(ctx)?;
    let trunc = ctx.cfg.trunc()?;
    let times = ctx.cfg.times.clone();
    let opts = SeriesOptions {
        allow_uncertified: ctx.cfg.allow_uncertified,
        ..SeriesOptions::new(trunc)
    };

    // the Burgers data enters through H(u₀); the heat data is put on P₁
    let (kind, heat_state, u0) = match target {
        KoopmanTarget::Heat => {
            let v = StateClass::normalized(initial(ctx, &b, Role::Heat)?)
                .map_err(|e| KblError::Config(format!("initial: {e}")))?;
            (Target::Heat, v, None)
        }
        KoopmanTarget::Burgers => {
            let u = initial(ctx, &b, Role::Burgers)?;
            (Target::Burgers, hopf(&u)?, Some(u))
        }
    };

    let certs: Vec<SeriesCertificate> = times
        .iter()
        .map(|&t| match &u0 {
            None => heat_certificate(&b, &heat_state, t, &trunc),
            Some(u) => burgers_certificate(&b, u, t, &trunc),
        })
        .collect::<Result<_>>()?;
    ctx.certificates.extend(certs.iter().map(summarize));
    if !opts.allow_uncertified {
        if let Some(bad) = certs.iter().find(|c| !c.valid) {
            ctx.out.write_json("certificate.json", &certs)?;
            return Err(KblError::CertFail {
                t: bad.t,
                threshold: bad.threshold().value(),
            });
        }
    }

    let records = term_records(&b, kind, &heat_state, &trunc)?;
    ctx.out.write_csv("decomposition.csv", &decomposition(&records))?;
    factor_files(ctx.out, &b, kind, trunc.max_mode)?;

    let mut series_csv = Csv::new(&["t", "x", "value"]);
    let mut comparison = Csv::new(&["t", "sup_error", "tail_bound", "valid", "absolutely_convergent"]);
    let mut written = Vec::with_capacity(times.len());
    for &t in &times {
        let (series, cert, oracle) = match &u0 {
            None => {
                let (s, c) = heat_series_with(&b, &heat_state, t, &opts)?;
                (s, c, nonlinear_heat_flow(&b, &heat_state, t)?.into_field())
            }
            Some(u) => {
                let (s, c) = burgers_series_with(&b, u, t, &opts)?;
                (s, c, crate::flows::burgers_flow(&b, u, t)?)
            }
        };
        series_csv.field_rows(t, &series);
        comparison.row(&[
            Cell::F(t),
            Cell::F(series.sup_distance(&oracle)?),
            Cell::F(cert.tail_bound),
            Cell::S(if cert.valid { "true" } else { "false" }),
            Cell::S(if cert.absolutely_convergent { "true" } else { "false" }),
        ]);
        written.push(cert);
    }
    ctx.out.write_csv("series.csv", &series_csv)?;
    ctx.out.write_csv("comparison.csv", &comparison)?;
    ctx.out.write_json("certificate.json", &written)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault_mode: Option<usize>,
    pub checks: Vec<Check>,
}

pub fn cmd_verify(ctx: &mut Ctx) -> Result<()> {
    let clean = basis(ctx)?;
    let b = match ctx.cfg.fault_mode {
        Some(n) => clean.with_corrupted_mode(n)?,
        None => clean,
    };
    let checks = run_suite(
        &b,
        SuiteOptions {
            seed: ctx.cfg.seed,
            samples: ctx.cfg.samples,
        },
    );
    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport {
        pass: failed == 0,
        seed: ctx.cfg.seed,
        fault_mode: ctx.cfg.fault_mode,
        checks,
    };
    ctx.out.write_json("verify.json", &report)?;
    if failed > 0 {
        return Err(KblError::Numerical(format!("{failed} of {} checks failed", report.checks.len())));
    }
    Ok(())
}
