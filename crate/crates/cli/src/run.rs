//! Mode dispatch. Every mode writes one or more CSV tables and a
//! `<mode>.json` sidecar into the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use floquet_core::channels::DriveWaveform;
use floquet_core::matching::{
    conjugate_partner, continue_in_f2, critical_point, degeneracy_scan, pole_solve, scattering_grid, scattering_solve,
    static_bound_states, static_spectrum, truncation_stability, FloquetSolution, Problem, ScatteringRecord, SweepAxis,
};
use floquet_core::observables::{emission_density, residual_verify, SamplePoint};
use floquet_core::C64;
use serde_json::json;

use crate::config::{ConfigError, Mode, RunConfig, SweepAxisName};
use crate::export::{real, ExportError, Sidecar, Status, Table};

/// Omega shift under one enlargement step of the truncation that flags a trace.
const TRUNCATION_SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{mode}: {message} (partial results written to {})", dir.display())]
    Solver { mode: Mode, message: String, dir: PathBuf },
    #[error("{mode}: {message}")]
    NoResult { mode: Mode, message: String },
    #[error("verification failed: max relative residual {worst:.3e} exceeds {tol:.1e}")]
    Verify { worst: f64, tol: f64 },
    #[error("resume: {0}")]
    Resume(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl RunError {
    /// 1 for solver trouble, 2 for bad input, 3 for a failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Resume(_) => 2,
            RunError::Verify { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// pole-trace: continue from the trajectory already in the output directory.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub mode: Mode,
    pub files: Vec<PathBuf>,
}

struct Context<'a> {
    mode: Mode,
    cfg: &'a RunConfig,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Context<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), ExportError> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn sidecar(&mut self, sidecar: &Sidecar) -> Result<(), ExportError> {
        let path = self.sidecar_path();
        sidecar.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn sidecar_path(&self) -> PathBuf {
        self.dir.join(format!("{}.json", self.mode))
    }

    fn problem(&self, f2: f64) -> Result<Problem, ConfigError> {
        Ok(Problem::new(
            self.cfg.well_model()?,
            DriveWaveform::new(f2),
            self.cfg.truncation_scheme()?,
            self.cfg.solver_options(),
        ))
    }

    fn failed(&self, message: impl ToString) -> RunError {
        RunError::Solver { mode: self.mode, message: message.to_string(), dir: self.dir.clone() }
    }

    fn no_result(&self, message: impl ToString) -> RunError {
        RunError::NoResult { mode: self.mode, message: message.to_string() }
    }
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let mode = cfg.mode.ok_or(ConfigError::MissingMode)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| ExportError::Io { path: dir.clone(), source })?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| RunError::Pool(e.to_string()))?;
    let mut ctx = Context { mode, cfg, dir, files: Vec::new() };
    pool.install(|| match mode {
        Mode::StaticSpectrum => spectrum(&mut ctx),
        Mode::PoleTrace => pole_trace(&mut ctx, opts),
        Mode::CriticalPoint => critical(&mut ctx),
        Mode::Scatter => scatter(&mut ctx),
        Mode::ScatterGrid => scatter_grid(&mut ctx),
        Mode::Emission => emission(&mut ctx),
        Mode::Verify => verify(&mut ctx),
        Mode::EpScan => ep_scan(&mut ctx),
    })?;
    Ok(Outcome { mode, files: ctx.files })
}

fn sweep_axis(cfg: &RunConfig) -> Result<SweepAxis, ConfigError> {
    let well = cfg.well_model()?;
    Ok(match cfg.sweep.axis {
        SweepAxisName::AOverPi => SweepAxis::AOverPi { d: well.d },
        SweepAxisName::Depth => SweepAxis::Depth { a_over_pi: well.a_over_pi() },
    })
}

fn spectrum(ctx: &mut Context) -> Result<(), RunError> {
    let values = ctx.cfg.sweep.range.values();
    let points = static_spectrum(sweep_axis(ctx.cfg)?, &values, ctx.cfg.sweep.l_max);
    let mut table = Table::new(["parameter", "V0", "d", "l", "index", "omega"]);
    for pt in &points {
        for s in &pt.states {
            table.push(vec![real(pt.parameter), real(pt.v0), real(pt.d), s.l.to_string(), s.index.to_string(), real(s.omega)]);
        }
    }
    ctx.table("spectrum.csv", &table)?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({ "points": points.len(), "states": table.rows.len() });
    side.records = serde_json::to_value(&points).expect("spectrum serializes");
    ctx.sidecar(&side)?;
    Ok(())
}

fn ep_scan(ctx: &mut Context) -> Result<(), RunError> {
    let values = ctx.cfg.sweep.range.values();
    let found = degeneracy_scan(sweep_axis(ctx.cfg)?, &values, ctx.cfg.sweep.l_max);
    let mut table = Table::new([
        "parameter",
        "lower_l",
        "lower_index",
        "lower_omega",
        "upper_l",
        "upper_index",
        "upper_omega",
        "quanta",
        "mismatch",
    ]);
    for d in &found {
        table.push(vec![
            real(d.parameter),
            d.lower.l.to_string(),
            d.lower.index.to_string(),
            real(d.lower.omega),
            d.upper.l.to_string(),
            d.upper.index.to_string(),
            real(d.upper.omega),
            d.quanta.to_string(),
            real(d.mismatch),
        ]);
    }
    ctx.table("degeneracies.csv", &table)?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({ "scanned": values.len(), "found": found.len() });
    side.records = serde_json::to_value(&found).expect("degeneracies serialize");
    ctx.sidecar(&side)?;
    Ok(())
}

/// Pole at the start of the trace, from the configured static state or
/// explicit guess.
fn seed(ctx: &Context, problem: &Problem) -> Result<FloquetSolution, RunError> {
    let s = &ctx.cfg.seed;
    let guess = match s.omega {
        Some([re, im]) => C64::new(re, im),
        None => {
            let w = &problem.well;
            let state = static_bound_states(w.v0, w.d, s.l).into_iter().filter(|b| b.l == s.l).nth(s.index);
            let state = state.ok_or_else(|| ConfigError::Invalid {
                key: "seed",
                reason: format!("the well holds no static state with l = {} and index {}", s.l, s.index),
            })?;
            C64::new(state.omega, 0.0)
        }
    };
    pole_solve(problem, guess, ctx.cfg.boundary()).map_err(|e| ctx.no_result(format!("seed solve failed: {e}")))
}

fn trajectory_table(traj: &[FloquetSolution]) -> Table {
    let indices: Vec<i32> = traj.first().map(|s| s.truncation.fourier_indices().collect()).unwrap_or_default();
    let mut header = vec!["F2".to_string(), "Re_omega".into(), "Im_omega".into()];
    for j in &indices {
        header.push(format!("Re_k[{j}]"));
        header.push(format!("Im_k[{j}]"));
    }
    header.extend(["sigma_min".into(), "iterations".into()]);
    let mut table = Table::new(header);
    for s in traj {
        let mut row = vec![real(s.f2), real(s.omega.re), real(s.omega.im)];
        for k in &s.k {
            row.push(real(k.re));
            row.push(real(k.im));
        }
        row.extend([real(s.diagnostics.sigma_min), s.diagnostics.iterations.to_string()]);
        table.push(row);
    }
    table
}

/// Continues from `start` to the configured F2. A failure keeps the
/// accepted points and reports the error.
fn trace(ctx: &Context, problem: &Problem, start: &FloquetSolution) -> (Vec<FloquetSolution>, Option<String>) {
    match continue_in_f2(problem, start, ctx.cfg.drive.f2, &ctx.cfg.step_control(), |_| {}) {
        Ok(t) => (t, None),
        Err(e) => {
            let msg = e.to_string();
            (e.trajectory, Some(msg))
        }
    }
}

fn trace_summary(traj: &[FloquetSolution]) -> serde_json::Value {
    let last = traj.last();
    json!({
        "points": traj.len(),
        "final_F2": last.map(|s| s.f2),
        "final_omega": last.map(|s| [s.omega.re, s.omega.im]),
        "max_residual": traj.iter().map(|s| s.diagnostics.residual).fold(0.0, f64::max),
        "degenerate_points": traj.iter().filter(|s| s.diagnostics.degenerate).count(),
    })
}

fn pole_trace(ctx: &mut Context, opts: &RunOptions) -> Result<(), RunError> {
    let problem = ctx.problem(ctx.cfg.drive.f2_start)?;
    let mut prior = Vec::new();
    let start = if opts.resume {
        let old = Sidecar::read(&ctx.sidecar_path())?;
        if !ctx.cfg.resumable_from(&old.config) {
            return Err(RunError::Resume("stored run used a different well, truncation, seed or solver".into()));
        }
        prior = old.solutions;
        prior.pop().ok_or_else(|| RunError::Resume("stored trajectory is empty".into()))?
    } else {
        seed(ctx, &problem)?
    };
    let (traj, error) = trace(ctx, &problem, &start);
    prior.extend(traj);
    let traj = prior;
    ctx.table("trajectory.csv", &trajectory_table(&traj))?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = trace_summary(&traj);
    side.solutions = traj;
    if let Some(e) = &error {
        side.status = Status::Partial;
        side.error = Some(e.clone());
    }
    ctx.sidecar(&side)?;
    match error {
        Some(e) => Err(ctx.failed(e)),
        None => Ok(()),
    }
}

fn critical(ctx: &mut Context) -> Result<(), RunError> {
    let problem = ctx.problem(ctx.cfg.drive.f2_start)?;
    let start = seed(ctx, &problem)?;
    let (traj, error) = trace(ctx, &problem, &start);
    ctx.table("trajectory.csv", &trajectory_table(&traj))?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = trace_summary(&traj);
    let found = match critical_point(&problem, &traj) {
        Ok(Some(c)) => Ok(c),
        Ok(None) => Err(format!("Im omega keeps its sign up to F2 = {}", traj.last().map_or(0.0, |s| s.f2))),
        Err(e) => Err(format!("bisection failed: {e}")),
    };
    let found = found.map_err(|e| match &error {
        Some(trace_err) => format!("{e}; trace stopped early: {trace_err}"),
        None => e,
    });
    match found {
        Ok(c) => {
            let mut table = Table::new(["F2c", "omega_c", "Im_omega", "sigma_min", "iterations"]);
            let d = &c.solution.diagnostics;
            table.push(vec![real(c.f2), real(c.omega), real(c.solution.omega.im), real(d.sigma_min), d.iterations.to_string()]);
            ctx.table("critical.csv", &table)?;
            let stability = truncation_stability(&problem, std::slice::from_ref(&c.solution), 1, TRUNCATION_SHIFT_TOL)
                .map(|t| json!({ "omega_shift": t.max_shift, "flagged": t.flagged }))
                .unwrap_or_else(|e| json!({ "error": e.to_string() }));
            side.diagnostics["truncation"] = stability;
            side.records = json!({ "F2c": c.f2, "omega_c": c.omega, "critical_index": traj.len() });
            side.solutions = traj;
            side.solutions.push(c.solution);
            ctx.sidecar(&side)?;
            Ok(())
        }
        Err(e) => {
            side.status = Status::Partial;
            side.error = Some(e.clone());
            side.solutions = traj;
            ctx.sidecar(&side)?;
            Err(ctx.failed(e))
        }
    }
}

const GRID_HEADER: [&str; 10] =
    ["F2", "omega", "Re_S00", "Im_S00", "abs_S00_sq", "arg_S00", "abs_S21_sq", "sigma_e0", "sigma_r0", "sigma_t0"];

fn grid_row(f2: f64, omega: f64, rec: Option<&ScatteringRecord>) -> Vec<String> {
    let mut row = vec![real(f2), real(omega)];
    match rec {
        Some(r) => {
            let s00 = r.s(r.input.0, r.input.1).unwrap_or(C64::new(f64::NAN, f64::NAN));
            let s21 = r.s(1, 1).map_or(f64::NAN, |s| s.norm_sqr());
            row.extend([s00.re, s00.im, s00.norm_sqr(), s00.arg(), s21, r.sigma_e0, r.sigma_r0, r.sigma_t0].map(real));
        }
        None => row.extend(std::iter::repeat_n(real(f64::NAN), 8)),
    }
    row
}

fn scatter(ctx: &mut Context) -> Result<(), RunError> {
    let problem = ctx.problem(ctx.cfg.drive.f2)?;
    let sc = &ctx.cfg.scatter;
    let rec = scattering_solve(&problem, sc.omega, sc.input).map_err(|e| ctx.no_result(e))?;
    let mut table = Table::new(GRID_HEADER);
    table.push(grid_row(rec.f2, rec.omega, Some(&rec)));
    ctx.table("scatter.csv", &table)?;
    let mut channels = Table::new(["j", "l1", "Re_S", "Im_S", "abs_S_sq"]);
    for ((j, l1), s) in &rec.s_column {
        channels.push(vec![j.to_string(), l1.to_string(), real(s.re), real(s.im), real(s.norm_sqr())]);
    }
    ctx.table("channels.csv", &channels)?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({ "unitarity": rec.unitarity, "rcond": rec.rcond });
    side.records = serde_json::to_value(&rec).expect("record serializes");
    ctx.sidecar(&side)?;
    Ok(())
}

fn scatter_grid(ctx: &mut Context) -> Result<(), RunError> {
    let problem = ctx.problem(0.0)?;
    let f2 = ctx.cfg.drive.f2_range.values();
    let omega = ctx.cfg.scatter.omega_range.values();
    let cells = scattering_grid(&problem, &f2, &omega, ctx.cfg.scatter.input);
    let mut table = Table::new(GRID_HEADER);
    for c in &cells {
        table.push(grid_row(c.f2, c.omega, c.record.as_ref()));
    }
    ctx.table("grid.csv", &table)?;
    let failures: Vec<_> = cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| json!({ "F2": c.f2, "omega": c.omega, "error": e })))
        .collect();
    let worst_unitarity =
        cells.iter().filter_map(|c| c.record.as_ref()).map(|r| (r.unitarity - 1.0).abs()).fold(0.0, f64::max);
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({ "cells": cells.len(), "failed": failures.len(), "max_unitarity_defect": worst_unitarity });
    side.records = json!({ "failures": failures });
    ctx.sidecar(&side)?;
    Ok(())
}

fn emission(ctx: &mut Context) -> Result<(), RunError> {
    let problem = ctx.problem(ctx.cfg.drive.f2_start)?;
    let start = seed(ctx, &problem)?;
    let (traj, error) = trace(ctx, &problem, &start);
    if let Some(e) = error {
        return Err(ctx.no_result(format!("could not reach F2 = {}: {e}", ctx.cfg.drive.f2)));
    }
    let mut sol = traj.last().cloned().expect("trajectory holds the seed");
    // past the critical point the decaying state is the conjugate partner
    if sol.omega.im > 0.0 {
        sol = conjugate_partner(&problem.with_f2(sol.f2), &sol).map_err(|e| ctx.no_result(e))?;
    }
    let density = emission_density(&sol, ctx.cfg.solver.eps_flux).map_err(|e| ctx.no_result(e))?;
    let n = ctx.cfg.emission.theta_count;
    let thetas: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { PI * i as f64 / (n - 1) as f64 }).collect();
    let l_max = sol.truncation.l_max;
    let mut header = vec!["j".to_string(), "Re_k".into()];
    header.extend((0..=l_max).map(|l| format!("w_l{l}")));
    header.extend(thetas.iter().map(|t| format!("f(theta={})", real(*t))));
    let mut table = Table::new(header);
    for (i, ch) in density.channels.iter().enumerate() {
        let mut row = vec![ch.j.to_string(), real(ch.momentum)];
        for l in 0..=l_max {
            let w = ch.amplitudes.iter().find(|(l1, _)| *l1 == l).map_or(0.0, |(_, b)| b.norm_sqr());
            row.push(real(w / density.normalization));
        }
        row.extend(thetas.iter().map(|&t| real(density.shell_marginal(i, t))));
        table.push(row);
    }
    ctx.table("emission.csv", &table)?;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({
        "omega": [sol.omega.re, sol.omega.im],
        "boundary": sol.boundary,
        "total_probability": density.total_probability(),
        "dominant_j": density.dominant().map(|c| c.j),
    });
    side.records = serde_json::to_value(&density).expect("density serializes");
    side.solutions = vec![sol];
    ctx.sidecar(&side)?;
    Ok(())
}

/// Deterministic quasi-random points in the shell 0.05 d < r < 2 d, away
/// from the matching radius.
fn verify_points(d: f64, count: usize) -> Vec<SamplePoint> {
    let (a1, a2, a3) = (0.819_172_513_396_164_4, 0.671_043_606_703_789_2, 0.549_700_477_901_970_4);
    let mut out = Vec::with_capacity(count);
    let mut i = 0u32;
    while out.len() < count {
        i += 1;
        let u = |a: f64| (0.5 + a * i as f64).fract();
        let r = d * (0.05 + 1.95 * u(a1));
        if (r - d).abs() < 0.02 * d {
            continue;
        }
        out.push(SamplePoint { r, theta: PI * u(a2), t: PI * u(a3) });
    }
    out
}

fn verify(ctx: &mut Context) -> Result<(), RunError> {
    let path = ctx.cfg.verify.solution.clone().ok_or(ConfigError::Invalid {
        key: "verify.solution",
        reason: "path to a sidecar .json written by an earlier run is required".into(),
    })?;
    let input = Sidecar::read(&path)?;
    if input.solutions.is_empty() {
        return Err(ctx.no_result(format!("{} holds no solutions", path.display())));
    }
    let mut table = Table::new(["index", "F2", "Re_omega", "Im_omega", "max_relative", "continuity", "truncation_jump"]);
    let mut worst = 0.0f64;
    for (i, sol) in input.solutions.iter().enumerate() {
        let points = verify_points(sol.well.d, ctx.cfg.verify.points);
        let rep = residual_verify(sol, &points).map_err(|e| ctx.no_result(format!("solution {i}: {e}")))?;
        worst = worst.max(rep.max_relative);
        table.push(vec![
            i.to_string(),
            real(sol.f2),
            real(sol.omega.re),
            real(sol.omega.im),
            real(rep.max_relative),
            real(rep.continuity),
            real(rep.truncation_jump),
        ]);
    }
    ctx.table("verify.csv", &table)?;
    let tol = ctx.cfg.solver.verify_tol;
    let mut side = Sidecar::new(ctx.mode, ctx.cfg);
    side.diagnostics = json!({ "solutions": input.solutions.len(), "max_relative": worst, "tolerance": tol, "source": path });
    ctx.sidecar(&side)?;
    if worst > tol {
        return Err(RunError::Verify { worst, tol });
    }
    Ok(())
}
