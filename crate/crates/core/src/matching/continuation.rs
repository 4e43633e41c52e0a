use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::pole::{pole_solve_tracked, FloquetSolution};
use super::{MatchError, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    /// Consecutive successes before the step doubles.
    pub grow_after: usize,
    /// Corrector may move the reference momentum this far from the
    /// prediction regardless of step length.
    pub jump_floor: f64,
    /// Accepted points before the trace gives up.
    pub max_points: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { initial: 5e-3, min: 1e-7, max: 1e-2, grow_after: 3, jump_floor: 2e-3, max_points: 20_000 }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("continuation stuck at F2 = {f2}: {source}")]
pub struct ContinuationError {
    pub f2: f64,
    pub source: MatchError,
    /// Accepted points up to the failure.
    pub trajectory: Vec<FloquetSolution>,
}

fn extrapolate(traj: &[FloquetSolution], f2: f64) -> Vec<C64> {
    let last = &traj[traj.len() - 1];
    if traj.len() < 2 {
        return last.k.clone();
    }
    let prev = &traj[traj.len() - 2];
    let s = (f2 - last.f2) / (last.f2 - prev.f2);
    last.k.iter().zip(&prev.k).map(|(a, b)| a + (a - b) * s).collect()
}

fn ref_index(sol: &FloquetSolution) -> usize {
    (sol.diagnostics.j_ref - sol.first_index()) as usize
}

/// Follows a pole from `seed` to `f2_target`, calling `on_step` for every
/// accepted point. The returned trajectory starts with the seed.
pub fn continue_in_f2(
    problem: &Problem,
    seed: &FloquetSolution,
    f2_target: f64,
    control: &StepControl,
    mut on_step: impl FnMut(&FloquetSolution),
) -> Result<Vec<FloquetSolution>, ContinuationError> {
    let mut traj = vec![seed.clone()];
    let mut h = control.initial.min(control.max);
    let mut streak = 0usize;
    let dir = (f2_target - seed.f2).signum();
    while (f2_target - traj.last().unwrap().f2) * dir > 1e-15 {
        if traj.len() >= control.max_points {
            let f2 = traj.last().unwrap().f2;
            let source = MatchError::PointLimit { points: traj.len() };
            return Err(ContinuationError { f2, source, trajectory: traj });
        }
        let last = traj.last().unwrap().clone();
        let mut f2 = last.f2 + dir * h;
        if (f2 - f2_target) * dir > 0.0 {
            f2 = f2_target;
        }
        let predicted = extrapolate(&traj, f2);
        let attempt = pole_solve_tracked(&problem.with_f2(f2), &predicted, seed.boundary).and_then(|sol| {
            let i = ref_index(&sol);
            let jump = (sol.k[i] - predicted[i]).norm();
            let stride = (predicted[i] - last.k[i]).norm();
            if jump > (0.5 * stride).max(control.jump_floor) {
                Err(MatchError::NoConvergence { iterations: sol.diagnostics.iterations, last_step: jump })
            } else {
                Ok(sol)
            }
        });
        match attempt {
            Ok(sol) => {
                on_step(&sol);
                traj.push(sol);
                streak += 1;
                if streak >= control.grow_after {
                    h = (2.0 * h).min(control.max);
                    streak = 0;
                }
            }
            Err(e) => {
                streak = 0;
                h *= 0.5;
                if h < control.min {
                    return Err(ContinuationError { f2, source: e, trajectory: traj });
                }
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub f2: f64,
    pub omega: f64,
    pub solution: FloquetSolution,
}

/// Bisects F2 on Im omega inside the first sign change of the trajectory.
/// Returns `Ok(None)` when the trajectory has no bracket.
pub fn critical_point(problem: &Problem, trajectory: &[FloquetSolution]) -> Result<Option<CriticalPoint>, MatchError> {
    let tol = problem.options.tol_c;
    let bracket = trajectory.windows(2).find(|w| {
        let (a, b) = (w[0].omega.im, w[1].omega.im);
        w[0].f2 > 0.0 && a != 0.0 && b != 0.0 && (a < 0.0) != (b < 0.0)
    });
    let Some(w) = bracket else { return Ok(None) };
    let (mut lo, mut hi) = (w[0].clone(), w[1].clone());
    if lo.omega.im.abs() < tol {
        return Ok(Some(CriticalPoint { f2: lo.f2, omega: lo.omega.re, solution: lo }));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo.f2 + hi.f2);
        let reference: Vec<C64> = lo.k.iter().zip(&hi.k).map(|(a, b)| 0.5 * (a + b)).collect();
        let sol = pole_solve_tracked(&problem.with_f2(mid), &reference, lo.boundary)?;
        if sol.omega.im.abs() < tol || hi.f2 - lo.f2 < 1e-13 {
            return Ok(Some(CriticalPoint { f2: sol.f2, omega: sol.omega.re, solution: sol }));
        }
        if (sol.omega.im < 0.0) == (lo.omega.im < 0.0) {
            lo = sol;
        } else {
            hi = sol;
        }
    }
    let sol = lo;
    Ok(Some(CriticalPoint { f2: sol.f2, omega: sol.omega.re, solution: sol }))
}
