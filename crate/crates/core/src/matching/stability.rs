use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::pole::{pole_solve_tracked, FloquetSolution};
use super::{MatchError, Problem};
use crate::channels::{channel_energy, channel_momentum_init, Side};

/// Shift of omega when the truncation grows by one step in J and L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub f2: Vec<f64>,
    pub shift: Vec<f64>,
    pub max_shift: f64,
    pub flagged: bool,
}

/// Re-solves the solution with (J_range, L_max) enlarged, keeping the
/// tracked branch of every existing channel.
pub fn enlarged_solve(problem: &Problem, solution: &FloquetSolution) -> Result<FloquetSolution, MatchError> {
    let bigger = solution.truncation.enlarged();
    let p = problem.with_truncation(bigger).with_f2(solution.f2);
    let reference: Vec<C64> = bigger
        .fourier_indices()
        .map(|j| {
            let (lo, hi) = (solution.first_index(), solution.first_index() + solution.k.len() as i32 - 1);
            if (lo..=hi).contains(&j) {
                Ok(solution.k_of(j))
            } else {
                let e = channel_energy(solution.omega, j, Side::Exterior, &p.well, &p.drive);
                channel_momentum_init(e, j, solution.boundary)
            }
        })
        .collect::<Result<_, _>>()?;
    pole_solve_tracked(&p, &reference, solution.boundary)
}

/// Checks `count` evenly spaced trajectory points; flags the run when any
/// omega moves by `tol` or more.
pub fn truncation_stability(
    problem: &Problem,
    trajectory: &[FloquetSolution],
    count: usize,
    tol: f64,
) -> Result<TruncationCheck, MatchError> {
    let n = trajectory.len();
    let mut picks: Vec<usize> = if n <= count {
        (0..n).collect()
    } else {
        (0..count).map(|i| i * (n - 1) / (count - 1).max(1)).collect()
    };
    picks.dedup();
    let mut f2 = Vec::with_capacity(picks.len());
    let mut shift = Vec::with_capacity(picks.len());
    for i in picks {
        let sol = &trajectory[i];
        let big = enlarged_solve(problem, sol)?;
        f2.push(sol.f2);
        shift.push((big.omega - sol.omega).norm());
    }
    let max_shift = shift.iter().copied().fold(0.0, f64::max);
    Ok(TruncationCheck { f2, shift, max_shift, flagged: max_shift >= tol })
}
