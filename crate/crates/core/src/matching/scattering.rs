use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{assemble, Equilibration};
use super::{MatchError, Problem};
use crate::channels::{channel_energy, channel_flux_norm, channel_momentum_init, is_open, Boundary, Side};
use crate::specfun::spherical_norm;

/// Systems with a relative smallest singular value below this are reported
/// as near-singular instead of solved.
const RCOND_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub f2: f64,
    pub omega: f64,
    pub input: (i32, usize),
    /// Outgoing amplitudes per (j, l1) in the flux gauge.
    pub s_column: Vec<((i32, usize), C64)>,
    /// Cross sections divided by 2 pi, for the input channel.
    pub sigma_e0: f64,
    pub sigma_r0: f64,
    pub sigma_t0: f64,
    /// Sum of |S|^2 over open channels.
    pub unitarity: f64,
    pub rcond: f64,
}

impl ScatteringRecord {
    pub fn s(&self, j: i32, l1: usize) -> Option<C64> {
        self.s_column.iter().find(|(c, _)| *c == (j, l1)).map(|(_, v)| *v)
    }
}

/// One real-omega scattering solve for unit incoming flux in `input`.
pub fn scattering_solve(problem: &Problem, omega: f64, input: (i32, usize)) -> Result<ScatteringRecord, MatchError> {
    let p = problem;
    let w = C64::new(omega, 0.0);
    let e_in = channel_energy(w, input.0, Side::Exterior, &p.well, &p.drive);
    if !is_open(e_in) {
        return Err(MatchError::BelowThreshold { omega });
    }
    let ks: Vec<C64> = p
        .truncation
        .fourier_indices()
        .map(|j| channel_momentum_init(channel_energy(w, j, Side::Exterior, &p.well, &p.drive), j, Boundary::Emission))
        .collect::<Result<_, _>>()?;
    let first = *p.truncation.fourier_indices().start();
    let sys = assemble(p, w, &ks, Some(input))?;
    let n = sys.size();
    let m = p.well.m;
    let ratio = |j: i32, l1: usize| {
        let e = channel_energy(w, j, Side::Exterior, &p.well, &p.drive);
        channel_flux_norm(ks[(j - first) as usize], e, l1, m, p.options.eps_flux) / spherical_norm(l1, m)
    };

    let mut k = sys.k_matrix();
    for (i, &(j, l1)) in sys.basis.iter().enumerate() {
        let r = ratio(j, l1) / sys.exterior_scale[i];
        for row in 0..2 * n {
            k[(row, n + i)] *= r;
        }
    }
    let (_, dv, gv) = sys.incoming.as_ref().expect("incoming column requested");
    let r_in = ratio(input.0, input.1);
    let mut rhs = DVector::zeros(2 * n);
    for row in 0..n {
        rhs[row] = dv[row] * r_in;
        rhs[n + row] = gv[row] * r_in;
    }

    let eq = Equilibration::from_matrix(&k);
    let scaled = eq.apply(&k);
    let sv = scaled.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond > RCOND_FLOOR) {
        return Err(MatchError::NearSingular { omega, rcond });
    }
    let rhs_scaled = DVector::from_iterator(2 * n, rhs.iter().enumerate().map(|(i, v)| v * eq.rows[i]));
    let y = scaled.lu().solve(&rhs_scaled).ok_or(MatchError::NearSingular { omega, rcond })?;

    let mut s_column = Vec::with_capacity(n);
    let mut unitarity = 0.0;
    for (i, &(j, l1)) in sys.basis.iter().enumerate() {
        let s = y[n + i] * eq.cols[n + i];
        if is_open(channel_energy(w, j, Side::Exterior, &p.well, &p.drive)) {
            unitarity += s.norm_sqr();
        }
        s_column.push(((j, l1), s));
    }
    let s00 = s_column.iter().find(|(c, _)| *c == input).map(|(_, v)| *v).unwrap();
    // k^2 of the input channel; equals 2 omega for the unshifted variants
    let k2 = 2.0 * e_in.re;
    let sigma_e0 = (C64::new(1.0, 0.0) - s00).norm_sqr() / (2.0 * k2);
    let sigma_r0 = (1.0 - s00.norm_sqr()) / (2.0 * k2);
    let sigma_t0 = 2.0 * (1.0 - s00.re) / (2.0 * k2);
    Ok(ScatteringRecord { f2: p.drive.f2, omega, input, s_column, sigma_e0, sigma_r0, sigma_t0, unitarity, rcond })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub f2: f64,
    pub omega: f64,
    pub record: Option<ScatteringRecord>,
    pub error: Option<String>,
}

/// Scattering solves over the F2 x omega product, F2 outermost.
pub fn scattering_grid(problem: &Problem, f2_values: &[f64], omega_values: &[f64], input: (i32, usize)) -> Vec<GridCell> {
    let cells: Vec<(f64, f64)> = f2_values.iter().flat_map(|&f| omega_values.iter().map(move |&w| (f, w))).collect();
    cells
        .par_iter()
        .map(|&(f2, omega)| match scattering_solve(&problem.with_f2(f2), omega, input) {
            Ok(r) => GridCell { f2, omega, record: Some(r), error: None },
            Err(e) => GridCell { f2, omega, record: None, error: Some(e.to_string()) },
        })
        .collect()
}
