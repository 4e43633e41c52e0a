use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::system::{assemble, log_det, Equilibration, MatchingSystem};
use super::{MatchError, Problem};
use crate::channels::{
    channel_energy, channel_flux_norm, channel_momentum_init, channel_momentum_track, Boundary, Side, WellModel,
};
use crate::specfun::spherical_norm;
use crate::waves::TruncationScheme;

const MAX_MULLER_STEP: f64 = 0.1;
const DEGENERATE_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// sigma_min / sigma_max of the equilibrated block matrix.
    pub sigma_min: f64,
    pub sigma_next: f64,
    pub iterations: usize,
    /// Componentwise backward error of K (a; b).
    pub residual: f64,
    pub j_ref: i32,
    /// Second singular value also small: exceptional-point vicinity.
    pub degenerate: bool,
    pub threshold_warnings: Vec<i32>,
}

/// A converged quasi-bound state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSolution {
    pub omega: C64,
    pub f2: f64,
    pub boundary: Boundary,
    pub well: WellModel,
    pub truncation: TruncationScheme,
    /// (Fourier index, angular index) for both a and b.
    pub basis: Vec<(i32, usize)>,
    /// Interior coefficients of j_l(kappa_n r), or of the driven regular
    /// wave normalized to j_l at zero drive.
    pub a: Vec<C64>,
    /// Exterior coefficients in the flux gauge.
    pub b: Vec<C64>,
    /// Exterior momenta, one per Fourier index.
    pub k: Vec<C64>,
    pub kappa: Vec<C64>,
    pub diagnostics: SolveDiagnostics,
    /// Singular vector of the second-smallest singular value when flagged
    /// degenerate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion: Option<(Vec<C64>, Vec<C64>)>,
}

impl FloquetSolution {
    pub fn first_index(&self) -> i32 {
        -self.truncation.j_neg
    }

    pub fn k_of(&self, j: i32) -> C64 {
        self.k[(j - self.first_index()) as usize]
    }

    pub fn kappa_of(&self, n: i32) -> C64 {
        self.kappa[(n - self.first_index()) as usize]
    }

    pub fn channel_energy(&self, j: i32, side: Side) -> C64 {
        channel_energy(self.omega, j, side, &self.well, &crate::channels::DriveWaveform::new(self.f2))
    }

    /// Multiplier turning a flux-gauge b into the coefficient of N_{l1} R.
    pub fn exterior_scale(&self, j: i32, l1: usize, eps_flux: f64) -> f64 {
        let k = self.k_of(j);
        channel_flux_norm(k, self.channel_energy(j, Side::Exterior), l1, self.well.m, eps_flux)
            / spherical_norm(l1, self.well.m)
    }
}

/// Pole at omega for a system assembled from these momenta.
pub(crate) struct Evaluator<'a> {
    pub problem: &'a Problem,
    pub j_ref: i32,
    pub reference: Vec<C64>,
    pub eq: Option<Equilibration>,
}

impl Evaluator<'_> {
    fn first(&self) -> i32 {
        *self.problem.truncation.fourier_indices().start()
    }

    pub fn omega_of(&self, k_ref: C64) -> C64 {
        let p = self.problem;
        let e0 = channel_energy(C64::new(0.0, 0.0), self.j_ref, Side::Exterior, &p.well, &p.drive);
        0.5 * k_ref * k_ref - e0
    }

    pub fn momenta(&self, k_ref: C64) -> Result<(C64, Vec<C64>), MatchError> {
        let p = self.problem;
        let omega = self.omega_of(k_ref);
        let first = self.first();
        let mut ks = Vec::with_capacity(self.reference.len());
        for (i, &prev) in self.reference.iter().enumerate() {
            let j = first + i as i32;
            if j == self.j_ref {
                ks.push(k_ref);
            } else {
                let e = channel_energy(omega, j, Side::Exterior, &p.well, &p.drive);
                ks.push(channel_momentum_track(prev, e, j)?);
            }
        }
        Ok((omega, ks))
    }

    pub fn system(&self, k_ref: C64) -> Result<(C64, MatchingSystem), MatchError> {
        let (omega, ks) = self.momenta(k_ref)?;
        Ok((omega, assemble(self.problem, omega, &ks, None)?))
    }

    pub fn log_det(&mut self, k_ref: C64) -> Result<C64, MatchError> {
        let (_, sys) = self.system(k_ref)?;
        let k = sys.k_matrix();
        let eq = self.eq.get_or_insert_with(|| Equilibration::from_matrix(&k));
        Ok(log_det(eq.apply(&k)))
    }
}

/// Muller iteration on exp(log f - log f_ref).
pub(crate) fn muller<F>(mut f: F, x2: C64, tol: f64, max_iter: usize) -> Result<(C64, usize), MatchError>
where
    F: FnMut(C64) -> Result<C64, MatchError>,
{
    let h = 1e-6 * x2.norm().max(1e-3);
    let (mut x0, mut x1, mut x2) = (x2 + h, x2 - h + C64::new(0.0, 0.5 * h), x2);
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let (g0, g1) = ((f0 - f2).exp(), (f1 - f2).exp());
        let g2 = C64::new(1.0, 0.0);
        let (h1, h2) = (x1 - x0, x2 - x1);
        let (d1, d2) = ((g1 - g0) / h1, (g2 - g1) / h2);
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * a * g2).sqrt();
        let den = if (b + disc).norm() >= (b - disc).norm() { b + disc } else { b - disc };
        let mut dx = if den.norm() > 0.0 { -2.0 * g2 / den } else { C64::new(h, 0.0) };
        if !dx.re.is_finite() || !dx.im.is_finite() {
            return Err(MatchError::NoConvergence { iterations: it, last_step: f64::NAN });
        }
        if dx.norm() > MAX_MULLER_STEP {
            dx *= MAX_MULLER_STEP / dx.norm();
        }
        let x3 = x2 + dx;
        last = dx.norm();
        if last < tol * x3.norm().max(1.0) {
            return Ok((x3, it));
        }
        x0 = x1;
        x1 = x2;
        x2 = x3;
        f0 = f1;
        f1 = f2;
        f2 = f(x3)?;
    }
    Err(MatchError::NoConvergence { iterations: max_iter, last_step: last })
}

fn nearest_threshold(problem: &Problem, omega: C64) -> i32 {
    problem
        .truncation
        .fourier_indices()
        .min_by(|&a, &b| {
            let ea = channel_energy(omega, a, Side::Exterior, &problem.well, &problem.drive).norm();
            let eb = channel_energy(omega, b, Side::Exterior, &problem.well, &problem.drive).norm();
            ea.partial_cmp(&eb).unwrap()
        })
        .unwrap()
}

/// Fresh pole search from a quasi-energy guess; open channels take the
/// branch requested by `boundary`.
pub fn pole_solve(problem: &Problem, omega_guess: C64, boundary: Boundary) -> Result<FloquetSolution, MatchError> {
    let reference: Vec<C64> = problem
        .truncation
        .fourier_indices()
        .map(|j| {
            let e = channel_energy(omega_guess, j, Side::Exterior, &problem.well, &problem.drive);
            channel_momentum_init(e, j, boundary)
        })
        .collect::<Result<_, _>>()?;
    pole_solve_tracked(problem, &reference, boundary)
}

/// Pole search continuing from reference momenta (one per Fourier index);
/// the initial guess is implied by the reference channel's momentum.
pub fn pole_solve_tracked(
    problem: &Problem,
    reference: &[C64],
    boundary: Boundary,
) -> Result<FloquetSolution, MatchError> {
    let first = *problem.truncation.fourier_indices().start();
    let p = problem;
    let guess_omega = {
        // any channel's momentum fixes omega; use the one nearest threshold
        let (i, k) = reference.iter().enumerate().min_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap()).unwrap();
        let e0 = channel_energy(C64::new(0.0, 0.0), first + i as i32, Side::Exterior, &p.well, &p.drive);
        0.5 * k * k - e0
    };
    let j_ref = nearest_threshold(p, guess_omega);
    let k_guess = reference[(j_ref - first) as usize];
    let mut ev = Evaluator { problem: p, j_ref, reference: reference.to_vec(), eq: None };
    let (k_ref, iterations) = muller(|x| ev.log_det(x), k_guess, p.options.tol_k, p.options.max_iter)?;
    finish(&ev, k_ref, iterations, boundary)
}

fn finish(ev: &Evaluator, k_ref: C64, iterations: usize, boundary: Boundary) -> Result<FloquetSolution, MatchError> {
    let p = ev.problem;
    let (omega, sys) = ev.system(k_ref)?;
    let kmat = sys.k_matrix();
    let eq = Equilibration::from_matrix(&kmat);
    let scaled = eq.apply(&kmat);
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].partial_cmp(&sv[b]).unwrap());
    let smax = sv[order[order.len() - 1]];
    let sigma_min = sv[order[0]] / smax;
    let sigma_next = sv[order[1]] / smax;
    if sigma_min > p.options.tol_sv {
        return Err(MatchError::TruncationLimited { sigma: sigma_min, tol: p.options.tol_sv });
    }
    let vector = |idx: usize| -> DVector<C64> {
        let row = v_t.row(idx);
        DVector::from_iterator(row.len(), row.iter().enumerate().map(|(j, v)| v.conj() * eq.cols[j]))
    };
    let x = vector(order[0]);
    let residual = backward_error(&kmat, &x, &eq, smax);
    let n = sys.size();
    let (a, b) = split_gauge(&sys, &x, omega, p, n);
    let degenerate = sigma_next < DEGENERATE_RATIO;
    let companion = degenerate.then(|| split_gauge(&sys, &vector(order[1]), omega, p, n));
    let threshold_warnings = p
        .truncation
        .fourier_indices()
        .filter(|&j| channel_energy(omega, j, Side::Exterior, &p.well, &p.drive).norm() < p.options.eps_threshold)
        .collect();
    Ok(FloquetSolution {
        omega,
        f2: p.drive.f2,
        boundary,
        well: p.well,
        truncation: p.truncation,
        basis: sys.basis.clone(),
        a,
        b,
        k: sys.k.clone(),
        kappa: sys.kappa.clone(),
        diagnostics: SolveDiagnostics {
            sigma_min,
            sigma_next,
            iterations,
            residual,
            j_ref: ev.j_ref,
            degenerate,
            threshold_warnings,
        },
        companion,
    })
}

/// ||E_r K x|| / (||E_r K E_c|| ||E_c^-1 x||), the normwise backward error
/// in the equilibrated frame.
pub(crate) fn backward_error(k: &DMatrix<C64>, x: &DVector<C64>, eq: &Equilibration, norm: f64) -> f64 {
    let kx = k * x;
    let num: f64 = kx.iter().zip(&eq.rows).map(|(v, r)| (v * r).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = x.iter().zip(&eq.cols).map(|(v, c)| (v / c).norm_sqr()).sum::<f64>().sqrt();
    num / (norm * den)
}

/// Converts a column-space kernel vector into natural interior coefficients
/// and flux-gauge exterior coefficients, largest |b| real positive.
fn split_gauge(sys: &MatchingSystem, x: &DVector<C64>, omega: C64, p: &Problem, n: usize) -> (Vec<C64>, Vec<C64>) {
    let first = *p.truncation.fourier_indices().start();
    let mut a: Vec<C64> = (0..n).map(|i| x[i] * sys.interior_scale[i]).collect();
    let mut b: Vec<C64> = sys
        .basis
        .iter()
        .enumerate()
        .map(|(i, &(j, l1))| {
            let k = sys.k[(j - first) as usize];
            let e = channel_energy(omega, j, Side::Exterior, &p.well, &p.drive);
            let ratio = channel_flux_norm(k, e, l1, p.well.m, p.options.eps_flux) / spherical_norm(l1, p.well.m);
            x[n + i] * sys.exterior_scale[i] / ratio
        })
        .collect();
    let big = b.iter().copied().max_by(|u, v| u.norm().partial_cmp(&v.norm()).unwrap()).unwrap_or(C64::new(1.0, 0.0));
    if big.norm() > 0.0 {
        let phase = big.conj() / (big.norm() * big.norm());
        for v in a.iter_mut().chain(b.iter_mut()) {
            *v *= phase;
        }
    }
    (a, b)
}

/// S-matrix zeros paired with the pole: -k for every tracked channel.
pub fn zero_locator(solution: &FloquetSolution) -> Vec<(i32, C64)> {
    let first = solution.first_index();
    solution.k.iter().enumerate().map(|(i, k)| (first + i as i32, -k)).collect()
}

/// The time-reversed partner pole at omega*, solved from momenta -k* with
/// the boundary reversed. Past a critical point this is the emitting member
/// of the pair.
pub fn conjugate_partner(problem: &Problem, solution: &FloquetSolution) -> Result<FloquetSolution, MatchError> {
    let reference: Vec<C64> = solution.k.iter().map(|k| -k.conj()).collect();
    pole_solve_tracked(&problem.with_f2(solution.f2), &reference, solution.boundary.reversed())
}
