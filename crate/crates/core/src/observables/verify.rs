use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::field::{Components, Field};
use super::ObservableError;
use crate::channels::{Side, Variant, DEFAULT_EPS_FLUX};
use crate::matching::FloquetSolution;
use crate::specfun::legendre_p;

const FIRST: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
const STEP_R: f64 = 4e-3;
const STEP_T: f64 = 4e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub r: f64,
    pub theta: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Largest of all pointwise and matching residuals.
    pub max_relative: f64,
    /// |i d_t phi - H phi| / (sum of the magnitudes of its terms), per point.
    pub pointwise: Vec<f64>,
    /// Largest jump across r = d of a matched (Fourier index, l) component
    /// of phi or d_r phi.
    pub continuity: f64,
    /// Jump of the full phi or d_r phi at the sampled (theta, t), including
    /// harmonics outside the truncation. Reported, not part of max_relative.
    pub truncation_jump: f64,
}

fn angular(field: &Field, theta: f64) -> Vec<f64> {
    let m = field.solution.well.m;
    let x = theta.cos();
    (0..field.n_l())
        .map(|l| if l < m { 0.0 } else { field.tables.norm(l) * legendre_p(l, m, x).unwrap() })
        .collect()
}

fn combine(psi: &[C64], y: &[f64]) -> C64 {
    psi.iter().zip(y).map(|(p, &w)| p * w).sum()
}

/// Potential energy at (r, theta, t) for this side and variant.
fn potential(field: &Field, side: Side, r: f64, theta: f64, t: f64) -> Vec<f64> {
    let variant = field.solution.well.variant;
    let drive = &field.drive;
    let field_term = -drive.acceleration(t) * r * theta.cos();
    let frame = -0.5 * drive.velocity(t).powi(2);
    let mut terms = Vec::new();
    match side {
        Side::Interior => {
            terms.push(-field.solution.well.v0);
            match variant {
                Variant::P2 => terms.extend([field_term, frame]),
                Variant::P4 => terms.push(field_term),
                _ => {}
            }
        }
        Side::Exterior => {
            terms.push(field_term);
            if !variant.omits_frame_potential() {
                terms.push(frame);
            }
        }
    }
    terms
}

fn point_residual(field: &Field, p: &SamplePoint) -> Result<f64, ObservableError> {
    let sol = field.solution;
    let d = sol.well.d;
    let side = field.side(p.r);
    let comps = |r: f64, t: f64| -> Result<Components, ObservableError> {
        Ok(match side {
            Side::Interior => field.interior(r, t)?,
            Side::Exterior => field.exterior(r, t)?,
        })
    };
    let eval = |r: f64, t: f64| -> Result<Vec<C64>, ObservableError> { Ok(comps(r, t)?.value) };
    let y = angular(field, p.theta);
    let hr = STEP_R.min((p.r - d).abs() / 3.5).min(if side == Side::Interior { p.r / 3.5 } else { f64::INFINITY });
    let n_l = field.n_l();
    // d_r is analytic; d_r^2 differentiates it once more
    let mid = comps(p.r, p.t)?;
    let (center, d1) = (mid.value, mid.deriv);
    let mut d2 = vec![C64::new(0.0, 0.0); n_l];
    for (s, &c) in FIRST.iter().enumerate() {
        if c != 0.0 {
            let dpsi = comps(p.r + (s as f64 - 3.0) * hr, p.t)?.deriv;
            for l in 0..n_l {
                d2[l] += c * dpsi[l] / hr;
            }
        }
    }
    let mut kinetic = C64::new(0.0, 0.0);
    let mut kinetic_terms = 0.0;
    for l in 0..n_l {
        let ll = (l * (l + 1)) as f64;
        let parts = [d2[l], 2.0 * d1[l] / p.r, -ll * center[l] / (p.r * p.r)];
        kinetic += -0.5 * y[l] * parts.iter().sum::<C64>();
        kinetic_terms += 0.5 * y[l].abs() * parts.iter().map(|v| v.norm()).sum::<f64>();
    }
    let phi = combine(&center, &y);
    let mut dt = C64::new(0.0, 0.0);
    for (s, &c) in FIRST.iter().enumerate() {
        if c != 0.0 {
            dt += c * combine(&eval(p.r, p.t + (s as f64 - 3.0) * STEP_T)?, &y) / STEP_T;
        }
    }
    // phi carries exp(-i omega t): i d_t adds omega phi
    let lhs = sol.omega * phi + C64::new(0.0, 1.0) * dt;
    let pots = potential(field, side, p.r, p.theta, p.t);
    let pot_sum: f64 = pots.iter().sum();
    let residual = lhs - kinetic - pot_sum * phi;
    let scale = lhs.norm() + kinetic_terms + pots.iter().map(|v| v.abs()).sum::<f64>() * phi.norm();
    Ok(if scale > 0.0 { residual.norm() / scale } else { 0.0 })
}

/// Jump of each retained (Fourier index, l) component of phi and d_r phi
/// across r = d, relative to the largest interior component.
fn matching_jump(field: &Field) -> Result<f64, ObservableError> {
    let sol = field.solution;
    let d = sol.well.d;
    let n = 2 * sol.truncation.n_t;
    let basis = &sol.basis;
    let mut jump = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); basis.len()];
    let mut inner = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); basis.len()];
    for q in 0..n {
        let t = std::f64::consts::PI * q as f64 / n as f64;
        let a = field.interior(d, t)?;
        let b = field.exterior(d, t)?;
        for (i, &(p, l)) in basis.iter().enumerate() {
            let w = C64::from_polar(1.0 / n as f64, 2.0 * p as f64 * t);
            jump[i].0 += w * (a.value[l] - b.value[l]);
            jump[i].1 += w * (a.deriv[l] - b.deriv[l]);
            inner[i].0 += w * a.value[l];
            inner[i].1 += w * a.deriv[l];
        }
    }
    let scale = inner.iter().map(|v| v.0.norm()).fold(0.0, f64::max);
    let dscale = inner.iter().map(|v| v.1.norm()).fold(0.0, f64::max) + scale / d;
    let floor = f64::MIN_POSITIVE;
    Ok(jump.iter().map(|v| (v.0.norm() / scale.max(floor)).max(v.1.norm() / dscale.max(floor))).fold(0.0, f64::max))
}

/// Plugs the solution into the time-dependent equation on each side at the
/// sample points, and checks the matching conditions at r = d.
pub fn residual_verify(solution: &FloquetSolution, points: &[SamplePoint]) -> Result<VerifyReport, ObservableError> {
    let field = Field::new(solution, DEFAULT_EPS_FLUX);
    let pointwise: Vec<f64> = points.iter().map(|p| point_residual(&field, p)).collect::<Result<_, _>>()?;
    let continuity = matching_jump(&field)?;
    let d = solution.well.d;
    let mut jumps = Vec::with_capacity(points.len());
    let (mut phi_scale, mut dphi_scale) = (0.0f64, 0.0f64);
    for p in points {
        let y = angular(&field, p.theta);
        let inner = field.interior(d, p.t)?;
        let outer = field.exterior(d, p.t)?;
        let (vi, vo) = (combine(&inner.value, &y), combine(&outer.value, &y));
        let (di, dd) = (combine(&inner.deriv, &y), combine(&outer.deriv, &y));
        phi_scale = phi_scale.max(vi.norm()).max(vo.norm());
        dphi_scale = dphi_scale.max(di.norm()).max(dd.norm());
        jumps.push(((vi - vo).norm(), (di - dd).norm()));
    }
    let dphi_scale = dphi_scale + phi_scale / d;
    let truncation_jump = jumps
        .iter()
        .map(|&(a, b)| (a / phi_scale.max(f64::MIN_POSITIVE)).max(b / dphi_scale.max(f64::MIN_POSITIVE)))
        .fold(0.0, f64::max);
    let max_relative = pointwise.iter().copied().fold(continuity, f64::max);
    Ok(VerifyReport { max_relative, pointwise, continuity, truncation_jump })
}
