use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::field::{Components, Field};
use super::ObservableError;
use crate::channels::DEFAULT_EPS_FLUX;
use crate::matching::FloquetSolution;
use crate::specfun::{gauss_legendre, legendre_p, Axis};

const DECAYED: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// r^power; power 0 is the identity.
    Radial { power: i32 },
    AngularMomentumSq,
    /// z-component of the position vector (x and y vanish for m = 0).
    Position,
    /// Diagonal second moment r_a r_a.
    SecondMoment(Axis),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Interior,
    Exterior,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialQuadrature {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Interior panels on [0, d].
    pub interior_panels: usize,
    /// Width of the first exterior panel; later panels double.
    pub first_width: f64,
    pub max_radius: f64,
    /// Stop once a panel adds less than this fraction of the running total.
    pub rel_tol: f64,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self { nodes: 40, interior_panels: 2, first_width: 0.5, max_radius: 1e5, rel_tol: 1e-16 }
    }
}

/// Unnormalized integral, the norm in the same region, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub integral: f64,
    pub norm: f64,
    pub value: f64,
    /// Exponential-tail estimate beyond the last exterior panel.
    pub tail: f64,
}

struct Angular {
    x: Vec<f64>,
    w: Vec<f64>,
    /// N_l P_l(x) and N_l dP_l/dtheta per node.
    p: Vec<Vec<f64>>,
    dp: Vec<Vec<f64>>,
}

impl Angular {
    fn new(field: &Field) -> Self {
        let n_l = field.n_l();
        let (x, w) = gauss_legendre(n_l + 4);
        let norm = |l| field.tables.norm(l);
        let p = x.iter().map(|&xi| (0..n_l).map(|l| norm(l) * legendre_p(l, 0, xi).unwrap()).collect()).collect();
        let dp = x
            .iter()
            .map(|&xi| (0..n_l).map(|l| if l == 0 { 0.0 } else { norm(l) * legendre_p(l, 1, xi).unwrap() }).collect())
            .collect();
        Self { x, w, p, dp }
    }
}

/// Angular integral of the operator at one radius; r^2 dr is applied by the caller.
fn angular_density(
    field: &Field,
    op: OperatorKind,
    psi: &[C64],
    r: f64,
    fdot: Option<f64>,
    ang: &Angular,
) -> f64 {
    let n_l = psi.len();
    let pair = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for l in 0..n_l {
            for lp in 0..n_l {
                let c = f(l, lp);
                if c != 0.0 {
                    acc += c * (psi[l].conj() * psi[lp]).re;
                }
            }
        }
        acc
    };
    match op {
        OperatorKind::Radial { power } => psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * r.powi(power),
        OperatorKind::Position => pair(&|l, lp| field.tables.p(l, lp)) * r,
        OperatorKind::SecondMoment(axis) => pair(&|l, lp| field.tables.q(axis, l, lp)) * r * r,
        OperatorKind::AngularMomentumSq => match fdot {
            // the stripped field lacks e^{i Fdot r cos theta}; restore its theta derivative
            Some(v) if v != 0.0 => {
                let mut acc = 0.0;
                for (i, &x) in ang.x.iter().enumerate() {
                    let s = (1.0 - x * x).max(0.0).sqrt();
                    let mut chi = C64::new(0.0, 0.0);
                    let mut dchi = C64::new(0.0, 0.0);
                    for l in 0..n_l {
                        chi += psi[l] * ang.p[i][l];
                        dchi += psi[l] * ang.dp[i][l];
                    }
                    let d = dchi - C64::new(0.0, v * r * s) * chi;
                    acc += ang.w[i] * d.norm_sqr();
                }
                2.0 * std::f64::consts::PI * acc
            }
            _ => psi.iter().enumerate().map(|(l, v)| (l * (l + 1)) as f64 * v.norm_sqr()).sum(),
        },
    }
}

fn check_axial(solution: &FloquetSolution) -> Result<(), ObservableError> {
    if solution.well.m != 0 {
        return Err(ObservableError::NeedsAxialSymmetry("expectation_radial"));
    }
    Ok(())
}

fn interior_integral(field: &Field, ops: &[OperatorKind], t: f64, quad: &RadialQuadrature) -> Result<Vec<f64>, ObservableError> {
    let d = field.solution.well.d;
    let (x, w) = gauss_legendre(quad.nodes);
    let ang = Angular::new(field);
    let mut acc = vec![0.0; ops.len()];
    let h = d / quad.interior_panels as f64;
    for p in 0..quad.interior_panels {
        let (a, b) = (p as f64 * h, (p + 1) as f64 * h);
        for (&xi, &wi) in x.iter().zip(&w) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let Components { value, .. } = field.interior(r, t)?;
            for (o, &op) in acc.iter_mut().zip(ops) {
                *o += 0.5 * (b - a) * wi * r * r * angular_density(field, op, &value, r, None, &ang);
            }
        }
    }
    Ok(acc)
}

fn exterior_channels(field: &Field) -> Vec<i32> {
    let sol = field.solution;
    let first = sol.first_index();
    sol.k.iter().enumerate().filter(|(_, k)| k.im > 0.0).map(|(i, _)| first + i as i32).collect()
}

/// Exterior integral of each operator over the listed channels, plus a tail
/// estimate. Every channel must decay (Im k > 0).
pub fn exterior_integral(
    solution: &FloquetSolution,
    channels: &[i32],
    ops: &[OperatorKind],
    t: f64,
    quad: &RadialQuadrature,
    eps_flux: f64,
) -> Result<(Vec<f64>, f64), ObservableError> {
    check_axial(solution)?;
    for &j in channels {
        let k = solution.k_of(j);
        if !(k.im > 0.0) {
            return Err(ObservableError::NotSquareIntegrable { j, im_k: k.im });
        }
    }
    let field = Field::new(solution, eps_flux);
    exterior_integral_field(&field, channels, ops, t, quad)
}

fn exterior_integral_field(
    field: &Field,
    channels: &[i32],
    ops: &[OperatorKind],
    t: f64,
    quad: &RadialQuadrature,
) -> Result<(Vec<f64>, f64), ObservableError> {
    let sol = field.solution;
    let mut acc = vec![0.0; ops.len()];
    if channels.is_empty() {
        return Ok((acc, 0.0));
    }
    let slowest = channels.iter().map(|&j| sol.k_of(j).im).fold(f64::INFINITY, f64::min);
    let fdot = field.drive.velocity(t);
    let (x, w) = gauss_legendre(quad.nodes);
    let ang = Angular::new(field);
    // |psi|^2 of a channel past Im k r = DECAYED is below e^{-2 DECAYED} of its value at d
    let alive = |j: i32, r: f64| channels.contains(&j) && sol.k_of(j).im * (r - sol.well.d) < DECAYED;
    let mut a = sol.well.d;
    let mut width = quad.first_width;
    let mut last_edge = 0.0;
    let mut panels = 0;
    while a < quad.max_radius && channels.iter().any(|&j| alive(j, a)) {
        let b = (a + width).min(quad.max_radius);
        let mut panel = vec![0.0; ops.len()];
        for (&xi, &wi) in x.iter().zip(&w) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let c = field.exterior_stripped(r, t, |j| alive(j, r))?;
            for (o, &op) in panel.iter_mut().zip(ops) {
                *o += 0.5 * (b - a) * wi * r * r * angular_density(field, op, &c.value, r, Some(fdot), &ang);
            }
        }
        for (o, p) in acc.iter_mut().zip(&panel) {
            *o += p;
        }
        let edge = field.exterior_stripped(b, t, |j| alive(j, b))?;
        last_edge = b * b * edge.value.iter().map(|v| v.norm_sqr()).sum::<f64>();
        panels += 1;
        let small = panel.iter().zip(&acc).all(|(p, s)| p.abs() <= quad.rel_tol * s.abs().max(f64::MIN_POSITIVE));
        if panels >= 4 && small {
            break;
        }
        a = b;
        width *= 2.0;
    }
    // |psi|^2 r^2 ~ exp(-2 Im k r) beyond the cutoff
    let tail = last_edge / (2.0 * slowest);
    Ok((acc, tail))
}

pub fn expectation_radial(
    solution: &FloquetSolution,
    op: OperatorKind,
    region: Region,
    t: f64,
) -> Result<Expectation, ObservableError> {
    expectation_radial_with(solution, op, region, t, &RadialQuadrature::default(), DEFAULT_EPS_FLUX)
}

/// Integral of the operator over the region at time t, and its ratio to the
/// norm over the same region. Only square-integrable exterior channels enter.
pub fn expectation_radial_with(
    solution: &FloquetSolution,
    op: OperatorKind,
    region: Region,
    t: f64,
    quad: &RadialQuadrature,
    eps_flux: f64,
) -> Result<Expectation, ObservableError> {
    check_axial(solution)?;
    let field = Field::new(solution, eps_flux);
    let ops = [op, OperatorKind::Radial { power: 0 }];
    let mut total = [0.0; 2];
    let mut tail = 0.0;
    if region != Region::Exterior {
        let v = interior_integral(&field, &ops, t, quad)?;
        total[0] += v[0];
        total[1] += v[1];
    }
    if region != Region::Interior {
        let channels = exterior_channels(&field);
        let (v, tl) = exterior_integral_field(&field, &channels, &ops, t, quad)?;
        total[0] += v[0];
        total[1] += v[1];
        tail = tl;
    }
    Ok(Expectation { integral: total[0], norm: total[1], value: total[0] / total[1], tail })
}
