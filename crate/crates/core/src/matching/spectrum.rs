use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::specfun::{spherical_bessel_j, spherical_bessel_j_deriv, spherical_hankel, spherical_hankel_deriv, HankelKind};

const SCAN_PER_UNIT: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub l: usize,
    /// 0 for the deepest state of this l.
    pub index: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Vary -A/pi at fixed radius.
    AOverPi { d: f64 },
    /// Vary V0 at fixed A/pi.
    Depth { a_over_pi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub parameter: f64,
    pub v0: f64,
    pub d: f64,
    pub states: Vec<BoundState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub parameter: f64,
    pub lower: BoundState,
    pub upper: BoundState,
    /// upper - lower = 2 * quanta at the crossing.
    pub quanta: i32,
    pub mismatch: f64,
}

/// Matching mismatch x j_l'(x) - j_l(x) * y k_l'(y)/k_l(y) with x^2 + y^2 = A^2.
fn mismatch(l: usize, x: f64, a: f64) -> f64 {
    let y = (a * a - x * x).max(0.0).sqrt();
    let z = C64::new(x, 0.0);
    let jl = spherical_bessel_j(l, z).unwrap().re;
    let jd = spherical_bessel_j_deriv(l, z).unwrap().re;
    let iy = C64::new(0.0, y);
    let h = spherical_hankel(HankelKind::First, l, iy).unwrap();
    let hd = spherical_hankel_deriv(HankelKind::First, l, iy).unwrap();
    let log_deriv = (iy * hd / h).re;
    x * jd - jl * log_deriv
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All static bound states of the square well with angular momentum <= l_max.
pub fn static_bound_states(v0: f64, d: f64, l_max: usize) -> Vec<BoundState> {
    let a = (2.0 * v0).sqrt() * d;
    let samples = ((SCAN_PER_UNIT * a).ceil() as usize).max(2000);
    let mut out = Vec::new();
    for l in 0..=l_max {
        let xs: Vec<f64> = (0..=samples).map(|i| a * (i as f64 + 1e-6) / (samples as f64 + 2e-6)).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| mismatch(l, x, a)).collect();
        let mut roots: Vec<f64> = Vec::new();
        for i in 0..samples {
            if vals[i] == 0.0 {
                roots.push(xs[i]);
            } else if vals[i] * vals[i + 1] < 0.0 {
                roots.push(bisect(xs[i], xs[i + 1], |x| mismatch(l, x, a)));
            }
        }
        // deepest state has the smallest interior momentum
        for (index, x) in roots.into_iter().enumerate() {
            let y2 = a * a - x * x;
            out.push(BoundState { l, index, omega: -y2 / (2.0 * d * d) });
        }
    }
    out
}

fn point(axis: SweepAxis, value: f64, l_max: usize) -> SpectrumPoint {
    let (v0, d) = match axis {
        SweepAxis::AOverPi { d } => {
            let a = value.abs() * std::f64::consts::PI;
            (a * a / (2.0 * d * d), d)
        }
        SweepAxis::Depth { a_over_pi } => (value, a_over_pi.abs() * std::f64::consts::PI / (2.0 * value).sqrt()),
    };
    SpectrumPoint { parameter: value, v0, d, states: static_bound_states(v0, d, l_max) }
}

/// Bound-state table along a parameter sweep (F2 = 0).
pub fn static_spectrum(axis: SweepAxis, values: &[f64], l_max: usize) -> Vec<SpectrumPoint> {
    values.iter().map(|&v| point(axis, v, l_max)).collect()
}

fn find(states: &[BoundState], l: usize, index: usize) -> Option<f64> {
    states.iter().find(|s| s.l == l && s.index == index).map(|s| s.omega)
}

/// Parameter values where two bound energies differ by a nonzero multiple of
/// the drive quantum 2, located by sign change on `values` and refined by
/// bisection.
pub fn degeneracy_scan(axis: SweepAxis, values: &[f64], l_max: usize) -> Vec<Degeneracy> {
    let pts = static_spectrum(axis, values, l_max);
    let mut found = Vec::new();
    for w in pts.windows(2) {
        let (p0, p1) = (&w[0], &w[1]);
        for s in &p0.states {
            for u in &p0.states {
                if (u.l, u.index) <= (s.l, s.index) {
                    continue;
                }
                let (Some(s1), Some(u1)) = (find(&p1.states, s.l, s.index), find(&p1.states, u.l, u.index)) else {
                    continue;
                };
                let gap0 = u.omega - s.omega;
                let quanta = (gap0 / 2.0).round() as i32;
                if quanta == 0 {
                    continue;
                }
                let f0 = gap0 - 2.0 * quanta as f64;
                let f1 = (u1 - s1) - 2.0 * quanta as f64;
                if f0 * f1 > 0.0 {
                    continue;
                }
                let gap = |v: f64| {
                    let pt = point(axis, v, l_max);
                    match (find(&pt.states, s.l, s.index), find(&pt.states, u.l, u.index)) {
                        (Some(a), Some(b)) => b - a - 2.0 * quanta as f64,
                        _ => f64::NAN,
                    }
                };
                let v = bisect(p0.parameter, p1.parameter, gap);
                let pt = point(axis, v, l_max);
                let lower = *pt.states.iter().find(|x| x.l == s.l && x.index == s.index).unwrap();
                let upper = *pt.states.iter().find(|x| x.l == u.l && x.index == u.index).unwrap();
                let (lower, upper, q) =
                    if upper.omega >= lower.omega { (lower, upper, quanta) } else { (upper, lower, -quanta) };
                found.push(Degeneracy {
                    parameter: v,
                    lower,
                    upper,
                    quanta: q,
                    mismatch: upper.omega - lower.omega - 2.0 * q as f64,
                });
            }
        }
    }
    found
}
