#![allow(dead_code)]

use floquet_core::channels::{well_from_a, Boundary, DriveWaveform, Variant};
use floquet_core::matching::{pole_solve, FloquetSolution, Problem, SolverOptions};
use floquet_core::waves::{Parity, TruncationScheme};
use floquet_core::C64;

/// Loosely bound s-wave well, default truncation.
pub fn swave(variant: Variant) -> Problem {
    let well = well_from_a(-0.504, 0.557, variant).unwrap();
    let tr = TruncationScheme::new(6, 6, 8, 64, Parity::Even).unwrap();
    Problem::new(well, DriveWaveform::new(0.0), tr, SolverOptions::default())
}

pub fn swave_seed(problem: &Problem, boundary: Boundary) -> FloquetSolution {
    pole_solve(problem, C64::new(-8.6e-5, 0.0), boundary).unwrap()
}

/// Deep well holding a bound p-wave just below -2.
pub fn pwave() -> Problem {
    let well = well_from_a(-2.565, 6.75, Variant::P1).unwrap();
    let tr = TruncationScheme::new(8, 8, 10, 64, Parity::Odd).unwrap();
    Problem::new(well, DriveWaveform::new(0.0), tr, SolverOptions::default())
}

pub fn pwave_seed(problem: &Problem) -> FloquetSolution {
    pole_solve(problem, C64::new(-2.0244, 0.0), Boundary::Emission).unwrap()
}

/// Same depth as `pwave`, even sector, for s-wave scattering.
pub fn pwave_scattering() -> Problem {
    let p = pwave();
    p.with_truncation(TruncationScheme::new(8, 8, 10, 64, Parity::Even).unwrap())
}

/// Static bound energies of the square well, from the 1D matching equations
/// written out for l = 0 and l = 1. Returns the deepest state per l.
pub mod oracle {
    /// Sign changes of g on (0, a), refined by bisection.
    fn roots(a: f64, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = 20000;
        let y = |x: f64| (a * a - x * x).max(0.0).sqrt();
        let mut out = Vec::new();
        let mut prev_x = 1e-9;
        let mut prev = g(prev_x, y(prev_x));
        for i in 1..=n {
            let x = a * i as f64 / n as f64 * (1.0 - 1e-12);
            let v = g(x, y(x));
            if prev * v < 0.0 {
                let (mut lo, mut hi, mut flo) = (prev_x, x, prev);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = g(mid, y(mid));
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = v;
        }
        out
    }

    fn energy(x: f64, a: f64, d: f64) -> f64 {
        -(a * a - x * x) / (2.0 * d * d)
    }

    /// Bound energies of the given l (0 or 1), deepest first.
    pub fn states(l: usize, v0: f64, d: f64) -> Vec<f64> {
        let a = (2.0 * v0).sqrt() * d;
        let xs = match l {
            0 => roots(a, |x, y| x * x.cos() + y * x.sin()),
            1 => roots(a, |x, y| x * x * x.sin() * (1.0 + y) + y * y * (x.sin() - x * x.cos())),
            _ => unimplemented!("oracle covers l = 0 and 1"),
        };
        xs.into_iter().map(|x| energy(x, a, d)).collect()
    }

    pub fn s_state(v0: f64, d: f64) -> Option<f64> {
        states(0, v0, d).first().copied()
    }

    pub fn p_state(v0: f64, d: f64) -> Option<f64> {
        states(1, v0, d).first().copied()
    }
}
