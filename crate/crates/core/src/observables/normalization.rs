use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::ObservableError;
use crate::matching::FloquetSolution;
use crate::specfun::{bessel_j_seq, derivative_seq};
use crate::waves::WaveError;

/// Time-dependent interior norm assembled from boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorNorm {
    pub t: f64,
    pub total: f64,
    pub per_l: Vec<f64>,
}

/// (u, u') at d for u = c r j_l(kappa r).
fn boundary_values(l: usize, kappa: C64, c: C64, d: f64) -> Result<(C64, C64), WaveError> {
    let mut j = vec![C64::new(0.0, 0.0); l + 2];
    bessel_j_seq(kappa * d, &mut j)?;
    let mut jd = vec![C64::new(0.0, 0.0); l + 1];
    derivative_seq(&j, &mut jd);
    Ok((c * d * j[l], c * (j[l] + kappa * d * jd[l])))
}

/// kappa with kappa^2 / 2 = eps on the branch nearest `near`.
fn momentum(eps: C64, near: C64) -> C64 {
    let k = (2.0 * eps).sqrt();
    if (k - near).norm() <= (k + near).norm() {
        k
    } else {
        -k
    }
}

/// int_0^d u1* u2 dr for u_i = c_i r j_l(kappa_i r), from the Wronskian-type
/// bracket at r = d. Coincident conjugate energies go through the limit.
pub fn boundary_projection(
    l: usize,
    (kappa1, c1): (C64, C64),
    (kappa2, c2): (C64, C64),
    d: f64,
) -> Result<C64, ObservableError> {
    let (u1, du1) = boundary_values(l, kappa1, c1, d)?;
    let eps1 = 0.5 * kappa1 * kappa1;
    let eps2 = 0.5 * kappa2 * kappa2;
    let bracket = |eps: C64| -> Result<C64, ObservableError> {
        let (u2, du2) = boundary_values(l, momentum(eps, kappa2), c2, d)?;
        Ok((u1.conj() * du2 - u2 * du1.conj()) / (2.0 * (eps1.conj() - eps)))
    };
    let scale = eps2.norm().max(0.1);
    let gap = (eps1.conj() - eps2).norm();
    if gap >= 1e-3 * scale {
        return bracket(eps2);
    }
    // the bracket ratio is entire in eps2; average it over circles around eps2
    let h = (1e-2 * scale).max(10.0 * gap);
    let circle = |rad: f64| -> Result<C64, ObservableError> {
        let mut s = C64::new(0.0, 0.0);
        for q in 0..4 {
            let off = C64::from_polar(rad, std::f64::consts::FRAC_PI_4 + q as f64 * std::f64::consts::FRAC_PI_2);
            s += bracket(eps2 + off)?;
        }
        Ok(0.25 * s)
    };
    let (g1, g2) = (circle(h)?, circle(0.5 * h)?);
    Ok((16.0 * g2 - g1) / 15.0)
}

/// Interior norm int_{r<d} |phi|^2 at time t, from values and derivatives at
/// r = d only.
pub fn boundary_normalization(solution: &FloquetSolution, t: f64) -> Result<InteriorNorm, ObservableError> {
    if solution.well.variant.driven_interior() {
        return Err(ObservableError::DrivenInterior("boundary_normalization"));
    }
    let d = solution.well.d;
    let n_l = solution.truncation.l_max + 1;
    let mut per_l = vec![0.0; n_l];
    let terms: Vec<(i32, usize, C64)> = solution
        .basis
        .iter()
        .zip(&solution.a)
        .map(|(&(n, l), &a)| (n, l, a * C64::from_polar(1.0, -2.0 * n as f64 * t)))
        .collect();
    for (i, &(n1, l1, c1)) in terms.iter().enumerate() {
        for &(n2, l2, c2) in &terms[i..] {
            if l1 != l2 {
                continue;
            }
            let v = boundary_projection(l1, (solution.kappa_of(n1), c1), (solution.kappa_of(n2), c2), d)?;
            per_l[l1] += if n1 == n2 { v.re } else { 2.0 * v.re };
        }
    }
    Ok(InteriorNorm { t, total: per_l.iter().sum(), per_l })
}
