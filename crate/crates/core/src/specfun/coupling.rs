use num_complex::Complex64 as C64;

use super::legendre::{gauss_legendre, legendre_p};
use super::SpecFunError;

/// (-1)^m sqrt((2l+1)/4pi) sqrt((l-m)!/(l+m)!)
pub fn spherical_norm(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt() * ratio.sqrt()
}

pub(crate) fn i_pow(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Triple-product overlap of associated Legendre functions, divided by the
/// norm of P_{l3}^{m3}.
pub fn triple_overlap_w(
    (l1, m1): (usize, usize),
    (l2, m2): (usize, usize),
    (l3, m3): (usize, usize),
) -> Result<f64, SpecFunError> {
    if m1 > l1 || m2 > l2 || m3 > l3 {
        return Err(SpecFunError::Domain("triple_overlap_w requires m <= l"));
    }
    let n = (l1 + l2 + l3) / 2 + 1 + 4;
    let (x, w) = gauss_legendre(n);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        s += wi * legendre_p(l1, m1, *xi)? * legendre_p(l2, m2, *xi)? * legendre_p(l3, m3, *xi)?;
    }
    let mut fact_ratio = 1.0;
    for k in (l3 - m3 + 1)..=(l3 + m3) {
        fact_ratio *= k as f64;
    }
    let pref = 2.0 * fact_ratio / (2 * l3 + 1) as f64;
    Ok(s / pref)
}

/// Static angular coupling tables for one (max_l, m).
#[derive(Debug, Clone)]
pub struct CouplingTables {
    max_l: usize,
    m: usize,
    w_table: Vec<f64>,
    w_right: Vec<f64>,
    c3_table: Vec<C64>,
    right_table: Vec<C64>,
    c5_table: Vec<C64>,
    n_table: Vec<f64>,
    p_table: Vec<f64>,
    q_table: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl CouplingTables {
    pub fn new(max_l: usize, m: usize) -> Self {
        let n = max_l + 1;
        let nodes = (3 * max_l) / 2 + 8;
        let (x, w) = gauss_legendre(nodes);
        let pm: Vec<Vec<f64>> = (0..n)
            .map(|l| {
                x.iter()
                    .map(|&xi| if m <= l { legendre_p(l, m, xi).unwrap() } else { 0.0 })
                    .collect()
            })
            .collect();
        let p0: Vec<Vec<f64>> = (0..n)
            .map(|l| x.iter().map(|&xi| legendre_p(l, 0, xi).unwrap()).collect())
            .collect();
        let norm_m: Vec<f64> = (0..n)
            .map(|l| {
                if m > l {
                    return f64::NAN;
                }
                let mut f = 1.0;
                for k in (l - m + 1)..=(l + m) {
                    f *= k as f64;
                }
                2.0 * f / (2 * l + 1) as f64
            })
            .collect();
        let integ = |a: &[f64], b: &[f64], c: &[f64]| -> f64 {
            a.iter().zip(b).zip(c).zip(&w).map(|(((a, b), c), w)| a * b * c * w).sum()
        };
        let mut w_table = vec![0.0; n * n * n];
        let mut w_right = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in m..n {
                    let triangle = c <= a + b && a <= b + c && b <= a + c;
                    if (a + b + c + m).is_multiple_of(2) && (m != 0 || triangle) {
                        let v = integ(&p0[a], &p0[b], &pm[c]) / norm_m[c];
                        w_table[(a * n + b) * n + c] = clean(v);
                    }
                    // P_a^m P_c^m is a polynomial of degree a + c
                    if a >= m && triangle && (a + b + c) % 2 == 0 {
                        let v2 = integ(&pm[a], &p0[b], &pm[c]) / norm_m[c];
                        w_right[(a * n + b) * n + c] = clean(v2);
                    }
                }
            }
        }
        let n_table: Vec<f64> = (0..n)
            .map(|l| if m <= l { spherical_norm(l, m) } else { f64::NAN })
            .collect();
        let mut c3_table = vec![C64::new(0.0, 0.0); n * n * n];
        let mut right_table = vec![C64::new(0.0, 0.0); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let idx = (a * n + b) * n + c;
                    c3_table[idx] = 2.0
                        * (2 * b + 1) as f64
                        * i_pow(-(b as i64))
                        * i_pow(c as i64 - m as i64)
                        * w_table[idx];
                    if c >= m {
                        right_table[idx] =
                            (2 * b + 1) as f64 * i_pow(b as i64) * w_right[idx] / n_table[c];
                    }
                }
            }
        }
        let mut c5_table = vec![C64::new(0.0, 0.0); n * n * n * n * n];
        for l1 in 0..n {
            for l2 in 0..n {
                for l3 in 0..n {
                    let c3 = c3_table[(l1 * n + l2) * n + l3];
                    if c3 == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for l4 in 0..n {
                        for l in 0..n {
                            c5_table[(((l1 * n + l2) * n + l3) * n + l4) * n + l] =
                                c3 * right_table[(l3 * n + l4) * n + l];
                        }
                    }
                }
            }
        }
        let n0: Vec<f64> = (0..n).map(|l| spherical_norm(l, 0)).collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut p_table = vec![0.0; n * n];
        let mut q_table = vec![0.0; 3 * n * n];
        for a in 0..n {
            for b in 0..n {
                let mut pz = 0.0;
                let mut qz = 0.0;
                let mut qx = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    let pp = p0[a][i] * p0[b][i] * w[i];
                    pz += xi * pp;
                    qz += xi * xi * pp;
                    qx += 0.5 * (1.0 - xi * xi) * pp;
                }
                let pref = two_pi * n0[a] * n0[b];
                if a.abs_diff(b) == 1 {
                    p_table[a * n + b] = clean(pref * pz);
                }
                if matches!(a.abs_diff(b), 0 | 2) {
                    q_table[a * n + b] = clean(pref * qx);
                    q_table[n * n + a * n + b] = clean(pref * qx);
                    q_table[2 * n * n + a * n + b] = clean(pref * qz);
                }
            }
        }
        Self { max_l, m, w_table, w_right, c3_table, right_table, c5_table, n_table, p_table, q_table }
    }

    pub fn max_l(&self) -> usize {
        self.max_l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn n(&self) -> usize {
        self.max_l + 1
    }

    fn check(&self, idx: &[usize]) -> Result<(), SpecFunError> {
        match idx.iter().find(|&&l| l > self.max_l) {
            Some(&l) => Err(SpecFunError::OutOfTable { l, max_l: self.max_l }),
            None => Ok(()),
        }
    }

    /// W(P_{l1}, P_{l2}, P_{l3}^m)
    pub fn w(&self, l1: usize, l2: usize, l3: usize) -> f64 {
        let n = self.n();
        self.w_table[(l1 * n + l2) * n + l3]
    }

    /// W(P_{l3}^m, P_{l4}, P_l^m)
    pub fn w_right(&self, l3: usize, l4: usize, l: usize) -> f64 {
        let n = self.n();
        self.w_right[(l3 * n + l4) * n + l]
    }

    #[inline]
    pub fn c3(&self, l1: usize, l2: usize, l3: usize) -> C64 {
        let n = self.n();
        self.c3_table[(l1 * n + l2) * n + l3]
    }

    /// The (l3, l4, l) factor of c5: (2l4+1) i^{l4} W(P_{l3}^m, P_{l4}, P_l^m) / N_l^m.
    #[inline]
    pub fn right(&self, l3: usize, l4: usize, l: usize) -> C64 {
        let n = self.n();
        self.right_table[(l3 * n + l4) * n + l]
    }

    pub fn coupling_c5(&self, l1: usize, l2: usize, l3: usize, l4: usize, l: usize) -> Result<C64, SpecFunError> {
        self.check(&[l1, l2, l3, l4, l])?;
        let n = self.n();
        Ok(self.c5_table[(((l1 * n + l2) * n + l3) * n + l4) * n + l])
    }

    #[inline]
    pub fn norm(&self, l: usize) -> f64 {
        self.n_table[l]
    }

    pub fn p(&self, l: usize, lp: usize) -> f64 {
        self.p_table[l * self.n() + lp]
    }

    pub fn q(&self, axis: Axis, l: usize, lp: usize) -> f64 {
        let n = self.n();
        let a = match axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        };
        self.q_table[a * n * n + l * n + lp]
    }
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}
