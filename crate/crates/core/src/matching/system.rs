use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::{MatchError, Problem};
use crate::channels::Side;
use crate::specfun::{i_pow, spherical_norm};
use crate::waves::{fourier_blocks, interior_basis, interior_momenta, FourierBlocks, Kernel, WaveError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const MAX_NT_DOUBLINGS: usize = 3;

/// Matching blocks at one omega. Rows are (n, l), interior columns (n, l1),
/// exterior columns (j, l1), all in `basis` order.
///
/// Interior columns carry a factor kappa^{-l1} so they are even in kappa and
/// entire in omega; exterior columns carry N_{l1}^m k^{l1+1} (no flux
/// factor), which removes the pole of h_l at k = 0.
#[derive(Debug, Clone)]
pub struct MatchingSystem {
    pub basis: Vec<(i32, usize)>,
    pub c: DMatrix<C64>,
    pub f: DMatrix<C64>,
    pub d: DMatrix<C64>,
    pub g: DMatrix<C64>,
    /// Incoming-kernel column for a scattering input channel.
    pub incoming: Option<(usize, DVector<C64>, DVector<C64>)>,
    pub k: Vec<C64>,
    pub kappa: Vec<C64>,
    /// a_natural = interior_scale * a_column.
    pub interior_scale: Vec<C64>,
    /// Coefficient of N_{l1} R = exterior_scale * b_column.
    pub exterior_scale: Vec<C64>,
    /// N_t actually used after aliasing retries.
    pub n_t: usize,
}

impl MatchingSystem {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    /// K = [[C, -D], [F, -G]]
    pub fn k_matrix(&self) -> DMatrix<C64> {
        let n = self.size();
        let mut k = DMatrix::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&self.c);
        k.view_mut((0, n), (n, n)).copy_from(&(-&self.d));
        k.view_mut((n, 0), (n, n)).copy_from(&self.f);
        k.view_mut((n, n), (n, n)).copy_from(&(-&self.g));
        k
    }

    /// M = G - F C^{-1} D
    pub fn reduced(&self) -> Result<DMatrix<C64>, MatchError> {
        let lu = self.c.clone().lu();
        let cmax = self.c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let u = lu.u();
        let umin = u.diagonal().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(umin > 1e-13 * cmax) {
            return Err(MatchError::SingularInterior);
        }
        let x = lu.solve(&self.d).ok_or(MatchError::SingularInterior)?;
        Ok(&self.g - &self.f * x)
    }
}

/// Frozen row/column scaling of K.
#[derive(Debug, Clone)]
pub struct Equilibration {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
}

impl Equilibration {
    pub fn from_matrix(k: &DMatrix<C64>) -> Self {
        let (nr, nc) = k.shape();
        let rows: Vec<f64> = (0..nr)
            .map(|i| {
                let m = (0..nc).map(|j| k[(i, j)].norm()).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        let cols: Vec<f64> = (0..nc)
            .map(|j| {
                let m = (0..nr).map(|i| rows[i] * k[(i, j)].norm()).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        Self { rows, cols }
    }

    pub fn apply(&self, k: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = k.clone();
        for ((i, j), v) in out.iter_mut().enumerate().map(|(idx, v)| ((idx % k.nrows(), idx / k.nrows()), v)) {
            *v *= self.rows[i] * self.cols[j];
        }
        out
    }
}

/// log det via LU with partial pivoting.
pub fn log_det(m: DMatrix<C64>) -> C64 {
    let lu = m.lu();
    let sign: C64 = lu.p().determinant();
    let u = lu.u();
    let mut acc = sign.ln();
    for v in u.diagonal().iter() {
        acc += v.ln();
    }
    acc
}

fn blocks_with_retry(
    problem: &Problem,
    side: Side,
    kernel: Kernel,
    first: i32,
    momenta: &[C64],
) -> Result<(FourierBlocks, usize), MatchError> {
    let mut trunc = problem.truncation;
    for _ in 0..=MAX_NT_DOUBLINGS {
        match fourier_blocks(&problem.tables, &problem.well, &problem.drive, side, kernel, first, momenta, &trunc) {
            Ok(b) => return Ok((b, trunc.n_t)),
            Err(WaveError::Aliasing { .. }) => trunc.n_t *= 2,
            Err(e) => return Err(e.into()),
        }
    }
    Err(WaveError::Aliasing { n_t: trunc.n_t, ratio: f64::NAN }.into())
}

fn kappa_scale(kappa: C64, l: usize) -> C64 {
    if kappa.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        kappa.powi(-(l as i32))
    }
}

/// Builds C, F, D, G at omega for the given exterior momenta (one per
/// Fourier index). `incoming` adds the h^(2) column of one channel.
pub fn assemble(
    problem: &Problem,
    omega: C64,
    k_ext: &[C64],
    incoming: Option<(i32, usize)>,
) -> Result<MatchingSystem, MatchError> {
    let trunc = &problem.truncation;
    let basis = trunc.basis();
    let n = basis.len();
    let pos: HashMap<(i32, usize), usize> = basis.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let m = problem.well.m;
    let j0 = *trunc.fourier_indices().start();

    let (ext, mut n_t) = blocks_with_retry(problem, Side::Exterior, Kernel::Outgoing, j0, k_ext)?;
    let mut d = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, n);
    let mut exterior_scale = vec![ZERO; n];
    for (col, &(j, l1)) in basis.iter().enumerate() {
        let s = k_ext[(j - j0) as usize].powi(l1 as i32 + 1);
        exterior_scale[col] = s;
        let norm = s * spherical_norm(l1, m);
        for (row, &(nn, l)) in basis.iter().enumerate() {
            let p = nn - j;
            d[(row, col)] = norm * ext.value(j, p, l1, l);
            g[(row, col)] = norm * ext.deriv(j, p, l1, l);
        }
    }

    let kappa = interior_momenta(&problem.well, &problem.drive, omega, trunc);
    let mut c = DMatrix::zeros(n, n);
    let mut f = DMatrix::zeros(n, n);
    let mut interior_scale = vec![ZERO; n];
    if problem.well.variant.driven_interior() {
        let (int, nt_in) = blocks_with_retry(problem, Side::Interior, Kernel::Regular, j0, &kappa)?;
        n_t = n_t.max(nt_in);
        for (col, &(nn, l1)) in basis.iter().enumerate() {
            let s = kappa_scale(kappa[(nn - j0) as usize], l1);
            interior_scale[col] = s;
            let w = s * spherical_norm(l1, m) / (2.0 * i_pow(l1 as i64));
            for (row, &(nr, l)) in basis.iter().enumerate() {
                let p = nr - nn;
                c[(row, col)] = w * int.value(nn, p, l1, l);
                f[(row, col)] = w * int.deriv(nn, p, l1, l);
            }
        }
    } else {
        let ib = interior_basis(&problem.well, &problem.drive, omega, trunc)?;
        for (i, &(nn, l)) in basis.iter().enumerate() {
            let s = kappa_scale(ib.kappa(nn), l);
            interior_scale[i] = s;
            c[(i, i)] = s * ib.value(nn, l);
            f[(i, i)] = s * ib.deriv(nn, l);
        }
    }

    let incoming = match incoming {
        None => None,
        Some((jin, l1in)) => {
            let col = *pos.get(&(jin, l1in)).ok_or(MatchError::UnknownChannel { j: jin, l1: l1in })?;
            let kin = k_ext[(jin - j0) as usize];
            let (blk, _) = blocks_with_retry(problem, Side::Exterior, Kernel::Incoming, jin, &[kin])?;
            let norm = spherical_norm(l1in, m);
            let mut dv = DVector::zeros(n);
            let mut gv = DVector::zeros(n);
            for (row, &(nn, l)) in basis.iter().enumerate() {
                let p = nn - jin;
                dv[row] = norm * blk.value(jin, p, l1in, l);
                gv[row] = norm * blk.deriv(jin, p, l1in, l);
            }
            Some((col, dv, gv))
        }
    };

    Ok(MatchingSystem { basis, c, f, d, g, incoming, k: k_ext.to_vec(), kappa, interior_scale, exterior_scale, n_t })
}
