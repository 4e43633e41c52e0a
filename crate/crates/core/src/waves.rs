//! Driven radial Floquet waves, their radial derivatives and their
//! time-Fourier coefficients on the matching sphere.

use std::ops::RangeInclusive;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channels::{channel_energy, DriveWaveform, Side, Variant, WellModel};
use crate::specfun::{bessel_j_seq, derivative_seq, hankel1_seq, CouplingTables, SpecFunError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ALIAS_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("Hankel kernel evaluated at r = 0")]
    SingularOrigin,
    #[error("aliasing: Nyquist harmonic at {ratio:.2e} of peak with N_t = {n_t}; increase N_t")]
    Aliasing { n_t: usize, ratio: f64 },
    #[error("invalid truncation: {0}")]
    Truncation(String),
}

/// Radial kernel: outgoing h^(1), incoming h^(2) or regular j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Outgoing,
    Incoming,
    Regular,
}

/// Checkerboard sector (-1)^(j + l1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(j: i32, l: usize) -> Self {
        if (j + l as i32).rem_euclid(2) == 0 {
            Self::Even
        } else {
            Self::Odd
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationScheme {
    pub j_neg: i32,
    pub j_pos: i32,
    pub l_max: usize,
    pub n_t: usize,
    pub parity: Parity,
}

impl TruncationScheme {
    pub fn new(j_neg: i32, j_pos: i32, l_max: usize, n_t: usize, parity: Parity) -> Result<Self, WaveError> {
        let t = Self { j_neg, j_pos, l_max, n_t, parity };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), WaveError> {
        if self.j_neg < 0 || self.j_pos < 0 {
            return Err(WaveError::Truncation("Fourier bounds must be nonnegative".into()));
        }
        if !self.n_t.is_power_of_two() {
            return Err(WaveError::Truncation(format!("N_t = {} is not a power of two", self.n_t)));
        }
        let harmonics = self.fourier_count();
        if self.n_t <= 2 * harmonics {
            return Err(WaveError::Truncation(format!(
                "N_t = {} must exceed twice the {harmonics} retained harmonics",
                self.n_t
            )));
        }
        Ok(())
    }

    pub fn fourier_indices(&self) -> RangeInclusive<i32> {
        -self.j_neg..=self.j_pos
    }

    pub fn fourier_count(&self) -> usize {
        (self.j_neg + self.j_pos + 1) as usize
    }

    /// Largest |n - j| coupling two retained Fourier indices.
    pub fn harmonic_span(&self) -> i32 {
        self.j_neg + self.j_pos
    }

    /// Active (Fourier index, angular index) pairs in this parity sector.
    pub fn basis(&self) -> Vec<(i32, usize)> {
        self.fourier_indices()
            .flat_map(|j| (0..=self.l_max).map(move |l| (j, l)))
            .filter(|&(j, l)| Parity::of(j, l) == self.parity)
            .collect()
    }

    pub fn enlarged(&self) -> Self {
        let mut t = Self { j_neg: self.j_neg + 1, j_pos: self.j_pos + 1, l_max: self.l_max + 1, ..*self };
        while t.validate().is_err() {
            t.n_t *= 2;
        }
        t
    }
}

/// R_{l1,l} and d/dr R_{l1,l} for all l1, l <= L at one (r, t), row-major in l1.
#[derive(Debug, Clone)]
pub struct RadialBlock {
    pub n: usize,
    pub value: Vec<C64>,
    pub deriv: Vec<C64>,
}

impl RadialBlock {
    pub fn value(&self, l1: usize, l: usize) -> C64 {
        self.value[l1 * self.n + l]
    }

    pub fn deriv(&self, l1: usize, l: usize) -> C64 {
        self.deriv[l1 * self.n + l]
    }
}

fn kernel_seq(kernel: Kernel, z: C64, n: usize) -> Result<Vec<C64>, WaveError> {
    let mut out = vec![ZERO; n];
    match kernel {
        Kernel::Regular => bessel_j_seq(z, &mut out)?,
        Kernel::Outgoing => hankel1_seq(z, &mut out).map_err(|_| WaveError::SingularOrigin)?,
        Kernel::Incoming => {
            hankel1_seq(z, &mut out).map_err(|_| WaveError::SingularOrigin)?;
            let mut j = vec![ZERO; n];
            bessel_j_seq(z, &mut j)?;
            for (h, jv) in out.iter_mut().zip(&j) {
                *h = 2.0 * jv - *h;
            }
        }
    }
    Ok(out)
}

/// T1[l1][l3] = sum_l2 c3(l1,l2,l3) j_l2(F k).
fn translation_factor(tables: &CouplingTables, k: C64, f: f64) -> Result<Vec<C64>, WaveError> {
    let n = tables.max_l() + 1;
    let mut jf = vec![ZERO; n];
    bessel_j_seq(k * f, &mut jf)?;
    let mut t1 = vec![ZERO; n * n];
    for l1 in 0..n {
        for l2 in 0..n {
            if jf[l2] == ZERO {
                continue;
            }
            for l3 in 0..n {
                t1[l1 * n + l3] += tables.c3(l1, l2, l3) * jf[l2];
            }
        }
    }
    Ok(t1)
}

/// Evaluates the driven radial functions for every (l1, l) at once.
pub fn radial_block(
    tables: &CouplingTables,
    kernel: Kernel,
    k: C64,
    r: f64,
    drive: &DriveWaveform,
    t: f64,
) -> Result<RadialBlock, WaveError> {
    if r <= 0.0 && kernel != Kernel::Regular {
        return Err(WaveError::SingularOrigin);
    }
    let n = tables.max_l() + 1;
    let t1 = translation_factor(tables, k, drive.displacement(t))?;
    let h = kernel_seq(kernel, k * r, n + 1)?;
    let mut hd = vec![ZERO; n];
    derivative_seq(&h, &mut hd);
    for v in hd.iter_mut() {
        *v *= k;
    }
    let fdot = drive.velocity(t);
    let mut j4 = vec![ZERO; n + 1];
    bessel_j_seq(C64::new(fdot * r, 0.0), &mut j4)?;
    let mut j4d = vec![ZERO; n];
    derivative_seq(&j4, &mut j4d);
    let mut t2 = vec![ZERO; n * n];
    let mut t2d = vec![ZERO; n * n];
    for l3 in 0..n {
        for l4 in 0..n {
            let (a, b) = (j4[l4], fdot * j4d[l4]);
            if a == ZERO && b == ZERO {
                continue;
            }
            for l in 0..n {
                let c = tables.right(l3, l4, l);
                t2[l3 * n + l] += c * a;
                t2d[l3 * n + l] += c * b;
            }
        }
    }
    let mut value = vec![ZERO; n * n];
    let mut deriv = vec![ZERO; n * n];
    for l1 in 0..n {
        for l3 in 0..n {
            let w = t1[l1 * n + l3];
            if w == ZERO {
                continue;
            }
            let (wh, whd) = (w * h[l3], w * hd[l3]);
            for l in 0..n {
                value[l1 * n + l] += wh * t2[l3 * n + l];
                deriv[l1 * n + l] += whd * t2[l3 * n + l] + wh * t2d[l3 * n + l];
            }
        }
    }
    Ok(RadialBlock { n, value, deriv })
}

pub fn radial_wave(
    tables: &CouplingTables,
    kernel: Kernel,
    k: C64,
    (l1, l): (usize, usize),
    r: f64,
    drive: &DriveWaveform,
    t: f64,
) -> Result<C64, WaveError> {
    Ok(radial_block(tables, kernel, k, r, drive, t)?.value(l1, l))
}

pub fn radial_wave_derivative(
    tables: &CouplingTables,
    kernel: Kernel,
    k: C64,
    (l1, l): (usize, usize),
    r: f64,
    drive: &DriveWaveform,
    t: f64,
) -> Result<C64, WaveError> {
    Ok(radial_block(tables, kernel, k, r, drive, t)?.deriv(l1, l))
}

/// Translated wave without the common e^{i Fdot z} factor, projected on Y_l:
/// entry [l1][l] is the coefficient of Y_l(theta) in
/// 2 i^{l1} f_{l1}(k |r - F z|) P_{l1}(cos theta').
/// Converges at every r > |F| regardless of Fdot r.
pub fn stripped_block(
    tables: &CouplingTables,
    kernel: Kernel,
    k: C64,
    r: f64,
    displacement: f64,
) -> Result<RadialBlock, WaveError> {
    let n = tables.max_l() + 1;
    let t1 = translation_factor(tables, k, displacement)?;
    let h = kernel_seq(kernel, k * r, n + 1)?;
    let mut hd = vec![ZERO; n];
    derivative_seq(&h, &mut hd);
    let mut value = vec![ZERO; n * n];
    let mut deriv = vec![ZERO; n * n];
    for l1 in 0..n {
        for l in 0..n {
            let s = t1[l1 * n + l] / tables.norm(l);
            value[l1 * n + l] = s * h[l];
            deriv[l1 * n + l] = s * k * hd[l];
        }
    }
    Ok(RadialBlock { n, value, deriv })
}

/// Multiplier applied to samples when the frame potential is dropped:
/// exp(-i g_osc(t)).
pub fn frame_phase(variant: Variant, side: Side, drive: &DriveWaveform, t: f64) -> C64 {
    let active = match side {
        Side::Exterior => variant.omits_frame_potential(),
        Side::Interior => variant == Variant::P4,
    };
    if active {
        C64::from_polar(1.0, -drive.phase_oscillation(t))
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Time-Fourier coefficients d_{p,l,j,l1} and g_{p,l,j,l1} at r = d for one
/// family of channels (indexed by their Fourier index j).
#[derive(Debug, Clone)]
pub struct FourierBlocks {
    n_l: usize,
    p_max: i32,
    first: i32,
    value: Vec<Vec<C64>>,
    deriv: Vec<Vec<C64>>,
}

impl FourierBlocks {
    #[inline]
    fn slot(&self, p: i32, l1: usize, l: usize) -> Option<usize> {
        if p.abs() > self.p_max {
            return None;
        }
        Some(((p + self.p_max) as usize * self.n_l + l1) * self.n_l + l)
    }

    /// Coefficient of e^{-2ipt} in the channel-j wave at r = d.
    pub fn value(&self, j: i32, p: i32, l1: usize, l: usize) -> C64 {
        self.slot(p, l1, l).map_or(ZERO, |s| self.value[(j - self.first) as usize][s])
    }

    pub fn deriv(&self, j: i32, p: i32, l1: usize, l: usize) -> C64 {
        self.slot(p, l1, l).map_or(ZERO, |s| self.deriv[(j - self.first) as usize][s])
    }

    pub fn p_max(&self) -> i32 {
        self.p_max
    }

    /// Synthesizes the time signal sum_p d_p e^{-2ipt}.
    pub fn reconstruct(&self, j: i32, l1: usize, l: usize, t: f64) -> C64 {
        (-self.p_max..=self.p_max)
            .map(|p| self.value(j, p, l1, l) * C64::from_polar(1.0, -2.0 * p as f64 * t))
            .sum()
    }
}

/// Samples the channel waves on N_t points of one period and transforms.
/// `momenta[i]` belongs to Fourier index `first + i`.
pub fn fourier_blocks(
    tables: &CouplingTables,
    well: &WellModel,
    drive: &DriveWaveform,
    side: Side,
    kernel: Kernel,
    first: i32,
    momenta: &[C64],
    truncation: &TruncationScheme,
) -> Result<FourierBlocks, WaveError> {
    let n_l = tables.max_l() + 1;
    let p_max = truncation.harmonic_span();
    let n_t = truncation.n_t;
    let slots = (2 * p_max + 1) as usize * n_l * n_l;
    let r = well.d;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n_t);
    let per_channel: Result<Vec<(Vec<C64>, Vec<C64>)>, WaveError> = momenta
        .par_iter()
        .map(|&k| {
            let mut value = vec![ZERO; slots];
            let mut deriv = vec![ZERO; slots];
            let idx = |p: i32, l1: usize, l: usize| ((p + p_max) as usize * n_l + l1) * n_l + l;
            if drive.f2 == 0.0 {
                let b = radial_block(tables, kernel, k, r, drive, 0.0)?;
                for l1 in 0..n_l {
                    for l in 0..n_l {
                        value[idx(0, l1, l)] = b.value(l1, l);
                        deriv[idx(0, l1, l)] = b.deriv(l1, l);
                    }
                }
                return Ok((value, deriv));
            }
            let mut sv = vec![ZERO; n_l * n_l * n_t];
            let mut sd = vec![ZERO; n_l * n_l * n_t];
            for s in 0..n_t {
                let t = std::f64::consts::PI * s as f64 / n_t as f64;
                let b = radial_block(tables, kernel, k, r, drive, t)?;
                let ph = frame_phase(well.variant, side, drive, t);
                for q in 0..n_l * n_l {
                    sv[q * n_t + s] = b.value[q] * ph;
                    sd[q * n_t + s] = b.deriv[q] * ph;
                }
            }
            let scale = 1.0 / n_t as f64;
            let mut peak = 0.0f64;
            let mut nyquist = 0.0f64;
            for q in 0..n_l * n_l {
                for series in [&mut sv[q * n_t..(q + 1) * n_t], &mut sd[q * n_t..(q + 1) * n_t]] {
                    fft.process(series);
                    for v in series.iter() {
                        peak = peak.max(v.norm());
                    }
                    nyquist = nyquist.max(series[n_t / 2].norm());
                }
                let (l1, l) = (q / n_l, q % n_l);
                for p in -p_max..=p_max {
                    let bin = p.rem_euclid(n_t as i32) as usize;
                    value[idx(p, l1, l)] = sv[q * n_t + bin] * scale;
                    deriv[idx(p, l1, l)] = sd[q * n_t + bin] * scale;
                }
            }
            if peak > 0.0 && nyquist > ALIAS_TOL * peak {
                return Err(WaveError::Aliasing { n_t, ratio: nyquist / peak });
            }
            Ok((value, deriv))
        })
        .collect();
    let (value, deriv) = per_channel?.into_iter().unzip();
    Ok(FourierBlocks { n_l, p_max, first, value, deriv })
}

/// Channel momenta for one side, principal branch (used for the interior).
pub fn interior_momenta(well: &WellModel, drive: &DriveWaveform, omega: C64, truncation: &TruncationScheme) -> Vec<C64> {
    truncation
        .fourier_indices()
        .map(|n| (2.0 * channel_energy(omega, n, Side::Interior, well, drive)).sqrt())
        .collect()
}

/// Undriven interior values j_l(kappa_n d) and kappa_n j_l'(kappa_n d).
#[derive(Debug, Clone)]
pub struct InteriorBasis {
    pub kappa: Vec<C64>,
    n_l: usize,
    first: i32,
    value: Vec<C64>,
    deriv: Vec<C64>,
}

impl InteriorBasis {
    pub fn value(&self, n: i32, l: usize) -> C64 {
        self.value[(n - self.first) as usize * self.n_l + l]
    }

    pub fn deriv(&self, n: i32, l: usize) -> C64 {
        self.deriv[(n - self.first) as usize * self.n_l + l]
    }

    pub fn kappa(&self, n: i32) -> C64 {
        self.kappa[(n - self.first) as usize]
    }
}

pub fn interior_basis(
    well: &WellModel,
    drive: &DriveWaveform,
    omega: C64,
    truncation: &TruncationScheme,
) -> Result<InteriorBasis, WaveError> {
    let n_l = truncation.l_max + 1;
    let kappa = interior_momenta(well, drive, omega, truncation);
    let mut value = Vec::with_capacity(kappa.len() * n_l);
    let mut deriv = Vec::with_capacity(kappa.len() * n_l);
    for &kp in &kappa {
        let mut j = vec![ZERO; n_l + 1];
        bessel_j_seq(kp * well.d, &mut j)?;
        let mut jd = vec![ZERO; n_l];
        derivative_seq(&j, &mut jd);
        value.extend_from_slice(&j[..n_l]);
        deriv.extend(jd.iter().map(|v| kp * v));
    }
    Ok(InteriorBasis { kappa, n_l, first: *truncation.fourier_indices().start(), value, deriv })
}
