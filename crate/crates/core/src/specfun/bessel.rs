use num_complex::Complex64 as C64;

use super::SpecFunError;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const SERIES_RADIUS: f64 = 1.0;
const MAX_IMAG: f64 = 690.0;
const RESCALE: f64 = 1e120;
const LOWER_HALF: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum HankelKind {
    First,
    Second,
}

fn check_range(z: C64) -> Result<(), SpecFunError> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(SpecFunError::Domain("non-finite argument"));
    }
    if z.im.abs() > MAX_IMAG {
        return Err(SpecFunError::Range { im: z.im });
    }
    Ok(())
}

/// Ascending series for j_l, accurate for |z| <= 1 at any l.
fn j_series(l: usize, z: C64) -> C64 {
    let mut pref = C64::new(1.0, 0.0);
    for k in 1..=l {
        pref = pref * z / (2 * k + 1) as f64;
    }
    let x = -0.5 * z * z;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..60 {
        term = term * x / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    pref * sum
}

fn j0(z: C64) -> C64 {
    z.sin() / z
}

fn j1(z: C64) -> C64 {
    (z.sin() / z - z.cos()) / z
}

/// Fills `out[0..=lmax]` with j_l(z).
pub fn bessel_j_seq(z: C64, out: &mut [C64]) -> Result<(), SpecFunError> {
    check_range(z)?;
    let lmax = out.len().saturating_sub(1);
    if out.is_empty() {
        return Ok(());
    }
    let az = z.norm();
    if az <= SERIES_RADIUS {
        for (l, o) in out.iter_mut().enumerate() {
            *o = j_series(l, z);
        }
        return Ok(());
    }
    // Miller downward recurrence normalized against j0 or j1.
    let start = lmax.max(az.ceil() as usize) + 40;
    let mut hi = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    for l in (1..=start).rev() {
        let lower = (2 * l + 1) as f64 / z * cur - hi;
        hi = cur;
        cur = lower;
        if l - 1 < out.len() {
            out[l - 1] = cur;
        }
        if cur.norm() > RESCALE {
            let s = 1.0 / RESCALE;
            cur *= s;
            hi *= s;
            if l - 1 < out.len() {
                for o in out[l - 1..].iter_mut() {
                    *o *= s;
                }
            }
        }
    }
    let (t0, t1) = (j0(z), j1(z));
    let norm = if t0.norm() >= t1.norm() || out.len() < 2 {
        t0 / out[0]
    } else {
        t1 / out[1]
    };
    for o in out.iter_mut() {
        *o *= norm;
    }
    Ok(())
}

fn hankel1_upward(z: C64, out: &mut [C64]) {
    let e = (I * z).exp();
    out[0] = -I * e / z;
    if out.len() > 1 {
        out[1] = -e * (z + I) / (z * z);
    }
    for l in 1..out.len().saturating_sub(1) {
        out[l + 1] = (2 * l + 1) as f64 / z * out[l] - out[l - 1];
    }
}

/// Fills `out[0..=lmax]` with h^(1)_l(z).
pub fn hankel1_seq(z: C64, out: &mut [C64]) -> Result<(), SpecFunError> {
    check_range(z)?;
    if z.norm() == 0.0 {
        return Err(SpecFunError::Domain("Hankel function at z = 0"));
    }
    if out.is_empty() {
        return Ok(());
    }
    if z.im < LOWER_HALF {
        // upward recurrence amplifies roundoff by exp(2|Im z|) below the real
        // axis; there h^(2)(z) = conj h^(1)(conj z) recurs stably
        hankel1_upward(z.conj(), out);
        let mut j = vec![C64::new(0.0, 0.0); out.len()];
        bessel_j_seq(z, &mut j)?;
        for (h, jv) in out.iter_mut().zip(&j) {
            *h = 2.0 * jv - h.conj();
        }
    } else {
        hankel1_upward(z, out);
    }
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(SpecFunError::Range { im: z.im });
    }
    Ok(())
}

/// Derivatives f_l' from a sequence holding f_0..f_{lmax+1}; writes lmax+1 values.
/// Uses (2l+1) f_l' = l f_{l-1} - (l+1) f_{l+1}, which is regular at z = 0.
pub fn derivative_seq(seq: &[C64], out: &mut [C64]) {
    debug_assert!(seq.len() > out.len());
    for (l, o) in out.iter_mut().enumerate() {
        let down = if l == 0 { C64::new(0.0, 0.0) } else { l as f64 * seq[l - 1] };
        *o = (down - (l + 1) as f64 * seq[l + 1]) / (2 * l + 1) as f64;
    }
}

pub fn spherical_bessel_j(l: usize, z: C64) -> Result<C64, SpecFunError> {
    let mut buf = vec![C64::new(0.0, 0.0); l + 1];
    bessel_j_seq(z, &mut buf)?;
    Ok(buf[l])
}

pub fn spherical_hankel(kind: HankelKind, l: usize, z: C64) -> Result<C64, SpecFunError> {
    let mut h = vec![C64::new(0.0, 0.0); l + 1];
    hankel1_seq(z, &mut h)?;
    match kind {
        HankelKind::First => Ok(h[l]),
        HankelKind::Second => Ok(2.0 * spherical_bessel_j(l, z)? - h[l]),
    }
}

/// j_l'(z).
pub fn spherical_bessel_j_deriv(l: usize, z: C64) -> Result<C64, SpecFunError> {
    let mut s = vec![C64::new(0.0, 0.0); l + 2];
    bessel_j_seq(z, &mut s)?;
    let mut d = vec![C64::new(0.0, 0.0); l + 1];
    derivative_seq(&s, &mut d);
    Ok(d[l])
}

/// h_l^(a)'(z).
pub fn spherical_hankel_deriv(kind: HankelKind, l: usize, z: C64) -> Result<C64, SpecFunError> {
    let mut s = vec![C64::new(0.0, 0.0); l + 2];
    hankel1_seq(z, &mut s)?;
    if kind == HankelKind::Second {
        let mut j = vec![C64::new(0.0, 0.0); l + 2];
        bessel_j_seq(z, &mut j)?;
        for (h, jv) in s.iter_mut().zip(&j) {
            *h = 2.0 * jv - *h;
        }
    }
    let mut d = vec![C64::new(0.0, 0.0); l + 1];
    derivative_seq(&s, &mut d);
    Ok(d[l])
}
