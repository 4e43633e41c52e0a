use num_complex::Complex64 as C64;

use crate::channels::{DriveWaveform, Side};
use crate::matching::FloquetSolution;
use crate::specfun::{bessel_j_seq, derivative_seq, i_pow, CouplingTables};
use crate::waves::{frame_phase, radial_block, stripped_block, Kernel, WaveError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Output components beyond L_max: the translated waves of retained (j, l1)
/// spill into higher l, and dropping that tail breaks the field equation.
const EXTRA_L: usize = 6;

/// Spatial field of a solution, split into Y_l components. All evaluators
/// drop the common envelope e^{-i omega t}.
#[derive(Debug, Clone)]
pub struct Field<'a> {
    pub solution: &'a FloquetSolution,
    pub tables: CouplingTables,
    pub drive: DriveWaveform,
    /// (j, l1, coefficient of the translated wave R_{l1, .}).
    exterior: Vec<(i32, usize, C64)>,
}

/// Y_l components and their radial derivatives.
#[derive(Debug, Clone)]
pub struct Components {
    pub value: Vec<C64>,
    pub deriv: Vec<C64>,
}

impl Components {
    fn zeros(n: usize) -> Self {
        Self { value: vec![ZERO; n], deriv: vec![ZERO; n] }
    }
}

impl<'a> Field<'a> {
    pub fn new(solution: &'a FloquetSolution, eps_flux: f64) -> Self {
        let tables = CouplingTables::new(solution.truncation.l_max + EXTRA_L, solution.well.m);
        let exterior = solution
            .basis
            .iter()
            .zip(&solution.b)
            .map(|(&(j, l1), &b)| (j, l1, b * solution.exterior_scale(j, l1, eps_flux) * tables.norm(l1)))
            .collect();
        Self { solution, tables, drive: DriveWaveform::new(solution.f2), exterior }
    }

    /// Number of evaluated Y_l components.
    pub fn n_l(&self) -> usize {
        self.tables.max_l() + 1
    }

    /// Components l < this are the ones the matching conditions cover.
    pub fn retained_l(&self) -> usize {
        self.solution.truncation.l_max + 1
    }

    pub fn side(&self, r: f64) -> Side {
        if r < self.solution.well.d {
            Side::Interior
        } else {
            Side::Exterior
        }
    }

    pub fn interior(&self, r: f64, t: f64) -> Result<Components, WaveError> {
        let sol = self.solution;
        let n_l = self.n_l();
        let mut out = Components::zeros(n_l);
        if sol.well.variant.driven_interior() {
            let ph = frame_phase(sol.well.variant, Side::Interior, &self.drive, t);
            let mut cache: Option<(i32, crate::waves::RadialBlock)> = None;
            for (&(n, l1), &a) in sol.basis.iter().zip(&sol.a) {
                if cache.as_ref().map(|c| c.0) != Some(n) {
                    let blk = radial_block(&self.tables, Kernel::Regular, sol.kappa_of(n), r, &self.drive, t)?;
                    cache = Some((n, blk));
                }
                let blk = &cache.as_ref().unwrap().1;
                let w = a * ph * C64::from_polar(1.0, -2.0 * n as f64 * t) * self.tables.norm(l1)
                    / (2.0 * i_pow(l1 as i64));
                for l in 0..n_l {
                    out.value[l] += w * blk.value(l1, l);
                    out.deriv[l] += w * blk.deriv(l1, l);
                }
            }
        } else {
            let mut j = vec![ZERO; n_l + 1];
            let mut jd = vec![ZERO; n_l];
            let mut current = None;
            for (&(n, l), &a) in sol.basis.iter().zip(&sol.a) {
                let kappa = sol.kappa_of(n);
                if current != Some(n) {
                    bessel_j_seq(kappa * r, &mut j)?;
                    derivative_seq(&j, &mut jd);
                    current = Some(n);
                }
                let w = a * C64::from_polar(1.0, -2.0 * n as f64 * t);
                out.value[l] += w * j[l];
                out.deriv[l] += w * kappa * jd[l];
            }
        }
        Ok(out)
    }

    fn exterior_with<F>(&self, t: f64, include: impl Fn(i32) -> bool, block: F) -> Result<Components, WaveError>
    where
        F: Fn(C64) -> Result<crate::waves::RadialBlock, WaveError>,
    {
        let sol = self.solution;
        let n_l = self.n_l();
        let ph = frame_phase(sol.well.variant, Side::Exterior, &self.drive, t);
        let mut out = Components::zeros(n_l);
        let mut cache: Option<(i32, crate::waves::RadialBlock)> = None;
        for &(j, l1, c) in &self.exterior {
            if !include(j) || c == ZERO {
                continue;
            }
            if cache.as_ref().map(|x| x.0) != Some(j) {
                cache = Some((j, block(sol.k_of(j))?));
            }
            let blk = &cache.as_ref().unwrap().1;
            let w = c * ph * C64::from_polar(1.0, -2.0 * j as f64 * t);
            for l in 0..n_l {
                out.value[l] += w * blk.value(l1, l);
                out.deriv[l] += w * blk.deriv(l1, l);
            }
        }
        Ok(out)
    }

    /// Full exterior field, including the e^{i Fdot z} factor.
    pub fn exterior(&self, r: f64, t: f64) -> Result<Components, WaveError> {
        self.exterior_with(t, |_| true, |k| radial_block(&self.tables, Kernel::Outgoing, k, r, &self.drive, t))
    }

    /// Exterior field divided by e^{i Fdot z}, restricted to `include`d channels.
    pub fn exterior_stripped(&self, r: f64, t: f64, include: impl Fn(i32) -> bool) -> Result<Components, WaveError> {
        let f = self.drive.displacement(t);
        self.exterior_with(t, include, |k| stripped_block(&self.tables, Kernel::Outgoing, k, r, f))
    }

    pub fn at(&self, r: f64, t: f64) -> Result<Components, WaveError> {
        match self.side(r) {
            Side::Interior => self.interior(r, t),
            Side::Exterior => self.exterior(r, t),
        }
    }
}
