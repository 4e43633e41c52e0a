use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::ObservableError;
use crate::channels::{is_open, Side};
use crate::matching::FloquetSolution;
use crate::specfun::{gauss_legendre, legendre_p, spherical_norm};

/// One momentum shell of the emission distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionChannel {
    pub j: i32,
    /// Re k of the channel: radius of the shell.
    pub momentum: f64,
    /// sum_l1 |b|^2 in the flux gauge (before dividing by the normalization).
    pub weight: f64,
    pub amplitudes: Vec<(usize, C64)>,
}

/// f(k, theta, phi) as a sum of delta shells at k = Re k_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionDensity {
    pub m: usize,
    pub normalization: f64,
    pub im_omega: f64,
    pub channels: Vec<EmissionChannel>,
}

impl EmissionDensity {
    pub fn amplitude(&self, ch: usize, theta: f64, phi: f64) -> C64 {
        let x = theta.cos();
        let m = self.m;
        let sum: C64 = self.channels[ch]
            .amplitudes
            .iter()
            .filter(|(l, _)| *l >= m)
            .map(|&(l, b)| b * spherical_norm(l, m) * legendre_p(l, m, x).unwrap_or(0.0))
            .sum();
        sum * C64::from_polar(1.0, m as f64 * phi)
    }

    /// |sum_l1 b Y_l1|^2 / normalization.
    pub fn angular(&self, ch: usize, theta: f64, phi: f64) -> f64 {
        self.amplitude(ch, theta, phi).norm_sqr() / self.normalization
    }

    /// Coefficient of delta(k - k_j) in f(k, theta, phi).
    pub fn shell(&self, ch: usize, theta: f64, phi: f64) -> f64 {
        let k = self.channels[ch].momentum;
        self.angular(ch, theta, phi) / (k * k)
    }

    /// Coefficient of delta(k - k_j) in the phi-integrated f(k, theta).
    pub fn shell_marginal(&self, ch: usize, theta: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.shell(ch, theta, 0.0)
    }

    /// shell_marginal scaled by |Im omega|, the rate-weighted variant.
    pub fn shell_marginal_rate_scaled(&self, ch: usize, theta: f64) -> f64 {
        self.im_omega.abs() * self.shell_marginal(ch, theta)
    }

    /// Integral of p over one shell, by Gauss-Legendre in cos theta.
    pub fn channel_probability(&self, ch: usize) -> f64 {
        let l_max = self.channels[ch].amplitudes.iter().map(|a| a.0).max().unwrap_or(0);
        let (x, w) = gauss_legendre(l_max + self.m + 4);
        let k = self.channels[ch].momentum;
        x.iter().zip(&w).map(|(&xi, &wi)| wi * self.shell_marginal(ch, xi.acos()) * k * k).sum()
    }

    pub fn total_probability(&self) -> f64 {
        (0..self.channels.len()).map(|c| self.channel_probability(c)).sum()
    }

    /// Channel with the largest weight.
    pub fn dominant(&self) -> Option<&EmissionChannel> {
        self.channels.iter().max_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap())
    }
}

/// Builds the emission distribution from the open channels whose waves do
/// not decay at large r (Re k > eps_flux, Im k <= 0 up to roundoff).
pub fn emission_density(solution: &FloquetSolution, eps_flux: f64) -> Result<EmissionDensity, ObservableError> {
    let first = solution.first_index();
    let mut channels = Vec::new();
    for (i, &k) in solution.k.iter().enumerate() {
        let j = first + i as i32;
        let energy = solution.channel_energy(j, Side::Exterior);
        if !is_open(energy) || k.re <= eps_flux || k.im > 1e-12 * k.norm() {
            continue;
        }
        let amplitudes: Vec<(usize, C64)> = solution
            .basis
            .iter()
            .zip(&solution.b)
            .filter(|((jj, _), _)| *jj == j)
            .map(|(&(_, l1), &b)| (l1, b))
            .collect();
        let weight = amplitudes.iter().map(|(_, b)| b.norm_sqr()).sum();
        channels.push(EmissionChannel { j, momentum: k.re, weight, amplitudes });
    }
    let normalization: f64 = channels.iter().map(|c| c.weight).sum();
    if channels.is_empty() || normalization == 0.0 {
        return Err(ObservableError::NoOpenChannel);
    }
    Ok(EmissionDensity { m: solution.well.m, normalization, im_omega: solution.omega.im, channels })
}
