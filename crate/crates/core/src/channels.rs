//! Units, well parametrization, the axial drive and channel momenta.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::specfun::spherical_norm;

pub const DEFAULT_EPS_FLUX: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("well depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("well radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("well parameter A/pi must be negative, got {0}")]
    NonNegativeA(f64),
    #[error("channel energy is exactly at threshold (j = {j})")]
    Threshold { j: i32 },
    #[error("branch tracking ambiguous for j = {j}: step too large")]
    AmbiguousBranch { j: i32 },
}

/// F(t) = F2 cos 2t, period pi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub f2: f64,
}

impl DriveWaveform {
    pub fn new(f2: f64) -> Self {
        Self { f2 }
    }

    pub const PERIOD: f64 = PI;

    pub fn displacement(&self, t: f64) -> f64 {
        self.f2 * (2.0 * t).cos()
    }

    pub fn velocity(&self, t: f64) -> f64 {
        -2.0 * self.f2 * (2.0 * t).sin()
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        -4.0 * self.f2 * (2.0 * t).cos()
    }

    /// V_F(t) = -Fdot^2 / 2
    pub fn frame_potential(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        -0.5 * v * v
    }

    /// Secular rate of g_F(t) = int_0^t Fdot^2/2.
    pub fn secular_rate(&self) -> f64 {
        self.f2 * self.f2
    }

    /// Periodic remainder of g_F(t).
    pub fn phase_oscillation(&self, t: f64) -> f64 {
        -0.25 * self.f2 * self.f2 * (4.0 * t).sin()
    }

    pub fn accumulated_phase(&self, t: f64) -> f64 {
        self.secular_rate() * t + self.phase_oscillation(t)
    }
}

/// Potential variant: P1 and P3 keep the interior static, P2 and P4 drive it
/// too; P3 and P4 drop the frame term V_F.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    P1,
    P2,
    P3,
    P4,
}

impl Variant {
    pub fn from_index(p: u8) -> Option<Self> {
        match p {
            1 => Some(Self::P1),
            2 => Some(Self::P2),
            3 => Some(Self::P3),
            4 => Some(Self::P4),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::P1 => 1,
            Self::P2 => 2,
            Self::P3 => 3,
            Self::P4 => 4,
        }
    }

    pub fn driven_interior(self) -> bool {
        matches!(self, Self::P2 | Self::P4)
    }

    pub fn omits_frame_potential(self) -> bool {
        matches!(self, Self::P3 | Self::P4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellModel {
    pub v0: f64,
    pub d: f64,
    /// A = -sqrt(2 V0 d^2)
    pub a: f64,
    pub variant: Variant,
    pub m: usize,
}

impl WellModel {
    pub fn from_radius(v0: f64, d: f64, variant: Variant) -> Result<Self, ChannelError> {
        if !(v0 > 0.0) {
            return Err(ChannelError::NonPositiveDepth(v0));
        }
        if !(d > 0.0) {
            return Err(ChannelError::NonPositiveRadius(d));
        }
        Ok(Self { v0, d, a: -(2.0 * v0 * d * d).sqrt(), variant, m: 0 })
    }

    pub fn a_over_pi(&self) -> f64 {
        self.a / PI
    }
}

pub fn well_from_a(a_over_pi: f64, v0: f64, variant: Variant) -> Result<WellModel, ChannelError> {
    if !(v0 > 0.0) {
        return Err(ChannelError::NonPositiveDepth(v0));
    }
    if !(a_over_pi < 0.0) {
        return Err(ChannelError::NonNegativeA(a_over_pi));
    }
    let a = a_over_pi * PI;
    Ok(WellModel { v0, d: a.abs() / (2.0 * v0).sqrt(), a, variant, m: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Interior,
    Exterior,
}

/// Which physical branch open channels take at a fresh start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Emission,
    Capture,
}

impl Boundary {
    pub fn reversed(self) -> Self {
        match self {
            Self::Emission => Self::Capture,
            Self::Capture => Self::Emission,
        }
    }
}

/// Kinetic energy k^2/2 carried by a channel.
pub fn channel_energy(omega: C64, j: i32, side: Side, well: &WellModel, drive: &DriveWaveform) -> C64 {
    let shifted = match side {
        Side::Exterior => well.variant.omits_frame_potential(),
        Side::Interior => well.variant == Variant::P4,
    };
    let mut e = omega + 2.0 * j as f64;
    if side == Side::Interior {
        e += well.v0;
    }
    if shifted {
        e -= drive.secular_rate();
    }
    e
}

/// Fresh branch selection: closed channels Im k > 0, open channels Re k > 0
/// for emission and Re k < 0 for capture.
pub fn channel_momentum_init(energy: C64, j: i32, boundary: Boundary) -> Result<C64, ChannelError> {
    if energy == C64::new(0.0, 0.0) {
        return Err(ChannelError::Threshold { j });
    }
    let k = (2.0 * energy).sqrt();
    if energy.re < 0.0 {
        return Ok(if k.im >= 0.0 { k } else { -k });
    }
    let want_positive = boundary == Boundary::Emission;
    Ok(if (k.re > 0.0) == want_positive { k } else { -k })
}

/// Nearest-root continuation of a channel momentum.
pub fn channel_momentum_track(previous_k: C64, energy: C64, j: i32) -> Result<C64, ChannelError> {
    let k = (2.0 * energy).sqrt();
    let (d_plus, d_minus) = ((k - previous_k).norm(), (k + previous_k).norm());
    let (near, far) = if d_plus <= d_minus { (d_plus, d_minus) } else { (d_minus, d_plus) };
    if far > 0.0 && near / far > 0.7 && k.norm() > 0.0 {
        return Err(ChannelError::AmbiguousBranch { j });
    }
    Ok(if d_plus <= d_minus { k } else { -k })
}

pub fn flux_normalization(k: C64, l1: usize, m: usize, eps_flux: f64) -> f64 {
    let n = spherical_norm(l1, m);
    if k.re.abs() > eps_flux {
        k.re.abs().sqrt() * n
    } else {
        n
    }
}

/// A channel is open when it lies above its threshold.
pub fn is_open(energy: C64) -> bool {
    energy.re > 0.0
}

/// Column scale used by the solver: flux normalization for open channels,
/// plain N_l^m below threshold.
pub fn channel_flux_norm(k: C64, energy: C64, l1: usize, m: usize, eps_flux: f64) -> f64 {
    if is_open(energy) {
        flux_normalization(k, l1, m, eps_flux)
    } else {
        spherical_norm(l1, m)
    }
}
