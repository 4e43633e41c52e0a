//! Boundary matching on the sphere r = d: pole search, continuation in the
//! drive amplitude, critical points, scattering and the static spectrum.

mod continuation;
mod pole;
mod scattering;
mod spectrum;
mod stability;
mod system;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelError, DriveWaveform, WellModel, DEFAULT_EPS_FLUX};
use crate::specfun::CouplingTables;
use crate::waves::{TruncationScheme, WaveError};

pub use continuation::{continue_in_f2, critical_point, ContinuationError, CriticalPoint, StepControl};
pub use pole::{conjugate_partner, pole_solve, pole_solve_tracked, zero_locator, FloquetSolution, SolveDiagnostics};
pub use scattering::{scattering_grid, scattering_solve, GridCell, ScatteringRecord};
pub use spectrum::{
    degeneracy_scan, static_bound_states, static_spectrum, BoundState, Degeneracy, SpectrumPoint, SweepAxis,
};
pub use stability::{enlarged_solve, truncation_stability, TruncationCheck};
pub use system::{assemble, log_det, Equilibration, MatchingSystem};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MatchError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("interior block singular (node at r = d); perturb omega")]
    SingularInterior,
    #[error("no convergence after {iterations} iterations (last step {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("continuation stopped after {points} accepted points")]
    PointLimit { points: usize },
    #[error("smallest singular value {sigma:.3e} above tolerance {tol:.1e}; truncation-limited")]
    TruncationLimited { sigma: f64, tol: f64 },
    #[error("scattering system near-singular at omega = {omega}: rcond {rcond:.3e}")]
    NearSingular { omega: f64, rcond: f64 },
    #[error("scattering energy {omega} lies below the input-channel threshold")]
    BelowThreshold { omega: f64 },
    #[error("input channel ({j}, {l1}) outside the truncation")]
    UnknownChannel { j: i32, l1: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps_flux: f64,
    /// Channels closer than this to threshold raise a proximity warning.
    pub eps_threshold: f64,
    /// Relative smallest singular value accepted at a pole.
    pub tol_sv: f64,
    /// Muller step tolerance on the reference momentum.
    pub tol_k: f64,
    pub max_iter: usize,
    /// Bisection target on |Im omega| at a critical point.
    pub tol_c: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { eps_flux: DEFAULT_EPS_FLUX, eps_threshold: 1e-6, tol_sv: 1e-10, tol_k: 1e-13, max_iter: 60, tol_c: 1e-9 }
    }
}

/// Everything needed to assemble the matching system at a given omega.
#[derive(Debug, Clone)]
pub struct Problem {
    pub well: WellModel,
    pub drive: DriveWaveform,
    pub truncation: TruncationScheme,
    pub options: SolverOptions,
    pub tables: Arc<CouplingTables>,
}

impl Problem {
    pub fn new(well: WellModel, drive: DriveWaveform, truncation: TruncationScheme, options: SolverOptions) -> Self {
        let tables = Arc::new(CouplingTables::new(truncation.l_max, well.m));
        Self { well, drive, truncation, options, tables }
    }

    pub fn with_f2(&self, f2: f64) -> Self {
        Self { drive: DriveWaveform::new(f2), ..self.clone() }
    }

    pub fn with_truncation(&self, truncation: TruncationScheme) -> Self {
        Self::new(self.well, self.drive, truncation, self.options)
    }
}
