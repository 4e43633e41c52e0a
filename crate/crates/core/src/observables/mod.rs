//! Observables of converged solutions: emission momentum distribution,
//! expectation values, interior normalization from boundary data and a direct
//! check of the time-dependent Schrodinger equation.

mod emission;
mod expectation;
mod field;
mod normalization;
mod verify;

use crate::waves::WaveError;

pub use emission::{emission_density, EmissionChannel, EmissionDensity};
pub use expectation::{
    exterior_integral, expectation_radial, expectation_radial_with, Expectation, OperatorKind, RadialQuadrature, Region,
};
pub use field::Field;
pub use normalization::{boundary_normalization, boundary_projection, InteriorNorm};
pub use verify::{residual_verify, SamplePoint, VerifyReport};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error("no open, non-decaying channel to emit into")]
    NoOpenChannel,
    #[error("channel {j} is not square-integrable (Im k = {im_k:.3e})")]
    NotSquareIntegrable { j: i32, im_k: f64 },
    #[error("{0} is only defined for axially symmetric states (m = 0)")]
    NeedsAxialSymmetry(&'static str),
    #[error("{0} needs the static interior variants")]
    DrivenInterior(&'static str),
}
