//! Complex spherical Bessel/Hankel functions, Legendre functions and the
//! angular coupling tables of the translated-wave expansion.

mod bessel;
mod coupling;
mod legendre;

pub use bessel::{
    bessel_j_seq, derivative_seq, hankel1_seq, spherical_bessel_j, spherical_bessel_j_deriv, spherical_hankel,
    spherical_hankel_deriv, HankelKind,
};
pub use coupling::{spherical_norm, triple_overlap_w, Axis, CouplingTables};
pub(crate) use coupling::i_pow;
pub use legendre::{gauss_legendre, legendre_p, legendre_seq};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("range error: |Im z| = {im:.3e} overflows double precision")]
    Range { im: f64 },
    #[error("angular index {l} exceeds table size {max_l}")]
    OutOfTable { l: usize, max_l: usize },
}
