//! Floquet quasi-bound states, S-matrix poles and inelastic scattering for a
//! spherical square well under an axial drive F(t) = F2 cos 2t.

pub mod channels;
pub mod matching;
pub mod observables;
pub mod specfun;
pub mod waves;

pub use num_complex::Complex64 as C64;
