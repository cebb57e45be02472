//! Berezin–Toeplitz quantization on the Riemann sphere.
//!
//! The crate builds level-k Toeplitz matrices of classical symbols on
//! `CP¹`, diagonalizes them, forms the local and global spectral measures
//! and studies their large-k expansions against exact oracles. A separate
//! module checks the stationary point and Hessian of the phase that drives
//! the local expansion.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod assembly;
pub mod asymptotics;
pub mod cp1;
pub mod eigen;
pub mod error;
pub mod measures;
pub mod observables;
pub mod phase;
mod poly;
pub mod quadrature;

pub use assembly::{assemble, assemble_closed, assemble_quadrature, shift_operator, HermitianMatrix, Provenance};
pub use asymptotics::{
    binomial_oracle, edgeworth_c1, fit_expansion, normalized_pairing_sequence, richardson_coefficients,
    szego_limit_check, ExpansionFit, KGrid, SzegoCheck,
};
pub use cp1::{basis_norm, bergman_diagonal, section_value, sphere_coords, BasisTable, Chart, Level, ModelPoint};
pub use error::{Error, Result};
pub use measures::{
    eigh, global_measure, local_measure, pair, pair_shifted, pair_via_fourier, scale_to_prime, MeasureKind,
    PointMeasure, SpectralData,
};
pub use observables::{reduced_symbol, symbol_range, Monomial, Observable, SymbolClass, TestFunction, TestKind};
pub use quadrature::QuadratureScheme;
