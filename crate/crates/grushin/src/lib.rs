//! Numerical spectral theory for the Grushin operator
//!
//!   G = -Laplacian_{x'} - |x'|^2 Laplacian_{x''}
//!
//! on R^(d') x R^(d''). The library provides:
//!
//! * a discrete realization of the unitary transform diagonalizing G,
//!   built from a partial Fourier transform in x'' and scaled Hermite
//!   expansions in x' ([`transform`]),
//! * the spectral multiplier calculus on the transform side, including the
//!   heat semigroup ([`spectral`]),
//! * direct evaluation of the heat kernel from its closed-form Fourier and
//!   Hankel representations ([`heat`]),
//! * the special functions these are built on ([`special`]),
//! * and a verification harness re-checking the identities the construction
//!   rests on ([`verify`]).

pub mod config;
pub mod error;
pub mod grid;
pub mod heat;
pub mod io;
pub mod quad;
pub mod special;
pub mod spectral;
pub mod testfn;
pub mod transform;
pub mod verify;

pub use config::GrushinConfig;
pub use error::{GrushinError, Result};
pub use grid::{DualCoefficients, GridFunction};
pub use special::MultiIndex;
pub use spectral::SpectralSymbol;
pub use transform::TransformPlan;
