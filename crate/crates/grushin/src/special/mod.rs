//! Special functions backing the transform and kernel code: Hermite
//! functions (plain, tensor, and scaled families), the harmonic-oscillator
//! heat kernel in closed form, and Bessel functions of the first kind.

pub mod bessel;
pub mod hermite;

pub use bessel::{bessel_j, bessel_j_ratio, gamma};
pub use hermite::{
    enumerate_multi_indices, hermite_1d, hermite_column, hermite_heat_kernel_closed,
    hermite_multi, hermite_scaled, ln_sinh, MultiIndex,
};
