//! Average integral-means β-spectrum of the interior whole-plane SLE_κ.
//!
//! The crate is organised around the independent routes to the same
//! exponent:
//!
//! * [`spectrum`]: closed-form piecewise spectrum, γ roots, transition
//!   loci and the (2M+1)-band truncation curves.
//! * [`coeffs`]: the four-term recurrence for the Taylor coefficients
//!   θ_{i,j} of the regularized moment function, series evaluation,
//!   integral means and slope fits.
//! * [`special`]: Gauss ₂F₁, the exact M=0 and M=1 moment functions, the
//!   κ=0 map and a finite-difference residual of the moment PDE.
//! * [`eigen`]: the tridiagonal boundary-exponent eigenproblem.
//! * [`mc`]: a Monte Carlo simulator of the interior radial Loewner flow.
//!
//! Exact computations run over [`BigRational`](num_rational::BigRational)
//! through the [`Scalar`] trait; everything else uses `f64`.

pub mod coeffs;
pub mod eigen;
mod error;
pub mod format;
pub mod mc;
pub mod poly;
mod scalar;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
pub use scalar::{parse_number, Backend, Number, Scalar};

pub use num_complex::Complex64;
pub use num_rational::BigRational;
