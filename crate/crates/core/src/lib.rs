//! Spectral simulation and analysis of dispersive quantization (the Talbot
//! effect) for the periodic cubic nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + |u|^2 u = 0,   x in R / 2πZ
//! ```
//!
//! The crate is organised by pipeline stage:
//!
//! | Module            | Contents                                                        |
//! |-------------------|-----------------------------------------------------------------|
//! | [`spectral`]      | Fourier fields, transforms, free propagator, Sobolev/Besov norms |
//! | [`initial_data`]  | Step (bounded-variation) data with exact coefficients           |
//! | [`nls`]           | Strang split-step solver, resonant split, nonlinear remainder   |
//! | [`quantization`]  | Rational-time Gauss-sum translate combinations                  |
//! | [`fractal`]       | Box counting, dimension and Besov exponent fits, dichotomy scan  |
//! | [`verification`]  | Lattice-sum lemma scans and the first Picard iterate            |
//!
//! Coefficients are normalised so that `u(x) = Σ_k c_k e^{ikx}`, i.e.
//! `c_k = (1/2π) ∫ u e^{-ikx} dx`. The free propagator `e^{it∂xx}` acts as
//! `c_k ↦ e^{-ik²t} c_k`.

pub mod error;
pub mod fit;
pub mod fractal;
pub mod initial_data;
pub mod nls;
pub mod quantization;
pub mod spectral;
pub mod time;
pub mod verification;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::{FourierField, GridSpec, SpatialField};
pub use time::{IrrationalPreset, RationalTime, TaggedTime};
