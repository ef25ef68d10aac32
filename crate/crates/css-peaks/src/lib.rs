//! Numerical toolkit for multi-peak concentrating solutions of the static
//! planar Chern-Simons-Schrodinger system.
//!
//! The crate builds semiclassical solutions of
//!
//! ```text
//! -eps^2 (Laplace u) + V u + (A0 + A1^2 + A2^2) u = |u|^{p-2} u
//! ```
//!
//! on `[-L, L)^2`, where the gauge fields `(A0, A1, A2)` are the
//! Riesz-convolution solution of the planar constraint system driven by the
//! density `u^2`.  Solutions concentrate one rescaled radial ground-state
//! bump at each local minimum of the trapping potential `V` as `eps` shrinks,
//! and the modules here construct those bumps, solve the full system by
//! Newton iteration, and verify the asymptotic structure: the energy
//! expansion in `eps`, the gauge-field scaling, Pohozaev-type balances on
//! small discs, the drift of the numerical peaks toward the well minima, and
//! local uniqueness under perturbed initial data.

pub mod config;
pub mod energy;
pub mod error;
pub mod expansion;
pub mod gauge;
pub mod grid;
pub mod peaks;
pub mod pohozaev;
pub mod potential;
pub mod report;
pub mod radial;
pub mod solve;
pub mod spectral;

pub use error::{Error, Result};
