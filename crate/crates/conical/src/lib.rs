//! Semiclassical propagation of two-level wave packets through conical
//! eigenvalue crossings.
//!
//! The library follows a wave packet `Y(t) e^{iS/ε} WP_{z(t)} u(t)` along a
//! classical trajectory, carries it through a conical crossing with the
//! Landau–Zener transfer, and checks the result against a split-step Fourier
//! solver of the full coupled system
//! `iε∂ₜψ = −ε²/2 Δψ + V(x)ψ`, `V = v·Id + A(w)`.
//!
//! Start with the runnable programs in `examples/`; each covers one stage of
//! the pipeline.

pub mod ansatz;
pub mod classical;
pub mod cli;
mod error;
pub mod grid;
pub mod io;
pub mod landau_zener;
pub mod ode;
pub mod potential;
pub mod profile;
pub mod reference;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use potential::{CrossingGeometry, EigenData, Mode, PotentialModel};
