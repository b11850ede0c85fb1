//! Desk-scale simulator for phase-locked pump–probe measurements of
//! entangled electronic–nuclear wave packets.
//!
//! The crate is organised the way the data flows:
//!
//! * [`units`], [`grid`], [`potential`]: atomic units, the spatial grid and
//!   spline-defined dissociative potentials.
//! * [`wavefunction`], [`propagator`]: split-operator propagation of nuclear
//!   wave packets on two parallel surfaces and the R-resolved phase difference.
//! * [`shaper`], [`coherence`]: the spectral pulse-shaper mask, synthesised
//!   pulse pairs and the coherence / dication-yield model.
//! * [`events`], [`covariance`]: synthetic fragment-ion events, the ideal VMI
//!   detector model and shot-by-shot covariance mapping.
//! * [`analysis`]: Fourier analysis of delay scans, per-bin cosine fits of
//!   phase scans and the phase-versus-1/E transform.
//! * [`config`], [`pipeline`], [`acceptance`]: the run configuration, the
//!   subcommand implementations used by the `wpcoh` binary and the
//!   self-checks run by `wpcoh reproduce`.

pub mod acceptance;
pub mod alloc;
pub mod analysis;
pub mod coherence;
pub mod config;
pub mod covariance;
pub mod error;
pub mod events;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod potential;
pub mod propagator;
pub mod shaper;
pub mod units;
pub mod wavefunction;

pub use error::{Error, Result};

pub use num_complex::Complex64;
