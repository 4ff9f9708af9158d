//! Monte Carlo simulator for a quasi-deterministic polarization analyzer.
//!
//! Each photon reaching an analyzer meets a freshly sampled matrix Stokes
//! orientation; the sign of the transition function `T(0) = S1(0) P1(0)`
//! picks the output eigenchannel. Distributions are accumulated one photon
//! (or one causally coupled photon pair) at a time.
//!
//! Module map:
//!
//! - [`stokes`]: two-component eigenvalue problem in Stokes form.
//! - [`rng`]: labelled, schedule-independent random streams.
//! - [`analyzer`]: stochastic matrix orientation and channel decision.
//! - [`sources`]: single photons and coupled pairs.
//! - [`experiments`]: in-sequence Malus counting, coincidence counting, CHSH.
//! - [`analysis`]: error bars, chi-square fits, quadrature oracle.

pub mod analysis;
pub mod analyzer;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod sources;
pub mod stokes;

pub use analyzer::{Analyzer, ChannelOutcome, Criterion, SamplingDistribution};
pub use error::{Error, Result};
pub use experiments::{
    AngleGrid, ChshResult, ChshSettings, CoincidenceConfig, CountTable, MalusConfig, ResultRow,
};
pub use rng::{RandomStream, StreamLabel, Wing};
pub use stokes::{Channel, FieldKind, FieldState, HermitianAnalyzerMatrix, StokesP, StokesS};
