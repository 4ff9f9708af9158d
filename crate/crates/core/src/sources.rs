//! Photon emitters. Both emitters draw `2 beta` first; nothing else is drawn
//! for a coupled pair, and an uncoupled pair draws a second `2 beta`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stokes::{field_to_stokes, FieldState, StokesS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PolarizationMode {
    FixedBeta {
        beta: f64,
    },
    /// `2 beta` uniform on `[0, 2 pi)`.
    UniformBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleSourceSpec {
    mode: PolarizationMode,
    amplitude: f64,
    delta: f64,
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if amplitude.is_finite() && amplitude > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "amplitude",
            format!("must be finite and > 0, got {amplitude}"),
        ))
    }
}

impl SingleSourceSpec {
    pub fn new(mode: PolarizationMode, amplitude: f64, delta: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        if let PolarizationMode::FixedBeta { beta } = mode {
            if !beta.is_finite() {
                return Err(Error::invalid("beta", "must be finite"));
            }
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        Ok(SingleSourceSpec {
            mode,
            amplitude,
            delta,
        })
    }

    pub fn fixed(beta: f64) -> Result<Self> {
        Self::new(PolarizationMode::FixedBeta { beta }, 1.0, 0.0)
    }

    pub fn mode(&self) -> PolarizationMode {
        self.mode
    }
}

impl Default for SingleSourceSpec {
    fn default() -> Self {
        SingleSourceSpec {
            mode: PolarizationMode::UniformBeta,
            amplitude: 1.0,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSourceSpec {
    coupled: bool,
    amplitude: f64,
}

impl PairSourceSpec {
    pub fn new(coupled: bool, amplitude: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(PairSourceSpec { coupled, amplitude })
    }

    pub fn coupled() -> Self {
        PairSourceSpec {
            coupled: true,
            amplitude: 1.0,
        }
    }

    pub fn uncoupled() -> Self {
        PairSourceSpec {
            coupled: false,
            amplitude: 1.0,
        }
    }

    pub fn is_coupled(&self) -> bool {
        self.coupled
    }
}

#[inline]
fn draw_beta(rng: &mut RandomStream) -> f64 {
    0.5 * TAU * rng.unit()
}

#[inline]
fn linear_photon(amplitude: f64, beta: f64, delta: f64) -> StokesS {
    field_to_stokes(&FieldState::new_unchecked(amplitude, beta, 0.0, delta))
}

pub fn emit_photon(spec: &SingleSourceSpec, rng: &mut RandomStream) -> StokesS {
    let beta = match spec.mode {
        PolarizationMode::FixedBeta { beta } => beta,
        PolarizationMode::UniformBeta => draw_beta(rng),
    };
    linear_photon(spec.amplitude, beta, spec.delta)
}

/// Emits a pair. Coupled photons share the full Stokes vector, hence the same
/// `S1(0)`; uncoupled photons get independent polarizations.
pub fn emit_pair(spec: &PairSourceSpec, rng: &mut RandomStream) -> (StokesS, StokesS) {
    let first = linear_photon(spec.amplitude, draw_beta(rng), 0.0);
    let second = if spec.coupled {
        first
    } else {
        linear_photon(spec.amplitude, draw_beta(rng), 0.0)
    };
    (first, second)
}
