//! Closed-form tunable frequency beamsplitter: two π-phase-shifted
//! single-tone EOMs around a pulse shaper whose phase step `α` between the
//! computational bins sets the reflectivity anywhere in [0, 0.5].
//!
//! With `J_k = J_k(Θ)` the computational block is
//!
//! ```text
//! W_10 = W_01 = (1 − e^{iα}) Σ_{k≥1} J_k J_{k−1}
//! W_00 = J_0² + (1 + e^{iα}) (1 − J_0²)/2
//! W_11 = e^{iα} J_0² + (1 + e^{iα}) (1 − J_0²)/2
//! ```
//!
//! and the numeric cascade reproduces it to rounding, which pins the Fourier
//! sign conventions of [`crate::multiport`].

use crate::bessel::bessel_j;
use crate::multiport::{
    ComputationalGate, Element, FrequencyGrid, MultiportError, QfpConfig, RfWaveform,
    ShaperPhases,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeamsplitterError {
    #[error("modulation index must be nonnegative, got {0}")]
    NegativeIndex(f64),
    #[error("series_terms must be at least 8, got {0}")]
    TooFewTerms(usize),
    #[error(transparent)]
    Multiport(#[from] MultiportError),
}

/// Modulation index of the standard design: maximizes the Hadamard fidelity
/// at `α = π`.
pub const DEFAULT_THETA_MOD: f64 = 0.829;

/// Beamsplitter design point: fixed modulation index, tunable shaper step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub theta_mod: f64,
    pub alpha: f64,
    pub series_terms: usize,
}

impl BeamsplitterSpec {
    pub fn new(theta_mod: f64, alpha: f64) -> Result<Self, BeamsplitterError> {
        Self::with_terms(theta_mod, alpha, 40)
    }

    pub fn with_terms(
        theta_mod: f64,
        alpha: f64,
        series_terms: usize,
    ) -> Result<Self, BeamsplitterError> {
        if !(theta_mod >= 0.0) {
            return Err(BeamsplitterError::NegativeIndex(theta_mod));
        }
        if series_terms < 8 {
            return Err(BeamsplitterError::TooFewTerms(series_terms));
        }
        Ok(BeamsplitterSpec {
            theta_mod,
            alpha,
            series_terms,
        })
    }

    /// Standard design at the given step phase.
    pub fn standard(alpha: f64) -> Self {
        BeamsplitterSpec {
            theta_mod: DEFAULT_THETA_MOD,
            alpha,
            series_terms: 40,
        }
    }
}

/// Analytic computational-space matrix `W(α)`.
pub fn bs_matrix(spec: &BeamsplitterSpec) -> ComputationalGate {
    let th = spec.theta_mod;
    let j0sq = bessel_j(0, th).powi(2);
    let cross: f64 = (1..=spec.series_terms as i32)
        .map(|k| bessel_j(k, th) * bessel_j(k - 1, th))
        .sum();
    let phase = Complex64::from_polar(1.0, spec.alpha);
    let one = Complex64::new(1.0, 0.0);
    let w10 = (one - phase) * cross;
    let half = (one + phase) * (0.5 * (1.0 - j0sq));
    let w00 = Complex64::new(j0sq, 0.0) + half;
    let w11 = phase * j0sq + half;
    ComputationalGate::from_entries(w00, w10, w10, w11)
}

/// Mode-hopping and frequency-preserving probabilities `(R, T)`.
pub fn reflectivity_transmissivity(spec: &BeamsplitterSpec) -> (f64, f64) {
    let w = bs_matrix(spec);
    (w.entry(1, 0).norm_sqr(), w.entry(0, 0).norm_sqr())
}

/// Bloch angles `(θ, φ)` of the post-selected output `W|0⟩` for each design
/// point, with the global phase fixed so the `|0⟩` amplitude is real and
/// nonnegative. `θ ∈ [0, π]`; `φ` is wrapped to `(−π, π]` and defined as 0
/// at the poles.
pub fn bloch_trajectory(specs: &[BeamsplitterSpec]) -> Vec<(f64, f64)> {
    specs
        .iter()
        .map(|spec| {
            let w = bs_matrix(spec);
            output_bloch_angles(w.entry(0, 0), w.entry(1, 0))
        })
        .collect()
}

/// Bloch angles of the normalized, phase-stripped state `c0|0⟩ + c1|1⟩`.
pub fn output_bloch_angles(c0: Complex64, c1: Complex64) -> (f64, f64) {
    let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    if norm <= 0.0 {
        return (0.0, 0.0);
    }
    let a0 = c0.norm() / norm;
    let theta = 2.0 * a0.clamp(0.0, 1.0).acos();
    let a1 = c1 / norm;
    if a1.norm() < 1e-12 || a0 < 1e-12 {
        return (theta, 0.0);
    }
    // Strip the global phase: rotate so the |0⟩ amplitude is real ≥ 0.
    let phi = (a1 * (c0 / c0.norm()).conj()).arg();
    (theta, phi)
}

/// Three-element cascade realizing the beamsplitter: `EOM(Θ)`, step shaper,
/// `EOM(Θ)` delayed by half a period (the π-shifted sinewave).
pub fn bs_config(spec: &BeamsplitterSpec, grid: FrequencyGrid) -> Result<QfpConfig, BeamsplitterError> {
    Ok(QfpConfig::new(
        grid,
        vec![
            Element::Eom(RfWaveform::single_tone(spec.theta_mod)?),
            Element::Shaper(ShaperPhases::step(spec.alpha)),
            Element::Eom(RfWaveform::single_tone_delayed(spec.theta_mod, 0.5)?),
        ],
    )?)
}
