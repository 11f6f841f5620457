//! Frequency-bin qubit gates on an electro-optic modulator / pulse-shaper
//! cascade: truncated multiport simulation, drive-parameter synthesis,
//! closed-form tunable beamsplitters, and Bayesian state tomography of the
//! simulated outputs.
//!
//! Start from the `examples/` directory for runnable walkthroughs of each
//! capability, or the `qfp` binary for file-emitting pipelines.

pub mod beamsplitter;
pub mod bessel;
pub mod gates;
pub mod synthesis;
pub mod multiport;
