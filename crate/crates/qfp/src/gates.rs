//! Target unitaries, gate-quality metrics, and the delay/linear-phase
//! reconfiguration that retargets a cascade from `U(θ,0,0)` to `U(θ,φ,λ)`
//! without touching its interior.

use crate::multiport::{ComputationalGate, Element, MultiportError, QfpConfig};
use ndarray::{array, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("gate fidelity undefined: success probability is zero")]
    ZeroSuccess,
    #[error("cannot reconfigure: {0}")]
    Reconfigure(String),
    #[error(transparent)]
    Multiport(#[from] MultiportError),
}

/// Parameters (θ, φ, λ) of a single-qubit unitary
/// `[[cos(θ/2), −e^{iλ}sin(θ/2)], [e^{iφ}sin(θ/2), e^{i(φ+λ)}cos(θ/2)]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetUnitary {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl TargetUnitary {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Result<Self, GateError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(GateError::OutOfRange {
                name: "theta",
                value: theta,
                range: "[0, π]",
            });
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(GateError::OutOfRange {
                name: "phi",
                value: phi,
                range: "[0, 2π)",
            });
        }
        if !(0.0..TAU).contains(&lambda) {
            return Err(GateError::OutOfRange {
                name: "lambda",
                value: lambda,
                range: "[0, 2π)",
            });
        }
        Ok(TargetUnitary { theta, phi, lambda })
    }

    pub fn matrix(&self) -> Array2<Complex64> {
        let (s, c) = (0.5 * self.theta).sin_cos();
        array![
            [
                Complex64::new(c, 0.0),
                -Complex64::from_polar(s, self.lambda)
            ],
            [
                Complex64::from_polar(s, self.phi),
                Complex64::from_polar(c, self.phi + self.lambda)
            ]
        ]
    }

    /// The state this unitary sends `|0⟩` to: `cos(θ/2)|0⟩ + e^{iφ}sin(θ/2)|1⟩`.
    pub fn ideal_output(&self) -> QubitState {
        let (s, c) = (0.5 * self.theta).sin_cos();
        QubitState::new(Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi))
    }
}

/// Matrix of `U(θ, φ, λ)` after validating the parameter ranges.
pub fn target_unitary(theta: f64, phi: f64, lambda: f64) -> Result<Array2<Complex64>, GateError> {
    Ok(TargetUnitary::new(theta, phi, lambda)?.matrix())
}

/// Amplitude pair of a frequency-bin qubit. Unnormalized pairs occur as
/// post-gate outputs before post-selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub c0: Complex64,
    pub c1: Complex64,
}

impl QubitState {
    pub fn new(c0: Complex64, c1: Complex64) -> Self {
        QubitState { c0, c1 }
    }

    pub fn zero() -> Self {
        QubitState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn one() -> Self {
        QubitState::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        QubitState::new(Complex64::new(r, 0.0), Complex64::new(r, 0.0))
    }

    pub fn minus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        QubitState::new(Complex64::new(r, 0.0), Complex64::new(-r, 0.0))
    }

    pub fn plus_i() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        QubitState::new(Complex64::new(r, 0.0), Complex64::new(0.0, r))
    }

    pub fn minus_i() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        QubitState::new(Complex64::new(r, 0.0), Complex64::new(0.0, -r))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    /// Unit-norm copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<QubitState> {
        let n = self.norm_sqr().sqrt();
        if n <= 0.0 {
            return None;
        }
        Some(QubitState::new(self.c0 / n, self.c1 / n))
    }
}

/// Gate success `P_W = Tr(W†W)/2`: the probability that a photon stays in
/// the computational space.
pub fn success_probability(w: &ComputationalGate) -> f64 {
    0.5 * w.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Gate fidelity `F_W = |Tr(W†U)|² / (4 P_W)` against an arbitrary 2×2
/// matrix. Insensitive to the overall amplitude and phase of `w`.
pub fn fidelity_with_matrix(
    w: &ComputationalGate,
    u: &Array2<Complex64>,
) -> Result<f64, GateError> {
    let p = success_probability(w);
    if p <= 0.0 {
        return Err(GateError::ZeroSuccess);
    }
    let mut tr = Complex64::new(0.0, 0.0);
    for m in 0..2 {
        for n in 0..2 {
            tr += w.matrix()[[m, n]].conj() * u[[m, n]];
        }
    }
    Ok(tr.norm_sqr() / (4.0 * p))
}

/// Gate fidelity of `w` against the target `U(θ, φ, λ)`.
pub fn gate_fidelity(w: &ComputationalGate, u: &TargetUnitary) -> Result<f64, GateError> {
    fidelity_with_matrix(w, &u.matrix())
}

/// Closest unitary to `w` (the unitary polar factor `UV†` of its singular
/// value decomposition). `None` when `w` is singular.
pub fn nearest_unitary(w: &ComputationalGate) -> Option<Array2<Complex64>> {
    let m = w.matrix();
    let det = m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]];
    if det.norm() < 1e-150 {
        return None;
    }
    // W + (det/|det|)·adj(W)† = (σ1+σ2)·UV† for a 2×2 matrix.
    let u = det / det.norm();
    let b = array![
        [m[[0, 0]] + u * m[[1, 1]].conj(), m[[0, 1]] - u * m[[1, 0]].conj()],
        [m[[1, 0]] - u * m[[0, 1]].conj(), m[[1, 1]] + u * m[[0, 0]].conj()]
    ];
    let (s1, s2) = w.singular_values();
    Some(b / Complex64::new(s1 + s2, 0.0))
}

/// Retarget a cascade realizing `g·U(θ,0,0)` to realize `g·U(θ,φ,λ)`.
///
/// Delays the first EOM by `−λ/Δω` and the last by `φ/Δω` (as fractions of
/// the period, mod 1) and adds linear phases `kλ` to the first shaper and
/// `kφ` to the last; a three-element cascade's single shaper receives the
/// sum. Every other setting is untouched, and the transformed multiport
/// satisfies `W̃_mn = e^{i(mφ + nλ)} W_mn` on every bin pair.
pub fn reconfigure(cfg: &QfpConfig, phi: f64, lambda: f64) -> Result<QfpConfig, GateError> {
    let n = cfg.elements().len();
    if n < 3 {
        return Err(GateError::Reconfigure(
            "a lone EOM has no shaper to absorb the linear phases".into(),
        ));
    }
    let mut out = cfg.clone();
    let elements = out.elements_mut();
    if let Element::Eom(w) = &mut elements[0] {
        *w = w.shifted(-lambda / TAU);
    }
    if let Element::Shaper(s) = &mut elements[1] {
        s.add_linear(lambda);
    }
    if let Element::Eom(w) = &mut elements[n - 1] {
        *w = w.shifted(phi / TAU);
    }
    if let Element::Shaper(s) = &mut elements[n - 2] {
        s.add_linear(phi);
    }
    Ok(out)
}

/// Apply a 2×2 matrix to a qubit state; the result is unnormalized when the
/// matrix is subunitary, with squared norm equal to the retention
/// probability.
pub fn apply_gate(matrix: &Array2<Complex64>, s: &QubitState) -> QubitState {
    QubitState::new(
        matrix[[0, 0]] * s.c0 + matrix[[0, 1]] * s.c1,
        matrix[[1, 0]] * s.c0 + matrix[[1, 1]] * s.c1,
    )
}

/// Everything worth keeping about one synthesized gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
    #[serde(rename = "W")]
    pub w: ComputationalGate,
    pub success: f64,
    pub fidelity: f64,
    pub params: Vec<f64>,
    pub scenario: String,
    pub seed: u64,
}
