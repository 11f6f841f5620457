//! Truncated frequency-multiport transformations for cascades of
//! electro-optic phase modulators (EOMs) and pulse shapers.
//!
//! A comb of frequency bins spaced by `Δω` hosts the modes; an EOM driven by
//! a `2π/Δω`-periodic phase `A(t)` couples bins through the Fourier
//! coefficients of `e^{iA(t)}`, and a pulse shaper applies an independent
//! static phase per bin. The infinite mode transformation is approximated on
//! a finite window of bins, wide enough that truncation error near the
//! computational pair {0, 1} is negligible.
//!
//! Sign conventions used everywhere in this crate (and pinned by tests
//! against the closed-form beamsplitter):
//!
//! * coefficient `c_j = (1/T) ∫_T e^{iA(t)} e^{+i j Δω t} dt`, so a
//!   single-tone drive `A(t) = Θ sin(Δω t)` gives `c_j = J_{-j}(Θ)`;
//! * the EOM matrix entry is `V_{mn} = c_{m-n}` (output bin `m`, input `n`);
//! * delaying a waveform by a fraction `d` of the period multiplies `c_j`
//!   by `e^{+i j 2π d}`;
//! * cascades multiply in temporal order: the physically first element is
//!   the rightmost factor.

use ndarray::Array2;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

/// Number of uniform samples per drive period used for Fourier analysis.
pub const SAMPLES_PER_PERIOD: usize = 1 << 12;

/// Minimum fraction of unit power the retained sideband orders must carry.
pub const MIN_CAPTURED_POWER: f64 = 0.999;

#[derive(Debug, Error)]
pub enum MultiportError {
    #[error("frequency-grid spacing must be positive, got {0}")]
    InvalidGrid(f64),
    #[error("mode window [{lo}, {hi}] is invalid: must satisfy lo <= 0 and hi >= 1")]
    InvalidWindow { lo: i64, hi: i64 },
    #[error("invalid rf waveform: {0}")]
    InvalidWaveform(String),
    #[error("invalid shaper: {0}")]
    InvalidShaper(String),
    #[error("invalid cascade configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "sideband truncation at order {max_order} captures only {captured:.6} of unit power \
         (needs >= {MIN_CAPTURED_POWER})"
    )]
    TruncationLoss { max_order: usize, captured: f64 },
    #[error(
        "window span {span} exceeds the coefficient band {max_order} while the band captures \
         only {captured:.6} of unit power"
    )]
    WindowExceedsBand {
        span: usize,
        max_order: usize,
        captured: f64,
    },
    #[error("window [{lo}, {hi}] does not contain the computational bins 0 and 1")]
    MissingComputationalBins { lo: i64, hi: i64 },
}

/// The comb of frequency bins: center of bin 0 and the bin spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct FrequencyGrid {
    omega0: f64,
    delta_omega: f64,
    period: f64,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    delta_omega: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    omega0: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<GridRepr> for FrequencyGrid {
    type Error = MultiportError;
    fn try_from(r: GridRepr) -> Result<Self, MultiportError> {
        FrequencyGrid::with_center(r.omega0, r.delta_omega)
    }
}

impl From<FrequencyGrid> for GridRepr {
    fn from(g: FrequencyGrid) -> Self {
        GridRepr {
            delta_omega: g.delta_omega,
            omega0: g.omega0,
        }
    }
}

impl FrequencyGrid {
    /// Grid with spacing `delta_omega` (rad/s), bin 0 centered at zero.
    pub fn new(delta_omega: f64) -> Result<Self, MultiportError> {
        Self::with_center(0.0, delta_omega)
    }

    pub fn with_center(omega0: f64, delta_omega: f64) -> Result<Self, MultiportError> {
        if !(delta_omega > 0.0) || !delta_omega.is_finite() {
            return Err(MultiportError::InvalidGrid(delta_omega));
        }
        Ok(FrequencyGrid {
            omega0,
            delta_omega,
            period: TAU / delta_omega,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    /// Drive period `T = 2π/Δω` in seconds.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Center frequency of bin `n`.
    pub fn bin_frequency(&self, n: i64) -> f64 {
        self.omega0 + n as f64 * self.delta_omega
    }
}

/// Contiguous range of bin indices retained in a truncated simulation.
///
/// Always contains the computational bins 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeWindow {
    lo: i64,
    hi: i64,
}

impl ModeWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self, MultiportError> {
        if lo > 0 || hi < 1 {
            return Err(MultiportError::InvalidWindow { lo, hi });
        }
        Ok(ModeWindow { lo, hi })
    }

    /// Window reaching `half_width` bins below bin 0 and above bin 1.
    pub fn symmetric(half_width: u32) -> Self {
        ModeWindow {
            lo: -(half_width as i64),
            hi: 1 + half_width as i64,
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn dim(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn contains(&self, bin: i64) -> bool {
        bin >= self.lo && bin <= self.hi
    }

    /// Row/column index of `bin` in a matrix over this window.
    pub fn index_of(&self, bin: i64) -> usize {
        debug_assert!(self.contains(bin));
        (bin - self.lo) as usize
    }

    pub fn bins(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// One sinusoidal component of an rf drive: `index · sin(order·Δω·(t − delay·T))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(u32, f64, f64)", into = "(u32, f64, f64)")]
pub struct Harmonic {
    pub order: u32,
    pub index: f64,
    pub delay: f64,
}

impl Harmonic {
    pub fn new(order: u32, index: f64, delay: f64) -> Result<Self, MultiportError> {
        if order == 0 {
            return Err(MultiportError::InvalidWaveform(
                "harmonic order must be a positive integer".into(),
            ));
        }
        if !(index >= 0.0) || !index.is_finite() {
            return Err(MultiportError::InvalidWaveform(format!(
                "modulation index must be nonnegative, got {index}"
            )));
        }
        if !(0.0..1.0).contains(&delay) {
            return Err(MultiportError::InvalidWaveform(format!(
                "delay must lie in [0, 1), got {delay}"
            )));
        }
        Ok(Harmonic {
            order,
            index,
            delay,
        })
    }
}

impl TryFrom<(u32, f64, f64)> for Harmonic {
    type Error = MultiportError;
    fn try_from(t: (u32, f64, f64)) -> Result<Self, MultiportError> {
        Harmonic::new(t.0, t.1, t.2)
    }
}

impl From<Harmonic> for (u32, f64, f64) {
    fn from(h: Harmonic) -> Self {
        (h.order, h.index, h.delay)
    }
}

/// Periodic electro-optic phase drive as a finite sum of harmonics of `Δω`.
///
/// Delays are stored as dimensionless fractions of the drive period so that
/// configurations are independent of the physical grid spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfWaveform {
    harmonics: Vec<Harmonic>,
}

impl RfWaveform {
    pub fn new(harmonics: Vec<Harmonic>) -> Result<Self, MultiportError> {
        for (i, a) in harmonics.iter().enumerate() {
            for b in harmonics.iter().skip(i + 1) {
                if a.order == b.order {
                    return Err(MultiportError::InvalidWaveform(format!(
                        "duplicate harmonic order {}",
                        a.order
                    )));
                }
            }
        }
        Ok(RfWaveform { harmonics })
    }

    /// The zero drive (EOM off).
    pub fn off() -> Self {
        RfWaveform { harmonics: vec![] }
    }

    /// Fundamental-tone drive with modulation index `index` and zero delay.
    pub fn single_tone(index: f64) -> Result<Self, MultiportError> {
        Self::new(vec![Harmonic::new(1, index, 0.0)?])
    }

    pub fn single_tone_delayed(index: f64, delay: f64) -> Result<Self, MultiportError> {
        Self::new(vec![Harmonic::new(1, index, delay)?])
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    /// Sum of the harmonic modulation indices; bounds the sideband spread.
    pub fn total_index(&self) -> f64 {
        self.harmonics.iter().map(|h| h.index).sum()
    }

    /// Shift the whole waveform later in time by `frac` periods (mod 1).
    pub fn shifted(&self, frac: f64) -> Self {
        RfWaveform {
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    delay: (h.delay + frac).rem_euclid(1.0),
                    ..*h
                })
                .collect(),
        }
    }
}

/// Static per-bin phases applied by a pulse shaper.
///
/// The phase of bin `k` is `phases[k] + ramp·k`, where bins outside the
/// stored window take the nearest stored edge value. Edge extension keeps a
/// step pattern's plateaus intact on wider simulation windows, and the
/// separate linear `ramp` term stays exact on every bin, which matters
/// because a linear spectral phase is how a delay is pushed into a shaper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShaperRepr", into = "ShaperRepr")]
pub struct ShaperPhases {
    window: ModeWindow,
    phases: Vec<f64>,
    ramp: f64,
}

#[derive(Serialize, Deserialize)]
struct ShaperRepr {
    lo: i64,
    phases: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    ramp: f64,
}

impl TryFrom<ShaperRepr> for ShaperPhases {
    type Error = MultiportError;
    fn try_from(r: ShaperRepr) -> Result<Self, MultiportError> {
        let window = ModeWindow::new(r.lo, r.lo + r.phases.len() as i64 - 1)?;
        let mut s = ShaperPhases::new(window, r.phases)?;
        s.ramp = r.ramp;
        Ok(s)
    }
}

impl From<ShaperPhases> for ShaperRepr {
    fn from(s: ShaperPhases) -> Self {
        ShaperRepr {
            lo: s.window.lo,
            phases: s.phases,
            ramp: s.ramp,
        }
    }
}

impl ShaperPhases {
    pub fn new(window: ModeWindow, phases: Vec<f64>) -> Result<Self, MultiportError> {
        if phases.len() != window.dim() {
            return Err(MultiportError::InvalidShaper(format!(
                "expected {} phases for window [{}, {}], got {}",
                window.dim(),
                window.lo,
                window.hi,
                phases.len()
            )));
        }
        Ok(ShaperPhases {
            window,
            phases,
            ramp: 0.0,
        })
    }

    /// All-zero phases (transparent shaper) on `window`.
    pub fn flat(window: ModeWindow) -> Self {
        ShaperPhases {
            phases: vec![0.0; window.dim()],
            window,
            ramp: 0.0,
        }
    }

    /// Step pattern: phase 0 on bins below 1, `alpha` on bins 1 and above.
    pub fn step(alpha: f64) -> Self {
        ShaperPhases {
            window: ModeWindow { lo: 0, hi: 1 },
            phases: vec![0.0, alpha],
            ramp: 0.0,
        }
    }

    pub fn window(&self) -> ModeWindow {
        self.window
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn ramp(&self) -> f64 {
        self.ramp
    }

    /// Phase at `bin`: stored value (edge-extended) plus the linear ramp.
    pub fn phase_at(&self, bin: i64) -> f64 {
        let clamped = bin.clamp(self.window.lo, self.window.hi);
        self.phases[(clamped - self.window.lo) as usize] + self.ramp * bin as f64
    }

    /// Add `slope · k` to the phase of every bin `k` (all bins, not just the
    /// stored window).
    pub fn add_linear(&mut self, slope: f64) {
        self.ramp += slope;
    }
}

/// One element of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Eom(RfWaveform),
    Shaper(ShaperPhases),
}

/// An alternating EOM/shaper cascade on a frequency grid, beginning and
/// ending with an EOM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct QfpConfig {
    grid: FrequencyGrid,
    elements: Vec<Element>,
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    grid: FrequencyGrid,
    elements: Vec<Element>,
}

impl TryFrom<ConfigRepr> for QfpConfig {
    type Error = MultiportError;
    fn try_from(r: ConfigRepr) -> Result<Self, MultiportError> {
        QfpConfig::new(r.grid, r.elements)
    }
}

impl From<QfpConfig> for ConfigRepr {
    fn from(c: QfpConfig) -> Self {
        ConfigRepr {
            grid: c.grid,
            elements: c.elements,
        }
    }
}

impl QfpConfig {
    pub fn new(grid: FrequencyGrid, elements: Vec<Element>) -> Result<Self, MultiportError> {
        if elements.is_empty() || elements.len() % 2 == 0 {
            return Err(MultiportError::InvalidConfig(format!(
                "element count must be odd (EOMs and shapers alternating), got {}",
                elements.len()
            )));
        }
        for (i, e) in elements.iter().enumerate() {
            let want_eom = i % 2 == 0;
            let is_eom = matches!(e, Element::Eom(_));
            if want_eom != is_eom {
                return Err(MultiportError::InvalidConfig(format!(
                    "element {i} breaks the EOM/shaper alternation"
                )));
            }
        }
        Ok(QfpConfig { grid, elements })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn elements_mut(&mut self) -> &mut [Element] {
        &mut self.elements
    }

    pub fn num_eoms(&self) -> usize {
        self.elements.len() / 2 + 1
    }

    /// Sum of modulation indices over every EOM in the cascade.
    pub fn total_index(&self) -> f64 {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Eom(w) => Some(w.total_index()),
                Element::Shaper(_) => None,
            })
            .sum()
    }

    /// Window wide enough that truncation cannot disturb the computational
    /// block: half-width `max(16, 4⌈Θ_total⌉ + 8)`. Single-tone sidebands
    /// decay superexponentially beyond order ≈ Θ, so this leaves a large
    /// converged interior.
    pub fn default_window(&self) -> ModeWindow {
        ModeWindow::symmetric(default_half_width(self.total_index()))
    }

    /// Guard depth paired with [`QfpConfig::default_window`].
    pub fn default_guard(&self) -> u32 {
        default_half_width(self.total_index()) / 2
    }

    /// Coefficient order that fills every diagonal of a matrix on `window`.
    pub fn default_max_order(&self, window: ModeWindow) -> usize {
        window.dim() - 1
    }
}

/// Half-width rule behind [`QfpConfig::default_window`].
pub fn default_half_width(total_index: f64) -> u32 {
    (4 * total_index.ceil() as u32 + 8).max(16)
}

/// Drive phase `A(t)` of a waveform at time `t` (seconds).
pub fn eval_waveform(w: &RfWaveform, grid: &FrequencyGrid, t: f64) -> f64 {
    let period = grid.period();
    w.harmonics
        .iter()
        .map(|h| {
            h.index
                * (h.order as f64 * grid.delta_omega() * (t - h.delay * period)).sin()
        })
        .sum()
}

/// Fourier coefficients `c_{-K..K}` of `e^{iA(t)}` for one EOM drive.
#[derive(Debug, Clone)]
pub struct EomCoefficients {
    max_order: usize,
    values: Vec<Complex64>,
    captured: f64,
}

impl EomCoefficients {
    /// Wrap raw coefficient values `c_{-K}, …, c_{K}` (odd length).
    pub fn from_raw(values: Vec<Complex64>) -> Result<Self, MultiportError> {
        if values.len() % 2 == 0 || values.is_empty() {
            return Err(MultiportError::InvalidWaveform(format!(
                "coefficient vector must have odd length 2K+1, got {}",
                values.len()
            )));
        }
        let captured = values.iter().map(|c| c.norm_sqr()).sum();
        Ok(EomCoefficients {
            max_order: values.len() / 2,
            values,
            captured,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Fraction of unit power carried by the retained orders.
    pub fn captured_power(&self) -> f64 {
        self.captured
    }

    /// Coefficient `c_j`; zero outside the retained band.
    pub fn get(&self, j: i64) -> Complex64 {
        let k = self.max_order as i64;
        if j.abs() > k {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(j + k) as usize]
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

static FFT_4096: Lazy<Arc<dyn Fft<f64>>> = Lazy::new(|| {
    FftPlanner::new().plan_fft(SAMPLES_PER_PERIOD, FftDirection::Inverse)
});

/// Fourier-analyze `e^{iA(t)}` over one period by uniform sampling.
///
/// Returns `c_j = (1/T) ∫_T e^{iA(t)} e^{+i j Δω t} dt` for `|j| <= max_order`.
/// Fails if the retained orders capture less than [`MIN_CAPTURED_POWER`] of
/// the unit power, which flags a truncation too aggressive for the drive.
pub fn eom_coefficients(
    w: &RfWaveform,
    grid: &FrequencyGrid,
    max_order: usize,
) -> Result<EomCoefficients, MultiportError> {
    if max_order < 1 {
        return Err(MultiportError::InvalidWaveform(
            "max_order must be at least 1".into(),
        ));
    }
    if max_order >= SAMPLES_PER_PERIOD / 2 {
        return Err(MultiportError::InvalidWaveform(format!(
            "max_order {max_order} exceeds the analysis bandwidth {}",
            SAMPLES_PER_PERIOD / 2 - 1
        )));
    }
    let n = SAMPLES_PER_PERIOD;
    let period = grid.period();
    let mut samples: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * period;
            Complex64::from_polar(1.0, eval_waveform(w, grid, t))
        })
        .collect();
    FFT_4096.process(&mut samples);
    // Unnormalized inverse transform: samples[k] = Σ_n x_n e^{+2πi kn/N}.
    let scale = 1.0 / n as f64;
    let k = max_order as i64;
    let values: Vec<Complex64> = (-k..=k)
        .map(|j| samples[j.rem_euclid(n as i64) as usize] * scale)
        .collect();
    let coeffs = EomCoefficients::from_raw(values)?;
    if coeffs.captured < MIN_CAPTURED_POWER {
        return Err(MultiportError::TruncationLoss {
            max_order,
            captured: coeffs.captured,
        });
    }
    Ok(coeffs)
}

/// Complex square matrix over a finite bin window, approximating the
/// infinite mode transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMultiport {
    window: ModeWindow,
    matrix: Array2<Complex64>,
}

impl TruncatedMultiport {
    pub fn new(window: ModeWindow, matrix: Array2<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), window.dim());
        assert_eq!(matrix.ncols(), window.dim());
        TruncatedMultiport { window, matrix }
    }

    pub fn identity(window: ModeWindow) -> Self {
        TruncatedMultiport {
            matrix: Array2::eye(window.dim()),
            window,
        }
    }

    pub fn window(&self) -> ModeWindow {
        self.window
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Entry coupling input bin `n` to output bin `m`.
    pub fn entry(&self, m: i64, n: i64) -> Complex64 {
        self.matrix[[self.window.index_of(m), self.window.index_of(n)]]
    }
}

/// Banded Toeplitz matrix of one EOM on `window`: entry `(m, n) = c_{m-n}`.
///
/// Diagonals beyond the coefficient band are zero. If the window spans more
/// diagonals than the band covers while the band is missing real power, the
/// zero fill would be unjustified and the call fails instead.
pub fn eom_matrix(
    coeffs: &EomCoefficients,
    window: ModeWindow,
) -> Result<TruncatedMultiport, MultiportError> {
    let dim = window.dim();
    if dim - 1 > coeffs.max_order && coeffs.captured < MIN_CAPTURED_POWER {
        return Err(MultiportError::WindowExceedsBand {
            span: dim - 1,
            max_order: coeffs.max_order,
            captured: coeffs.captured,
        });
    }
    let matrix = Array2::from_shape_fn((dim, dim), |(mi, ni)| {
        coeffs.get(mi as i64 - ni as i64)
    });
    Ok(TruncatedMultiport::new(window, matrix))
}

/// Diagonal matrix of a pulse shaper on its own window; exactly unitary.
pub fn shaper_matrix(s: &ShaperPhases) -> TruncatedMultiport {
    shaper_matrix_on(s, s.window())
}

/// Diagonal matrix of a pulse shaper evaluated on an arbitrary window.
pub fn shaper_matrix_on(s: &ShaperPhases, window: ModeWindow) -> TruncatedMultiport {
    let dim = window.dim();
    let mut matrix = Array2::zeros((dim, dim));
    for (i, bin) in window.bins().enumerate() {
        matrix[[i, i]] = Complex64::from_polar(1.0, s.phase_at(bin));
    }
    TruncatedMultiport::new(window, matrix)
}

fn element_coefficients(
    cfg: &QfpConfig,
    max_order: usize,
) -> Result<Vec<Option<EomCoefficients>>, MultiportError> {
    cfg.elements()
        .iter()
        .map(|e| match e {
            Element::Eom(w) => eom_coefficients(w, cfg.grid(), max_order).map(Some),
            Element::Shaper(_) => Ok(None),
        })
        .collect()
}

/// Full multiport `V = E_{N+1} · S_N · … · S_1 · E_1` on `window`.
///
/// The product applies the physically first element to the input first, so
/// the first EOM is the rightmost factor.
pub fn cascade(
    cfg: &QfpConfig,
    window: ModeWindow,
    max_order: usize,
) -> Result<TruncatedMultiport, MultiportError> {
    let coeffs = element_coefficients(cfg, max_order)?;
    let mut acc: Option<Array2<Complex64>> = None;
    for (e, c) in cfg.elements().iter().zip(&coeffs) {
        let m = match e {
            Element::Eom(_) => eom_matrix(c.as_ref().unwrap(), window)?,
            Element::Shaper(s) => shaper_matrix_on(s, window),
        };
        acc = Some(match acc {
            None => m.matrix,
            Some(prev) => m.matrix.dot(&prev),
        });
    }
    Ok(TruncatedMultiport::new(window, acc.unwrap()))
}

/// 2×2 transformation on the computational bins {0, 1}.
///
/// A submatrix of a unitary, so its singular values never exceed one (up to
/// truncation noise). Serializes as nested `[re, im]` pairs in row-major
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GateRepr", into = "GateRepr")]
pub struct ComputationalGate {
    w: Array2<Complex64>,
}

type GateRepr = [[[f64; 2]; 2]; 2];

impl From<GateRepr> for ComputationalGate {
    fn from(r: GateRepr) -> Self {
        ComputationalGate::from_entries(
            Complex64::new(r[0][0][0], r[0][0][1]),
            Complex64::new(r[0][1][0], r[0][1][1]),
            Complex64::new(r[1][0][0], r[1][0][1]),
            Complex64::new(r[1][1][0], r[1][1][1]),
        )
    }
}

impl From<ComputationalGate> for GateRepr {
    fn from(g: ComputationalGate) -> Self {
        let e = |m: usize, n: usize| [g.w[[m, n]].re, g.w[[m, n]].im];
        [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
    }
}

impl ComputationalGate {
    pub fn new(w: Array2<Complex64>) -> Self {
        assert_eq!(w.shape(), [2, 2]);
        ComputationalGate { w }
    }

    pub fn from_entries(
        w00: Complex64,
        w01: Complex64,
        w10: Complex64,
        w11: Complex64,
    ) -> Self {
        ComputationalGate {
            w: ndarray::array![[w00, w01], [w10, w11]],
        }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.w
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.w[[m, n]]
    }

    /// Singular values, largest first (closed form for the 2×2 case).
    pub fn singular_values(&self) -> (f64, f64) {
        // Eigenvalues of the Hermitian W†W.
        let a = self.w[[0, 0]].norm_sqr() + self.w[[1, 0]].norm_sqr();
        let d = self.w[[0, 1]].norm_sqr() + self.w[[1, 1]].norm_sqr();
        let b = self.w[[0, 0]].conj() * self.w[[0, 1]] + self.w[[1, 0]].conj() * self.w[[1, 1]];
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        (
            (mean + disc).max(0.0).sqrt(),
            (mean - disc).max(0.0).sqrt(),
        )
    }

    /// Largest element-wise difference from another gate.
    pub fn max_abs_diff(&self, other: &ComputationalGate) -> f64 {
        self.w
            .iter()
            .zip(other.w.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// The 2×2 block of `v` on the computational bins {0, 1}.
pub fn extract_computational(v: &TruncatedMultiport) -> Result<ComputationalGate, MultiportError> {
    let w = v.window();
    if !w.contains(0) || !w.contains(1) {
        return Err(MultiportError::MissingComputationalBins {
            lo: w.lo(),
            hi: w.hi(),
        });
    }
    Ok(ComputationalGate::from_entries(
        v.entry(0, 0),
        v.entry(0, 1),
        v.entry(1, 0),
        v.entry(1, 1),
    ))
}

/// Worst deviation of interior row/column power from one.
///
/// Interior bins are those at least `guard` bins away from both window
/// edges; edge rows absorb the truncation error, interior rows quantify it.
pub fn unitarity_defect(v: &TruncatedMultiport, guard: u32) -> f64 {
    let dim = v.window().dim();
    let g = guard as usize;
    assert!(
        2 * g < dim,
        "guard {g} leaves no interior bins in a window of dimension {dim}"
    );
    let m = v.matrix();
    let mut worst = 0.0f64;
    for i in g..dim - g {
        let col: f64 = (0..dim).map(|r| m[[r, i]].norm_sqr()).sum();
        let row: f64 = (0..dim).map(|c| m[[i, c]].norm_sqr()).sum();
        worst = worst.max((col - 1.0).abs()).max((row - 1.0).abs());
    }
    worst
}

/// Computational-space gate of a cascade, computed by propagating the two
/// basis columns instead of forming the full window matrix.
///
/// Numerically identical (to rounding) to
/// `extract_computational(cascade(cfg, window, max_order))` and much cheaper;
/// the synthesis cost function leans on this.
pub fn computational_gate(
    cfg: &QfpConfig,
    window: ModeWindow,
    max_order: usize,
) -> Result<ComputationalGate, MultiportError> {
    if !window.contains(0) || !window.contains(1) {
        return Err(MultiportError::MissingComputationalBins {
            lo: window.lo(),
            hi: window.hi(),
        });
    }
    let coeffs = element_coefficients(cfg, max_order)?;
    let dim = window.dim();
    let lo = window.lo();
    let mut cols = vec![Complex64::new(0.0, 0.0); 2 * dim];
    cols[window.index_of(0)] = Complex64::new(1.0, 0.0);
    cols[dim + window.index_of(1)] = Complex64::new(1.0, 0.0);
    let mut next = vec![Complex64::new(0.0, 0.0); 2 * dim];
    for (e, c) in cfg.elements().iter().zip(&coeffs) {
        match e {
            Element::Eom(_) => {
                let c = c.as_ref().unwrap();
                let k = c.max_order() as i64;
                if dim - 1 > c.max_order() && c.captured_power() < MIN_CAPTURED_POWER {
                    return Err(MultiportError::WindowExceedsBand {
                        span: dim - 1,
                        max_order: c.max_order(),
                        captured: c.captured_power(),
                    });
                }
                next.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                for (col, chunk) in next.chunks_mut(dim).enumerate() {
                    let x = &cols[col * dim..(col + 1) * dim];
                    for (mi, out) in chunk.iter_mut().enumerate() {
                        let m = lo + mi as i64;
                        let n_lo = (m - k).max(lo);
                        let n_hi = (m + k).min(window.hi());
                        let mut sum = Complex64::new(0.0, 0.0);
                        for n in n_lo..=n_hi {
                            sum += c.get(m - n) * x[(n - lo) as usize];
                        }
                        *out = sum;
                    }
                }
                std::mem::swap(&mut cols, &mut next);
            }
            Element::Shaper(s) => {
                for (i, bin) in window.bins().enumerate() {
                    let ph = Complex64::from_polar(1.0, s.phase_at(bin));
                    cols[i] *= ph;
                    cols[dim + i] *= ph;
                }
            }
        }
    }
    let i0 = window.index_of(0);
    let i1 = window.index_of(1);
    Ok(ComputationalGate::from_entries(
        cols[i0],
        cols[dim + i0],
        cols[i1],
        cols[dim + i1],
    ))
}

/// [`computational_gate`] with the window and coefficient order sized
/// automatically from the cascade's total modulation index.
pub fn compute_gate(cfg: &QfpConfig) -> Result<ComputationalGate, MultiportError> {
    let window = cfg.default_window();
    computational_gate(cfg, window, cfg.default_max_order(window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(TAU * 25e9).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_period_consistent() {
        for dw in [0.3, 1.0, TAU * 25e9] {
            let g = FrequencyGrid::new(dw).unwrap();
            assert!((g.period() * g.delta_omega() / TAU - 1.0).abs() < 1e-15);
        }
        assert!(FrequencyGrid::new(0.0).is_err());
        assert!(FrequencyGrid::new(-1.0).is_err());
    }

    #[test]
    fn waveform_zero_drive() {
        let w = RfWaveform::off();
        for t in [0.0, 1e-12, 3.7e-11] {
            assert_eq!(eval_waveform(&w, &grid(), t), 0.0);
        }
    }

    #[test]
    fn waveform_quarter_period() {
        // sin(Δω · T/4) = sin(π/2) = 1
        let g = grid();
        let w = RfWaveform::single_tone(1.0).unwrap();
        let got = eval_waveform(&w, &g, g.period() / 4.0);
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waveform_two_tones_matches_direct_sum() {
        let g = grid();
        let (th1, th2) = (0.7, 1.3);
        let w = RfWaveform::new(vec![
            Harmonic::new(1, th1, 0.0).unwrap(),
            Harmonic::new(2, th2, 0.0).unwrap(),
        ])
        .unwrap();
        for i in 0..97 {
            let t = i as f64 / 97.0 * g.period();
            let direct = th1 * (g.delta_omega() * t).sin() + th2 * (2.0 * g.delta_omega() * t).sin();
            assert!((eval_waveform(&w, &g, t) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn waveform_periodicity() {
        let g = grid();
        let w = RfWaveform::new(vec![
            Harmonic::new(1, 1.1, 0.23).unwrap(),
            Harmonic::new(3, 0.4, 0.81).unwrap(),
        ])
        .unwrap();
        for i in 0..17 {
            let t = i as f64 / 17.0 * g.period();
            let a = eval_waveform(&w, &g, t);
            let b = eval_waveform(&w, &g, t + g.period());
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn coefficients_zero_drive() {
        let co = eom_coefficients(&RfWaveform::off(), &grid(), 4).unwrap();
        assert!((co.get(0) - c(1.0, 0.0)).norm() < 1e-14);
        for j in 1..=4i64 {
            assert!(co.get(j).norm() < 1e-14);
            assert!(co.get(-j).norm() < 1e-14);
        }
    }

    #[test]
    fn jacobi_anger_signed_convention() {
        // Single tone, zero delay: c_j = J_{-j}(Θ). The sign convention is
        // what makes the closed-form beamsplitter cross-check work.
        for theta in [0.1, 0.829, 1.4347, 3.9] {
            let w = RfWaveform::single_tone(theta).unwrap();
            let co = eom_coefficients(&w, &grid(), 24).unwrap();
            for j in -12..=12i64 {
                let expect = bessel_j(-j as i32, theta);
                assert!(
                    (co.get(j) - c(expect, 0.0)).norm() < 1e-10,
                    "theta={theta} j={j}: {} vs {expect}",
                    co.get(j)
                );
            }
        }
    }

    #[test]
    fn equal_splitting_near_analyzer_index() {
        let co = eom_coefficients(&RfWaveform::single_tone(1.4347).unwrap(), &grid(), 16).unwrap();
        let p0 = co.get(0).norm_sqr();
        let p1 = co.get(1).norm_sqr();
        assert!((p0 - p1).abs() < 1e-5, "{p0} vs {p1}");
        assert!((p0 - 0.30).abs() < 0.01);
    }

    #[test]
    fn parseval_capture() {
        for (theta, tones) in [(0.829, 1u32), (3.9, 1), (2.5, 2)] {
            let w = if tones == 1 {
                RfWaveform::single_tone(theta).unwrap()
            } else {
                RfWaveform::new(vec![
                    Harmonic::new(1, theta, 0.1).unwrap(),
                    Harmonic::new(2, theta, 0.6).unwrap(),
                ])
                .unwrap()
            };
            let k = 4 * w.total_index().ceil() as usize + 8;
            let co = eom_coefficients(&w, &grid(), k).unwrap();
            assert!(co.captured_power() <= 1.0 + 1e-12);
            assert!(co.captured_power() >= 1.0 - 1e-9, "{}", co.captured_power());
        }
    }

    #[test]
    fn truncation_loss_flagged() {
        let w = RfWaveform::single_tone(3.9).unwrap();
        match eom_coefficients(&w, &grid(), 2) {
            Err(MultiportError::TruncationLoss { captured, .. }) => assert!(captured < 0.999),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn delay_multiplies_coefficients_by_linear_phase() {
        let theta = 1.7;
        let d = 0.37;
        let g = grid();
        let base = eom_coefficients(&RfWaveform::single_tone(theta).unwrap(), &g, 16).unwrap();
        let delayed =
            eom_coefficients(&RfWaveform::single_tone_delayed(theta, d).unwrap(), &g, 16).unwrap();
        for j in -16..=16i64 {
            let expect = base.get(j) * Complex64::from_polar(1.0, j as f64 * TAU * d);
            assert!(
                (delayed.get(j) - expect).norm() < 1e-10,
                "j={j}: {} vs {expect}",
                delayed.get(j)
            );
        }
    }

    #[test]
    fn eom_matrix_identity_for_delta() {
        let co = eom_coefficients(&RfWaveform::off(), &grid(), 4).unwrap();
        let w = ModeWindow::new(-3, 4).unwrap();
        let m = eom_matrix(&co, w).unwrap();
        for i in 0..w.dim() {
            for j in 0..w.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m.matrix()[[i, j]] - c(expect, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn eom_matrix_tridiagonal_band() {
        // Small-index drive: nearly all power within |j| <= 1.
        let raw = vec![
            c(bessel_j(1, 0.2), 0.0),
            c(bessel_j(0, 0.2), 0.0),
            c(bessel_j(-1, 0.2), 0.0),
        ];
        let co = EomCoefficients::from_raw(raw).unwrap();
        assert!(co.captured_power() >= 0.999);
        let w = ModeWindow::new(-1, 1).unwrap();
        let m = eom_matrix(&co, w).unwrap();
        assert!(m.matrix()[[0, 2]].norm() == 0.0);
        assert!(m.matrix()[[2, 0]].norm() == 0.0);
        for d in -1i64..=1 {
            for i in 0..3i64 {
                let j = i - d;
                if (0..3).contains(&j) {
                    assert_eq!(m.matrix()[[i as usize, j as usize]], co.get(d));
                }
            }
        }
    }

    #[test]
    fn eom_matrix_rejects_wide_window_on_lossy_band() {
        let raw = vec![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)];
        let co = EomCoefficients::from_raw(raw).unwrap();
        assert!(co.captured_power() < 0.999);
        let w = ModeWindow::new(-4, 4).unwrap();
        assert!(matches!(
            eom_matrix(&co, w),
            Err(MultiportError::WindowExceedsBand { .. })
        ));
    }

    #[test]
    fn eom_matrix_interior_row_power() {
        let theta = 0.829;
        let co = eom_coefficients(&RfWaveform::single_tone(theta).unwrap(), &grid(), 40).unwrap();
        let w = ModeWindow::symmetric(20);
        let m = eom_matrix(&co, w).unwrap();
        let v = TruncatedMultiport::new(w, m.matrix().clone());
        assert!(unitarity_defect(&v, 10) < 1e-10);
    }

    #[test]
    fn shaper_matrix_patterns() {
        let w = ModeWindow::new(-2, 3).unwrap();
        let flat = shaper_matrix(&ShaperPhases::flat(w));
        assert_eq!(flat, TruncatedMultiport::identity(w));

        let alpha = 1.234;
        let step = shaper_matrix_on(&ShaperPhases::step(alpha), w);
        for bin in w.bins() {
            let expect = if bin >= 1 {
                Complex64::from_polar(1.0, alpha)
            } else {
                c(1.0, 0.0)
            };
            assert!((step.entry(bin, bin) - expect).norm() < 1e-15);
        }

        let lambda = 0.77;
        let mut ramp = ShaperPhases::flat(w);
        ramp.add_linear(lambda);
        let m = shaper_matrix(&ramp);
        for bin in w.bins() {
            let expect = Complex64::from_polar(1.0, bin as f64 * lambda);
            assert!((m.entry(bin, bin) - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn shaper_edge_extension() {
        let s = ShaperPhases::step(2.0);
        assert_eq!(s.phase_at(-7), 0.0);
        assert_eq!(s.phase_at(0), 0.0);
        assert_eq!(s.phase_at(1), 2.0);
        assert_eq!(s.phase_at(9), 2.0);
    }

    fn three_elem(
        w1: RfWaveform,
        s: ShaperPhases,
        w2: RfWaveform,
    ) -> QfpConfig {
        QfpConfig::new(
            grid(),
            vec![Element::Eom(w1), Element::Shaper(s), Element::Eom(w2)],
        )
        .unwrap()
    }

    #[test]
    fn cascade_identity_elements() {
        let cfg = three_elem(
            RfWaveform::off(),
            ShaperPhases::flat(ModeWindow::new(-2, 3).unwrap()),
            RfWaveform::off(),
        );
        let w = cfg.default_window();
        let v = cascade(&cfg, w, cfg.default_max_order(w)).unwrap();
        assert!(v
            .matrix()
            .iter()
            .zip(TruncatedMultiport::identity(w).matrix().iter())
            .all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn pi_shifted_sinewaves_cancel() {
        // EOM(Θ) then EOM(Θ, delay ½) with a transparent shaper between:
        // the second drive is the negative of the first, so interior bins
        // see the identity.
        let theta = 0.829;
        let cfg = three_elem(
            RfWaveform::single_tone(theta).unwrap(),
            ShaperPhases::flat(ModeWindow::new(-2, 3).unwrap()),
            RfWaveform::single_tone_delayed(theta, 0.5).unwrap(),
        );
        let w = cfg.default_window();
        let v = cascade(&cfg, w, cfg.default_max_order(w)).unwrap();
        let guard = cfg.default_guard() as i64;
        for m in (w.lo() + guard)..=(w.hi() - guard) {
            for n in (w.lo() + guard)..=(w.hi() - guard) {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!(
                    (v.entry(m, n) - c(expect, 0.0)).norm() < 1e-12,
                    "({m},{n}) = {}",
                    v.entry(m, n)
                );
            }
        }
    }

    #[test]
    fn cascade_temporal_order() {
        // EOM(Θ) / ramp shaper / EOM(off): V must equal S·E1, not E1·S.
        let theta = 1.1;
        let lam = 0.9;
        let win = ModeWindow::symmetric(16);
        let mut ramp = ShaperPhases::flat(win);
        ramp.add_linear(lam);
        let cfg = three_elem(
            RfWaveform::single_tone(theta).unwrap(),
            ramp,
            RfWaveform::off(),
        );
        let v = cascade(&cfg, win, win.dim() - 1).unwrap();
        let co = eom_coefficients(&RfWaveform::single_tone(theta).unwrap(), &grid(), win.dim() - 1)
            .unwrap();
        for m in -3..=3i64 {
            for n in -3..=3i64 {
                let expect = Complex64::from_polar(1.0, m as f64 * lam) * co.get(m - n);
                assert!(
                    (v.entry(m, n) - expect).norm() < 1e-12,
                    "({m},{n}): {} vs {expect}",
                    v.entry(m, n)
                );
            }
        }
    }

    #[test]
    fn extract_and_defect_basics() {
        let w = ModeWindow::symmetric(4);
        let id = TruncatedMultiport::identity(w);
        let g = extract_computational(&id).unwrap();
        assert_eq!(g.entry(0, 0), c(1.0, 0.0));
        assert_eq!(g.entry(1, 1), c(1.0, 0.0));
        assert_eq!(g.entry(0, 1), c(0.0, 0.0));
        assert_eq!(unitarity_defect(&id, 2), 0.0);

        // Diagonal multiport with phases (0, π) on bins (0, 1).
        let mut phases = ShaperPhases::flat(w);
        phases.add_linear(std::f64::consts::PI);
        let v = shaper_matrix(&phases);
        let g = extract_computational(&v).unwrap();
        assert!((g.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((g.entry(1, 1) - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn defect_shrinks_with_window() {
        let theta = 0.829;
        let cfg = three_elem(
            RfWaveform::single_tone(theta).unwrap(),
            ShaperPhases::step(1.0),
            RfWaveform::single_tone_delayed(theta, 0.5).unwrap(),
        );
        let mut last = f64::INFINITY;
        for hw in [10u32, 14, 18, 26] {
            let w = ModeWindow::symmetric(hw);
            let v = cascade(&cfg, w, w.dim() - 1).unwrap();
            let d = unitarity_defect(&v, 8);
            assert!(d <= last + 1e-12, "hw={hw}: {d} > {last}");
            last = d;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn column_propagation_matches_full_product() {
        let cfg = three_elem(
            RfWaveform::new(vec![
                Harmonic::new(1, 1.3, 0.12).unwrap(),
                Harmonic::new(2, 0.8, 0.77).unwrap(),
            ])
            .unwrap(),
            ShaperPhases::new(
                ModeWindow::new(-2, 3).unwrap(),
                vec![0.3, 5.1, 2.2, 0.9, 4.4, 1.7],
            )
            .unwrap(),
            RfWaveform::single_tone_delayed(2.4, 0.31).unwrap(),
        );
        let w = cfg.default_window();
        let k = cfg.default_max_order(w);
        let full = extract_computational(&cascade(&cfg, w, k).unwrap()).unwrap();
        let fast = computational_gate(&cfg, w, k).unwrap();
        assert!(full.max_abs_diff(&fast) < 1e-12);
    }

    #[test]
    fn gate_subunitarity_random_configs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..25 {
            let cfg = three_elem(
                RfWaveform::single_tone_delayed(rng.gen_range(0.0..4.0), rng.gen_range(0.0..1.0))
                    .unwrap(),
                ShaperPhases::new(
                    ModeWindow::new(-2, 3).unwrap(),
                    (0..6).map(|_| rng.gen_range(0.0..TAU)).collect(),
                )
                .unwrap(),
                RfWaveform::single_tone_delayed(rng.gen_range(0.0..4.0), rng.gen_range(0.0..1.0))
                    .unwrap(),
            );
            let g = compute_gate(&cfg).unwrap();
            let (smax, _) = g.singular_values();
            assert!(smax <= 1.0 + 1e-9, "σ_max = {smax}");
        }
    }

    #[test]
    fn config_validation() {
        let g = grid();
        let eom = Element::Eom(RfWaveform::off());
        let sh = Element::Shaper(ShaperPhases::step(1.0));
        assert!(QfpConfig::new(g, vec![]).is_err());
        assert!(QfpConfig::new(g, vec![sh.clone()]).is_err());
        assert!(QfpConfig::new(g, vec![eom.clone(), sh.clone()]).is_err());
        assert!(QfpConfig::new(g, vec![eom.clone(), eom.clone(), eom.clone()]).is_err());
        assert!(QfpConfig::new(g, vec![eom.clone()]).is_ok());
        assert!(QfpConfig::new(g, vec![eom.clone(), sh, eom]).is_ok());
    }

    #[test]
    fn config_json_shape() {
        let cfg = three_elem(
            RfWaveform::single_tone(0.829).unwrap(),
            ShaperPhases::step(std::f64::consts::PI),
            RfWaveform::single_tone_delayed(0.829, 0.5).unwrap(),
        );
        let json = serde_json::to_value(&cfg).unwrap();
        assert!(json["grid"]["delta_omega"].is_number());
        assert_eq!(json["elements"][0]["eom"]["harmonics"][0][0], 1);
        assert_eq!(json["elements"][1]["shaper"]["lo"], 0);
        assert_eq!(
            json["elements"][1]["shaper"]["phases"]
                .as_array()
                .unwrap()
                .len(),
            2
        );
        let back: QfpConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_window_rule() {
        assert_eq!(default_half_width(0.0), 16);
        assert_eq!(default_half_width(1.6), 16);
        assert_eq!(default_half_width(3.0), 20);
        assert_eq!(default_half_width(8.0), 40);
    }
}
