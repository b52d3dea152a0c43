//! Jones calculus for polarization qubits.
//!
//! Conventions, fixed once and used everywhere:
//! - States are complex amplitude pairs over the {H, V} linear basis.
//! - Circular states: R = (H + iV)/sqrt(2), L = (H - iV)/sqrt(2).
//! - A retarder with fast axis at angle `theta` (measured from H) and
//!   retardance `delta` is J(theta, delta) = R(theta) diag(1, e^{-i delta}) R(-theta),
//!   where R is the real rotation matrix. With this sign a quarter-wave plate
//!   at 45 degrees maps H to R (up to a global phase), and a half-wave plate is
//!   the real matrix [[cos 2t, sin 2t], [sin 2t, -cos 2t]].
//!
//! Global phase carries no physics; comparisons of states go through
//! [`PolarizationState::overlap`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, frobenius2, herm_eigen2, hermitize2, C64, M2, ONE, V2, ZERO};

pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The six mutually unbiased single-qubit states used for preparation and
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum MubLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl MubLabel {
    pub const ALL: [MubLabel; 6] = [
        MubLabel::H,
        MubLabel::V,
        MubLabel::D,
        MubLabel::A,
        MubLabel::R,
        MubLabel::L,
    ];

    /// The three analyzer bases, each an orthogonal pair.
    pub const BASES: [(MubLabel, MubLabel); 3] = [
        (MubLabel::H, MubLabel::V),
        (MubLabel::D, MubLabel::A),
        (MubLabel::R, MubLabel::L),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MubLabel::H => "H",
            MubLabel::V => "V",
            MubLabel::D => "D",
            MubLabel::A => "A",
            MubLabel::R => "R",
            MubLabel::L => "L",
        }
    }

    /// Orthogonal partner within the same basis.
    pub fn partner(self) -> MubLabel {
        match self {
            MubLabel::H => MubLabel::V,
            MubLabel::V => MubLabel::H,
            MubLabel::D => MubLabel::A,
            MubLabel::A => MubLabel::D,
            MubLabel::R => MubLabel::L,
            MubLabel::L => MubLabel::R,
        }
    }

    /// Pass axis angle for linear analyzers, in radians from H.
    /// Circular analyzers have no axis and return None.
    pub fn linear_axis(self) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            MubLabel::H => Some(0.0),
            MubLabel::V => Some(PI / 2.0),
            MubLabel::D => Some(PI / 4.0),
            MubLabel::A => Some(3.0 * PI / 4.0),
            MubLabel::R | MubLabel::L => None,
        }
    }
}

impl fmt::Display for MubLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MubLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(MubLabel::H),
            "V" => Ok(MubLabel::V),
            "D" => Ok(MubLabel::D),
            "A" => Ok(MubLabel::A),
            "R" => Ok(MubLabel::R),
            "L" => Ok(MubLabel::L),
            other => Err(Error::invalid(format!(
                "unknown state label {other:?}; expected one of H V D A R L"
            ))),
        }
    }
}

/// A (not necessarily normalized) Jones vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub amp_h: C64,
    pub amp_v: C64,
}

impl PolarizationState {
    pub fn new(amp_h: C64, amp_v: C64) -> Self {
        Self { amp_h, amp_v }
    }

    pub fn from_vector(v: V2) -> Self {
        Self {
            amp_h: v[0],
            amp_v: v[1],
        }
    }

    pub fn vector(&self) -> V2 {
        V2::new(self.amp_h, self.amp_v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_h.norm_sqr() + self.amp_v.norm_sqr()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// <self|other>.
    pub fn inner(&self, other: &PolarizationState) -> C64 {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }

    /// |<self|other>|; equals 1 for states identical up to a global phase.
    pub fn overlap(&self, other: &PolarizationState) -> f64 {
        self.inner(other).norm()
    }
}

/// Normalized ket for one of the six standard states.
pub fn mub_state(label: MubLabel) -> PolarizationState {
    let s = FRAC_1_SQRT_2;
    match label {
        MubLabel::H => PolarizationState::new(ONE, ZERO),
        MubLabel::V => PolarizationState::new(ZERO, ONE),
        MubLabel::D => PolarizationState::new(c(s), c(s)),
        MubLabel::A => PolarizationState::new(c(s), c(-s)),
        MubLabel::R => PolarizationState::new(c(s), Complex64::new(0.0, s)),
        MubLabel::L => PolarizationState::new(c(s), Complex64::new(0.0, -s)),
    }
}

/// A 2x2 Jones operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalElement {
    matrix: M2,
}

impl OpticalElement {
    pub fn from_matrix(matrix: M2) -> Self {
        Self { matrix }
    }

    pub fn identity() -> Self {
        Self {
            matrix: M2::identity(),
        }
    }

    pub fn matrix(&self) -> &M2 {
        &self.matrix
    }

    /// Apply this element to a state.
    pub fn apply(&self, s: &PolarizationState) -> PolarizationState {
        PolarizationState::from_vector(self.matrix * s.vector())
    }

    /// Composition: `other` acts first, then `self`.
    pub fn after(&self, other: &OpticalElement) -> OpticalElement {
        OpticalElement {
            matrix: self.matrix * other.matrix,
        }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        frobenius2(&(self.matrix.adjoint() * self.matrix - M2::identity())) <= tol
    }
}

/// General waveplate: fast axis at `axis_angle` (radians from H), retardance
/// `retardance` (radians).
pub fn retarder(axis_angle: f64, retardance: f64) -> OpticalElement {
    let (sin_t, cos_t) = axis_angle.sin_cos();
    let rot = M2::new(c(cos_t), c(-sin_t), c(sin_t), c(cos_t));
    let rot_inv = M2::new(c(cos_t), c(sin_t), c(-sin_t), c(cos_t));
    let phase = Complex64::from_polar(1.0, -retardance);
    let lam = M2::new(ONE, ZERO, ZERO, phase);
    OpticalElement::from_matrix(rot * lam * rot_inv)
}

/// Half-wave plate with fast axis at `axis_angle`.
pub fn half_waveplate(axis_angle: f64) -> OpticalElement {
    retarder(axis_angle, std::f64::consts::PI)
}

/// Quarter-wave plate with fast axis at `axis_angle`.
pub fn quarter_waveplate(axis_angle: f64) -> OpticalElement {
    retarder(axis_angle, std::f64::consts::FRAC_PI_2)
}

/// Ideal linear polarizer passing the axis at `pass_angle` (radians from H).
/// The matrix is the rank-1 projector, hence not unitary.
pub fn linear_polarizer(pass_angle: f64) -> OpticalElement {
    let (s, co) = pass_angle.sin_cos();
    OpticalElement::from_matrix(M2::new(c(co * co), c(co * s), c(s * co), c(s * s)))
}

/// Probability of a click behind an ideal analyzer for `analyzer`, given a
/// normalized input state: |<m|s>|^2.
///
/// The input must be normalized to within 1e-9; anything else is a caller bug
/// (lossy chains should track amplitudes explicitly, then normalize).
pub fn projection_probability(analyzer: MubLabel, s: &PolarizationState) -> Result<f64> {
    if !s.is_normalized(1e-9) {
        return Err(Error::invalid(format!(
            "projection_probability needs a normalized state (norm^2 = {:.12})",
            s.norm_sqr()
        )));
    }
    let m = mub_state(analyzer);
    Ok(m.inner(s).norm_sqr())
}

/// A single-qubit density operator over {H, V}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOperator {
    matrix: M2,
}

impl DensityOperator {
    /// Wrap a matrix, hermitizing away floating-point asymmetry. Rejects
    /// matrices that are not Hermitian to within `1e-10` (absolute,
    /// entrywise) or have a negative trace.
    pub fn from_matrix(matrix: M2) -> Result<Self> {
        let asym = frobenius2(&(matrix - matrix.adjoint()));
        if asym > 1e-10 {
            return Err(Error::invalid(format!(
                "density operator must be Hermitian (asymmetry {asym:.3e})"
            )));
        }
        let m = hermitize2(&matrix);
        let tr = m.trace().re;
        if !(tr >= 0.0) || !tr.is_finite() {
            return Err(Error::invalid(format!(
                "density operator trace {tr} out of range"
            )));
        }
        Ok(Self { matrix: m })
    }

    /// |s><s| for a pure (possibly sub-normalized) state.
    pub fn from_pure(s: &PolarizationState) -> Self {
        let v = s.vector();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    pub fn matrix(&self) -> &M2 {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        herm_eigen2(&self.matrix).0[0]
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Rescale to unit trace. Errors on (numerically) zero trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 1e-300 {
            return Err(Error::Numerical(
                "cannot normalize a zero-trace operator".into(),
            ));
        }
        Ok(Self {
            matrix: self.matrix / c(tr),
        })
    }

    /// <m|rho|m> for the analyzer ket `m`.
    pub fn analyzer_expectation(&self, analyzer: MubLabel) -> f64 {
        let m = mub_state(analyzer).vector();
        (m.adjoint() * self.matrix * m)[(0, 0)].re
    }
}
