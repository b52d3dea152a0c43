//! Temporal intensity envelopes for the pump and probe pulses, and the
//! pump-probe overlap integral that sets the phase a delayed probe actually
//! samples.
//!
//! All times are picoseconds. Envelope widths are intensity FWHM.

use crate::error::{Error, Result};

/// Where sinc^2(x) = (sin x / x)^2 falls to 1/2. Solves the half-max
/// condition for the top-hat-spectrum (sinc^2 intensity) pulse shape.
pub const SINC2_HALF_MAX_X: f64 = 1.391_557_378_251_51;

/// Step used by the overlap quadrature when none is given: 1 fs.
pub const DEFAULT_QUADRATURE_STEP_PS: f64 = 1e-3;

/// Half-range of the overlap quadrature, in units of the summed FWHMs.
const QUADRATURE_RANGE_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    /// exp(-4 ln2 (t-c)^2 / fwhm^2)
    Gaussian,
    /// sinc^2(k (t-c)) with k chosen so the intensity FWHM matches
    Sinc2,
}

impl serde::Serialize for PulseShape {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl PulseShape {
    pub fn as_str(self) -> &'static str {
        match self {
            PulseShape::Gaussian => "gaussian",
            PulseShape::Sinc2 => "sinc2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(PulseShape::Gaussian),
            "sinc2" => Ok(PulseShape::Sinc2),
            other => Err(Error::invalid(format!(
                "unknown pulse shape {other:?}; expected gaussian or sinc2"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnvelope {
    pub shape: PulseShape,
    pub fwhm_ps: f64,
    pub center_ps: f64,
    pub peak_intensity: f64,
}

impl PulseEnvelope {
    pub fn new(
        shape: PulseShape,
        fwhm_ps: f64,
        center_ps: f64,
        peak_intensity: f64,
    ) -> Result<Self> {
        if !(fwhm_ps > 0.0) || !fwhm_ps.is_finite() {
            return Err(Error::invalid(format!(
                "pulse fwhm must be positive, got {fwhm_ps}"
            )));
        }
        if !(peak_intensity >= 0.0) || !peak_intensity.is_finite() {
            return Err(Error::invalid(format!(
                "peak intensity must be finite and nonnegative, got {peak_intensity}"
            )));
        }
        if !center_ps.is_finite() {
            return Err(Error::invalid(format!(
                "pulse center must be finite, got {center_ps}"
            )));
        }
        Ok(Self {
            shape,
            fwhm_ps,
            center_ps,
            peak_intensity,
        })
    }

    /// Intensity at time `t_ps`. Maximum `peak_intensity` sits at the center;
    /// the intensity falls to half the peak at center +- fwhm/2.
    pub fn intensity_at(&self, t_ps: f64) -> f64 {
        let dt = t_ps - self.center_ps;
        match self.shape {
            PulseShape::Gaussian => {
                let arg = 4.0 * std::f64::consts::LN_2 * dt * dt / (self.fwhm_ps * self.fwhm_ps);
                self.peak_intensity * (-arg).exp()
            }
            PulseShape::Sinc2 => {
                let x = 2.0 * SINC2_HALF_MAX_X * dt / self.fwhm_ps;
                let s = sinc(x);
                self.peak_intensity * s * s
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Intensity FWHM of a sampled trace `(t, y)` via linear interpolation of the
/// half-max crossings on both sides of the maximum.
///
/// The trace must be sampled on strictly increasing times and actually cross
/// half-max on both flanks, otherwise this is an analysis error.
pub fn measured_fwhm(trace: &[(f64, f64)]) -> Result<f64> {
    if trace.len() < 3 {
        return Err(Error::Analysis(format!(
            "need at least 3 samples to measure a width, got {}",
            trace.len()
        )));
    }
    for w in trace.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Analysis(
                "trace times must be strictly increasing".into(),
            ));
        }
    }
    let (imax, &(_, ymax)) = trace
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("nonempty");
    if !(ymax > 0.0) || !ymax.is_finite() {
        return Err(Error::Analysis(format!(
            "trace maximum {ymax} is not a positive number"
        )));
    }
    let half = ymax / 2.0;

    let cross = |i0: usize, i1: usize| -> f64 {
        // linear interpolation between samples straddling the half level
        let (x0, y0) = trace[i0];
        let (x1, y1) = trace[i1];
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };

    let left = (0..imax)
        .rev()
        .find(|&i| trace[i].1 < half)
        .map(|i| cross(i, i + 1));
    let right = (imax + 1..trace.len())
        .find(|&i| trace[i].1 < half)
        .map(|i| cross(i - 1, i));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Analysis(
            "trace does not cross half-maximum on both sides of its peak".into(),
        )),
    }
}

/// Phase sampled by a delayed probe of finite duration:
///
///   peak_phase * Int I_pump(t - delay) I_probe(t) dt
///             / (I_pump_peak * Int I_probe(t) dt)
///
/// Trapezoid quadrature with the given step over
/// probe_center +- 5 (pump_fwhm + probe_fwhm).
pub fn effective_phase_vs_delay_with_step(
    pump: &PulseEnvelope,
    probe: &PulseEnvelope,
    peak_phase: f64,
    delay_ps: f64,
    step_ps: f64,
) -> Result<f64> {
    if !(step_ps > 0.0) || !step_ps.is_finite() {
        return Err(Error::invalid(format!(
            "quadrature step must be positive, got {step_ps}"
        )));
    }
    if pump.peak_intensity == 0.0 {
        return Ok(0.0);
    }
    let half_range = QUADRATURE_RANGE_FACTOR * (pump.fwhm_ps + probe.fwhm_ps);
    let n = (2.0 * half_range / step_ps).ceil() as usize;
    let t0 = probe.center_ps - half_range;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=n {
        let t = t0 + step_ps * i as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let ipr = probe.intensity_at(t);
        num += w * pump.intensity_at(t - delay_ps) * ipr;
        den += w * ipr;
    }
    // the step length cancels between numerator and denominator
    Ok(peak_phase * num / (pump.peak_intensity * den))
}

/// [`effective_phase_vs_delay_with_step`] at the default 1 fs step.
pub fn effective_phase_vs_delay(
    pump: &PulseEnvelope,
    probe: &PulseEnvelope,
    peak_phase: f64,
    delay_ps: f64,
) -> Result<f64> {
    effective_phase_vs_delay_with_step(
        pump,
        probe,
        peak_phase,
        delay_ps,
        DEFAULT_QUADRATURE_STEP_PS,
    )
}

/// Delta-function-probe limit of the overlap: the probe samples the pump
/// intensity at a single instant (t = 0).
pub fn instantaneous_phase_vs_delay(pump: &PulseEnvelope, peak_phase: f64, delay_ps: f64) -> f64 {
    if pump.peak_intensity == 0.0 {
        return 0.0;
    }
    peak_phase * pump.intensity_at(-delay_ps) / pump.peak_intensity
}
