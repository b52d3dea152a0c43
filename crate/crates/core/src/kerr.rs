//! The optical Kerr shutter proper: pump-induced birefringence in the Kerr
//! medium, the crossed-polarizer gate transmission, and the pump-derived
//! background noise model.
//!
//! A pump pulse at polarization angle `theta` (from the probe's H axis)
//! induces a transient phase `delta_phi` between the probe components along
//! and across the pump. Between crossed polarizers the gate transmits
//!
//!   eta(theta, delta_phi) = sin^2(2 theta) sin^2(delta_phi / 2)
//!
//! which reaches 1 at theta = 45 degrees and delta_phi = pi.

use crate::error::{Error, Result};
use crate::polarization::{retarder, MubLabel, OpticalElement};
use crate::pulse::{effective_phase_vs_delay, instantaneous_phase_vs_delay, PulseEnvelope};

/// Kerr medium parameters. SI units; the probe wavelength lives here because
/// the nonlinear phase depends on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrMediumConfig {
    pub n2_m2_per_w: f64,
    pub length_eff_m: f64,
    pub probe_wavelength_m: f64,
    pub transmission: f64,
}

impl KerrMediumConfig {
    pub fn new(
        n2_m2_per_w: f64,
        length_eff_m: f64,
        probe_wavelength_m: f64,
        transmission: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("n2", n2_m2_per_w),
            ("effective length", length_eff_m),
            ("probe wavelength", probe_wavelength_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::invalid(format!(
                "transmission must be in (0, 1], got {transmission}"
            )));
        }
        Ok(Self {
            n2_m2_per_w,
            length_eff_m,
            probe_wavelength_m,
            transmission,
        })
    }
}

/// Nonlinear phase accumulated by the probe at pump intensity
/// `intensity_w_per_m2`:  2 pi n2 L_eff I / lambda.
pub fn nonlinear_phase(medium: &KerrMediumConfig, intensity_w_per_m2: f64) -> Result<f64> {
    if !(intensity_w_per_m2 >= 0.0) || !intensity_w_per_m2.is_finite() {
        return Err(Error::invalid(format!(
            "intensity must be nonnegative, got {intensity_w_per_m2}"
        )));
    }
    Ok(
        std::f64::consts::TAU * medium.n2_m2_per_w * medium.length_eff_m * intensity_w_per_m2
            / medium.probe_wavelength_m,
    )
}

/// Pump intensity needed for a given nonlinear phase; inverse of
/// [`nonlinear_phase`].
pub fn intensity_for_phase(medium: &KerrMediumConfig, phase: f64) -> Result<f64> {
    if !(phase >= 0.0) || !phase.is_finite() {
        return Err(Error::invalid(format!(
            "phase must be nonnegative, got {phase}"
        )));
    }
    Ok(phase * medium.probe_wavelength_m
        / (std::f64::consts::TAU * medium.n2_m2_per_w * medium.length_eff_m))
}

/// Gate transmission between crossed polarizers.
pub fn shutter_efficiency(theta: f64, delta_phi: f64) -> f64 {
    let s2t = (2.0 * theta).sin();
    let sph = (delta_phi / 2.0).sin();
    s2t * s2t * sph * sph
}

/// Jones operator of the pumped Kerr medium: a waveplate of retardance
/// `delta_phi` with fast axis along the pump polarization.
pub fn oks_element(theta: f64, delta_phi: f64) -> OpticalElement {
    retarder(theta, delta_phi)
}

/// Pump pulse configuration. `e_pi_nj` is the measured pulse energy that
/// drives the peak phase to pi; it calibrates energy to phase without needing
/// the focal intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfig {
    pub energy_nj: f64,
    pub polarization_angle_rad: f64,
    pub envelope: PulseEnvelope,
    pub e_pi_nj: f64,
}

impl PumpConfig {
    pub fn new(
        energy_nj: f64,
        polarization_angle_rad: f64,
        envelope: PulseEnvelope,
        e_pi_nj: f64,
    ) -> Result<Self> {
        if !(energy_nj >= 0.0) || !energy_nj.is_finite() {
            return Err(Error::invalid(format!(
                "pump energy must be nonnegative, got {energy_nj}"
            )));
        }
        if !(e_pi_nj > 0.0) || !e_pi_nj.is_finite() {
            return Err(Error::invalid(format!(
                "e_pi must be positive, got {e_pi_nj}"
            )));
        }
        if !polarization_angle_rad.is_finite() {
            return Err(Error::invalid("pump angle must be finite"));
        }
        Ok(Self {
            energy_nj,
            polarization_angle_rad,
            envelope,
            e_pi_nj,
        })
    }

    /// Peak nonlinear phase at zero delay: pi * energy / e_pi.
    pub fn peak_phase(&self) -> f64 {
        std::f64::consts::PI * (self.energy_nj / self.e_pi_nj)
    }
}

/// Peak nonlinear phase for a pump energy: pi * energy / e_pi.
pub fn peak_phase_from_energy(pump: &PumpConfig) -> f64 {
    pump.peak_phase()
}

/// Probe model for delay scans: a real envelope gets convolved with the pump,
/// a delta-function probe samples the pump instantaneously.
#[derive(Debug, Clone, Copy)]
pub enum ProbeResponse<'a> {
    Instantaneous,
    Convolved(&'a PulseEnvelope),
}

/// Gate transmission versus pump-probe delay. Returns `(delay_ps, eta)`
/// pairs; `eta` is the ideal crossed-polarizer transmission (no imperfection
/// factor applied).
pub fn delay_scan(
    pump: &PumpConfig,
    probe: ProbeResponse<'_>,
    delays_ps: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if delays_ps.is_empty() {
        return Err(Error::invalid("delay scan needs at least one delay"));
    }
    let peak = pump.peak_phase();
    let theta = pump.polarization_angle_rad;
    delays_ps
        .iter()
        .map(|&d| {
            let phase = match probe {
                ProbeResponse::Instantaneous => {
                    instantaneous_phase_vs_delay(&pump.envelope, peak, d)
                }
                ProbeResponse::Convolved(env) => {
                    effective_phase_vs_delay(&pump.envelope, env, peak, d)?
                }
            };
            Ok((d, shutter_efficiency(theta, phase)))
        })
        .collect()
}

/// Pump-derived background noise (self-phase-modulated photons scattered into
/// the probe band). Empirical power law in pump energy; if
/// `pump_pol_following` is set the noise is polarized along the pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModelConfig {
    /// counts/s at the reference energy, analyzer along the pump
    pub rate_at_ref_cps: f64,
    pub ref_energy_nj: f64,
    /// power-law exponent; at least 1 (the noise turns on nonlinearly)
    pub exponent: f64,
    pub pump_pol_following: bool,
}

impl NoiseModelConfig {
    pub fn new(
        rate_at_ref_cps: f64,
        ref_energy_nj: f64,
        exponent: f64,
        pump_pol_following: bool,
    ) -> Result<Self> {
        if !(rate_at_ref_cps >= 0.0) || !rate_at_ref_cps.is_finite() {
            return Err(Error::invalid(format!(
                "noise rate must be nonnegative, got {rate_at_ref_cps}"
            )));
        }
        if !(ref_energy_nj > 0.0) || !ref_energy_nj.is_finite() {
            return Err(Error::invalid(format!(
                "reference energy must be positive, got {ref_energy_nj}"
            )));
        }
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!(
                "noise exponent must be >= 1, got {exponent}"
            )));
        }
        Ok(Self {
            rate_at_ref_cps,
            ref_energy_nj,
            exponent,
            pump_pol_following,
        })
    }

    /// Total noise rate at a pump energy, before any polarization analysis.
    pub fn scaled_rate(&self, energy_nj: f64) -> f64 {
        self.rate_at_ref_cps * (energy_nj / self.ref_energy_nj).powf(self.exponent)
    }
}

/// Noise rate seen behind a linear analyzer at `analyzer_angle_rad`.
pub fn noise_rate(
    noise: &NoiseModelConfig,
    energy_nj: f64,
    analyzer_angle_rad: f64,
    pump_angle_rad: f64,
) -> f64 {
    let base = noise.scaled_rate(energy_nj);
    if noise.pump_pol_following {
        let co = (analyzer_angle_rad - pump_angle_rad).cos();
        base * co * co
    } else {
        base
    }
}

/// Fraction of the pump-polarized noise an analyzer passes. Linear analyzers
/// project with cos^2 of the angle to the pump; circular analyzers pass half
/// of any linear polarization.
pub fn analyzer_noise_factor(
    noise: &NoiseModelConfig,
    analyzer: MubLabel,
    pump_angle_rad: f64,
) -> f64 {
    if !noise.pump_pol_following {
        return 1.0;
    }
    match analyzer.linear_axis() {
        Some(axis) => {
            let co = (axis - pump_angle_rad).cos();
            co * co
        }
        None => 0.5,
    }
}

/// Signal-to-noise ratio. `signal_counts` are the recorded counts at the gate
/// peak (background included, matching how a fitted peak reads off a scan);
/// `noise_counts` the pump-only background in the same gate.
pub fn snr(signal_counts: f64, noise_counts: f64) -> Result<f64> {
    if !(noise_counts > 0.0) {
        return Err(Error::Analysis(format!(
            "SNR undefined for noise counts {noise_counts}"
        )));
    }
    if !(signal_counts >= 0.0) || !signal_counts.is_finite() {
        return Err(Error::invalid(format!(
            "signal counts must be nonnegative, got {signal_counts}"
        )));
    }
    Ok(signal_counts / noise_counts)
}

/// Crossed-polarizer transmission computed through the matrix route: H in,
/// pumped medium, V analyzer. Equals [`shutter_efficiency`] up to rounding.
pub fn crossed_polarizer_transmission(theta: f64, delta_phi: f64) -> f64 {
    let j = oks_element(theta, delta_phi);
    // <V| J |H> is just the lower-left matrix entry
    j.matrix()[(1, 0)].norm_sqr()
}
