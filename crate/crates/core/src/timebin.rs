//! Dual-rail time-bin qubits and their conversion to polarization qubits
//! through the Kerr gate.
//!
//! Preparation chain (polarization in, time bins out): a birefringent crystal
//! delays V relative to H by the bin separation (H -> early, V -> late), a
//! diagonal polarizer erases the which-bin polarization marking at the cost
//! of half the light, and a half-wave plate at 22.5 degrees returns both bins
//! to H. A unit input therefore leaves with total norm^2 = 1/2, co-polarized
//! along H, with the original qubit now living in the bin amplitudes.
//!
//! Conversion (time bins in, polarization out): the gate flips the late bin
//! to V with amplitude sqrt(eta) and a recombination crystal re-overlaps the
//! bins. The unconverted late-bin fraction stays H inside the detection gate,
//! an incoherent background of weight (1 - eta) p_late.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::kerr::{analyzer_noise_factor, NoiseModelConfig, PumpConfig};
use crate::linalg::{c, C64, M2, V2, ZERO};
use crate::polarization::{
    half_waveplate, linear_polarizer, mub_state, DensityOperator, MubLabel, PolarizationState,
};

/// A two-bin single-photon state. Each bin carries a complex amplitude and
/// its own polarization ket; total norm^2 over both bins is at most 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBinState {
    pub amp_early: C64,
    pub amp_late: C64,
    pub pol_early: PolarizationState,
    pub pol_late: PolarizationState,
    pub bin_separation_ps: f64,
}

impl TimeBinState {
    pub fn total_norm_sqr(&self) -> f64 {
        self.amp_early.norm_sqr() * self.pol_early.norm_sqr()
            + self.amp_late.norm_sqr() * self.pol_late.norm_sqr()
    }
}

/// Splits a polarization qubit into co-polarized time bins. See the module
/// docs for the optical chain; the closed form below is that chain multiplied
/// out. Input norm is halved by the diagonal polarizer.
pub fn prepare_timebin(s: &PolarizationState, bin_separation_ps: f64) -> Result<TimeBinState> {
    if !(bin_separation_ps > 0.0) || !bin_separation_ps.is_finite() {
        return Err(Error::invalid(format!(
            "bin separation must be positive, got {bin_separation_ps}"
        )));
    }
    let h = mub_state(MubLabel::H);
    Ok(TimeBinState {
        amp_early: s.amp_h * c(std::f64::consts::FRAC_1_SQRT_2),
        amp_late: s.amp_v * c(std::f64::consts::FRAC_1_SQRT_2),
        pol_early: h,
        pol_late: h,
        bin_separation_ps,
    })
}

/// The preparation chain as explicit Jones operators, bin by bin. Used to
/// cross-check the closed form in [`prepare_timebin`]; kept public because it
/// documents the optics.
pub fn prepare_timebin_via_elements(
    s: &PolarizationState,
    bin_separation_ps: f64,
) -> Result<TimeBinState> {
    if !(bin_separation_ps > 0.0) || !bin_separation_ps.is_finite() {
        return Err(Error::invalid(format!(
            "bin separation must be positive, got {bin_separation_ps}"
        )));
    }
    let chain = half_waveplate(std::f64::consts::PI / 8.0)
        .after(&linear_polarizer(std::f64::consts::FRAC_PI_4));
    // the splitting crystal routes the H component to the early bin and the
    // V component to the late bin before the shared polarizer + HWP
    let early = chain.apply(&PolarizationState::new(s.amp_h, ZERO));
    let late = chain.apply(&PolarizationState::new(ZERO, s.amp_v));
    let factor = |v: PolarizationState| -> (C64, PolarizationState) {
        let n = v.norm_sqr().sqrt();
        if n < 1e-300 {
            return (ZERO, mub_state(MubLabel::H));
        }
        // canonical phase: dominant component real positive
        let lead = if v.amp_h.norm() >= v.amp_v.norm() {
            v.amp_h
        } else {
            v.amp_v
        };
        let amp = lead / c(lead.norm()) * c(n);
        (amp, PolarizationState::new(v.amp_h / amp, v.amp_v / amp))
    };
    let (amp_early, pol_early) = factor(early);
    let (amp_late, pol_late) = factor(late);
    Ok(TimeBinState {
        amp_early,
        amp_late,
        pol_early,
        pol_late,
        bin_separation_ps,
    })
}

/// Runs the time-bin qubit through the gate and recombiner, producing a
/// polarization density operator over {H, V}.
///
/// The late bin converts coherently with amplitude sqrt(eta); the remaining
/// (1 - eta) of its population stays H-polarized at the late arrival time,
/// within the detection gate but temporally distinguishable, so it enters as
/// an incoherent |H><H| term. Bins are read through their H components; any
/// V residue in the input bins leaves the analyzed temporal mode at the
/// recombiner and is dropped.
pub fn convert_to_polarization(tb: &TimeBinState, eta: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be in [0, 1], got {eta}")));
    }
    let a_early = tb.amp_early * tb.pol_early.amp_h;
    let a_late = tb.amp_late * tb.pol_late.amp_h;
    let v = V2::new(a_early, a_late * c(eta.sqrt()));
    let mut m: M2 = v * v.adjoint();
    m[(0, 0)] += c((1.0 - eta) * a_late.norm_sqr());
    DensityOperator::from_matrix(m)
}

/// Inverse direction: a polarization qubit enters the gate and leaves as a
/// time-bin qubit (H -> early, V -> late bin, both H-polarized). Returns the
/// state and the leakage weight (1 - eta) p_V that failed to convert.
pub fn convert_to_timebin(
    s: &PolarizationState,
    eta: f64,
    bin_separation_ps: f64,
) -> Result<(TimeBinState, f64)> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be in [0, 1], got {eta}")));
    }
    if !(bin_separation_ps > 0.0) || !bin_separation_ps.is_finite() {
        return Err(Error::invalid(format!(
            "bin separation must be positive, got {bin_separation_ps}"
        )));
    }
    let h = mub_state(MubLabel::H);
    let tb = TimeBinState {
        amp_early: s.amp_h,
        amp_late: s.amp_v * c(eta.sqrt()),
        pol_early: h,
        pol_late: h,
        bin_separation_ps,
    };
    Ok((tb, (1.0 - eta) * s.amp_v.norm_sqr()))
}

/// Click probability behind an ideal analyzer: Tr(|m><m| rho).
pub fn detection_probability(rho: &DensityOperator, analyzer: MubLabel) -> f64 {
    rho.analyzer_expectation(analyzer)
}

/// Detector and source bookkeeping. The mean photon number is defined at the
/// channel input, i.e. after the lossy preparation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub mean_photon_number: f64,
    pub channel_efficiency: f64,
    pub rep_rate_hz: f64,
    pub gate_ns: f64,
    pub integration_time_s: f64,
    pub dark_rate_cps: f64,
}

impl DetectionConfig {
    pub fn new(
        mean_photon_number: f64,
        channel_efficiency: f64,
        rep_rate_hz: f64,
        gate_ns: f64,
        integration_time_s: f64,
        dark_rate_cps: f64,
    ) -> Result<Self> {
        if !(mean_photon_number >= 0.0) || !mean_photon_number.is_finite() {
            return Err(Error::invalid(format!(
                "mean photon number must be nonnegative, got {mean_photon_number}"
            )));
        }
        if !(channel_efficiency > 0.0 && channel_efficiency <= 1.0) {
            return Err(Error::invalid(format!(
                "channel efficiency must be in (0, 1], got {channel_efficiency}"
            )));
        }
        for (name, v) in [
            ("rep rate", rep_rate_hz),
            ("gate width", gate_ns),
            ("integration time", integration_time_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(dark_rate_cps >= 0.0) || !dark_rate_cps.is_finite() {
            return Err(Error::invalid(format!(
                "dark rate must be nonnegative, got {dark_rate_cps}"
            )));
        }
        Ok(Self {
            mean_photon_number,
            channel_efficiency,
            rep_rate_hz,
            gate_ns,
            integration_time_s,
            dark_rate_cps,
        })
    }
}

/// One tomography measurement: counts accumulated for `duration_s` with a
/// given preparation and analyzer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CountRecord {
    pub prep: MubLabel,
    pub analyzer: MubLabel,
    pub counts: u64,
    pub duration_s: f64,
}

/// Probability that a photon which entered the conversion stage ends up at
/// the given analyzer, for a MUB preparation converted at efficiency `eta`.
/// Normalized per prepared photon (the 1/2 preparation loss is part of the
/// source budget, not of the channel).
pub fn conversion_probability(prep: MubLabel, analyzer: MubLabel, eta: f64) -> Result<f64> {
    // the bin separation cancels out here; any valid value works
    let tb = prepare_timebin(&mub_state(prep), 1.0)?;
    let rho = convert_to_polarization(&tb, eta)?.normalized()?;
    Ok(detection_probability(&rho, analyzer))
}

/// Draw from Poisson(mean). Zero mean is a valid edge (no light, no noise).
pub fn sample_poisson(mean: f64, rng: &mut ChaCha12Rng) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid(format!(
            "Poisson mean must be nonnegative, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Numerical(format!("Poisson({mean}) construction failed: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Expected counts for one measurement setting: signal through the conversion
/// channel plus pump-derived background plus gated dark counts.
pub fn expected_counts(
    prep: MubLabel,
    analyzer: MubLabel,
    eta: f64,
    det: &DetectionConfig,
    pump: &PumpConfig,
    noise: &NoiseModelConfig,
) -> Result<f64> {
    let p = conversion_probability(prep, analyzer, eta)?;
    let signal_rate = det.rep_rate_hz * det.mean_photon_number * det.channel_efficiency * p;
    let noise_rate = noise.scaled_rate(pump.energy_nj)
        * analyzer_noise_factor(noise, analyzer, pump.polarization_angle_rad);
    let dark_rate = det.dark_rate_cps * (det.gate_ns * 1e-9) * det.rep_rate_hz;
    Ok(det.integration_time_s * (signal_rate + noise_rate + dark_rate))
}

/// Simulate one counting run. Deterministic for a fixed `rng_seed`.
pub fn simulate_counts(
    prep: MubLabel,
    analyzer: MubLabel,
    eta: f64,
    det: &DetectionConfig,
    pump: &PumpConfig,
    noise: &NoiseModelConfig,
    rng_seed: u64,
) -> Result<CountRecord> {
    let mean = expected_counts(prep, analyzer, eta, det, pump, noise)?;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let counts = sample_poisson(mean, &mut rng)?;
    Ok(CountRecord {
        prep,
        analyzer,
        counts,
        duration_s: det.integration_time_s,
    })
}
