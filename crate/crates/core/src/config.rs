//! Flat key=value experiment configuration.
//!
//! Keys carry their unit as a suffix (`pump_fwhm_ps`, `gate_ns`). Unknown
//! keys, duplicate keys, and malformed values are rejected with the line
//! number. Every key has a default matching the nominal operating point, so
//! an empty file is a valid configuration.
//!
//! `noise_rate_ref_cps` defaults to the value that calibrates the scan SNR
//! at the reference energy to 9.2 (see [`derived_noise_rate`]); an explicit
//! value wins over the calibration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kerr::{KerrMediumConfig, NoiseModelConfig, PumpConfig};
use crate::pulse::{PulseEnvelope, PulseShape};
use crate::timebin::DetectionConfig;
use crate::tomography::{CptpMode, ThresholdConfig};

/// Scan SNR at the reference energy that the default noise rate is
/// calibrated to reproduce.
pub const CALIBRATED_REF_SNR: f64 = 9.2;

/// How the probe samples the pump-induced phase in delay scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeResponseKind {
    /// Weight the pump intensity by the probe envelope (cross-correlation).
    #[default]
    Convolved,
    /// Treat the probe as a delta in time; the trace maps the pump envelope
    /// through the shutter response directly.
    Instantaneous,
}

impl ProbeResponseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeResponseKind::Convolved => "convolved",
            ProbeResponseKind::Instantaneous => "instantaneous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "convolved" => Ok(ProbeResponseKind::Convolved),
            "instantaneous" => Ok(ProbeResponseKind::Instantaneous),
            other => Err(Error::invalid(format!(
                "unknown probe response '{other}' (expected convolved or instantaneous)"
            ))),
        }
    }
}

impl Serialize for ProbeResponseKind {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Complete experiment description. Field order here fixes the key order of
/// the JSON config echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    // pump
    pub pump_energy_nj: f64,
    pub pump_angle_deg: f64,
    pub pump_shape: PulseShape,
    pub pump_fwhm_ps: f64,
    pub e_pi_nj: f64,
    // probe
    pub probe_shape: PulseShape,
    pub probe_fwhm_ps: f64,
    pub probe_response: ProbeResponseKind,
    pub probe_wavelength_nm: f64,
    // medium
    pub n2_m2_per_w: f64,
    pub effective_length_mm: f64,
    pub medium_transmission: f64,
    // gate imperfection
    pub efficiency_cap: f64,
    // time-bin geometry
    pub bin_separation_ps: f64,
    // detection
    pub mean_photon_number: f64,
    pub scan_mean_photon_number: f64,
    pub channel_efficiency: f64,
    pub rep_rate_hz: f64,
    pub gate_ns: f64,
    pub integration_time_s: f64,
    pub dark_rate_cps: f64,
    // pump-derived noise
    pub noise_rate_ref_cps: f64,
    pub noise_ref_energy_nj: f64,
    pub noise_exponent: f64,
    pub noise_pol_following: bool,
    // delay scan
    pub delay_min_ps: f64,
    pub delay_max_ps: f64,
    pub delay_step_ps: f64,
    // angle scan
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    // energy scan
    pub energy_min_nj: f64,
    pub energy_max_nj: f64,
    pub energy_step_nj: f64,
    // tomography
    pub mc_trials: usize,
    pub histogram_bins: usize,
    pub cptp_mode: CptpMode,
    pub single_photon_bound: f64,
    pub weak_coherent_bound: f64,
    // randomness
    pub seed: u64,
}

/// Noise rate at the reference energy that makes the crossed-analyzer scan
/// SNR equal [`CALIBRATED_REF_SNR`] there: the crossed analyzer passes half
/// the pump-following noise, so
/// rate = 2 * cap * rep * n_scan * efficiency / (SNR - 1).
pub fn derived_noise_rate(cfg: &ExperimentConfig) -> f64 {
    2.0 * cfg.efficiency_cap
        * cfg.rep_rate_hz
        * cfg.scan_mean_photon_number
        * cfg.channel_efficiency
        / (CALIBRATED_REF_SNR - 1.0)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            pump_energy_nj: 825.0,
            pump_angle_deg: 45.0,
            pump_shape: PulseShape::Sinc2,
            pump_fwhm_ps: 1.15,
            e_pi_nj: 840.0,
            probe_shape: PulseShape::Gaussian,
            probe_fwhm_ps: 0.27,
            probe_response: ProbeResponseKind::Convolved,
            probe_wavelength_nm: 710.0,
            n2_m2_per_w: 6.2e-20,
            effective_length_mm: 8.0,
            medium_transmission: 0.82,
            efficiency_cap: 0.97,
            bin_separation_ps: 4.3,
            mean_photon_number: 0.75,
            scan_mean_photon_number: 1.17,
            channel_efficiency: 0.11,
            rep_rate_hz: 1000.0,
            gate_ns: 2.0,
            integration_time_s: 30.0,
            dark_rate_cps: 0.0,
            noise_rate_ref_cps: 0.0,
            noise_ref_energy_nj: 840.0,
            noise_exponent: 3.0,
            noise_pol_following: true,
            delay_min_ps: -4.0,
            delay_max_ps: 4.0,
            delay_step_ps: 0.05,
            angle_min_deg: 0.0,
            angle_max_deg: 180.0,
            angle_step_deg: 5.0,
            energy_min_nj: 60.0,
            energy_max_nj: 1260.0,
            energy_step_nj: 60.0,
            mc_trials: 500,
            histogram_bins: 50,
            cptp_mode: CptpMode::ClipAndNormalize,
            single_photon_bound: 2.0 / 3.0,
            weak_coherent_bound: 0.70,
            seed: 42,
        };
        cfg.noise_rate_ref_cps = derived_noise_rate(&cfg);
        cfg
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid {what}: '{value}'"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!(
            "invalid boolean: '{other}' (expected true or false)"
        )),
    }
}

fn apply_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    match key {
        "pump_energy_nj" => cfg.pump_energy_nj = parse_num(value, "number")?,
        "pump_angle_deg" => cfg.pump_angle_deg = parse_num(value, "number")?,
        "pump_shape" => cfg.pump_shape = PulseShape::parse(value).map_err(|e| e.to_string())?,
        "pump_fwhm_ps" => cfg.pump_fwhm_ps = parse_num(value, "number")?,
        "e_pi_nj" => cfg.e_pi_nj = parse_num(value, "number")?,
        "probe_shape" => cfg.probe_shape = PulseShape::parse(value).map_err(|e| e.to_string())?,
        "probe_fwhm_ps" => cfg.probe_fwhm_ps = parse_num(value, "number")?,
        "probe_response" => {
            cfg.probe_response = ProbeResponseKind::parse(value).map_err(|e| e.to_string())?
        }
        "probe_wavelength_nm" => cfg.probe_wavelength_nm = parse_num(value, "number")?,
        "n2_m2_per_w" => cfg.n2_m2_per_w = parse_num(value, "number")?,
        "effective_length_mm" => cfg.effective_length_mm = parse_num(value, "number")?,
        "medium_transmission" => cfg.medium_transmission = parse_num(value, "number")?,
        "efficiency_cap" => cfg.efficiency_cap = parse_num(value, "number")?,
        "bin_separation_ps" => cfg.bin_separation_ps = parse_num(value, "number")?,
        "mean_photon_number" => cfg.mean_photon_number = parse_num(value, "number")?,
        "scan_mean_photon_number" => cfg.scan_mean_photon_number = parse_num(value, "number")?,
        "channel_efficiency" => cfg.channel_efficiency = parse_num(value, "number")?,
        "rep_rate_hz" => cfg.rep_rate_hz = parse_num(value, "number")?,
        "gate_ns" => cfg.gate_ns = parse_num(value, "number")?,
        "integration_time_s" => cfg.integration_time_s = parse_num(value, "number")?,
        "dark_rate_cps" => cfg.dark_rate_cps = parse_num(value, "number")?,
        "noise_rate_ref_cps" => cfg.noise_rate_ref_cps = parse_num(value, "number")?,
        "noise_ref_energy_nj" => cfg.noise_ref_energy_nj = parse_num(value, "number")?,
        "noise_exponent" => cfg.noise_exponent = parse_num(value, "number")?,
        "noise_pol_following" => cfg.noise_pol_following = parse_bool(value)?,
        "delay_min_ps" => cfg.delay_min_ps = parse_num(value, "number")?,
        "delay_max_ps" => cfg.delay_max_ps = parse_num(value, "number")?,
        "delay_step_ps" => cfg.delay_step_ps = parse_num(value, "number")?,
        "angle_min_deg" => cfg.angle_min_deg = parse_num(value, "number")?,
        "angle_max_deg" => cfg.angle_max_deg = parse_num(value, "number")?,
        "angle_step_deg" => cfg.angle_step_deg = parse_num(value, "number")?,
        "energy_min_nj" => cfg.energy_min_nj = parse_num(value, "number")?,
        "energy_max_nj" => cfg.energy_max_nj = parse_num(value, "number")?,
        "energy_step_nj" => cfg.energy_step_nj = parse_num(value, "number")?,
        "mc_trials" => cfg.mc_trials = parse_num(value, "integer")?,
        "histogram_bins" => cfg.histogram_bins = parse_num(value, "integer")?,
        "cptp_mode" => cfg.cptp_mode = CptpMode::parse(value).map_err(|e| e.to_string())?,
        "single_photon_bound" => cfg.single_photon_bound = parse_num(value, "number")?,
        "weak_coherent_bound" => cfg.weak_coherent_bound = parse_num(value, "number")?,
        "seed" => cfg.seed = parse_num(value, "integer")?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses key=value text. Blank lines and lines starting with `#` are
    /// skipped. Fails with the offending line number on any problem, and
    /// validates the assembled configuration.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut noise_rate_given = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Config {
                line: line_no,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            apply_key(&mut cfg, key, value).map_err(|msg| Error::Config { line: line_no, msg })?;
            if key == "noise_rate_ref_cps" {
                noise_rate_given = true;
            }
        }
        if !noise_rate_given {
            cfg.noise_rate_ref_cps = derived_noise_rate(&cfg);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_fwhm_ps", self.pump_fwhm_ps),
            ("e_pi_nj", self.e_pi_nj),
            ("probe_fwhm_ps", self.probe_fwhm_ps),
            ("probe_wavelength_nm", self.probe_wavelength_nm),
            ("n2_m2_per_w", self.n2_m2_per_w),
            ("effective_length_mm", self.effective_length_mm),
            ("bin_separation_ps", self.bin_separation_ps),
            ("rep_rate_hz", self.rep_rate_hz),
            ("gate_ns", self.gate_ns),
            ("integration_time_s", self.integration_time_s),
            ("noise_ref_energy_nj", self.noise_ref_energy_nj),
            ("delay_step_ps", self.delay_step_ps),
            ("angle_step_deg", self.angle_step_deg),
            ("energy_step_nj", self.energy_step_nj),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{key} must be positive, got {v}")));
            }
        }
        let nonnegative = [
            ("pump_energy_nj", self.pump_energy_nj),
            ("mean_photon_number", self.mean_photon_number),
            ("scan_mean_photon_number", self.scan_mean_photon_number),
            ("dark_rate_cps", self.dark_rate_cps),
            ("noise_rate_ref_cps", self.noise_rate_ref_cps),
            ("energy_min_nj", self.energy_min_nj),
        ];
        for (key, v) in nonnegative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{key} must be nonnegative, got {v}"
                )));
            }
        }
        let unit_interval = [
            ("medium_transmission", self.medium_transmission),
            ("efficiency_cap", self.efficiency_cap),
            ("channel_efficiency", self.channel_efficiency),
        ];
        for (key, v) in unit_interval {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{key} must be in (0, 1], got {v}")));
            }
        }
        if !self.pump_angle_deg.is_finite() {
            return Err(Error::invalid("pump_angle_deg must be finite"));
        }
        if !(self.noise_exponent >= 1.0) || !self.noise_exponent.is_finite() {
            return Err(Error::invalid(format!(
                "noise_exponent must be at least 1, got {}",
                self.noise_exponent
            )));
        }
        for (key, lo, hi) in [
            ("delay", self.delay_min_ps, self.delay_max_ps),
            ("angle", self.angle_min_deg, self.angle_max_deg),
            ("energy", self.energy_min_nj, self.energy_max_nj),
        ] {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::invalid(format!(
                    "{key} scan range is empty or not finite ({lo} .. {hi})"
                )));
            }
        }
        if self.mc_trials == 0 {
            return Err(Error::invalid("mc_trials must be at least 1"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::invalid("histogram_bins must be at least 1"));
        }
        for (key, v) in [
            ("single_photon_bound", self.single_photon_bound),
            ("weak_coherent_bound", self.weak_coherent_bound),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{key} must be in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn pump_angle_rad(&self) -> f64 {
        self.pump_angle_deg.to_radians()
    }

    pub fn pump_envelope(&self) -> Result<PulseEnvelope> {
        PulseEnvelope::new(self.pump_shape, self.pump_fwhm_ps, 0.0, 1.0)
    }

    pub fn probe_envelope(&self) -> Result<PulseEnvelope> {
        PulseEnvelope::new(self.probe_shape, self.probe_fwhm_ps, 0.0, 1.0)
    }

    pub fn pump_config(&self) -> Result<PumpConfig> {
        self.pump_config_at(self.pump_energy_nj)
    }

    pub fn pump_config_at(&self, energy_nj: f64) -> Result<PumpConfig> {
        PumpConfig::new(
            energy_nj,
            self.pump_angle_rad(),
            self.pump_envelope()?,
            self.e_pi_nj,
        )
    }

    pub fn noise_model(&self) -> Result<NoiseModelConfig> {
        NoiseModelConfig::new(
            self.noise_rate_ref_cps,
            self.noise_ref_energy_nj,
            self.noise_exponent,
            self.noise_pol_following,
        )
    }

    pub fn kerr_medium(&self) -> Result<KerrMediumConfig> {
        KerrMediumConfig::new(
            self.n2_m2_per_w,
            self.effective_length_mm * 1e-3,
            self.probe_wavelength_nm * 1e-9,
            self.medium_transmission,
        )
    }

    /// Detection bookkeeping for tomography (time-bin qubits at the channel
    /// mean photon number).
    pub fn detection_tomography(&self) -> Result<DetectionConfig> {
        DetectionConfig::new(
            self.mean_photon_number,
            self.channel_efficiency,
            self.rep_rate_hz,
            self.gate_ns,
            self.integration_time_s,
            self.dark_rate_cps,
        )
    }

    /// Detection bookkeeping for the classical scans, which run at their own
    /// probe attenuation.
    pub fn detection_scan(&self) -> Result<DetectionConfig> {
        DetectionConfig::new(
            self.scan_mean_photon_number,
            self.channel_efficiency,
            self.rep_rate_hz,
            self.gate_ns,
            self.integration_time_s,
            self.dark_rate_cps,
        )
    }

    pub fn thresholds(&self) -> ThresholdConfig {
        ThresholdConfig {
            single_photon_bound: self.single_photon_bound,
            weak_coherent_bound: self.weak_coherent_bound,
        }
    }

    pub fn delay_grid_ps(&self) -> Vec<f64> {
        grid(self.delay_min_ps, self.delay_max_ps, self.delay_step_ps)
    }

    pub fn angle_grid_deg(&self) -> Vec<f64> {
        grid(self.angle_min_deg, self.angle_max_deg, self.angle_step_deg)
    }

    pub fn energy_grid_nj(&self) -> Vec<f64> {
        grid(self.energy_min_nj, self.energy_max_nj, self.energy_step_nj)
    }
}

/// Inclusive arithmetic grid; the small slack absorbs representation error
/// so max lands on the grid when (max - min) is a whole number of steps.
fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_validate_and_calibrate_noise() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let want = 2.0 * 0.97 * 1000.0 * 1.17 * 0.11 / (9.2 - 1.0);
        assert_eq!(cfg.noise_rate_ref_cps, want);
        // calibration closes: crossed-analyzer SNR at the reference energy
        let signal = cfg.rep_rate_hz * cfg.scan_mean_photon_number * cfg.channel_efficiency * 0.97;
        let noise = cfg.noise_rate_ref_cps * 0.5;
        assert_relative_eq!((signal + noise) / noise, 9.2, max_relative = 1e-14);
    }

    #[test]
    fn empty_text_is_the_default_config() {
        let cfg = ExperimentConfig::parse_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn overrides_comments_and_whitespace() {
        let text = "\n# a comment\n  pump_energy_nj = 840 \n\nseed=7\npump_shape = gaussian\n";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(cfg.pump_energy_nj, 840.0);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.pump_shape, PulseShape::Gaussian);
        assert_eq!(cfg.e_pi_nj, 840.0);
    }

    #[test]
    fn derived_noise_follows_overridden_scan_photon_number() {
        let cfg = ExperimentConfig::parse_str("scan_mean_photon_number = 2.34\n").unwrap();
        let want = 2.0 * 0.97 * 1000.0 * 2.34 * 0.11 / (9.2 - 1.0);
        assert_eq!(cfg.noise_rate_ref_cps, want);
        let cfg = ExperimentConfig::parse_str("noise_rate_ref_cps = 5.0\n").unwrap();
        assert_eq!(cfg.noise_rate_ref_cps, 5.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ExperimentConfig::parse_str("seed = 1\nbogus_key = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse_str("pump_energy_nj\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }), "{err}");
        let err = ExperimentConfig::parse_str("\nseed = x\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse_str("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        assert!(ExperimentConfig::parse_str("efficiency_cap = 0\n").is_err());
        assert!(ExperimentConfig::parse_str("efficiency_cap = 1.2\n").is_err());
        assert!(ExperimentConfig::parse_str("delay_min_ps = 5\ndelay_max_ps = -5\n").is_err());
        assert!(ExperimentConfig::parse_str("energy_step_nj = 0\n").is_err());
        assert!(ExperimentConfig::parse_str("mc_trials = 0\n").is_err());
        assert!(ExperimentConfig::parse_str("noise_exponent = 0.5\n").is_err());
        assert!(ExperimentConfig::parse_str("noise_pol_following = yes\n").is_err());
    }

    #[test]
    fn enum_values_round_trip() {
        let text = "probe_response = instantaneous\ncptp_mode = alternating-projection\nnoise_pol_following = false\n";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(cfg.probe_response, ProbeResponseKind::Instantaneous);
        assert_eq!(cfg.cptp_mode, CptpMode::AlternatingProjection);
        assert!(!cfg.noise_pol_following);
    }

    #[test]
    fn grids_hit_their_endpoints() {
        let cfg = ExperimentConfig::default();
        let delays = cfg.delay_grid_ps();
        assert_eq!(delays.len(), 161);
        assert_eq!(delays[0], -4.0);
        assert_eq!(delays[80], 0.0);
        assert_eq!(*delays.last().unwrap(), 4.0);
        let energies = cfg.energy_grid_nj();
        assert_eq!(energies.len(), 21);
        assert!(energies.contains(&840.0));
        let angles = cfg.angle_grid_deg();
        assert_eq!(angles.len(), 37);
        assert_eq!(*angles.last().unwrap(), 180.0);
    }

    #[test]
    fn echo_serializes_with_stable_key_order() {
        let cfg = ExperimentConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.starts_with("{\"pump_energy_nj\":825.0"), "{json}");
        assert!(json.contains("\"pump_shape\":\"sinc2\""));
        assert!(json.contains("\"probe_response\":\"convolved\""));
        assert!(json.contains("\"cptp_mode\":\"clip-normalize\""));
        assert!(json.ends_with("\"seed\":42}"), "{json}");
    }
}
