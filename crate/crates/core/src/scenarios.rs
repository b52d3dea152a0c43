//! The four simulated experiments behind the CLI subcommands, plus the
//! fidelity-versus-energy study, with deterministic text rendering.
//!
//! Scan traces report expected (fit-equivalent) count levels rather than
//! shot-noise realizations, so closed-form column relations hold exactly;
//! Poisson statistics enter through the tomography counts and the Monte
//! Carlo resampling, both driven by streams derived from the single
//! configured seed. The SNR convention is peak gate counts (signal plus
//! background in the same gate) over pump-only background counts.

use serde::Serialize;

use crate::config::{ExperimentConfig, ProbeResponseKind};
use crate::error::{Error, Result};
use crate::kerr::{analyzer_noise_factor, delay_scan, shutter_efficiency, ProbeResponse};
use crate::polarization::MubLabel;
use crate::pulse::measured_fwhm;
use crate::seed;
use crate::timebin::{conversion_probability, simulate_counts, CountRecord};
use crate::tomography::{
    average_fidelity, poisson_uncertainty, process_fidelity, reconstruct_chi, threshold_check,
    ProcessTensor, TomographyDataset,
};

/// Counts-per-setting scale used when simulating without noise: large enough
/// that rounding is invisible at 1e-6 tolerances.
pub const NOISELESS_COUNT_SCALE: f64 = 1e12;

/// The analyzer sits at the crossed output port, 90 degrees from the probe
/// polarization (H), so pump-following noise reaches it through
/// cos^2(90deg - pump angle).
const CROSSED_ANALYZER: MubLabel = MubLabel::V;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayRow {
    pub delay_ps: f64,
    pub eta: f64,
    pub signal_counts: f64,
    pub noise_counts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayScan {
    pub rows: Vec<DelayRow>,
    /// FWHM of the eta trace; absent when the trace has no half-max
    /// crossings inside the scan window.
    pub fwhm_ps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleRow {
    pub theta_deg: f64,
    pub eta: f64,
    pub noise_counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    #[serde(rename = "energy_nJ")]
    pub energy_nj: f64,
    pub eta: f64,
    pub noise_counts: f64,
    /// Absent when there is no background to compare against.
    pub snr: Option<f64>,
}

/// Capped gate efficiency at a given pump angle and phase shift.
fn capped_eta(cfg: &ExperimentConfig, theta_rad: f64, delta_phi: f64) -> f64 {
    cfg.efficiency_cap * shutter_efficiency(theta_rad, delta_phi)
}

/// Gate transmission versus pump delay, with expected count levels.
pub fn run_scan_delay(cfg: &ExperimentConfig, noiseless: bool) -> Result<DelayScan> {
    let pump = cfg.pump_config()?;
    let probe_env = cfg.probe_envelope()?;
    let response = match cfg.probe_response {
        ProbeResponseKind::Convolved => ProbeResponse::Convolved(&probe_env),
        ProbeResponseKind::Instantaneous => ProbeResponse::Instantaneous,
    };
    let delays = cfg.delay_grid_ps();
    let trace = delay_scan(&pump, response, &delays)?;

    let det = cfg.detection_scan()?;
    let noise = cfg.noise_model()?;
    let signal_per_eta = det.rep_rate_hz * det.mean_photon_number * det.channel_efficiency;
    let noise_rate = if noiseless {
        0.0
    } else {
        noise.scaled_rate(pump.energy_nj)
            * analyzer_noise_factor(&noise, CROSSED_ANALYZER, pump.polarization_angle_rad)
    };
    let dark_rate = det.dark_rate_cps * (det.gate_ns * 1e-9) * det.rep_rate_hz;
    let t = det.integration_time_s;

    let rows: Vec<DelayRow> = trace
        .iter()
        .map(|&(delay_ps, raw)| {
            let eta = cfg.efficiency_cap * raw;
            DelayRow {
                delay_ps,
                eta,
                signal_counts: t * (signal_per_eta * eta + noise_rate + dark_rate),
                noise_counts: t * (noise_rate + dark_rate),
            }
        })
        .collect();

    let eta_trace: Vec<(f64, f64)> = rows.iter().map(|r| (r.delay_ps, r.eta)).collect();
    let fwhm_ps = measured_fwhm(&eta_trace).ok();
    Ok(DelayScan { rows, fwhm_ps })
}

/// Gate transmission versus pump polarization angle at the configured pump
/// energy, analyzed at the crossed port.
pub fn run_scan_angle(cfg: &ExperimentConfig, noiseless: bool) -> Result<Vec<AngleRow>> {
    let pump = cfg.pump_config()?;
    let delta_phi = pump.peak_phase();
    let det = cfg.detection_scan()?;
    let noise = cfg.noise_model()?;
    let dark_rate = det.dark_rate_cps * (det.gate_ns * 1e-9) * det.rep_rate_hz;
    let t = det.integration_time_s;
    Ok(cfg
        .angle_grid_deg()
        .iter()
        .map(|&theta_deg| {
            let theta = theta_deg.to_radians();
            let noise_rate = if noiseless {
                0.0
            } else {
                noise.scaled_rate(pump.energy_nj)
                    * analyzer_noise_factor(&noise, CROSSED_ANALYZER, theta)
            };
            AngleRow {
                theta_deg,
                eta: capped_eta(cfg, theta, delta_phi),
                noise_counts: t * (noise_rate + dark_rate),
            }
        })
        .collect())
}

/// Gate transmission and background versus pump energy at the configured
/// pump angle.
pub fn run_scan_energy(cfg: &ExperimentConfig, noiseless: bool) -> Result<Vec<EnergyRow>> {
    let det = cfg.detection_scan()?;
    let noise = cfg.noise_model()?;
    let theta = cfg.pump_angle_rad();
    let signal_per_eta = det.rep_rate_hz * det.mean_photon_number * det.channel_efficiency;
    let dark_rate = det.dark_rate_cps * (det.gate_ns * 1e-9) * det.rep_rate_hz;
    let t = det.integration_time_s;
    let mut rows = Vec::new();
    for &energy_nj in &cfg.energy_grid_nj() {
        let pump = cfg.pump_config_at(energy_nj)?;
        let eta = capped_eta(cfg, theta, pump.peak_phase());
        let noise_rate = if noiseless {
            0.0
        } else {
            noise.scaled_rate(energy_nj) * analyzer_noise_factor(&noise, CROSSED_ANALYZER, theta)
        };
        let background = noise_rate + dark_rate;
        let snr = if background > 0.0 {
            Some((signal_per_eta * eta + background) / background)
        } else {
            None
        };
        rows.push(EnergyRow {
            energy_nj,
            eta,
            noise_counts: t * background,
            snr,
        });
    }
    Ok(rows)
}

/// Simulates the 36-setting dataset at conversion efficiency `eta`.
/// Per-setting seeds are derived from `base_seed` so settings are
/// statistically independent but individually reproducible.
pub fn simulate_dataset(
    cfg: &ExperimentConfig,
    energy_nj: f64,
    eta: f64,
    noiseless: bool,
    base_seed: u64,
) -> Result<TomographyDataset> {
    let det = cfg.detection_tomography()?;
    let pump = cfg.pump_config_at(energy_nj)?;
    let noise = cfg.noise_model()?;
    let mut records = Vec::with_capacity(36);
    for (pi, &prep) in MubLabel::ALL.iter().enumerate() {
        for (ai, &analyzer) in MubLabel::ALL.iter().enumerate() {
            let record = if noiseless {
                let p = conversion_probability(prep, analyzer, eta)?;
                CountRecord {
                    prep,
                    analyzer,
                    counts: (p * NOISELESS_COUNT_SCALE).round() as u64,
                    duration_s: det.integration_time_s,
                }
            } else {
                let setting_seed = seed::derive(base_seed, seed::setting_salt(pi, ai));
                simulate_counts(prep, analyzer, eta, &det, &pump, &noise, setting_seed)?
            };
            records.push(record);
        }
    }
    TomographyDataset::new(records)
}

/// Threshold block of the tomography report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdsJson {
    pub mean_photon_number: f64,
    pub channel_efficiency: f64,
    pub single_photon_bound: f64,
    pub single_photon: &'static str,
    pub weak_coherent_bound: f64,
    pub weak_coherent: &'static str,
}

/// Full tomography result; serializes to the fixed JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    pub chi_real: [[f64; 4]; 4],
    pub chi_imag: [[f64; 4]; 4],
    pub f_proc: f64,
    pub f_avg: f64,
    pub f_proc_fwhm: f64,
    pub thresholds: ThresholdsJson,
    pub seed: u64,
    pub config_echo: ExperimentConfig,
}

/// Conversion efficiency of the gate at the given pump energy under the
/// configured pump geometry.
pub fn gate_efficiency_at(cfg: &ExperimentConfig, energy_nj: f64) -> Result<f64> {
    let pump = cfg.pump_config_at(energy_nj)?;
    Ok(capped_eta(cfg, cfg.pump_angle_rad(), pump.peak_phase()))
}

/// End-to-end tomography experiment: simulate counts, reconstruct, score
/// against the identity process, bootstrap the uncertainty, check
/// thresholds. In noiseless mode the gate is ideal (eta = 1, no background)
/// and counts are exact probabilities at a fixed large scale.
pub fn run_tomography(cfg: &ExperimentConfig, noiseless: bool) -> Result<TomographyReport> {
    let eta = if noiseless {
        1.0
    } else {
        gate_efficiency_at(cfg, cfg.pump_energy_nj)?
    };
    let data = simulate_dataset(
        cfg,
        cfg.pump_energy_nj,
        eta,
        noiseless,
        seed::derive(cfg.seed, seed::scope::TOMOGRAPHY),
    )?;
    let chi = reconstruct_chi(&data, cfg.cptp_mode)?;
    let ideal = ProcessTensor::identity();
    let f_proc = process_fidelity(&ideal, &chi)?;
    let f_avg = average_fidelity(f_proc);
    let unc = poisson_uncertainty(
        &data,
        &ideal,
        cfg.cptp_mode,
        cfg.mc_trials,
        cfg.histogram_bins,
        seed::derive(cfg.seed, seed::scope::MONTE_CARLO),
    )?;
    let verdicts = threshold_check(
        f_avg,
        cfg.mean_photon_number,
        cfg.channel_efficiency,
        &cfg.thresholds(),
    );
    let mut chi_real = [[0.0; 4]; 4];
    let mut chi_imag = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            chi_real[i][j] = chi.matrix()[(i, j)].re;
            chi_imag[i][j] = chi.matrix()[(i, j)].im;
        }
    }
    Ok(TomographyReport {
        chi_real,
        chi_imag,
        f_proc,
        f_avg,
        f_proc_fwhm: unc.fwhm,
        thresholds: ThresholdsJson {
            mean_photon_number: verdicts.mean_photon_number,
            channel_efficiency: verdicts.channel_efficiency,
            single_photon_bound: verdicts.single_photon_bound,
            single_photon: verdicts.single_photon.as_str(),
            weak_coherent_bound: verdicts.weak_coherent_bound,
            weak_coherent: verdicts.weak_coherent.as_str(),
        },
        seed: cfg.seed,
        config_echo: cfg.clone(),
    })
}

/// Average fidelity of the simulated tomography as the pump energy is swept
/// across the gate optimum. Each energy gets its own derived seed stream.
pub fn fidelity_vs_energy(energies_nj: &[f64], cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    if energies_nj.is_empty() {
        return Err(Error::invalid("fidelity scan needs at least one energy"));
    }
    let scan_seed = seed::derive(cfg.seed, seed::scope::ENERGY_FIDELITY);
    let ideal = ProcessTensor::identity();
    let mut out = Vec::with_capacity(energies_nj.len());
    for (k, &energy_nj) in energies_nj.iter().enumerate() {
        let eta = gate_efficiency_at(cfg, energy_nj)?;
        let data = simulate_dataset(
            cfg,
            energy_nj,
            eta,
            false,
            seed::derive(scan_seed, k as u64),
        )?;
        let chi = reconstruct_chi(&data, cfg.cptp_mode)?;
        let f_avg = average_fidelity(process_fidelity(&ideal, &chi)?);
        out.push((energy_nj, f_avg));
    }
    Ok(out)
}

/// CSV rendering. Floats print in Rust's shortest round-trip form with a
/// decimal point guaranteed by f64 Display only for non-integers; columns
/// are comma separated, rows newline terminated, one header row.
pub fn render_delay_csv(scan: &DelayScan) -> String {
    let mut out = String::from("delay_ps,eta,signal_counts,noise_counts\n");
    for r in &scan.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.delay_ps, r.eta, r.signal_counts, r.noise_counts
        ));
    }
    match scan.fwhm_ps {
        Some(v) => out.push_str(&format!("# fwhm_ps = {v}\n")),
        None => out.push_str("# fwhm_ps = nan\n"),
    }
    out
}

pub fn render_angle_csv(rows: &[AngleRow]) -> String {
    let mut out = String::from("theta_deg,eta,noise_counts\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.theta_deg, r.eta, r.noise_counts));
    }
    out
}

pub fn render_energy_csv(rows: &[EnergyRow]) -> String {
    let mut out = String::from("energy_nJ,eta,noise_counts,snr\n");
    for r in rows {
        match r.snr {
            Some(s) => out.push_str(&format!(
                "{},{},{},{}\n",
                r.energy_nj, r.eta, r.noise_counts, s
            )),
            None => out.push_str(&format!(
                "{},{},{},nan\n",
                r.energy_nj, r.eta, r.noise_counts
            )),
        }
    }
    out
}

fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn render_delay_json(scan: &DelayScan) -> Result<String> {
    to_json_line(scan)
}

pub fn render_angle_json(rows: &[AngleRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        rows: &'a [AngleRow],
    }
    to_json_line(&Doc { rows })
}

pub fn render_energy_json(rows: &[EnergyRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        rows: &'a [EnergyRow],
    }
    to_json_line(&Doc { rows })
}

pub fn render_tomography_json(report: &TomographyReport) -> Result<String> {
    to_json_line(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn delay_scan_peaks_at_zero_and_reports_width() {
        let scan = run_scan_delay(&cfg(), false).unwrap();
        let peak = scan
            .rows
            .iter()
            .max_by(|a, b| a.eta.total_cmp(&b.eta))
            .unwrap();
        assert_eq!(peak.delay_ps, 0.0);
        assert!(peak.eta > 0.9 && peak.eta <= 0.97);
        let fwhm = scan.fwhm_ps.unwrap();
        assert!(fwhm > 0.5 && fwhm < 2.0, "fwhm {fwhm}");
        // background is delay independent
        let n0 = scan.rows[0].noise_counts;
        assert!(scan.rows.iter().all(|r| r.noise_counts == n0));
        assert!(n0 > 0.0);
    }

    #[test]
    fn noiseless_delay_scan_has_no_background() {
        let scan = run_scan_delay(&cfg(), true).unwrap();
        assert!(scan.rows.iter().all(|r| r.noise_counts == 0.0));
        let peak = scan
            .rows
            .iter()
            .max_by(|a, b| a.eta.total_cmp(&b.eta))
            .unwrap();
        let c = cfg();
        let expect = c.integration_time_s * 1000.0 * c.scan_mean_photon_number * 0.11 * peak.eta;
        assert_relative_eq!(peak.signal_counts, expect, max_relative = 1e-12);
    }

    #[test]
    fn angle_scan_follows_sin_squared() {
        let rows = run_scan_angle(&cfg(), false).unwrap();
        let at = |deg: f64| rows.iter().find(|r| r.theta_deg == deg).unwrap();
        let a = at(45.0).eta;
        assert!(a > 0.96);
        assert!(at(90.0).eta < 1e-12);
        for r in &rows {
            let model = a * (2.0 * r.theta_deg.to_radians()).sin().powi(2);
            assert_abs_diff_eq!(r.eta, model, epsilon = 1e-9);
        }
        // quarter-turn symmetry on the grid
        for r in rows.iter().filter(|r| r.theta_deg <= 90.0) {
            let twin = at(r.theta_deg + 90.0);
            assert_abs_diff_eq!(r.eta, twin.eta, epsilon = 1e-12);
        }
    }

    #[test]
    fn angle_scan_noise_tracks_the_pump_polarization() {
        let c = cfg();
        let rows = run_scan_angle(&c, false).unwrap();
        let scale = c.noise_rate_ref_cps
            * (c.pump_energy_nj / c.noise_ref_energy_nj).powi(3)
            * c.integration_time_s;
        for r in &rows {
            let axis_gap = std::f64::consts::FRAC_PI_2 - r.theta_deg.to_radians();
            let model = scale * axis_gap.cos().powi(2);
            assert_abs_diff_eq!(r.noise_counts, model, epsilon = 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn energy_scan_hits_the_calibration_point() {
        let rows = run_scan_energy(&cfg(), false).unwrap();
        let at_epi = rows.iter().find(|r| r.energy_nj == 840.0).unwrap();
        assert_eq!(at_epi.eta, 0.97);
        let snr = at_epi.snr.unwrap();
        assert_relative_eq!(snr, 9.2, max_relative = 1e-12);
        // background rises monotonically with energy
        for pair in rows.windows(2) {
            assert!(pair[1].noise_counts > pair[0].noise_counts);
        }
    }

    #[test]
    fn noiseless_energy_scan_has_undefined_snr() {
        let rows = run_scan_energy(&cfg(), true).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.snr.is_none() && r.noise_counts == 0.0));
        let csv = render_energy_csv(&rows);
        assert!(csv.contains(",nan\n"));
    }

    #[test]
    fn noiseless_tomography_certifies_the_identity() {
        let report = run_tomography(&cfg(), true).unwrap();
        assert_abs_diff_eq!(report.chi_real[0][0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.f_avg, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.f_proc, 1.0, epsilon = 1e-6);
        assert!(report.f_proc_fwhm < 1e-4);
    }

    #[test]
    fn default_tomography_lands_in_the_operating_band() {
        let mut c = cfg();
        c.mc_trials = 60; // full-depth Monte Carlo is exercised elsewhere
        let report = run_tomography(&c, false).unwrap();
        assert!(
            report.f_avg > 0.78 && report.f_avg < 0.87,
            "f_avg {}",
            report.f_avg
        );
        assert_relative_eq!(
            report.f_avg,
            (2.0 * report.f_proc + 1.0) / 3.0,
            max_relative = 1e-12
        );
        assert!(report.f_proc_fwhm > 0.0 && report.f_proc_fwhm < 0.1);
        assert_eq!(report.thresholds.single_photon, "above");
        assert_eq!(report.thresholds.weak_coherent, "above");
    }

    #[test]
    fn tomography_is_seed_deterministic() {
        let mut c = cfg();
        c.mc_trials = 20;
        let a = render_tomography_json(&run_tomography(&c, false).unwrap()).unwrap();
        let b = render_tomography_json(&run_tomography(&c, false).unwrap()).unwrap();
        assert_eq!(a, b);
        c.seed = 43;
        let d = render_tomography_json(&run_tomography(&c, false).unwrap()).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn fidelity_peaks_near_the_calibration_energy() {
        let mut c = cfg();
        c.mc_trials = 1;
        let energies: Vec<f64> = [0.6, 0.8, 1.0, 1.2, 1.4]
            .iter()
            .map(|f| f * c.e_pi_nj)
            .collect();
        let trace = fidelity_vs_energy(&energies, &c).unwrap();
        let (best_e, _) = trace
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(
            (best_e - c.e_pi_nj).abs() <= 0.2 * c.e_pi_nj + 1e-9,
            "optimum at {best_e}"
        );
        let f_at = |e: f64| trace.iter().find(|(x, _)| (*x - e).abs() < 1e-9).unwrap().1;
        assert!(f_at(0.6 * c.e_pi_nj) < f_at(c.e_pi_nj));
        assert!(f_at(1.4 * c.e_pi_nj) < f_at(c.e_pi_nj));
    }

    #[test]
    fn csv_rendering_is_stable_and_well_formed() {
        let c = cfg();
        let scan = run_scan_delay(&c, false).unwrap();
        let csv = render_delay_csv(&scan);
        assert!(csv.starts_with("delay_ps,eta,signal_counts,noise_counts\n"));
        assert!(csv.ends_with('\n'));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + scan.rows.len() + 1);
        assert!(lines.last().unwrap().starts_with("# fwhm_ps = "));
        assert_eq!(csv, render_delay_csv(&run_scan_delay(&c, false).unwrap()));

        let angle = render_angle_csv(&run_scan_angle(&c, false).unwrap());
        assert!(angle.starts_with("theta_deg,eta,noise_counts\n"));
        let energy = render_energy_csv(&run_scan_energy(&c, false).unwrap());
        assert!(energy.starts_with("energy_nJ,eta,noise_counts,snr\n"));
    }

    #[test]
    fn scan_json_uses_the_csv_column_names_as_keys() {
        let c = cfg();
        let scan = run_scan_delay(&c, true).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&render_delay_json(&scan).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), scan.rows.len());
        assert!(v["rows"][0].get("delay_ps").is_some());
        assert!(v.get("fwhm_ps").is_some());

        let rows = run_scan_energy(&c, true).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&render_energy_json(&rows).unwrap()).unwrap();
        let first = &v["rows"][0];
        assert!(first.get("energy_nJ").is_some());
        assert!(first["snr"].is_null());

        let rows = run_scan_angle(&c, false).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&render_angle_json(&rows).unwrap()).unwrap();
        assert!(v["rows"][0].get("theta_deg").is_some());
    }

    #[test]
    fn json_report_has_the_fixed_schema() {
        let mut c = cfg();
        c.mc_trials = 10;
        let report = run_tomography(&c, true).unwrap();
        let json = render_tomography_json(&report).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in [
            "chi_real",
            "chi_imag",
            "f_proc",
            "f_avg",
            "f_proc_fwhm",
            "thresholds",
            "seed",
            "config_echo",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        // declaration order is the on-wire order
        let order: Vec<usize> = [
            "\"chi_real\"",
            "\"chi_imag\"",
            "\"f_proc\"",
            "\"f_avg\"",
            "\"f_proc_fwhm\"",
            "\"thresholds\"",
            "\"seed\"",
            "\"config_echo\"",
        ]
        .iter()
        .map(|k| json.find(k).unwrap())
        .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(v["seed"], 42);
        assert_eq!(v["config_echo"]["pump_energy_nj"], 825.0);
    }
}
