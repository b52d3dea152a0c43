//! Cross-module invariants checked on randomized inputs.

use proptest::prelude::*;

use oks_core::config::ExperimentConfig;
use oks_core::kerr::{crossed_polarizer_transmission, shutter_efficiency};
use oks_core::linalg::{herm_inv_sqrt2, C64, M2, M4};
use oks_core::polarization::MubLabel;
use oks_core::scenarios::{run_scan_angle, run_scan_delay, run_scan_energy};
use oks_core::timebin::{conversion_probability, CountRecord};
use oks_core::tomography::{
    average_fidelity, pauli, process_fidelity, reconstruct_chi, setting_probability, CptpMode,
    ProcessTensor, TomographyDataset,
};

/// Two-Kraus channel from 16 real degrees of freedom; `None` when the draw
/// is too close to singular to orthonormalize.
fn channel_from(reals: &[f64; 16]) -> Option<ProcessTensor> {
    let cplx = |k: usize| C64::new(reals[2 * k], reals[2 * k + 1]);
    let a = M2::new(cplx(0), cplx(1), cplx(2), cplx(3));
    let b = M2::new(cplx(4), cplx(5), cplx(6), cplx(7));
    let gram = a.adjoint() * a + b.adjoint() * b;
    let w = herm_inv_sqrt2(&gram).ok()?;
    let kraus = [a * w, b * w];
    let mut chi = M4::zeros();
    for k in &kraus {
        let mut c = [C64::new(0.0, 0.0); 4];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = (pauli(i) * k).trace() * 0.5;
        }
        for i in 0..4 {
            for j in 0..4 {
                chi[(i, j)] += c[i] * c[j].conj();
            }
        }
    }
    ProcessTensor::from_matrix(chi).ok()
}

fn dataset_from_counts(counts: &[u64]) -> TomographyDataset {
    let mut records = Vec::with_capacity(36);
    let mut k = 0;
    for &prep in &MubLabel::ALL {
        for &analyzer in &MubLabel::ALL {
            records.push(CountRecord {
                prep,
                analyzer,
                counts: counts[k],
                duration_s: 1.0,
            });
            k += 1;
        }
    }
    TomographyDataset::new(records).unwrap()
}

proptest! {
    #[test]
    fn both_transmission_routes_agree(theta in 0.0..std::f64::consts::PI,
                                      delta_phi in 0.0..(2.0 * std::f64::consts::PI)) {
        let matrix_route = crossed_polarizer_transmission(theta, delta_phi);
        let closed_form = shutter_efficiency(theta, delta_phi);
        prop_assert!((matrix_route - closed_form).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&matrix_route));
    }

    #[test]
    fn random_channels_survive_the_probability_round_trip(
        reals in prop::array::uniform16(-1.0..1.0f64)
    ) {
        let Some(truth) = channel_from(&reals) else { return Ok(()) };
        let mut counts = [0u64; 36];
        let mut k = 0;
        for &prep in &MubLabel::ALL {
            for &analyzer in &MubLabel::ALL {
                let p = setting_probability(&truth, prep, analyzer);
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(&p));
                counts[k] = (p * 1e12).round() as u64;
                k += 1;
            }
        }
        // analyzer pairs of one basis exhaust the outcomes
        for pair in counts.chunks(2) {
            prop_assert!((pair[0] + pair[1]) as f64 / 1e12 - 1.0 < 1e-9);
        }
        let rebuilt = reconstruct_chi(&dataset_from_counts(&counts), CptpMode::ClipAndNormalize)
            .unwrap();
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((rebuilt.matrix()[(i, j)] - truth.matrix()[(i, j)]).norm());
            }
        }
        prop_assert!(worst <= 1e-6, "max entry error {worst:.3e}");
    }

    #[test]
    fn any_counts_reconstruct_to_a_physical_channel(
        counts in prop::collection::vec(1u64..5000, 36)
    ) {
        let chi = reconstruct_chi(&dataset_from_counts(&counts), CptpMode::ClipAndNormalize)
            .unwrap();
        prop_assert!(chi.min_eigenvalue() >= -1e-9);
        prop_assert!(chi.tp_residual() <= 1e-8);
        let m = chi.matrix();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((m[(i, j)] - m[(j, i)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_is_symmetric_normalized_and_affine(
        reals_a in prop::array::uniform16(-1.0..1.0f64),
        reals_b in prop::array::uniform16(-1.0..1.0f64)
    ) {
        let (Some(a), Some(b)) = (channel_from(&reals_a), channel_from(&reals_b)) else {
            return Ok(());
        };
        let ab = process_fidelity(&a, &b).unwrap();
        let ba = process_fidelity(&b, &a).unwrap();
        // the matrix square roots lose about half the mantissa near
        // rank-deficient inputs, so symmetry holds to sqrt(eps) only
        prop_assert!((ab - ba).abs() < 1e-7);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&ab));
        prop_assert!((process_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((average_fidelity(ab) - (2.0 * ab + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn conversion_outcomes_per_basis_are_exhaustive(eta in 0.0..=1.0f64) {
        for &prep in &MubLabel::ALL {
            for (m, m_partner) in MubLabel::BASES {
                let p = conversion_probability(prep, m, eta).unwrap();
                let q = conversion_probability(prep, m_partner, eta).unwrap();
                prop_assert!((p + q - 1.0).abs() < 1e-12);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
            }
        }
    }

    #[test]
    fn scan_efficiencies_stay_inside_the_physical_window(energy in 1.0..2000.0f64,
                                                         angle_deg in 0.0..180.0f64) {
        let cfg = ExperimentConfig {
            pump_energy_nj: energy,
            pump_angle_deg: angle_deg,
            delay_step_ps: 0.5, // coarse grid keeps the convolution cheap
            ..ExperimentConfig::default()
        };
        for row in run_scan_delay(&cfg, true).unwrap().rows {
            prop_assert!((-1e-12..=cfg.efficiency_cap + 1e-12).contains(&row.eta));
        }
        for row in run_scan_angle(&cfg, true).unwrap() {
            prop_assert!((-1e-12..=cfg.efficiency_cap + 1e-12).contains(&row.eta));
        }
        for row in run_scan_energy(&cfg, true).unwrap() {
            prop_assert!((-1e-12..=cfg.efficiency_cap + 1e-12).contains(&row.eta));
        }
    }
}
