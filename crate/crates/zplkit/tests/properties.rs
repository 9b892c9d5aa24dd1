//! Property-based invariants across the analysis modules.

use proptest::prelude::*;

use zplkit::classify::{phonon_region, stokes_shift, PhononCatalog, RegionLabel};
use zplkit::polarfit::{delta_theta, fit_cos2};
use zplkit::spectra::{
    energy_counts_to_wavelength_counts, mirror_band, to_stokes_axis,
    wavelength_counts_to_energy_counts, AxisKind, Spectrum, UnitsKind,
};
use zplkit::vibronic::{franck_condon_factor, overlap_oracle};

fn increasing_axis(lo: f64, hi: f64, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(move |steps| {
        let total: f64 = steps.iter().sum();
        let mut axis = Vec::with_capacity(n + 1);
        let mut acc = lo;
        axis.push(acc);
        for s in steps {
            acc += s / total * (hi - lo);
            axis.push(acc);
        }
        axis
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn franck_condon_symmetric_and_bounded(
        s in 0.0f64..6.0,
        n in 0u32..18,
        n_star in 0u32..18,
    ) {
        let a = franck_condon_factor(s, n, n_star).unwrap();
        let b = franck_condon_factor(s, n_star, n).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn franck_condon_matches_quadrature(
        s in 0.0f64..5.0,
        n in 0u32..12,
        n_star in 0u32..12,
    ) {
        let direct = franck_condon_factor(s, n, n_star).unwrap();
        let quad = overlap_oracle(s, n, n_star).unwrap();
        prop_assert!((direct - quad).abs() <= 1e-8,
            "S={}, ({}, {}): {} vs {}", s, n, n_star, direct, quad);
    }

    #[test]
    fn delta_theta_properties(
        a in -720.0f64..720.0,
        b in -720.0f64..720.0,
        k in -3i32..=3,
    ) {
        let d = delta_theta(a, b);
        prop_assert!((0.0..=90.0).contains(&d));
        // symmetry
        prop_assert!((delta_theta(b, a) - d).abs() < 1e-9);
        // period-180 invariance in either argument
        let shifted = delta_theta(a + 180.0 * f64::from(k), b);
        prop_assert!((shifted - d).abs() < 1e-9);
    }

    #[test]
    fn cos2_fit_equivariance(
        theta0 in 0.0f64..180.0,
        offset in 0.0f64..3.0,
        amplitude in 0.05f64..4.0,
        rotation in -90.0f64..90.0,
        scale in 0.1f64..10.0,
    ) {
        let angles: Vec<f64> = (0..24).map(|i| i as f64 * 15.0).collect();
        let y: Vec<f64> = angles
            .iter()
            .map(|&t| offset + amplitude * (t - theta0).to_radians().cos().powi(2))
            .collect();
        let base = fit_cos2(&angles, &y, None).unwrap();
        prop_assert!(!base.degenerate);
        prop_assert!((base.offset_a - offset).abs() < 1e-8);
        prop_assert!((base.amplitude_b - amplitude).abs() < 1e-8);
        prop_assert!(delta_theta(base.theta0_deg.unwrap(), theta0) < 1e-8);

        // rotating the polarizer rotates the fitted axis and nothing else
        let rotated: Vec<f64> = angles.iter().map(|&t| t + rotation).collect();
        let rotated: Vec<f64> = rotated.iter().map(|&t| t.rem_euclid(360.0)).collect();
        let rot = fit_cos2(&rotated, &y, None).unwrap();
        prop_assert!((rot.offset_a - base.offset_a).abs() < 1e-8);
        prop_assert!((rot.amplitude_b - base.amplitude_b).abs() < 1e-8);
        prop_assert!(
            delta_theta(
                rot.theta0_deg.unwrap(),
                base.theta0_deg.unwrap() + rotation
            ) < 1e-7
        );

        // intensity scaling scales A and B, leaves the axis alone
        let scaled_y: Vec<f64> = y.iter().map(|v| scale * v).collect();
        let scaled = fit_cos2(&angles, &scaled_y, None).unwrap();
        prop_assert!((scaled.offset_a - scale * base.offset_a).abs() < 1e-7 * scale.max(1.0));
        prop_assert!((scaled.amplitude_b - scale * base.amplitude_b).abs() < 1e-7 * scale.max(1.0));
        prop_assert!(delta_theta(scaled.theta0_deg.unwrap(), base.theta0_deg.unwrap()) < 1e-8);
    }

    #[test]
    fn wavelength_energy_round_trip(
        axis in increasing_axis(450.0, 800.0, 24),
        values in prop::collection::vec(0.0f64..1e5, 25),
    ) {
        let s = Spectrum::new(
            AxisKind::WavelengthNm,
            UnitsKind::CountsPerWavelength,
            axis,
            values,
        )
        .unwrap();
        let back =
            energy_counts_to_wavelength_counts(&wavelength_counts_to_energy_counts(&s).unwrap())
                .unwrap();
        for (a, b) in s.axis().iter().zip(back.axis()) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs());
        }
        for (a, b) in s.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mirror_is_an_involution(
        axis in increasing_axis(1.5, 2.5, 32),
        values in prop::collection::vec(0.0f64..10.0, 33),
        zpl in 1.6f64..2.4,
    ) {
        let band = Spectrum::new(AxisKind::EnergyEv, UnitsKind::BandDensity, axis, values).unwrap();
        let twice = mirror_band(&mirror_band(&band, zpl).unwrap(), zpl).unwrap();
        for (a, b) in band.axis().iter().zip(twice.axis()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(band.values(), twice.values());
    }

    #[test]
    fn stokes_axis_preserves_order_and_values(
        axis in increasing_axis(1.5, 2.5, 16),
        values in prop::collection::vec(0.0f64..10.0, 17),
        zpl in 1.6f64..2.4,
    ) {
        let band = Spectrum::new(AxisKind::EnergyEv, UnitsKind::BandDensity, axis, values).unwrap();
        let w = to_stokes_axis(&band, zpl).unwrap();
        prop_assert!(w.axis().windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(w.values(), band.values());
        for (e, d) in band.axis().iter().zip(w.axis()) {
            prop_assert!(((e - zpl) * 1e3 - d).abs() < 1e-9);
        }
    }

    #[test]
    fn stokes_shift_antisymmetric(a in 0.5f64..4.0, b in 0.5f64..4.0) {
        let ab = stokes_shift(a, b).unwrap();
        let ba = stokes_shift(b, a).unwrap();
        prop_assert!((ab + ba).abs() < 1e-9);
    }

    #[test]
    fn regions_partition_positive_shifts(shift in -100.0f64..900.0) {
        // every finite shift gets exactly one label, and the in-plane
        // regions really are k-fold scalings of the one-phonon interval
        let cat = PhononCatalog::default();
        let label = phonon_region(shift, &cat);
        for k in 1..=3u32 {
            let (lo, hi) = cat.region(k);
            let expected = match k {
                1 => RegionLabel::RegionI,
                2 => RegionLabel::RegionII,
                _ => RegionLabel::RegionIII,
            };
            if shift >= lo && shift <= hi {
                prop_assert_eq!(label, expected);
            }
        }
        if shift < 0.0 {
            prop_assert_eq!(label, RegionLabel::SubPhonon);
        }
    }
}
