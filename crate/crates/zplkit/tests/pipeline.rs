//! Generator → analysis round trips that cross module boundaries.

use zplkit::classify::PhononCatalog;
use zplkit::polarfit::{
    delta_theta, fit_cos2, fit_spectrally_resolved, visibility, AngleResolvedSpectrum, ScanRole,
};
use zplkit::spectra::{LineshapeKind, LineshapeSpec};
use zplkit::synth::{
    generate_scan, generate_survey, MechanismSpec, NoiseSpec, SurveyMix, SyntheticDefect,
};
use zplkit::vibronic::{PhononMode, VibronicSystem};

fn defect(zpl_ev: f64, dipole_deg: f64, brightness: f64) -> SyntheticDefect {
    SyntheticDefect::new(
        VibronicSystem::new(
            zpl_ev,
            vec![PhononMode::new(180.0, 1.0).unwrap()],
            dipole_deg,
            dipole_deg,
        )
        .unwrap(),
        MechanismSpec::Direct,
        0.85,
        0.85,
        brightness,
        0.0,
        LineshapeSpec::new(LineshapeKind::Gaussian, 10.0, 2.0).unwrap(),
    )
    .unwrap()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Two ZPLs in one collection window with distinct dipole axes: the
/// spectrally resolved fit steps from one axis to the other across the two
/// lines even though the spectrally averaged fit sees only a blend.
#[test]
fn two_zpl_flake_resolves_both_dipoles() {
    let angles: Vec<f64> = (0..12).map(|i| i as f64 * 30.0).collect();
    let g = grid(1.10, 2.20, 0.001);
    let red = generate_scan(
        &defect(2.06, 0.0, 8e3),
        ScanRole::AbsorptionScan,
        &angles,
        &g,
        &NoiseSpec::none(),
    )
    .unwrap();
    let blue = generate_scan(
        &defect(2.13, 60.0, 8e3),
        ScanRole::AbsorptionScan,
        &angles,
        &g,
        &NoiseSpec::none(),
    )
    .unwrap();
    // the flake emits both; the detector sums the photons
    let counts: Vec<Vec<f64>> = red
        .counts()
        .iter()
        .zip(blue.counts())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    let scan = AngleResolvedSpectrum::new(
        angles,
        red.axis_kind(),
        red.axis().to_vec(),
        counts,
        ScanRole::AbsorptionScan,
    )
    .unwrap();

    let resolved = fit_spectrally_resolved(&scan, 0.004).unwrap();
    let theta_near = |energy: f64| -> f64 {
        let idx = resolved
            .energies_ev
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - energy).abs().total_cmp(&(b.1 - energy).abs())
            })
            .unwrap()
            .0;
        resolved.fits[idx].theta0_deg.expect("bright bin")
    };
    assert!(delta_theta(theta_near(2.06), 0.0) < 1.0);
    assert!(delta_theta(theta_near(2.13), 60.0) < 1.0);
    // one- and two-phonon sidebands inherit their parent ZPL's axis
    assert!(delta_theta(theta_near(2.06 - 0.18), 0.0) < 1.0);
    assert!(delta_theta(theta_near(2.13 - 0.18), 60.0) < 2.0);
}

/// Recovered visibility is unbiased over many noisy scans.
#[test]
fn visibility_recovery_monte_carlo() {
    let angles: Vec<f64> = (0..6).map(|i| i as f64 * 30.0).collect();
    let g = grid(1.15, 2.10, 0.00325);
    let truth = 0.7;
    let base = SyntheticDefect::new(
        VibronicSystem::new(2.06, vec![PhononMode::new(180.0, 1.0).unwrap()], 25.0, 25.0).unwrap(),
        MechanismSpec::Direct,
        truth,
        truth,
        5e3,
        0.0,
        LineshapeSpec::new(LineshapeKind::Gaussian, 10.0, 2.0).unwrap(),
    )
    .unwrap();
    let n_seeds = 500;
    let mut sum = 0.0;
    let mut worst: f64 = 0.0;
    for seed in 0..n_seeds {
        let scan = generate_scan(
            &base,
            ScanRole::EmissionScan,
            &angles,
            &g,
            &NoiseSpec::poisson(seed),
        )
        .unwrap();
        let totals = scan.totals_per_angle();
        let weights: Vec<f64> = totals.iter().map(|&t| 1.0 / t.max(1.0)).collect();
        let fit = fit_cos2(scan.angles_deg(), &totals, Some(&weights)).unwrap();
        let v = visibility(&fit);
        sum += v;
        worst = worst.max((v - truth).abs());
    }
    let mean = sum / n_seeds as f64;
    assert!(
        (mean - truth).abs() < 0.005,
        "mean visibility {mean} vs {truth}"
    );
    assert!(worst < 0.05, "worst single-seed deviation {worst}");
}

/// An indirect-only population draws Δθ uniformly: the pooled histogram
/// over many runs is flat within multinomial statistics (chi-square test).
#[test]
fn indirect_population_histogram_is_flat() {
    let mix = SurveyMix {
        direct_fraction: 0.0,
        ..SurveyMix::default()
    };
    let catalog = PhononCatalog::default();
    let n_runs = 1000;
    let per_run = 20;
    let n_bins = 9;
    let mut observed = vec![0usize; n_bins];
    for run in 0..n_runs {
        let records = generate_survey(
            per_run,
            &mix,
            &catalog,
            &NoiseSpec::poisson(10_000 + run as u64),
        )
        .unwrap();
        for r in records {
            let bin = ((r.delta_theta_deg / 90.0 * n_bins as f64).floor() as usize)
                .min(n_bins - 1);
            observed[bin] += 1;
        }
    }
    let total = (n_runs * per_run) as f64;
    let expected = total / n_bins as f64;
    let chi2: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    // 8 degrees of freedom, 99th percentile = 20.09
    assert!(chi2 < 20.09, "chi-square {chi2} with counts {observed:?}");
}
