//! Seeded forward-model generators.
//!
//! Everything the analysis half of the crate fits (angle-resolved scans,
//! correlation traces, decay histograms, calibration data, whole surveys)
//! can be generated here from known ground truth, which makes round trips
//! the primary test oracle. Generators are pure functions of their inputs
//! and a seed: identical seeds give bit-identical outputs.
//!
//! The RNG is counter-based (ChaCha, 12 rounds); per-record streams are
//! split as (seed, index) so batch generation is order-independent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::angles::reduce_axis_deg;
use crate::classify::{phonon_region, predict_mechanism, DefectRecord, MechanismVerdict, PhononCatalog, RegionLabel};
use crate::constants::HC_EV_NM;
use crate::error::{Error, Result};
use crate::photostats::{CorrelationTrace, DecayHistogram};
use crate::polarfit::{delta_theta, AngleResolvedSpectrum, ScanRole};
use crate::spectra::{synthesize_emission_band, BandModel};
use crate::vibronic::VibronicSystem;

/// Name of the RNG algorithm, recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Noise model applied to generated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Poisson,
}

/// Deterministic noise specification: the seed fully determines the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            seed: 0,
            kind: NoiseKind::None,
        }
    }

    pub fn poisson(seed: u64) -> Self {
        Self {
            seed,
            kind: NoiseKind::Poisson,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn poisson_sample(rng: &mut ChaCha12Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng)
}

/// How the exciting light couples to the transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    /// Absorption through the system's own absorption dipole.
    Direct,
    /// Absorption through an intermediate state with its own dipole axis.
    Indirect { theta_abs_override_deg: f64 },
    /// Incoherent mixture: `indirect_weight` of the absorbed intensity goes
    /// through the intermediate-state channel.
    Mixed {
        indirect_weight: f64,
        indirect_theta_abs_deg: f64,
    },
}

/// Ground truth for one synthetic defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SyntheticDefectRaw")]
pub struct SyntheticDefect {
    pub system: VibronicSystem,
    pub mechanism: MechanismSpec,
    pub abs_visibility: f64,
    pub emit_visibility: f64,
    /// Expected counts at the band peak for the best polarizer angle.
    pub brightness: f64,
    pub temperature_k: f64,
    pub lineshape: crate::spectra::LineshapeSpec,
}

#[derive(Deserialize)]
struct SyntheticDefectRaw {
    system: VibronicSystem,
    mechanism: MechanismSpec,
    abs_visibility: f64,
    emit_visibility: f64,
    brightness: f64,
    temperature_k: f64,
    lineshape: crate::spectra::LineshapeSpec,
}

impl TryFrom<SyntheticDefectRaw> for SyntheticDefect {
    type Error = Error;

    fn try_from(raw: SyntheticDefectRaw) -> Result<Self> {
        SyntheticDefect::new(
            raw.system,
            raw.mechanism,
            raw.abs_visibility,
            raw.emit_visibility,
            raw.brightness,
            raw.temperature_k,
            raw.lineshape,
        )
    }
}

impl SyntheticDefect {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: VibronicSystem,
        mechanism: MechanismSpec,
        abs_visibility: f64,
        emit_visibility: f64,
        brightness: f64,
        temperature_k: f64,
        lineshape: crate::spectra::LineshapeSpec,
    ) -> Result<Self> {
        for (name, v) in [
            ("abs_visibility", abs_visibility),
            ("emit_visibility", emit_visibility),
        ] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !brightness.is_finite() || brightness <= 0.0 {
            return Err(Error::domain(format!(
                "brightness must be positive, got {brightness}"
            )));
        }
        if !temperature_k.is_finite() || temperature_k < 0.0 {
            return Err(Error::domain(format!(
                "temperature must be >= 0 K, got {temperature_k}"
            )));
        }
        if let MechanismSpec::Mixed {
            indirect_weight, ..
        } = mechanism
        {
            if !indirect_weight.is_finite() || !(0.0..=1.0).contains(&indirect_weight) {
                return Err(Error::domain(format!(
                    "mixed weight must lie in [0, 1], got {indirect_weight}"
                )));
            }
        }
        Ok(Self {
            system,
            mechanism,
            abs_visibility,
            emit_visibility,
            brightness,
            temperature_k,
            lineshape,
        })
    }
}

/// Peak-normalized modulation A + B cos²(θ − θ₀) with the requested
/// visibility: A + B = 1 and B/(B + 2A) = v.
fn modulation(v: f64, theta0_deg: f64, theta_deg: f64) -> f64 {
    let b = 2.0 * v / (1.0 + v);
    let a = (1.0 - v) / (1.0 + v);
    a + b * (theta_deg - theta0_deg).to_radians().cos().powi(2)
}

/// Generate an angle-resolved scan of a synthetic defect.
///
/// The spectral profile is the defect's emission band times the E³ optical
/// density of states (what a photon-counting spectrometer sees), normalized
/// to `brightness` at its peak. The angular factor follows the scan role:
/// the emission dipole for analyzer scans, the mechanism's absorption
/// channel(s) for excitation scans. A mixed mechanism adds the two
/// channels' intensities, so the fitted absorption axis lands on the
/// intensity-weighted circular mean of the two dipole axes.
pub fn generate_scan(
    defect: &SyntheticDefect,
    role: ScanRole,
    angles_deg: &[f64],
    grid: &[f64],
    noise: &NoiseSpec,
) -> Result<AngleResolvedSpectrum> {
    if angles_deg.is_empty() || grid.is_empty() {
        return Err(Error::domain("angles and grid must be non-empty"));
    }
    let model = BandModel::new(
        defect.system.clone(),
        defect.lineshape,
        1.0,
        defect.temperature_k,
    )?;
    let band = synthesize_emission_band(&model, grid)?;
    let zpl = defect.system.zpl_energy_ev();
    // luminescence shape: band density times the E³ optical density of
    // states, normalized so the brightest sample is 1
    let shape: Vec<f64> = band
        .axis()
        .iter()
        .zip(band.values())
        .map(|(&e, &v)| v * (e / zpl).powi(3))
        .collect();
    let peak = shape.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return Err(Error::Numerical("generated band has no intensity".into()));
    }

    let angle_factor = |theta: f64| -> f64 {
        match role {
            ScanRole::EmissionScan => modulation(
                defect.emit_visibility,
                defect.system.emission_dipole_deg(),
                theta,
            ),
            ScanRole::AbsorptionScan => match defect.mechanism {
                MechanismSpec::Direct => modulation(
                    defect.abs_visibility,
                    defect.system.absorption_dipole_deg(),
                    theta,
                ),
                MechanismSpec::Indirect {
                    theta_abs_override_deg,
                } => modulation(defect.abs_visibility, theta_abs_override_deg, theta),
                MechanismSpec::Mixed {
                    indirect_weight,
                    indirect_theta_abs_deg,
                } => {
                    // distinct excitation channels are incoherent: add
                    // intensities, then noise
                    (1.0 - indirect_weight)
                        * modulation(
                            defect.abs_visibility,
                            defect.system.absorption_dipole_deg(),
                            theta,
                        )
                        + indirect_weight
                            * modulation(defect.abs_visibility, indirect_theta_abs_deg, theta)
                }
            },
        }
    };

    let mut rng = noise.rng(0);
    let counts: Vec<Vec<f64>> = angles_deg
        .iter()
        .map(|&theta| {
            let g = angle_factor(theta);
            shape
                .iter()
                .map(|&s| {
                    let mean = defect.brightness * s / peak * g;
                    match noise.kind {
                        NoiseKind::None => mean,
                        NoiseKind::Poisson => poisson_sample(&mut rng, mean),
                    }
                })
                .collect()
        })
        .collect();
    AngleResolvedSpectrum::new(
        angles_deg.to_vec(),
        band.axis_kind(),
        band.axis().to_vec(),
        counts,
        role,
    )
}

/// Generate an antibunching trace g²(τ) = 1 − a·e^{−|τ|/τ_c}.
///
/// Poisson noise draws coincidence counts with `baseline_counts` expected
/// per bin at g² = 1 and renormalizes.
pub fn generate_g2(
    dip_depth: f64,
    tau_c_ns: f64,
    tau_grid_ns: &[f64],
    noise: &NoiseSpec,
    baseline_counts: f64,
) -> Result<CorrelationTrace> {
    if !(0.0..=1.0).contains(&dip_depth) {
        return Err(Error::domain(format!(
            "dip depth must lie in [0, 1], got {dip_depth}"
        )));
    }
    if !tau_c_ns.is_finite() || tau_c_ns <= 0.0 {
        return Err(Error::domain(format!(
            "correlation time must be positive, got {tau_c_ns}"
        )));
    }
    if noise.kind == NoiseKind::Poisson
        && !(baseline_counts.is_finite() && baseline_counts > 0.0)
    {
        return Err(Error::domain(
            "Poisson noise needs positive baseline counts per bin",
        ));
    }
    let mut rng = noise.rng(0);
    let g2: Vec<f64> = tau_grid_ns
        .iter()
        .map(|&t| {
            let mean = 1.0 - dip_depth * (-t.abs() / tau_c_ns).exp();
            match noise.kind {
                NoiseKind::None => mean,
                NoiseKind::Poisson => {
                    poisson_sample(&mut rng, baseline_counts * mean) / baseline_counts
                }
            }
        })
        .collect();
    CorrelationTrace::new(tau_grid_ns.to_vec(), g2)
}

/// Generate a pulsed-decay histogram: flat background before the pulse,
/// `peak_counts`·e^{−(t−t_pulse)/τ} plus background after it.
pub fn generate_decay(
    tau_ns: f64,
    peak_counts: f64,
    background_counts: f64,
    pulse_time_ns: f64,
    time_grid_ns: &[f64],
    noise: &NoiseSpec,
) -> Result<DecayHistogram> {
    if !tau_ns.is_finite() || tau_ns <= 0.0 {
        return Err(Error::domain(format!(
            "lifetime must be positive, got {tau_ns}"
        )));
    }
    if !peak_counts.is_finite() || peak_counts <= 0.0 {
        return Err(Error::domain(format!(
            "peak counts must be positive, got {peak_counts}"
        )));
    }
    if !background_counts.is_finite() || background_counts < 0.0 {
        return Err(Error::domain(format!(
            "background counts must be >= 0, got {background_counts}"
        )));
    }
    let mut rng = noise.rng(0);
    let counts: Vec<f64> = time_grid_ns
        .iter()
        .map(|&t| {
            let mean = if t < pulse_time_ns {
                background_counts
            } else {
                background_counts + peak_counts * (-(t - pulse_time_ns) / tau_ns).exp()
            };
            match noise.kind {
                NoiseKind::None => mean,
                NoiseKind::Poisson => poisson_sample(&mut rng, mean),
            }
        })
        .collect();
    DecayHistogram::new(time_grid_ns.to_vec(), counts)
}

/// Population model for a synthetic survey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyMix {
    /// Fraction of defects excited directly.
    pub direct_fraction: f64,
    /// Half-normal width of Δθ for direct records, degrees.
    pub direct_sigma_deg: f64,
    /// Stokes-shift range for direct records, meV.
    pub direct_stokes_range_mev: (f64, f64),
    /// Stokes-shift range for indirect records, meV (Δθ uniform on [0, 90]).
    pub indirect_stokes_range_mev: (f64, f64),
    /// ZPL wavelength range, nm.
    pub zpl_range_nm: (f64, f64),
    /// Dipole-alignment tolerance used when labelling the records.
    pub theta_tolerance_deg: f64,
    /// Fraction of records flagged with the tilt caveat.
    pub tilt_fraction: f64,
}

impl Default for SurveyMix {
    fn default() -> Self {
        Self {
            direct_fraction: 0.45,
            direct_sigma_deg: 3.0,
            direct_stokes_range_mev: (75.0, 203.0),
            indirect_stokes_range_mev: (210.0, 620.0),
            zpl_range_nm: (550.0, 740.0),
            theta_tolerance_deg: 10.0,
            tilt_fraction: 0.0,
        }
    }
}

impl SurveyMix {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.direct_fraction) {
            return Err(Error::domain(format!(
                "direct fraction must lie in [0, 1], got {}",
                self.direct_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.tilt_fraction) {
            return Err(Error::domain(format!(
                "tilt fraction must lie in [0, 1], got {}",
                self.tilt_fraction
            )));
        }
        if self.direct_sigma_deg <= 0.0 || !self.direct_sigma_deg.is_finite() {
            return Err(Error::domain("direct sigma must be positive"));
        }
        for (name, (lo, hi)) in [
            ("direct_stokes_range_mev", self.direct_stokes_range_mev),
            ("indirect_stokes_range_mev", self.indirect_stokes_range_mev),
            ("zpl_range_nm", self.zpl_range_nm),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::domain(format!("{name} [{lo}, {hi}] is invalid")));
            }
        }
        if self.theta_tolerance_deg <= 0.0 || !self.theta_tolerance_deg.is_finite() {
            return Err(Error::domain("theta tolerance must be positive"));
        }
        Ok(())
    }
}

/// Draw a survey of internally consistent defect records.
///
/// Direct records take Δθ from a half-normal near 0°, indirect ones uniform
/// on [0, 90]; indirect records also get emission visibilities that exceed
/// their absorption visibilities. Record `i` uses RNG stream (seed, i), so
/// the population is independent of generation order.
pub fn generate_survey(
    n_defects: usize,
    mix: &SurveyMix,
    catalog: &PhononCatalog,
    noise: &NoiseSpec,
) -> Result<Vec<DefectRecord>> {
    if n_defects == 0 {
        return Err(Error::domain("survey needs at least one defect"));
    }
    mix.validate()?;
    let half_normal = Normal::new(0.0, mix.direct_sigma_deg)
        .map_err(|e| Error::domain(format!("bad sigma: {e}")))?;
    let mut records = Vec::with_capacity(n_defects);
    for i in 0..n_defects {
        let mut rng = noise.rng(i as u64 + 1);
        let direct = rng.random::<f64>() < mix.direct_fraction;
        let (stokes_range, dtheta) = if direct {
            let d: f64 = half_normal.sample(&mut rng);
            (mix.direct_stokes_range_mev, d.abs().min(90.0))
        } else {
            (
                mix.indirect_stokes_range_mev,
                rng.random_range(0.0..=90.0),
            )
        };
        let stokes_mev = rng.random_range(stokes_range.0..stokes_range.1);
        let lambda_nm = rng.random_range(mix.zpl_range_nm.0..mix.zpl_range_nm.1);
        let zpl_energy_ev = HC_EV_NM / lambda_nm;
        let excitation_energy_ev = zpl_energy_ev + stokes_mev * 1e-3;
        let theta_emit = rng.random_range(0.0..180.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let theta_abs = reduce_axis_deg(theta_emit + sign * dtheta);
        let (abs_visibility, emit_visibility) = if direct {
            let v: f64 = rng.random_range(0.5..0.95);
            let jitter: f64 = rng.random_range(-0.02..0.02);
            ((v + jitter).clamp(0.05, 1.0), v)
        } else {
            let v_emit: f64 = rng.random_range(0.6..0.95);
            let v_abs = v_emit * rng.random_range(0.5..0.9);
            (v_abs, v_emit)
        };
        let delta_theta_deg = delta_theta(theta_abs, theta_emit);
        let mut record = DefectRecord {
            zpl_energy_ev,
            excitation_energy_ev,
            theta_abs_deg: theta_abs,
            theta_emit_deg: theta_emit,
            delta_theta_deg,
            stokes_shift_mev: stokes_shift_exact(excitation_energy_ev, zpl_energy_ev),
            region: RegionLabel::Gap,
            mechanism: MechanismVerdict::Ambiguous,
            tilt_caveat: rng.random::<f64>() < mix.tilt_fraction,
            below_filter: stokes_mev < 75.0,
            abs_visibility,
            emit_visibility,
        };
        record.region = phonon_region(record.stokes_shift_mev, catalog);
        record.mechanism = predict_mechanism(&record, mix.theta_tolerance_deg, catalog);
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// The shift as the validator recomputes it, avoiding a second rounding.
fn stokes_shift_exact(excitation_energy_ev: f64, zpl_energy_ev: f64) -> f64 {
    (excitation_energy_ev - zpl_energy_ev) * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angles::weighted_axis_mean_deg;
    use crate::polarfit::{fit_cos2, fit_spectrally_resolved, visibility};
    use crate::spectra::{LineshapeKind, LineshapeSpec};
    use crate::vibronic::PhononMode;
    use approx::assert_abs_diff_eq;

    fn test_defect(mechanism: MechanismSpec) -> SyntheticDefect {
        SyntheticDefect::new(
            VibronicSystem::new(2.06, vec![PhononMode::new(180.0, 1.0).unwrap()], 40.0, 40.0)
                .unwrap(),
            mechanism,
            0.8,
            0.8,
            1e4,
            0.0,
            LineshapeSpec::new(LineshapeKind::Gaussian, 10.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=950).map(|i| 1.15 + i as f64 * 0.001).collect()
    }

    fn angles() -> Vec<f64> {
        (0..12).map(|i| i as f64 * 30.0).collect()
    }

    #[test]
    fn noiseless_direct_round_trip() {
        let defect = test_defect(MechanismSpec::Direct);
        let scan = generate_scan(
            &defect,
            ScanRole::EmissionScan,
            &angles(),
            &grid(),
            &NoiseSpec::none(),
        )
        .unwrap();
        let resolved = fit_spectrally_resolved(&scan, 0.02).unwrap();
        let peak_total = resolved
            .bin_totals
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, fit) in resolved.fits.iter().enumerate() {
            if resolved.bin_totals[i] > 0.05 * peak_total {
                let theta = fit.theta0_deg.expect("bright bin");
                assert!((theta - 40.0).abs() < 1e-6, "bin {i}: {theta}");
            }
        }
        // spectrally averaged fit recovers the visibility
        let totals = scan.totals_per_angle();
        let fit = fit_cos2(scan.angles_deg(), &totals, None).unwrap();
        assert_abs_diff_eq!(visibility(&fit), 0.8, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.theta0_deg.unwrap(), 40.0, epsilon = 1e-9);
    }

    #[test]
    fn indirect_override_rotates_absorption_only() {
        let defect = test_defect(MechanismSpec::Indirect {
            theta_abs_override_deg: 90.0,
        });
        let noise = NoiseSpec::none();
        let abs_scan = generate_scan(
            &defect,
            ScanRole::AbsorptionScan,
            &angles(),
            &grid(),
            &noise,
        )
        .unwrap();
        let emit_scan =
            generate_scan(&defect, ScanRole::EmissionScan, &angles(), &grid(), &noise).unwrap();
        let abs_fit = fit_cos2(abs_scan.angles_deg(), &abs_scan.totals_per_angle(), None).unwrap();
        let emit_fit =
            fit_cos2(emit_scan.angles_deg(), &emit_scan.totals_per_angle(), None).unwrap();
        assert_abs_diff_eq!(abs_fit.theta0_deg.unwrap(), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(emit_fit.theta0_deg.unwrap(), 40.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            delta_theta(
                abs_fit.theta0_deg.unwrap(),
                emit_fit.theta0_deg.unwrap()
            ),
            50.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn mixed_mechanism_lands_on_weighted_axis_mean() {
        let w = 0.3;
        let defect = test_defect(MechanismSpec::Mixed {
            indirect_weight: w,
            indirect_theta_abs_deg: 90.0,
        });
        let scan = generate_scan(
            &defect,
            ScanRole::AbsorptionScan,
            &angles(),
            &grid(),
            &NoiseSpec::none(),
        )
        .unwrap();
        let fit = fit_cos2(scan.angles_deg(), &scan.totals_per_angle(), None).unwrap();
        let expected = weighted_axis_mean_deg(&[40.0, 90.0], &[1.0 - w, w]).unwrap();
        assert_abs_diff_eq!(fit.theta0_deg.unwrap(), expected, epsilon = 1e-6);
    }

    #[test]
    fn determinism_bit_identical() {
        let defect = test_defect(MechanismSpec::Direct);
        let noise = NoiseSpec::poisson(42);
        let a = generate_scan(&defect, ScanRole::EmissionScan, &angles(), &grid(), &noise).unwrap();
        let b = generate_scan(&defect, ScanRole::EmissionScan, &angles(), &grid(), &noise).unwrap();
        assert_eq!(a, b);
        let other = generate_scan(
            &defect,
            ScanRole::EmissionScan,
            &angles(),
            &grid(),
            &NoiseSpec::poisson(43),
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn poisson_sampling_is_unbiased() {
        // coarse grid, many seeds: the mean converges on the noiseless scan
        let defect = test_defect(MechanismSpec::Direct);
        let coarse: Vec<f64> = (0..=293).map(|i| 1.15 + i as f64 * 0.00325).collect();
        let few_angles: Vec<f64> = (0..6).map(|i| i as f64 * 30.0).collect();
        let clean = generate_scan(
            &defect,
            ScanRole::EmissionScan,
            &few_angles,
            &coarse,
            &NoiseSpec::none(),
        )
        .unwrap();
        let n_seeds = 10_000usize;
        let mut mean = vec![vec![0.0; coarse.len()]; few_angles.len()];
        for seed in 0..n_seeds {
            let noisy = generate_scan(
                &defect,
                ScanRole::EmissionScan,
                &few_angles,
                &coarse,
                &NoiseSpec::poisson(seed as u64),
            )
            .unwrap();
            for (m_row, row) in mean.iter_mut().zip(noisy.counts()) {
                for (m, &c) in m_row.iter_mut().zip(row) {
                    *m += c;
                }
            }
        }
        // compare the mean at the ZPL sample for each angle: 4 sigma of the
        // Monte Carlo average
        let zpl_idx = coarse
            .iter()
            .position(|&e| (e - 2.06).abs() < 0.002)
            .unwrap();
        for (m_row, c_row) in mean.iter().zip(clean.counts()) {
            let avg = m_row[zpl_idx] / n_seeds as f64;
            let expect = c_row[zpl_idx];
            let sigma = (expect / n_seeds as f64).sqrt();
            assert!(
                (avg - expect).abs() < 4.0 * sigma,
                "bias: avg {avg} vs {expect} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn g2_generator_limits() {
        let tau: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.25 + 0.1).collect();
        let flat = generate_g2(0.0, 3.0, &tau, &NoiseSpec::none(), 0.0).unwrap();
        assert!(flat.g2().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let dip = generate_g2(1.0, 3.0, &tau, &NoiseSpec::none(), 0.0).unwrap();
        let min = dip.g2().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < 0.05, "dip floor {min}");
        assert!(generate_g2(1.5, 3.0, &tau, &NoiseSpec::none(), 0.0).is_err());
        // Poisson noise needs a count scale
        assert!(generate_g2(0.5, 3.0, &tau, &NoiseSpec::poisson(1), 0.0).is_err());
    }

    #[test]
    fn decay_generator_round_trip() {
        let time: Vec<f64> = (0..1000).map(|i| i as f64 * 0.05).collect();
        let hist = generate_decay(3.0, 2e4, 10.0, 2.0, &time, &NoiseSpec::none()).unwrap();
        let fit = crate::photostats::fit_lifetime(
            &hist,
            crate::photostats::BackgroundWindow {
                start_ns: 0.0,
                end_ns: 1.5,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(fit.tau_ns, 3.0, epsilon = 1e-3);
    }

    #[test]
    fn survey_population_structure() {
        let records = generate_survey(
            103,
            &SurveyMix::default(),
            &PhononCatalog::default(),
            &NoiseSpec::poisson(7),
        )
        .unwrap();
        assert_eq!(records.len(), 103);
        let critical = PhononCatalog::default().critical_stokes_mev();
        let below: Vec<&DefectRecord> = records
            .iter()
            .filter(|r| r.stokes_shift_mev <= critical)
            .collect();
        let above: Vec<&DefectRecord> = records
            .iter()
            .filter(|r| r.stokes_shift_mev > critical)
            .collect();
        assert!(!below.is_empty() && !above.is_empty());
        // direct records cluster tightly near zero misalignment
        let clustered = below
            .iter()
            .filter(|r| r.delta_theta_deg < 15.0)
            .count() as f64;
        assert!(clustered / below.len() as f64 >= 0.9);
        // indirect records spread over the whole fold range
        let spread = above
            .iter()
            .filter(|r| r.delta_theta_deg > 30.0)
            .count() as f64;
        assert!(spread / above.len() as f64 > 0.4);
        // visibility property: majority of indirect records above the line
        let above_line = above
            .iter()
            .filter(|r| r.emit_visibility > r.abs_visibility)
            .count();
        assert!(above_line * 2 > above.len());
    }

    #[test]
    fn single_direct_record_in_region_i() {
        let mix = SurveyMix {
            direct_fraction: 1.0,
            direct_stokes_range_mev: (179.0, 181.0),
            ..SurveyMix::default()
        };
        let records = generate_survey(
            1,
            &mix,
            &PhononCatalog::default(),
            &NoiseSpec::poisson(3),
        )
        .unwrap();
        assert_eq!(records[0].region, RegionLabel::RegionI);
        assert_eq!(records[0].mechanism, MechanismVerdict::DirectConsistent);
    }

    #[test]
    fn survey_streams_are_order_independent() {
        // record i only depends on (seed, i): generating more defects does
        // not change earlier ones
        let mix = SurveyMix::default();
        let cat = PhononCatalog::default();
        let noise = NoiseSpec::poisson(11);
        let five = generate_survey(5, &mix, &cat, &noise).unwrap();
        let fifty = generate_survey(50, &mix, &cat, &noise).unwrap();
        assert_eq!(&five[..], &fifty[..5]);
    }
}
