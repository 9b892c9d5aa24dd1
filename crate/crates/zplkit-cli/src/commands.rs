//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use zplkit::classify::{
    phonon_region, predict_mechanism, stokes_shift, survey_stats, wavelength_to_energy,
    DefectRecord, MechanismVerdict, PhononCatalog, RegionLabel,
};
use zplkit::constants::HC_EV_NM;
use zplkit::error::{Error, Result};
use zplkit::io;
use zplkit::photostats::{fit_g2, fit_lifetime, is_single_emitter, BackgroundWindow};
use zplkit::polarfit::{
    apply_calibration, build_calibration, correct_visibility, delta_theta, fit_cos2,
    fit_spectrally_resolved, visibility, CalibrationMap, ScanRole,
};
use zplkit::spectra::{
    find_zpl_and_sidebands, luminescence_to_emission_band, mirror_band, to_stokes_axis,
    wavelength_counts_to_energy_counts, AxisKind, UnitsKind,
};
use zplkit::vibronic::franck_condon_factor;

use crate::args::*;
use crate::scenario;
use crate::svg;

/// Defaults loadable from `--config` JSON; command-line flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    theta_tolerance_deg: Option<f64>,
    truncation_tolerance: Option<f64>,
    prominence: Option<f64>,
    cluster_tolerance_deg: Option<f64>,
    catalog: Option<PathBuf>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        if let Some(t) = config.theta_tolerance_deg {
            if !t.is_finite() || t <= 0.0 || t > 90.0 {
                return Err(Error::Domain(format!(
                    "config theta_tolerance_deg must lie in (0, 90], got {t}"
                )));
            }
        }
        if let Some(t) = config.truncation_tolerance {
            if !t.is_finite() || t <= 0.0 || t > 1e-3 {
                return Err(Error::Domain(format!(
                    "config truncation_tolerance must lie in (0, 1e-3], got {t}"
                )));
            }
        }
        if let Some(p) = config.prominence {
            if !p.is_finite() || p <= 0.0 || p >= 1.0 {
                return Err(Error::Domain(format!(
                    "config prominence must lie in (0, 1), got {p}"
                )));
            }
        }
        if let Some(c) = config.cluster_tolerance_deg {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::Domain(format!(
                    "config cluster_tolerance_deg must be positive, got {c}"
                )));
            }
        }
        Ok(config)
    }

    /// Default output directory: config, then the environment, then CWD.
    fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("ZPLKIT_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Resolve a relative output path against the output directory.
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir().join(path)
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    println!("{}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_output(path, &format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn load_catalog(path: Option<&Path>) -> Result<PhononCatalog> {
    match path {
        None => Ok(PhononCatalog::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::FcTable(args) => fc_table(args, &config),
        Command::Simulate(args) => simulate(args, &config),
        Command::Band(args) => band(args, &config),
        Command::FitPolarization(args) => fit_polarization(args, &config),
        Command::Calibrate(args) => calibrate(args, &config),
        Command::Classify(args) => classify(args, &config),
        Command::Survey(args) => survey(args, &config),
        Command::G2Fit(args) => g2_fit(args, &config),
        Command::LifetimeFit(args) => lifetime_fit(args, &config),
    }
}

fn fc_table(args: FcTableArgs, config: &RunConfig) -> Result<()> {
    let truncation = config.truncation_tolerance.unwrap_or(1e-6);
    let mut out = String::from("s,n,n_star,franck_condon\n");
    for n_star in 0..=args.n_star_max {
        match args.n_max {
            Some(n_max) => {
                for n in 0..=n_max {
                    let f = franck_condon_factor(args.s, n, n_star)?;
                    out.push_str(&format!("{},{n},{n_star},{f}\n", args.s));
                }
            }
            None => {
                // adaptive: emit rows until this n* row is complete
                let mut cumulative = 0.0;
                let mut n = 0u32;
                while cumulative < 1.0 - truncation {
                    let f = franck_condon_factor(args.s, n, n_star)?;
                    cumulative += f;
                    out.push_str(&format!("{},{n},{n_star},{f}\n", args.s));
                    n += 1;
                    if n > 2000 {
                        return Err(Error::Truncation(format!(
                            "row n*={n_star} did not reach 1 - {truncation} within 2000 terms"
                        )));
                    }
                }
            }
        }
    }
    match args.out {
        Some(path) => write_output(&config.resolve(&path), &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs, config: &RunConfig) -> Result<()> {
    let scenario = scenario::load(&args.scenario)?;
    let out_dir = match args.out_dir {
        Some(dir) => config.resolve(&dir),
        None => config.out_dir(),
    };
    let seed = args.seed.or(config.seed);
    let outputs = scenario::run(&scenario, &out_dir, seed)?;
    for file in &outputs {
        println!("{}", file.display());
    }
    Ok(())
}

/// Measured luminescence → absorption band on the Stokes axis.
///
/// Wavelength spectra are first converted to the energy axis; the E³
/// optical density of states is divided out, the band is reflected about
/// the ZPL and shifted to ΔE = E − E_ZPL. An angle-resolved scan is
/// accepted too and summed over angles first.
fn band(args: BandArgs, config: &RunConfig) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let is_scan = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.contains("role="));
    let raw = if is_scan {
        io::parse_scan_csv(&text)?.unpolarized()
    } else {
        io::parse_spectrum_csv(&text)?
    };
    let luminescence = match (raw.axis_kind(), raw.units_kind()) {
        (AxisKind::WavelengthNm, UnitsKind::CountsPerWavelength) => {
            wavelength_counts_to_energy_counts(&raw)?
        }
        (AxisKind::EnergyEv, UnitsKind::CountsPerEnergy) => raw,
        (a, u) => {
            return Err(Error::Domain(format!(
                "band pipeline expects a luminescence spectrum \
                 (wavelength_nm/counts_per_wavelength or energy_ev/counts_per_energy), \
                 got {}/{}",
                a.as_str(),
                u.as_str()
            )))
        }
    };
    let prominence = args.prominence.or(config.prominence).unwrap_or(0.05);
    let (zpl, report) = match args.zpl {
        Some(z) => (z, None),
        None => {
            let report = find_zpl_and_sidebands(&luminescence, prominence)?;
            (report.zpl.energy_ev, Some(report))
        }
    };
    let emission_band = luminescence_to_emission_band(&luminescence)?;
    let absorption_band = mirror_band(&emission_band, zpl)?;
    let w_delta_e = to_stokes_axis(&absorption_band, zpl)?;
    write_output(&config.resolve(&args.out), &io::format_spectrum_csv(&w_delta_e))?;
    if let Some(peaks_path) = args.out_peaks {
        let report = match report {
            Some(r) => r,
            None => find_zpl_and_sidebands(&luminescence, prominence)?,
        };
        write_json(&config.resolve(&peaks_path), &serde_json::to_value(&report)?)?;
    }
    if let Some(svg_path) = args.svg {
        let rendered = svg::render(&svg::Plot {
            xs: w_delta_e.axis(),
            ys: w_delta_e.values(),
            style: svg::PlotStyle::Line,
            title: "absorption band",
            x_label: "stokes shift (meV)",
            y_label: "band density",
        });
        write_output(&config.resolve(&svg_path), &rendered)?;
    }
    Ok(())
}

fn fit_polarization(args: FitPolarizationArgs, config: &RunConfig) -> Result<()> {
    let scan = io::read_scan_csv(&args.input)?;
    let calibration: Option<CalibrationMap> = match &args.calibration {
        Some(path) => Some(io::read_calibration_map_json(path)?),
        None => None,
    };
    let resolved = fit_spectrally_resolved(&scan, args.bin_width)?;

    // the calibration is defined in wavelength; emission scans carry it
    let axis_to_wavelength = |x: f64| -> Result<f64> {
        match scan.axis_kind() {
            AxisKind::EnergyEv => Ok(HC_EV_NM / x),
            AxisKind::WavelengthNm => Ok(x),
            AxisKind::StokesMev => Err(Error::Domain(
                "cannot calibrate a scan on a Stokes axis".into(),
            )),
        }
    };
    let calibrate_bins =
        calibration.is_some() && scan.role() == ScanRole::EmissionScan;

    let mut csv = format!(
        "{},theta_deg,theta_sigma_deg,visibility,counts,degenerate\n",
        scan.axis_kind().as_str()
    );
    let mut plot_x = Vec::new();
    let mut plot_y = Vec::new();
    for (i, fit) in resolved.fits.iter().enumerate() {
        let x = resolved.energies_ev[i];
        let counts = resolved.bin_totals[i];
        let (theta, vis) = if fit.degenerate {
            (f64::NAN, f64::NAN)
        } else {
            let mut theta = fit.theta0_deg.expect("non-degenerate fit has an axis");
            let mut vis = visibility(fit);
            if calibrate_bins {
                let map = calibration.as_ref().unwrap();
                let lambda = axis_to_wavelength(x)?;
                let corrected = apply_calibration(theta, lambda, map)?;
                theta = corrected.theta_true_deg;
                vis = correct_visibility(vis, lambda, theta, map)?;
            }
            (theta, vis)
        };
        let sigma = fit.theta0_sigma_deg.unwrap_or(f64::NAN);
        csv.push_str(&format!(
            "{x},{theta},{sigma},{vis},{counts},{}\n",
            fit.degenerate
        ));
        if theta.is_finite() {
            plot_x.push(x);
            plot_y.push(theta);
        }
    }
    write_output(&config.resolve(&args.out_csv), &csv)?;

    // spectrally averaged fit over the angle totals
    let totals = scan.totals_per_angle();
    let weights: Vec<f64> = totals.iter().map(|&t| 1.0 / t.max(1.0)).collect();
    let average = fit_cos2(scan.angles_deg(), &totals, Some(&weights))?;
    let mut avg_theta = average.theta0_deg;
    let mut avg_vis = if average.degenerate {
        None
    } else {
        Some(visibility(&average))
    };
    if calibrate_bins && !average.degenerate {
        // correct the average at the intensity-weighted axis center
        let total: f64 = resolved.bin_totals.iter().sum();
        if total > 0.0 {
            let center = resolved
                .energies_ev
                .iter()
                .zip(&resolved.bin_totals)
                .map(|(&e, &c)| e * c)
                .sum::<f64>()
                / total;
            let map = calibration.as_ref().unwrap();
            let lambda = axis_to_wavelength(center)?;
            let corrected = apply_calibration(avg_theta.unwrap(), lambda, map)?;
            avg_theta = Some(corrected.theta_true_deg);
            avg_vis = Some(correct_visibility(avg_vis.unwrap(), lambda, corrected.theta_true_deg, map)?);
        }
    }
    let summary = serde_json::json!({
        "role": scan.role().as_str(),
        "axis_kind": scan.axis_kind().as_str(),
        "bin_width": args.bin_width,
        "bins": resolved.fits.len(),
        "calibrated": calibrate_bins,
        "spectral_average": {
            "offset_a": average.offset_a,
            "amplitude_b": average.amplitude_b,
            "theta0_deg": avg_theta,
            "theta0_sigma_deg": average.theta0_sigma_deg,
            "visibility": avg_vis,
            "residual_rms": average.residual_rms,
            "degenerate": average.degenerate,
        },
    });
    write_json(&config.resolve(&args.out_json), &summary)?;

    if let Some(svg_path) = args.svg {
        let rendered = svg::render(&svg::Plot {
            xs: &plot_x,
            ys: &plot_y,
            style: svg::PlotStyle::Scatter,
            title: "polarization axis vs spectral position",
            x_label: scan.axis_kind().as_str(),
            y_label: "theta (deg)",
        });
        write_output(&config.resolve(&svg_path), &rendered)?;
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs, config: &RunConfig) -> Result<()> {
    let measurements = io::read_calibration_measurements_csv(&args.input)?;
    let map = build_calibration(&measurements)?;
    write_output(&config.resolve(&args.out), &io::format_calibration_map_json(&map))
}

fn classify(args: ClassifyArgs, config: &RunConfig) -> Result<()> {
    let catalog = load_catalog(args.catalog.as_deref().or(config.catalog.as_deref()))?;
    let tolerance = args
        .theta_tol
        .or(config.theta_tolerance_deg)
        .unwrap_or(10.0);
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(Error::Domain(format!(
            "theta tolerance must be positive, got {tolerance}"
        )));
    }

    let records: Vec<DefectRecord> = if let Some(input) = &args.input {
        // reclassify a batch under the configured catalog and tolerance
        io::read_defect_records_jsonl(input)?
            .into_iter()
            .map(|mut r| {
                r.delta_theta_deg = delta_theta(r.theta_abs_deg, r.theta_emit_deg);
                r.stokes_shift_mev = stokes_shift(r.excitation_energy_ev, r.zpl_energy_ev)?;
                r.region = phonon_region(r.stokes_shift_mev, &catalog);
                r.mechanism = predict_mechanism(&r, tolerance, &catalog);
                r.below_filter = r.stokes_shift_mev < 75.0;
                Ok(r)
            })
            .collect::<Result<_>>()?
    } else {
        let zpl_energy_ev = match (args.zpl_ev, args.zpl_nm) {
            (Some(e), None) => e,
            (None, Some(nm)) => wavelength_to_energy(nm)?,
            _ => {
                return Err(Error::Domain(
                    "provide the ZPL as exactly one of --zpl-ev or --zpl-nm".into(),
                ))
            }
        };
        let excitation_energy_ev = match (args.exc_ev, args.exc_nm) {
            (Some(e), None) => e,
            (None, Some(nm)) => wavelength_to_energy(nm)?,
            _ => {
                return Err(Error::Domain(
                    "provide the excitation as exactly one of --exc-ev or --exc-nm".into(),
                ))
            }
        };
        let (Some(theta_abs), Some(theta_emit)) = (args.theta_abs, args.theta_emit) else {
            return Err(Error::Domain(
                "--theta-abs and --theta-emit are required".into(),
            ));
        };
        let shift = stokes_shift(excitation_energy_ev, zpl_energy_ev)?;
        let mut record = DefectRecord {
            zpl_energy_ev,
            excitation_energy_ev,
            theta_abs_deg: theta_abs,
            theta_emit_deg: theta_emit,
            delta_theta_deg: delta_theta(theta_abs, theta_emit),
            stokes_shift_mev: shift,
            region: RegionLabel::Gap,
            mechanism: MechanismVerdict::Ambiguous,
            tilt_caveat: args.tilt_caveat,
            below_filter: shift < 75.0,
            abs_visibility: args.abs_vis,
            emit_visibility: args.emit_vis,
        };
        record.region = phonon_region(record.stokes_shift_mev, &catalog);
        record.mechanism = predict_mechanism(&record, tolerance, &catalog);
        record.validate()?;
        vec![record]
    };

    let text = io::format_defect_records_jsonl(&records);
    match args.out {
        Some(path) => write_output(&config.resolve(&path), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn survey(args: SurveyArgs, config: &RunConfig) -> Result<()> {
    let records = io::read_defect_records_jsonl(&args.input)?;
    let cluster_tol = args
        .cluster_tol
        .or(config.cluster_tolerance_deg)
        .unwrap_or(5.0);
    let stats = survey_stats(&records, args.bin, cluster_tol)?;

    let mut scatter = String::from(
        "stokes_shift_mev,delta_theta_deg,region,mechanism,tilt_caveat\n",
    );
    for row in &stats.scatter {
        scatter.push_str(&format!(
            "{},{},{},{},{}\n",
            row.stokes_shift_mev,
            row.delta_theta_deg,
            row.region.as_str(),
            row.mechanism.as_str(),
            row.tilt_caveat
        ));
    }
    write_output(&config.resolve(&args.out_scatter), &scatter)?;

    let mut hist = String::from("bin_lo_deg,bin_hi_deg,count\n");
    for (i, count) in stats.histogram_counts.iter().enumerate() {
        hist.push_str(&format!(
            "{},{},{count}\n",
            stats.histogram_edges_deg[i],
            stats.histogram_edges_deg[i + 1]
        ));
    }
    write_output(&config.resolve(&args.out_hist), &hist)?;

    if let Some(summary_path) = args.out_summary {
        let summary = serde_json::json!({
            "records": records.len(),
            "cluster_tolerance_deg": cluster_tol,
            "cluster_fractions": stats.cluster_fractions,
            "emit_exceeds_abs": stats.emit_exceeds_abs,
            "emit_exceeds_abs_indirect": stats.emit_exceeds_abs_indirect,
            "indirect_count": stats.indirect_count,
        });
        write_json(&config.resolve(&summary_path), &summary)?;
    }

    if let Some(svg_path) = args.svg {
        let xs: Vec<f64> = stats.scatter.iter().map(|r| r.stokes_shift_mev).collect();
        let ys: Vec<f64> = stats.scatter.iter().map(|r| r.delta_theta_deg).collect();
        let rendered = svg::render(&svg::Plot {
            xs: &xs,
            ys: &ys,
            style: svg::PlotStyle::Scatter,
            title: "dipole misalignment vs Stokes shift",
            x_label: "stokes shift (meV)",
            y_label: "delta theta (deg)",
        });
        write_output(&config.resolve(&svg_path), &rendered)?;
    }
    Ok(())
}

fn g2_fit(args: G2FitArgs, config: &RunConfig) -> Result<()> {
    let trace = io::read_correlation_csv(&args.input)?;
    let fit = fit_g2(&trace)?;
    let verdict = is_single_emitter(fit.g2_zero, fit.g2_zero_sigma);
    let summary = serde_json::json!({
        "dip_depth": fit.dip_depth,
        "correlation_time_ns": fit.correlation_time_ns,
        "g2_zero": fit.g2_zero,
        "g2_zero_sigma": fit.g2_zero_sigma,
        "background": fit.background,
        "chi2": fit.chi2,
        "verdict": verdict,
    });
    write_json(&config.resolve(&args.out), &summary)
}

fn lifetime_fit(args: LifetimeFitArgs, config: &RunConfig) -> Result<()> {
    let hist = io::read_decay_csv(&args.input)?;
    let fit = fit_lifetime(
        &hist,
        BackgroundWindow {
            start_ns: args.bg_start,
            end_ns: args.bg_end,
        },
    )?;
    let summary = serde_json::json!({
        "tau_ns": fit.tau_ns,
        "tau_sigma_ns": fit.tau_sigma_ns,
        "amplitude": fit.amplitude,
        "background": fit.background,
        "chi2": fit.chi2,
    });
    write_json(&config.resolve(&args.out), &summary)
}
