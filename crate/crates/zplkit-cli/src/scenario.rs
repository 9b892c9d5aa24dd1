//! Scenario execution: run generator jobs and write their data files.
//!
//! Two scenarios are bundled into the binary: `fig3` (one bright defect
//! with a single dominant phonon mode, emission and absorption scans) and
//! `fig5` (the same defect excited through a direct channel at one
//! wavelength and an intermediate-state channel at another). The runner
//! writes a metadata JSON naming every output, the RNG algorithm and the
//! seeds actually used.

use std::path::{Path, PathBuf};

use zplkit::error::{Error, Result};
use zplkit::io;
use zplkit::scenario::{parse_scenario_json, BandSide, Job, Scenario};
use zplkit::synth::{
    generate_decay, generate_g2, generate_scan, generate_survey, NoiseSpec, RNG_ALGORITHM,
};

pub const BUNDLED_FIG3: &str = include_str!("../scenarios/fig3.json");
pub const BUNDLED_FIG5: &str = include_str!("../scenarios/fig5.json");

/// Resolve a scenario reference: bundled name first, then the filesystem.
pub fn load(reference: &str) -> Result<Scenario> {
    let text = match reference {
        "fig3" | "fig3.json" => BUNDLED_FIG3.to_string(),
        "fig5" | "fig5.json" => BUNDLED_FIG5.to_string(),
        path => std::fs::read_to_string(Path::new(path))
            .map_err(|e| Error::Domain(format!("cannot read scenario {path:?}: {e}")))?,
    };
    parse_scenario_json(&text)
}

fn with_seed(noise: &NoiseSpec, base: Option<u64>, index: usize) -> NoiseSpec {
    match base {
        Some(seed) => NoiseSpec {
            seed: seed + index as u64,
            kind: noise.kind,
        },
        None => *noise,
    }
}

/// Run every job, returning the files written (metadata file last).
pub fn run(
    scenario: &Scenario,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut job_meta = Vec::new();
    for (index, job) in scenario.jobs.iter().enumerate() {
        let (file, meta) = match job {
            Job::Scan {
                label,
                defect,
                role,
                angles,
                grid_ev,
                noise,
                excitation_nm,
            } => {
                let noise = with_seed(noise, seed_override, index);
                let scan =
                    generate_scan(defect, *role, &angles.expand(), &grid_ev.expand()?, &noise)?;
                let file = out_dir.join(format!("{label}.csv"));
                io::write_scan_csv(&file, &scan)?;
                (
                    file,
                    serde_json::json!({
                        "label": label,
                        "kind": "scan",
                        "role": role.as_str(),
                        "seed": noise.seed,
                        "excitation_nm": excitation_nm,
                        "zpl_energy_ev": defect.system.zpl_energy_ev(),
                    }),
                )
            }
            Job::Band {
                label,
                model,
                grid_ev,
                side,
            } => {
                let grid = grid_ev.expand()?;
                let band = match side {
                    BandSide::Emission => zplkit::spectra::synthesize_emission_band(model, &grid)?,
                    BandSide::Absorption => {
                        zplkit::spectra::synthesize_absorption_band(model, &grid)?
                    }
                };
                let file = out_dir.join(format!("{label}.csv"));
                io::write_spectrum_csv(&file, &band)?;
                (
                    file,
                    serde_json::json!({
                        "label": label,
                        "kind": "band",
                        "zpl_energy_ev": model.system().zpl_energy_ev(),
                    }),
                )
            }
            Job::G2 {
                label,
                dip_depth,
                tau_c_ns,
                half_span_ns,
                step_ns,
                baseline_counts,
                noise,
            } => {
                let noise = with_seed(noise, seed_override, index);
                if !step_ns.is_finite() || *step_ns <= 0.0 || *half_span_ns <= *step_ns {
                    return Err(Error::Domain(format!(
                        "bad g2 grid: half span {half_span_ns} ns, step {step_ns} ns"
                    )));
                }
                let n = (half_span_ns / step_ns).round() as i64;
                // offset by a third of a step so no sample sits exactly at 0
                let grid: Vec<f64> =
                    (-n..=n).map(|i| i as f64 * step_ns + step_ns / 3.0).collect();
                let trace = generate_g2(*dip_depth, *tau_c_ns, &grid, &noise, *baseline_counts)?;
                let file = out_dir.join(format!("{label}.csv"));
                io::write_correlation_csv(&file, &trace)?;
                (
                    file,
                    serde_json::json!({
                        "label": label,
                        "kind": "g2",
                        "seed": noise.seed,
                        "true_dip_depth": dip_depth,
                        "true_tau_c_ns": tau_c_ns,
                    }),
                )
            }
            Job::Decay {
                label,
                tau_ns,
                peak_counts,
                background_counts,
                pulse_time_ns,
                stop_ns,
                step_ns,
                noise,
            } => {
                let noise = with_seed(noise, seed_override, index);
                let grid = zplkit::scenario::GridRange {
                    start: 0.0,
                    stop: *stop_ns,
                    step: *step_ns,
                }
                .expand()?;
                let hist = generate_decay(
                    *tau_ns,
                    *peak_counts,
                    *background_counts,
                    *pulse_time_ns,
                    &grid,
                    &noise,
                )?;
                let file = out_dir.join(format!("{label}.csv"));
                io::write_decay_csv(&file, &hist)?;
                (
                    file,
                    serde_json::json!({
                        "label": label,
                        "kind": "decay",
                        "seed": noise.seed,
                        "true_tau_ns": tau_ns,
                    }),
                )
            }
            Job::Survey {
                label,
                n_defects,
                mix,
                noise,
            } => {
                let noise = with_seed(noise, seed_override, index);
                let mix = mix.unwrap_or_default();
                let records = generate_survey(
                    *n_defects,
                    &mix,
                    &zplkit::classify::PhononCatalog::default(),
                    &noise,
                )?;
                let file = out_dir.join(format!("{label}.jsonl"));
                io::write_defect_records_jsonl(&file, &records)?;
                (
                    file,
                    serde_json::json!({
                        "label": label,
                        "kind": "survey",
                        "seed": noise.seed,
                        "n_defects": n_defects,
                    }),
                )
            }
        };
        let mut meta = meta;
        meta["file"] = serde_json::Value::String(
            file.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
        );
        files.push(file);
        job_meta.push(meta);
    }
    let metadata = serde_json::json!({
        "scenario": scenario.name,
        "rng": RNG_ALGORITHM,
        "seed_override": seed_override,
        "jobs": job_meta,
    });
    let metadata_file = out_dir.join(format!("{}_metadata.json", scenario.name));
    std::fs::write(
        &metadata_file,
        format!("{}\n", serde_json::to_string_pretty(&metadata)?),
    )?;
    files.push(metadata_file);
    Ok(files)
}
