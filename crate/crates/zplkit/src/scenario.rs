//! Scenario files: the JSON schema consumed by the `simulate` pipeline.
//!
//! A scenario is a named list of generator jobs; each job maps to one
//! output file. The schema validates everything on deserialization (defect
//! parameters, grids, noise specs), so a parsed scenario is ready to run.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::polarfit::ScanRole;
use crate::spectra::BandModel;
use crate::synth::{NoiseSpec, SurveyMix, SyntheticDefect};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub jobs: Vec<Job>,
}

/// Evenly spaced polarizer angles.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRange {
    pub start_deg: f64,
    pub step_deg: f64,
    pub count: usize,
}

impl AngleRange {
    pub fn expand(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start_deg + i as f64 * self.step_deg)
            .collect()
    }
}

/// Evenly spaced sample grid over [start, stop].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn expand(&self) -> Result<Vec<f64>> {
        if !self.start.is_finite()
            || !self.stop.is_finite()
            || !self.step.is_finite()
            || self.step <= 0.0
            || self.stop <= self.start
        {
            return Err(Error::Domain(format!(
                "bad grid range [{}, {}] step {}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step).round() as usize;
        if n > 10_000_000 {
            return Err(Error::Domain(format!("grid of {n} samples is too large")));
        }
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSide {
    Emission,
    Absorption,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Job {
    /// Angle-resolved scan of a synthetic defect → scan CSV.
    Scan {
        label: String,
        defect: SyntheticDefect,
        role: ScanRole,
        angles: AngleRange,
        grid_ev: GridRange,
        noise: NoiseSpec,
        /// Excitation wavelength this scan models; recorded in metadata.
        #[serde(default)]
        excitation_nm: Option<f64>,
    },
    /// Noise-free synthetic band → spectrum CSV (band_density units).
    Band {
        label: String,
        model: BandModel,
        grid_ev: GridRange,
        side: BandSide,
    },
    /// Antibunching trace → correlation CSV.
    G2 {
        label: String,
        dip_depth: f64,
        tau_c_ns: f64,
        half_span_ns: f64,
        step_ns: f64,
        baseline_counts: f64,
        noise: NoiseSpec,
    },
    /// Pulsed-decay histogram → decay CSV.
    Decay {
        label: String,
        tau_ns: f64,
        peak_counts: f64,
        background_counts: f64,
        pulse_time_ns: f64,
        stop_ns: f64,
        step_ns: f64,
        noise: NoiseSpec,
    },
    /// Defect-record population → JSONL.
    Survey {
        label: String,
        n_defects: usize,
        #[serde(default)]
        mix: Option<SurveyMix>,
        noise: NoiseSpec,
    },
}

/// Parse and validate a scenario document.
pub fn parse_scenario_json(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text)?;
    for job in &scenario.jobs {
        if let Job::Scan { grid_ev, .. } | Job::Band { grid_ev, .. } = job {
            grid_ev.expand()?;
        }
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_fields_and_bad_grids() {
        assert!(parse_scenario_json("{\"name\": \"x\", \"jobs\": [], \"extra\": 1}").is_err());
        let bad_grid = r#"{
            "name": "x",
            "jobs": [{
                "kind": "band",
                "label": "b",
                "model": {
                    "system": {"zpl_energy_ev": 2.0,
                               "modes": [{"energy_mev": 180.0, "huang_rhys": 1.0}],
                               "emission_dipole_deg": 0.0,
                               "absorption_dipole_deg": 0.0},
                    "lineshape": {"kind": "gaussian", "zpl_fwhm_mev": 10.0,
                                  "sideband_fwhm_growth_mev": 2.0},
                    "oscillator_strength": 1.0,
                    "temperature_k": 0.0
                },
                "grid_ev": {"start": 2.0, "stop": 1.0, "step": 0.001},
                "side": "emission"
            }]
        }"#;
        assert!(parse_scenario_json(bad_grid).is_err());
    }

    #[test]
    fn angle_range_expansion() {
        let r = AngleRange {
            start_deg: 0.0,
            step_deg: 30.0,
            count: 4,
        };
        assert_eq!(r.expand(), vec![0.0, 30.0, 60.0, 90.0]);
    }
}
