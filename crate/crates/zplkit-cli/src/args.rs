//! Command-line argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "zplkit",
    version,
    about = "Defect photophysics simulation and spectroscopy analysis"
)]
pub struct Cli {
    /// JSON config with defaults (out_dir, seed, tolerances); flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a CSV table of Franck-Condon factors.
    FcTable(FcTableArgs),
    /// Run a simulation scenario and write its data files.
    Simulate(SimulateArgs),
    /// Convert a luminescence spectrum into the absorption band W(ΔE).
    Band(BandArgs),
    /// Fit the cos² polarization model per spectral bin.
    FitPolarization(FitPolarizationArgs),
    /// Build a calibration map from reference measurements.
    Calibrate(CalibrateArgs),
    /// Classify a single ZPL record (or reclassify a JSONL batch).
    Classify(ClassifyArgs),
    /// Aggregate a record batch into scatter and histogram tables.
    Survey(SurveyArgs),
    /// Fit an antibunching dip and report the single-emitter verdict.
    G2Fit(G2FitArgs),
    /// Fit a mono-exponential excited-state lifetime.
    LifetimeFit(LifetimeFitArgs),
}

#[derive(Debug, Args)]
pub struct FcTableArgs {
    /// Huang-Rhys factor S.
    #[arg(long)]
    pub s: f64,
    /// Largest final phonon count; adaptive when omitted (rows extend until
    /// they sum to 1 within the truncation tolerance).
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Largest initial phonon count.
    #[arg(long, default_value_t = 0)]
    pub n_star_max: u32,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Bundled scenario name (fig3, fig5) or a path to a scenario JSON.
    #[arg(long)]
    pub scenario: String,
    /// Directory for the generated files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override the base noise seed (job i uses seed + i).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    /// Luminescence spectrum CSV (wavelength or energy axis).
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// ZPL energy in eV; detected from the spectrum when omitted.
    #[arg(long)]
    pub zpl: Option<f64>,
    /// Output W(ΔE) CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON report of the detected ZPL and sidebands.
    #[arg(long)]
    pub out_peaks: Option<PathBuf>,
    /// Peak prominence threshold as a fraction of the spectrum range.
    #[arg(long)]
    pub prominence: Option<f64>,
    /// Optional SVG line plot of W(ΔE).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitPolarizationArgs {
    /// Angle-resolved scan CSV.
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// Spectral bin width in the scan's axis units.
    #[arg(long)]
    pub bin_width: f64,
    /// Output θ(E), V(E) CSV.
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Output fit-summary JSON.
    #[arg(long)]
    pub out_json: PathBuf,
    /// Calibration map JSON; corrects emission-scan angles and visibilities.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Optional SVG scatter of θ(E).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Reference measurements CSV.
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// Output calibration map JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Reclassify every record in a JSONL file instead of using flags.
    #[arg(long = "in", alias = "input", value_name = "FILE", conflicts_with_all = ["zpl_ev", "zpl_nm"])]
    pub input: Option<PathBuf>,
    /// ZPL energy in eV.
    #[arg(long, conflicts_with = "zpl_nm")]
    pub zpl_ev: Option<f64>,
    /// ZPL wavelength in nm.
    #[arg(long)]
    pub zpl_nm: Option<f64>,
    /// Excitation energy in eV.
    #[arg(long, conflicts_with = "exc_nm")]
    pub exc_ev: Option<f64>,
    /// Excitation wavelength in nm.
    #[arg(long)]
    pub exc_nm: Option<f64>,
    /// Absorption dipole axis, degrees.
    #[arg(long)]
    pub theta_abs: Option<f64>,
    /// Emission dipole axis, degrees.
    #[arg(long)]
    pub theta_emit: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub abs_vis: f64,
    #[arg(long, default_value_t = 1.0)]
    pub emit_vis: f64,
    /// Dipole-alignment tolerance in degrees.
    #[arg(long)]
    pub theta_tol: Option<f64>,
    /// Phonon catalog override (JSON with the three branch intervals).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Mark the record with the crystal-tilt projection caveat.
    #[arg(long, default_value_t = false)]
    pub tilt_caveat: bool,
    /// Output JSONL (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurveyArgs {
    /// Defect records JSONL.
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// Δθ histogram bin width in degrees.
    #[arg(long, default_value_t = 5.0)]
    pub bin: f64,
    /// Tolerance for the cluster-angle fractions, degrees.
    #[arg(long)]
    pub cluster_tol: Option<f64>,
    /// Output scatter CSV.
    #[arg(long)]
    pub out_scatter: PathBuf,
    /// Output histogram CSV.
    #[arg(long)]
    pub out_hist: PathBuf,
    /// Optional JSON summary (cluster fractions, visibility counts).
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
    /// Optional SVG scatter of Δθ vs ΔE.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct G2FitArgs {
    /// Correlation trace CSV (tau_ns, g2).
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// Output JSON summary.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LifetimeFitArgs {
    /// Decay histogram CSV (time_ns, counts).
    #[arg(long = "in", alias = "input", value_name = "FILE")]
    pub input: PathBuf,
    /// Background window start, ns.
    #[arg(long)]
    pub bg_start: f64,
    /// Background window end, ns.
    #[arg(long)]
    pub bg_end: f64,
    /// Output JSON summary.
    #[arg(long)]
    pub out: PathBuf,
}
