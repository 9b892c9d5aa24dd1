//! `zplkit`: command-line pipelines for defect photophysics analysis.
//!
//! Subcommands cover the full chain: synthetic-data generation
//! (`simulate`), Franck-Condon tables (`fc-table`), the measured-spectrum →
//! absorption-band pipeline (`band`), polarization fitting
//! (`fit-polarization`), instrument calibration (`calibrate`),
//! single-record and batch classification (`classify`, `survey`) and photon
//! statistics (`g2-fit`, `lifetime-fit`).
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on data or fit errors
//! with a machine-readable JSON report on standard error.

mod args;
mod commands;
mod scenario;
mod svg;

use clap::Parser;

fn main() {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            let line = match &err {
                zplkit::Error::Parse { line, .. } => Some(*line),
                _ => None,
            };
            let report = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
                "line": line,
            });
            eprintln!("{report}");
            std::process::exit(1);
        }
    }
}
