//! File formats shared with the CLI.
//!
//! Everything is line-oriented and explicit about units:
//!
//! - Spectrum CSV: `# axis_kind=<kind>,units_kind=<kind>` comment line,
//!   `axis,value` header, then one sample per row.
//! - Angle-resolved scan CSV (long format):
//!   `# axis_kind=<kind>,role=<role>`, `angle_deg,axis_value,counts`, then
//!   one row per (angle, sample).
//! - Calibration measurements CSV:
//!   `wavelength_nm,theta_true_deg,theta_measured_deg,visibility`.
//! - Correlation trace CSV (`tau_ns,g2`) and decay histogram CSV
//!   (`time_ns,counts`).
//! - Defect records: JSON lines, one record per line.
//! - Calibration maps: a single JSON document.
//!
//! Parsers take untrusted text: they validate everything, report 1-based
//! line numbers, and never panic.

use std::path::Path;

use crate::classify::DefectRecord;
use crate::error::{Error, Result};
use crate::photostats::{CorrelationTrace, DecayHistogram};
use crate::polarfit::{AngleResolvedSpectrum, CalibrationMap, CalibrationMeasurement, ScanRole};
use crate::spectra::{AxisKind, Spectrum, UnitsKind};

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("{what}: expected a number, got {token:?}")))
}

/// Split a `# key=value,key=value` comment header.
fn parse_comment_header<'a>(
    line: &'a str,
    line_no: usize,
    expected_keys: &[&str],
) -> Result<Vec<&'a str>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(line_no, "expected a '# key=value,...' comment header"))?
        .trim();
    let mut values = Vec::with_capacity(expected_keys.len());
    let mut pairs = body.split(',');
    for key in expected_keys {
        let pair = pairs.next().ok_or_else(|| {
            Error::parse(line_no, format!("missing '{key}=...' in header"))
        })?;
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("malformed header field {pair:?}")))?;
        if k.trim() != *key {
            return Err(Error::parse(
                line_no,
                format!("expected header key '{key}', got {:?}", k.trim()),
            ));
        }
        values.push(v.trim());
    }
    if pairs.next().is_some() {
        return Err(Error::parse(line_no, "unexpected extra header fields"));
    }
    Ok(values)
}

/// Numbered, non-blank lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

// ---------------------------------------------------------------------------
// Spectrum CSV
// ---------------------------------------------------------------------------

pub fn parse_spectrum_csv(text: &str) -> Result<Spectrum> {
    let mut lines = content_lines(text);
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty spectrum file"))?;
    let kinds = parse_comment_header(header, header_no, &["axis_kind", "units_kind"])?;
    let axis_kind = AxisKind::parse(kinds[0])
        .ok_or_else(|| Error::parse(header_no, format!("unknown axis kind {:?}", kinds[0])))?;
    let units_kind = UnitsKind::parse(kinds[1])
        .ok_or_else(|| Error::parse(header_no, format!("unknown units kind {:?}", kinds[1])))?;
    let (cols_no, cols) = lines
        .next()
        .ok_or_else(|| Error::parse(header_no + 1, "missing 'axis,value' header"))?;
    if cols.trim() != "axis,value" {
        return Err(Error::parse(
            cols_no,
            format!("expected 'axis,value' header, got {cols:?}"),
        ));
    }
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for (no, line) in lines {
        let mut fields = line.split(',');
        let (Some(a), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(no, "expected exactly two comma-separated fields"));
        };
        axis.push(parse_f64(a, no, "axis")?);
        values.push(parse_f64(v, no, "value")?);
    }
    Spectrum::new(axis_kind, units_kind, axis, values)
}

pub fn format_spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# axis_kind={},units_kind={}\n",
        s.axis_kind().as_str(),
        s.units_kind().as_str()
    ));
    out.push_str("axis,value\n");
    for (a, v) in s.axis().iter().zip(s.values()) {
        out.push_str(&format!("{a},{v}\n"));
    }
    out
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    parse_spectrum_csv(&std::fs::read_to_string(path)?)
}

pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<()> {
    Ok(std::fs::write(path, format_spectrum_csv(s))?)
}

// ---------------------------------------------------------------------------
// Angle-resolved scan CSV (long format)
// ---------------------------------------------------------------------------

pub fn parse_scan_csv(text: &str) -> Result<AngleResolvedSpectrum> {
    let mut lines = content_lines(text);
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty scan file"))?;
    let kinds = parse_comment_header(header, header_no, &["axis_kind", "role"])?;
    let axis_kind = AxisKind::parse(kinds[0])
        .ok_or_else(|| Error::parse(header_no, format!("unknown axis kind {:?}", kinds[0])))?;
    let role = ScanRole::parse(kinds[1])
        .ok_or_else(|| Error::parse(header_no, format!("unknown scan role {:?}", kinds[1])))?;
    let (cols_no, cols) = lines
        .next()
        .ok_or_else(|| Error::parse(header_no + 1, "missing 'angle_deg,axis_value,counts' header"))?;
    if cols.trim() != "angle_deg,axis_value,counts" {
        return Err(Error::parse(
            cols_no,
            format!("expected 'angle_deg,axis_value,counts' header, got {cols:?}"),
        ));
    }
    // rows grouped by angle in file order; every block must repeat the axis
    let mut angles: Vec<f64> = Vec::new();
    let mut blocks: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (no, line) in lines {
        let mut fields = line.split(',');
        let (Some(a), Some(x), Some(c), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(no, "expected exactly three comma-separated fields"));
        };
        let angle = parse_f64(a, no, "angle_deg")?;
        let x = parse_f64(x, no, "axis_value")?;
        let c = parse_f64(c, no, "counts")?;
        match angles.iter().position(|&known| known == angle) {
            Some(i) => {
                blocks[i].0.push(x);
                blocks[i].1.push(c);
            }
            None => {
                angles.push(angle);
                blocks.push((vec![x], vec![c]));
            }
        }
    }
    let Some(first) = blocks.first() else {
        return Err(Error::parse(1, "scan holds no data rows"));
    };
    let axis = first.0.clone();
    let mut counts = Vec::with_capacity(blocks.len());
    for (i, (block_axis, block_counts)) in blocks.iter().enumerate() {
        if *block_axis != axis {
            return Err(Error::parse(
                0,
                format!(
                    "angle {} does not share the axis of the first angle block",
                    angles[i]
                ),
            ));
        }
        counts.push(block_counts.clone());
    }
    AngleResolvedSpectrum::new(angles, axis_kind, axis, counts, role)
}

pub fn format_scan_csv(scan: &AngleResolvedSpectrum) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# axis_kind={},role={}\n",
        scan.axis_kind().as_str(),
        scan.role().as_str()
    ));
    out.push_str("angle_deg,axis_value,counts\n");
    for (angle, row) in scan.angles_deg().iter().zip(scan.counts()) {
        for (x, c) in scan.axis().iter().zip(row) {
            out.push_str(&format!("{angle},{x},{c}\n"));
        }
    }
    out
}

pub fn read_scan_csv(path: &Path) -> Result<AngleResolvedSpectrum> {
    parse_scan_csv(&std::fs::read_to_string(path)?)
}

pub fn write_scan_csv(path: &Path, scan: &AngleResolvedSpectrum) -> Result<()> {
    Ok(std::fs::write(path, format_scan_csv(scan))?)
}

// ---------------------------------------------------------------------------
// Calibration measurements CSV
// ---------------------------------------------------------------------------

const CALIBRATION_HEADER: &str = "wavelength_nm,theta_true_deg,theta_measured_deg,visibility";

pub fn parse_calibration_measurements_csv(text: &str) -> Result<Vec<CalibrationMeasurement>> {
    let mut lines = content_lines(text);
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty calibration file"))?;
    if header.trim() != CALIBRATION_HEADER {
        return Err(Error::parse(
            header_no,
            format!("expected '{CALIBRATION_HEADER}' header, got {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for (no, line) in lines {
        let mut fields = line.split(',');
        let (Some(w), Some(tt), Some(tm), Some(v), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            return Err(Error::parse(no, "expected exactly four comma-separated fields"));
        };
        out.push(CalibrationMeasurement {
            wavelength_nm: parse_f64(w, no, "wavelength_nm")?,
            theta_true_deg: parse_f64(tt, no, "theta_true_deg")?,
            theta_measured_deg: parse_f64(tm, no, "theta_measured_deg")?,
            visibility: parse_f64(v, no, "visibility")?,
        });
    }
    Ok(out)
}

pub fn format_calibration_measurements_csv(ms: &[CalibrationMeasurement]) -> String {
    let mut out = String::from(CALIBRATION_HEADER);
    out.push('\n');
    for m in ms {
        out.push_str(&format!(
            "{},{},{},{}\n",
            m.wavelength_nm, m.theta_true_deg, m.theta_measured_deg, m.visibility
        ));
    }
    out
}

pub fn read_calibration_measurements_csv(path: &Path) -> Result<Vec<CalibrationMeasurement>> {
    parse_calibration_measurements_csv(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Calibration map JSON
// ---------------------------------------------------------------------------

pub fn parse_calibration_map_json(text: &str) -> Result<CalibrationMap> {
    // the TryFrom deserializer enforces the map invariants
    Ok(serde_json::from_str(text)?)
}

pub fn format_calibration_map_json(map: &CalibrationMap) -> String {
    let mut s = serde_json::to_string_pretty(map).expect("calibration map serializes");
    s.push('\n');
    s
}

pub fn read_calibration_map_json(path: &Path) -> Result<CalibrationMap> {
    parse_calibration_map_json(&std::fs::read_to_string(path)?)
}

pub fn write_calibration_map_json(path: &Path, map: &CalibrationMap) -> Result<()> {
    Ok(std::fs::write(path, format_calibration_map_json(map))?)
}

// ---------------------------------------------------------------------------
// Defect records JSONL
// ---------------------------------------------------------------------------

pub fn parse_defect_records_jsonl(text: &str) -> Result<Vec<DefectRecord>> {
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        let record: DefectRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(no, format!("bad defect record: {e}")))?;
        record
            .validate()
            .map_err(|e| Error::parse(no, format!("inconsistent defect record: {e}")))?;
        out.push(record);
    }
    Ok(out)
}

pub fn format_defect_records_jsonl(records: &[DefectRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("defect record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_defect_records_jsonl(path: &Path) -> Result<Vec<DefectRecord>> {
    parse_defect_records_jsonl(&std::fs::read_to_string(path)?)
}

pub fn write_defect_records_jsonl(path: &Path, records: &[DefectRecord]) -> Result<()> {
    Ok(std::fs::write(path, format_defect_records_jsonl(records))?)
}

// ---------------------------------------------------------------------------
// Correlation trace and decay histogram CSV
// ---------------------------------------------------------------------------

fn parse_two_column(
    text: &str,
    header: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = content_lines(text);
    let (header_no, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    if first.trim() != header {
        return Err(Error::parse(
            header_no,
            format!("expected '{header}' header, got {first:?}"),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut names = header.split(',');
    let (x_name, y_name) = (names.next().unwrap_or("x"), names.next().unwrap_or("y"));
    for (no, line) in lines {
        let mut fields = line.split(',');
        let (Some(x), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(no, "expected exactly two comma-separated fields"));
        };
        xs.push(parse_f64(x, no, x_name)?);
        ys.push(parse_f64(y, no, y_name)?);
    }
    Ok((xs, ys))
}

fn format_two_column(header: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn parse_correlation_csv(text: &str) -> Result<CorrelationTrace> {
    let (tau, g2) = parse_two_column(text, "tau_ns,g2")?;
    CorrelationTrace::new(tau, g2)
}

pub fn format_correlation_csv(trace: &CorrelationTrace) -> String {
    format_two_column("tau_ns,g2", trace.tau_ns(), trace.g2())
}

pub fn read_correlation_csv(path: &Path) -> Result<CorrelationTrace> {
    parse_correlation_csv(&std::fs::read_to_string(path)?)
}

pub fn write_correlation_csv(path: &Path, trace: &CorrelationTrace) -> Result<()> {
    Ok(std::fs::write(path, format_correlation_csv(trace))?)
}

pub fn parse_decay_csv(text: &str) -> Result<DecayHistogram> {
    let (time, counts) = parse_two_column(text, "time_ns,counts")?;
    DecayHistogram::new(time, counts)
}

pub fn format_decay_csv(hist: &DecayHistogram) -> String {
    format_two_column("time_ns,counts", hist.time_ns(), hist.counts())
}

pub fn read_decay_csv(path: &Path) -> Result<DecayHistogram> {
    parse_decay_csv(&std::fs::read_to_string(path)?)
}

pub fn write_decay_csv(path: &Path, hist: &DecayHistogram) -> Result<()> {
    Ok(std::fs::write(path, format_decay_csv(hist))?)
}
