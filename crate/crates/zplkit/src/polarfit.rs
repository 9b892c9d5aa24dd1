//! Polarization-anisotropy fitting and instrument calibration.
//!
//! A dipole transition excited (or analyzed) through a rotating linear
//! polarizer produces an intensity profile
//!
//! ```text
//! I(θ) = A + B cos²(θ − θ₀)
//! ```
//!
//! which linearizes exactly through the double-angle identity to
//! a + b·cos2θ + c·sin2θ, so the fit is a closed-form weighted linear
//! least squares: no iteration, no initialization. The polarization
//! contrast is the visibility V = B/(B + 2A).
//!
//! The calibration half corrects the wavelength- and polarization-dependent
//! retardances of a collection path: angular errors and instrument
//! visibilities measured at six reference angles on a wavelength grid are
//! interpolated bilinearly (periodic in θ with period 180°) and inverted by
//! a damped fixed-point iteration, since the tabulated error is indexed by
//! the true emission angle.

use serde::{Deserialize, Serialize};

use crate::angles::{reduce_axis_deg, signed_axis_difference_deg};
use crate::error::{Error, Result};
use crate::fitting::solve3_with_covariance;
use crate::spectra::{AxisKind, Spectrum, UnitsKind};

/// Reference angles (degrees) at which calibrations are measured.
pub const CALIBRATION_REFERENCE_ANGLES_DEG: [f64; 6] = [0.0, 30.0, 60.0, 90.0, 120.0, 150.0];

/// Whether a scan varied the excitation polarization (absorption) or the
/// analyzer in the collection path (emission).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRole {
    AbsorptionScan,
    EmissionScan,
}

impl ScanRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanRole::AbsorptionScan => "absorption_scan",
            ScanRole::EmissionScan => "emission_scan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "absorption_scan" => Some(ScanRole::AbsorptionScan),
            "emission_scan" => Some(ScanRole::EmissionScan),
            _ => None,
        }
    }
}

/// Intensity versus polarizer angle and spectral position: one spectrum per
/// angle on a shared axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleResolvedSpectrum {
    angles_deg: Vec<f64>,
    axis_kind: AxisKind,
    axis: Vec<f64>,
    counts: Vec<Vec<f64>>,
    role: ScanRole,
}

impl AngleResolvedSpectrum {
    pub fn new(
        angles_deg: Vec<f64>,
        axis_kind: AxisKind,
        axis: Vec<f64>,
        counts: Vec<Vec<f64>>,
        role: ScanRole,
    ) -> Result<Self> {
        if angles_deg.len() != counts.len() {
            return Err(Error::domain(format!(
                "{} angles but {} count rows",
                angles_deg.len(),
                counts.len()
            )));
        }
        let mut distinct: Vec<f64> = Vec::new();
        for &a in &angles_deg {
            if !a.is_finite() || !(0.0..360.0).contains(&a) {
                return Err(Error::domain(format!(
                    "polarizer angles must lie in [0, 360), got {a}"
                )));
            }
            if !distinct.iter().any(|&d| (d - a).abs() < 1e-9) {
                distinct.push(a);
            }
        }
        if distinct.len() < 6 {
            return Err(Error::domain(format!(
                "need at least 6 distinct polarizer angles, got {}",
                distinct.len()
            )));
        }
        if axis.is_empty() {
            return Err(Error::domain("scan axis must hold at least one sample"));
        }
        if axis.len() > 1 && !axis.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("scan axis must be strictly increasing"));
        }
        if axis.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("scan axis samples must be finite"));
        }
        for row in &counts {
            if row.len() != axis.len() {
                return Err(Error::domain(format!(
                    "count row length {} does not match axis length {}",
                    row.len(),
                    axis.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::domain("counts must be finite and >= 0"));
            }
        }
        Ok(Self {
            angles_deg,
            axis_kind,
            axis,
            counts,
            role,
        })
    }

    /// Build from one spectrum per angle; all spectra must share the axis.
    pub fn from_spectra(angles_deg: Vec<f64>, spectra: &[Spectrum], role: ScanRole) -> Result<Self> {
        let Some(first) = spectra.first() else {
            return Err(Error::domain("scan needs at least one spectrum"));
        };
        for s in spectra {
            if s.axis() != first.axis() || s.axis_kind() != first.axis_kind() {
                return Err(Error::domain("all angle spectra must share one axis"));
            }
        }
        let counts = spectra.iter().map(|s| s.values().to_vec()).collect();
        Self::new(
            angles_deg,
            first.axis_kind(),
            first.axis().to_vec(),
            counts,
            role,
        )
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn axis_kind(&self) -> AxisKind {
        self.axis_kind
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn role(&self) -> ScanRole {
        self.role
    }

    /// Sum over angles: the unpolarized spectrum.
    pub fn unpolarized(&self) -> Spectrum {
        let mut values = vec![0.0; self.axis.len()];
        for row in &self.counts {
            for (v, &c) in values.iter_mut().zip(row) {
                *v += c;
            }
        }
        Spectrum::new(
            self.axis_kind,
            UnitsKind::CountsPerEnergy,
            self.axis.clone(),
            values,
        )
        .expect("axis already validated")
    }

    /// Sum over the spectral axis: total intensity per polarizer angle.
    pub fn totals_per_angle(&self) -> Vec<f64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Result of the cos² fit. `offset_a` and `amplitude_b` are non-negative;
/// the sign of the modulation is folded into θ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cos2Fit {
    pub offset_a: f64,
    pub amplitude_b: f64,
    /// Dipole axis in [0, 180); absent for degenerate fits.
    pub theta0_deg: Option<f64>,
    /// Standard error of θ₀, degrees.
    pub theta0_sigma_deg: Option<f64>,
    /// Standard error of B.
    pub amplitude_sigma: f64,
    /// Root-mean-square of the unweighted residuals.
    pub residual_rms: f64,
    /// Set when B is statistically indistinguishable from zero.
    pub degenerate: bool,
}

/// Closed-form weighted least squares for I(θ) = A + B cos²(θ − θ₀).
///
/// `weights` are inverse variances (Poisson counting: 1/max(count, 1)); when
/// absent, unit weights are used and the covariance is scaled by the
/// residual variance. Angles aliased mod 90° make the design rank deficient
/// and are reported as [`Error::DegenerateDesign`].
pub fn fit_cos2(angles_deg: &[f64], intensities: &[f64], weights: Option<&[f64]>) -> Result<Cos2Fit> {
    let n = angles_deg.len();
    if intensities.len() != n {
        return Err(Error::domain(format!(
            "{n} angles but {} intensities",
            intensities.len()
        )));
    }
    if n < 6 {
        return Err(Error::domain(format!("need at least 6 samples, got {n}")));
    }
    if angles_deg.iter().any(|a| !a.is_finite()) {
        return Err(Error::domain("angles must be finite"));
    }
    if intensities.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("intensities must be finite"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::domain(format!(
                "{n} samples but {} weights",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::domain("weights must be finite and > 0"));
        }
    }
    let mut distinct: Vec<f64> = Vec::new();
    for &a in angles_deg {
        let r = reduce_axis_deg(a);
        if !distinct
            .iter()
            .any(|&d| (d - r).abs() < 1e-9 || (d - r).abs() > 180.0 - 1e-9)
        {
            distinct.push(r);
        }
    }
    if distinct.len() < 4 {
        return Err(Error::domain(format!(
            "need at least 4 distinct angles mod 180°, got {}",
            distinct.len()
        )));
    }

    // normal equations on the basis (1, cos2θ, sin2θ)
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        let t = 2.0 * angles_deg[i].to_radians();
        let phi = [1.0, t.cos(), t.sin()];
        for a in 0..3 {
            rhs[a] += w * phi[a] * intensities[i];
            for b in a..3 {
                m[a][b] += w * phi[a] * phi[b];
            }
        }
    }
    m[1][0] = m[0][1];
    m[2][0] = m[0][2];
    m[2][1] = m[1][2];
    let Some((coeff, unit_cov)) = solve3_with_covariance(m, rhs) else {
        return Err(Error::DegenerateDesign(
            "polarizer angles are aliased mod 90°".into(),
        ));
    };
    let (a0, b, c) = (coeff[0], coeff[1], coeff[2]);

    // residuals of the unconstrained fit
    let mut chi2 = 0.0;
    let mut ssr = 0.0;
    for i in 0..n {
        let t = 2.0 * angles_deg[i].to_radians();
        let fit = a0 + b * t.cos() + c * t.sin();
        let r = intensities[i] - fit;
        ssr += r * r;
        chi2 += weights.map_or(1.0, |w| w[i]) * r * r;
    }
    let residual_rms = (ssr / n as f64).sqrt();
    // with known variances the inverse normal matrix is the covariance;
    // otherwise scale by the reduced chi-square
    let cov_scale = if weights.is_some() {
        1.0
    } else {
        chi2 / (n as f64 - 3.0)
    };
    let cov = |i: usize, j: usize| unit_cov[i][j] * cov_scale;

    let r = (b * b + c * c).sqrt();
    let sigma_r = if r > 1e-300 {
        ((b * b * cov(1, 1) + c * c * cov(2, 2) + 2.0 * b * c * cov(1, 2)) / (r * r))
            .max(0.0)
            .sqrt()
    } else {
        cov(1, 1).max(cov(2, 2)).max(0.0).sqrt()
    };

    let degenerate = r <= 2.0 * sigma_r + 1e-9 * (a0.abs() + r);
    if degenerate {
        return Ok(Cos2Fit {
            offset_a: a0.max(0.0),
            amplitude_b: 0.0,
            theta0_deg: None,
            theta0_sigma_deg: None,
            amplitude_sigma: 2.0 * sigma_r,
            residual_rms,
            degenerate: true,
        });
    }

    let mut amplitude_b = 2.0 * r;
    let mut offset_a = a0 - r;
    let mut theta0 = reduce_axis_deg(0.5 * c.atan2(b).to_degrees());
    let mut final_rms = residual_rms;
    if offset_a < 0.0 {
        // intensities cannot be negative: refit with A pinned at zero
        let (b_refit, theta_refit, ssr_refit) =
            refit_zero_offset(angles_deg, intensities, weights);
        offset_a = 0.0;
        amplitude_b = b_refit;
        theta0 = theta_refit;
        final_rms = (ssr_refit / n as f64).sqrt();
    }
    // delta method on θ₀ = ½·atan2(c, b)
    let var_theta = (c * c * cov(1, 1) + b * b * cov(2, 2) - 2.0 * b * c * cov(1, 2))
        / (4.0 * r * r * r * r);
    let theta0_sigma_deg = var_theta.max(0.0).sqrt().to_degrees();

    Ok(Cos2Fit {
        offset_a,
        amplitude_b,
        theta0_deg: Some(theta0),
        theta0_sigma_deg: Some(theta0_sigma_deg),
        amplitude_sigma: 2.0 * sigma_r,
        residual_rms: final_rms,
        degenerate: false,
    })
}

/// Constrained fit I(θ) = B cos²(θ − θ₀) with B ≥ 0: closed-form B for each
/// trial axis, deterministic grid search plus one parabolic refinement.
fn refit_zero_offset(
    angles_deg: &[f64],
    intensities: &[f64],
    weights: Option<&[f64]>,
) -> (f64, f64, f64) {
    let eval = |theta0: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &a) in angles_deg.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            let g = (a - theta0).to_radians().cos().powi(2);
            num += w * g * intensities[i];
            den += w * g * g;
        }
        let b = (num / den.max(1e-300)).max(0.0);
        let mut ssr = 0.0;
        for (i, &a) in angles_deg.iter().enumerate() {
            let g = (a - theta0).to_radians().cos().powi(2);
            let r = intensities[i] - b * g;
            ssr += r * r;
        }
        (b, ssr)
    };
    let mut best = (0.0f64, f64::INFINITY, 0.0f64); // (theta0, ssr, b)
    let steps = 360;
    for k in 0..steps {
        let theta0 = 180.0 * k as f64 / steps as f64;
        let (b, ssr) = eval(theta0);
        if ssr < best.1 {
            best = (theta0, ssr, b);
        }
    }
    // parabolic refinement around the best grid point
    let h = 180.0 / steps as f64;
    let (_, s0) = eval(best.0 - h);
    let (_, s2) = eval(best.0 + h);
    let denom = s0 - 2.0 * best.1 + s2;
    let theta0 = if denom.abs() > 1e-300 {
        reduce_axis_deg(best.0 + 0.5 * h * (s0 - s2) / denom)
    } else {
        best.0
    };
    let (b, ssr) = eval(theta0);
    if ssr <= best.1 {
        (b, theta0, ssr)
    } else {
        (best.2, best.0, best.1)
    }
}

/// Polarization visibility V = B/(B + 2A) of a fit; 0 for degenerate fits.
pub fn visibility(fit: &Cos2Fit) -> f64 {
    if fit.degenerate {
        return 0.0;
    }
    let denom = fit.amplitude_b + 2.0 * fit.offset_a;
    if denom <= 0.0 {
        0.0
    } else {
        (fit.amplitude_b / denom).clamp(0.0, 1.0)
    }
}

/// θ(E) and V(E): one cos² fit per spectral bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrallyResolvedPolarization {
    /// Bin centers (mean of contributing axis samples), in the scan's axis
    /// units.
    pub energies_ev: Vec<f64>,
    /// Total counts per bin summed over angles.
    pub bin_totals: Vec<f64>,
    /// Per-bin fits; degenerate bins carry the flag instead of a θ value.
    pub fits: Vec<Cos2Fit>,
}

impl SpectrallyResolvedPolarization {
    pub fn theta_series(&self) -> Vec<Option<f64>> {
        self.fits.iter().map(|f| f.theta0_deg).collect()
    }

    pub fn visibility_series(&self) -> Vec<Option<f64>> {
        self.fits
            .iter()
            .map(|f| if f.degenerate { None } else { Some(visibility(f)) })
            .collect()
    }
}

/// Fit the cos² model in every spectral bin of width `bin_width` (axis
/// units).
///
/// Counts are aggregated per (angle, bin) and weighted by Poisson variances
/// max(count, 1). Bins that receive no axis sample are skipped.
pub fn fit_spectrally_resolved(
    scan: &AngleResolvedSpectrum,
    bin_width: f64,
) -> Result<SpectrallyResolvedPolarization> {
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(Error::domain(format!(
            "bin width must be finite and > 0, got {bin_width}"
        )));
    }
    let axis = scan.axis();
    let first = axis[0];
    let n_bins = (((axis[axis.len() - 1] - first) / bin_width).floor() as usize) + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &x) in axis.iter().enumerate() {
        let b = (((x - first) / bin_width).floor() as usize).min(n_bins - 1);
        members[b].push(i);
    }
    let mut energies = Vec::new();
    let mut bin_totals = Vec::new();
    let mut fits = Vec::new();
    for bin in members.iter().filter(|m| !m.is_empty()) {
        let center = bin.iter().map(|&i| axis[i]).sum::<f64>() / bin.len() as f64;
        let totals: Vec<f64> = scan
            .counts()
            .iter()
            .map(|row| bin.iter().map(|&i| row[i]).sum())
            .collect();
        let weights: Vec<f64> = totals.iter().map(|&t| 1.0 / t.max(1.0)).collect();
        let fit = fit_cos2(scan.angles_deg(), &totals, Some(&weights))?;
        energies.push(center);
        bin_totals.push(totals.iter().sum());
        fits.push(fit);
    }
    Ok(SpectrallyResolvedPolarization {
        energies_ev: energies,
        bin_totals,
        fits,
    })
}

/// Dipole misalignment |a − b| folded to the axis-difference range [0, 90].
///
/// Symmetric, invariant under adding multiples of 180° to either argument.
pub fn delta_theta(theta_abs_deg: f64, theta_emit_deg: f64) -> f64 {
    let d = (theta_abs_deg - theta_emit_deg).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// One reference measurement feeding [`build_calibration`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeasurement {
    pub wavelength_nm: f64,
    /// Polarization angle of the reference source (true angle).
    pub theta_true_deg: f64,
    /// Angle recovered by the uncalibrated analyzer chain.
    pub theta_measured_deg: f64,
    /// Instrument visibility observed for this (λ, θ).
    pub visibility: f64,
}

/// Wavelength × angle tables of angular error and instrument visibility.
///
/// The error at (λ, θ_true) is θ_measured − θ_true folded to (−90, 90];
/// both surfaces interpolate bilinearly, periodic in θ with period 180°,
/// clamped in λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationMapRaw")]
pub struct CalibrationMap {
    wavelengths_nm: Vec<f64>,
    thetas_deg: Vec<f64>,
    angle_error_deg: Vec<Vec<f64>>,
    instrument_visibility: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct CalibrationMapRaw {
    wavelengths_nm: Vec<f64>,
    thetas_deg: Vec<f64>,
    angle_error_deg: Vec<Vec<f64>>,
    instrument_visibility: Vec<Vec<f64>>,
}

impl TryFrom<CalibrationMapRaw> for CalibrationMap {
    type Error = Error;

    fn try_from(raw: CalibrationMapRaw) -> Result<Self> {
        CalibrationMap::new(
            raw.wavelengths_nm,
            raw.thetas_deg,
            raw.angle_error_deg,
            raw.instrument_visibility,
        )
    }
}

impl CalibrationMap {
    pub fn new(
        wavelengths_nm: Vec<f64>,
        thetas_deg: Vec<f64>,
        angle_error_deg: Vec<Vec<f64>>,
        instrument_visibility: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if wavelengths_nm.len() < 2 {
            return Err(Error::IncompleteCalibration(format!(
                "need at least 2 wavelengths, got {}",
                wavelengths_nm.len()
            )));
        }
        if !wavelengths_nm.windows(2).all(|w| w[0] < w[1])
            || wavelengths_nm.iter().any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::domain(
                "calibration wavelengths must be positive and strictly increasing",
            ));
        }
        let expected: &[f64] = &CALIBRATION_REFERENCE_ANGLES_DEG;
        if thetas_deg.len() != expected.len()
            || thetas_deg
                .iter()
                .zip(expected)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(Error::domain(format!(
                "calibration angles must be {expected:?}, got {thetas_deg:?}"
            )));
        }
        let check_matrix = |m: &[Vec<f64>], name: &str| -> Result<()> {
            if m.len() != wavelengths_nm.len() {
                return Err(Error::domain(format!(
                    "{name} must have one row per wavelength"
                )));
            }
            for row in m {
                if row.len() != expected.len() {
                    return Err(Error::domain(format!(
                        "{name} rows must have {} entries",
                        expected.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain(format!("{name} entries must be finite")));
                }
            }
            Ok(())
        };
        check_matrix(&angle_error_deg, "angle_error_deg")?;
        check_matrix(&instrument_visibility, "instrument_visibility")?;
        if instrument_visibility
            .iter()
            .flatten()
            .any(|&v| v <= 0.0 || v > 1.0)
        {
            return Err(Error::domain(
                "instrument visibilities must lie in (0, 1]",
            ));
        }
        Ok(Self {
            wavelengths_nm,
            thetas_deg,
            angle_error_deg,
            instrument_visibility,
        })
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn thetas_deg(&self) -> &[f64] {
        &self.thetas_deg
    }

    /// Bilinear interpolation of a surface, periodic in θ (period 180°),
    /// clamped in λ. Returns (value, clamped).
    fn interpolate(&self, surface: &[Vec<f64>], wavelength_nm: f64, theta_deg: f64) -> (f64, bool) {
        let lams = &self.wavelengths_nm;
        let (lam, clamped) = if wavelength_nm < lams[0] {
            (lams[0], true)
        } else if wavelength_nm > lams[lams.len() - 1] {
            (lams[lams.len() - 1], true)
        } else {
            (wavelength_nm, false)
        };
        let j = match lams.binary_search_by(|v| v.total_cmp(&lam)) {
            Ok(j) => j.min(lams.len() - 2),
            Err(j) => (j.max(1) - 1).min(lams.len() - 2),
        };
        let tl = (lam - lams[j]) / (lams[j + 1] - lams[j]);

        let theta = reduce_axis_deg(theta_deg);
        let spacing = 30.0;
        let i = ((theta / spacing).floor() as usize).min(5);
        let i_next = (i + 1) % 6;
        let tt = (theta - self.thetas_deg[i]) / spacing;

        // angular errors interpolate on the circle: fold each gap to (-90, 90]
        let row_interp = |row: &[f64]| -> f64 {
            let gap = signed_axis_difference_deg(row[i_next] + self.thetas_deg[i] + spacing, row[i] + self.thetas_deg[i]) - spacing;
            row[i] + tt * gap
        };
        let lo = row_interp(&surface[j]);
        let hi = row_interp(&surface[j + 1]);
        (lo + tl * (hi - lo), clamped)
    }

    fn angle_error(&self, wavelength_nm: f64, theta_true_deg: f64) -> (f64, bool) {
        self.interpolate(&self.angle_error_deg, wavelength_nm, theta_true_deg)
    }

    fn visibility_at(&self, wavelength_nm: f64, theta_true_deg: f64) -> (f64, bool) {
        self.interpolate(&self.instrument_visibility, wavelength_nm, theta_true_deg)
    }

    /// An identity map (zero error, unit visibility) over a wavelength range.
    pub fn identity(wavelength_lo_nm: f64, wavelength_hi_nm: f64) -> Result<Self> {
        Self::new(
            vec![wavelength_lo_nm, wavelength_hi_nm],
            CALIBRATION_REFERENCE_ANGLES_DEG.to_vec(),
            vec![vec![0.0; 6]; 2],
            vec![vec![1.0; 6]; 2],
        )
    }
}

/// Group reference measurements into a [`CalibrationMap`].
///
/// Every wavelength must cover all six reference angles (the HWP φ → θ
/// doubling is resolved before this point: `theta_measured_deg` is already
/// in θ space). Repeated (λ, θ) measurements are averaged.
pub fn build_calibration(measurements: &[CalibrationMeasurement]) -> Result<CalibrationMap> {
    if measurements.is_empty() {
        return Err(Error::IncompleteCalibration("no measurements".into()));
    }
    for m in measurements {
        if !m.wavelength_nm.is_finite() || m.wavelength_nm <= 0.0 {
            return Err(Error::domain(format!(
                "wavelength must be positive, got {}",
                m.wavelength_nm
            )));
        }
        if !m.theta_true_deg.is_finite() || !m.theta_measured_deg.is_finite() {
            return Err(Error::domain("calibration angles must be finite"));
        }
        if !m.visibility.is_finite() || m.visibility <= 0.0 || m.visibility > 1.0 {
            return Err(Error::domain(format!(
                "calibration visibility must lie in (0, 1], got {}",
                m.visibility
            )));
        }
    }
    let mut wavelengths: Vec<f64> = measurements.iter().map(|m| m.wavelength_nm).collect();
    wavelengths.sort_by(f64::total_cmp);
    wavelengths.dedup();
    if wavelengths.len() < 2 {
        return Err(Error::IncompleteCalibration(format!(
            "need at least 2 wavelengths, got {}",
            wavelengths.len()
        )));
    }
    let mut angle_error = Vec::with_capacity(wavelengths.len());
    let mut visibility_table = Vec::with_capacity(wavelengths.len());
    for &lam in &wavelengths {
        let mut err_row = Vec::with_capacity(6);
        let mut vis_row = Vec::with_capacity(6);
        for &theta_ref in &CALIBRATION_REFERENCE_ANGLES_DEG {
            let hits: Vec<&CalibrationMeasurement> = measurements
                .iter()
                .filter(|m| {
                    m.wavelength_nm == lam
                        && (reduce_axis_deg(m.theta_true_deg) - theta_ref).abs() < 1e-6
                })
                .collect();
            if hits.is_empty() {
                return Err(Error::IncompleteCalibration(format!(
                    "no measurement at {lam} nm for reference angle {theta_ref}°"
                )));
            }
            let err = hits
                .iter()
                .map(|m| signed_axis_difference_deg(m.theta_measured_deg, m.theta_true_deg))
                .sum::<f64>()
                / hits.len() as f64;
            let vis = hits.iter().map(|m| m.visibility).sum::<f64>() / hits.len() as f64;
            err_row.push(err);
            vis_row.push(vis);
        }
        angle_error.push(err_row);
        visibility_table.push(vis_row);
    }
    CalibrationMap::new(
        wavelengths,
        CALIBRATION_REFERENCE_ANGLES_DEG.to_vec(),
        angle_error,
        visibility_table,
    )
}

/// A calibrated angle plus a flag for out-of-range wavelengths (the map is
/// clamped to its wavelength grid there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibratedAngle {
    pub theta_true_deg: f64,
    pub wavelength_clamped: bool,
}

/// Invert the calibration: recover the true angle from a measured one.
///
/// The tabulated error is indexed by the true angle, so the correction is a
/// damped fixed-point iteration θ ← θ + ½·((θ_meas − err(λ, θ)) − θ)
/// starting from θ_meas.
pub fn apply_calibration(
    theta_measured_deg: f64,
    wavelength_nm: f64,
    map: &CalibrationMap,
) -> Result<CalibratedAngle> {
    if !theta_measured_deg.is_finite() {
        return Err(Error::domain("measured angle must be finite"));
    }
    if !wavelength_nm.is_finite() || wavelength_nm <= 0.0 {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    const MAX_ITERATIONS: usize = 50;
    const DAMPING: f64 = 0.5;
    let mut theta = reduce_axis_deg(theta_measured_deg);
    let mut clamped = false;
    for _ in 0..MAX_ITERATIONS {
        let (err, was_clamped) = map.angle_error(wavelength_nm, theta);
        clamped |= was_clamped;
        let target = theta_measured_deg - err;
        let delta = signed_axis_difference_deg(target, theta);
        theta = reduce_axis_deg(theta + DAMPING * delta);
        if delta.abs() < 1e-9 {
            return Ok(CalibratedAngle {
                theta_true_deg: theta,
                wavelength_clamped: clamped,
            });
        }
    }
    Err(Error::CalibrationConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Divide out the instrument visibility: v_true = min(1, v / V_inst(λ, θ)).
pub fn correct_visibility(
    v_measured: f64,
    wavelength_nm: f64,
    theta_true_deg: f64,
    map: &CalibrationMap,
) -> Result<f64> {
    if !v_measured.is_finite() || !(0.0..=1.0).contains(&v_measured) {
        return Err(Error::domain(format!(
            "measured visibility must lie in [0, 1], got {v_measured}"
        )));
    }
    if !theta_true_deg.is_finite() {
        return Err(Error::domain("angle must be finite"));
    }
    if !wavelength_nm.is_finite() || wavelength_nm <= 0.0 {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    let (v_inst, _) = map.visibility_at(wavelength_nm, theta_true_deg);
    if v_inst <= 0.05 {
        return Err(Error::UnreliableCorrection { visibility: v_inst });
    }
    Ok((v_measured / v_inst).min(1.0))
}
