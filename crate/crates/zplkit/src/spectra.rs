//! Band synthesis and spectral bookkeeping.
//!
//! An emission band is a weighted sum of lineshapes placed at
//! E_ZPL − m·ħω with weights from the vibronic sideband distribution; the
//! matching absorption band mirrors it about E_ZPL. This module also owns
//! the unit conversions along the measured-spectrum → band pipeline
//! (wavelength → energy Jacobian, the E⁻³ optical-density-of-states factor,
//! reflection about the ZPL and the shift to a Stokes axis) and the peak
//! finder that locates a ZPL and its phonon sidebands.

use serde::{Deserialize, Serialize};

use crate::constants::HC_EV_NM;
use crate::error::{Error, Result};
use crate::fitting::solve3_with_covariance;
use crate::vibronic::{system_sideband_lines, VibronicSystem};

/// What the sample axis measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    WavelengthNm,
    EnergyEv,
    StokesMev,
}

impl AxisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisKind::WavelengthNm => "wavelength_nm",
            AxisKind::EnergyEv => "energy_ev",
            AxisKind::StokesMev => "stokes_mev",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wavelength_nm" => Some(AxisKind::WavelengthNm),
            "energy_ev" => Some(AxisKind::EnergyEv),
            "stokes_mev" => Some(AxisKind::StokesMev),
            _ => None,
        }
    }
}

/// What the intensity values mean. Transitions between kinds happen only
/// through the declared conversion operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsKind {
    CountsPerWavelength,
    CountsPerEnergy,
    BandDensity,
}

impl UnitsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitsKind::CountsPerWavelength => "counts_per_wavelength",
            UnitsKind::CountsPerEnergy => "counts_per_energy",
            UnitsKind::BandDensity => "band_density",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "counts_per_wavelength" => Some(UnitsKind::CountsPerWavelength),
            "counts_per_energy" => Some(UnitsKind::CountsPerEnergy),
            "band_density" => Some(UnitsKind::BandDensity),
            _ => None,
        }
    }
}

/// A sampled intensity spectrum on a strictly monotone axis.
///
/// Stored ascending; a strictly decreasing input is reversed on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis_kind: AxisKind,
    units_kind: UnitsKind,
    axis: Vec<f64>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(
        axis_kind: AxisKind,
        units_kind: UnitsKind,
        mut axis: Vec<f64>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::domain(format!(
                "axis and values lengths differ: {} vs {}",
                axis.len(),
                values.len()
            )));
        }
        if axis.is_empty() {
            return Err(Error::domain("spectrum must hold at least one sample"));
        }
        if axis.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("axis samples must be finite"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("intensity values must be finite and >= 0"));
        }
        if axis.len() > 1 {
            let ascending = axis.windows(2).all(|w| w[0] < w[1]);
            let descending = axis.windows(2).all(|w| w[0] > w[1]);
            if descending {
                axis.reverse();
                values.reverse();
            } else if !ascending {
                return Err(Error::domain("axis must be strictly monotone"));
            }
        }
        Ok(Self {
            axis_kind,
            units_kind,
            axis,
            values,
        })
    }

    pub fn axis_kind(&self) -> AxisKind {
        self.axis_kind
    }

    pub fn units_kind(&self) -> UnitsKind {
        self.units_kind
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Trapezoidal integral over the spectrum's own axis.
    pub fn integral(&self) -> f64 {
        self.axis
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
            .sum()
    }
}

/// Line profile used for each phonon line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineshapeKind {
    Gaussian,
    Lorentzian,
}

/// Lineshape of the n-phonon sideband: the ZPL width plus an additive
/// growth per created phonon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineshapeSpecRaw")]
pub struct LineshapeSpec {
    kind: LineshapeKind,
    zpl_fwhm_mev: f64,
    sideband_fwhm_growth_mev: f64,
}

#[derive(Deserialize)]
struct LineshapeSpecRaw {
    kind: LineshapeKind,
    zpl_fwhm_mev: f64,
    sideband_fwhm_growth_mev: f64,
}

impl TryFrom<LineshapeSpecRaw> for LineshapeSpec {
    type Error = Error;

    fn try_from(raw: LineshapeSpecRaw) -> Result<Self> {
        LineshapeSpec::new(raw.kind, raw.zpl_fwhm_mev, raw.sideband_fwhm_growth_mev)
    }
}

impl LineshapeSpec {
    pub fn new(
        kind: LineshapeKind,
        zpl_fwhm_mev: f64,
        sideband_fwhm_growth_mev: f64,
    ) -> Result<Self> {
        if !zpl_fwhm_mev.is_finite() || zpl_fwhm_mev <= 0.0 {
            return Err(Error::domain(format!(
                "ZPL FWHM must be finite and > 0 meV, got {zpl_fwhm_mev}"
            )));
        }
        if !sideband_fwhm_growth_mev.is_finite() || sideband_fwhm_growth_mev < 0.0 {
            return Err(Error::domain(format!(
                "sideband FWHM growth must be finite and >= 0 meV, got {sideband_fwhm_growth_mev}"
            )));
        }
        Ok(Self {
            kind,
            zpl_fwhm_mev,
            sideband_fwhm_growth_mev,
        })
    }

    pub fn kind(&self) -> LineshapeKind {
        self.kind
    }

    pub fn zpl_fwhm_mev(&self) -> f64 {
        self.zpl_fwhm_mev
    }

    pub fn sideband_fwhm_growth_mev(&self) -> f64 {
        self.sideband_fwhm_growth_mev
    }

    fn fwhm_ev(&self, order: u32) -> f64 {
        (self.zpl_fwhm_mev + f64::from(order) * self.sideband_fwhm_growth_mev) * 1e-3
    }

    /// Unit-area profile at offset `x` (eV) for the given phonon order.
    fn density(&self, x: f64, order: u32) -> f64 {
        let fwhm = self.fwhm_ev(order);
        match self.kind {
            LineshapeKind::Gaussian => {
                // FWHM = 2·sqrt(2 ln 2)·σ
                let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            LineshapeKind::Lorentzian => {
                let gamma = 0.5 * fwhm;
                gamma / (std::f64::consts::PI * (x * x + gamma * gamma))
            }
        }
    }
}

/// Everything needed to synthesize a band: the vibronic system, the
/// lineshape, the overall oscillator strength and the temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandModelRaw")]
pub struct BandModel {
    system: VibronicSystem,
    lineshape: LineshapeSpec,
    oscillator_strength: f64,
    temperature_k: f64,
}

#[derive(Deserialize)]
struct BandModelRaw {
    system: VibronicSystem,
    lineshape: LineshapeSpec,
    oscillator_strength: f64,
    temperature_k: f64,
}

impl TryFrom<BandModelRaw> for BandModel {
    type Error = Error;

    fn try_from(raw: BandModelRaw) -> Result<Self> {
        BandModel::new(
            raw.system,
            raw.lineshape,
            raw.oscillator_strength,
            raw.temperature_k,
        )
    }
}

impl BandModel {
    pub fn new(
        system: VibronicSystem,
        lineshape: LineshapeSpec,
        oscillator_strength: f64,
        temperature_k: f64,
    ) -> Result<Self> {
        if !oscillator_strength.is_finite() || oscillator_strength <= 0.0 {
            return Err(Error::domain(format!(
                "oscillator strength must be finite and > 0, got {oscillator_strength}"
            )));
        }
        if !temperature_k.is_finite() || temperature_k < 0.0 {
            return Err(Error::domain(format!(
                "temperature must be finite and >= 0 K, got {temperature_k}"
            )));
        }
        Ok(Self {
            system,
            lineshape,
            oscillator_strength,
            temperature_k,
        })
    }

    pub fn system(&self) -> &VibronicSystem {
        &self.system
    }

    pub fn lineshape(&self) -> &LineshapeSpec {
        &self.lineshape
    }

    pub fn oscillator_strength(&self) -> f64 {
        self.oscillator_strength
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }
}

/// Internal tolerance for the line list feeding band synthesis.
const LINE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy)]
enum BandSide {
    Emission,
    Absorption,
}

fn validate_grid(model: &BandModel, grid: &[f64], side: BandSide) -> Result<()> {
    if grid.len() < 2 || !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::domain(
            "band grid must be strictly increasing with at least two samples",
        ));
    }
    let zpl = model.system().zpl_energy_ev();
    let max_energy_ev = model
        .system()
        .modes()
        .iter()
        .map(|m| m.energy_mev())
        .fold(0.0, f64::max)
        * 1e-3;
    let max_s = model
        .system()
        .modes()
        .iter()
        .map(|m| m.huang_rhys())
        .fold(0.0, f64::max);
    let sideband_reach = 5.0 * max_energy_ev * max_s.max(1.0);
    let fwhm_ev = model.lineshape().zpl_fwhm_mev() * 1e-3;
    let (lo_needed, hi_needed) = match side {
        BandSide::Emission => (zpl - sideband_reach, zpl + 3.0 * fwhm_ev),
        BandSide::Absorption => (zpl - 3.0 * fwhm_ev, zpl + sideband_reach),
    };
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    if lo > lo_needed || hi < hi_needed {
        return Err(Error::domain(format!(
            "band grid [{lo}, {hi}] eV does not span the required [{lo_needed}, {hi_needed}] eV"
        )));
    }
    let max_step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_step * 3.0 > fwhm_ev {
        return Err(Error::Sampling(format!(
            "grid step {max_step} eV gives fewer than 4 samples per ZPL FWHM ({fwhm_ev} eV)"
        )));
    }
    Ok(())
}

fn synthesize_band(model: &BandModel, grid: &[f64], side: BandSide) -> Result<Spectrum> {
    validate_grid(model, grid, side)?;
    let lines = system_sideband_lines(model.system(), model.temperature_k(), LINE_TOLERANCE)?;
    let zpl = model.system().zpl_energy_ev();
    let scale = model.oscillator_strength();
    let values: Vec<f64> = grid
        .iter()
        .map(|&e| {
            let mut v = 0.0;
            for line in &lines {
                let center = match side {
                    BandSide::Emission => zpl - line.shift_mev * 1e-3,
                    BandSide::Absorption => zpl + line.shift_mev * 1e-3,
                };
                v += line.weight * model.lineshape().density(e - center, line.order);
            }
            (scale * v).max(0.0)
        })
        .collect();
    Spectrum::new(
        AxisKind::EnergyEv,
        UnitsKind::BandDensity,
        grid.to_vec(),
        values,
    )
}

/// Emission band: lines at E_ZPL − m·ħω with thermal sideband weights.
///
/// The integrated band equals the oscillator strength up to line truncation
/// and whatever weight the grid's edges cut off; the fractional weight in
/// the ZPL line equals the Debye-Waller factor at T = 0.
pub fn synthesize_emission_band(model: &BandModel, grid: &[f64]) -> Result<Spectrum> {
    synthesize_band(model, grid, BandSide::Emission)
}

/// Absorption band: lines at E_ZPL + n·ħω. At T = 0 this is the exact
/// mirror of the emission band about E_ZPL.
pub fn synthesize_absorption_band(model: &BandModel, grid: &[f64]) -> Result<Spectrum> {
    synthesize_band(model, grid, BandSide::Absorption)
}

/// Convert a wavelength spectrum (counts per nm) to an energy spectrum
/// (counts per eV): E = hc/λ and values scaled by the Jacobian λ²/hc.
pub fn wavelength_counts_to_energy_counts(s: &Spectrum) -> Result<Spectrum> {
    if s.axis_kind() != AxisKind::WavelengthNm || s.units_kind() != UnitsKind::CountsPerWavelength {
        return Err(Error::domain(
            "expected a wavelength_nm axis with counts_per_wavelength values",
        ));
    }
    if s.axis().iter().any(|&l| l <= 0.0) {
        return Err(Error::domain("wavelengths must be positive"));
    }
    let axis: Vec<f64> = s.axis().iter().map(|&l| HC_EV_NM / l).collect();
    let values: Vec<f64> = s
        .axis()
        .iter()
        .zip(s.values())
        .map(|(&l, &v)| v * l * l / HC_EV_NM)
        .collect();
    // E = hc/λ reverses the ordering; Spectrum::new re-sorts ascending
    Spectrum::new(AxisKind::EnergyEv, UnitsKind::CountsPerEnergy, axis, values)
}

/// Inverse of [`wavelength_counts_to_energy_counts`].
pub fn energy_counts_to_wavelength_counts(s: &Spectrum) -> Result<Spectrum> {
    if s.axis_kind() != AxisKind::EnergyEv || s.units_kind() != UnitsKind::CountsPerEnergy {
        return Err(Error::domain(
            "expected an energy_ev axis with counts_per_energy values",
        ));
    }
    if s.axis().iter().any(|&e| e <= 0.0) {
        return Err(Error::domain("energies must be positive"));
    }
    let axis: Vec<f64> = s.axis().iter().map(|&e| HC_EV_NM / e).collect();
    let values: Vec<f64> = s
        .axis()
        .iter()
        .zip(s.values())
        .map(|(&e, &v)| v * e * e / HC_EV_NM)
        .collect();
    Spectrum::new(
        AxisKind::WavelengthNm,
        UnitsKind::CountsPerWavelength,
        axis,
        values,
    )
}

/// Strip the E³ density of optical states from a luminescence spectrum,
/// leaving the emission band profile: values are scaled by E⁻³.
pub fn luminescence_to_emission_band(s: &Spectrum) -> Result<Spectrum> {
    if s.axis_kind() != AxisKind::EnergyEv || s.units_kind() != UnitsKind::CountsPerEnergy {
        return Err(Error::domain(
            "expected an energy_ev axis with counts_per_energy values",
        ));
    }
    if s.axis().iter().any(|&e| e <= 0.0) {
        return Err(Error::domain(
            "energies must be positive for the E^-3 conversion",
        ));
    }
    let values: Vec<f64> = s
        .axis()
        .iter()
        .zip(s.values())
        .map(|(&e, &v)| v / (e * e * e))
        .collect();
    Spectrum::new(
        AxisKind::EnergyEv,
        UnitsKind::BandDensity,
        s.axis().to_vec(),
        values,
    )
}

/// Reflect a band about the ZPL: the output axis is 2·E_ZPL − input axis.
///
/// A sample exactly at E_ZPL maps to itself and applying the mirror twice
/// returns the original band (up to one rounding of the axis arithmetic).
pub fn mirror_band(band: &Spectrum, zpl_energy_ev: f64) -> Result<Spectrum> {
    if band.units_kind() != UnitsKind::BandDensity {
        return Err(Error::domain("mirror_band expects band_density values"));
    }
    if band.axis_kind() != AxisKind::EnergyEv {
        return Err(Error::domain("mirror_band expects an energy_ev axis"));
    }
    if !zpl_energy_ev.is_finite() {
        return Err(Error::domain("ZPL energy must be finite"));
    }
    let lo = band.axis()[0];
    let hi = *band.axis().last().unwrap();
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    if zpl_energy_ev < lo - span || zpl_energy_ev > hi + span {
        return Err(Error::domain(format!(
            "ZPL {zpl_energy_ev} eV is not within or adjacent to the axis range [{lo}, {hi}] eV"
        )));
    }
    let pivot = 2.0 * zpl_energy_ev;
    let axis: Vec<f64> = band.axis().iter().map(|&e| pivot - e).collect();
    Spectrum::new(
        AxisKind::EnergyEv,
        UnitsKind::BandDensity,
        axis,
        band.values().to_vec(),
    )
}

/// Shift an energy-axis band to the Stokes axis ΔE = E − E_ZPL in meV.
/// Values are untouched.
pub fn to_stokes_axis(band: &Spectrum, zpl_energy_ev: f64) -> Result<Spectrum> {
    if band.axis_kind() != AxisKind::EnergyEv {
        return Err(Error::domain("to_stokes_axis expects an energy_ev axis"));
    }
    if !zpl_energy_ev.is_finite() {
        return Err(Error::domain("ZPL energy must be finite"));
    }
    let axis: Vec<f64> = band
        .axis()
        .iter()
        .map(|&e| (e - zpl_energy_ev) * 1e3)
        .collect();
    Spectrum::new(
        AxisKind::StokesMev,
        band.units_kind(),
        axis,
        band.values().to_vec(),
    )
}

/// A located peak with an uncertainty from the local quadratic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub energy_ev: f64,
    pub uncertainty_ev: f64,
}

/// ZPL and phonon-sideband positions extracted from an emission spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub zpl: PeakEstimate,
    /// Sidebands in decreasing energy (increasing phonon count).
    pub sidebands: Vec<PeakEstimate>,
    /// Uncertainty-weighted mean spacing between consecutive peaks, meV.
    /// Absent when no sideband was found.
    pub phonon_energy_mev: Option<f64>,
    pub phonon_uncertainty_mev: Option<f64>,
}

/// Candidate local maxima with their prominences (height above the higher
/// of the two bracketing valleys toward the nearest taller samples).
fn peak_candidates(values: &[f64]) -> Vec<(usize, f64)> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            // plateau: advance to its end, peak at the left edge
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] > values[i] {
                i = j + 1;
                continue;
            }
            peaks.push(i);
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
        .into_iter()
        .map(|p| {
            let h = values[p];
            let mut left_min = h;
            let mut k = p;
            while k > 0 {
                k -= 1;
                if values[k] > h {
                    break;
                }
                left_min = left_min.min(values[k]);
            }
            let mut right_min = h;
            let mut k = p;
            while k + 1 < values.len() {
                k += 1;
                if values[k] > h {
                    break;
                }
                right_min = right_min.min(values[k]);
            }
            (p, h - left_min.max(right_min))
        })
        .collect()
}

/// 5-point binomial smoothing used only for candidate detection; positions
/// are refined on the raw data.
fn binomial_smooth(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 5 {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let at = |j: isize| {
            let k = (i as isize + j).clamp(0, n as isize - 1) as usize;
            values[k]
        };
        out.push((at(-2) + 4.0 * at(-1) + 6.0 * at(0) + 4.0 * at(1) + at(2)) / 16.0);
    }
    out
}

/// Quadratic vertex refinement around sample `idx`, returning the refined
/// position and its standard error from the fit residuals.
fn refine_peak(axis: &[f64], values: &[f64], idx: usize, half_window: usize) -> PeakEstimate {
    let lo = idx.saturating_sub(half_window);
    let hi = (idx + half_window).min(axis.len() - 1);
    let m = hi - lo + 1;
    if m < 3 {
        let step = if axis.len() > 1 {
            (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
        } else {
            0.0
        };
        return PeakEstimate {
            energy_ev: axis[idx],
            uncertainty_ev: step.abs().max(f64::MIN_POSITIVE),
        };
    }
    // center x for conditioning
    let x0 = axis[idx];
    let xs: Vec<f64> = axis[lo..=hi].iter().map(|&x| x - x0).collect();
    let ys = &values[lo..=hi];
    // normal equations for y = a + b x + c x²
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let x2 = x * x;
        s[0] += 1.0;
        s[1] += x;
        s[2] += x2;
        s[3] += x2 * x;
        s[4] += x2 * x2;
        t[0] += y;
        t[1] += y * x;
        t[2] += y * x2;
    }
    let mat = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let Some((coeff, cov)) = solve3_with_covariance(mat, t) else {
        return PeakEstimate {
            energy_ev: axis[idx],
            uncertainty_ev: (axis[hi] - axis[lo]).abs(),
        };
    };
    let (b, c) = (coeff[1], coeff[2]);
    if c >= 0.0 {
        // no downward curvature; keep the raw sample
        return PeakEstimate {
            energy_ev: axis[idx],
            uncertainty_ev: (axis[hi] - axis[lo]).abs(),
        };
    }
    let vertex = -b / (2.0 * c);
    // residual variance scales the covariance (unit-weight fit)
    let mut ssr = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let fit = coeff[0] + b * x + c * x * x;
        ssr += (y - fit) * (y - fit);
    }
    let dof = (m as f64 - 3.0).max(1.0);
    let sigma2 = ssr / dof;
    // delta method on vertex = -b/(2c)
    let gb = -1.0 / (2.0 * c);
    let gc = b / (2.0 * c * c);
    let var = sigma2 * (gb * gb * cov[1][1] + gc * gc * cov[2][2] + 2.0 * gb * gc * cov[1][2]);
    let step = (axis[hi] - axis[lo]).abs() / (m - 1).max(1) as f64;
    let uncertainty = var.max(0.0).sqrt().max(1e-3 * step);
    // keep the vertex inside the window
    let vertex = vertex.clamp(xs[0], xs[m - 1]);
    PeakEstimate {
        energy_ev: x0 + vertex,
        uncertainty_ev: uncertainty,
    }
}

/// Locate the ZPL and phonon sidebands of an emission spectrum.
///
/// The ZPL is the highest-energy peak whose prominence exceeds
/// `min_prominence` of the spectrum's full range (emission sidebands are
/// red-shifted); remaining prominent peaks below it are sidebands. The mean
/// sideband spacing is weighted by the quadratic-fit position
/// uncertainties.
pub fn find_zpl_and_sidebands(s: &Spectrum, min_prominence: f64) -> Result<PeakReport> {
    if s.axis_kind() != AxisKind::EnergyEv {
        return Err(Error::domain("peak search expects an energy_ev axis"));
    }
    if s.len() < 16 {
        return Err(Error::domain(format!(
            "peak search needs at least 16 samples, got {}",
            s.len()
        )));
    }
    if !min_prominence.is_finite() || min_prominence <= 0.0 || min_prominence >= 1.0 {
        return Err(Error::domain(format!(
            "prominence fraction must lie in (0, 1), got {min_prominence}"
        )));
    }
    let smoothed = binomial_smooth(s.values());
    let max = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range <= 0.0 {
        return Err(Error::PeakNotFound);
    }
    let threshold = min_prominence * range;
    let mut kept: Vec<usize> = peak_candidates(&smoothed)
        .into_iter()
        .filter(|&(_, prominence)| prominence >= threshold)
        .map(|(idx, _)| idx)
        .collect();
    if kept.is_empty() {
        return Err(Error::PeakNotFound);
    }
    kept.sort_unstable();

    // window half-width from the half-maximum extent around each peak
    let estimates: Vec<PeakEstimate> = kept
        .iter()
        .map(|&idx| {
            let half_height = min + (smoothed[idx] - min) * 0.5;
            let mut left = idx;
            while left > 0 && smoothed[left - 1] < smoothed[left] && smoothed[left - 1] > half_height
            {
                left -= 1;
            }
            let mut right = idx;
            while right + 1 < smoothed.len()
                && smoothed[right + 1] < smoothed[right]
                && smoothed[right + 1] > half_height
            {
                right += 1;
            }
            let half_window = ((right - left) / 2).max(2);
            refine_peak(s.axis(), s.values(), idx, half_window)
        })
        .collect();

    // highest energy last after the ascending-axis sort
    let (zpl, sidebands_asc) = estimates.split_last().expect("kept is non-empty");
    let mut sidebands: Vec<PeakEstimate> = sidebands_asc.to_vec();
    sidebands.reverse(); // decreasing energy, increasing phonon count

    let (phonon_energy_mev, phonon_uncertainty_mev) = if sidebands.is_empty() {
        (None, None)
    } else {
        let mut ordered = vec![*zpl];
        ordered.extend(sidebands.iter().copied());
        let mut weight_sum = 0.0;
        let mut weighted = 0.0;
        for pair in ordered.windows(2) {
            let spacing = (pair[0].energy_ev - pair[1].energy_ev) * 1e3;
            let sigma2 = (pair[0].uncertainty_ev.powi(2) + pair[1].uncertainty_ev.powi(2)) * 1e6;
            let w = 1.0 / sigma2.max(f64::MIN_POSITIVE);
            weighted += w * spacing;
            weight_sum += w;
        }
        (Some(weighted / weight_sum), Some((1.0 / weight_sum).sqrt()))
    };

    Ok(PeakReport {
        zpl: *zpl,
        sidebands,
        phonon_energy_mev,
        phonon_uncertainty_mev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vibronic::{debye_waller, PhononMode};
    use approx::assert_abs_diff_eq;

    fn fig3_system() -> VibronicSystem {
        VibronicSystem::new(2.06, vec![PhononMode::new(180.0, 1.0).unwrap()], 30.0, 30.0).unwrap()
    }

    fn fig3_model() -> BandModel {
        BandModel::new(
            fig3_system(),
            LineshapeSpec::new(LineshapeKind::Gaussian, 10.0, 2.0).unwrap(),
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn emission_band_peaks_and_ratios() {
        let model = fig3_model();
        let g = grid(1.15, 2.10, 0.001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        // peaks at 2.06, 1.88, 1.70 with Poisson(1) weights 1 : 1 : 0.5
        let value_at = |e: f64| {
            let idx = band
                .axis()
                .iter()
                .position(|&x| (x - e).abs() < 5e-4)
                .unwrap();
            band.values()[idx]
        };
        let zpl = value_at(2.06);
        let one = value_at(1.88);
        let two = value_at(1.70);
        // peak heights divide the weights by the order-dependent FWHM
        // (unit-area lines): h_m ∝ w_m / fwhm_m
        assert_abs_diff_eq!(one / zpl, 10.0 / 12.0, epsilon = 1e-3);
        assert_abs_diff_eq!(two / zpl, 0.5 * 10.0 / 14.0, epsilon = 1e-3);
        // total integral accounts for the grid cutting the far Poisson tail
        assert_abs_diff_eq!(band.integral(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn zpl_fraction_matches_debye_waller_at_t0() {
        let model = fig3_model();
        let g = grid(1.15, 2.10, 0.001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        // integrate a ±35 meV window around the ZPL; sidebands are 180 meV away
        let (axis, values) = (band.axis(), band.values());
        let window: Vec<usize> = (0..axis.len())
            .filter(|&i| (axis[i] - 2.06).abs() <= 0.035)
            .collect();
        let mut integral = 0.0;
        for w in window.windows(2) {
            integral += 0.5 * (values[w[0]] + values[w[1]]) * (axis[w[1]] - axis[w[0]]);
        }
        let dw = debye_waller(model.system().modes(), 0.0).unwrap();
        assert_abs_diff_eq!(integral / model.oscillator_strength(), dw, epsilon = 1e-6);
    }

    #[test]
    fn zero_coupling_single_line_with_full_strength() {
        let sys =
            VibronicSystem::new(2.0, vec![PhononMode::new(180.0, 0.0).unwrap()], 0.0, 0.0).unwrap();
        let model = BandModel::new(
            sys,
            LineshapeSpec::new(LineshapeKind::Gaussian, 10.0, 2.0).unwrap(),
            3.5,
            0.0,
        )
        .unwrap();
        let g = grid(1.0, 2.1, 0.001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        assert_abs_diff_eq!(band.integral(), 3.5, epsilon = 1e-6);
        let max_idx = band
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_abs_diff_eq!(band.axis()[max_idx], 2.0, epsilon = 1e-3);
    }

    #[test]
    fn doubling_strength_doubles_samples() {
        let base = fig3_model();
        let double = BandModel::new(
            base.system().clone(),
            *base.lineshape(),
            2.0 * base.oscillator_strength(),
            base.temperature_k(),
        )
        .unwrap();
        let g = grid(1.15, 2.10, 0.002);
        let a = synthesize_emission_band(&base, &g).unwrap();
        let b = synthesize_emission_band(&double, &g).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-12);
        }
    }

    fn interp_linear(x: &[f64], y: &[f64], at: f64) -> f64 {
        match x.binary_search_by(|v| v.total_cmp(&at)) {
            Ok(i) => y[i],
            Err(0) => y[0],
            Err(i) if i >= x.len() => y[x.len() - 1],
            Err(i) => {
                let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
                y[i - 1] + t * (y[i] - y[i - 1])
            }
        }
    }

    #[test]
    fn absorption_mirrors_emission_at_t0() {
        let model = fig3_model();
        // symmetric grid about the ZPL so the mirror lands on samples
        let g = grid(2.06 - 0.95, 2.06 + 0.95, 0.001);
        let emission = synthesize_emission_band(&model, &g).unwrap();
        let absorption = synthesize_absorption_band(&model, &g).unwrap();
        let mirrored = mirror_band(&emission, 2.06).unwrap();
        let max_dev = absorption
            .axis()
            .iter()
            .zip(absorption.values())
            .map(|(&e, &v)| {
                let vm = interp_linear(mirrored.axis(), mirrored.values(), e);
                (v - vm).abs()
            })
            .fold(0.0, f64::max);
        assert!(
            max_dev <= 1e-10 * model.oscillator_strength(),
            "max deviation {max_dev}"
        );
    }

    #[test]
    fn grid_span_and_sampling_validation() {
        let model = fig3_model();
        // span too small on the sideband side
        let short = grid(1.9, 2.1, 0.001);
        assert!(matches!(
            synthesize_emission_band(&model, &short),
            Err(Error::Domain(_))
        ));
        // step too coarse for a 10 meV FWHM
        let coarse = grid(1.15, 2.10, 0.004);
        assert!(matches!(
            synthesize_emission_band(&model, &coarse),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn wavelength_conversion_jacobian() {
        // flat density over [500, 600] nm on a fine grid
        let axis = grid(500.0, 600.0, 0.02);
        let values = vec![2.0; axis.len()];
        let s = Spectrum::new(
            AxisKind::WavelengthNm,
            UnitsKind::CountsPerWavelength,
            axis,
            values,
        )
        .unwrap();
        let e = wavelength_counts_to_energy_counts(&s).unwrap();
        assert_eq!(e.axis_kind(), AxisKind::EnergyEv);
        assert!(e.axis().windows(2).all(|w| w[0] < w[1]));
        // integral preserved (fine grid: trapezoid error < 1e-9 relative)
        assert_abs_diff_eq!(e.integral() / s.integral(), 1.0, epsilon = 1e-9);
        // density picks up the λ² Jacobian
        let idx = e.axis().len() / 2;
        let energy = e.axis()[idx];
        let lambda = HC_EV_NM / energy;
        assert_abs_diff_eq!(
            e.values()[idx],
            2.0 * lambda * lambda / HC_EV_NM,
            epsilon = 1e-9
        );
    }

    #[test]
    fn single_bin_wavelength_maps_to_expected_energy() {
        let s = Spectrum::new(
            AxisKind::WavelengthNm,
            UnitsKind::CountsPerWavelength,
            vec![532.0],
            vec![1.0],
        )
        .unwrap();
        let e = wavelength_counts_to_energy_counts(&s).unwrap();
        assert_abs_diff_eq!(e.axis()[0], 2.330529887218045, epsilon = 1e-12);
    }

    #[test]
    fn wavelength_energy_round_trip() {
        let axis = grid(1.7, 2.3, 0.001);
        let values: Vec<f64> = axis.iter().map(|&e| (e - 2.0).powi(2) + 0.5).collect();
        let s =
            Spectrum::new(AxisKind::EnergyEv, UnitsKind::CountsPerEnergy, axis, values).unwrap();
        let back =
            wavelength_counts_to_energy_counts(&energy_counts_to_wavelength_counts(&s).unwrap())
                .unwrap();
        for (a, b) in s.axis().iter().zip(back.axis()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        for (a, b) in s.values().iter().zip(back.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn density_of_states_factor() {
        let s = Spectrum::new(
            AxisKind::EnergyEv,
            UnitsKind::CountsPerEnergy,
            vec![1.70, 2.06],
            vec![5.0, 5.0],
        )
        .unwrap();
        let band = luminescence_to_emission_band(&s).unwrap();
        assert_eq!(band.units_kind(), UnitsKind::BandDensity);
        // equal counts favor the lower energy by (2.06/1.70)³
        assert_abs_diff_eq!(
            band.values()[0] / band.values()[1],
            1.779323427640953,
            epsilon = 1e-12
        );
        // linearity
        let scaled = Spectrum::new(
            AxisKind::EnergyEv,
            UnitsKind::CountsPerEnergy,
            vec![1.70, 2.06],
            vec![15.0, 15.0],
        )
        .unwrap();
        let scaled_band = luminescence_to_emission_band(&scaled).unwrap();
        for (a, b) in band.values().iter().zip(scaled_band.values()) {
            assert_abs_diff_eq!(3.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn mirror_moves_sideband_to_other_side() {
        // peak at zpl - 0.18 must land at zpl + 0.18
        let axis = grid(1.5, 2.2, 0.001);
        let values: Vec<f64> = axis
            .iter()
            .map(|&e| (-(e - 1.88f64).powi(2) / 2e-4).exp())
            .collect();
        let band =
            Spectrum::new(AxisKind::EnergyEv, UnitsKind::BandDensity, axis, values).unwrap();
        let mirrored = mirror_band(&band, 2.06).unwrap();
        let max_idx = mirrored
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_abs_diff_eq!(mirrored.axis()[max_idx], 2.24, epsilon = 1e-3);
        // the sample nearest the ZPL keeps its value
        let zpl_idx = band
            .axis()
            .iter()
            .position(|&e| (e - 2.06).abs() < 5e-4)
            .unwrap();
        let mirrored_idx = mirrored
            .axis()
            .iter()
            .position(|&e| (e - 2.06).abs() < 5e-4)
            .unwrap();
        assert_abs_diff_eq!(
            band.values()[zpl_idx],
            mirrored.values()[mirrored_idx],
            epsilon = 1e-12
        );
        // double mirror is the identity up to axis rounding
        let twice = mirror_band(&mirrored, 2.06).unwrap();
        for (a, b) in band.axis().iter().zip(twice.axis()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in band.values().iter().zip(twice.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn stokes_axis_shift() {
        let band = Spectrum::new(
            AxisKind::EnergyEv,
            UnitsKind::BandDensity,
            vec![2.06, 2.24],
            vec![1.0, 2.0],
        )
        .unwrap();
        let w = to_stokes_axis(&band, 2.06).unwrap();
        assert_eq!(w.axis_kind(), AxisKind::StokesMev);
        assert_abs_diff_eq!(w.axis()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.axis()[1], 180.0, epsilon = 1e-9);
        assert_eq!(w.values(), band.values());
        assert!(w.axis().windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn peak_report_on_fig3_band() {
        let model = fig3_model();
        let g = grid(1.15, 2.10, 0.001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        let report = find_zpl_and_sidebands(&band, 0.05).unwrap();
        assert_abs_diff_eq!(report.zpl.energy_ev, 2.06, epsilon = 1e-3);
        // one- and two-phonon sidebands always clear the 5% threshold; the
        // three-phonon line (~10% of the ZPL height) may as well
        assert!(report.sidebands.len() >= 2);
        assert_abs_diff_eq!(report.sidebands[0].energy_ev, 1.88, epsilon = 2e-3);
        assert_abs_diff_eq!(report.sidebands[1].energy_ev, 1.70, epsilon = 2e-3);
        let phonon = report.phonon_energy_mev.unwrap();
        assert!((phonon - 180.0).abs() <= 2.0, "phonon energy {phonon} meV");
    }

    #[test]
    fn single_gaussian_reports_no_sidebands() {
        let axis = grid(2.0, 2.25, 0.001);
        let values: Vec<f64> = axis
            .iter()
            .map(|&e| (-(e - 2.124f64).powi(2) / (2.0 * 1.8e-5)).exp())
            .collect();
        let s =
            Spectrum::new(AxisKind::EnergyEv, UnitsKind::CountsPerEnergy, axis, values).unwrap();
        let report = find_zpl_and_sidebands(&s, 0.05).unwrap();
        assert_abs_diff_eq!(report.zpl.energy_ev, 2.124, epsilon = 1e-3);
        assert!(report.sidebands.is_empty());
        assert!(report.phonon_energy_mev.is_none());
    }

    #[test]
    fn flat_spectrum_has_no_peak() {
        let axis = grid(2.0, 2.2, 0.01);
        let values = vec![3.0; axis.len()];
        let s =
            Spectrum::new(AxisKind::EnergyEv, UnitsKind::CountsPerEnergy, axis, values).unwrap();
        assert!(matches!(
            find_zpl_and_sidebands(&s, 0.05),
            Err(Error::PeakNotFound)
        ));
    }

    #[test]
    fn peak_finder_scale_and_offset_invariance() {
        let model = fig3_model();
        let g = grid(1.15, 2.10, 0.001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        let base = find_zpl_and_sidebands(&band, 0.05).unwrap();
        let scaled = Spectrum::new(
            AxisKind::EnergyEv,
            UnitsKind::BandDensity,
            band.axis().to_vec(),
            band.values().iter().map(|v| 7.5 * v).collect(),
        )
        .unwrap();
        let offset = Spectrum::new(
            AxisKind::EnergyEv,
            UnitsKind::BandDensity,
            band.axis().to_vec(),
            band.values().iter().map(|v| v + 0.11).collect(),
        )
        .unwrap();
        for other in [scaled, offset] {
            let report = find_zpl_and_sidebands(&other, 0.05).unwrap();
            assert_abs_diff_eq!(report.zpl.energy_ev, base.zpl.energy_ev, epsilon = 1e-9);
            assert_eq!(report.sidebands.len(), base.sidebands.len());
            assert_abs_diff_eq!(
                report.phonon_energy_mev.unwrap(),
                base.phonon_energy_mev.unwrap(),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn two_mode_band_equals_convolution_in_delta_limit() {
        // narrow lines: the two-mode band is the product distribution of the
        // single-mode weights rendered on the joint energy grid
        let sys2 = VibronicSystem::new(
            2.0,
            vec![
                PhononMode::new(180.0, 0.6).unwrap(),
                PhononMode::new(47.0, 0.3).unwrap(),
            ],
            0.0,
            0.0,
        )
        .unwrap();
        let model = BandModel::new(
            sys2.clone(),
            LineshapeSpec::new(LineshapeKind::Gaussian, 1.0, 0.0).unwrap(),
            1.0,
            0.0,
        )
        .unwrap();
        let g = grid(0.9, 2.05, 0.0001);
        let band = synthesize_emission_band(&model, &g).unwrap();
        // evaluate at the (1,1) joint line center, 2.0 - 0.227
        let center = 2.0 - 0.227;
        let idx = band
            .axis()
            .iter()
            .position(|&e| (e - center).abs() < 5e-5)
            .unwrap();
        let w_a = crate::vibronic::sideband_weights(&sys2.modes()[0], 0.0, 1e-6).unwrap();
        let w_b = crate::vibronic::sideband_weights(&sys2.modes()[1], 0.0, 1e-6).unwrap();
        let sigma = 1.0e-3 / (8.0 * std::f64::consts::LN_2).sqrt();
        let peak_density = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let expected = w_a.weight(1) * w_b.weight(1) * peak_density;
        assert_abs_diff_eq!(
            band.values()[idx] / expected,
            1.0,
            epsilon = 1e-2 // neighboring-line tails and grid quantization
        );
    }
}
