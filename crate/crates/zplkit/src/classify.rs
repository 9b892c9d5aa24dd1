//! Stokes-shift classification and survey aggregation.
//!
//! A ZPL's Stokes shift ΔE = E_exc − E_ZPL is compared against the bulk
//! phonon spectrum of the host: shifts reachable by creating one in-plane
//! optical phonon (Region I) are compatible with direct two-state
//! excitation and predict aligned absorption/emission dipoles; shifts
//! beyond the one-phonon ceiling need multiple phonons, where direct
//! absorption is weak and an intermediate electronic state decouples the
//! dipole axes instead.

use serde::{Deserialize, Serialize};

use crate::constants::HC_EV_NM;
use crate::error::{Error, Result};
use crate::polarfit::delta_theta;

/// Bulk phonon branch energy ranges of the host crystal, meV.
///
/// Defaults are the hexagonal-BN branch intervals; all three may be
/// overridden through a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhononCatalogRaw")]
pub struct PhononCatalog {
    pub acoustic_mev: (f64, f64),
    pub out_of_plane_optical_mev: (f64, f64),
    pub in_plane_optical_mev: (f64, f64),
}

#[derive(Deserialize)]
struct PhononCatalogRaw {
    acoustic_mev: (f64, f64),
    out_of_plane_optical_mev: (f64, f64),
    in_plane_optical_mev: (f64, f64),
}

impl TryFrom<PhononCatalogRaw> for PhononCatalog {
    type Error = Error;

    fn try_from(raw: PhononCatalogRaw) -> Result<Self> {
        PhononCatalog::new(
            raw.acoustic_mev,
            raw.out_of_plane_optical_mev,
            raw.in_plane_optical_mev,
        )
    }
}

impl Default for PhononCatalog {
    fn default() -> Self {
        Self {
            acoustic_mev: (0.0, 107.0),
            out_of_plane_optical_mev: (72.0, 145.0),
            in_plane_optical_mev: (150.0, 203.0),
        }
    }
}

impl PhononCatalog {
    pub fn new(
        acoustic_mev: (f64, f64),
        out_of_plane_optical_mev: (f64, f64),
        in_plane_optical_mev: (f64, f64),
    ) -> Result<Self> {
        for (name, (lo, hi)) in [
            ("acoustic", acoustic_mev),
            ("out_of_plane_optical", out_of_plane_optical_mev),
            ("in_plane_optical", in_plane_optical_mev),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < 0.0 {
                return Err(Error::domain(format!(
                    "{name} interval [{lo}, {hi}] meV is invalid"
                )));
            }
        }
        Ok(Self {
            acoustic_mev,
            out_of_plane_optical_mev,
            in_plane_optical_mev,
        })
    }

    /// k-fold scaling of the in-plane optical interval: the energies
    /// reachable by creating k in-plane optical phonons.
    pub fn region(&self, k: u32) -> (f64, f64) {
        let (lo, hi) = self.in_plane_optical_mev;
        (f64::from(k) * lo, f64::from(k) * hi)
    }

    /// The one-phonon ceiling used as the critical Stokes shift.
    pub fn critical_stokes_mev(&self) -> f64 {
        self.in_plane_optical_mev.1
    }
}

/// Where a Stokes shift falls relative to the phonon spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    /// At or below the acoustic range (includes anti-Stokes shifts).
    #[serde(rename = "sub_phonon")]
    SubPhonon,
    /// Within the out-of-plane optical branch.
    #[serde(rename = "out_of_plane_i")]
    OutOfPlaneI,
    /// One in-plane optical phonon.
    #[serde(rename = "region_i")]
    RegionI,
    /// Two in-plane optical phonons.
    #[serde(rename = "region_ii")]
    RegionII,
    /// Three in-plane optical phonons.
    #[serde(rename = "region_iii")]
    RegionIII,
    /// Beyond the three-phonon band.
    #[serde(rename = "beyond_iii")]
    BeyondIII,
    /// Between bands.
    #[serde(rename = "gap")]
    Gap,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::SubPhonon => "sub_phonon",
            RegionLabel::OutOfPlaneI => "out_of_plane_i",
            RegionLabel::RegionI => "region_i",
            RegionLabel::RegionII => "region_ii",
            RegionLabel::RegionIII => "region_iii",
            RegionLabel::BeyondIII => "beyond_iii",
            RegionLabel::Gap => "gap",
        }
    }
}

/// Direct/indirect excitation verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismVerdict {
    /// Small shift and aligned dipoles: the two-state model suffices.
    DirectConsistent,
    /// Shift beyond the one-phonon ceiling with misaligned dipoles.
    IndirectLikely,
    /// Anything else; note that direct and indirect absorption may coexist,
    /// so a large shift with aligned dipoles stays ambiguous.
    Ambiguous,
}

impl MechanismVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismVerdict::DirectConsistent => "direct_consistent",
            MechanismVerdict::IndirectLikely => "indirect_likely",
            MechanismVerdict::Ambiguous => "ambiguous",
        }
    }
}

/// One surveyed ZPL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectRecord {
    pub zpl_energy_ev: f64,
    pub excitation_energy_ev: f64,
    pub theta_abs_deg: f64,
    pub theta_emit_deg: f64,
    pub delta_theta_deg: f64,
    pub stokes_shift_mev: f64,
    pub region: RegionLabel,
    pub mechanism: MechanismVerdict,
    /// The dipole axes are only measured in projection; tilted crystals can
    /// bias Δθ.
    pub tilt_caveat: bool,
    /// Set when the shift sits below the detection filter cutoff; the record
    /// is still valid.
    pub below_filter: bool,
    pub abs_visibility: f64,
    pub emit_visibility: f64,
}

impl DefectRecord {
    /// Check the internal-consistency invariants: the stored shift and Δθ
    /// must be recomputable from the energies and dipole angles.
    pub fn validate(&self) -> Result<()> {
        if !self.zpl_energy_ev.is_finite() || self.zpl_energy_ev <= 0.0 {
            return Err(Error::domain(format!(
                "ZPL energy must be positive, got {}",
                self.zpl_energy_ev
            )));
        }
        if !self.excitation_energy_ev.is_finite() || self.excitation_energy_ev <= 0.0 {
            return Err(Error::domain(format!(
                "excitation energy must be positive, got {}",
                self.excitation_energy_ev
            )));
        }
        let shift = stokes_shift(self.excitation_energy_ev, self.zpl_energy_ev)?;
        if (shift - self.stokes_shift_mev).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "stored Stokes shift {} meV disagrees with E_exc - E_ZPL = {shift} meV",
                self.stokes_shift_mev
            )));
        }
        let dt = delta_theta(self.theta_abs_deg, self.theta_emit_deg);
        if (dt - self.delta_theta_deg).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "stored delta_theta {}° disagrees with the dipole axes ({dt}°)",
                self.delta_theta_deg
            )));
        }
        if !(0.0..=90.0).contains(&self.delta_theta_deg) {
            return Err(Error::domain(format!(
                "delta_theta must lie in [0, 90], got {}",
                self.delta_theta_deg
            )));
        }
        for (name, v) in [
            ("abs_visibility", self.abs_visibility),
            ("emit_visibility", self.emit_visibility),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// E = hc/λ with the crate-wide hc constant.
pub fn wavelength_to_energy(lambda_nm: f64) -> Result<f64> {
    if !lambda_nm.is_finite() || lambda_nm <= 0.0 {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {lambda_nm}"
        )));
    }
    Ok(HC_EV_NM / lambda_nm)
}

/// ΔE = (E_exc − E_ZPL) in meV. Negative values are anti-Stokes shifts.
pub fn stokes_shift(excitation_energy_ev: f64, zpl_energy_ev: f64) -> Result<f64> {
    if !excitation_energy_ev.is_finite() || excitation_energy_ev <= 0.0 {
        return Err(Error::domain(format!(
            "excitation energy must be positive, got {excitation_energy_ev}"
        )));
    }
    if !zpl_energy_ev.is_finite() || zpl_energy_ev <= 0.0 {
        return Err(Error::domain(format!(
            "ZPL energy must be positive, got {zpl_energy_ev}"
        )));
    }
    Ok((excitation_energy_ev - zpl_energy_ev) * 1e3)
}

/// Assign a Stokes shift to a phonon region.
///
/// Matching order: Region I > II > III > out-of-plane > sub-phonon >
/// beyond-III > gap. Only in-plane optical energies match the observed
/// absorption structure, so the in-plane regions win where intervals
/// overlap; negative shifts are anti-Stokes and report sub-phonon.
pub fn phonon_region(stokes_mev: f64, catalog: &PhononCatalog) -> RegionLabel {
    if !stokes_mev.is_finite() || stokes_mev <= catalog.acoustic_mev.1.min(0.0) || stokes_mev < 0.0
    {
        return RegionLabel::SubPhonon;
    }
    let within = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    for k in 1..=3u32 {
        if within(stokes_mev, catalog.region(k)) {
            return match k {
                1 => RegionLabel::RegionI,
                2 => RegionLabel::RegionII,
                _ => RegionLabel::RegionIII,
            };
        }
    }
    if within(stokes_mev, catalog.out_of_plane_optical_mev) {
        return RegionLabel::OutOfPlaneI;
    }
    if within(stokes_mev, catalog.acoustic_mev) {
        return RegionLabel::SubPhonon;
    }
    if stokes_mev > catalog.region(3).1 {
        return RegionLabel::BeyondIII;
    }
    RegionLabel::Gap
}

/// Direct/indirect verdict from the Stokes shift and dipole misalignment.
///
/// Direct-consistent: shift at or below the critical one-phonon ceiling and
/// aligned dipoles. Indirect-likely: shift beyond the ceiling and
/// misaligned dipoles. Everything else is ambiguous, including large shifts
/// with aligned dipoles (both mechanisms may coexist).
pub fn predict_mechanism(
    record: &DefectRecord,
    theta_tolerance_deg: f64,
    catalog: &PhononCatalog,
) -> MechanismVerdict {
    let critical = catalog.critical_stokes_mev();
    let aligned = record.delta_theta_deg <= theta_tolerance_deg;
    let within_one_phonon = record.stokes_shift_mev <= critical;
    if within_one_phonon && aligned {
        MechanismVerdict::DirectConsistent
    } else if !within_one_phonon && !aligned {
        MechanismVerdict::IndirectLikely
    } else {
        MechanismVerdict::Ambiguous
    }
}

/// One row of the survey scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterRow {
    pub stokes_shift_mev: f64,
    pub delta_theta_deg: f64,
    pub region: RegionLabel,
    pub mechanism: MechanismVerdict,
    pub tilt_caveat: bool,
}

/// Fraction of records within tolerance of one predicted cluster angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterFraction {
    pub angle_deg: f64,
    pub fraction: f64,
}

/// Aggregated survey statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyStats {
    pub scatter: Vec<ScatterRow>,
    /// Histogram of Δθ over [0, 90]; the last bin is closed above.
    pub histogram_edges_deg: Vec<f64>,
    pub histogram_counts: Vec<usize>,
    /// Fractions near the group-theory cluster angles {0°, 30°, 60°, 90°};
    /// reported without any significance claim.
    pub cluster_fractions: Vec<ClusterFraction>,
    /// Records whose emission visibility exceeds their absorption
    /// visibility, over all records and over indirect-likely ones.
    pub emit_exceeds_abs: usize,
    pub emit_exceeds_abs_indirect: usize,
    pub indirect_count: usize,
}

/// Predicted cluster angles when the electronic states are
/// crystallographically related.
pub const CLUSTER_ANGLES_DEG: [f64; 4] = [0.0, 30.0, 60.0, 90.0];

/// Aggregate a survey: the scatter rows are in bijection with the input
/// records and the histogram masses sum to the record count.
pub fn survey_stats(
    records: &[DefectRecord],
    histogram_bin_deg: f64,
    cluster_tolerance_deg: f64,
) -> Result<SurveyStats> {
    if records.is_empty() {
        return Err(Error::domain("survey needs at least one record"));
    }
    if !histogram_bin_deg.is_finite() || histogram_bin_deg <= 0.0 || histogram_bin_deg > 90.0 {
        return Err(Error::domain(format!(
            "histogram bin width must lie in (0, 90], got {histogram_bin_deg}"
        )));
    }
    if !cluster_tolerance_deg.is_finite() || cluster_tolerance_deg <= 0.0 {
        return Err(Error::domain(format!(
            "cluster tolerance must be positive, got {cluster_tolerance_deg}"
        )));
    }
    let scatter: Vec<ScatterRow> = records
        .iter()
        .map(|r| ScatterRow {
            stokes_shift_mev: r.stokes_shift_mev,
            delta_theta_deg: r.delta_theta_deg,
            region: r.region,
            mechanism: r.mechanism,
            tilt_caveat: r.tilt_caveat,
        })
        .collect();

    let n_bins = (90.0 / histogram_bin_deg).ceil() as usize;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| (i as f64 * histogram_bin_deg).min(90.0))
        .collect();
    let mut counts = vec![0usize; n_bins];
    for r in records {
        let mut bin = (r.delta_theta_deg / histogram_bin_deg).floor() as usize;
        if bin >= n_bins {
            bin = n_bins - 1; // Δθ = 90 lands in the closed last bin
        }
        counts[bin] += 1;
    }

    let cluster_fractions = CLUSTER_ANGLES_DEG
        .iter()
        .map(|&angle| {
            let hits = records
                .iter()
                .filter(|r| (r.delta_theta_deg - angle).abs() <= cluster_tolerance_deg)
                .count();
            ClusterFraction {
                angle_deg: angle,
                fraction: hits as f64 / records.len() as f64,
            }
        })
        .collect();

    let emit_exceeds_abs = records
        .iter()
        .filter(|r| r.emit_visibility > r.abs_visibility)
        .count();
    let indirect: Vec<&DefectRecord> = records
        .iter()
        .filter(|r| r.mechanism == MechanismVerdict::IndirectLikely)
        .collect();
    let emit_exceeds_abs_indirect = indirect
        .iter()
        .filter(|r| r.emit_visibility > r.abs_visibility)
        .count();

    Ok(SurveyStats {
        scatter,
        histogram_edges_deg: edges,
        histogram_counts: counts,
        cluster_fractions,
        emit_exceeds_abs,
        emit_exceeds_abs_indirect,
        indirect_count: indirect.len(),
    })
}
