//! Two-state configuration-coordinate (Huang-Rhys) model.
//!
//! An optical transition between an electronic ground and excited state is
//! coupled to harmonic lattice modes. For a linear mode (equal ground/excited
//! frequency ω) the vibrational overlap between initial state `n*` and final
//! state `n` is the Franck-Condon factor
//!
//! ```text
//! F(n, n*) = e^{-S} S^{n-n*} (n*!/n!) [L_{n*}^{n-n*}(S)]² ,   n ≥ n*
//! ```
//!
//! where S is the dimensionless Huang-Rhys coupling and L the associated
//! Laguerre polynomial. At zero temperature this reduces to the Poisson
//! distribution e^{-S} S^n / n!, whose m = 0 term e^{-S} is the Debye-Waller
//! factor (the fractional spectral weight of the zero-phonon line).
//!
//! Everything here is a pure function: deterministic, no shared state.

use serde::{Deserialize, Serialize};

use crate::angles::reduce_axis_deg;
use crate::constants::BOLTZMANN_MEV_PER_K;
use crate::error::{Error, Result};

/// Hard cap on the initial-occupation sum in thermal sideband averages.
const THERMAL_OCCUPATION_CAP: usize = 200;

/// One harmonic lattice mode coupled to the transition.
///
/// The mode displacement and effective mass enter only through the
/// Huang-Rhys factor S = ½·m_eff·ω·(Q₀ − Q₀*)², so they are not stored
/// separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhononModeRaw")]
pub struct PhononMode {
    energy_mev: f64,
    huang_rhys: f64,
}

#[derive(Deserialize)]
struct PhononModeRaw {
    energy_mev: f64,
    huang_rhys: f64,
}

impl TryFrom<PhononModeRaw> for PhononMode {
    type Error = Error;

    fn try_from(raw: PhononModeRaw) -> Result<Self> {
        PhononMode::new(raw.energy_mev, raw.huang_rhys)
    }
}

impl PhononMode {
    pub fn new(energy_mev: f64, huang_rhys: f64) -> Result<Self> {
        if !energy_mev.is_finite() || energy_mev <= 0.0 {
            return Err(Error::domain(format!(
                "phonon energy must be finite and > 0 meV, got {energy_mev}"
            )));
        }
        if !huang_rhys.is_finite() || huang_rhys < 0.0 {
            return Err(Error::domain(format!(
                "Huang-Rhys factor must be finite and >= 0, got {huang_rhys}"
            )));
        }
        Ok(Self {
            energy_mev,
            huang_rhys,
        })
    }

    /// Phonon quantum ħω in meV.
    pub fn energy_mev(&self) -> f64 {
        self.energy_mev
    }

    /// Dimensionless coupling S.
    pub fn huang_rhys(&self) -> f64 {
        self.huang_rhys
    }
}

/// One electronic transition with its phonon modes and dipole axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VibronicSystemRaw")]
pub struct VibronicSystem {
    zpl_energy_ev: f64,
    modes: Vec<PhononMode>,
    emission_dipole_deg: f64,
    absorption_dipole_deg: f64,
}

#[derive(Deserialize)]
struct VibronicSystemRaw {
    zpl_energy_ev: f64,
    modes: Vec<PhononMode>,
    emission_dipole_deg: f64,
    absorption_dipole_deg: f64,
}

impl TryFrom<VibronicSystemRaw> for VibronicSystem {
    type Error = Error;

    fn try_from(raw: VibronicSystemRaw) -> Result<Self> {
        VibronicSystem::new(
            raw.zpl_energy_ev,
            raw.modes,
            raw.emission_dipole_deg,
            raw.absorption_dipole_deg,
        )
    }
}

impl VibronicSystem {
    /// Dipole angles are reduced mod 180° (they are axes, not vectors).
    pub fn new(
        zpl_energy_ev: f64,
        modes: Vec<PhononMode>,
        emission_dipole_deg: f64,
        absorption_dipole_deg: f64,
    ) -> Result<Self> {
        if !zpl_energy_ev.is_finite() || zpl_energy_ev <= 0.0 {
            return Err(Error::domain(format!(
                "ZPL energy must be finite and > 0 eV, got {zpl_energy_ev}"
            )));
        }
        if modes.is_empty() {
            return Err(Error::domain("a vibronic system needs at least one phonon mode"));
        }
        if !emission_dipole_deg.is_finite() || !absorption_dipole_deg.is_finite() {
            return Err(Error::domain("dipole angles must be finite"));
        }
        Ok(Self {
            zpl_energy_ev,
            modes,
            emission_dipole_deg: reduce_axis_deg(emission_dipole_deg),
            absorption_dipole_deg: reduce_axis_deg(absorption_dipole_deg),
        })
    }

    pub fn zpl_energy_ev(&self) -> f64 {
        self.zpl_energy_ev
    }

    pub fn modes(&self) -> &[PhononMode] {
        &self.modes
    }

    /// Emission dipole axis in [0, 180).
    pub fn emission_dipole_deg(&self) -> f64 {
        self.emission_dipole_deg
    }

    /// Absorption dipole axis in [0, 180).
    pub fn absorption_dipole_deg(&self) -> f64 {
        self.absorption_dipole_deg
    }
}

/// Probability per net created phonon count m for one mode.
///
/// Emission only creates phonons at T = 0 (m ≥ 0); at finite temperature
/// anti-Stokes terms (m < 0) appear.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandWeights {
    net_phonon_min: i64,
    weights: Vec<f64>,
}

impl SidebandWeights {
    /// Smallest net phonon count carried by `weights[0]`.
    pub fn net_phonon_min(&self) -> i64 {
        self.net_phonon_min
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at net phonon count m (0 outside the stored range).
    pub fn weight(&self, m: i64) -> f64 {
        let idx = m - self.net_phonon_min;
        if idx < 0 {
            return 0.0;
        }
        self.weights.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Iterate (m, weight) pairs in increasing m.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.net_phonon_min + i as i64, w))
    }

    /// Sum of all stored weights.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mean net phonon count Σ m·W_m.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(m, w)| m as f64 * w).sum()
    }
}

/// Natural log of n!, cached.
fn ln_factorial(n: u32) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(1025);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..=1024u32 {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    match table.get(n as usize) {
        Some(&v) => v,
        None => (table.len() as u32..=n).map(|k| (k as f64).ln()).sum::<f64>() + table[table.len() - 1],
    }
}

/// Associated Laguerre polynomial L_m^{(alpha)}(x) by upward recurrence in
/// the degree. Stable for the moderate degrees used here.
fn laguerre_assoc(degree: u32, alpha: f64, x: f64) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0; // L_0
    let mut l = 1.0 + alpha - x; // L_1
    for m in 1..degree {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + alpha - x) * l - (mf + alpha) * lm1) / (mf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Franck-Condon factor F(n, n*) for a mode with Huang-Rhys factor `s`.
///
/// Symmetric in its phonon counts, F(n, n*) = F(n*, n); the n < n* case is
/// routed through that identity so the S^{n-n*} prefactor never sees a
/// negative power. Factorial ratios are carried in log space and recombined
/// with the Laguerre value before squaring.
pub fn franck_condon_factor(s: f64, n: u32, n_star: u32) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::domain(format!(
            "Huang-Rhys factor must be finite and >= 0, got {s}"
        )));
    }
    let (hi, lo) = if n >= n_star { (n, n_star) } else { (n_star, n) };
    let k = hi - lo;
    if s == 0.0 {
        // undisplaced oscillators are orthonormal
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let log_prefactor =
        -s + f64::from(k) * s.ln() + ln_factorial(lo) - ln_factorial(hi);
    let half_log = 0.5 * log_prefactor;
    if half_log < -600.0 {
        // far below any representable contribution once squared
        return Ok(0.0);
    }
    let lag = laguerre_assoc(lo, f64::from(k), s);
    let amplitude = half_log.exp() * lag;
    Ok((amplitude * amplitude).min(1.0))
}

/// Gauss-Hermite nodes and weights for ∫ f(x) e^{-x²} dx ≈ Σ wᵢ f(xᵢ).
///
/// Newton iteration on the orthonormal Hermite polynomials, largest root
/// first (Numerical Recipes initial guesses).
fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const MAX_NEWTON: usize = 100;
    const EPS: f64 = 3e-14;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => {
                let t = (2 * n + 1) as f64;
                t.sqrt() - 1.85575 * t.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            // orthonormal Hermite recurrence wrt weight e^{-x²}
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "Gauss-Hermite root {i} of {n} did not converge"
            )));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// Orthonormal Hermite polynomial p_n(x) with weight e^{-x²}; the oscillator
/// eigenfunction is p_n(x)·e^{-x²/2}.
fn hermite_orthonormal(n: u32, x: f64) -> f64 {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    if n == 0 {
        return p1;
    }
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
    }
    p1
}

fn overlap_quadrature(s: f64, n: u32, n_star: u32, nodes: usize) -> Result<f64> {
    let (x, w) = gauss_hermite(nodes)?;
    let half_d = (2.0 * s).sqrt() / 2.0;
    let mut sum = 0.0;
    for (&xi, &wi) in x.iter().zip(&w) {
        sum += wi * hermite_orthonormal(n, xi + half_d) * hermite_orthonormal(n_star, xi - half_d);
    }
    let amplitude = (-s / 2.0).exp() * sum;
    Ok(amplitude * amplitude)
}

/// Brute-force numerical overlap |∫ φ_n(Q) φ_{n*}(Q − d) dQ|² with
/// d = √(2S), the independent check on [`franck_condon_factor`].
///
/// Uses Gauss-Hermite quadrature on the displaced-oscillator eigenfunctions;
/// two node counts are compared and disagreement is reported as a numerical
/// error rather than silently returned.
pub fn overlap_oracle(s: f64, n: u32, n_star: u32) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::domain(format!(
            "Huang-Rhys factor must be finite and >= 0, got {s}"
        )));
    }
    if s > 10.0 {
        return Err(Error::domain(format!(
            "overlap oracle is rated for S <= 10, got {s}"
        )));
    }
    if n > 30 || n_star > 30 {
        return Err(Error::domain(format!(
            "overlap oracle is rated for phonon counts <= 30, got ({n}, {n_star})"
        )));
    }
    let coarse = overlap_quadrature(s, n, n_star, 96)?;
    let fine = overlap_quadrature(s, n, n_star, 128)?;
    if (coarse - fine).abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "overlap quadrature did not converge: 96 nodes -> {coarse:.16e}, \
             128 nodes -> {fine:.16e} at (S={s}, n={n}, n*={n_star})"
        )));
    }
    Ok(fine)
}

/// Mean Bose-Einstein occupation n̄ = 1/(e^{ħω/kT} − 1).
///
/// Returns exactly 0 at T = 0.
pub fn bose_occupation(energy_mev: f64, temperature_k: f64) -> Result<f64> {
    if !energy_mev.is_finite() || energy_mev <= 0.0 {
        return Err(Error::domain(format!(
            "phonon energy must be finite and > 0 meV, got {energy_mev}"
        )));
    }
    if !temperature_k.is_finite() || temperature_k < 0.0 {
        return Err(Error::domain(format!(
            "temperature must be finite and >= 0 K, got {temperature_k}"
        )));
    }
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    let x = energy_mev / (BOLTZMANN_MEV_PER_K * temperature_k);
    // exp_m1 keeps precision at small x; overflows to +inf -> 0 at large x
    Ok(1.0 / x.exp_m1())
}

/// Temperature-dependent zero-phonon-line spectral weight
/// exp(−Σ_k S_k·(2n̄_k + 1)).
///
/// Reduces to e^{−ΣS_k} at T = 0 and is monotone non-increasing in T.
pub fn debye_waller(modes: &[PhononMode], temperature_k: f64) -> Result<f64> {
    if !temperature_k.is_finite() || temperature_k < 0.0 {
        return Err(Error::domain(format!(
            "temperature must be finite and >= 0 K, got {temperature_k}"
        )));
    }
    let mut exponent = 0.0;
    for mode in modes {
        let n_bar = bose_occupation(mode.energy_mev(), temperature_k)?;
        exponent += mode.huang_rhys() * (2.0 * n_bar + 1.0);
    }
    Ok((-exponent).exp())
}

/// Sideband weight distribution W_m(T) for one mode.
///
/// W_m(T) = Σ_n P_BE(n)·F(n + m, n): the initial occupation n is averaged
/// over the Bose-Einstein distribution and F gives the probability of a net
/// m-phonon transition. At T = 0 this is exactly the Poisson distribution
/// e^{−S}S^m/m!.
pub fn sideband_weights(
    mode: &PhononMode,
    temperature_k: f64,
    truncation_tolerance: f64,
) -> Result<SidebandWeights> {
    if !truncation_tolerance.is_finite()
        || truncation_tolerance <= 0.0
        || truncation_tolerance > 1e-3
    {
        return Err(Error::domain(format!(
            "truncation tolerance must lie in (0, 1e-3], got {truncation_tolerance}"
        )));
    }
    if !temperature_k.is_finite() || temperature_k < 0.0 {
        return Err(Error::domain(format!(
            "temperature must be finite and >= 0 K, got {temperature_k}"
        )));
    }
    let s = mode.huang_rhys();
    let q = if temperature_k == 0.0 {
        0.0
    } else {
        (-mode.energy_mev() / (BOLTZMANN_MEV_PER_K * temperature_k)).exp()
    };

    if q == 0.0 {
        // zero-temperature limit: emit the Poisson terms directly
        let mut weights = vec![(-s).exp()];
        let mut cumulative = weights[0];
        let mut m = 0u32;
        while cumulative < 1.0 - truncation_tolerance {
            let next = weights[m as usize] * s / f64::from(m + 1);
            weights.push(next);
            cumulative += next;
            m += 1;
            if m as usize > THERMAL_OCCUPATION_CAP {
                return Err(Error::Truncation(format!(
                    "Poisson tail for S={s} not captured within {THERMAL_OCCUPATION_CAP} terms"
                )));
            }
        }
        return Ok(SidebandWeights {
            net_phonon_min: 0,
            weights,
        });
    }

    // number of initial-occupation terms for a 1e-12 geometric tail
    let n_terms = ((1e-12f64.ln() / q.ln()).ceil() as usize).max(1);
    if n_terms > THERMAL_OCCUPATION_CAP {
        return Err(Error::Truncation(format!(
            "thermal average needs {n_terms} occupation terms (cap {THERMAL_OCCUPATION_CAP}); \
             kT too large relative to the phonon quantum"
        )));
    }

    // per-row completeness budget: rows are unit-normalized in the final
    // count, so cutting each at 1 - row_tol bounds the total deficit
    let row_tol = truncation_tolerance / 4.0;
    let n_max = n_terms as i64;
    let mut accum: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    let one_minus_q = 1.0 - q;
    for n in 0..=n_max {
        let occupancy = one_minus_q * q.powi(n as i32);
        if occupancy == 0.0 {
            break;
        }
        let mut row_cum = 0.0;
        let mut final_count = 0i64;
        let cap = n + THERMAL_OCCUPATION_CAP as i64;
        while row_cum < 1.0 - row_tol {
            let f = franck_condon_factor(s, final_count as u32, n as u32)?;
            row_cum += f;
            if f > 0.0 {
                *accum.entry(final_count - n).or_insert(0.0) += occupancy * f;
            }
            final_count += 1;
            if final_count > cap {
                return Err(Error::Truncation(format!(
                    "Franck-Condon row n={n} for S={s} not captured within {cap} final states"
                )));
            }
        }
    }

    let net_phonon_min = *accum.keys().next().expect("thermal average is non-empty");
    let net_phonon_max = *accum.keys().last().expect("thermal average is non-empty");
    let mut weights = vec![0.0; (net_phonon_max - net_phonon_min + 1) as usize];
    for (m, w) in accum {
        weights[(m - net_phonon_min) as usize] = w;
    }
    let result = SidebandWeights {
        net_phonon_min,
        weights,
    };
    if result.total() < 1.0 - truncation_tolerance {
        return Err(Error::Truncation(format!(
            "sideband weights sum to {} < 1 - {truncation_tolerance}",
            result.total()
        )));
    }
    Ok(result)
}

/// One spectral line of a (possibly multi-mode) vibronic transition.
///
/// `shift_mev` is the net phonon energy created: an emission line sits at
/// E_ZPL − shift and the matching absorption line at E_ZPL + shift.
/// `order` counts total phonon-number changes Σ_k |m_k| and drives
/// lineshape broadening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandLine {
    pub shift_mev: f64,
    pub weight: f64,
    pub order: u32,
}

/// Combine the per-mode weight distributions of a system into joint lines.
///
/// Independent linear modes factorize, so the joint distribution over net
/// phonon energy is the discrete convolution of the per-mode distributions.
/// Lines below a pruning floor derived from the tolerance are dropped.
pub fn system_sideband_lines(
    system: &VibronicSystem,
    temperature_k: f64,
    truncation_tolerance: f64,
) -> Result<Vec<SidebandLine>> {
    let n_modes = system.modes().len();
    let per_mode_tol = (truncation_tolerance / n_modes as f64).min(1e-3);
    let mut lines = vec![SidebandLine {
        shift_mev: 0.0,
        weight: 1.0,
        order: 0,
    }];
    let prune_floor = truncation_tolerance * 1e-4;
    for mode in system.modes() {
        let weights = sideband_weights(mode, temperature_k, per_mode_tol)?;
        let mut next = Vec::with_capacity(lines.len() * weights.weights().len());
        for line in &lines {
            for (m, w) in weights.iter() {
                let weight = line.weight * w;
                if weight < prune_floor {
                    continue;
                }
                next.push(SidebandLine {
                    shift_mev: line.shift_mev + m as f64 * mode.energy_mev(),
                    weight,
                    order: line.order + m.unsigned_abs() as u32,
                });
            }
        }
        lines = next;
    }
    lines.sort_by(|a, b| a.shift_mev.total_cmp(&b.shift_mev));
    Ok(lines)
}
