//! Photon-statistics fits: antibunching and excited-state lifetime.
//!
//! The two-photon correlation of a single quantum emitter dips at zero
//! delay; the phenomenological model fitted here is
//!
//! ```text
//! g²(τ) = b − a·e^{−|τ|/τ_c}
//! ```
//!
//! with baseline b (≈ 1 for normalized traces), dip depth a and correlation
//! time τ_c, so g²(0) = b − a. A dip certifying a single emitter must fall
//! below 0.5 beyond its 2σ confidence band. Excited-state lifetimes come
//! from a mono-exponential tail fit of a pulsed-decay histogram with the
//! background pinned by a user-chosen window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{levenberg_marquardt, LmModel};

/// Normalized two-photon coincidences versus delay.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    tau_ns: Vec<f64>,
    g2: Vec<f64>,
}

impl CorrelationTrace {
    /// The delay grid must be strictly increasing and span both signs of τ
    /// (the trace is normalized so g² → 1 at large |τ|).
    pub fn new(tau_ns: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        if tau_ns.len() != g2.len() {
            return Err(Error::domain(format!(
                "delay and g2 lengths differ: {} vs {}",
                tau_ns.len(),
                g2.len()
            )));
        }
        if tau_ns.len() < 2 {
            return Err(Error::domain("correlation trace needs at least 2 samples"));
        }
        if !tau_ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("delay grid must be strictly increasing"));
        }
        if tau_ns.iter().any(|v| !v.is_finite()) || g2.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::domain("trace samples must be finite with g2 >= 0"));
        }
        if tau_ns[0] >= 0.0 || *tau_ns.last().unwrap() <= 0.0 {
            return Err(Error::domain("delay grid must span both signs of tau"));
        }
        Ok(Self { tau_ns, g2 })
    }

    pub fn tau_ns(&self) -> &[f64] {
        &self.tau_ns
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }
}

/// Time-binned counts after a pulsed excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistogram {
    time_ns: Vec<f64>,
    counts: Vec<f64>,
}

impl DecayHistogram {
    pub fn new(time_ns: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if time_ns.len() != counts.len() {
            return Err(Error::domain(format!(
                "time and count lengths differ: {} vs {}",
                time_ns.len(),
                counts.len()
            )));
        }
        if time_ns.len() < 2 {
            return Err(Error::domain("decay histogram needs at least 2 bins"));
        }
        if !time_ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        if time_ns.iter().any(|v| !v.is_finite() || *v < 0.0)
            || counts.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::domain("histogram samples must be finite and >= 0"));
        }
        Ok(Self { time_ns, counts })
    }

    pub fn time_ns(&self) -> &[f64] {
        &self.time_ns
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }
}

/// Fitted antibunching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    /// Dip depth a.
    pub dip_depth: f64,
    pub correlation_time_ns: f64,
    /// g²(0) = background − dip_depth.
    pub g2_zero: f64,
    /// Standard error of g²(0).
    pub g2_zero_sigma: f64,
    /// Fitted baseline b.
    pub background: f64,
    pub chi2: f64,
}

struct DipModel<'a> {
    trace: &'a CorrelationTrace,
}

impl LmModel for DipModel<'_> {
    const NP: usize = 3;

    fn len(&self) -> usize {
        self.trace.tau_ns.len()
    }

    // params: [b, a, tau_c]
    fn eval(&self, p: &[f64], i: usize) -> (f64, Vec<f64>) {
        let t = self.trace.tau_ns[i].abs();
        let e = (-t / p[2]).exp();
        let f = p[0] - p[1] * e;
        (f, vec![1.0, -e, -p[1] * e * t / (p[2] * p[2])])
    }

    fn observed(&self, i: usize) -> f64 {
        self.trace.g2[i]
    }

    fn weight(&self, _i: usize) -> f64 {
        1.0
    }

    fn project(&self, p: &mut [f64]) {
        p[0] = p[0].max(0.0);
        p[1] = p[1].clamp(0.0, p[0].max(1e-12));
        let span = self.trace.tau_ns.last().unwrap() - self.trace.tau_ns[0];
        p[2] = p[2].clamp(1e-6 * span, 10.0 * span);
    }
}

/// Fit the antibunching dip g²(τ) = b − a·e^{−|τ|/τ_c}.
///
/// Initialization: baseline from the outer 20% of the trace, dip depth from
/// the minimum, correlation time from the half-depth width of the dip.
pub fn fit_g2(trace: &CorrelationTrace) -> Result<G2Fit> {
    let n = trace.tau_ns.len();
    if n < 20 {
        return Err(Error::domain(format!(
            "g2 fit needs at least 20 samples, got {n}"
        )));
    }
    let span = trace.tau_ns[n - 1] - trace.tau_ns[0];
    // baseline estimate: outer fifth on each side
    let outer = (n / 5).max(1);
    let mut baseline = 0.0;
    for i in 0..outer {
        baseline += trace.g2[i] + trace.g2[n - 1 - i];
    }
    baseline /= (2 * outer) as f64;
    let min_g2 = trace.g2.iter().cloned().fold(f64::INFINITY, f64::min);
    let dip0 = (baseline - min_g2).max(0.0);
    // half-depth width -> tau_c estimate: e^{-|t|/tau} = 1/2 at |t| = tau ln 2
    let half_level = baseline - 0.5 * dip0;
    let mut half_width = span / 10.0;
    if dip0 > 0.0 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (&t, &g) in trace.tau_ns.iter().zip(&trace.g2) {
            if g < half_level {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if hi > lo {
            half_width = 0.5 * (hi - lo);
        }
    }
    let tau0 = (half_width / std::f64::consts::LN_2).max(1e-3 * span);
    // grid must span several correlation times for the baseline to be seen
    if span < 5.0 * tau0 {
        return Err(Error::domain(format!(
            "delay grid spans {span} ns but the dip suggests tau_c ~ {tau0} ns; need >= 5 tau_c"
        )));
    }
    let model = DipModel { trace };
    let out = levenberg_marquardt(&model, vec![baseline.max(1e-6), dip0, tau0], 200)
        .map_err(|e| Error::Fit(format!("g2 dip fit failed: {e}")))?;
    let (b, a, tau) = (out.params[0], out.params[1], out.params[2]);
    // var(b - a) = var(b) + var(a) - 2 cov(b, a)
    let var = out.covariance[0][0] + out.covariance[1][1] - 2.0 * out.covariance[0][1];
    Ok(G2Fit {
        dip_depth: a,
        correlation_time_ns: tau,
        g2_zero: b - a,
        g2_zero_sigma: var.max(0.0).sqrt(),
        background: b,
        chi2: out.chi2,
    })
}

/// Single-emitter verdict from g²(0) against the 0.5 threshold with a 2σ
/// decision band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterVerdict {
    Single,
    NotSingle,
    Inconclusive,
}

pub fn is_single_emitter(g2_zero: f64, uncertainty: f64) -> EmitterVerdict {
    let band = 2.0 * uncertainty.abs();
    if g2_zero + band < 0.5 {
        EmitterVerdict::Single
    } else if g2_zero - band > 0.5 {
        EmitterVerdict::NotSingle
    } else {
        EmitterVerdict::Inconclusive
    }
}

/// Time window whose bins estimate the uncorrelated background level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundWindow {
    pub start_ns: f64,
    pub end_ns: f64,
}

impl BackgroundWindow {
    fn contains(&self, t: f64) -> bool {
        t >= self.start_ns && t <= self.end_ns
    }
}

/// Fitted mono-exponential decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    pub tau_ns: f64,
    pub tau_sigma_ns: f64,
    /// Amplitude at the fit start.
    pub amplitude: f64,
    /// Flat background per bin, estimated from the window.
    pub background: f64,
    pub chi2: f64,
}

struct DecayModel {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    background: f64,
    t0: f64,
}

impl LmModel for DecayModel {
    const NP: usize = 2;

    fn len(&self) -> usize {
        self.t.len()
    }

    // params: [amplitude, tau]
    fn eval(&self, p: &[f64], i: usize) -> (f64, Vec<f64>) {
        let dt = self.t[i] - self.t0;
        let e = (-dt / p[1]).exp();
        (
            self.background + p[0] * e,
            vec![e, p[0] * e * dt / (p[1] * p[1])],
        )
    }

    fn observed(&self, i: usize) -> f64 {
        self.y[i]
    }

    fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    fn project(&self, p: &mut [f64]) {
        p[0] = p[0].max(1e-12);
        let span = self.t.last().unwrap() - self.t[0] + 1.0;
        p[1] = p[1].clamp(1e-6, 100.0 * span);
    }
}

/// How long after the pulse peak the tail fit starts, in ns. The excitation
/// pulse (hundreds of ps) is much shorter than any lifetime of interest, so
/// tail fitting replaces deconvolution.
const TAIL_START_AFTER_PEAK_NS: f64 = 1.0;

/// Weighted mono-exponential tail fit of a pulsed-decay histogram.
///
/// The background is the mean count in `background_window` (which must not
/// overlap the decay tail); the tail starts 1 ns after the histogram peak.
pub fn fit_lifetime(hist: &DecayHistogram, background_window: BackgroundWindow) -> Result<LifetimeFit> {
    if !background_window.start_ns.is_finite()
        || !background_window.end_ns.is_finite()
        || background_window.end_ns <= background_window.start_ns
    {
        return Err(Error::domain("background window must be a finite, non-empty range"));
    }
    let bg_bins: Vec<f64> = hist
        .time_ns
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| background_window.contains(**t))
        .map(|(_, &c)| c)
        .collect();
    if bg_bins.is_empty() {
        return Err(Error::domain("background window contains no histogram bins"));
    }
    let background = bg_bins.iter().sum::<f64>() / bg_bins.len() as f64;

    let peak_idx = hist
        .counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let fit_start = hist.time_ns[peak_idx] + TAIL_START_AFTER_PEAK_NS;
    let tail: Vec<(f64, f64)> = hist
        .time_ns
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| **t >= fit_start && !background_window.contains(**t))
        .map(|(&t, &c)| (t, c))
        .collect();
    if tail.len() < 30 {
        return Err(Error::domain(format!(
            "need at least 30 bins past the pulse, got {}",
            tail.len()
        )));
    }

    // log-linear slope over background-subtracted positive bins, both to
    // initialize and to reject non-decaying tails
    let loglin: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, c)| *c > background)
        .map(|&(t, c)| (t, (c - background).ln()))
        .collect();
    if loglin.len() < 10 {
        return Err(Error::Fit(
            "tail is indistinguishable from background".into(),
        ));
    }
    let n_ll = loglin.len() as f64;
    let mean_t = loglin.iter().map(|(t, _)| t).sum::<f64>() / n_ll;
    let mean_l = loglin.iter().map(|(_, l)| l).sum::<f64>() / n_ll;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(t, l) in &loglin {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (l - mean_l);
    }
    let slope = sxy / sxx.max(1e-300);
    if slope >= 0.0 {
        return Err(Error::Fit(
            "tail does not decay (non-positive rate); refusing to fit a lifetime".into(),
        ));
    }
    let tau0 = -1.0 / slope;
    let t0 = tail[0].0;
    let amp0 = (tail[0].1 - background).max(1e-9);

    let model = DecayModel {
        t: tail.iter().map(|&(t, _)| t).collect(),
        y: tail.iter().map(|&(_, c)| c).collect(),
        w: tail.iter().map(|&(_, c)| 1.0 / c.max(1.0)).collect(),
        background,
        t0,
    };
    let out = levenberg_marquardt(&model, vec![amp0, tau0], 200)
        .map_err(|e| Error::Fit(format!("lifetime fit failed: {e}")))?;
    Ok(LifetimeFit {
        tau_ns: out.params[1],
        tau_sigma_ns: out.covariance[1][1].max(0.0).sqrt(),
        amplitude: out.params[0],
        background,
        chi2: out.chi2,
    })
}
