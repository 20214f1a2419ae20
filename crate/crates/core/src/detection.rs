//! Fluorescence state detection: synthetic photon-count histograms and the
//! maximum-likelihood fit extracting the bright-state fraction from one.
//!
//! A detection window sees the ion either in F=1 ("bright", Poisson counts
//! with mean `lambda_bright`) or in F=0 ("dark", background mean
//! `lambda_dark`), so shot counts follow the two-component mixture
//! p·Poisson(λ_b) + (1−p)·Poisson(λ_d).  The mixture weight p is the
//! quantity every experiment ultimately measures.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::optimize::golden_section_min;

/// Mean photon counts per detection window for the two qubit outcomes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DetectionModel {
    lambda_bright: f64,
    lambda_dark: f64,
}

impl Default for DetectionModel {
    /// Plausible photomultiplier numbers for a millisecond-scale detection
    /// window; simulation choices, not measured values.
    fn default() -> Self {
        DetectionModel { lambda_bright: 10.0, lambda_dark: 0.2 }
    }
}

impl DetectionModel {
    pub fn new(lambda_bright: f64, lambda_dark: f64) -> Result<DetectionModel> {
        if !(lambda_bright.is_finite() && lambda_dark.is_finite() && lambda_dark >= 0.0) {
            return Err(Error::DegenerateModel(format!(
                "count means must be finite with λ_dark ≥ 0, got λ_bright = {lambda_bright}, \
                 λ_dark = {lambda_dark}"
            )));
        }
        if lambda_bright <= lambda_dark {
            return Err(Error::DegenerateModel(format!(
                "λ_bright = {lambda_bright} must exceed λ_dark = {lambda_dark}; \
                 the two outcomes are otherwise indistinguishable"
            )));
        }
        Ok(DetectionModel { lambda_bright, lambda_dark })
    }

    pub fn lambda_bright(&self) -> f64 {
        self.lambda_bright
    }

    pub fn lambda_dark(&self) -> f64 {
        self.lambda_dark
    }
}

/// Poisson pmf over counts 0..=max, built by the ratio recurrence (no
/// factorials, stable for any λ the detector could produce).
fn poisson_pmf_table(lambda: f64, max: u64) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(max as usize + 1);
    pmf.push((-lambda).exp());
    for k in 1..=max {
        let prev = pmf[(k - 1) as usize];
        pmf.push(prev * lambda / k as f64);
    }
    pmf
}

/// Photon-count histogram: number of shots observed at each count value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountHistogram {
    bins: BTreeMap<u64, u64>,
    total_shots: u64,
}

impl CountHistogram {
    pub fn from_counts(counts: impl IntoIterator<Item = u64>) -> CountHistogram {
        let mut bins = BTreeMap::new();
        let mut total = 0;
        for c in counts {
            *bins.entry(c).or_insert(0) += 1;
            total += 1;
        }
        CountHistogram { bins, total_shots: total }
    }

    /// Build directly from (count → shots) bins; the shot total is derived
    /// from the bins, which keeps the two consistent by construction.
    pub fn from_bins(bins: BTreeMap<u64, u64>) -> CountHistogram {
        let total_shots = bins.values().sum();
        CountHistogram { bins, total_shots }
    }

    pub fn bins(&self) -> &BTreeMap<u64, u64> {
        &self.bins
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn max_count(&self) -> u64 {
        self.bins.keys().next_back().copied().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        if self.total_shots == 0 {
            return f64::NAN;
        }
        let sum: f64 = self.bins.iter().map(|(&c, &n)| c as f64 * n as f64).sum();
        sum / self.total_shots as f64
    }
}

/// Draw a synthetic detection histogram: each shot is bright with
/// probability `p_bright`, then its count is Poisson with the corresponding
/// mean. Deterministic for a fixed seed.
pub fn simulate_histogram(
    p_bright: f64,
    shots: u64,
    model: &DetectionModel,
    seed: u64,
) -> Result<CountHistogram> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&p_bright) {
        return Err(Error::InvalidArgument(format!(
            "p_bright must lie in [0, 1], got {p_bright}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bright = Poisson::new(model.lambda_bright).expect("λ_bright > 0 by construction");
    let dark = if model.lambda_dark > 0.0 {
        Some(Poisson::new(model.lambda_dark).expect("λ_dark > 0 in this branch"))
    } else {
        None
    };
    let mut bins = BTreeMap::new();
    for _ in 0..shots {
        let count = if rng.gen_bool(p_bright) {
            bright.sample(&mut rng) as u64
        } else {
            match &dark {
                Some(d) => d.sample(&mut rng) as u64,
                None => 0,
            }
        };
        *bins.entry(count).or_insert(0u64) += 1;
    }
    Ok(CountHistogram { bins, total_shots: shots })
}

/// Result of the bright-fraction likelihood fit.
#[derive(Copy, Clone, Debug)]
pub struct BrightFractionFit {
    /// Maximum-likelihood mixture weight, clamped to [0, 1].
    pub p_hat: f64,
    /// 1/√I from the observed Fisher information at the optimum.
    pub stderr: f64,
    pub log_likelihood: f64,
}

/// Maximum-likelihood estimate of the bright fraction for a histogram drawn
/// from the two-Poisson mixture with known component means.
///
/// The log-likelihood Σ_c n_c·ln(p·A_c + (1−p)·B_c) is concave in p (a sum
/// of logs of affine functions), so golden-section search over [0, 1] finds
/// the global optimum; the endpoints are compared exactly, so boundary
/// estimates come out as exactly 0 or 1.
pub fn fit_bright_fraction(
    hist: &CountHistogram,
    model: &DetectionModel,
) -> Result<BrightFractionFit> {
    if hist.total_shots == 0 {
        return Err(Error::EmptyHistogram);
    }
    let max = hist.max_count();
    let bright_pmf = poisson_pmf_table(model.lambda_bright, max);
    let dark_pmf = poisson_pmf_table(model.lambda_dark, max);
    let cells: Vec<(f64, f64, f64)> = hist
        .bins
        .iter()
        .map(|(&c, &n)| (n as f64, bright_pmf[c as usize], dark_pmf[c as usize]))
        .collect();
    let log_lik = |p: f64| -> f64 {
        cells
            .iter()
            .map(|&(n, a, b)| {
                let mix = p * a + (1.0 - p) * b;
                if mix > 0.0 {
                    n * mix.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    };
    let (p_hat, neg_best) = golden_section_min(|p| -log_lik(p), 0.0, 1.0, 1e-12);
    let info: f64 = cells
        .iter()
        .map(|&(n, a, b)| {
            let mix = p_hat * a + (1.0 - p_hat) * b;
            if mix > 0.0 {
                n * ((a - b) / mix).powi(2)
            } else {
                0.0
            }
        })
        .sum();
    let stderr = if info > 0.0 { 1.0 / info.sqrt() } else { f64::INFINITY };
    Ok(BrightFractionFit { p_hat: p_hat.clamp(0.0, 1.0), stderr, log_likelihood: -neg_best })
}
