//! Fitting toolkit: the Rabi-amplitude fit, sinusoidal fringe fits, seeded
//! phase unwrapping, and the weighted linear regression that converts a
//! phase-vs-delay scan into a frequency difference.
//!
//! Weighting convention shared by all fits here: if every measurement
//! carries `sigma > 0` the fit is weighted by 1/σ² and parameter errors come
//! straight from the curvature (uncertainties taken as known); if every
//! `sigma` is zero the fit is unweighted and parameter errors are scaled by
//! the residual variance. Mixing the two is rejected.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::optimize::grid_then_golden_min;

/// One measured point: scan variable, observed value, and 1σ uncertainty on
/// the value (0 ⇒ no stated uncertainty; see the module docs).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl Measurement {
    pub fn new(x: f64, y: f64, sigma: f64) -> Measurement {
        Measurement { x, y, sigma }
    }
}

/// Per-point weights, or `None` for an unweighted fit.
fn weights(points: &[Measurement]) -> Result<Option<Vec<f64>>> {
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite() && p.sigma.is_finite() && p.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "measurement ({}, {} ± {}) is not finite with σ ≥ 0",
                p.x, p.y, p.sigma
            )));
        }
    }
    let positive = points.iter().filter(|p| p.sigma > 0.0).count();
    match positive {
        0 => Ok(None),
        n if n == points.len() => {
            Ok(Some(points.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect()))
        }
        _ => Err(Error::InvalidArgument(
            "either all measurements or none must carry uncertainties".into(),
        )),
    }
}

/// Result of the one-parameter Rabi-law fit P(E) = (1/3)·sin²(a·√E / 2).
#[derive(Copy, Clone, Debug)]
pub struct RabiFit {
    /// Rotation-angle coefficient a in rad/√pJ.
    pub a: f64,
    pub a_stderr: f64,
    /// (Weighted) residual sum of squares at the optimum.
    pub rss: f64,
    /// Points minus the one fitted parameter.
    pub dof: usize,
}

/// Bright-fraction model value for a single energy.
pub fn rabi_model(a: f64, energy_pj: f64) -> f64 {
    (a * energy_pj.sqrt() / 2.0).sin().powi(2) / 3.0
}

/// Least-squares fit of the rotation coefficient `a` to a pulse-energy scan.
///
/// The residual is oscillatory in `a`, so the search first scans a grid over
/// [0, 6π/√E_max] — rotation angles up to 6π at the largest scanned energy,
/// beyond which a scan of typical density cannot distinguish aliases anyway —
/// and refines the best cell by golden section. Exact ties (aliased minima)
/// resolve to the smallest `a`.
pub fn fit_rabi(points: &[Measurement]) -> Result<RabiFit> {
    if points.is_empty() {
        return Err(Error::NotEnoughData("Rabi fit needs at least one point".into()));
    }
    let w = weights(points)?;
    if points.iter().any(|p| p.x < 0.0) {
        return Err(Error::InvalidArgument("pulse energies must be ≥ 0 pJ".into()));
    }
    if points.iter().all(|p| p.y == 0.0) {
        return Err(Error::Unidentifiable(
            "all bright fractions are zero; any vanishing rotation angle fits".into(),
        ));
    }
    let e_max = points.iter().map(|p| p.x).fold(0.0, f64::max);
    if e_max == 0.0 {
        return Err(Error::Unidentifiable(
            "all points have zero pulse energy; the model is independent of a there".into(),
        ));
    }
    let weight = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);
    let objective = |a: f64| -> f64 {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| weight(i) * (p.y - rabi_model(a, p.x)).powi(2))
            .sum()
    };
    let a_hi = 6.0 * PI / e_max.sqrt();
    let (a, rss) = grid_then_golden_min(objective, 0.0, a_hi, 512, 1e-13 * a_hi);

    // Curvature of the residual at the optimum: Σ w·(∂P/∂a)² with
    // ∂P/∂a = (√E/6)·sin(a√E).
    let info: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = p.x.sqrt() / 6.0 * (a * p.x.sqrt()).sin();
            weight(i) * d * d
        })
        .sum();
    let dof = points.len() - 1;
    let variance = if info > 0.0 {
        match w {
            Some(_) => 1.0 / info,
            None if dof > 0 => rss / dof as f64 / info,
            None => 0.0,
        }
    } else {
        f64::INFINITY
    };
    Ok(RabiFit { a, a_stderr: variance.sqrt(), rss, dof })
}

/// Result of the three-parameter fringe fit y = offset + A·cos(φ − φ₀).
#[derive(Copy, Clone, Debug)]
pub struct SinusoidFit {
    pub offset: f64,
    pub offset_stderr: f64,
    /// Fringe amplitude, ≥ 0.
    pub amplitude: f64,
    pub amplitude_stderr: f64,
    /// Fringe phase in [0, 2π); meaningless when `phase_defined` is false.
    pub phase0: f64,
    pub phase0_stderr: f64,
    /// False for constant data, where the amplitude is zero and no phase
    /// exists; amplitude and phase stderrs are zeroed along with it.
    pub phase_defined: bool,
    pub rss: f64,
    pub dof: usize,
}

/// Fit a sinusoid to fringe samples (x = phase in rad, y = value).
///
/// Linear least squares in (offset, A·cos φ₀, A·sin φ₀), so no starting
/// guess is needed and the solution is exact in one solve.
pub fn fit_sinusoid(samples: &[Measurement]) -> Result<SinusoidFit> {
    if samples.len() < 3 {
        return Err(Error::NotEnoughData(format!(
            "sinusoid fit needs ≥ 3 samples, got {}",
            samples.len()
        )));
    }
    let w = weights(samples)?;
    let weight = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);

    let mut m = Matrix3::<f64>::zeros();
    let mut v = Vector3::<f64>::zeros();
    for (i, s) in samples.iter().enumerate() {
        let basis = Vector3::new(1.0, s.x.cos(), s.x.sin());
        m += weight(i) * basis * basis.transpose();
        v += weight(i) * s.y * basis;
    }
    // LU does not reliably detect numerical singularity (pivots land at
    // ~1e-17 instead of 0), so gate on the determinant relative to scale.
    let scale = m.norm() / 3.0_f64.sqrt();
    if m.determinant().abs() <= 1e-12 * scale.powi(3) {
        return Err(Error::Unidentifiable(
            "phase samples do not determine a sinusoid (singular design)".into(),
        ));
    }
    let lu = m.lu();
    let beta = lu.solve(&v).ok_or_else(|| {
        Error::Unidentifiable("phase samples do not determine a sinusoid (singular design)".into())
    })?;
    let cov_shape = lu.try_inverse().ok_or_else(|| {
        Error::Unidentifiable("phase samples do not determine a sinusoid (singular design)".into())
    })?;
    let (offset, p, q) = (beta[0], beta[1], beta[2]);

    let rss: f64 = samples
        .iter()
        .enumerate()
        .map(|(i, s)| weight(i) * (s.y - offset - p * s.x.cos() - q * s.x.sin()).powi(2))
        .sum();
    let dof = samples.len() - 3;
    let cov = match w {
        Some(_) => cov_shape,
        None if dof > 0 => cov_shape * (rss / dof as f64),
        None => cov_shape * 0.0,
    };

    let amplitude = p.hypot(q);
    let scale = samples.iter().map(|s| s.y.abs()).fold(1.0, f64::max);
    if amplitude <= 1e-9 * scale {
        return Ok(SinusoidFit {
            offset,
            offset_stderr: cov[(0, 0)].max(0.0).sqrt(),
            amplitude: 0.0,
            amplitude_stderr: 0.0,
            phase0: 0.0,
            phase0_stderr: 0.0,
            phase_defined: false,
            rss,
            dof,
        });
    }
    // First-order error propagation through A = √(P²+Q²), φ₀ = atan2(Q, P).
    let a2 = amplitude * amplitude;
    let var_amp =
        (p * p * cov[(1, 1)] + 2.0 * p * q * cov[(1, 2)] + q * q * cov[(2, 2)]) / a2;
    let var_phase =
        (q * q * cov[(1, 1)] - 2.0 * p * q * cov[(1, 2)] + p * p * cov[(2, 2)]) / (a2 * a2);
    Ok(SinusoidFit {
        offset,
        offset_stderr: cov[(0, 0)].max(0.0).sqrt(),
        amplitude,
        amplitude_stderr: var_amp.max(0.0).sqrt(),
        phase0: q.atan2(p).rem_euclid(TAU),
        phase0_stderr: var_phase.max(0.0).sqrt(),
        phase_defined: true,
        rss,
        dof,
    })
}

/// Undo modulo-2π wrapping of a phase-vs-delay scan using prior knowledge of
/// the expected slope.
///
/// The first phase is kept as given; each later phase is shifted by the
/// multiple of 2π that brings it closest to the prediction from the previous
/// unwrapped point plus `slope_seed · Δt`. A step whose snapped correction
/// reaches half the snap radius (π/2) is ambiguous — the seed can no longer
/// reliably distinguish neighbouring turns — and is reported as an error
/// instead of being guessed.
pub fn unwrap_phases(
    delays_ps: &[f64],
    phases_rad: &[f64],
    slope_seed_rad_per_ps: f64,
) -> Result<Vec<f64>> {
    if delays_ps.len() != phases_rad.len() {
        return Err(Error::InvalidArgument(format!(
            "{} delays vs {} phases",
            delays_ps.len(),
            phases_rad.len()
        )));
    }
    if delays_ps.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(phases_rad.len());
    out.push(phases_rad[0]);
    for i in 1..phases_rad.len() {
        let predicted = out[i - 1] + slope_seed_rad_per_ps * (delays_ps[i] - delays_ps[i - 1]);
        let turns = ((predicted - phases_rad[i]) / TAU).round();
        let unwrapped = phases_rad[i] + TAU * turns;
        let residual = unwrapped - predicted;
        if residual.abs() >= PI / 2.0 {
            return Err(Error::AmbiguousUnwrap { index: i, residual });
        }
        out.push(unwrapped);
    }
    Ok(out)
}

/// Result of the phase-slope regression.
#[derive(Copy, Clone, Debug)]
pub struct FrequencyFit {
    pub frequency_ghz: f64,
    pub stderr_ghz: f64,
    pub slope_rad_per_ps: f64,
    pub intercept_rad: f64,
    /// Unweighted residual sum of squares in rad².
    pub rss: f64,
    pub dof: usize,
}

/// Weighted linear regression of unwrapped fringe phase against pulse delay;
/// the slope, as a frequency, is the hyperfine-splitting difference.
///
/// Delay uncertainty is folded into an effective phase variance using the
/// seed slope: σ_eff² = σ_φ² + (slope_seed·σ_t)². With stated uncertainties
/// the parameter error comes from the known-σ curvature; with both σ inputs
/// zero it is scaled from the residuals instead.
pub fn fit_frequency(
    delays_ps: &[f64],
    phases_rad: &[f64],
    sigma_delay_ps: f64,
    sigma_phase_rad: f64,
    slope_seed_rad_per_ps: f64,
) -> Result<FrequencyFit> {
    if delays_ps.len() != phases_rad.len() {
        return Err(Error::InvalidArgument(format!(
            "{} delays vs {} phases",
            delays_ps.len(),
            phases_rad.len()
        )));
    }
    if !(sigma_delay_ps >= 0.0 && sigma_phase_rad >= 0.0) {
        return Err(Error::InvalidArgument("uncertainties must be ≥ 0".into()));
    }
    let mut distinct: Vec<f64> = delays_ps.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::NotEnoughData(
            "frequency fit needs at least two distinct delays".into(),
        ));
    }

    let n = delays_ps.len() as f64;
    let t_mean = delays_ps.iter().sum::<f64>() / n;
    let p_mean = phases_rad.iter().sum::<f64>() / n;
    let sxx: f64 = delays_ps.iter().map(|&t| (t - t_mean).powi(2)).sum();
    let sxy: f64 = delays_ps
        .iter()
        .zip(phases_rad)
        .map(|(&t, &p)| (t - t_mean) * (p - p_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = p_mean - slope * t_mean;
    let rss: f64 = delays_ps
        .iter()
        .zip(phases_rad)
        .map(|(&t, &p)| (p - intercept - slope * t).powi(2))
        .sum();
    let dof = delays_ps.len() - 2;

    let sigma_eff_sq =
        sigma_phase_rad.powi(2) + (slope_seed_rad_per_ps * sigma_delay_ps).powi(2);
    let slope_var = if sigma_eff_sq > 0.0 {
        sigma_eff_sq / sxx
    } else if dof > 0 {
        rss / dof as f64 / sxx
    } else {
        0.0
    };

    // rad/ps → GHz: one cycle per ps is 10³ GHz.
    let to_ghz = 1e3 / TAU;
    Ok(FrequencyFit {
        frequency_ghz: slope * to_ghz,
        stderr_ghz: slope_var.sqrt() * to_ghz,
        slope_rad_per_ps: slope,
        intercept_rad: intercept,
        rss,
        dof,
    })
}

/// Excited-state hyperfine splitting with uncertainty.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SplittingEstimate {
    pub splitting_ghz: f64,
    pub stderr_ghz: f64,
}

/// The measured slope frequency is the *difference* between the ground and
/// excited splittings; subtracting it from the (exactly known) ground
/// splitting yields the excited one, with the measurement error passing
/// through unchanged.
pub fn excited_splitting(
    f_diff_ghz: f64,
    f_diff_stderr_ghz: f64,
    ground_ghz: f64,
) -> Result<SplittingEstimate> {
    if f_diff_stderr_ghz < 0.0 {
        return Err(Error::InvalidArgument("stderr must be ≥ 0".into()));
    }
    let splitting = ground_ghz - f_diff_ghz;
    if splitting < 0.0 {
        return Err(Error::NonPhysical(format!(
            "difference frequency {f_diff_ghz} GHz exceeds the ground splitting {ground_ghz} GHz"
        )));
    }
    Ok(SplittingEstimate { splitting_ghz: splitting, stderr_ghz: f_diff_stderr_ghz })
}
