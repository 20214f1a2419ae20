//! Thermal motion of the trapped ion, reduced to what the experiments see:
//! a random optical phase φ = k·x with φ ~ Normal(0, σ²), σ = η√(2n̄+1),
//! frozen over one pulse sequence (the pulses are far faster than the trap
//! period) and resampled shot to shot.
//!
//! Averages over φ are computed either by quadrature (`GaussHermite`) or by
//! explicit sampling (`MonteCarlo`).  Every observable averaged here is
//! 2π-periodic in φ (the phase only ever enters through e^{±iφ}), which the
//! quadrature path exploits for wide distributions: plain Gauss–Hermite
//! of any affordable order fails once σ ≳ 2 because the integrand oscillates
//! hundreds of times across the node span, so for σ ≥ 0.75 the expectation is
//! evaluated in wrapped form, E[f] = Σ_k f̂_k e^(−k²σ²/2), via a uniform
//! trapezoid rule over one period with analytically damped harmonics.  Both
//! branches agree to machine precision in the crossover region.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Default Gauss–Hermite order; integrates the experiment fringe functions
/// (harmonics ≤ 4) to machine precision over the whole small-σ regime.
pub const DEFAULT_QUADRATURE_ORDER: usize = 40;

/// σ above which averaging switches to the wrapped-Gaussian form.
const WRAPPED_SIGMA_THRESHOLD: f64 = 0.75;

/// Thermal state of the ion's motion along the beam axis.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MotionalState {
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Mean phonon occupation.
    pub nbar: f64,
    /// Optional direct override of the rms phase (the quoted experimental
    /// value is a rounded 1.9; the η, n̄ formula gives 1.98).
    pub sigma_override_rad: Option<f64>,
}

impl Default for MotionalState {
    fn default() -> Self {
        MotionalState { eta: 0.22, nbar: 40.0, sigma_override_rad: None }
    }
}

impl MotionalState {
    pub fn new(eta: f64, nbar: f64) -> Result<MotionalState> {
        let state = MotionalState { eta, nbar, sigma_override_rad: None };
        state.validate()?;
        Ok(state)
    }

    pub fn with_sigma(sigma_rad: f64) -> Result<MotionalState> {
        let state = MotionalState { sigma_override_rad: Some(sigma_rad), ..Default::default() };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lamb-Dicke parameter must be ≥ 0, got {}",
                self.eta
            )));
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("n̄ must be ≥ 0, got {}", self.nbar)));
        }
        if let Some(s) = self.sigma_override_rad {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("σ override must be ≥ 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Root-mean-square optical phase η√(2n̄+1).
    pub fn rms_phase(&self) -> f64 {
        self.eta * (2.0 * self.nbar + 1.0).sqrt()
    }

    /// The σ actually used: the override if set, else the rms formula.
    pub fn effective_sigma(&self) -> f64 {
        self.sigma_override_rad.unwrap_or_else(|| self.rms_phase())
    }
}

/// How to compute E[f(φ)] over the thermal phase distribution.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AveragingMethod {
    GaussHermite { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for AveragingMethod {
    fn default() -> Self {
        AveragingMethod::GaussHermite { order: DEFAULT_QUADRATURE_ORDER }
    }
}

/// Nodes and weights of the n-point Gauss–Hermite rule (weight e^{−x²}),
/// from the eigendecomposition of the Jacobi matrix (Golub–Welsch): nodes are
/// its eigenvalues, weights √π times the squared first eigenvector components.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be ≥ 1".into()));
    }
    if order == 1 {
        return Ok((vec![0.0], vec![std::f64::consts::PI.sqrt()]));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let beta = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = beta;
        jacobi[(k, k - 1)] = beta;
    }
    let eigen = jacobi.symmetric_eigen();
    let mu0 = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eigen.eigenvalues[i], mu0 * eigen.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// E[f(φ)] with φ ~ Normal(0, σ²).
///
/// `f` must be 2π-periodic (all optical-phase observables are); see the
/// module docs for why the quadrature branch depends on it when σ is large.
pub fn average_over_phase(
    f: impl Fn(f64) -> f64,
    sigma: f64,
    method: AveragingMethod,
) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("σ must be ≥ 0 and finite, got {sigma}")));
    }
    match method {
        AveragingMethod::GaussHermite { order } => {
            if order == 0 {
                return Err(Error::InvalidArgument("quadrature order must be ≥ 1".into()));
            }
            if sigma == 0.0 {
                return Ok(f(0.0));
            }
            if sigma < WRAPPED_SIGMA_THRESHOLD {
                let (nodes, weights) = gauss_hermite(order)?;
                let scale = std::f64::consts::SQRT_2 * sigma;
                let sum: f64 =
                    nodes.iter().zip(&weights).map(|(&x, &w)| w * f(scale * x)).sum();
                Ok(sum / std::f64::consts::PI.sqrt())
            } else {
                Ok(wrapped_average(&f, sigma, order))
            }
        }
        AveragingMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sample count must be ≥ 1".into()));
            }
            if sigma == 0.0 {
                return Ok(f(0.0));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).expect("σ validated above");
            let sum: f64 = (0..samples).map(|_| f(normal.sample(&mut rng))).sum();
            Ok(sum / samples as f64)
        }
    }
}

/// Wrapped-Gaussian expectation of a 2π-periodic function: trapezoid rule
/// against the wrapped normal density (1/2π)[1 + 2Σ_k e^{−k²σ²/2} cos kφ],
/// truncated where the damping reaches 1e−17.
fn wrapped_average(f: &impl Fn(f64) -> f64, sigma: f64, min_nodes: usize) -> f64 {
    let k_max = (8.8 / sigma).ceil() as usize + 2;
    let n = min_nodes.max(4 * k_max).max(32);
    let damping: Vec<f64> =
        (1..=k_max).map(|k| (-0.5 * (k as f64 * sigma).powi(2)).exp()).collect();
    let mut total = 0.0;
    for j in 0..n {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let mut density = 1.0;
        for (k, d) in damping.iter().enumerate() {
            density += 2.0 * d * ((k + 1) as f64 * phi).cos();
        }
        total += density * f(phi);
    }
    total / n as f64
}

/// Closed-form excited population after two equal-angle counter-propagating
/// pulses on a two-level transition with no decay: sin²θ·⟨cos²φ⟩ =
/// sin²θ·(1+e^{−2σ²})/2.
pub fn two_pulse_two_level_population(theta_rad: f64, sigma_rad: f64) -> f64 {
    let avg_cos_sq = 0.5 * (1.0 + (-2.0 * sigma_rad * sigma_rad).exp());
    theta_rad.sin().powi(2) * avg_cos_sq
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic_cos_sq(sigma: f64) -> f64 {
        0.5 * (1.0 + (-2.0 * sigma * sigma).exp())
    }

    #[test]
    fn rms_phase_values() {
        let m = MotionalState::default();
        assert_eq!(m.eta, 0.22);
        assert_eq!(m.nbar, 40.0);
        assert!((m.rms_phase() - 1.98).abs() < 1e-12, "0.22×√81 = 1.98");
        assert_eq!(MotionalState::new(0.22, 0.0).unwrap().rms_phase(), 0.22);
        assert_eq!(MotionalState::new(0.0, 40.0).unwrap().rms_phase(), 0.0);
        let overridden = MotionalState::with_sigma(1.9).unwrap();
        assert_eq!(overridden.effective_sigma(), 1.9);
        assert!(MotionalState::new(-0.1, 40.0).is_err());
        assert!(MotionalState::new(0.22, -1.0).is_err());
    }

    #[test]
    fn gauss_hermite_small_orders_match_closed_forms() {
        let (nodes, weights) = gauss_hermite(2).unwrap();
        let r = 0.5_f64.sqrt();
        let half = std::f64::consts::PI.sqrt() / 2.0;
        assert!((nodes[0] + r).abs() < 1e-14 && (nodes[1] - r).abs() < 1e-14);
        assert!((weights[0] - half).abs() < 1e-14 && (weights[1] - half).abs() < 1e-14);
        assert!(gauss_hermite(0).is_err());
    }

    #[test]
    fn gauss_hermite_integrates_moments_exactly() {
        // ∫e^{−x²}x^{2k}dx = Γ(k+1/2); a 5-point rule is exact through x⁹.
        let (nodes, weights) = gauss_hermite(5).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let exact = [
            sqrt_pi,
            sqrt_pi / 2.0,
            3.0 * sqrt_pi / 4.0,
            15.0 * sqrt_pi / 8.0,
            105.0 * sqrt_pi / 16.0,
        ];
        for (k, &target) in exact.iter().enumerate() {
            let est: f64 =
                nodes.iter().zip(&weights).map(|(&x, &w)| w * x.powi(2 * k as i32)).sum();
            assert!((est - target).abs() < 1e-12 * target.max(1.0), "moment 2k={}", 2 * k);
        }
        for odd in [1, 3, 5] {
            let est: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * x.powi(odd)).sum();
            assert!(est.abs() < 1e-12);
        }
    }

    #[test]
    fn phase_average_matches_analytic_gaussian() {
        let gh = AveragingMethod::default();
        // σ = 1.9: the value quoted alongside the 1/6 ceiling.
        let est = average_over_phase(|p| p.cos().powi(2), 1.9, gh).unwrap();
        assert!((est - analytic_cos_sq(1.9)).abs() < 1e-12);
        assert!((est - 0.50037).abs() < 1e-5);
        // Degenerate and asymptotic limits.
        assert_eq!(average_over_phase(|p| p.cos().powi(2), 0.0, gh).unwrap(), 1.0);
        let wide = average_over_phase(|p| p.cos().powi(2), 50.0, gh).unwrap();
        assert!((wide - 0.5).abs() < 1e-9);
        // Intermediate σ, where a bare Hermite rule of this order would be
        // off by percent-level.
        for sigma in [0.74, 0.76, 5.0] {
            let est = average_over_phase(|p| p.cos().powi(2), sigma, gh).unwrap();
            assert!(
                (est - analytic_cos_sq(sigma)).abs() < 1e-12,
                "σ={sigma}: {est} vs {}",
                analytic_cos_sq(sigma)
            );
        }
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        // Comparison set: cos², cos, and a shifted sin².
        let sigma = MotionalState::default().rms_phase();
        let functions: [(&str, fn(f64) -> f64); 3] = [
            ("cos2", |p| p.cos().powi(2)),
            ("cos", |p| p.cos()),
            ("shifted_sin2", |p| (0.7 + p).sin().powi(2)),
        ];
        for (name, f) in functions {
            let exact = average_over_phase(f, sigma, AveragingMethod::default()).unwrap();
            let mc = average_over_phase(
                f,
                sigma,
                AveragingMethod::MonteCarlo { samples: 1_000_000, seed: 42 },
            )
            .unwrap();
            // 3 standard errors with the worst-case std ≤ 1/2 for these f.
            assert!((mc - exact).abs() < 3.0 * 0.5 / 1000.0, "{name}: mc={mc} exact={exact}");
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let m = AveragingMethod::MonteCarlo { samples: 1000, seed: 7 };
        let a = average_over_phase(|p| p.cos(), 1.98, m).unwrap();
        let b = average_over_phase(|p| p.cos(), 1.98, m).unwrap();
        assert_eq!(a, b);
        let c = average_over_phase(
            |p| p.cos(),
            1.98,
            AveragingMethod::MonteCarlo { samples: 1000, seed: 8 },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_pulse_closed_form() {
        let p = two_pulse_two_level_population(std::f64::consts::FRAC_PI_2, 1.9);
        assert!((p - analytic_cos_sq(1.9)).abs() < 1e-15);
        assert!((p / 3.0 - 1.0 / 6.0).abs() < 2e-4, "bright fraction ≈ 1/6");
        assert_eq!(two_pulse_two_level_population(0.0, 1.9), 0.0);
        assert!((two_pulse_two_level_population(std::f64::consts::FRAC_PI_2, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_composed_pulse_unitaries() {
        // Oracle equivalence: two counter-propagating pulses composed from
        // the dynamics module, averaged over phase, against sin²θ⟨cos²φ⟩.
        use crate::atomic::{branching_table, build_level_scheme, pi_coupling_matrix, AtomicConstants, SchemeMode};
        use crate::density::DensityMatrix;
        use crate::dynamics::pulse_unitary_from_angle;

        let mut constants = AtomicConstants::default();
        constants.excited_lifetime_ns = f64::INFINITY;
        let scheme = build_level_scheme(SchemeMode::ClockOnly);
        let _ = branching_table(&scheme, &constants);
        let coupling = pi_coupling_matrix(&scheme);
        for (theta, sigma) in [(std::f64::consts::FRAC_PI_2, 1.9), (0.9, 0.4), (2.2, 1.98)] {
            let brute = average_over_phase(
                |phi| {
                    let u1 =
                        pulse_unitary_from_angle(&scheme, &coupling, &constants, theta, phi, 0.0);
                    let u2 =
                        pulse_unitary_from_angle(&scheme, &coupling, &constants, theta, -phi, 0.0);
                    let rho = DensityMatrix::pure(scheme.len(), scheme.up())
                        .transformed(&u1)
                        .transformed(&u2);
                    rho.population(scheme.up_prime())
                },
                sigma,
                AveragingMethod::default(),
            )
            .unwrap();
            let closed = two_pulse_two_level_population(theta, sigma);
            assert!(
                (brute - closed).abs() < 1e-6,
                "θ={theta} σ={sigma}: composed {brute} vs closed form {closed}"
            );
        }
    }
}
