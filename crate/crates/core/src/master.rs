//! Master-equation (optical Bloch) evolution with finite-width pulses — the
//! validation path for the instantaneous-pulse model.
//!
//! Works in the same rotating frame as [`crate::dynamics`]: the free
//! Hamiltonian is −Δω_HF on the F′ = 2 manifold, the drive couples Δm = 0
//! pairs through the relative-amplitude matrix, with the F′=1 ← F=1 legs
//! rotating at −ω_ground, and spontaneous emission enters in Lindblad form
//! with one collapse channel per branching-table entry (population feeding
//! only, matching the photon which-path argument).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::atomic::{ghz_to_rad_per_ps, AtomicConstants, BranchingTable, CouplingMatrix, LevelScheme};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::ode::{integrate, Tolerances};

/// A square drive pulse: constant Rabi rate over `.width_ps` integrating to
/// pulse area `area_rad`, with optical phase `phase_rad` (already carrying
/// the propagation-direction sign).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SquarePulse {
    pub start_ps: f64,
    pub width_ps: f64,
    pub area_rad: f64,
    pub phase_rad: f64,
}

impl SquarePulse {
    /// Square pulse of the given width centered on `center_ps`, so that
    /// center-to-center spacing equals the nominal pulse delay.
    pub fn centered(center_ps: f64, width_ps: f64, area_rad: f64, phase_rad: f64) -> SquarePulse {
        SquarePulse { start_ps: center_ps - width_ps / 2.0, width_ps, area_rad, phase_rad }
    }

    pub fn end_ps(&self) -> f64 {
        self.start_ps + self.width_ps
    }

    fn validate(&self) -> Result<()> {
        if !(self.width_ps > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "square pulse width must be > 0 ps, got {}",
                self.width_ps
            )));
        }
        if !(self.area_rad.is_finite() && self.start_ps.is_finite()) {
            return Err(Error::InvalidPulse("square pulse has non-finite parameters".into()));
        }
        Ok(())
    }
}

/// Precomputed operators for the Lindblad right-hand side.
pub struct ObeSystem {
    n: usize,
    n_ground: usize,
    /// −Δω_HF on F′=2, as a real diagonal.
    h_diag: Vec<f64>,
    /// Raising part of the drive with static legs: Σ c_ge |e⟩⟨g|.
    raise_static: DMatrix<Complex64>,
    /// Raising part of the F′=1 ← F=1 legs, to be rotated by e^{−iω_g·t}.
    raise_rotating: DMatrix<Complex64>,
    omega_ground: f64,
    gamma: f64,
    /// branching[(e − n_ground, g)]
    branching: DMatrix<f64>,
}

impl ObeSystem {
    pub fn new(
        scheme: &LevelScheme,
        constants: &AtomicConstants,
        branching: &BranchingTable,
        coupling: &CouplingMatrix,
    ) -> ObeSystem {
        let n = scheme.len();
        let n_ground = scheme.n_ground();
        let delta = constants.hf_splitting_difference_rad_per_ps();
        let mut h_diag = vec![0.0; n];
        for e in scheme.excited_indices() {
            if scheme.level(e).f == 2 {
                h_diag[e] = -delta;
            }
        }
        let mut raise_static = DMatrix::<Complex64>::zeros(n, n);
        let mut raise_rotating = DMatrix::<Complex64>::zeros(n, n);
        for g in scheme.ground_indices() {
            for e in scheme.excited_indices() {
                let amp = coupling.amplitude(g, e);
                if amp == 0.0 {
                    continue;
                }
                let target = if scheme.level(g).f == 1 && scheme.level(e).f == 1 {
                    &mut raise_rotating
                } else {
                    &mut raise_static
                };
                target[(e, g)] = Complex64::new(amp, 0.0);
            }
        }
        let frac = DMatrix::from_fn(n - n_ground, n_ground, |row, g| {
            branching.fraction(row + n_ground, g)
        });
        ObeSystem {
            n,
            n_ground,
            h_diag,
            raise_static,
            raise_rotating,
            omega_ground: ghz_to_rad_per_ps(constants.ground_hf_splitting_ghz),
            gamma: branching.gamma_per_ps(),
            branching: frac,
        }
    }

    /// dρ/dt at time `t` under the pulses in `active` (slice of (Ω/2, e^{iφ})).
    fn rhs(&self, t: f64, rho: &DMatrix<Complex64>, active: &[(f64, Complex64)]) -> DMatrix<Complex64> {
        let n = self.n;
        // H = diag + Σ_p (Ω_p/2)(e^{iφ_p}·C(t) + h.c.)
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = Complex64::new(0.0, 0.0) + self.h_diag[i];
        }
        if !active.is_empty() {
            let amp: Complex64 = active
                .iter()
                .map(|&(half_rabi, phase)| phase * half_rabi)
                .sum();
            let rot = Complex64::from_polar(1.0, -self.omega_ground * t);
            for e in self.n_ground..n {
                for g in 0..self.n_ground {
                    let c = self.raise_static[(e, g)] + self.raise_rotating[(e, g)] * rot;
                    if c != Complex64::new(0.0, 0.0) {
                        let v = amp * c;
                        h[(e, g)] += v;
                        h[(g, e)] += v.conj();
                    }
                }
            }
        }

        let mut out = &h * rho - rho * &h;
        out *= Complex64::new(0.0, -1.0);

        if self.gamma > 0.0 {
            // −(Γ/2){P_exc, ρ}
            for i in 0..n {
                for j in 0..n {
                    let p = (i >= self.n_ground) as u8 + (j >= self.n_ground) as u8;
                    if p > 0 {
                        out[(i, j)] -= rho[(i, j)] * (0.5 * self.gamma * p as f64);
                    }
                }
            }
            // Population feeding through each collapse channel.
            for e in self.n_ground..n {
                let pop = rho[(e, e)];
                for g in 0..self.n_ground {
                    let b = self.branching[(e - self.n_ground, g)];
                    if b > 0.0 {
                        out[(g, g)] += pop * (self.gamma * b);
                    }
                }
            }
        }
        out
    }

    /// Evolve from `t0` to `t1` through the given pulses, returning the state
    /// at `t1`. Pulses wholly outside [t0, t1] are rejected.
    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        pulses: &[SquarePulse],
        t0: f64,
        t1: f64,
        tol: Tolerances,
    ) -> Result<DensityMatrix> {
        Ok(self.trajectory(rho0, pulses, t0, &[t1], tol)?.pop().expect("one eval time"))
    }

    /// Evolve from `t0` recording the state at each (ascending) eval time.
    pub fn trajectory(
        &self,
        rho0: &DensityMatrix,
        pulses: &[SquarePulse],
        t0: f64,
        eval_times: &[f64],
        tol: Tolerances,
    ) -> Result<Vec<DensityMatrix>> {
        if eval_times.is_empty() {
            return Ok(Vec::new());
        }
        if eval_times.windows(2).any(|w| w[1] < w[0]) || eval_times[0] < t0 {
            return Err(Error::InvalidArgument(
                "evaluation times must be ascending and ≥ the start time".into(),
            ));
        }
        for p in pulses {
            p.validate()?;
            if p.start_ps < t0 - 1e-9 || p.end_ps() > eval_times[eval_times.len() - 1] + 1e-9 {
                return Err(Error::InvalidPulse(format!(
                    "pulse [{}, {}] ps lies outside the integration span",
                    p.start_ps,
                    p.end_ps()
                )));
            }
        }

        // Segment boundaries: pulse edges and evaluation times.
        let t_end = eval_times[eval_times.len() - 1];
        let mut cuts: Vec<f64> = Vec::with_capacity(pulses.len() * 2 + eval_times.len() + 1);
        cuts.push(t0);
        cuts.extend(eval_times.iter().copied());
        for p in pulses {
            for edge in [p.start_ps, p.end_ps()] {
                if edge > t0 && edge < t_end {
                    cuts.push(edge);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut rho = rho0.matrix().clone();
        let mut results = Vec::with_capacity(eval_times.len());
        let mut next_eval = 0;
        // Record any eval times coinciding with t0.
        while next_eval < eval_times.len() && eval_times[next_eval] <= cuts[0] {
            results.push(self.snapshot(&rho));
            next_eval += 1;
        }
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let active: Vec<(f64, Complex64)> = pulses
                .iter()
                .filter(|p| p.start_ps <= mid && mid < p.end_ps())
                .map(|p| {
                    (0.5 * p.area_rad / p.width_ps, Complex64::from_polar(1.0, p.phase_rad))
                })
                .collect();
            rho = integrate(|t, y| self.rhs(t, y, &active), a, b, rho, tol)?;
            while next_eval < eval_times.len() && eval_times[next_eval] <= b + 1e-12 {
                results.push(self.snapshot(&rho));
                next_eval += 1;
            }
        }
        debug_assert_eq!(results.len(), eval_times.len());
        Ok(results)
    }

    /// Hermitize (integration roundoff is the only asymmetry source) and wrap.
    fn snapshot(&self, rho: &DMatrix<Complex64>) -> DensityMatrix {
        let herm = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        DensityMatrix::from_matrix_unchecked(herm)
    }
}
