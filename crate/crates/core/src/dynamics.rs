//! Evolution primitives: instantaneous pulse unitaries, microwave rotations
//! on the clock qubit, and analytic free evolution with spontaneous emission.
//!
//! Everything lives in one rotating frame, chosen so that (i) the microwave
//! drive on |↑⟩ ↔ |↓⟩ is static, and (ii) the two clock optical couplings
//! |↑⟩ ↔ |↑′⟩ and |↓⟩ ↔ |↓′⟩ are static.  In that frame the only residual
//! diagonal term sits on the F′ = 2 manifold, whose amplitudes advance as
//! e^{+iΔω_HF·t} — the frequency difference between the ground and excited
//! hyperfine splittings accrues as phase whenever population dwells in the
//! excited state, which is exactly the quantity the delay scans measure.
//! One off-diagonal remnant survives: the F′=1 ← F=1 couplings (the m = ±1
//! spectator transitions) rotate at −ω_ground, so a pulse arriving at time t
//! imprints that phase on those legs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::atomic::{ghz_to_rad_per_ps, AtomicConstants, BranchingTable, CouplingMatrix, LevelScheme};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};

/// Propagation direction of a pulse; opposite directions imprint opposite
/// signs of the ion-position phase k·x.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn phase_sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One ultrafast π-polarized pulse.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PulseSpec {
    /// Nominal pulse energy in pJ (before attenuation).
    pub energy_pj: f64,
    pub direction: Direction,
    /// Fraction of the pulse energy removed, in [0, 1]; 1 blocks the pulse.
    pub attenuation: f64,
    /// Arrival time in ps, on the same clock as the surrounding free evolution.
    pub arrival_time_ps: f64,
}

impl PulseSpec {
    pub fn new(
        energy_pj: f64,
        direction: Direction,
        attenuation: f64,
        arrival_time_ps: f64,
    ) -> Result<PulseSpec> {
        let spec = PulseSpec { energy_pj, direction, attenuation, arrival_time_ps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_pj >= 0.0) {
            return Err(Error::InvalidPulse(format!(
                "energy must be ≥ 0 pJ, got {}",
                self.energy_pj
            )));
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(Error::InvalidPulse(format!(
                "attenuation must lie in [0, 1], got {}",
                self.attenuation
            )));
        }
        if !self.arrival_time_ps.is_finite() {
            return Err(Error::InvalidPulse("arrival time must be finite".into()));
        }
        Ok(())
    }

    /// Energy actually delivered: E·(1 − attenuation).
    pub fn effective_energy_pj(&self) -> f64 {
        self.energy_pj * (1.0 - self.attenuation)
    }
}

/// A resonant microwave rotation on the ground clock pair.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MicrowaveSpec {
    pub angle_rad: f64,
    pub phase_rad: f64,
}

impl MicrowaveSpec {
    pub fn pi_half(phase_rad: f64) -> MicrowaveSpec {
        MicrowaveSpec { angle_rad: std::f64::consts::FRAC_PI_2, phase_rad }
    }
}

/// The single fitted constant of the optical drive: θ = a√E.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RabiCalibration {
    a_per_sqrt_pj: f64,
}

impl RabiCalibration {
    pub fn new(a_per_sqrt_pj: f64) -> Result<RabiCalibration> {
        if !(a_per_sqrt_pj > 0.0 && a_per_sqrt_pj.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "calibration constant a must be positive and finite, got {a_per_sqrt_pj}"
            )));
        }
        Ok(RabiCalibration { a_per_sqrt_pj })
    }

    pub fn a(&self) -> f64 {
        self.a_per_sqrt_pj
    }

    /// Rotation angle for a delivered pulse energy in pJ.
    pub fn angle_for_energy(&self, energy_pj: f64) -> f64 {
        debug_assert!(energy_pj >= 0.0);
        self.a_per_sqrt_pj * energy_pj.sqrt()
    }

    /// Energy at which a single pulse is a π rotation: (π/a)².
    pub fn pi_pulse_energy_pj(&self) -> f64 {
        (std::f64::consts::PI / self.a_per_sqrt_pj).powi(2)
    }
}

/// Unitary of one instantaneous pulse.
///
/// The pulse bandwidth dwarfs every level splitting, so every Δm = 0 pair is
/// driven simultaneously; each ground level rotates towards its (possibly
/// superposed) excited partner with angle θ scaled by the pair's relative
/// coupling, and the ground→excited amplitude carries e^{i·optical_phase}
/// with the sign of the phase set by the propagation direction.
pub fn pulse_unitary(
    scheme: &LevelScheme,
    coupling: &CouplingMatrix,
    constants: &AtomicConstants,
    calib: &RabiCalibration,
    pulse: &PulseSpec,
    optical_phase_rad: f64,
) -> Result<DMatrix<Complex64>> {
    pulse.validate()?;
    let theta = calib.angle_for_energy(pulse.effective_energy_pj());
    let phase = pulse.direction.phase_sign() * optical_phase_rad;
    Ok(pulse_unitary_from_angle(scheme, coupling, constants, theta, phase, pulse.arrival_time_ps))
}

/// Same as [`pulse_unitary`] with the rotation angle given directly.
pub fn pulse_unitary_from_angle(
    scheme: &LevelScheme,
    coupling: &CouplingMatrix,
    constants: &AtomicConstants,
    theta_rad: f64,
    phase_rad: f64,
    arrival_time_ps: f64,
) -> DMatrix<Complex64> {
    let n = scheme.len();
    let mut u = DMatrix::<Complex64>::identity(n, n);
    let omega_ground = ghz_to_rad_per_ps(constants.ground_hf_splitting_ghz);
    let drive_phase = Complex64::from_polar(1.0, phase_rad);

    for g in scheme.ground_indices() {
        // Complex coupling amplitudes from this ground level, including the
        // residual frame rotation on the F'=1 ← F=1 legs.
        let legs: Vec<(usize, Complex64)> = scheme
            .excited_indices()
            .filter_map(|e| {
                let amp = coupling.amplitude(g, e);
                if amp == 0.0 {
                    return None;
                }
                let frame = if scheme.level(g).f == 1 && scheme.level(e).f == 1 {
                    Complex64::from_polar(1.0, -omega_ground * arrival_time_ps)
                } else {
                    Complex64::new(1.0, 0.0)
                };
                Some((e, frame * amp))
            })
            .collect();
        if legs.is_empty() {
            continue;
        }
        let weight_sq: f64 = legs.iter().map(|(_, z)| z.norm_sqr()).sum();
        let weight = weight_sq.sqrt();
        let half = 0.5 * theta_rad * weight;
        let (c, s) = (half.cos(), half.sin());
        // Unit vector along the driven excited superposition.
        let unit: Vec<(usize, Complex64)> =
            legs.iter().map(|&(e, z)| (e, z / weight)).collect();

        u[(g, g)] = Complex64::new(c, 0.0);
        for &(e, ue) in &unit {
            u[(e, g)] = Complex64::new(0.0, -s) * drive_phase * ue;
            u[(g, e)] = Complex64::new(0.0, -s) * drive_phase.conj() * ue.conj();
            for &(e2, ue2) in &unit {
                u[(e, e2)] += (Complex64::new(c, 0.0) - 1.0) * ue * ue2.conj();
            }
        }
    }
    u
}

/// Unitary of a resonant microwave rotation: a 2-level rotation on the
/// |↑⟩, |↓⟩ subspace, identity elsewhere.
pub fn microwave_unitary(scheme: &LevelScheme, mw: &MicrowaveSpec) -> DMatrix<Complex64> {
    let n = scheme.len();
    let (up, down) = (scheme.up(), scheme.down());
    let mut u = DMatrix::<Complex64>::identity(n, n);
    let (c, s) = ((mw.angle_rad / 2.0).cos(), (mw.angle_rad / 2.0).sin());
    let phase = Complex64::from_polar(1.0, mw.phase_rad);
    u[(up, up)] = Complex64::new(c, 0.0);
    u[(down, down)] = Complex64::new(c, 0.0);
    u[(down, up)] = Complex64::new(0.0, -s) * phase;
    u[(up, down)] = Complex64::new(0.0, -s) * phase.conj();
    u
}

/// Apply a microwave rotation to a state.
pub fn apply_microwave(
    rho: &DensityMatrix,
    scheme: &LevelScheme,
    mw: &MicrowaveSpec,
) -> DensityMatrix {
    rho.transformed(&microwave_unitary(scheme, mw))
}

/// Free evolution for `duration_ps` with spontaneous emission.
///
/// Exact closed form of the dissipative semigroup: excited populations decay
/// as e^{−Γt} and feed ground populations through the branching table;
/// ground↔excited coherences decay as e^{−Γt/2}; F′=2 amplitudes advance by
/// e^{+iΔω_HF·t}.  Decay feeds populations only — the emitted photons'
/// frequencies would reveal the decay path, so no ground coherence is created.
pub fn free_evolve(
    rho: &DensityMatrix,
    scheme: &LevelScheme,
    branching: &BranchingTable,
    constants: &AtomicConstants,
    duration_ps: f64,
) -> Result<DensityMatrix> {
    if duration_ps < 0.0 || duration_ps.is_nan() {
        return Err(Error::NegativeDuration(duration_ps));
    }
    let gamma = branching.gamma_per_ps();
    let survive = (-gamma * duration_ps).exp();
    let survive_half = (-0.5 * gamma * duration_ps).exp();
    let dphi = constants.hf_splitting_difference_rad_per_ps() * duration_ps;

    let n = scheme.len();
    // Per-level amplitude factor: decay on excited levels, frame phase on F'=2.
    let factor: Vec<Complex64> = (0..n)
        .map(|i| {
            let level = scheme.level(i);
            if !level.is_excited() {
                Complex64::new(1.0, 0.0)
            } else if level.f == 2 {
                Complex64::from_polar(survive_half, dphi)
            } else {
                Complex64::new(survive_half, 0.0)
            }
        })
        .collect();

    let old = rho.matrix();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = old[(i, j)] * factor[i] * factor[j].conj();
        }
    }
    for e in scheme.excited_indices() {
        let fed = (1.0 - survive) * old[(e, e)].re;
        if fed == 0.0 {
            continue;
        }
        for g in scheme.ground_indices() {
            out[(g, g)] += Complex64::new(branching.fraction(e, g) * fed, 0.0);
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Wait ≫ τ before detection: the analytic t → ∞ limit of [`free_evolve`].
/// Excited populations move to ground levels through the branching table,
/// every coherence involving an excited level vanishes, and the ground block
/// is untouched.  Exact rather than approximate, and — unlike evolving for a
/// large finite time — still meaningful when decay is switched off to isolate
/// interference effects (the detector is read after the excited levels have
/// emptied, however long that takes).
pub fn settle(
    rho: &DensityMatrix,
    scheme: &LevelScheme,
    branching: &BranchingTable,
) -> DensityMatrix {
    let n = scheme.len();
    let old = rho.matrix();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for g in scheme.ground_indices() {
        for g2 in scheme.ground_indices() {
            out[(g, g2)] = old[(g, g2)];
        }
    }
    for e in scheme.excited_indices() {
        let fed = old[(e, e)].re;
        if fed == 0.0 {
            continue;
        }
        for g in scheme.ground_indices() {
            out[(g, g)] += Complex64::new(branching.fraction(e, g) * fed, 0.0);
        }
    }
    DensityMatrix::from_matrix_unchecked(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::{branching_table, build_level_scheme, pi_coupling_matrix, Level, SchemeMode};

    fn setup(mode: SchemeMode) -> (LevelScheme, BranchingTable, CouplingMatrix, AtomicConstants) {
        let constants = AtomicConstants::default();
        let scheme = build_level_scheme(mode);
        let branching = branching_table(&scheme, &constants);
        let coupling = pi_coupling_matrix(&scheme);
        (scheme, branching, coupling, constants)
    }

    fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn calibration_angles() {
        let calib = RabiCalibration::new(0.42).unwrap();
        let e_pi = calib.pi_pulse_energy_pj();
        assert!((e_pi - (std::f64::consts::PI / 0.42).powi(2)).abs() < 1e-12);
        assert!((calib.angle_for_energy(e_pi) - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(calib.angle_for_energy(0.0), 0.0);
        assert!(RabiCalibration::new(0.0).is_err());
        assert!(RabiCalibration::new(-0.42).is_err());
    }

    #[test]
    fn pulse_spec_validation() {
        assert!(PulseSpec::new(-1.0, Direction::Forward, 0.0, 0.0).is_err());
        assert!(PulseSpec::new(1.0, Direction::Forward, 1.1, 0.0).is_err());
        assert!(PulseSpec::new(1.0, Direction::Forward, -0.1, 0.0).is_err());
        // Fully blocking the second pulse is a legitimate setting.
        let blocked = PulseSpec::new(1.0, Direction::Forward, 1.0, 0.0).unwrap();
        assert_eq!(blocked.effective_energy_pj(), 0.0);
        let p = PulseSpec::new(10.0, Direction::Backward, 0.6, 680.0).unwrap();
        assert!((p.effective_energy_pj() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pulse_unitary_is_unitary() {
        let (scheme, _, coupling, constants) = setup(SchemeMode::FullPi);
        let eye = DMatrix::<Complex64>::identity(scheme.len(), scheme.len());
        for theta in [0.0, 0.3, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 2.5] {
            for phase in [0.0, 1.3, -2.0] {
                for t in [0.0, 137.0] {
                    let u =
                        pulse_unitary_from_angle(&scheme, &coupling, &constants, theta, phase, t);
                    let uu = &u * u.adjoint();
                    assert!(
                        max_abs_diff(&uu, &eye) < 1e-12,
                        "θ={theta} φ={phase} t={t}: UU† deviates by {}",
                        max_abs_diff(&uu, &eye)
                    );
                }
            }
        }
    }

    #[test]
    fn pi_pulse_swaps_clock_states() {
        for mode in [SchemeMode::ClockOnly, SchemeMode::FullPi] {
            let (scheme, _, coupling, constants) = setup(mode);
            let u = pulse_unitary_from_angle(
                &scheme,
                &coupling,
                &constants,
                std::f64::consts::PI,
                0.0,
                0.0,
            );
            // |↑⟩ → −i|↑′⟩ and |↓⟩ → −i|↓′⟩.
            let minus_i = Complex64::new(0.0, -1.0);
            assert!((u[(scheme.up_prime(), scheme.up())] - minus_i).norm() < 1e-15);
            assert!((u[(scheme.down_prime(), scheme.down())] - minus_i).norm() < 1e-15);
            // Prohibited channels stay exactly empty.
            assert_eq!(u[(scheme.down_prime(), scheme.up())], Complex64::new(0.0, 0.0));
            assert_eq!(u[(scheme.up_prime(), scheme.down())], Complex64::new(0.0, 0.0));

            let rho = DensityMatrix::pure(scheme.len(), scheme.up()).transformed(&u);
            assert!((rho.population(scheme.up_prime()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_energy_pulse_is_identity() {
        let (scheme, _, coupling, constants) = setup(SchemeMode::FullPi);
        let calib = RabiCalibration::new(0.42).unwrap();
        let pulse = PulseSpec::new(0.0, Direction::Forward, 0.0, 0.0).unwrap();
        let u = pulse_unitary(&scheme, &coupling, &constants, &calib, &pulse, 0.7).unwrap();
        let eye = DMatrix::<Complex64>::identity(scheme.len(), scheme.len());
        assert_eq!(max_abs_diff(&u, &eye), 0.0);
    }

    #[test]
    fn attenuation_rescales_angle() {
        let (scheme, _, coupling, constants) = setup(SchemeMode::ClockOnly);
        let calib = RabiCalibration::new(0.42).unwrap();
        let energy = calib.pi_pulse_energy_pj();
        let pulse = PulseSpec::new(energy, Direction::Forward, 0.6, 0.0).unwrap();
        let u = pulse_unitary(&scheme, &coupling, &constants, &calib, &pulse, 0.0).unwrap();
        // θ_eff = π√0.4 ≈ 1.987 rad.
        let theta_eff = std::f64::consts::PI * 0.4_f64.sqrt();
        assert!((theta_eff - 1.9869).abs() < 1e-4);
        let expected = (theta_eff / 2.0).sin();
        assert!((u[(scheme.up_prime(), scheme.up())].norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn pulse_inverse_property() {
        let (scheme, _, coupling, constants) = setup(SchemeMode::FullPi);
        let eye = DMatrix::<Complex64>::identity(scheme.len(), scheme.len());
        for theta in [0.4, 1.9] {
            let u = pulse_unitary_from_angle(&scheme, &coupling, &constants, theta, 0.9, 40.0);
            let v = pulse_unitary_from_angle(&scheme, &coupling, &constants, -theta, 0.9, 40.0);
            assert!(max_abs_diff(&(u * v), &eye) < 1e-10);
        }
    }

    #[test]
    fn optical_phase_and_direction_signs() {
        let (scheme, _, coupling, constants) = setup(SchemeMode::ClockOnly);
        let calib = RabiCalibration::new(0.42).unwrap();
        let phase = 0.83;
        let fwd = PulseSpec::new(10.0, Direction::Forward, 0.0, 0.0).unwrap();
        let bwd = PulseSpec::new(10.0, Direction::Backward, 0.0, 0.0).unwrap();
        let uf = pulse_unitary(&scheme, &coupling, &constants, &calib, &fwd, phase).unwrap();
        let ub = pulse_unitary(&scheme, &coupling, &constants, &calib, &bwd, phase).unwrap();
        let (e, g) = (scheme.up_prime(), scheme.up());
        // Upward amplitude carries e^{±iφ}.
        assert!((uf[(e, g)].arg() - (phase - std::f64::consts::FRAC_PI_2)).abs() < 1e-12);
        assert!((uf[(e, g)] - ub[(e, g)] * Complex64::from_polar(1.0, 2.0 * phase)).norm() < 1e-12);
    }

    #[test]
    fn spectator_pulse_splits_population_by_coupling_strengths() {
        // From (1,+1) a π pulse transfers everything (total coupling strength
        // is exactly 1) split 1/4 : 3/4 between the F'=1 and F'=2 partners.
        let (scheme, _, coupling, constants) = setup(SchemeMode::FullPi);
        let g = scheme.index_of(Level { manifold: crate::atomic::Manifold::S12, f: 1, mf: 1 }).unwrap();
        let e1 = scheme.index_of(Level { manifold: crate::atomic::Manifold::P32, f: 1, mf: 1 }).unwrap();
        let e2 = scheme.index_of(Level { manifold: crate::atomic::Manifold::P32, f: 2, mf: 1 }).unwrap();
        let u = pulse_unitary_from_angle(
            &scheme,
            &coupling,
            &constants,
            std::f64::consts::PI,
            0.0,
            93.0,
        );
        let rho = DensityMatrix::pure(scheme.len(), g).transformed(&u);
        assert!(rho.population(g) < 1e-28);
        assert!((rho.population(e1) - 0.25).abs() < 1e-12);
        assert!((rho.population(e2) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn microwave_rotations() {
        let (scheme, _, _, _) = setup(SchemeMode::FullPi);
        let rho = DensityMatrix::pure(scheme.len(), scheme.up());
        let half = MicrowaveSpec::pi_half(0.0);
        let after = apply_microwave(&rho, &scheme, &half);
        assert!((after.population(scheme.up()) - 0.5).abs() < 1e-14);
        assert!((after.population(scheme.down()) - 0.5).abs() < 1e-14);
        // Two equal-phase π/2 pulses compose to π.
        let after2 = apply_microwave(&after, &scheme, &half);
        assert!((after2.population(scheme.down()) - 1.0).abs() < 1e-14);
        // Populations outside the clock pair are untouched.
        let spectator = scheme
            .index_of(Level { manifold: crate::atomic::Manifold::S12, f: 1, mf: -1 })
            .unwrap();
        let rho = DensityMatrix::pure(scheme.len(), spectator);
        let after = apply_microwave(&rho, &scheme, &half);
        assert_eq!(after.population(spectator), 1.0);
    }

    #[test]
    fn free_evolution_decay_and_feeding() {
        let (scheme, branching, _, constants) = setup(SchemeMode::FullPi);
        let rho = DensityMatrix::pure(scheme.len(), scheme.up_prime());
        let out = free_evolve(&rho, &scheme, &branching, &constants, 680.0).unwrap();
        let survived = (-680.0_f64 / 2650.0).exp();
        assert!((survived - 0.773675).abs() < 1e-5);
        assert!((out.population(scheme.up_prime()) - survived).abs() < 1e-12);
        // Emitted fraction ≈ 22.6%, branching 2/3 dark : 1/3 bright.
        let emitted = 1.0 - survived;
        assert!((emitted - 0.2264).abs() < 5e-4);
        assert!((out.population(scheme.up()) - 2.0 / 3.0 * emitted).abs() < 1e-12);
        let bright: f64 = scheme.bright_indices().iter().map(|&b| out.population(b)).sum();
        assert!((bright - emitted / 3.0).abs() < 1e-12);
        assert!((out.trace() - 1.0).abs() < 1e-12);
        out.validate().unwrap();

        // t = 0 is the identity; negative durations are rejected.
        let same = free_evolve(&rho, &scheme, &branching, &constants, 0.0).unwrap();
        assert_eq!(max_abs_diff(same.matrix(), rho.matrix()), 0.0);
        assert!(free_evolve(&rho, &scheme, &branching, &constants, -1.0).is_err());
    }

    #[test]
    fn excited_clock_coherence_advances_at_splitting_difference() {
        // Isolate the phase with decay switched off.
        let mut constants = AtomicConstants::default();
        constants.excited_lifetime_ns = f64::INFINITY;
        let scheme = build_level_scheme(SchemeMode::ClockOnly);
        let branching = branching_table(&scheme, &constants);
        let amps = {
            let mut v = vec![Complex64::new(0.0, 0.0); scheme.len()];
            v[scheme.up_prime()] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v[scheme.down_prime()] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v
        };
        let rho = DensityMatrix::from_amplitudes(&amps).unwrap();
        let t = 680.0;
        let out = free_evolve(&rho, &scheme, &branching, &constants, t).unwrap();
        let dphi = constants.hf_splitting_difference_rad_per_ps() * t;
        // Accumulated phase magnitude is Δω_HF·t = 18.91π.
        assert!((dphi / std::f64::consts::PI - 18.91).abs() < 5e-3);
        let expected = Complex64::from_polar(0.5, -dphi);
        assert!((out.coherence(scheme.up_prime(), scheme.down_prime()) - expected).norm() < 1e-12);
        // Populations untouched without decay.
        assert!((out.population(scheme.up_prime()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn free_evolution_semigroup_property() {
        let (scheme, branching, coupling, constants) = setup(SchemeMode::FullPi);
        // A state with every kind of element populated: pulse from a mixture.
        let mut rho = DensityMatrix::pure(scheme.len(), scheme.up());
        {
            let m = rho.matrix_mut();
            m[(scheme.up(), scheme.up())] = Complex64::new(0.4, 0.0);
            m[(scheme.down(), scheme.down())] = Complex64::new(0.6, 0.0);
        }
        let u = pulse_unitary_from_angle(&scheme, &coupling, &constants, 1.1, 0.4, 0.0);
        let rho = rho.transformed(&u);
        let one = free_evolve(&rho, &scheme, &branching, &constants, 500.0).unwrap();
        let two = free_evolve(
            &free_evolve(&rho, &scheme, &branching, &constants, 180.0).unwrap(),
            &scheme,
            &branching,
            &constants,
            320.0,
        )
        .unwrap();
        assert!(max_abs_diff(one.matrix(), two.matrix()) < 1e-9);
        one.validate().unwrap();
    }

    #[test]
    fn settle_empties_excited_levels() {
        let (scheme, branching, coupling, constants) = setup(SchemeMode::FullPi);
        let u = pulse_unitary_from_angle(
            &scheme,
            &coupling,
            &constants,
            std::f64::consts::FRAC_PI_2,
            0.0,
            0.0,
        );
        let rho = DensityMatrix::pure(scheme.len(), scheme.up()).transformed(&u);
        let out = settle(&rho, &scheme, &branching);
        for e in scheme.excited_indices() {
            assert_eq!(out.population(e), 0.0, "excited level {e} not fully decayed");
        }
        assert!((out.trace() - 1.0).abs() < 1e-12);
        // Settling is the t → ∞ limit of free evolution: a wait of many
        // lifetimes must land on the same state.
        let long = free_evolve(&rho, &scheme, &branching, &constants, 1.0e7).unwrap();
        assert!(max_abs_diff(out.matrix(), long.matrix()) < 1e-12);
        // And it stays meaningful with decay switched off, where finite-time
        // free evolution would never empty the excited levels.
        let frozen = AtomicConstants { excited_lifetime_ns: f64::INFINITY, ..constants };
        let frozen_branching = branching_table(&scheme, &frozen);
        let out2 = settle(&rho, &scheme, &frozen_branching);
        for e in scheme.excited_indices() {
            assert_eq!(out2.population(e), 0.0);
        }
        assert!((out2.trace() - 1.0).abs() < 1e-12);
    }
}
