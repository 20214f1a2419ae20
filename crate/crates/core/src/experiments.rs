//! The experiment sequences: excitation scans with one or two ultrafast
//! pulses, Ramsey interferometry with pulses inserted between the microwave
//! rotations, contrast-vs-energy scans, and the phase-vs-delay scan behind
//! the frequency-difference measurement.
//!
//! Every sequence starts from the optically pumped |↑⟩ = |F=0, m=0⟩ state,
//! ends with a wait ≫ τ so the excited manifold has emptied, and detects
//! "bright" as the total F=1 ground population. Counter-propagating pulse
//! pairs acquire opposite signs of the motional optical phase φ, which is
//! averaged per the configured [`AveragingMethod`]; scan points run in
//! parallel with per-point RNG streams derived from (master seed, index).

use std::cell::RefCell;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::{fit_sinusoid, Measurement, SinusoidFit};
use crate::atomic::{
    branching_table, build_level_scheme, pi_coupling_matrix, AtomicConstants, BranchingTable,
    CouplingMatrix, LevelScheme, SchemeMode,
};
use crate::density::DensityMatrix;
use crate::detection::{fit_bright_fraction, simulate_histogram, DetectionModel};
use crate::dynamics::{
    apply_microwave, free_evolve, pulse_unitary, settle, Direction, MicrowaveSpec, PulseSpec,
    RabiCalibration,
};
use crate::error::{Error, Result};
use crate::master::{ObeSystem, SquarePulse};
use crate::motion::{average_over_phase, AveragingMethod, MotionalState};
use crate::ode::Tolerances;
use crate::seeding::derive_seed;

/// How optical pulses act on the state.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum PulseModel {
    /// Instantaneous rotations (the pulse dwarfs every other timescale).
    Instantaneous,
    /// Square-envelope pulses integrated through the optical Bloch
    /// equations — the cross-check for the instantaneous model.
    SquareObe { width_ps: f64, tol: Tolerances },
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel::Instantaneous
    }
}

/// Whether scan points report exact probabilities or simulated detection
/// statistics.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum SamplingMode {
    Exact,
    Sampled { shots: u64, detection: DetectionModel, seed: u64 },
}

/// Gaussian noise injected into a phase-vs-delay scan, mimicking the stage
/// jitter and fit scatter of the real measurement.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub delay_jitter_ps: f64,
    pub phase_noise_rad: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { delay_jitter_ps: 0.1, phase_noise_rad: 0.01 }
    }
}

impl NoiseSpec {
    pub fn off() -> NoiseSpec {
        NoiseSpec { delay_jitter_ps: 0.0, phase_noise_rad: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delay_jitter_ps < 0.0 || self.phase_noise_rad < 0.0 {
            return Err(Error::InvalidArgument("noise magnitudes must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// One scan point: scan variable, measured value (probability or contrast),
/// and the detection-fit uncertainty in sampled mode.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// A scan curve; `x` meaning depends on the producing operation.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceResult {
    pub points: Vec<ScanPoint>,
}

impl SequenceResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Bright probability versus analysis-microwave phase.
#[derive(Clone, Debug, PartialEq)]
pub struct RamseyFringe {
    pub phases_rad: Vec<f64>,
    pub p_bright: Vec<f64>,
    /// Per-phase detection-fit uncertainties in sampled mode.
    pub stderr: Option<Vec<f64>>,
}

impl RamseyFringe {
    /// View as fit input; σ = 0 (unweighted) in exact mode.
    pub fn measurements(&self) -> Vec<Measurement> {
        self.phases_rad
            .iter()
            .zip(&self.p_bright)
            .enumerate()
            .map(|(i, (&x, &y))| {
                Measurement::new(x, y, self.stderr.as_ref().map_or(0.0, |s| s[i]))
            })
            .collect()
    }

    /// Sinusoid fit of the fringe.
    pub fn fit(&self) -> Result<SinusoidFit> {
        fit_sinusoid(&self.measurements())
    }

    /// Fringe contrast: twice the fitted amplitude (an ideal fringe swings
    /// between 0 and 1 around the reference mean 1/2).
    pub fn contrast(&self) -> Result<f64> {
        Ok(2.0 * self.fit()?.amplitude)
    }
}

/// One point of a phase-vs-delay scan. The delay is the nominal (commanded)
/// one; injected jitter perturbs only the underlying simulation.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PhaseDelayPoint {
    pub delay_ps: f64,
    /// Fitted fringe phase, reduced to [0, 2π).
    pub phase_rad: f64,
    pub stderr_rad: f64,
}

/// Evenly spaced microwave analysis phases covering one full turn.
pub fn default_phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// An ion, a pulsed laser, and a microwave synthesizer.
pub struct Simulator {
    scheme: LevelScheme,
    constants: AtomicConstants,
    branching: BranchingTable,
    coupling: CouplingMatrix,
    calib: RabiCalibration,
    motion: MotionalState,
    averaging: AveragingMethod,
    pulse_model: PulseModel,
}

impl Simulator {
    pub fn new(
        mode: SchemeMode,
        constants: AtomicConstants,
        calib: RabiCalibration,
        motion: MotionalState,
    ) -> Result<Simulator> {
        constants.validate()?;
        motion.validate()?;
        let scheme = build_level_scheme(mode);
        let branching = branching_table(&scheme, &constants);
        let coupling = pi_coupling_matrix(&scheme);
        Ok(Simulator {
            scheme,
            constants,
            branching,
            coupling,
            calib,
            motion,
            averaging: AveragingMethod::default(),
            pulse_model: PulseModel::default(),
        })
    }

    /// Default constants, calibration a = 0.42 rad/√pJ, thermal motion at
    /// the quoted η and n̄, full π-coupled level scheme.
    pub fn standard() -> Simulator {
        Simulator::new(
            SchemeMode::FullPi,
            AtomicConstants::default(),
            RabiCalibration::new(0.42).expect("positive calibration"),
            MotionalState::default(),
        )
        .expect("default configuration is valid")
    }

    pub fn with_averaging(mut self, averaging: AveragingMethod) -> Simulator {
        self.averaging = averaging;
        self
    }

    pub fn with_pulse_model(mut self, pulse_model: PulseModel) -> Simulator {
        self.pulse_model = pulse_model;
        self
    }

    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn constants(&self) -> &AtomicConstants {
        &self.constants
    }

    pub fn calibration(&self) -> &RabiCalibration {
        &self.calib
    }

    pub fn motion(&self) -> &MotionalState {
        &self.motion
    }

    fn initial_up(&self) -> DensityMatrix {
        DensityMatrix::pure(self.scheme.len(), self.scheme.up())
    }

    fn bright(&self, rho: &DensityMatrix) -> f64 {
        let p: f64 = self.scheme.bright_indices().iter().map(|&i| rho.population(i)).sum();
        debug_assert!((-1e-9..=1.0 + 1e-9).contains(&p), "bright probability {p}");
        p.clamp(0.0, 1.0)
    }

    /// Run a train of pulses (ascending arrival times) over a state given at
    /// the first pulse's arrival, with free evolution between pulses. The
    /// square-envelope model centers each square on its arrival time.
    fn apply_pulse_train(
        &self,
        rho: &DensityMatrix,
        pulses: &[PulseSpec],
        phi: f64,
    ) -> Result<DensityMatrix> {
        debug_assert!(pulses.windows(2).all(|w| w[0].arrival_time_ps <= w[1].arrival_time_ps));
        match self.pulse_model {
            PulseModel::Instantaneous => {
                let mut state = rho.clone();
                let mut clock = pulses[0].arrival_time_ps;
                for pulse in pulses {
                    let gap = pulse.arrival_time_ps - clock;
                    if gap > 0.0 {
                        state =
                            free_evolve(&state, &self.scheme, &self.branching, &self.constants, gap)?;
                    }
                    let u = pulse_unitary(
                        &self.scheme,
                        &self.coupling,
                        &self.constants,
                        &self.calib,
                        pulse,
                        phi,
                    )?;
                    state = state.transformed(&u);
                    clock = pulse.arrival_time_ps;
                }
                Ok(state)
            }
            PulseModel::SquareObe { width_ps, tol } => {
                let squares: Vec<SquarePulse> = pulses
                    .iter()
                    .map(|p| {
                        SquarePulse::centered(
                            p.arrival_time_ps,
                            width_ps,
                            self.calib.angle_for_energy(p.effective_energy_pj()),
                            p.direction.phase_sign() * phi,
                        )
                    })
                    .collect();
                let t0 = squares.iter().map(|s| s.start_ps).fold(f64::INFINITY, f64::min);
                let t1 = squares.iter().map(|s| s.end_ps()).fold(f64::NEG_INFINITY, f64::max);
                let obe = ObeSystem::new(&self.scheme, &self.constants, &self.branching, &self.coupling);
                obe.evolve(rho, &squares, t0, t1, tol)
            }
        }
    }

    /// Thermal average of a bright probability over the motional phase,
    /// propagating any error raised inside the integrand.
    fn average_bright(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let failure = RefCell::new(None);
        let avg = average_over_phase(
            |phi| match f(phi) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            self.motion.effective_sigma(),
            self.averaging,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(avg),
        }
    }

    /// Exact value → scan point, simulating detection statistics in sampled
    /// mode with a per-point derived seed.
    fn observe(&self, x: f64, p_exact: f64, mode: &SamplingMode, index: u64) -> Result<ScanPoint> {
        match mode {
            SamplingMode::Exact => Ok(ScanPoint { x, value: p_exact, stderr: None }),
            SamplingMode::Sampled { shots, detection, seed } => {
                let hist =
                    simulate_histogram(p_exact, *shots, detection, derive_seed(*seed, index))?;
                let fit = fit_bright_fraction(&hist, detection)?;
                Ok(ScanPoint { x, value: fit.p_hat, stderr: Some(fit.stderr) })
            }
        }
    }

    fn single_pulse_bright(&self, energy_pj: f64) -> Result<f64> {
        let pulse = PulseSpec::new(energy_pj, Direction::Forward, 0.0, 0.0)?;
        // A single pulse carries one overall optical phase, which cancels in
        // every population, so no motional average is needed.
        let rho = self.apply_pulse_train(&self.initial_up(), &[pulse], 0.0)?;
        Ok(self.bright(&settle(&rho, &self.scheme, &self.branching)))
    }

    /// One pulse, scan its energy: the excitation Rabi curve.
    pub fn run_single_pulse_scan(
        &self,
        energies_pj: &[f64],
        mode: &SamplingMode,
    ) -> Result<SequenceResult> {
        let points = (0..energies_pj.len())
            .into_par_iter()
            .map(|i| {
                let p = self.single_pulse_bright(energies_pj[i])?;
                self.observe(energies_pj[i], p, mode, i as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SequenceResult { points })
    }

    fn two_pulse_bright_at(
        &self,
        energy_pj: f64,
        delay_ps: f64,
        attenuation: f64,
        phi: f64,
    ) -> Result<f64> {
        let first = PulseSpec::new(energy_pj, Direction::Forward, 0.0, 0.0)?;
        let second = PulseSpec::new(energy_pj, Direction::Backward, attenuation, delay_ps)?;
        let rho = self.apply_pulse_train(&self.initial_up(), &[first, second], phi)?;
        Ok(self.bright(&settle(&rho, &self.scheme, &self.branching)))
    }

    /// Two counter-propagating pulses separated by `delay_ps`, the second
    /// attenuated; scan the (unattenuated) energy. The relative optical
    /// phase 2φ between the pulses makes this curve motion-sensitive.
    pub fn run_two_pulse_scan(
        &self,
        energies_pj: &[f64],
        delay_ps: f64,
        attenuation: f64,
        mode: &SamplingMode,
    ) -> Result<SequenceResult> {
        if delay_ps < 0.0 || delay_ps.is_nan() {
            return Err(Error::NegativeDuration(delay_ps));
        }
        let points = (0..energies_pj.len())
            .into_par_iter()
            .map(|i| {
                let e = energies_pj[i];
                let p =
                    self.average_bright(|phi| self.two_pulse_bright_at(e, delay_ps, attenuation, phi))?;
                self.observe(e, p, mode, i as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SequenceResult { points })
    }

    /// Ramsey interferometer: π/2 microwave, `laser_pulses` optical pulses
    /// (the second attenuated and delayed), wait ≫ τ, π/2 microwave at each
    /// analysis phase.
    pub fn run_ramsey(
        &self,
        laser_pulses: u8,
        energy_pj: f64,
        delay_ps: f64,
        attenuation: f64,
        mw_phases_rad: &[f64],
        mode: &SamplingMode,
    ) -> Result<RamseyFringe> {
        if laser_pulses > 2 {
            return Err(Error::InvalidArgument(format!(
                "a Ramsey sequence holds 0, 1, or 2 laser pulses, got {laser_pulses}"
            )));
        }
        if mw_phases_rad.len() < 8 {
            return Err(Error::InvalidArgument(format!(
                "a fringe needs ≥ 8 phase samples, got {}",
                mw_phases_rad.len()
            )));
        }
        if delay_ps < 0.0 || delay_ps.is_nan() {
            return Err(Error::NegativeDuration(delay_ps));
        }
        let pulses = match laser_pulses {
            0 => vec![],
            1 => vec![PulseSpec::new(energy_pj, Direction::Forward, 0.0, 0.0)?],
            _ => vec![
                PulseSpec::new(energy_pj, Direction::Forward, 0.0, 0.0)?,
                PulseSpec::new(energy_pj, Direction::Backward, attenuation, delay_ps)?,
            ],
        };

        let bright_at = |mw_phase: f64, phi: f64| -> Result<f64> {
            let rho = apply_microwave(&self.initial_up(), &self.scheme, &MicrowaveSpec::pi_half(0.0));
            let rho = if pulses.is_empty() {
                rho
            } else {
                self.apply_pulse_train(&rho, &pulses, phi)?
            };
            let rho = settle(&rho, &self.scheme, &self.branching);
            let rho = apply_microwave(&rho, &self.scheme, &MicrowaveSpec::pi_half(mw_phase));
            Ok(self.bright(&rho))
        };

        let p_bright = mw_phases_rad
            .par_iter()
            .map(|&mw| self.average_bright(|phi| bright_at(mw, phi)))
            .collect::<Result<Vec<_>>>()?;

        match mode {
            SamplingMode::Exact => {
                Ok(RamseyFringe { phases_rad: mw_phases_rad.to_vec(), p_bright, stderr: None })
            }
            SamplingMode::Sampled { shots, detection, seed } => {
                let mut sampled = Vec::with_capacity(p_bright.len());
                let mut errs = Vec::with_capacity(p_bright.len());
                for (i, &p) in p_bright.iter().enumerate() {
                    let hist =
                        simulate_histogram(p, *shots, detection, derive_seed(*seed, i as u64))?;
                    let fit = fit_bright_fraction(&hist, detection)?;
                    sampled.push(fit.p_hat);
                    errs.push(fit.stderr);
                }
                Ok(RamseyFringe {
                    phases_rad: mw_phases_rad.to_vec(),
                    p_bright: sampled,
                    stderr: Some(errs),
                })
            }
        }
    }

    /// Ramsey fringe contrast versus pulse energy, for one- or two-pulse
    /// insertion. Each point runs an exact fringe and fits it.
    pub fn run_contrast_scan(
        &self,
        energies_pj: &[f64],
        laser_pulses: u8,
        delay_ps: f64,
        attenuation: f64,
        n_phases: usize,
    ) -> Result<SequenceResult> {
        if !(1..=2).contains(&laser_pulses) {
            return Err(Error::InvalidArgument(
                "contrast scans insert 1 or 2 laser pulses".into(),
            ));
        }
        let grid = default_phase_grid(n_phases.max(8));
        let points = (0..energies_pj.len())
            .into_par_iter()
            .map(|i| {
                let fringe = self.run_ramsey(
                    laser_pulses,
                    energies_pj[i],
                    delay_ps,
                    attenuation,
                    &grid,
                    &SamplingMode::Exact,
                )?;
                Ok(ScanPoint { x: energies_pj[i], value: fringe.contrast()?, stderr: None })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SequenceResult { points })
    }

    /// Fringe phase versus delay between two π pulses — the frequency
    /// measurement. Optional Gaussian noise jitters each point's true delay
    /// and adds scatter to the extracted phase; the nominal delay is
    /// reported either way.
    pub fn run_phase_vs_delay(
        &self,
        delays_ps: &[f64],
        noise: &NoiseSpec,
        seed: u64,
    ) -> Result<Vec<PhaseDelayPoint>> {
        noise.validate()?;
        let energy = self.calib.pi_pulse_energy_pj();
        let grid = default_phase_grid(16);
        (0..delays_ps.len())
            .into_par_iter()
            .map(|i| {
                let nominal = delays_ps[i];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let mut draw = |sigma: f64| -> f64 {
                    if sigma > 0.0 {
                        Normal::new(0.0, sigma).expect("validated σ").sample(&mut rng)
                    } else {
                        0.0
                    }
                };
                let actual = (nominal + draw(noise.delay_jitter_ps)).max(0.0);
                let phase_kick = draw(noise.phase_noise_rad);
                let fringe =
                    self.run_ramsey(2, energy, actual, 0.0, &grid, &SamplingMode::Exact)?;
                let fit = fringe.fit()?;
                if !fit.phase_defined {
                    return Err(Error::Unidentifiable(format!(
                        "fringe at delay {nominal} ps has no contrast; its phase is undefined"
                    )));
                }
                Ok(PhaseDelayPoint {
                    delay_ps: nominal,
                    phase_rad: (fit.phase0 + phase_kick).rem_euclid(TAU),
                    stderr_rad: noise.phase_noise_rad,
                })
            })
            .collect()
    }
}
