//! Hyperfine level structure of ¹¹¹Cd⁺ (nuclear spin I = 1/2) and the dipole
//! couplings between the 5s ²S₁/₂ ground and 5p ²P₃/₂ excited manifolds.
//!
//! Ground manifold: F = 0 (one state) and F = 1 (three states), split by
//! 14.530 GHz.  Excited manifold: F′ = 1 and F′ = 2, split by 0.626 GHz.
//! The clock qubit lives on the two m = 0 ground states,
//!
//! ```text
//! |↑⟩ = |S₁/₂, F=0, m=0⟩      |↑′⟩ = |P₃/₂, F′=1, m=0⟩
//! |↓⟩ = |S₁/₂, F=1, m=0⟩      |↓′⟩ = |P₃/₂, F′=2, m=0⟩
//! ```
//!
//! π-polarized light (Δm = 0) couples |↑⟩ ↔ |↑′⟩ and |↓⟩ ↔ |↓′⟩ with equal
//! strength, while |↑⟩ ↔ |↓′⟩ (ΔF = 2) and |↓⟩ ↔ |↑′⟩ (vanishing
//! ⟨1,0;1,0|1,0⟩) are forbidden — the selection rules that make the clock
//! qubit map cleanly onto the excited clock pair.
//!
//! All coupling amplitudes and decay branching fractions are computed from
//! first principles: each hyperfine state is expanded over |m_J, m_I⟩ with
//! Clebsch–Gordan coefficients and the fine-structure Wigner–Eckart factor
//! ⟨½ m_J; 1 q | 3/2 m_J+q⟩ is applied, so the numbers (2/3, 1/6, …) are
//! derived, not transcribed.

use nalgebra::DMatrix;

use crate::angular::clebsch_gordan;
use crate::error::{Error, Result};

/// Electronic spin-orbit quantum numbers of the two manifolds in play.
/// The 5p ²P₁/₂ level sits ~74 THz below ²P₃/₂ and is never part of a scheme.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    /// 5s ²S₁/₂ ground manifold (J = 1/2).
    S12,
    /// 5p ²P₃/₂ excited manifold (J = 3/2).
    P32,
}

impl Manifold {
    pub fn j(self) -> f64 {
        match self {
            Manifold::S12 => 0.5,
            Manifold::P32 => 1.5,
        }
    }
}

/// Nuclear spin of ¹¹¹Cd.
pub const NUCLEAR_SPIN: f64 = 0.5;

/// A single hyperfine Zeeman state |manifold; F, m_F⟩.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    pub manifold: Manifold,
    pub f: u8,
    pub mf: i8,
}

impl Level {
    /// Dark clock state |↑⟩ = |S₁/₂, F=0, m=0⟩.
    pub const UP: Level = Level { manifold: Manifold::S12, f: 0, mf: 0 };
    /// Bright clock state |↓⟩ = |S₁/₂, F=1, m=0⟩.
    pub const DOWN: Level = Level { manifold: Manifold::S12, f: 1, mf: 0 };
    /// Excited partner of |↑⟩: |↑′⟩ = |P₃/₂, F′=1, m=0⟩.
    pub const UP_PRIME: Level = Level { manifold: Manifold::P32, f: 1, mf: 0 };
    /// Excited partner of |↓⟩: |↓′⟩ = |P₃/₂, F′=2, m=0⟩.
    pub const DOWN_PRIME: Level = Level { manifold: Manifold::P32, f: 2, mf: 0 };

    pub fn new(manifold: Manifold, f: u8, mf: i8) -> Result<Level> {
        let valid_f = match manifold {
            Manifold::S12 => f <= 1,
            Manifold::P32 => f == 1 || f == 2,
        };
        if !valid_f {
            return Err(Error::InvalidQuantumNumbers(format!(
                "F = {f} does not occur in {manifold:?} with I = 1/2"
            )));
        }
        if i16::from(mf).abs() > i16::from(f) {
            return Err(Error::InvalidQuantumNumbers(format!("|m_F| = {mf} exceeds F = {f}")));
        }
        Ok(Level { manifold, f, mf })
    }

    pub fn is_ground(&self) -> bool {
        self.manifold == Manifold::S12
    }

    pub fn is_excited(&self) -> bool {
        self.manifold == Manifold::P32
    }

    /// Short human-readable label, e.g. `S(F=1,m=-1)` or `P(F'=2,m=0)`.
    pub fn label(&self) -> String {
        match self.manifold {
            Manifold::S12 => format!("S(F={},m={})", self.f, self.mf),
            Manifold::P32 => format!("P(F'={},m={})", self.f, self.mf),
        }
    }
}

/// Which subset of levels a simulation tracks.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SchemeMode {
    /// The four clock levels only: |↑⟩, |↓⟩, |↑′⟩, |↓′⟩.
    ClockOnly,
    /// All ten levels reachable under π drive and spontaneous decay.
    FullPi,
}

/// An ordered basis of levels: ground states first, then excited states.
#[derive(Clone, Debug)]
pub struct LevelScheme {
    mode: SchemeMode,
    levels: Vec<Level>,
    n_ground: usize,
}

/// Assemble the level basis for the requested mode.
///
/// `FullPi` yields ten levels: ground (0,0), (1,-1), (1,0), (1,+1) followed by
/// excited F′=1 m∈{-1,0,1} and F′=2 m∈{-1,0,1} (the m′=±2 states of F′=2 are
/// unreachable under π drive and π/σ decay from the driven states... they are
/// excluded along with everything outside S₁/₂/P₃/₂).
pub fn build_level_scheme(mode: SchemeMode) -> LevelScheme {
    let levels = match mode {
        SchemeMode::ClockOnly => vec![Level::UP, Level::DOWN, Level::UP_PRIME, Level::DOWN_PRIME],
        SchemeMode::FullPi => {
            let mut v = vec![Level::UP];
            for mf in [-1i8, 0, 1] {
                v.push(Level { manifold: Manifold::S12, f: 1, mf });
            }
            for f in [1u8, 2] {
                for mf in [-1i8, 0, 1] {
                    v.push(Level { manifold: Manifold::P32, f, mf });
                }
            }
            v
        }
    };
    let n_ground = levels.iter().filter(|l| l.is_ground()).count();
    debug_assert!(levels[..n_ground].iter().all(Level::is_ground));
    LevelScheme { mode, levels, n_ground }
}

impl LevelScheme {
    pub fn mode(&self) -> SchemeMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> Level {
        self.levels[index]
    }

    pub fn index_of(&self, level: Level) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    pub fn require_index(&self, level: Level) -> Result<usize> {
        self.index_of(level).ok_or_else(|| Error::LevelNotInScheme(level.label()))
    }

    pub fn n_ground(&self) -> usize {
        self.n_ground
    }

    /// Basis indices of ground levels (always the leading block).
    pub fn ground_indices(&self) -> std::ops::Range<usize> {
        0..self.n_ground
    }

    /// Basis indices of excited levels (always the trailing block).
    pub fn excited_indices(&self) -> std::ops::Range<usize> {
        self.n_ground..self.levels.len()
    }

    /// Indices of the bright (ground F = 1) levels; all of them scatter on the
    /// cycling detection transition, F = 0 stays dark.
    pub fn bright_indices(&self) -> Vec<usize> {
        self.ground_indices().filter(|&i| self.levels[i].f == 1).collect()
    }

    pub fn up(&self) -> usize {
        self.index_of(Level::UP).expect("every scheme contains the clock states")
    }

    pub fn down(&self) -> usize {
        self.index_of(Level::DOWN).expect("every scheme contains the clock states")
    }

    pub fn up_prime(&self) -> usize {
        self.index_of(Level::UP_PRIME).expect("every scheme contains the clock states")
    }

    pub fn down_prime(&self) -> usize {
        self.index_of(Level::DOWN_PRIME).expect("every scheme contains the clock states")
    }
}

/// Measured constants of the ¹¹¹Cd⁺ system. Defaults are the accepted values;
/// individual fields can be overridden (e.g. infinite lifetime to switch decay
/// off in analytic checks).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AtomicConstants {
    /// Ground-state hyperfine splitting in GHz (F=0 ↔ F=1 of S₁/₂).
    pub ground_hf_splitting_ghz: f64,
    /// Excited-state hyperfine splitting in GHz (F′=1 ↔ F′=2 of P₃/₂).
    pub excited_hf_splitting_ghz: f64,
    /// Radiative lifetime of P₃/₂ in ns.
    pub excited_lifetime_ns: f64,
    /// S₁/₂ → P₃/₂ vs P₁/₂ fine-structure splitting in GHz. Only used to
    /// sanity-check the bandwidth regime, never in dynamics.
    pub fine_structure_splitting_ghz: f64,
    /// Optical bandwidth of the picosecond pulses in GHz (regime check only).
    pub pulse_bandwidth_ghz: f64,
}

impl Default for AtomicConstants {
    fn default() -> Self {
        AtomicConstants {
            ground_hf_splitting_ghz: 14.530,
            excited_hf_splitting_ghz: 0.626,
            excited_lifetime_ns: 2.65,
            fine_structure_splitting_ghz: 74_000.0,
            pulse_bandwidth_ghz: 420.0,
        }
    }
}

impl AtomicConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ground_hf_splitting_ghz", self.ground_hf_splitting_ghz),
            ("excited_hf_splitting_ghz", self.excited_hf_splitting_ghz),
            ("excited_lifetime_ns", self.excited_lifetime_ns),
            ("fine_structure_splitting_ghz", self.fine_structure_splitting_ghz),
            ("pulse_bandwidth_ghz", self.pulse_bandwidth_ghz),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::InvalidConstants(format!("{name} must be positive, got {value}")));
            }
            // An infinite lifetime is the documented way to switch decay off;
            // every other constant must be finite.
            if value.is_infinite() && name != "excited_lifetime_ns" {
                return Err(Error::InvalidConstants(format!("{name} must be finite")));
            }
        }
        if self.excited_hf_splitting_ghz >= self.ground_hf_splitting_ghz {
            return Err(Error::InvalidConstants(
                "excited hyperfine splitting must be smaller than the ground splitting".into(),
            ));
        }
        Ok(())
    }

    /// Qubit frequency difference Δω_HF/2π between ground and excited clock
    /// splittings, in GHz. This is what a Ramsey phase-vs-delay scan measures.
    pub fn hf_splitting_difference_ghz(&self) -> f64 {
        self.ground_hf_splitting_ghz - self.excited_hf_splitting_ghz
    }

    /// Same difference as an angular rate in rad/ps.
    pub fn hf_splitting_difference_rad_per_ps(&self) -> f64 {
        ghz_to_rad_per_ps(self.hf_splitting_difference_ghz())
    }

    /// Decay rate Γ = 1/τ in 1/ps (0 for an infinite lifetime).
    pub fn gamma_per_ps(&self) -> f64 {
        if self.excited_lifetime_ns.is_infinite() {
            0.0
        } else {
            1.0 / (self.excited_lifetime_ns * 1e3)
        }
    }

    /// True when the pulse bandwidth cleanly separates the scales it must:
    /// much wider than both hyperfine splittings, much narrower than the
    /// fine-structure splitting.
    pub fn bandwidth_regime_holds(&self) -> bool {
        self.pulse_bandwidth_ghz > 10.0 * self.ground_hf_splitting_ghz
            && self.fine_structure_splitting_ghz > 10.0 * self.pulse_bandwidth_ghz
    }
}

/// Convert a frequency in GHz to an angular rate in rad/ps.
pub fn ghz_to_rad_per_ps(f_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_ghz * 1e-3
}

/// Dipole amplitude ⟨P₃/₂ F′ m′| d_q |S₁/₂ F m⟩ up to the common J-level
/// reduced matrix element: expand both hyperfine states over |m_J, m_I⟩ and
/// apply the fine-structure factor ⟨½ m_J; 1 q | 3/2 m_J + q⟩.
fn dipole_amplitude(ground: Level, excited: Level, q: i8) -> f64 {
    debug_assert!(ground.is_ground() && excited.is_excited());
    if i16::from(ground.mf) + i16::from(q) != i16::from(excited.mf) {
        return 0.0;
    }
    let fg = f64::from(ground.f);
    let mg = f64::from(ground.mf);
    let fe = f64::from(excited.f);
    let me = f64::from(excited.mf);
    let qf = f64::from(q);
    let mut amp = 0.0;
    for tmj in [-1i8, 1] {
        let mj = f64::from(tmj) / 2.0;
        let mi = mg - mj;
        if mi.abs() > NUCLEAR_SPIN {
            continue;
        }
        let mje = mj + qf;
        if mje.abs() > Manifold::P32.j() {
            continue;
        }
        let g_cg = clebsch_gordan(Manifold::S12.j(), mj, NUCLEAR_SPIN, mi, fg, mg)
            .expect("valid quantum numbers by construction");
        let e_cg = clebsch_gordan(Manifold::P32.j(), mje, NUCLEAR_SPIN, mi, fe, me)
            .expect("valid quantum numbers by construction");
        let d_cg = clebsch_gordan(Manifold::S12.j(), mj, 1.0, qf, Manifold::P32.j(), mje)
            .expect("valid quantum numbers by construction");
        amp += g_cg * e_cg * d_cg;
    }
    amp
}

/// Snap selection-rule zeros that survive only as rounding dust.
fn snap(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        0.0
    } else {
        x
    }
}

/// Spontaneous-emission branching fractions out of each excited level.
///
/// Entry (e, g) is the fraction of the total decay rate Γ of excited level e
/// that feeds ground level g; every row sums to 1.  The decay rate scale
/// Γ = 1/τ is kept alongside so consumers never mix tables and lifetimes from
/// different sources.
#[derive(Clone, Debug)]
pub struct BranchingTable {
    /// n_excited × n_ground fractions, indexed by position within the excited
    /// and ground blocks of the scheme.
    fractions: DMatrix<f64>,
    n_ground: usize,
    gamma_per_ps: f64,
}

/// Compute the branching table for a scheme.
///
/// Rates go as |⟨F m|d_q|F′ m′⟩|², q = m′ − m ∈ {−1, 0, +1}, normalized per
/// excited level.  In `ClockOnly` mode decays to absent Zeeman states are
/// folded onto the m = 0 representative of the same F manifold, preserving the
/// bright/dark split (the observable) while keeping rows normalized.
pub fn branching_table(scheme: &LevelScheme, constants: &AtomicConstants) -> BranchingTable {
    let n_g = scheme.n_ground();
    let n_e = scheme.len() - n_g;
    let mut fractions = DMatrix::<f64>::zeros(n_e, n_g);

    // Physical decay targets, present in the scheme or not.
    let mut physical_targets = vec![Level::UP];
    for mf in [-1i8, 0, 1] {
        physical_targets.push(Level { manifold: Manifold::S12, f: 1, mf });
    }

    for (row, e_idx) in scheme.excited_indices().enumerate() {
        let excited = scheme.level(e_idx);
        let mut total = 0.0;
        for &target in &physical_targets {
            let q = i16::from(excited.mf) - i16::from(target.mf);
            if q.abs() > 1 {
                continue;
            }
            let amp = dipole_amplitude(target, excited, q as i8);
            let rate = snap(amp * amp);
            if rate == 0.0 {
                continue;
            }
            // Fold onto the m = 0 representative when the true target is not
            // tracked (ClockOnly mode).
            let dest = scheme.index_of(target).unwrap_or_else(|| {
                scheme
                    .index_of(Level { manifold: Manifold::S12, f: target.f, mf: 0 })
                    .expect("both F manifolds have an m = 0 state in every scheme")
            });
            fractions[(row, dest)] += rate;
            total += rate;
        }
        debug_assert!(total > 0.0, "every P3/2 level decays");
        for g in 0..n_g {
            fractions[(row, g)] /= total;
        }
    }

    BranchingTable { fractions, n_ground: n_g, gamma_per_ps: constants.gamma_per_ps() }
}

impl BranchingTable {
    /// Branching fraction from excited basis index `e` to ground basis index `g`.
    pub fn fraction(&self, e: usize, g: usize) -> f64 {
        debug_assert!(g < self.n_ground && e >= self.n_ground);
        self.fractions[(e - self.n_ground, g)]
    }

    pub fn gamma_per_ps(&self) -> f64 {
        self.gamma_per_ps
    }

    pub fn n_excited(&self) -> usize {
        self.fractions.nrows()
    }

    pub fn row_sum(&self, e: usize) -> f64 {
        self.fractions.row(e - self.n_ground).sum()
    }
}

/// Relative π-transition amplitudes between ground and excited levels,
/// normalized so the |↑⟩ ↔ |↑′⟩ entry is exactly 1 (the transition the Rabi
/// calibration θ = a√E refers to).
#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    /// n_ground × n_excited signed amplitudes (position indices).
    amplitudes: DMatrix<f64>,
    n_ground: usize,
}

/// Compute the π (Δm = 0) coupling matrix for a scheme.
pub fn pi_coupling_matrix(scheme: &LevelScheme) -> CouplingMatrix {
    let n_g = scheme.n_ground();
    let n_e = scheme.len() - n_g;
    let mut amplitudes = DMatrix::<f64>::zeros(n_g, n_e);
    let norm = dipole_amplitude(Level::UP, Level::UP_PRIME, 0);
    debug_assert!(norm > 0.0);
    for g in scheme.ground_indices() {
        for (col, e_idx) in scheme.excited_indices().enumerate() {
            let amp = dipole_amplitude(scheme.level(g), scheme.level(e_idx), 0);
            amplitudes[(g, col)] = snap(amp / norm);
        }
    }
    CouplingMatrix { amplitudes, n_ground: n_g }
}

impl CouplingMatrix {
    /// Signed relative amplitude between ground basis index `g` and excited
    /// basis index `e`; 0 for uncoupled pairs.
    pub fn amplitude(&self, g: usize, e: usize) -> f64 {
        debug_assert!(g < self.n_ground && e >= self.n_ground);
        self.amplitudes[(g, e - self.n_ground)]
    }

    pub fn n_ground(&self) -> usize {
        self.n_ground
    }
}
