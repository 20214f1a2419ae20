//! TOML run configuration: every knob of the simulator with experiment-ready
//! defaults, validated on parse so the runner only ever sees usable values.
//!
//! An empty file is a complete configuration. Unknown keys are rejected
//! rather than ignored — a typo'd knob should fail loudly, not silently run
//! the default.

use clap::ValueEnum;
use ionpulse::atomic::{AtomicConstants, SchemeMode};
use ionpulse::detection::DetectionModel;
use ionpulse::motion::MotionalState;
use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    RabiScan,
    TwoPulseScan,
    RamseyFringe,
    ContrastScan,
    PhaseVsDelay,
    DetectCalibrate,
}

impl Experiment {
    pub fn all() -> [Experiment; 6] {
        [
            Experiment::RabiScan,
            Experiment::TwoPulseScan,
            Experiment::RamseyFringe,
            Experiment::ContrastScan,
            Experiment::PhaseVsDelay,
            Experiment::DetectCalibrate,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RabiScan => "rabi_scan",
            Experiment::TwoPulseScan => "two_pulse_scan",
            Experiment::RamseyFringe => "ramsey_fringe",
            Experiment::ContrastScan => "contrast_scan",
            Experiment::PhaseVsDelay => "phase_vs_delay",
            Experiment::DetectCalibrate => "detect_calibrate",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Experiment::RabiScan => {
                "single-pulse bright fraction vs pulse energy, with a Rabi calibration fit"
            }
            Experiment::TwoPulseScan => {
                "two counter-propagating pulses: motion-averaged bright fraction vs energy"
            }
            Experiment::RamseyFringe => {
                "microwave Ramsey fringe with 0-2 inserted laser pulses, plus a sinusoid fit"
            }
            Experiment::ContrastScan => "Ramsey fringe contrast vs inserted-pulse energy",
            Experiment::PhaseVsDelay => {
                "fringe phase vs pulse separation, unwrapped and fitted to a frequency"
            }
            Experiment::DetectCalibrate => {
                "synthetic photon-count histogram and maximum-likelihood bright-fraction fit"
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Full,
    Clock,
}

impl Scheme {
    pub fn to_mode(self) -> SchemeMode {
        match self {
            Scheme::Full => SchemeMode::FullPi,
            Scheme::Clock => SchemeMode::ClockOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Fallback experiment when the command line gives none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    /// Rabi calibration, rad per √pJ.
    pub a: f64,
    pub seed: u64,
    /// Detection shots per scan point in sampled mode.
    pub shots: u64,
    pub mode: Mode,
    pub scheme: Scheme,
    /// Scan-parallelism bound; 0 uses every core.
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub constants: ConstantsConfig,
    pub motion: MotionConfig,
    pub detection: DetectionConfig,
    pub scan: ScanConfig,
    pub noise: NoiseConfig,
    pub obe: ObeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            a: 0.42,
            seed: 1,
            shots: 60_000,
            mode: Mode::Exact,
            scheme: Scheme::Full,
            threads: 0,
            out_dir: None,
            constants: ConstantsConfig::default(),
            motion: MotionConfig::default(),
            detection: DetectionConfig::default(),
            scan: ScanConfig::default(),
            noise: NoiseConfig::default(),
            obe: ObeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub ground_hf_splitting_ghz: f64,
    pub excited_hf_splitting_ghz: f64,
    /// Set to `inf` to switch spontaneous decay off.
    pub excited_lifetime_ns: f64,
    pub fine_structure_splitting_ghz: f64,
    pub pulse_bandwidth_ghz: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        let c = AtomicConstants::default();
        ConstantsConfig {
            ground_hf_splitting_ghz: c.ground_hf_splitting_ghz,
            excited_hf_splitting_ghz: c.excited_hf_splitting_ghz,
            excited_lifetime_ns: c.excited_lifetime_ns,
            fine_structure_splitting_ghz: c.fine_structure_splitting_ghz,
            pulse_bandwidth_ghz: c.pulse_bandwidth_ghz,
        }
    }
}

impl ConstantsConfig {
    pub fn to_constants(&self) -> AtomicConstants {
        AtomicConstants {
            ground_hf_splitting_ghz: self.ground_hf_splitting_ghz,
            excited_hf_splitting_ghz: self.excited_hf_splitting_ghz,
            excited_lifetime_ns: self.excited_lifetime_ns,
            fine_structure_splitting_ghz: self.fine_structure_splitting_ghz,
            pulse_bandwidth_ghz: self.pulse_bandwidth_ghz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub eta: f64,
    pub nbar: f64,
    /// Direct rms-phase override; omit to use η√(2n̄+1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_rad: Option<f64>,
}

impl Default for MotionConfig {
    fn default() -> Self {
        let m = MotionalState::default();
        MotionConfig { eta: m.eta, nbar: m.nbar, sigma_rad: None }
    }
}

impl MotionConfig {
    pub fn to_state(&self) -> MotionalState {
        MotionalState { eta: self.eta, nbar: self.nbar, sigma_override_rad: self.sigma_rad }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    /// Mean photon count of a bright ion over the detection window.
    pub bright_mean: f64,
    /// Mean background/dark count.
    pub dark_mean: f64,
    /// True bright fraction simulated by detect_calibrate.
    pub p_bright: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { bright_mean: 10.0, dark_mean: 0.2, p_bright: 1.0 / 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub energy_min_pj: f64,
    pub energy_max_pj: f64,
    pub energy_points: usize,
    /// Fixed pulse energy for ramsey_fringe; omit for a π pulse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_pj: Option<f64>,
    /// Separation of the two laser pulses.
    pub delay_ps: f64,
    /// Energy fraction removed from the second pulse; omit for the
    /// per-experiment default (0.6 where the second pulse is attenuated,
    /// 0 for the plain Ramsey revival).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attenuation: Option<f64>,
    /// Laser pulses inside a Ramsey sequence; omit for the per-experiment
    /// default (1 for contrast_scan, 2 for ramsey_fringe).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laser_pulses: Option<u8>,
    /// Analysis-phase samples per fringe.
    pub phase_points: usize,
    pub delay_min_ps: f64,
    pub delay_step_ps: f64,
    pub delay_points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            energy_min_pj: 0.0,
            energy_max_pj: 110.0,
            energy_points: 20,
            energy_pj: None,
            delay_ps: 680.0,
            attenuation: None,
            laser_pulses: None,
            phase_points: 16,
            delay_min_ps: 680.0,
            delay_step_ps: 25.0,
            delay_points: 21,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub delay_jitter_ps: f64,
    pub phase_noise_rad: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { delay_jitter_ps: 0.1, phase_noise_rad: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObeConfig {
    /// Replace instantaneous pulses with square pulses integrated through
    /// the optical Bloch equations.
    pub enabled: bool,
    pub width_ps: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for ObeConfig {
    fn default() -> Self {
        ObeConfig { enabled: false, width_ps: 1.0, atol: 1e-9, rtol: 1e-7 }
    }
}

/// Parse and validate; the error string carries the offending line for
/// syntax problems and the offending key name for range problems.
pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    config.validate()?;
    Ok(config)
}

/// Inverse of [`parse_config`]: the output reparses to an equal config.
pub fn serialize_config(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("validated config serializes")
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        fn finite_nonneg(name: &str, v: f64) -> Result<(), String> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be a finite number ≥ 0, got {v}"))
            }
        }

        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(format!("a must be > 0 (rad per √pJ), got {}", self.a));
        }
        if self.shots == 0 {
            return Err("shots must be ≥ 1".into());
        }
        self.constants.to_constants().validate().map_err(|e| e.to_string())?;
        self.motion.to_state().validate().map_err(|e| e.to_string())?;
        DetectionModel::new(self.detection.bright_mean, self.detection.dark_mean)
            .map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.detection.p_bright) {
            return Err(format!(
                "detection.p_bright must lie in [0, 1], got {}",
                self.detection.p_bright
            ));
        }

        let s = &self.scan;
        finite_nonneg("scan.energy_min_pj", s.energy_min_pj)?;
        if !(s.energy_max_pj.is_finite() && s.energy_max_pj > s.energy_min_pj) {
            return Err(format!(
                "scan.energy_max_pj must exceed scan.energy_min_pj, got {} ≤ {}",
                s.energy_max_pj, s.energy_min_pj
            ));
        }
        if s.energy_points < 2 {
            return Err(format!("scan.energy_points must be ≥ 2, got {}", s.energy_points));
        }
        if let Some(e) = s.energy_pj {
            finite_nonneg("scan.energy_pj", e)?;
        }
        finite_nonneg("scan.delay_ps", s.delay_ps)?;
        if let Some(att) = s.attenuation {
            if !(0.0..=1.0).contains(&att) {
                return Err(format!("scan.attenuation must lie in [0, 1], got {att}"));
            }
        }
        if let Some(n) = s.laser_pulses {
            if n > 2 {
                return Err(format!("scan.laser_pulses must be 0, 1, or 2, got {n}"));
            }
        }
        if s.phase_points < 8 {
            return Err(format!("scan.phase_points must be ≥ 8, got {}", s.phase_points));
        }
        finite_nonneg("scan.delay_min_ps", s.delay_min_ps)?;
        if !(s.delay_step_ps.is_finite() && s.delay_step_ps > 0.0) {
            return Err(format!("scan.delay_step_ps must be > 0, got {}", s.delay_step_ps));
        }
        if s.delay_points < 2 {
            return Err(format!("scan.delay_points must be ≥ 2, got {}", s.delay_points));
        }

        finite_nonneg("noise.delay_jitter_ps", self.noise.delay_jitter_ps)?;
        finite_nonneg("noise.phase_noise_rad", self.noise.phase_noise_rad)?;

        if !(self.obe.width_ps.is_finite() && self.obe.width_ps > 0.0) {
            return Err(format!("obe.width_ps must be > 0, got {}", self.obe.width_ps));
        }
        if !(self.obe.atol.is_finite() && self.obe.atol > 0.0) {
            return Err(format!("obe.atol must be > 0, got {}", self.obe.atol));
        }
        if !(self.obe.rtol.is_finite() && self.obe.rtol > 0.0) {
            return Err(format!("obe.rtol must be > 0, got {}", self.obe.rtol));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_full_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.a, 0.42);
        assert_eq!(cfg.constants.excited_lifetime_ns, 2.65);
        assert_eq!(cfg.constants.ground_hf_splitting_ghz, 14.530);
        assert_eq!(cfg.constants.excited_hf_splitting_ghz, 0.626);
    }

    #[test]
    fn negative_calibration_is_named_in_the_error() {
        let err = parse_config("a = -1").unwrap_err();
        assert!(err.contains("a must be > 0"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_the_line_number() {
        let err = parse_config("a = 0.42\nnot valid toml").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("pulse_energy = 3.0").unwrap_err();
        assert!(err.contains("pulse_energy"), "{err}");
        let err = parse_config("[scan]\nenergies = 4").unwrap_err();
        assert!(err.contains("energies"), "{err}");
    }

    #[test]
    fn range_violations_are_named() {
        for (text, needle) in [
            ("shots = 0", "shots"),
            ("[motion]\neta = -0.1", "Lamb-Dicke"),
            ("[detection]\nbright_mean = 0.1\ndark_mean = 0.2", "bright"),
            ("[detection]\np_bright = 1.5", "detection.p_bright"),
            ("[scan]\nenergy_points = 1", "scan.energy_points"),
            ("[scan]\nattenuation = 1.2", "scan.attenuation"),
            ("[scan]\nlaser_pulses = 3", "scan.laser_pulses"),
            ("[scan]\nphase_points = 4", "scan.phase_points"),
            ("[scan]\ndelay_step_ps = 0.0", "scan.delay_step_ps"),
            ("[noise]\nphase_noise_rad = -0.01", "noise.phase_noise_rad"),
            ("[obe]\nwidth_ps = 0.0", "obe.width_ps"),
            ("[constants]\nexcited_lifetime_ns = -2.0", "lifetime"),
        ] {
            let err = parse_config(text).unwrap_err();
            assert!(err.contains(needle), "{text:?} → {err}");
        }
    }

    #[test]
    fn serialize_then_parse_round_trips() {
        let text = r#"
            experiment = "ramsey_fringe"
            a = 0.40
            seed = 99
            mode = "sampled"
            scheme = "clock"
            threads = 2

            [constants]
            excited_lifetime_ns = 3.0

            [motion]
            sigma_rad = 1.9

            [scan]
            energy_pj = 55.0
            attenuation = 0.6
            laser_pulses = 2

            [obe]
            enabled = true
        "#;
        let cfg = parse_config(text).unwrap();
        let cfg2 = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, cfg2);

        // Defaults round-trip too.
        let d = RunConfig::default();
        assert_eq!(parse_config(&serialize_config(&d)).unwrap(), d);
    }

    #[test]
    fn infinite_lifetime_means_decay_off_and_is_accepted() {
        let cfg = parse_config("[constants]\nexcited_lifetime_ns = inf").unwrap();
        assert!(cfg.constants.excited_lifetime_ns.is_infinite());
    }

    #[test]
    fn registry_is_six_unique_names() {
        let names: Vec<&str> = Experiment::all().iter().map(|e| e.name()).collect();
        assert_eq!(names.len(), 6);
        let mut unique = names.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 6);
        for e in Experiment::all() {
            assert!(!e.describe().is_empty());
        }
    }
}
