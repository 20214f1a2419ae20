//! Experiment dispatch and artifact writing.
//!
//! Every experiment writes a CSV whose `#`-prefixed header records the knobs
//! that produced it, and — where a canonical fit exists — a `key = value`
//! report next to it. All output is assembled in scan order from per-point
//! derived seeds, so a (config, seed) pair fixes every byte regardless of
//! thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ionpulse::analysis::{
    excited_splitting, fit_frequency, fit_rabi, rabi_model, unwrap_phases, Measurement,
};
use ionpulse::atomic::ghz_to_rad_per_ps;
use ionpulse::detection::{fit_bright_fraction, simulate_histogram, DetectionModel};
use ionpulse::dynamics::RabiCalibration;
use ionpulse::experiments::{
    default_phase_grid, NoiseSpec, PulseModel, SamplingMode, ScanPoint, Simulator,
};
use ionpulse::ode::Tolerances;

use crate::config::{Experiment, Mode, RunConfig};

/// Fraction of the second pulse's energy removed in the experiments that
/// attenuate it, when the config does not say otherwise.
const DEFAULT_ATTENUATION: f64 = 0.6;

pub fn execute(cfg: &RunConfig, experiment: Experiment, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", out_dir.display()))?;

    let body = || match experiment {
        Experiment::RabiScan => rabi_scan(cfg, out_dir),
        Experiment::TwoPulseScan => two_pulse_scan(cfg, out_dir),
        Experiment::RamseyFringe => ramsey_fringe(cfg, out_dir),
        Experiment::ContrastScan => contrast_scan(cfg, out_dir),
        Experiment::PhaseVsDelay => phase_vs_delay(cfg, out_dir),
        Experiment::DetectCalibrate => detect_calibrate(cfg, out_dir),
    };

    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| format!("cannot build a {}-thread pool: {e}", cfg.threads))?;
        pool.install(body)
    } else {
        body()
    }
}

fn build_simulator(cfg: &RunConfig) -> Result<Simulator, String> {
    let calib = RabiCalibration::new(cfg.a).map_err(|e| e.to_string())?;
    let mut sim = Simulator::new(
        cfg.scheme.to_mode(),
        cfg.constants.to_constants(),
        calib,
        cfg.motion.to_state(),
    )
    .map_err(|e| e.to_string())?;
    if cfg.obe.enabled {
        sim = sim.with_pulse_model(PulseModel::SquareObe {
            width_ps: cfg.obe.width_ps,
            tol: Tolerances { atol: cfg.obe.atol, rtol: cfg.obe.rtol },
        });
    }
    Ok(sim)
}

fn detection_model(cfg: &RunConfig) -> Result<DetectionModel, String> {
    DetectionModel::new(cfg.detection.bright_mean, cfg.detection.dark_mean)
        .map_err(|e| e.to_string())
}

fn sampling_mode(cfg: &RunConfig) -> Result<SamplingMode, String> {
    Ok(match cfg.mode {
        Mode::Exact => SamplingMode::Exact,
        Mode::Sampled => SamplingMode::Sampled {
            shots: cfg.shots,
            detection: detection_model(cfg)?,
            seed: cfg.seed,
        },
    })
}

fn mode_name(cfg: &RunConfig) -> &'static str {
    match cfg.mode {
        Mode::Exact => "exact",
        Mode::Sampled => "sampled",
    }
}

fn energy_grid(cfg: &RunConfig) -> Vec<f64> {
    let s = &cfg.scan;
    let n = s.energy_points;
    (0..n)
        .map(|i| {
            s.energy_min_pj
                + (s.energy_max_pj - s.energy_min_pj) * i as f64 / (n - 1) as f64
        })
        .collect()
}

/// A CSV with `# key = value` metadata lines above the column header.
struct CsvDoc {
    meta: Vec<(String, String)>,
    columns: &'static str,
    rows: Vec<String>,
}

impl CsvDoc {
    fn new(columns: &'static str) -> CsvDoc {
        CsvDoc { meta: Vec::new(), columns, rows: Vec::new() }
    }

    fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "{}", self.columns).unwrap();
        for row in &self.rows {
            writeln!(out, "{row}").unwrap();
        }
        out
    }
}

fn scan_rows(points: &[ScanPoint]) -> Vec<String> {
    points
        .iter()
        .map(|p| format!("{},{},{}", p.x, p.value, p.stderr.unwrap_or(0.0)))
        .collect()
}

fn write_artifact(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, String> {
    let path = out_dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

fn common_meta(doc: &mut CsvDoc, cfg: &RunConfig, experiment: Experiment) {
    doc.meta("experiment", experiment.name());
    doc.meta("a", cfg.a);
    doc.meta("mode", mode_name(cfg));
    if matches!(cfg.mode, Mode::Sampled) {
        doc.meta("shots", cfg.shots);
        doc.meta("seed", cfg.seed);
    }
    if cfg.obe.enabled {
        doc.meta("pulse_model", format!("square_obe width_ps={}", cfg.obe.width_ps));
    }
}

struct Report(String);

impl Report {
    fn new() -> Report {
        Report(String::new())
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.0, "{key} = {value}").unwrap();
        self
    }
}

fn rabi_scan(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let sim = build_simulator(cfg)?;
    let energies = energy_grid(cfg);
    let scan = sim
        .run_single_pulse_scan(&energies, &sampling_mode(cfg)?)
        .map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("scan_value,p_bright,stderr");
    common_meta(&mut doc, cfg, Experiment::RabiScan);
    doc.meta("energy_min_pj", cfg.scan.energy_min_pj);
    doc.meta("energy_max_pj", cfg.scan.energy_max_pj);
    doc.rows = scan_rows(&scan.points);

    let points: Vec<Measurement> = scan
        .points
        .iter()
        .map(|p| Measurement::new(p.x, p.value, p.stderr.unwrap_or(0.0)))
        .collect();
    let fit = fit_rabi(&points).map_err(|e| e.to_string())?;
    let mut report = Report::new();
    report
        .line("fitted_a_per_sqrt_pj", fit.a)
        .line("fitted_a_stderr", fit.a_stderr)
        .line("pi_pulse_energy_pj", (std::f64::consts::PI / fit.a).powi(2))
        .line("rss", fit.rss)
        .line("points", scan.points.len());

    let mut residuals = CsvDoc::new("scan_value,residual");
    residuals.meta("experiment", Experiment::RabiScan.name());
    residuals.meta("fitted_a_per_sqrt_pj", fit.a);
    residuals.rows = scan
        .points
        .iter()
        .map(|p| format!("{},{}", p.x, p.value - rabi_model(fit.a, p.x)))
        .collect();

    Ok(vec![
        write_artifact(out_dir, "rabi_scan.csv", &doc.render())?,
        write_artifact(out_dir, "rabi_scan_report.txt", &report.0)?,
        write_artifact(out_dir, "rabi_scan_residuals.csv", &residuals.render())?,
    ])
}

fn two_pulse_scan(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let sim = build_simulator(cfg)?;
    let attenuation = cfg.scan.attenuation.unwrap_or(DEFAULT_ATTENUATION);
    let scan = sim
        .run_two_pulse_scan(
            &energy_grid(cfg),
            cfg.scan.delay_ps,
            attenuation,
            &sampling_mode(cfg)?,
        )
        .map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("scan_value,p_bright,stderr");
    common_meta(&mut doc, cfg, Experiment::TwoPulseScan);
    doc.meta("delay_ps", cfg.scan.delay_ps);
    doc.meta("attenuation", attenuation);
    doc.meta("sigma_rad", sim.motion().effective_sigma());
    doc.rows = scan_rows(&scan.points);

    Ok(vec![write_artifact(out_dir, "two_pulse_scan.csv", &doc.render())?])
}

fn ramsey_fringe(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let sim = build_simulator(cfg)?;
    let pulses = cfg.scan.laser_pulses.unwrap_or(2);
    let energy = cfg.scan.energy_pj.unwrap_or_else(|| sim.calibration().pi_pulse_energy_pj());
    let attenuation = cfg.scan.attenuation.unwrap_or(0.0);
    let grid = default_phase_grid(cfg.scan.phase_points);
    let fringe = sim
        .run_ramsey(
            pulses,
            energy,
            cfg.scan.delay_ps,
            attenuation,
            &grid,
            &sampling_mode(cfg)?,
        )
        .map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("scan_value,p_bright,stderr");
    common_meta(&mut doc, cfg, Experiment::RamseyFringe);
    doc.meta("laser_pulses", pulses);
    doc.meta("energy_pj", energy);
    doc.meta("delay_ps", cfg.scan.delay_ps);
    doc.meta("attenuation", attenuation);
    for (i, (&phase, &p)) in fringe.phases_rad.iter().zip(&fringe.p_bright).enumerate() {
        let stderr = fringe.stderr.as_ref().map_or(0.0, |s| s[i]);
        doc.rows.push(format!("{phase},{p},{stderr}"));
    }

    let fit = fringe.fit().map_err(|e| e.to_string())?;
    let mut report = Report::new();
    report
        .line("contrast", 2.0 * fit.amplitude)
        .line("contrast_stderr", 2.0 * fit.amplitude_stderr)
        .line("offset", fit.offset)
        .line("offset_stderr", fit.offset_stderr);
    if fit.phase_defined {
        report.line("phase_rad", fit.phase0).line("phase_stderr_rad", fit.phase0_stderr);
    }
    report.line("rss", fit.rss).line("points", fringe.phases_rad.len());

    let mut residuals = CsvDoc::new("scan_value,residual");
    residuals.meta("experiment", Experiment::RamseyFringe.name());
    residuals.meta("contrast", 2.0 * fit.amplitude);
    residuals.rows = fringe
        .phases_rad
        .iter()
        .zip(&fringe.p_bright)
        .map(|(&x, &y)| {
            format!("{x},{}", y - fit.offset - fit.amplitude * (x - fit.phase0).cos())
        })
        .collect();

    Ok(vec![
        write_artifact(out_dir, "ramsey_fringe.csv", &doc.render())?,
        write_artifact(out_dir, "ramsey_fringe_report.txt", &report.0)?,
        write_artifact(out_dir, "ramsey_fringe_residuals.csv", &residuals.render())?,
    ])
}

fn contrast_scan(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let sim = build_simulator(cfg)?;
    let pulses = cfg.scan.laser_pulses.unwrap_or(1);
    let attenuation = cfg.scan.attenuation.unwrap_or(DEFAULT_ATTENUATION);
    let scan = sim
        .run_contrast_scan(
            &energy_grid(cfg),
            pulses,
            cfg.scan.delay_ps,
            attenuation,
            cfg.scan.phase_points,
        )
        .map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("scan_value,contrast,stderr");
    common_meta(&mut doc, cfg, Experiment::ContrastScan);
    doc.meta("laser_pulses", pulses);
    if pulses == 2 {
        doc.meta("delay_ps", cfg.scan.delay_ps);
        doc.meta("attenuation", attenuation);
    }
    doc.rows = scan_rows(&scan.points);

    Ok(vec![write_artifact(out_dir, "contrast_scan.csv", &doc.render())?])
}

fn phase_vs_delay(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let sim = build_simulator(cfg)?;
    let s = &cfg.scan;
    let delays: Vec<f64> =
        (0..s.delay_points).map(|i| s.delay_min_ps + s.delay_step_ps * i as f64).collect();
    let noise = NoiseSpec {
        delay_jitter_ps: cfg.noise.delay_jitter_ps,
        phase_noise_rad: cfg.noise.phase_noise_rad,
    };
    let points = sim.run_phase_vs_delay(&delays, &noise, cfg.seed).map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("delay_ps,phase_rad,stderr_rad");
    common_meta(&mut doc, cfg, Experiment::PhaseVsDelay);
    doc.meta("seed", cfg.seed);
    doc.meta("delay_jitter_ps", noise.delay_jitter_ps);
    doc.meta("phase_noise_rad", noise.phase_noise_rad);
    for p in &points {
        doc.rows.push(format!("{},{},{}", p.delay_ps, p.phase_rad, p.stderr_rad));
    }

    // Unwrap against the splitting-difference prediction, then fit.
    let phases: Vec<f64> = points.iter().map(|p| p.phase_rad).collect();
    let seed_slope = ghz_to_rad_per_ps(cfg.constants.ground_hf_splitting_ghz);
    let unwrapped = unwrap_phases(&delays, &phases, seed_slope).map_err(|e| e.to_string())?;
    let fit = fit_frequency(
        &delays,
        &unwrapped,
        noise.delay_jitter_ps,
        noise.phase_noise_rad,
        seed_slope,
    )
    .map_err(|e| e.to_string())?;
    let excited =
        excited_splitting(fit.frequency_ghz, fit.stderr_ghz, cfg.constants.ground_hf_splitting_ghz)
            .map_err(|e| e.to_string())?;

    let mut report = Report::new();
    report
        .line("frequency_ghz", fit.frequency_ghz)
        .line("frequency_stderr_ghz", fit.stderr_ghz)
        .line("slope_rad_per_ps", fit.slope_rad_per_ps)
        .line("intercept_rad", fit.intercept_rad)
        .line("ground_splitting_ghz", cfg.constants.ground_hf_splitting_ghz)
        .line("excited_splitting_ghz", excited.splitting_ghz)
        .line("excited_splitting_stderr_ghz", excited.stderr_ghz)
        .line("points", points.len());

    let mut residuals = CsvDoc::new("delay_ps,residual_rad");
    residuals.meta("experiment", Experiment::PhaseVsDelay.name());
    residuals.meta("frequency_ghz", fit.frequency_ghz);
    residuals.rows = delays
        .iter()
        .zip(&unwrapped)
        .map(|(&t, &phi)| format!("{t},{}", phi - fit.slope_rad_per_ps * t - fit.intercept_rad))
        .collect();

    Ok(vec![
        write_artifact(out_dir, "phase_vs_delay.csv", &doc.render())?,
        write_artifact(out_dir, "phase_vs_delay_report.txt", &report.0)?,
        write_artifact(out_dir, "phase_vs_delay_residuals.csv", &residuals.render())?,
    ])
}

fn detect_calibrate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let model = detection_model(cfg)?;
    let p_true = cfg.detection.p_bright;
    let hist = simulate_histogram(p_true, cfg.shots, &model, cfg.seed).map_err(|e| e.to_string())?;
    let fit = fit_bright_fraction(&hist, &model).map_err(|e| e.to_string())?;

    let mut doc = CsvDoc::new("counts,shots");
    common_meta(&mut doc, cfg, Experiment::DetectCalibrate);
    doc.meta("shots", cfg.shots);
    doc.meta("seed", cfg.seed);
    doc.meta("bright_mean", cfg.detection.bright_mean);
    doc.meta("dark_mean", cfg.detection.dark_mean);
    doc.meta("true_p_bright", p_true);
    for (&count, &n) in hist.bins() {
        doc.rows.push(format!("{count},{n}"));
    }

    let mut report = Report::new();
    report
        .line("p_hat", fit.p_hat)
        .line("p_stderr", fit.stderr)
        .line("log_likelihood", fit.log_likelihood)
        .line("true_p_bright", p_true)
        .line("shots", cfg.shots);

    Ok(vec![
        write_artifact(out_dir, "detect_calibrate.csv", &doc.render())?,
        write_artifact(out_dir, "detect_calibrate_report.txt", &report.0)?,
    ])
}
