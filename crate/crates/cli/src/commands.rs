//! The four subcommands. Each returns an [`Outcome`] whose code becomes the
//! process exit status.

use std::path::Path;

use bkp_core::baker::{
    bloch_multipliers, bloch_residuals, eigen_residual, linear_problem_residual,
    on_shell_velocities, probe_points,
};
use bkp_core::dynamics::IntegrateOptions;
use bkp_core::spectral::{involution_residual, j_limit_lambda, j_limit_residual};
use bkp_core::{
    integrals, integrate, spectral_poly, verify_all, wave_data, IdentityReport, Lattice, Model,
    PoleState, WaveData, C64,
};
use serde::Serialize;

use crate::config::{ConfigError, RawConfig, RunConfig, Thresholds};
use crate::output::{residuals_csv, spectral_csv, trajectory_csv, write_atomic, write_json};

pub const EXIT_OK: u8 = 0;
pub const EXIT_THRESHOLD: u8 = 1;
pub const EXIT_COLLISION: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_IDENTITY: u8 = 4;
pub const EXIT_NEWTON: u8 = 5;

/// Newton starting points tried by `check-linear-problem`.
pub const BRANCH_GUESSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    VerifyIdentities,
    SpectralScan,
    CheckLinearProblem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub message: String,
}

impl Outcome {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Outcome {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Outcome {
    fn from(e: ConfigError) -> Self {
        Outcome::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<std::io::Error> for Outcome {
    fn from(e: std::io::Error) -> Self {
        Outcome::new(EXIT_THRESHOLD, format!("i/o error: {e}"))
    }
}

impl From<bkp_core::Error> for Outcome {
    fn from(e: bkp_core::Error) -> Self {
        Outcome::new(EXIT_THRESHOLD, format!("evaluation failed: {e}"))
    }
}

#[derive(Serialize)]
struct Versions {
    bkp_core: &'static str,
    bkp_cli: &'static str,
}

#[derive(Serialize)]
struct IntegrationStats {
    accepted: usize,
    rejected: usize,
    samples: usize,
    t_final: f64,
    min_separation: f64,
    error: Option<String>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: Command,
    exit_code: u8,
    message: &'a str,
    versions: Versions,
    config: &'a RawConfig,
    integration: Option<IntegrationStats>,
}

fn write_meta(
    cfg: &RunConfig,
    command: Command,
    outcome: &Outcome,
    integration: Option<IntegrationStats>,
) -> std::io::Result<()> {
    let meta = RunMeta {
        command,
        exit_code: outcome.code,
        message: &outcome.message,
        versions: Versions {
            bkp_core: bkp_core::VERSION,
            bkp_cli: env!("CARGO_PKG_VERSION"),
        },
        config: &cfg.raw,
        integration,
    };
    write_json(&cfg.output_dir, "run_meta.json", &meta)?;
    Ok(())
}

/// Load, validate and dispatch. `out` and `seed` override the config file.
pub fn run(command: Command, config: &Path, out: Option<&Path>, seed: Option<u64>) -> Outcome {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            return Outcome::new(
                EXIT_CONFIG,
                format!("cannot read {}: {e}", config.display()),
            )
        }
    };
    let mut raw: RawConfig = match toml::from_str(&text) {
        Ok(r) => r,
        Err(e) => return Outcome::new(EXIT_CONFIG, format!("invalid configuration: {e}")),
    };
    if let Some(s) = seed {
        raw.seed = s;
    }
    let mut cfg = match RunConfig::validate(raw) {
        Ok(c) => c,
        Err(e) => return e.into(),
    };
    if let Some(dir) = out {
        cfg.output_dir = dir.to_path_buf();
    }
    run_config(command, &cfg)
}

pub fn run_config(command: Command, cfg: &RunConfig) -> Outcome {
    let result = match command {
        Command::Simulate => simulate(cfg),
        Command::VerifyIdentities => verify_identities(cfg),
        Command::SpectralScan => spectral_scan(cfg),
        Command::CheckLinearProblem => check_linear_problem(cfg),
    };
    result.unwrap_or_else(|o| o)
}

struct Run {
    samples: Vec<PoleState>,
    stats: IntegrationStats,
    completed: bool,
}

fn run_flow(cfg: &RunConfig, s0: &PoleState) -> Run {
    let ig = &cfg.raw.integration;
    let opts = IntegrateOptions {
        rel_tol: ig.rel_tol,
        abs_tol: ig.abs_tol,
        ..IntegrateOptions::uniform(s0.t, ig.t_end, ig.samples)
    };
    match integrate(s0, &cfg.model, ig.t_end, &opts) {
        Ok(traj) => Run {
            stats: IntegrationStats {
                accepted: traj.accepted,
                rejected: traj.rejected,
                samples: traj.samples.len(),
                t_final: traj.samples.last().map_or(0.0, |s| s.t),
                min_separation: traj.min_separation_seen,
                error: None,
            },
            samples: traj.samples,
            completed: true,
        },
        Err(f) => {
            let mut samples = f.partial.samples;
            if samples.last().is_none_or(|s| s.t < f.last_good.t) {
                samples.push(f.last_good.clone());
            }
            Run {
                stats: IntegrationStats {
                    accepted: f.partial.accepted,
                    rejected: f.partial.rejected,
                    samples: samples.len(),
                    t_final: f.last_good.t,
                    min_separation: f.partial.min_separation_seen,
                    error: Some(f.error.to_string()),
                },
                samples,
                completed: false,
            }
        }
    }
}

/// Drift summary for one monitored quantity.
#[derive(Debug, Clone, Serialize)]
pub struct QuantitySeries {
    pub name: String,
    pub lambda: Option<C64>,
    pub initial: C64,
    pub max_abs_drift: f64,
    /// max |Q(t) − Q(0)| / (1 + |Q(0)|)
    pub max_rel_drift: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub threshold: f64,
    pub samples: usize,
    pub t_final: f64,
    pub passed: bool,
    pub quantities: Vec<QuantitySeries>,
}

fn monitored(
    s: &PoleState,
    model: &Model,
    lambdas: &[C64],
) -> bkp_core::Result<Vec<(String, Option<C64>, C64)>> {
    let i = integrals(s, model)?;
    let mut q = vec![
        ("I1".to_string(), None, i.i1),
        ("I2".to_string(), None, i.i2),
    ];
    if let Some(i3) = i.i3 {
        q.push(("I3".to_string(), None, i3));
    }
    q.push(("J".to_string(), None, i.j));
    if let Model::Elliptic(lat) = model {
        for l in lambdas {
            for (k, r) in spectral_poly(s, *l, lat)?.coeffs.into_iter().enumerate() {
                q.push((format!("R_{k}"), Some(*l), r));
            }
        }
    }
    Ok(q)
}

pub fn conservation_report(
    samples: &[PoleState],
    model: &Model,
    lambdas: &[C64],
    threshold: f64,
) -> bkp_core::Result<ConservationReport> {
    let first = monitored(&samples[0], model, lambdas)?;
    let mut series: Vec<QuantitySeries> = first
        .into_iter()
        .map(|(name, lambda, initial)| QuantitySeries {
            name,
            lambda,
            initial,
            max_abs_drift: 0.0,
            max_rel_drift: 0.0,
            passed: true,
        })
        .collect();
    for s in &samples[1..] {
        for (q, (_, _, value)) in series.iter_mut().zip(monitored(s, model, lambdas)?) {
            let d = (value - q.initial).norm();
            q.max_abs_drift = q.max_abs_drift.max(d);
            q.max_rel_drift = q.max_rel_drift.max(d / (1.0 + q.initial.norm()));
        }
    }
    for q in &mut series {
        q.passed = q.max_rel_drift < threshold;
    }
    Ok(ConservationReport {
        threshold,
        samples: samples.len(),
        t_final: samples.last().map_or(0.0, |s| s.t),
        passed: series.iter().all(|q| q.passed),
        quantities: series,
    })
}

fn collision_outcome(run: &Run) -> Outcome {
    Outcome::new(
        EXIT_COLLISION,
        format!(
            "integration stopped at t = {}: {}",
            run.stats.t_final,
            run.stats.error.as_deref().unwrap_or("unknown error")
        ),
    )
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, Outcome> {
    let s0 = cfg.require_state()?;
    let run = run_flow(cfg, s0);
    let dir = &cfg.output_dir;
    write_atomic(
        dir,
        "trajectory.csv",
        trajectory_csv(&run.samples).as_bytes(),
    )?;
    if !run.completed {
        let outcome = collision_outcome(&run);
        write_meta(cfg, Command::Simulate, &outcome, Some(run.stats))?;
        return Ok(outcome);
    }
    let report = conservation_report(
        &run.samples,
        &cfg.model,
        &cfg.lambda_samples,
        cfg.raw.thresholds.conservation,
    )?;
    write_json(dir, "conservation.json", &report)?;
    let outcome = if report.passed {
        Outcome::new(EXIT_OK, "integration completed; all quantities conserved")
    } else {
        let failing: Vec<&str> = report
            .quantities
            .iter()
            .filter(|q| !q.passed)
            .map(|q| q.name.as_str())
            .collect();
        Outcome::new(
            EXIT_THRESHOLD,
            format!("drift above threshold for {}", failing.join(", ")),
        )
    };
    write_meta(cfg, Command::Simulate, &outcome, Some(run.stats))?;
    Ok(outcome)
}

#[derive(Serialize)]
struct LatticeEcho {
    omega: C64,
    omega_prime: C64,
    g2: C64,
    g3: C64,
}

impl LatticeEcho {
    fn of(l: &Lattice) -> Self {
        LatticeEcho {
            omega: l.omega(),
            omega_prime: l.omega_prime(),
            g2: l.g2(),
            g3: l.g3(),
        }
    }
}

#[derive(Serialize)]
struct IdentitiesFile<'a> {
    lattice: LatticeEcho,
    draws: usize,
    seed: u64,
    passed: bool,
    reports: &'a [IdentityReport],
}

fn verify_identities(cfg: &RunConfig) -> Result<Outcome, Outcome> {
    let lat = cfg.require_lattice()?;
    let draws = cfg.raw.identities.draws;
    let reports = verify_all(lat, draws, cfg.seed());
    let failing: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.name())
        .collect();
    let file = IdentitiesFile {
        lattice: LatticeEcho::of(lat),
        draws,
        seed: cfg.seed(),
        passed: failing.is_empty(),
        reports: &reports,
    };
    write_json(&cfg.output_dir, "identities.json", &file)?;
    let outcome = if failing.is_empty() {
        let worst = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
        Outcome::new(
            EXIT_OK,
            format!(
                "{} identities passed, worst residual {worst:.3e}",
                reports.len()
            ),
        )
    } else {
        Outcome::new(
            EXIT_IDENTITY,
            format!("identities failed: {}", failing.join(", ")),
        )
    };
    write_meta(cfg, Command::VerifyIdentities, &outcome, None)?;
    Ok(outcome)
}

fn spectral_scan(cfg: &RunConfig) -> Result<Outcome, Outcome> {
    let lat = *cfg.require_lattice()?;
    let s0 = cfg.require_state()?;
    if cfg.lambda_samples.is_empty() {
        return Err(ConfigError("lambda_samples is empty".into()).into());
    }
    let run = run_flow(cfg, s0);
    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    for s in &run.samples {
        for l in &cfg.lambda_samples {
            for (k, r) in spectral_poly(s, *l, &lat)?.coeffs.into_iter().enumerate() {
                rows.push((s.t, *l, k, r));
            }
            residuals.push((s.t, "involution", *l, involution_residual(s, *l, &lat)?));
        }
        residuals.push((s.t, "j_limit", j_limit_lambda(), j_limit_residual(s, &lat)?));
    }
    let dir = &cfg.output_dir;
    write_atomic(dir, "spectral.csv", spectral_csv(&rows).as_bytes())?;
    write_atomic(
        dir,
        "spectral_residuals.csv",
        residuals_csv(&residuals).as_bytes(),
    )?;
    let outcome = if run.completed {
        Outcome::new(
            EXIT_OK,
            format!(
                "{} samples x {} spectral parameters",
                run.samples.len(),
                cfg.lambda_samples.len()
            ),
        )
    } else {
        collision_outcome(&run)
    };
    write_meta(cfg, Command::SpectralScan, &outcome, Some(run.stats))?;
    Ok(outcome)
}

#[derive(Serialize)]
struct BakerFile {
    lambda: C64,
    guesses: Vec<C64>,
    converged: bool,
    wave: Option<WaveData>,
    bloch_multipliers: Option<(C64, C64)>,
    probe_points: Vec<C64>,
    eigen_residual: Option<f64>,
    linear_problem_residual: Option<f64>,
    bloch_residual_b: Option<f64>,
    bloch_residual_b_prime: Option<f64>,
    /// max |v_i − v_i(x, z, λ, c)|: the configured velocities against the
    /// ones forced by the pole-cancellation condition.
    velocity_mismatch: Option<f64>,
    thresholds: Thresholds,
    passed: bool,
}

/// Starting points on the Cauchy bound circle of R(·, λ).
fn branch_guesses(coeffs: &[C64]) -> Vec<C64> {
    let lead = coeffs[coeffs.len() - 1].norm();
    let radius = 1.0
        + coeffs[..coeffs.len() - 1]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    (0..BRANCH_GUESSES)
        .map(|k| {
            C64::from_polar(
                radius,
                0.3 + k as f64 * std::f64::consts::TAU / BRANCH_GUESSES as f64,
            )
        })
        .collect()
}

fn check_linear_problem(cfg: &RunConfig) -> Result<Outcome, Outcome> {
    let lat = *cfg.require_lattice()?;
    let s = cfg.require_state()?;
    let Some(&lambda) = cfg.lambda_samples.first() else {
        return Err(ConfigError("lambda_samples is empty".into()).into());
    };
    let poly = spectral_poly(s, lambda, &lat)?;
    let guesses = branch_guesses(&poly.coeffs);
    let wave = guesses
        .iter()
        .find_map(|g| wave_data(s, lambda, *g, &lat).ok());
    let th = cfg.raw.thresholds;
    let mut file = BakerFile {
        lambda,
        guesses,
        converged: wave.is_some(),
        wave: None,
        bloch_multipliers: None,
        probe_points: Vec::new(),
        eigen_residual: None,
        linear_problem_residual: None,
        bloch_residual_b: None,
        bloch_residual_b_prime: None,
        velocity_mismatch: None,
        thresholds: th,
        passed: false,
    };
    let outcome = match wave {
        None => Outcome::new(
            EXIT_NEWTON,
            format!("no spectral root found from {BRANCH_GUESSES} guesses"),
        ),
        Some(w) => {
            let xs = probe_points(&w.state, &lat);
            let eig = eigen_residual(&w, &lat)?;
            let pde = linear_problem_residual(&w, &lat, &xs)?;
            let (b, bp) = bloch_residuals(&w, &lat, &xs)?;
            let v = on_shell_velocities(&s.x, w.z, lambda, &w.c, &lat)?;
            let mismatch = v
                .iter()
                .zip(&s.v)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            file.passed =
                eig < th.eigen && pde < th.linear_problem && b < th.bloch && bp < th.bloch;
            file.bloch_multipliers = Some(bloch_multipliers(&w, &lat)?);
            file.probe_points = xs;
            file.eigen_residual = Some(eig);
            file.linear_problem_residual = Some(pde);
            file.bloch_residual_b = Some(b);
            file.bloch_residual_b_prime = Some(bp);
            file.velocity_mismatch = Some(mismatch);
            let summary = format!(
                "z = {}: eigen {eig:.3e}, linear problem {pde:.3e}, Bloch {b:.3e} / {bp:.3e}",
                w.z
            );
            file.wave = Some(w);
            if file.passed {
                Outcome::new(EXIT_OK, summary)
            } else {
                Outcome::new(EXIT_THRESHOLD, format!("threshold exceeded; {summary}"))
            }
        }
    };
    write_json(&cfg.output_dir, "baker.json", &file)?;
    write_meta(cfg, Command::CheckLinearProblem, &outcome, None)?;
    Ok(outcome)
}
