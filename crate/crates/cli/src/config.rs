//! Run configuration: the TOML schema and its validation.

use std::path::PathBuf;

use bkp_core::dynamics::min_separation;
use bkp_core::spectral::default_lambda_samples;
use bkp_core::{Lattice, Model, PoleState, C64};
use serde::{Deserialize, Serialize};

/// A complex number written as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Elliptic,
    Rational,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub lattice: Option<LatticeSection>,
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub identities: IdentitiesSection,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub omega: Pair,
    pub omega_prime: Pair,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub poles: Vec<Pair>,
    pub velocities: Vec<Pair>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationSection {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equally spaced output times after t = 0.
    pub samples: usize,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        IntegrationSection {
            t_end: 0.5,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            samples: 50,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    /// Empty means the lattice-scaled defaults.
    pub lambda_samples: Vec<Pair>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesSection {
    pub draws: usize,
}

impl Default for IdentitiesSection {
    fn default() -> Self {
        IdentitiesSection { draws: 100 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Bound on |Q(t) − Q(0)| / (1 + |Q(0)|) for every monitored quantity.
    pub conservation: f64,
    pub linear_problem: f64,
    pub eigen: f64,
    pub bloch: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            conservation: 1e-6,
            linear_problem: 1e-7,
            eigen: 1e-8,
            bloch: 1e-8,
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub model: Model,
    pub state: Option<PoleState>,
    pub lambda_samples: Vec<C64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn complex(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        Self::validate(raw)
    }

    pub fn validate(raw: RawConfig) -> Result<Self, ConfigError> {
        let lattice = match &raw.lattice {
            Some(l) => Some(
                Lattice::new(complex(&l.omega), complex(&l.omega_prime))
                    .map_err(|e| ConfigError(format!("lattice: {e}")))?,
            ),
            None => None,
        };
        let model = match (raw.model, lattice) {
            (ModelKind::Elliptic, Some(l)) => Model::Elliptic(l),
            (ModelKind::Elliptic, None) => return err("elliptic model requires [lattice]"),
            (ModelKind::Rational, _) => Model::Rational,
        };

        let ig = &raw.integration;
        if !(ig.t_end > 0.0 && ig.t_end.is_finite()) {
            return err(format!("t_end = {} must be positive", ig.t_end));
        }
        for (name, tol) in [("rel_tol", ig.rel_tol), ("abs_tol", ig.abs_tol)] {
            if !(tol > 1e-14 && tol < 1e-2) {
                return err(format!("{name} = {tol} outside (1e-14, 1e-2)"));
            }
        }
        if ig.samples == 0 {
            return err("samples must be at least 1");
        }
        let th = &raw.thresholds;
        for (name, v) in [
            ("conservation", th.conservation),
            ("linear_problem", th.linear_problem),
            ("eigen", th.eigen),
            ("bloch", th.bloch),
        ] {
            if !(v > 0.0) {
                return err(format!("threshold {name} = {v} must be positive"));
            }
        }
        if raw.identities.draws == 0 {
            return err("identities.draws must be at least 1");
        }

        let state = match &raw.initial {
            Some(init) => {
                if init.poles.len() != init.velocities.len() {
                    return err(format!(
                        "{} poles but {} velocities",
                        init.poles.len(),
                        init.velocities.len()
                    ));
                }
                let s = PoleState::new(
                    0.0,
                    init.poles.iter().map(complex).collect(),
                    init.velocities.iter().map(complex).collect(),
                )
                .map_err(|e| ConfigError(format!("initial state: {e}")))?;
                if s.n() > 1 && min_separation(&s, &model) <= model.collision_threshold() {
                    return err("initial poles coincide modulo the lattice");
                }
                Some(s)
            }
            None => None,
        };

        let lambda_samples: Vec<C64> = match (&raw.spectral.lambda_samples[..], &lattice) {
            ([], Some(l)) => default_lambda_samples(l),
            (given, _) => given.iter().map(complex).collect(),
        };
        if let Some(l) = &lattice {
            let guard = 1e-3 * l.min_period();
            for lam in &lambda_samples {
                if l.distance_to_lattice(*lam) < guard {
                    return err(format!("lambda sample {lam} lies on the lattice"));
                }
            }
        }

        let output_dir = raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        Ok(RunConfig {
            raw,
            model,
            state,
            lambda_samples,
            output_dir,
        })
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.model.lattice()
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    pub fn require_state(&self) -> Result<&PoleState, ConfigError> {
        self.state
            .as_ref()
            .ok_or_else(|| ConfigError("missing [initial] section".into()))
    }

    pub fn require_lattice(&self) -> Result<&Lattice, ConfigError> {
        self.lattice()
            .ok_or_else(|| ConfigError("this command requires the elliptic model".into()))
    }
}
