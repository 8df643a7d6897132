//! JSON experiment configuration: schema, validation, and construction of
//! the simulation inputs (target circuit, averaging layout, noise sweep).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use uasim::circuit::{clements_mesh, random_mesh_parameters, CircuitSpec, Gate};
use uasim::protocol::{UAConfig, Weighting};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ORACLE_CUTOFF: usize = 14;

/// A scalar or a list; lists drive sweep grids.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }

    pub fn single(&self, what: &str) -> Result<T> {
        match self {
            OneOrMany::One(x) => Ok(x.clone()),
            OneOrMany::Many(xs) if xs.len() == 1 => Ok(xs[0].clone()),
            OneOrMany::Many(_) => Err(CliError::Config(format!(
                "{what} must be a single value here (lists are only valid for `sweep`)"
            ))),
        }
    }
}

/// Squeezing amplitudes: one vector, or a map keyed by the mode count so a
/// sweep over mode counts can carry matched inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SqueezingSpec {
    Flat(Vec<f64>),
    PerModes(BTreeMap<String, Vec<f64>>),
}

impl SqueezingSpec {
    pub fn for_modes(&self, modes: usize) -> Result<Vec<f64>> {
        match self {
            SqueezingSpec::Flat(v) => {
                if v.len() != modes {
                    return Err(CliError::Config(format!(
                        "squeezing has {} entries but the circuit has {modes} modes",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
            SqueezingSpec::PerModes(map) => {
                let v = map.get(&modes.to_string()).ok_or_else(|| {
                    CliError::Config(format!("squeezing map has no entry for {modes} modes"))
                })?;
                if v.len() != modes {
                    return Err(CliError::Config(format!(
                        "squeezing entry for {modes} modes has {} values",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Target circuit: a seeded random full mesh, or an explicit gate list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CircuitField {
    Preset { preset: String, seed: u64 },
    Explicit { gates: Vec<Gate> },
}

impl CircuitField {
    pub fn build(&self, modes: usize) -> Result<CircuitSpec> {
        match self {
            CircuitField::Preset { preset, seed } => {
                if preset != "clements" {
                    return Err(CliError::Config(format!(
                        "unknown circuit preset `{preset}` (expected \"clements\")"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let (thetas, phis, out) = random_mesh_parameters(modes, &mut rng);
                Ok(clements_mesh(modes, &thetas, &phis, &out)?)
            }
            CircuitField::Explicit { gates } => Ok(CircuitSpec::new(modes, gates.clone())?),
        }
    }
}

/// Noise strength: a single σ or an inclusive linear range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Single(f64),
    Range { from: f64, to: f64, steps: usize },
}

impl SigmaSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |s: f64| {
            if !s.is_finite() || s < 0.0 {
                Err(CliError::Config(format!(
                    "sigma must be finite and >= 0, got {s}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            SigmaSpec::Single(s) => check(*s),
            SigmaSpec::Range { from, to, steps } => {
                check(*from)?;
                check(*to)?;
                if *steps < 2 {
                    return Err(CliError::Config(format!(
                        "sigma range needs steps >= 2, got {steps}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SigmaSpec::Single(s) => vec![*s],
            SigmaSpec::Range { from, to, steps } => {
                let n = *steps;
                (0..n)
                    .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }

    pub fn single(&self, what: &str) -> Result<f64> {
        match self {
            SigmaSpec::Single(s) => Ok(*s),
            SigmaSpec::Range { .. } => Err(CliError::Config(format!(
                "{what} needs a single sigma, not a range"
            ))),
        }
    }
}

fn default_weighting() -> Weighting {
    Weighting::HeraldWeighted
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub modes: OneOrMany<usize>,
    pub replicas: OneOrMany<usize>,
    pub squeezing: SqueezingSpec,
    #[serde(default)]
    pub prep_phases: Vec<(usize, f64)>,
    pub circuit: CircuitField,
    pub sigma: SigmaSpec,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_weighting")]
    pub weighting: Weighting,
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Sample indices whose noise draws are written as sidecar records.
    #[serde(default)]
    pub record_draws: Vec<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.samples == 0 {
            return Err(CliError::Config("samples must be >= 1".into()));
        }
        for m in self.modes.values() {
            if m == 0 {
                return Err(CliError::Config("modes must be >= 1".into()));
            }
        }
        for n in self.replicas.values() {
            if !n.is_power_of_two() {
                return Err(CliError::Config(format!(
                    "replica count must be a power of two, got {n}"
                )));
            }
        }
        self.sigma.validate()?;
        if matches!(self.circuit, CircuitField::Explicit { .. }) && self.modes.values().len() > 1 {
            return Err(CliError::Config(
                "an explicit gate list fixes the mode count; use the \"clements\" preset to sweep over modes".into(),
            ));
        }
        Ok(())
    }

    /// Builds the averaging layout for one grid point.
    pub fn ua_config(&self, modes: usize, replicas: usize) -> Result<UAConfig> {
        let squeezing = self.squeezing.for_modes(modes)?;
        let cfg = UAConfig::new(modes, replicas, squeezing)?
            .with_prep_phases(self.prep_phases.clone())?
            .with_weighting(self.weighting);
        Ok(cfg)
    }

    pub fn target(&self, modes: usize) -> Result<CircuitSpec> {
        self.circuit.build(modes)
    }

    pub fn oracle_cutoff(&self) -> usize {
        self.cutoff.unwrap_or(DEFAULT_ORACLE_CUTOFF)
    }
}

/// `--threads` flag, falling back to the `UASIM_THREADS` environment
/// variable; `None` keeps the library default (hardware parallelism).
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("UASIM_THREADS") {
        Ok(s) => {
            let n: usize = s
                .parse()
                .map_err(|_| CliError::Config(format!("UASIM_THREADS is not a number: {s:?}")))?;
            if n == 0 {
                return Err(CliError::Config("UASIM_THREADS must be >= 1".into()));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a worker pool of the requested size (or the global pool).
pub fn with_thread_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Numerical(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
