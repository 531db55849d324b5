//! Run configuration: built-in defaults, an optional TOML file, the
//! `REDISGROWTH_SEED` environment variable and `--set key=value` overrides,
//! applied in that order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::econ::{IncomeVector, Scheme};
use crate::error::{Error, Result};
use crate::eta::{EtaSpec, RiskPreset};
use crate::report::EXAMPLE_INCOMES;
use crate::sweep::{stepped, SweepGrid};

pub const SEED_ENV: &str = "REDISGROWTH_SEED";

pub const DEFAULT_SEED: u64 = 20_131_001;

/// A distribution given either by preset name or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaConfig {
    Preset(String),
    Explicit {
        mean: f64,
        geomean: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl EtaConfig {
    pub fn preset(p: RiskPreset) -> Self {
        EtaConfig::Preset(p.name().to_string())
    }

    pub fn resolve(&self) -> Result<EtaSpec> {
        match self {
            EtaConfig::Preset(name) => RiskPreset::from_name(name)
                .map(RiskPreset::spec)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown preset '{name}' (expected less-risky, intermediate or more-risky)"
                    ))
                }),
            EtaConfig::Explicit {
                mean,
                geomean,
                scale,
            } => EtaSpec::with_scale(*mean, *geomean, *scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub incomes: Vec<f64>,
    pub tax_rate: f64,
    pub admin_rate: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            incomes: EXAMPLE_INCOMES.to_vec(),
            tax_rate: 1.0 / 3.0,
            admin_rate: 0.25,
        }
    }
}

impl DemoConfig {
    pub fn incomes(&self) -> Result<IncomeVector> {
        IncomeVector::new(self.incomes.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub agents: usize,
    pub periods: usize,
    pub tax_rate: f64,
    pub admin_rate: f64,
    pub eta: EtaConfig,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            agents: 10,
            periods: 500,
            tax_rate: 0.3,
            admin_rate: 0.2,
            eta: EtaConfig::preset(RiskPreset::Intermediate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
    pub schemes: Vec<Scheme>,
    pub eta: Vec<EtaConfig>,
    pub agents: Vec<usize>,
    pub periods: usize,
    pub samples: usize,
    /// Worker threads; unset uses one per core. Never changes results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Cells per checkpoint batch.
    pub chunk: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a_min: 0.0,
            a_max: 1.0,
            a_step: 0.05,
            b_min: 0.0,
            b_max: 0.8,
            b_step: 0.05,
            schemes: Scheme::ALL.to_vec(),
            eta: vec![EtaConfig::preset(RiskPreset::Intermediate)],
            agents: vec![10],
            periods: 300,
            samples: 50,
            threads: None,
            chunk: 64,
        }
    }
}

impl SweepConfig {
    /// The full grid (37,638 cells).
    pub fn full() -> Self {
        Self {
            a_step: 0.02,
            b_step: 0.02,
            eta: RiskPreset::ALL.map(EtaConfig::preset).to_vec(),
            agents: vec![10, 100],
            periods: 500,
            samples: 100,
            ..Self::default()
        }
    }

    pub fn grid(&self, base_seed: u64) -> Result<SweepGrid> {
        for (name, step) in [("a_step", self.a_step), ("b_step", self.b_step)] {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!(
                    "sweep.{name} must be positive, got {step}"
                )));
            }
        }
        let grid = SweepGrid {
            a_values: stepped(self.a_min, self.a_max, self.a_step),
            b_values: stepped(self.b_min, self.b_max, self.b_step),
            schemes: self.schemes.clone(),
            specs: self
                .eta
                .iter()
                .map(EtaConfig::resolve)
                .collect::<Result<_>>()?,
            agent_counts: self.agents.clone(),
            periods: self.periods,
            samples: self.samples,
            base_seed,
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub eta: EtaConfig,
    /// Times at which the CLT parameters of `ln eta` sums are reported.
    pub times: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            eta: EtaConfig::preset(RiskPreset::Intermediate),
            times: vec![1.0, 10.0, 100.0, 500.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub smoothing_window: usize,
    /// Standard errors of slack in zone comparisons.
    pub slack: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            smoothing_window: crate::analysis::DEFAULT_SMOOTHING_WINDOW,
            slack: crate::analysis::DEFAULT_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub demo: DemoConfig,
    pub trajectories: TrajectoryConfig,
    pub sweep: SweepConfig,
    pub stats: StatsConfig,
    pub analysis: AnalysisConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            demo: DemoConfig::default(),
            trajectories: TrajectoryConfig::default(),
            sweep: SweepConfig::default(),
            stats: StatsConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets one dotted key, e.g. `sweep.samples=20` or `stats.eta="more-risky"`.
    /// Values are read as TOML; anything that does not parse is a string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let path = path.trim();
        let value = parse_value(raw.trim());
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let mut keys = path.split('.').peekable();
        while let Some(key) = keys.next() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{path}' does not name a setting")))?;
            if keys.peek().is_none() {
                table.insert(key.to_string(), value.clone());
                break;
            }
            // optional sections and keys are absent from the serialized tree
            node = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root
            .try_into()
            .map_err(|e| Error::Config(format!("{path}: {e}")))?;
        Ok(())
    }

    /// Applies `REDISGROWTH_SEED` if given.
    pub fn apply_env_seed(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then the seed variable, then `overrides`.
    pub fn resolve(
        file: Option<&Path>,
        env_seed: Option<&str>,
        overrides: &[String],
    ) -> Result<Self> {
        let mut config = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_env_seed(env_seed)?;
        for o in overrides {
            config.set(o)?;
        }
        config.check_seed()?;
        Ok(config)
    }

    /// TOML integers are signed 64-bit.
    fn check_seed(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed {} exceeds {}",
                self.seed,
                i64::MAX
            )));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let mut f = c.clone();
        f.sweep = SweepConfig::full();
        f.sweep.threads = Some(4);
        assert_eq!(Config::from_toml(&f.to_toml().unwrap()).unwrap(), f);
    }

    #[test]
    fn full_grid_size() {
        assert_eq!(SweepConfig::full().grid(1).unwrap().cell_count(), 37_638);
        assert_eq!(SweepConfig::default().grid(1).unwrap(), SweepGrid::desk(1));
    }

    #[test]
    fn overrides() {
        let mut c = Config::default();
        c.set("sweep.samples=20").unwrap();
        c.set("sweep.agents=[10, 100]").unwrap();
        c.set("sweep.threads=2").unwrap();
        c.set("stats.eta=more-risky").unwrap();
        c.set("trajectories.eta={ mean = 2.0, geomean = 0.5 }")
            .unwrap();
        c.set("sweep.schemes=[\"progressive\"]").unwrap();
        assert_eq!(c.sweep.samples, 20);
        assert_eq!(c.sweep.agents, vec![10, 100]);
        assert_eq!(c.sweep.threads, Some(2));
        assert_eq!(c.stats.eta.resolve().unwrap(), RiskPreset::MoreRisky.spec());
        assert_eq!(c.trajectories.eta.resolve().unwrap().mean, 2.0);
        assert_eq!(c.sweep.schemes, vec![Scheme::Progressive]);
        assert!(c.set("sweep.nonsense=1").is_err());
        assert!(c.set("sweep.samples").is_err());
        assert!(c.set("sweep.samples=\"many\"").is_err());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\n[sweep]\nsamples = 7\n").unwrap();
        let c = Config::resolve(Some(&path), None, &[]).unwrap();
        assert_eq!((c.seed, c.sweep.samples, c.sweep.periods), (5, 7, 300));
        let c = Config::resolve(Some(&path), Some("9"), &[]).unwrap();
        assert_eq!(c.seed, 9);
        let c = Config::resolve(Some(&path), Some("9"), &["seed=11".into()]).unwrap();
        assert_eq!(c.seed, 11);
        assert!(Config::resolve(Some(&path), Some("x"), &[]).is_err());
        assert!(Config::resolve(None, Some("18446744073709551615"), &[]).is_err());
    }

    #[test]
    fn bad_files() {
        assert!(Config::from_toml("[sweep]\nsamplez = 3").is_err());
        assert!(matches!(
            Config::from_file(Path::new("/nonexistent/c.toml")),
            Err(Error::Io { .. })
        ));
        let c = Config::from_toml("[sweep]\neta = [\"bogus\"]").unwrap();
        assert!(c.sweep.grid(1).is_err());
        let c = Config::from_toml("[sweep]\na_step = 0").unwrap();
        assert!(c.sweep.grid(1).is_err());
    }
}
