//! Experiment configuration in a flat `key = value` format.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Every key is optional; defaults depend on the experiment.
//!
//! | key                 | meaning                                          |
//! |---------------------|--------------------------------------------------|
//! | `experiment`        | must match the experiment being run, if present  |
//! | `budget`            | total observations `M T` (tradeoff)              |
//! | `chains_grid`       | values of `M` (tradeoff)                         |
//! | `chains`            | `M` (statecount, gamma-sweep, corruption)        |
//! | `horizon`           | `T` (statecount, gamma-sweep, corruption)        |
//! | `omega_size`        | state count (tradeoff, gamma-sweep, corruption)  |
//! | `omega_grid`        | state counts (statecount)                        |
//! | `gamma`             | cycle walk move probability                      |
//! | `gamma_grid`        | move probabilities (gamma-sweep)                 |
//! | `eps_levels`        | noise levels of the perturbation                 |
//! | `corrupt_fractions` | values of `M1 / M` (corruption)                  |
//! | `corrupt_mode`      | `constant[:i]`, `adversarial-cycle`, `iid-uniform` |
//! | `confidence`        | failure probability of the bound overlay         |
//! | `trials`            | replications per grid point                      |
//! | `seed`              | master seed                                      |
//! | `init`              | `uniform`, `stationary` or `point:i`, resolved against the unperturbed matrix |
//! | `threads`           | worker threads; does not affect the output       |

use std::fmt;
use std::str::FromStr;

use mce_core::{CorruptionMode, InitPolicy};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Tradeoff,
    Statecount,
    GammaSweep,
    Corruption,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] =
        [ExperimentKind::Tradeoff, ExperimentKind::Statecount, ExperimentKind::GammaSweep, ExperimentKind::Corruption];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::Statecount => "statecount",
            ExperimentKind::GammaSweep => "gamma-sweep",
            ExperimentKind::Corruption => "corruption",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::usage(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub budget: usize,
    pub chains_grid: Vec<usize>,
    pub chains: usize,
    pub horizon: usize,
    pub omega_size: usize,
    pub omega_grid: Vec<usize>,
    pub gamma: f64,
    pub gamma_grid: Vec<f64>,
    pub eps_levels: Vec<f64>,
    pub corrupt_fractions: Vec<f64>,
    pub corrupt_mode: CorruptionMode,
    pub confidence: f64,
    pub trials: usize,
    pub seed: u64,
    pub init: InitPolicy,
    pub threads: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment,
            budget: 10_000,
            chains_grid: vec![2, 5, 10, 20, 50, 100, 200, 500, 1000],
            chains: 50,
            horizon: 50,
            omega_size: 10,
            omega_grid: vec![2, 5, 10, 20, 50, 100, 200, 500, 1000, 2500],
            gamma: 0.1,
            gamma_grid: vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            eps_levels: vec![0.0, 0.05],
            corrupt_fractions: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5],
            corrupt_mode: CorruptionMode::Constant(0),
            confidence: 0.1,
            trials: 50,
            seed: DEFAULT_SEED,
            init: InitPolicy::Stationary,
            threads: None,
        };
        match experiment {
            ExperimentKind::Tradeoff => base,
            ExperimentKind::Statecount => ExperimentConfig { init: InitPolicy::Uniform, ..base },
            ExperimentKind::GammaSweep => {
                ExperimentConfig { chains: 200, horizon: 200, eps_levels: vec![0.0, 0.03], ..base }
            }
            ExperimentKind::Corruption => ExperimentConfig {
                chains: 100,
                horizon: 500,
                omega_size: 4,
                gamma: 0.5,
                eps_levels: vec![0.0],
                ..base
            },
        }
    }

    /// Defaults for `experiment` overridden by the keys in `text`.
    pub fn parse(experiment: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", idx + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::usage(format!("config line {}: {e}", idx + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "experiment" => {
                let kind: ExperimentKind = value.parse().map_err(|e: CliError| e.to_string())?;
                if kind != self.experiment {
                    return Err(format!("config is for {kind}, not {}", self.experiment));
                }
            }
            "budget" => self.budget = scalar(key, value)?,
            "chains_grid" => self.chains_grid = list(key, value)?,
            "chains" => self.chains = scalar(key, value)?,
            "horizon" => self.horizon = scalar(key, value)?,
            "omega_size" => self.omega_size = scalar(key, value)?,
            "omega_grid" => self.omega_grid = list(key, value)?,
            "gamma" => self.gamma = scalar(key, value)?,
            "gamma_grid" => self.gamma_grid = list(key, value)?,
            "eps_levels" => self.eps_levels = list(key, value)?,
            "corrupt_fractions" => self.corrupt_fractions = list(key, value)?,
            "corrupt_mode" => self.corrupt_mode = value.parse().map_err(|e: mce_core::Error| e.to_string())?,
            "confidence" => self.confidence = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "init" => self.init = value.parse().map_err(|e: mce_core::Error| e.to_string())?,
            "threads" => self.threads = Some(scalar(key, value)?),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(CliError::usage(msg.to_string()));
        let grid_empty = match self.experiment {
            ExperimentKind::Tradeoff => self.chains_grid.is_empty(),
            ExperimentKind::Statecount => self.omega_grid.is_empty(),
            ExperimentKind::GammaSweep => self.gamma_grid.is_empty(),
            ExperimentKind::Corruption => self.corrupt_fractions.is_empty(),
        };
        if grid_empty || self.eps_levels.is_empty() {
            return fail("grids must be nonempty");
        }
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.chains == 0 || self.horizon == 0 || self.budget == 0 || self.chains_grid.contains(&0) {
            return fail("chain counts, horizons and budget must be positive");
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1");
        }
        if self.eps_levels.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return fail("noise levels must be finite and nonnegative");
        }
        if self.corrupt_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return fail("corruption fractions must lie in [0, 1]");
        }
        Ok(())
    }

    /// Canonical `key = value` lines for every field that affects the output.
    pub fn canonical(&self) -> Vec<String> {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut out = vec![format!("experiment = {}", self.experiment)];
        let mut push = |k: &str, v: String| out.push(format!("{k} = {v}"));
        match self.experiment {
            ExperimentKind::Tradeoff => {
                push("budget", self.budget.to_string());
                push("chains_grid", join(&self.chains_grid));
                push("omega_size", self.omega_size.to_string());
                push("gamma", self.gamma.to_string());
            }
            ExperimentKind::Statecount => {
                push("chains", self.chains.to_string());
                push("horizon", self.horizon.to_string());
                push("omega_grid", join(&self.omega_grid));
                push("gamma", self.gamma.to_string());
            }
            ExperimentKind::GammaSweep => {
                push("chains", self.chains.to_string());
                push("horizon", self.horizon.to_string());
                push("omega_size", self.omega_size.to_string());
                push("gamma_grid", join(&self.gamma_grid));
            }
            ExperimentKind::Corruption => {
                push("chains", self.chains.to_string());
                push("horizon", self.horizon.to_string());
                push("omega_size", self.omega_size.to_string());
                push("gamma", self.gamma.to_string());
                push("corrupt_fractions", join(&self.corrupt_fractions));
                push("corrupt_mode", self.corrupt_mode.to_string());
                push("confidence", self.confidence.to_string());
            }
        }
        push("eps_levels", join(&self.eps_levels));
        push("init", self.init.to_string());
        push("trials", self.trials.to_string());
        push("seed", self.seed.to_string());
        out
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(|v| v.trim()).filter(|v| !v.is_empty()).map(|v| scalar(key, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_experiment() {
        let g = ExperimentConfig::defaults(ExperimentKind::GammaSweep);
        assert_eq!((g.chains, g.horizon, g.omega_size), (200, 200, 10));
        let s = ExperimentConfig::defaults(ExperimentKind::Statecount);
        assert_eq!((s.chains, s.horizon, s.init), (50, 50, InitPolicy::Uniform));
        assert_eq!(*s.omega_grid.last().unwrap(), 2500);
        let t = ExperimentConfig::defaults(ExperimentKind::Tradeoff);
        assert_eq!((t.budget, t.trials, t.eps_levels.clone()), (10_000, 50, vec![0.0, 0.05]));
    }

    #[test]
    fn parse_overrides_and_errors() {
        let text = "# tuned\nchains_grid = 2, 10\n\neps_levels=0\ntrials = 3\ninit = point:2\nthreads = 2\n";
        let c = ExperimentConfig::parse(ExperimentKind::Tradeoff, text).unwrap();
        assert_eq!(c.chains_grid, vec![2, 10]);
        assert_eq!(c.eps_levels, vec![0.0]);
        assert_eq!(c.init, InitPolicy::Point(2));
        assert_eq!(c.threads, Some(2));

        let bad = |t: &str| ExperimentConfig::parse(ExperimentKind::Tradeoff, t).unwrap_err().exit_code();
        assert_eq!(bad("nonsense\n"), 1);
        assert_eq!(bad("colour = red\n"), 1);
        assert_eq!(bad("trials = 0\n"), 1);
        assert_eq!(bad("chains_grid =\n"), 1);
        assert_eq!(bad("experiment = statecount\n"), 1);
        assert_eq!(bad("budget = -3\n"), 1);
    }

    #[test]
    fn canonical_excludes_threads() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Corruption);
        let before = c.canonical();
        c.threads = Some(4);
        assert_eq!(c.canonical(), before);
        assert!(before.iter().any(|l| l == "corrupt_mode = constant"));
        let reparsed = ExperimentConfig::parse(ExperimentKind::Corruption, &before.join("\n")).unwrap();
        assert_eq!(reparsed.canonical(), before);
    }
}
