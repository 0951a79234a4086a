//! Simulation studies on the cycle walk, each producing one CSV table.
//!
//! Every grid point `g` (enumerated in CSV row order) and trial `r` use the
//! stream `child_seed(child_seed(seed, g), r)`, from which the per-chain
//! perturbations, the ensemble and the corrupted rows are derived. Results
//! therefore do not depend on the number of worker threads.

use std::io::Write as _;

use mce_core::bounds::{heterogeneity_metrics, thm_corrupted_bound, BoundConstants, ChainModel, CorruptionProfile};
use mce_core::estimate::{count, empirical_distribution, empirical_transition_matrix};
use mce_core::matrix::{sup_norm_matrix, sup_norm_vector};
use mce_core::rng::child_seed;
use mce_core::simulate::{cycle_walk, inject_corrupted_rows, perturb_uniform, simulate_ensemble_with, PerturbedRows};
use mce_core::spectral::{pseudo_spectral_gap, stationary_distribution};
use mce_core::{CorruptionMode, Distribution, InitPolicy, StochasticMatrix, TrajectoryMatrix};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};

pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

#[derive(Debug, Clone)]
pub struct Outcome<R> {
    pub rows: Vec<R>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub chains: usize,
    pub horizon: usize,
    pub eps: f64,
    pub error: Summary,
}

impl CsvRecord for TradeoffRow {
    const HEADER: &'static [&'static str] = &["M", "T", "eps", "mean", "std"];

    fn record(&self) -> Vec<String> {
        vec![
            self.chains.to_string(),
            self.horizon.to_string(),
            self.eps.to_string(),
            self.error.mean.to_string(),
            self.error.std.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatecountRow {
    pub omega_size: usize,
    pub eps: f64,
    pub error: Summary,
}

impl CsvRecord for StatecountRow {
    const HEADER: &'static [&'static str] = &["omega_size", "eps", "mean", "std"];

    fn record(&self) -> Vec<String> {
        vec![self.omega_size.to_string(), self.eps.to_string(), self.error.mean.to_string(), self.error.std.to_string()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Stationary,
    Transition,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Stationary => "pi",
            Target::Transition => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub gamma: f64,
    pub eps: f64,
    pub target: Target,
    pub error: Summary,
}

impl CsvRecord for GammaRow {
    const HEADER: &'static [&'static str] = &["gamma", "eps", "target", "mean", "std"];

    fn record(&self) -> Vec<String> {
        vec![
            self.gamma.to_string(),
            self.eps.to_string(),
            self.target.name().to_string(),
            self.error.mean.to_string(),
            self.error.std.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionRow {
    pub fraction: f64,
    pub m1: usize,
    pub mode: CorruptionMode,
    pub eps: f64,
    pub error: Summary,
    /// Mean over trials of the corrupted-row bound; NaN when some clean
    /// chain has no unique stationary law.
    pub bound: f64,
    /// Whether the bound's sample-size condition held in every trial.
    pub condition_met: bool,
}

impl CsvRecord for CorruptionRow {
    const HEADER: &'static [&'static str] =
        &["m1_fraction", "m1", "mode", "eps", "mean", "std", "bound", "condition_met"];

    fn record(&self) -> Vec<String> {
        vec![
            self.fraction.to_string(),
            self.m1.to_string(),
            self.mode.to_string(),
            self.eps.to_string(),
            self.error.mean.to_string(),
            self.error.std.to_string(),
            self.bound.to_string(),
            self.condition_met.to_string(),
        ]
    }
}

fn trial_seed(cfg: &ExperimentConfig, point: usize, trial: usize) -> u64 {
    child_seed(child_seed(cfg.seed, point as u64), trial as u64)
}

fn perturbation_seed(trial_seed: u64, chain: usize) -> u64 {
    child_seed(child_seed(trial_seed, 0), chain as u64)
}

/// Simulates `chains` rows, row `m` following
/// `perturb_uniform(p, eps, perturbation_seed(trial_seed, m))` and starting
/// from `init` resolved against the unperturbed `p`.
fn simulate_trial(
    p: &StochasticMatrix,
    chains: usize,
    horizon: usize,
    eps: f64,
    init: InitPolicy,
    trial_seed: u64,
) -> Result<TrajectoryMatrix> {
    let initial = init.resolve(p)?;
    let data = simulate_ensemble_with(chains, horizon, p.size(), child_seed(trial_seed, 1), |m| {
        let rows = PerturbedRows::new(p, eps, perturbation_seed(trial_seed, m)).expect("noise level validated");
        (rows, initial.clone())
    })?;
    Ok(data)
}

/// Runs `trial(point, trial_index, seed)` for every point and trial in
/// parallel; results come back grouped by point in trial order.
fn run_grid<P, T, F>(cfg: &ExperimentConfig, points: &[P], trial: F) -> Result<Vec<Vec<T>>>
where
    P: Sync,
    T: Send,
    F: Fn(&P, usize, u64) -> Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|g| (0..cfg.trials).map(move |r| (g, r))).collect();
    let mut flat: Vec<T> = jobs
        .par_iter()
        .map(|&(g, r)| trial(&points[g], r, trial_seed(cfg, g, r)))
        .collect::<Result<_>>()?;
    let mut grouped = Vec::with_capacity(points.len());
    for _ in 0..points.len() {
        let rest = flat.split_off(cfg.trials);
        grouped.push(std::mem::replace(&mut flat, rest));
    }
    Ok(grouped)
}

fn transition_error(data: &TrajectoryMatrix, p: &StochasticMatrix) -> Result<f64> {
    Ok(sup_norm_matrix(&empirical_transition_matrix(&count(data)), p)?)
}

/// Fixed budget `M T`, varying `M`.
pub fn run_tradeoff(cfg: &ExperimentConfig) -> Result<Outcome<TradeoffRow>> {
    let p = cycle_walk(cfg.omega_size, cfg.gamma)?;
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for &eps in &cfg.eps_levels {
        for &m in &cfg.chains_grid {
            if cfg.budget.is_multiple_of(m) {
                points.push((eps, m, cfg.budget / m));
            } else if eps == cfg.eps_levels[0] {
                warnings.push(format!("budget {} is not divisible by M = {m}; point skipped", cfg.budget));
            }
        }
    }
    let errors = run_grid(cfg, &points, |&(eps, m, t), _, seed| {
        transition_error(&simulate_trial(&p, m, t, eps, cfg.init, seed)?, &p)
    })?;
    let rows = points
        .iter()
        .zip(&errors)
        .map(|(&(eps, chains, horizon), e)| TradeoffRow { chains, horizon, eps, error: Summary::of(e) })
        .collect();
    Ok(Outcome { rows, warnings })
}

/// Fixed `M` and `T`, varying the number of states.
pub fn run_statecount(cfg: &ExperimentConfig) -> Result<Outcome<StatecountRow>> {
    let mut points = Vec::new();
    for &eps in &cfg.eps_levels {
        for &n in &cfg.omega_grid {
            points.push((eps, n));
        }
    }
    let targets: Vec<StochasticMatrix> =
        cfg.omega_grid.iter().map(|&n| cycle_walk(n, cfg.gamma)).collect::<mce_core::Result<_>>()?;
    let errors = run_grid(cfg, &points, |&(eps, n), _, seed| {
        let p = &targets[cfg.omega_grid.iter().position(|&x| x == n).expect("grid point")];
        transition_error(&simulate_trial(p, cfg.chains, cfg.horizon, eps, cfg.init, seed)?, p)
    })?;
    let rows: Vec<StatecountRow> = points
        .iter()
        .zip(&errors)
        .map(|(&(eps, omega_size), e)| StatecountRow { omega_size, eps, error: Summary::of(e) })
        .collect();
    // distances between stochastic rows are at most 2 up to rounding
    if let Some(r) = rows.iter().find(|r| r.error.mean > 2.0 + 1e-12) {
        return Err(CliError::Domain(mce_core::Error::Domain(format!(
            "mean error {} exceeds 2 at omega_size = {}",
            r.error.mean, r.omega_size
        ))));
    }
    Ok(Outcome { rows, warnings: Vec::new() })
}

/// Fixed `M`, `T` and state count, varying the move probability; reports
/// both the stationary distribution and the transition matrix errors.
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<Outcome<GammaRow>> {
    let mut points = Vec::new();
    for &eps in &cfg.eps_levels {
        for &gamma in &cfg.gamma_grid {
            points.push((eps, cycle_walk(cfg.omega_size, gamma)?, gamma));
        }
    }
    let errors = run_grid(cfg, &points, |(eps, p, _), _, seed| {
        let data = simulate_trial(p, cfg.chains, cfg.horizon, *eps, cfg.init, seed)?;
        let c = count(&data);
        // the cycle walk is doubly stochastic
        let pi = Distribution::uniform(p.size())?;
        let pi_err = sup_norm_vector(empirical_distribution(&c).as_slice(), pi.as_slice())?;
        let p_err = sup_norm_matrix(&empirical_transition_matrix(&c), p)?;
        Ok([pi_err, p_err])
    })?;
    let mut rows = Vec::with_capacity(2 * points.len());
    for ((eps, _, gamma), e) in points.iter().zip(&errors) {
        for (k, target) in [Target::Stationary, Target::Transition].into_iter().enumerate() {
            let values: Vec<f64> = e.iter().map(|pair| pair[k]).collect();
            rows.push(GammaRow { gamma: *gamma, eps: *eps, target, error: Summary::of(&values) });
        }
    }
    Ok(Outcome { rows, warnings: Vec::new() })
}

/// Fixed ensemble with a growing share of corrupted rows, alongside the
/// corrupted-row bound computed from the clean rows.
pub fn run_corruption(cfg: &ExperimentConfig) -> Result<Outcome<CorruptionRow>> {
    let p = cycle_walk(cfg.omega_size, cfg.gamma)?;
    let pi = stationary_distribution(&p)?;
    // gap of the unperturbed walk, used for every row
    let gamma_min = pseudo_spectral_gap(&p)?.gamma;
    let m = cfg.chains;
    let mut points = Vec::new();
    for &eps in &cfg.eps_levels {
        for &fraction in &cfg.corrupt_fractions {
            let m1 = (fraction * m as f64).round() as usize;
            points.push((eps, fraction, m1.min(m)));
        }
    }
    let results = run_grid(cfg, &points, |&(eps, _, m1), _, seed| {
        let clean = simulate_trial(&p, m, cfg.horizon, eps, cfg.init, seed)?;
        let (data, corrupted) = inject_corrupted_rows(&clean, m1, cfg.corrupt_mode, child_seed(seed, 2))?;
        let error = transition_error(&data, &p)?;
        if m1 == m {
            return Ok((error, f64::INFINITY, false));
        }
        let initial = cfg.init.resolve(&p)?;
        let mut models = Vec::with_capacity(m - m1);
        for r in (0..m).filter(|r| corrupted.binary_search(r).is_err()) {
            let pm = perturb_uniform(&p, eps, perturbation_seed(seed, r))?;
            let stationary = match eps {
                0.0 => pi.clone(),
                // a perturbed chain may lose irreducibility; the bound is then undefined
                _ => match stationary_distribution(&pm) {
                    Ok(s) => s,
                    Err(_) => return Ok((error, f64::NAN, false)),
                },
            };
            models.push(ChainModel::new(pm, stationary, initial.clone()).with_gamma(gamma_min));
        }
        let profile = CorruptionProfile { m0: m - m1, m1, metrics0: heterogeneity_metrics(&p, &models, cfg.horizon)? };
        let b = thm_corrupted_bound(&profile, cfg.horizon, cfg.omega_size, cfg.confidence, BoundConstants::CORRUPTED)?;
        Ok((error, b.bound, b.condition_met))
    })?;
    let rows = points
        .iter()
        .zip(&results)
        .map(|(&(eps, fraction, m1), r)| {
            let errors: Vec<f64> = r.iter().map(|x| x.0).collect();
            CorruptionRow {
                fraction,
                m1,
                mode: cfg.corrupt_mode,
                eps,
                error: Summary::of(&errors),
                bound: r.iter().map(|x| x.1).sum::<f64>() / r.len() as f64,
                condition_met: r.iter().all(|x| x.2),
            }
        })
        .collect();
    Ok(Outcome { rows, warnings: Vec::new() })
}

/// Comment line, warnings, header and rows.
pub fn to_csv<R: CsvRecord>(cfg: &ExperimentConfig, outcome: &Outcome<R>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# mce {} | {}", env!("CARGO_PKG_VERSION"), cfg.canonical().join("; "))?;
    for w in &outcome.warnings {
        writeln!(buf, "# warning: {w}")?;
    }
    let mut writer = csv::Writer::from_writer(buf);
    writer.write_record(R::HEADER)?;
    for row in &outcome.rows {
        writer.write_record(row.record())?;
    }
    writer.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the configured experiment and returns its CSV bytes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    in_pool(cfg.threads, || match cfg.experiment {
        ExperimentKind::Tradeoff => to_csv(cfg, &run_tradeoff(cfg)?),
        ExperimentKind::Statecount => to_csv(cfg, &run_statecount(cfg)?),
        ExperimentKind::GammaSweep => to_csv(cfg, &run_gamma_sweep(cfg)?),
        ExperimentKind::Corruption => to_csv(cfg, &run_corruption(cfg)?),
    })?
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.trials = 3;
        c
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(Summary::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn tradeoff_skips_indivisible_budget() {
        let mut c = small(ExperimentKind::Tradeoff);
        c.chains_grid = vec![3, 10];
        c.eps_levels = vec![0.0, 0.05];
        let out = run_tradeoff(&c).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.chains == 10 && r.horizon == 1000));
        assert_eq!(out.warnings.len(), 1);
        let csv = String::from_utf8(to_csv(&c, &out).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# mce "));
        assert!(lines[1].starts_with("# warning: budget 10000"));
        assert_eq!(lines[2], "M,T,eps,mean,std");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn gamma_sweep_emits_both_targets() {
        let mut c = small(ExperimentKind::GammaSweep);
        c.gamma_grid = vec![0.2, 0.9];
        c.chains = 20;
        c.horizon = 20;
        let out = run_gamma_sweep(&c).unwrap();
        assert_eq!(out.rows.len(), 8);
        assert_eq!(out.rows[0].target, Target::Stationary);
        assert_eq!(out.rows[1].target, Target::Transition);
    }

    #[test]
    fn corruption_with_every_row_corrupted_has_no_bound() {
        let mut c = small(ExperimentKind::Corruption);
        c.corrupt_fractions = vec![1.0];
        c.chains = 10;
        c.horizon = 20;
        let out = run_corruption(&c).unwrap();
        assert_eq!(out.rows[0].m1, 10);
        assert!(!out.rows[0].condition_met);
        assert_eq!(out.rows[0].bound, f64::INFINITY);
    }

    #[test]
    fn statecount_small_grid() {
        let mut c = small(ExperimentKind::Statecount);
        c.omega_grid = vec![2, 40];
        c.eps_levels = vec![0.05];
        let out = run_statecount(&c).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.error.mean <= 2.0));
    }
}
