use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mce_core::bounds::{
    consistency_check, heterogeneity_metrics, thm_corrupted_bound, thm_stationary_bound,
    thm_stationary_bound_triangle, thm_transition_bound, BoundConstants, CorruptionProfile,
};
use mce_core::estimate::split_estimate;
use mce_core::io::{
    format_distribution, format_matrix, parse_index_list, read_matrix, read_trajectories, write_distribution,
    write_matrix, write_trajectories,
};
use mce_core::rng::child_seed;
use mce_core::simulate::{complete_graph_pair, inject_corrupted_rows, lazy_cycle, simulate_ensemble_with, PerturbedRows};
use mce_core::spectral::spectral_summary;
use mce_core::{CorruptionMode, InitPolicy, StochasticMatrix};

use crate::config::{ExperimentConfig, ExperimentKind, DEFAULT_SEED};
use crate::error::{CliError, Result};
use crate::experiments::run_experiment;
use crate::model_file::parse_model;

#[derive(Debug, Parser)]
#[command(name = "mce", version, about = "Markov chain ensemble estimation and error bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble and write a trajectory file.
    Simulate(SimulateArgs),
    /// Estimate the transition matrix and stationary distribution from a trajectory file.
    Estimate(EstimateArgs),
    /// Print stationary distribution and spectral gaps of a transition matrix.
    Spectral(SpectralArgs),
    /// Evaluate heterogeneity metrics, error bounds and consistency conditions.
    Bounds(BoundsArgs),
    /// Run a simulation study and write its CSV.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Lazy cycle walk with `--size` states and move probability `--gamma`.
    LazyCycle,
    /// Walk on the complete graph with `--size` vertices and no self-loops.
    CompleteGraph,
    /// Matrix read from `--matrix`.
    File,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "lazy-cycle")]
    pub model: ModelKind,
    /// Matrix file for `--model file`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<StochasticMatrix> {
        match self.model {
            ModelKind::LazyCycle => Ok(lazy_cycle(self.size, self.gamma)?),
            ModelKind::CompleteGraph => Ok(complete_graph_pair(self.size)?.1),
            ModelKind::File => {
                let path = self.matrix.as_ref().ok_or_else(|| CliError::usage("--model file needs --matrix"))?;
                Ok(read_matrix(path)?)
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Uniform noise level applied independently to each chain's matrix.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 10)]
    pub chains: usize,
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// `uniform`, `stationary` or `point:i`, resolved against the unperturbed matrix.
    #[arg(long, default_value = "stationary")]
    pub init: InitPolicy,
    #[arg(long, default_value_t = 0)]
    pub corrupt_count: usize,
    /// `constant[:i]`, `adversarial-cycle` or `iid-uniform`.
    #[arg(long, default_value = "constant")]
    pub corrupt_mode: CorruptionMode,
    /// Trajectory file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Writes the corrupted row indices, one per line.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Trajectory file.
    pub input: PathBuf,
    /// Corrupted row indices, one per line; adds estimates from the other rows.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    /// Directory for `p_hat.txt` and `pi_hat.txt` (and `*_clean.txt` with
    /// `--split-file`); standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Model description file.
    pub model: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Failure probability of the bounds.
    #[arg(long, default_value_t = 0.05)]
    pub confidence: f64,
    /// Ratio standing for "much larger" in the consistency conditions.
    #[arg(long, default_value_t = 10.0)]
    pub margin: f64,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// `tradeoff`, `statecount`, `gamma-sweep` or `corruption`.
    pub name: ExperimentKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; the file is named `<name>.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Executes a parsed command and returns what it prints on standard output.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Spectral(a) => spectral(&a),
        Command::Bounds(a) => bounds(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn simulate(a: &SimulateArgs) -> Result<String> {
    let p = a.model.build()?;
    let n = p.size();
    if !(a.eps.is_finite() && a.eps >= 0.0) {
        return Err(CliError::usage("--eps must be finite and nonnegative"));
    }
    let perturb_seed = |m: usize| child_seed(child_seed(a.seed, 0), m as u64);
    let initial = a.init.resolve(&p)?;
    let data = simulate_ensemble_with(a.chains, a.horizon, n, child_seed(a.seed, 1), |m| {
        let rows = PerturbedRows::new(&p, a.eps, perturb_seed(m)).expect("noise level validated");
        (rows, initial.clone())
    })?;
    let (data, corrupted) = inject_corrupted_rows(&data, a.corrupt_count, a.corrupt_mode, child_seed(a.seed, 2))?;
    if let Some(path) = &a.split_out {
        let text: String = corrupted.iter().map(|r| format!("{r}\n")).collect();
        fs::write(path, text)?;
    }
    match &a.out {
        Some(path) => {
            write_trajectories(path, &data)?;
            Ok(String::new())
        }
        None => Ok(mce_core::io::format_trajectories(&data)),
    }
}

fn estimate(a: &EstimateArgs) -> Result<String> {
    let data = read_trajectories(&a.input)?;
    let corrupted = match &a.split_file {
        Some(path) => Some(parse_index_list(&fs::read_to_string(path)?)?),
        None => None,
    };
    let split = split_estimate(&data, corrupted.as_deref().unwrap_or(&[]))?;
    let mut outputs = vec![("p_hat", &split.full.transition, &split.full.distribution)];
    if corrupted.is_some() {
        outputs.push(("p_hat_clean", &split.clean.transition, &split.clean.distribution));
    }
    let mut text = String::new();
    for (name, p, pi) in outputs {
        let pi_name = name.replacen("p_hat", "pi_hat", 1);
        match &a.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                write_matrix(dir.join(format!("{name}.txt")), p)?;
                write_distribution(dir.join(format!("{pi_name}.txt")), pi)?;
            }
            None => {
                write!(text, "# {name}\n{}# {pi_name}\n{}", format_matrix(p), format_distribution(pi)).unwrap();
            }
        }
    }
    Ok(text)
}

fn spectral(a: &SpectralArgs) -> Result<String> {
    let p = a.model.build()?;
    let s = spectral_summary(&p)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| x.to_string());
    let pi: Vec<String> = s.stationary.as_slice().iter().map(|x| x.to_string()).collect();
    Ok(format!(
        "gamma_rev {}\ngamma_abs {}\ngamma_ps {}\nk_star {}\npi {}\n",
        opt(s.gamma_rev),
        opt(s.gamma_abs),
        s.gamma_ps,
        s.k_star,
        pi.join(" ")
    ))
}

struct Line {
    quantity: String,
    value: String,
    threshold: String,
    status: String,
}

fn line(quantity: &str, value: impl ToString) -> Line {
    Line { quantity: quantity.to_string(), value: value.to_string(), threshold: String::new(), status: String::new() }
}

fn bounds(a: &BoundsArgs) -> Result<String> {
    let model = parse_model(&fs::read_to_string(&a.model)?)?;
    let n = model.target.size();
    let m0 = model.clean_chains();
    let metrics = heterogeneity_metrics(&model.target, &model.chain_models()?, a.horizon)?;
    let pi = model.target_stationary()?;
    let mut out = vec![
        line("chains", model.total_chains()),
        line("clean_chains", m0),
        line("corrupted_chains", model.corrupted),
        line("delta1", metrics.delta1),
        line("delta_inf", metrics.delta_inf),
        line("pi_bar_min", metrics.pi_bar_min),
        line("eta", metrics.eta),
        line("gamma_min", metrics.gamma_min),
        line("t_prime", metrics.t_prime),
    ];
    let tb = thm_transition_bound(&metrics, m0, a.horizon, n, a.confidence, BoundConstants::TRANSITION)?;
    out.push(line("transition_bound", tb.bound));
    out.push(Line {
        quantity: "transition_condition".into(),
        value: tb.condition_lhs.to_string(),
        threshold: tb.condition_rhs.to_string(),
        status: if tb.condition_met { "met" } else { "not met" }.into(),
    });
    let sb = thm_stationary_bound(&metrics, m0, n, a.confidence, BoundConstants::STATIONARY)?;
    let st = thm_stationary_bound_triangle(&metrics, &pi, m0, n, a.confidence, BoundConstants::STATIONARY)?;
    out.push(line("stationary_bound", sb));
    out.push(line("stationary_bound_target", st));
    if model.corrupted > 0 {
        let profile = CorruptionProfile { m0, m1: model.corrupted, metrics0: metrics.clone() };
        let cb = thm_corrupted_bound(&profile, a.horizon, n, a.confidence, BoundConstants::CORRUPTED)?;
        out.push(line("corrupted_bound", cb.bound));
        out.push(Line {
            quantity: "corrupted_condition".into(),
            value: cb.condition_lhs.to_string(),
            threshold: cb.condition_rhs.to_string(),
            status: if cb.condition_met { "met" } else { "not met" }.into(),
        });
    }
    let report = consistency_check(&metrics, m0, n, Some(&pi), a.margin)?;
    out.push(line("delta1_over_pi_bar_min", report.delta1_over_pi_min));
    for item in &report.items {
        out.push(Line {
            quantity: format!("consistency.{}", item.name),
            value: item.value.to_string(),
            threshold: item.threshold.to_string(),
            status: if item.pass { "pass" } else { "fail" }.into(),
        });
    }
    if a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value", "threshold", "status"])?;
        for l in &out {
            w.write_record([&l.quantity, &l.value, &l.threshold, &l.status])?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        return Ok(String::from_utf8(bytes).expect("csv output is utf-8"));
    }
    let width = out.iter().map(|l| l.quantity.len()).max().unwrap_or(0);
    let mut text = String::new();
    for l in &out {
        let mut row = format!("{:<width$}  {}", l.quantity, l.value);
        if !l.threshold.is_empty() {
            write!(row, "  (threshold {})", l.threshold).unwrap();
        }
        if !l.status.is_empty() {
            write!(row, "  {}", l.status).unwrap();
        }
        text.push_str(row.trim_end());
        text.push('\n');
    }
    Ok(text)
}

fn experiment(a: &ExperimentArgs) -> Result<String> {
    let text = match &a.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(a.name, &text)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(t) = a.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    let bytes = run_experiment(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join(format!("{}.csv", cfg.experiment));
    fs::write(&path, bytes)?;
    Ok(format!("{}\n", display(&path)))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
