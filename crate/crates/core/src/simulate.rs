//! Seeded simulation of Markov chain ensembles, the model builders used in
//! the experiments, random perturbation of transition matrices, and
//! corrupted-row injection.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{Distribution, StateSpace, StochasticMatrix};
use crate::rng::{child_seed, stream, StreamRng};
use crate::spectral::stationary_distribution;
use crate::trajectory::TrajectoryMatrix;

/// Lazy random walk on a cycle: stay with probability `1 - gamma`, move to
/// each neighbour with probability `gamma / 2`. Requires `size >= 3` and
/// `gamma` in `(0, 1/2]`, the range where the closed-form gap holds.
pub fn lazy_cycle(size: usize, gamma: f64) -> Result<StochasticMatrix> {
    if size < 3 {
        return Err(Error::domain(format!("lazy cycle needs at least 3 states, got {size}")));
    }
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::domain(format!("lazy cycle needs gamma in (0, 1/2], got {gamma}")));
    }
    Ok(cycle_walk_unchecked(size, gamma))
}

/// Cycle walk over the wider range `size >= 2`, `gamma` in `(0, 1]`. With two
/// states both neighbours coincide and the move probability is `gamma`.
pub fn cycle_walk(size: usize, gamma: f64) -> Result<StochasticMatrix> {
    if size < 2 {
        return Err(Error::domain(format!("cycle walk needs at least 2 states, got {size}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("cycle walk needs gamma in (0, 1], got {gamma}")));
    }
    Ok(cycle_walk_unchecked(size, gamma))
}

fn cycle_walk_unchecked(size: usize, gamma: f64) -> StochasticMatrix {
    let mut data = vec![0.0; size * size];
    for i in 0..size {
        let row = &mut data[i * size..(i + 1) * size];
        row[i] += 1.0 - gamma;
        row[(i + 1) % size] += gamma / 2.0;
        row[(i + size - 1) % size] += gamma / 2.0;
    }
    StochasticMatrix::from_row_major_unchecked(size, data)
}

/// Random walks on the complete graph with `n` vertices: the first allows
/// self-loops (`1/n` everywhere), the second forbids them.
pub fn complete_graph_pair(n: usize) -> Result<(StochasticMatrix, StochasticMatrix)> {
    if n < 3 {
        return Err(Error::domain(format!("complete graph pair needs n >= 3, got {n}")));
    }
    let with_loops = StochasticMatrix::uniform(n)?;
    let mut data = vec![1.0 / (n - 1) as f64; n * n];
    for i in 0..n {
        data[i * n + i] = 0.0;
    }
    Ok((with_loops, StochasticMatrix::from_row_major_unchecked(n, data)))
}

/// Adds uniform noise on `(-eps, eps)` to `base`, truncates at zero and
/// renormalizes into `out`. A row that truncates to all zeros becomes uniform.
fn perturb_row_into(base: &[f64], eps: f64, rng: &mut StreamRng, out: &mut [f64]) {
    for (o, &b) in out.iter_mut().zip(base) {
        *o = (b + rng.random_range(-eps..eps)).max(0.0);
    }
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|w| *w /= sum);
    } else {
        let u = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|w| *w = u);
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("noise level must be finite and nonnegative, got {eps}")))
    }
}

/// Uniform-noise perturbation of every entry of `p`. Row `i` draws its noise
/// in column order from the stream `child_seed(seed, i)`, so single rows can
/// be regenerated on demand (see [`PerturbedRows`]).
pub fn perturb_uniform(p: &StochasticMatrix, eps: f64, seed: u64) -> Result<StochasticMatrix> {
    check_eps(eps)?;
    if eps == 0.0 {
        return Ok(p.clone());
    }
    let n = p.size();
    let mut data = vec![0.0; n * n];
    for (i, out) in data.chunks_exact_mut(n).enumerate() {
        let mut rng = stream(child_seed(seed, i as u64));
        perturb_row_into(p.row(i), eps, &mut rng, out);
    }
    Ok(StochasticMatrix::from_row_major_unchecked(n, data))
}

/// Applies an explicit noise matrix (row-major) instead of random draws.
pub fn perturb_with_noise(p: &StochasticMatrix, noise: &[f64]) -> Result<StochasticMatrix> {
    Error::check_dim(p.size() * p.size(), noise.len())?;
    let data = p
        .as_row_major()
        .iter()
        .zip(noise)
        .map(|(w, e)| (w + e).max(0.0))
        .collect();
    StochasticMatrix::normalized(p.size(), data)
}

/// Source of transition rows for the simulator.
pub trait TransitionRows {
    fn size(&self) -> usize;
    fn row(&mut self, state: usize) -> &[f64];
}

impl TransitionRows for &StochasticMatrix {
    fn size(&self) -> usize {
        StochasticMatrix::size(self)
    }

    fn row(&mut self, state: usize) -> &[f64] {
        StochasticMatrix::row(self, state)
    }
}

/// A perturbed matrix whose rows are generated when first visited.
/// Row `i` equals row `i` of `perturb_uniform(base, eps, seed)`, which keeps
/// per-chain memory proportional to the visited rows on large state spaces.
pub struct PerturbedRows<'a> {
    base: &'a StochasticMatrix,
    eps: f64,
    seed: u64,
    cache: HashMap<usize, Vec<f64>>,
}

impl<'a> PerturbedRows<'a> {
    pub fn new(base: &'a StochasticMatrix, eps: f64, seed: u64) -> Result<Self> {
        check_eps(eps)?;
        Ok(PerturbedRows { base, eps, seed, cache: HashMap::new() })
    }
}

impl TransitionRows for PerturbedRows<'_> {
    fn size(&self) -> usize {
        self.base.size()
    }

    fn row(&mut self, state: usize) -> &[f64] {
        if self.eps == 0.0 {
            return self.base.row(state);
        }
        let (base, eps, seed) = (self.base, self.eps, self.seed);
        self.cache.entry(state).or_insert_with(|| {
            let mut out = vec![0.0; base.size()];
            let mut rng = stream(child_seed(seed, state as u64));
            perturb_row_into(base.row(state), eps, &mut rng, &mut out);
            out
        })
    }
}

/// Inverse-CDF draw from `weights` using one uniform `u` in `[0, 1)`.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = j;
            if u < acc {
                return j;
            }
        }
    }
    // u landed in the rounding gap between the cumulative sum and 1
    last_positive
}

fn simulate_path<R: TransitionRows>(rows: &mut R, initial: &Distribution, rng: &mut StreamRng, out: &mut [u32]) {
    let mut state = sample_index(initial.as_slice(), rng.random::<f64>());
    out[0] = state as u32;
    for slot in &mut out[1..] {
        state = sample_index(rows.row(state), rng.random::<f64>());
        *slot = state as u32;
    }
}

/// One row of the ensemble: transition matrix `P_m` and initial law `mu_m`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub transition: StochasticMatrix,
    pub initial: Distribution,
}

impl ChainSpec {
    pub fn new(transition: StochasticMatrix, initial: Distribution) -> Result<Self> {
        Error::check_dim(transition.size(), initial.len())?;
        Ok(ChainSpec { transition, initial })
    }

    /// Chain started from its own stationary distribution.
    pub fn stationary(transition: StochasticMatrix) -> Result<Self> {
        let initial = stationary_distribution(&transition)?;
        Ok(ChainSpec { transition, initial })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub chains: Vec<ChainSpec>,
    pub horizon: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(chains: Vec<ChainSpec>, horizon: usize, master_seed: u64) -> Result<Self> {
        let first = chains.first().ok_or_else(|| Error::domain("ensemble needs at least one chain"))?;
        let n = first.transition.size();
        for c in &chains {
            Error::check_dim(n, c.transition.size())?;
            Error::check_dim(n, c.initial.len())?;
        }
        if horizon == 0 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        Ok(EnsembleSpec { chains, horizon, master_seed })
    }

    /// `chains` copies of the same chain.
    pub fn homogeneous(chain: ChainSpec, chains: usize, horizon: usize, master_seed: u64) -> Result<Self> {
        Self::new(vec![chain; chains], horizon, master_seed)
    }
}

/// Samples every row of the ensemble. Row `m` uses the stream
/// `child_seed(master_seed, m)`, so the output does not depend on how rows
/// are distributed over threads.
pub fn simulate_ensemble(spec: &EnsembleSpec) -> TrajectoryMatrix {
    let n = spec.chains[0].transition.size();
    simulate_ensemble_with(spec.chains.len(), spec.horizon, n, spec.master_seed, |m| {
        let c = &spec.chains[m];
        (&c.transition, c.initial.clone())
    })
    .expect("EnsembleSpec is validated on construction")
}

/// Generic driver: `make(m)` supplies the transition rows and initial law of
/// row `m`.
pub fn simulate_ensemble_with<R, F>(
    chains: usize,
    horizon: usize,
    state_count: usize,
    master_seed: u64,
    make: F,
) -> Result<TrajectoryMatrix>
where
    R: TransitionRows,
    F: Fn(usize) -> (R, Distribution) + Sync,
{
    let states = StateSpace::new(state_count)?;
    if chains == 0 || horizon == 0 {
        return Err(Error::domain("ensemble needs at least one chain and horizon >= 1"));
    }
    let width = horizon + 1;
    let mut data = vec![0u32; chains * width];
    data.par_chunks_mut(width).enumerate().try_for_each(|(m, out)| {
        let (mut rows, initial) = make(m);
        Error::check_dim(state_count, rows.size())?;
        Error::check_dim(state_count, initial.len())?;
        let mut rng = stream(child_seed(master_seed, m as u64));
        simulate_path(&mut rows, &initial, &mut rng, out);
        Ok::<_, Error>(())
    })?;
    Ok(TrajectoryMatrix::from_parts_unchecked(chains, horizon, states, data))
}

/// How a corrupted row is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionMode {
    /// Every entry is the given state.
    Constant(usize),
    /// Deterministic sweep `0, 1, 2, ...` modulo the state count.
    AdversarialCycle,
    /// Independent uniform states.
    IidUniform,
}

impl fmt::Display for CorruptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorruptionMode::Constant(0) => f.write_str("constant"),
            CorruptionMode::Constant(s) => write!(f, "constant:{s}"),
            CorruptionMode::AdversarialCycle => f.write_str("adversarial-cycle"),
            CorruptionMode::IidUniform => f.write_str("iid-uniform"),
        }
    }
}

impl FromStr for CorruptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(CorruptionMode::Constant(0)),
            "adversarial-cycle" => Ok(CorruptionMode::AdversarialCycle),
            "iid-uniform" => Ok(CorruptionMode::IidUniform),
            _ => s
                .strip_prefix("constant:")
                .and_then(|v| v.parse().ok())
                .map(CorruptionMode::Constant)
                .ok_or_else(|| Error::domain(format!("unknown corruption mode {s:?}"))),
        }
    }
}

/// Overwrites `m1` rows chosen uniformly without replacement. Returns the new
/// data and the sorted indices of the corrupted rows.
pub fn inject_corrupted_rows(
    data: &TrajectoryMatrix,
    m1: usize,
    mode: CorruptionMode,
    seed: u64,
) -> Result<(TrajectoryMatrix, Vec<usize>)> {
    let m = data.chains();
    if m1 > m {
        return Err(Error::domain(format!("cannot corrupt {m1} of {m} rows")));
    }
    let n = data.state_count();
    if let CorruptionMode::Constant(s) = mode {
        if s >= n {
            return Err(Error::domain(format!("constant state {s} outside 0..{n}")));
        }
    }
    let mut rng = stream(seed);
    let mut rows = rand::seq::index::sample(&mut rng, m, m1).into_vec();
    rows.sort_unstable();
    let mut out = data.clone();
    for &r in &rows {
        let row = out.row_mut(r);
        match mode {
            CorruptionMode::Constant(s) => row.fill(s as u32),
            CorruptionMode::AdversarialCycle => {
                row.iter_mut().enumerate().for_each(|(t, x)| *x = (t % n) as u32)
            }
            CorruptionMode::IidUniform => row.iter_mut().for_each(|x| *x = rng.random_range(0..n) as u32),
        }
    }
    Ok((out, rows))
}

/// Initial law of each simulated chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    Uniform,
    /// The chain's own stationary distribution.
    Stationary,
    Point(usize),
}

impl InitPolicy {
    pub fn resolve(self, p: &StochasticMatrix) -> Result<Distribution> {
        match self {
            InitPolicy::Uniform => Distribution::uniform(p.size()),
            InitPolicy::Stationary => stationary_distribution(p),
            InitPolicy::Point(i) => Distribution::point_mass(p.size(), i),
        }
    }
}

impl fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitPolicy::Uniform => f.write_str("uniform"),
            InitPolicy::Stationary => f.write_str("stationary"),
            InitPolicy::Point(i) => write!(f, "point:{i}"),
        }
    }
}

impl FromStr for InitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitPolicy::Uniform),
            "stationary" => Ok(InitPolicy::Stationary),
            _ => s
                .strip_prefix("point:")
                .and_then(|v| v.parse().ok())
                .map(InitPolicy::Point)
                .ok_or_else(|| Error::domain(format!("unknown init policy {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sup_norm_matrix;

    #[test]
    fn lazy_cycle_rows() {
        let p = lazy_cycle(3, 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(p.get(i, i), 0.5);
            assert_eq!(p.get(i, (i + 1) % 3), 0.25);
            assert_eq!(p.get(i, (i + 2) % 3), 0.25);
        }
        assert!(lazy_cycle(2, 0.1).is_err());
        assert!(lazy_cycle(5, 0.0).is_err());
        assert!(lazy_cycle(5, 0.6).is_err());
        let p = lazy_cycle(10, 0.1).unwrap();
        for (i, j) in (0..10).flat_map(|i| (0..10).map(move |j| (i, j))) {
            assert_eq!(p.get(i, j), p.get(j, i));
        }
    }

    #[test]
    fn cycle_walk_two_states() {
        let p = cycle_walk(2, 0.1).unwrap();
        assert!((p.get(0, 1) - 0.1).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.9).abs() < 1e-15);
        assert!(cycle_walk(10, 1.0).is_ok());
        assert!(cycle_walk(10, 1.1).is_err());
    }

    #[test]
    fn complete_graph_rows() {
        let (p, pm) = complete_graph_pair(4).unwrap();
        assert_eq!(p.row(0), &[0.25; 4]);
        assert_eq!(pm.row(0)[0], 0.0);
        for j in 1..4 {
            assert!((pm.get(0, j) - 1.0 / 3.0).abs() < 1e-15);
        }
        let (p3, pm3) = complete_graph_pair(3).unwrap();
        assert!((sup_norm_matrix(&p3, &pm3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(complete_graph_pair(2).is_err());
    }

    #[test]
    fn perturb_zero_noise_is_identity() {
        let p = lazy_cycle(5, 0.2).unwrap();
        assert_eq!(perturb_uniform(&p, 0.0, 9).unwrap(), p);
        assert!(perturb_uniform(&p, -0.1, 9).is_err());
    }

    #[test]
    fn perturb_fixed_noise_draw() {
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let out = perturb_with_noise(&p, &[0.0, -0.2, 0.0, 0.0]).unwrap();
        assert_eq!(out.row(0), &[1.0, 0.0]);
        // a row truncated to zero falls back to uniform
        let out = perturb_with_noise(&p, &[0.0, -0.2, -0.6, -0.6]).unwrap();
        assert_eq!(out.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn lazy_rows_match_eager_perturbation() {
        let p = lazy_cycle(6, 0.3).unwrap();
        let eager = perturb_uniform(&p, 0.05, 77).unwrap();
        let mut lazy = PerturbedRows::new(&p, 0.05, 77).unwrap();
        for i in [3, 0, 5, 3, 1, 2, 4] {
            assert_eq!(lazy.row(i), eager.row(i));
        }
    }

    #[test]
    fn deterministic_flip_chain() {
        let flip = StochasticMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let chain = ChainSpec::new(flip, Distribution::point_mass(2, 0).unwrap()).unwrap();
        let spec = EnsembleSpec::homogeneous(chain, 1, 4, 5).unwrap();
        assert_eq!(simulate_ensemble(&spec).row(0), &[0, 1, 0, 1, 0]);
    }

    #[test]
    fn absorbing_state_gives_constant_row() {
        let p = StochasticMatrix::from_rows(vec![vec![0.5, 0.5, 0.0], vec![0.0, 1.0, 0.0], vec![0.2, 0.3, 0.5]])
            .unwrap();
        let chain = ChainSpec::new(p, Distribution::point_mass(3, 1).unwrap()).unwrap();
        let spec = EnsembleSpec::homogeneous(chain, 3, 20, 11).unwrap();
        let data = simulate_ensemble(&spec);
        assert!(data.rows().all(|r| r.iter().all(|&s| s == 1)));
    }

    #[test]
    fn sample_index_edges() {
        assert_eq!(sample_index(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 0.999_999_999_999), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.5), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.49), 0);
    }

    #[test]
    fn corruption_cases() {
        let p = lazy_cycle(4, 0.5).unwrap();
        let spec = EnsembleSpec::homogeneous(ChainSpec::stationary(p).unwrap(), 6, 5, 1).unwrap();
        let data = simulate_ensemble(&spec);
        let (same, idx) = inject_corrupted_rows(&data, 0, CorruptionMode::IidUniform, 3).unwrap();
        assert_eq!(same, data);
        assert!(idx.is_empty());

        let (all, idx) = inject_corrupted_rows(&data, 6, CorruptionMode::Constant(0), 3).unwrap();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
        assert!(all.rows().all(|r| r.iter().all(|&s| s == 0)));

        let (cyc, idx) = inject_corrupted_rows(&data, 2, CorruptionMode::AdversarialCycle, 3).unwrap();
        assert_eq!(idx.len(), 2);
        assert!(idx[0] < idx[1]);
        assert_eq!(cyc.row(idx[0]), &[0, 1, 2, 3, 0, 1]);

        assert!(inject_corrupted_rows(&data, 7, CorruptionMode::IidUniform, 3).is_err());
        assert!(inject_corrupted_rows(&data, 1, CorruptionMode::Constant(4), 3).is_err());
    }

    #[test]
    fn mode_and_policy_parse() {
        for s in ["constant", "constant:3", "adversarial-cycle", "iid-uniform"] {
            assert_eq!(s.parse::<CorruptionMode>().unwrap().to_string(), s);
        }
        assert!("constant:x".parse::<CorruptionMode>().is_err());
        for s in ["uniform", "stationary", "point:2"] {
            assert_eq!(s.parse::<InitPolicy>().unwrap().to_string(), s);
        }
        assert!("point".parse::<InitPolicy>().is_err());
    }
}
