//! Count tables and the plug-in estimators built from them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{Distribution, StochasticMatrix};
use crate::trajectory::TrajectoryMatrix;

/// State and transition counts over `t = 1..=T`: `N_i` counts visits to `i`
/// at times `0..T` and `N_ij` counts the steps `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    chains: usize,
    horizon: usize,
    size: usize,
    state_counts: Vec<u64>,
    transition_counts: Vec<u64>,
    per_chain_state: Vec<u64>,
    per_chain_transition: Option<Vec<u64>>,
}

impl CountTables {
    /// Tables for an empty set of chains.
    pub fn empty(size: usize, horizon: usize) -> Self {
        CountTables {
            chains: 0,
            horizon,
            size,
            state_counts: vec![0; size],
            transition_counts: vec![0; size * size],
            per_chain_state: Vec::new(),
            per_chain_transition: None,
        }
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of observed transitions `M T`.
    pub fn total(&self) -> u64 {
        (self.chains * self.horizon) as u64
    }

    /// `N_i`.
    pub fn state_count(&self, i: usize) -> u64 {
        self.state_counts[i]
    }

    pub fn state_counts(&self) -> &[u64] {
        &self.state_counts
    }

    /// `N_ij`.
    pub fn transition_count(&self, i: usize, j: usize) -> u64 {
        self.transition_counts[i * self.size + j]
    }

    pub fn transition_counts(&self) -> &[u64] {
        &self.transition_counts
    }

    /// `N_{m,i}`.
    pub fn chain_state_count(&self, m: usize, i: usize) -> u64 {
        self.per_chain_state[m * self.size + i]
    }

    /// `N_{m,i,j}`; only present for tables built by [`count_detailed`].
    pub fn chain_transition_count(&self, m: usize, i: usize, j: usize) -> Option<u64> {
        let n = self.size;
        self.per_chain_transition.as_ref().map(|t| t[(m * n + i) * n + j])
    }

    /// Tables of the row-wise concatenation of the two underlying data sets.
    pub fn merge(&self, other: &CountTables) -> Result<CountTables> {
        Error::check_dim(self.size, other.size)?;
        Error::check_dim(self.horizon, other.horizon)?;
        let add = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        let per_chain_transition = match (&self.per_chain_transition, &other.per_chain_transition) {
            (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
            _ => None,
        };
        Ok(CountTables {
            chains: self.chains + other.chains,
            horizon: self.horizon,
            size: self.size,
            state_counts: add(&self.state_counts, &other.state_counts),
            transition_counts: add(&self.transition_counts, &other.transition_counts),
            per_chain_state: [self.per_chain_state.as_slice(), other.per_chain_state.as_slice()].concat(),
            per_chain_transition,
        })
    }
}

fn count_rows(data: &TrajectoryMatrix, rows: std::ops::Range<usize>) -> (Vec<u64>, Vec<u64>) {
    let n = data.state_count();
    let mut states = vec![0u64; n];
    let mut transitions = vec![0u64; n * n];
    for m in rows {
        for w in data.row(m).windows(2) {
            let (i, j) = (w[0] as usize, w[1] as usize);
            states[i] += 1;
            transitions[i * n + j] += 1;
        }
    }
    (states, transitions)
}

/// Builds the count tables. Rows are split into one block per worker thread
/// and the partial tables are summed, which is exact for integers.
pub fn count(data: &TrajectoryMatrix) -> CountTables {
    let n = data.state_count();
    let m = data.chains();
    let blocks = rayon::current_num_threads().clamp(1, m);
    let block_len = m.div_ceil(blocks);
    let (state_counts, transition_counts) = (0..blocks)
        .into_par_iter()
        .map(|b| count_rows(data, b * block_len..((b + 1) * block_len).min(m)))
        .reduce(
            || (vec![0; n], vec![0; n * n]),
            |(mut s, mut t), (s2, t2)| {
                s.iter_mut().zip(s2).for_each(|(a, b)| *a += b);
                t.iter_mut().zip(t2).for_each(|(a, b)| *a += b);
                (s, t)
            },
        );
    let mut per_chain_state = vec![0u64; m * n];
    per_chain_state.par_chunks_mut(n).enumerate().for_each(|(c, out)| {
        let row = data.row(c);
        for &s in &row[..row.len() - 1] {
            out[s as usize] += 1;
        }
    });
    CountTables {
        chains: m,
        horizon: data.horizon(),
        size: n,
        state_counts,
        transition_counts,
        per_chain_state,
        per_chain_transition: None,
    }
}

/// Like [`count`] but also materializes the `M x n x n` per-chain transition
/// counts.
pub fn count_detailed(data: &TrajectoryMatrix) -> CountTables {
    let mut tables = count(data);
    let n = data.state_count();
    let mut per_chain = vec![0u64; data.chains() * n * n];
    per_chain.par_chunks_mut(n * n).enumerate().for_each(|(m, out)| {
        for w in data.row(m).windows(2) {
            out[w[0] as usize * n + w[1] as usize] += 1;
        }
    });
    tables.per_chain_transition = Some(per_chain);
    tables
}

/// `P_ij = N_ij / N_i` on visited rows, uniform on rows with `N_i = 0`.
pub fn empirical_transition_matrix(counts: &CountTables) -> StochasticMatrix {
    let n = counts.size;
    let uniform = 1.0 / n as f64;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        let ni = counts.state_counts[i];
        if ni == 0 {
            data.extend(std::iter::repeat_n(uniform, n));
        } else {
            let row = &counts.transition_counts[i * n..(i + 1) * n];
            data.extend(row.iter().map(|&c| c as f64 / ni as f64));
        }
    }
    StochasticMatrix::from_row_major_unchecked(n, data)
}

/// `pi_i = N_i / (M T)`; uniform when the tables cover no chains.
pub fn empirical_distribution(counts: &CountTables) -> Distribution {
    let total = counts.total();
    if total == 0 {
        return Distribution::uniform(counts.size).expect("nonempty state space");
    }
    let weights = counts.state_counts.iter().map(|&c| c as f64 / total as f64).collect();
    Distribution::new(weights).expect("counts sum to M T")
}

/// Visit-weighted mixture of the chain matrices:
/// `P~_ij = sum_m (N_{m,i} / N_i) P_m(i, j)`, uniform on rows with `N_i = 0`.
pub fn mean_transition_matrix(counts: &CountTables, chain_matrices: &[StochasticMatrix]) -> Result<StochasticMatrix> {
    Error::check_dim(counts.chains, chain_matrices.len())?;
    let n = counts.size;
    for p in chain_matrices {
        Error::check_dim(n, p.size())?;
    }
    let uniform = 1.0 / n as f64;
    let mut data = vec![0.0; n * n];
    for (i, out) in data.chunks_exact_mut(n).enumerate() {
        let ni = counts.state_counts[i];
        if ni == 0 {
            out.fill(uniform);
            continue;
        }
        for (m, p) in chain_matrices.iter().enumerate() {
            let weight = counts.chain_state_count(m, i) as f64 / ni as f64;
            if weight == 0.0 {
                continue;
            }
            for (o, &pij) in out.iter_mut().zip(p.row(i)) {
                *o += weight * pij;
            }
        }
    }
    // convex combinations of stochastic rows
    StochasticMatrix::from_row_major(n, data)
}

#[derive(Debug, Clone)]
pub struct Estimates {
    pub transition: StochasticMatrix,
    pub distribution: Distribution,
}

impl Estimates {
    pub fn from_counts(counts: &CountTables) -> Self {
        Estimates {
            transition: empirical_transition_matrix(counts),
            distribution: empirical_distribution(counts),
        }
    }
}

/// Estimators on the uncorrupted rows alongside the full-data estimators.
#[derive(Debug, Clone)]
pub struct SplitEstimate {
    pub clean: Estimates,
    pub full: Estimates,
    pub clean_counts: CountTables,
    pub corrupted_counts: CountTables,
}

/// `corrupted` lists row indices; duplicates are ignored. When every row is
/// corrupted the clean estimators are uniform.
pub fn split_estimate(data: &TrajectoryMatrix, corrupted: &[usize]) -> Result<SplitEstimate> {
    let m = data.chains();
    let mut flags = vec![false; m];
    for &r in corrupted {
        if r >= m {
            return Err(Error::domain(format!("corrupted row {r} outside 0..{m}")));
        }
        flags[r] = true;
    }
    let tables = |keep: bool| {
        data.select_rows(|r| flags[r] == keep)
            .map_or_else(|| CountTables::empty(data.state_count(), data.horizon()), |d| count(&d))
    };
    let clean_counts = tables(false);
    let corrupted_counts = tables(true);
    let full_counts = clean_counts.merge(&corrupted_counts)?;
    Ok(SplitEstimate {
        clean: Estimates::from_counts(&clean_counts),
        full: Estimates::from_counts(&full_counts),
        clean_counts,
        corrupted_counts,
    })
}
