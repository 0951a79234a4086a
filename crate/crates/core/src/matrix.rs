//! Stochastic vectors and matrices over a finite state space, plus the
//! norms used to measure estimation error.
//!
//! States are dense indices `0..n`. Constructors validate nonnegativity and
//! normalization to within [`STOCHASTIC_TOL`]; renormalization only happens
//! through the explicit `normalized` constructors.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// Absolute tolerance on row sums for a vector or matrix to count as stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite state space `{0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateSpace(usize);

impl StateSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::domain("state space must contain at least one state"));
        }
        Ok(StateSpace(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn contains(self, state: usize) -> bool {
        state < self.0
    }
}

fn check_stochastic_row(row: &[f64], what: impl Fn() -> String) -> Result<()> {
    let mut sum = 0.0;
    for (j, &w) in row.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NotStochastic(format!("{} has entry {w} at index {j}", what())));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic(format!("{} sums to {sum}", what())));
    }
    Ok(())
}

/// Divides `row` by its sum; an all-zero row becomes uniform.
fn renormalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|w| *w /= sum);
    } else {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|w| *w = u);
    }
}

/// A probability vector on a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("distribution must have at least one state"));
        }
        check_stochastic_row(&weights, || "distribution".to_string())?;
        Ok(Distribution { weights })
    }

    /// Builds a distribution from nonnegative weights by dividing by their sum.
    /// All-zero weights give the uniform distribution.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("distribution must have at least one state"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::NotStochastic(format!("negative or non-finite weight {w}")));
        }
        renormalize_row(&mut weights);
        Ok(Distribution { weights })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        let n = StateSpace::new(size)?.size();
        Ok(Distribution { weights: vec![1.0 / n as f64; n] })
    }

    pub fn point_mass(size: usize, state: usize) -> Result<Self> {
        let n = StateSpace::new(size)?.size();
        if state >= n {
            return Err(Error::domain(format!("state {state} outside 0..{n}")));
        }
        let mut weights = vec![0.0; n];
        weights[state] = 1.0;
        Ok(Distribution { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row vector times matrix, `mu P`.
    pub fn step(&self, p: &StochasticMatrix) -> Result<Distribution> {
        Error::check_dim(p.size(), self.len())?;
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &pij) in out.iter_mut().zip(p.row(i)) {
                *o += w * pij;
            }
        }
        Ok(Distribution { weights: out })
    }
}

impl Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// A dense row-stochastic square matrix, stored row-major.
#[derive(Clone, PartialEq)]
pub struct StochasticMatrix {
    size: usize,
    data: Vec<f64>,
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl StochasticMatrix {
    /// Validates a row-major `size * size` buffer.
    pub fn from_row_major(size: usize, data: Vec<f64>) -> Result<Self> {
        StateSpace::new(size)?;
        Error::check_dim(size * size, data.len())?;
        for (i, row) in data.chunks_exact(size).enumerate() {
            check_stochastic_row(row, || format!("row {i}"))?;
        }
        Ok(StochasticMatrix { size, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for row in rows {
            Error::check_dim(size, row.len())?;
            data.extend(row);
        }
        Self::from_row_major(size, data)
    }

    /// Renormalizes each row of a nonnegative matrix; zero rows become uniform.
    pub fn normalized(size: usize, mut data: Vec<f64>) -> Result<Self> {
        StateSpace::new(size)?;
        Error::check_dim(size * size, data.len())?;
        if let Some(w) = data.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::NotStochastic(format!("negative or non-finite weight {w}")));
        }
        data.chunks_exact_mut(size).for_each(renormalize_row);
        Ok(StochasticMatrix { size, data })
    }

    /// Skips validation; callers guarantee the invariants hold by construction.
    pub(crate) fn from_row_major_unchecked(size: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), size * size);
        StochasticMatrix { size, data }
    }

    pub fn identity(size: usize) -> Result<Self> {
        StateSpace::new(size)?;
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Ok(StochasticMatrix { size, data })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        StateSpace::new(size)?;
        Ok(StochasticMatrix { size, data: vec![1.0 / size as f64; size * size] })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace(self.size)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.size)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// Matrix product `self * other`; the product of stochastic matrices is stochastic.
    pub fn matmul(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        Error::check_dim(self.size, other.size)?;
        let n = self.size;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(StochasticMatrix { size: n, data: out })
    }

    /// Whether `pi_i P_ij = pi_j P_ji` for all pairs, to within `tol`.
    pub fn is_reversible(&self, pi: &Distribution, tol: f64) -> bool {
        if pi.len() != self.size {
            return false;
        }
        (0..self.size).all(|i| {
            (i + 1..self.size).all(|j| (pi[i] * self.get(i, j) - pi[j] * self.get(j, i)).abs() <= tol)
        })
    }
}

impl Index<(usize, usize)> for StochasticMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.size + j]
    }
}

/// Maximum row sum norm of `a - b`: the largest rowwise L1 distance, which is
/// twice the largest rowwise total variation distance.
pub fn sup_norm_matrix(a: &StochasticMatrix, b: &StochasticMatrix) -> Result<f64> {
    Error::check_dim(a.size(), b.size())?;
    Ok(a.rows()
        .zip(b.rows())
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Largest absolute componentwise difference `max_i |a_i - b_i|`.
pub fn sup_norm_vector(a: &[f64], b: &[f64]) -> Result<f64> {
    Error::check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn bfs_levels(n: usize, adjacency: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].map(|l| l + 1);
        for &v in &adjacency[u] {
            if level[v].is_none() {
                level[v] = next;
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Whether the support graph of `p` is strongly connected.
pub fn is_irreducible(p: &StochasticMatrix) -> bool {
    let n = p.size();
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| p.get(i, j) > 0.0).collect())
        .collect();
    let mut backward = vec![Vec::new(); n];
    for (i, succ) in forward.iter().enumerate() {
        for &j in succ {
            backward[j].push(i);
        }
    }
    bfs_levels(n, &forward, 0).iter().all(Option::is_some)
        && bfs_levels(n, &backward, 0).iter().all(Option::is_some)
}

/// Exact test for irreducibility and aperiodicity.
///
/// Irreducibility is strong connectivity of the support graph. For an
/// irreducible chain the period is `gcd(level(u) + 1 - level(v))` over all
/// support edges `u -> v`, where `level` is the BFS distance from state 0;
/// the chain is aperiodic when this gcd is 1. Runs in `O(n^2)`.
pub fn validate_irreducible_aperiodic(p: &StochasticMatrix) -> bool {
    if !is_irreducible(p) {
        return false;
    }
    let n = p.size();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| p.get(i, j) > 0.0).collect())
        .collect();
    let level = bfs_levels(n, &adjacency, 0);
    let mut period = 0;
    for (u, succ) in adjacency.iter().enumerate() {
        let lu = level[u].expect("irreducible");
        for &v in succ {
            let lv = level[v].expect("irreducible");
            period = gcd(period, (lu + 1).abs_diff(lv));
            if period == 1 {
                return true;
            }
        }
    }
    period == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flip() -> StochasticMatrix {
        StochasticMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.6]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(StateSpace::new(0).is_err());
        // within tolerance
        assert!(Distribution::new(vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn normalized_constructors() {
        let d = Distribution::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(d.as_slice(), &[0.25, 0.75]);
        let p = StochasticMatrix::normalized(2, vec![2.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.row(0), &[0.5, 0.5]);
        assert_eq!(p.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn sup_norm_matrix_cases() {
        let p = StochasticMatrix::uniform(3).unwrap();
        assert_eq!(sup_norm_matrix(&p, &p).unwrap(), 0.0);
        let id = StochasticMatrix::identity(2).unwrap();
        assert_eq!(sup_norm_matrix(&id, &flip()).unwrap(), 2.0);
        assert!(matches!(
            sup_norm_matrix(&id, &p),
            Err(Error::Dimension { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn sup_norm_vector_cases() {
        assert_eq!(sup_norm_vector(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(sup_norm_vector(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.5);
        let n = 7;
        let u = Distribution::uniform(n).unwrap();
        let d = Distribution::point_mass(n, 3).unwrap();
        let got = sup_norm_vector(u.as_slice(), d.as_slice()).unwrap();
        assert!((got - (1.0 - 1.0 / n as f64)).abs() < 1e-15);
        assert!(sup_norm_vector(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn irreducible_aperiodic_cases() {
        assert!(!validate_irreducible_aperiodic(&StochasticMatrix::identity(3).unwrap()));
        assert!(!validate_irreducible_aperiodic(&flip()));
        assert!(validate_irreducible_aperiodic(&StochasticMatrix::uniform(4).unwrap()));
        // 3-cycle without holding: period 3
        let rot = StochasticMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(!validate_irreducible_aperiodic(&rot));
        // cycles of length 2 and 3 through state 0: gcd 1
        let mixed = StochasticMatrix::from_rows(vec![
            vec![0.0, 0.5, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(validate_irreducible_aperiodic(&mixed));
        assert!(validate_irreducible_aperiodic(&StochasticMatrix::identity(1).unwrap()));
    }

    #[test]
    fn step_preserves_mass() {
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let mu = Distribution::new(vec![1.0, 0.0]).unwrap().step(&p).unwrap();
        assert_eq!(mu.as_slice(), &[0.9, 0.1]);
    }
}
