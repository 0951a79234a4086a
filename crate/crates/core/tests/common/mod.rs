#![allow(dead_code)]

use mce_core::rng::{stream, StreamRng};
use mce_core::{Distribution, StochasticMatrix, TrajectoryMatrix};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    stream(seed)
}

pub fn random_stochastic(rng: &mut StreamRng, n: usize) -> StochasticMatrix {
    let data = (0..n * n).map(|_| rng.random::<f64>() + 0.01).collect();
    StochasticMatrix::normalized(n, data).unwrap()
}

/// Random reversible matrix from a symmetric positive weight matrix; the
/// stationary law is proportional to the row sums.
pub fn random_reversible(rng: &mut StreamRng, n: usize) -> (StochasticMatrix, Distribution) {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rng.random::<f64>() + 0.05;
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    let sums: Vec<f64> = (0..n).map(|i| w[i * n..(i + 1) * n].iter().sum()).collect();
    let total: f64 = sums.iter().sum();
    let pi = Distribution::normalized(sums.iter().map(|s| s / total).collect()).unwrap();
    (StochasticMatrix::normalized(n, w).unwrap(), pi)
}

pub fn random_trajectories(rng: &mut StreamRng, m: usize, t: usize, n: usize) -> TrajectoryMatrix {
    let data = (0..m * (t + 1)).map(|_| rng.random_range(0..n) as u32).collect();
    TrajectoryMatrix::new(m, t, n, data).unwrap()
}

/// Plain row-major product of square matrices.
pub fn dense_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    out
}

/// Real parts of the eigenvalues of a general square matrix, descending.
pub fn dense_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

pub struct BruteCounts {
    pub state: Vec<u64>,
    pub transition: Vec<Vec<u64>>,
    pub chain_state: Vec<Vec<u64>>,
}

pub fn brute_counts(data: &TrajectoryMatrix) -> BruteCounts {
    let (m, t, n) = (data.chains(), data.horizon(), data.state_count());
    let mut out = BruteCounts {
        state: vec![0; n],
        transition: vec![vec![0; n]; n],
        chain_state: vec![vec![0; n]; m],
    };
    for c in 0..m {
        for i in 0..n {
            for j in 0..n {
                for s in 1..=t {
                    if data.get(c, s - 1) == i && data.get(c, s) == j {
                        out.transition[i][j] += 1;
                    }
                }
            }
            for s in 1..=t {
                if data.get(c, s - 1) == i {
                    out.state[i] += 1;
                    out.chain_state[c][i] += 1;
                }
            }
        }
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn sup_row_l1(a: &StochasticMatrix, b: &StochasticMatrix) -> f64 {
    a.rows().zip(b.rows()).map(|(x, y)| l1(x, y)).fold(0.0, f64::max)
}
