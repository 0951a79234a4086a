//! Stationary distributions, time reversal and spectral gaps.
//!
//! Eigenvalues are only ever taken of matrices that are reversible with
//! respect to a positive stationary vector `pi`. Such a matrix `A` is
//! similar to the symmetric matrix `D^{1/2} A D^{-1/2}` with `D = diag(pi)`,
//! which is handed to a dense symmetric eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::{is_irreducible, validate_irreducible_aperiodic, Distribution, StochasticMatrix};

/// Tolerance for detailed balance `pi_i P_ij = pi_j P_ji`.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// Largest admissible asymmetry of the symmetrized matrix.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Largest L1 residual `|pi P - pi|_1` accepted for a stationary vector.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// Iteration cap for the pseudo-spectral gap search.
const MAX_POWER: usize = 10_000_000;

/// Solves `pi (P - I) = 0` with one balance equation replaced by `sum(pi) = 1`.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<Distribution> {
    if !is_irreducible(p) {
        return Err(Error::domain("no unique stationary vector: matrix is not irreducible"));
    }
    let n = p.size();
    if n == 1 {
        return Distribution::uniform(1);
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = p.get(i, j);
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::domain("no unique stationary vector: singular balance equations"))?;
    // Solver noise can leave tiny negative entries on states of negligible mass.
    let weights: Vec<f64> = x.iter().map(|&w| w.max(0.0)).collect();
    let pi = Distribution::normalized(weights)?;
    let residual = stationarity_residual(p, &pi)?;
    if residual > STATIONARITY_TOL {
        return Err(Error::domain(format!(
            "stationary solve did not converge (residual {residual:e})"
        )));
    }
    Ok(pi)
}

/// L1 norm of `pi P - pi`.
pub fn stationarity_residual(p: &StochasticMatrix, pi: &Distribution) -> Result<f64> {
    let next = pi.step(p)?;
    Ok(next.as_slice().iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum())
}

/// The adjoint chain `P*_{ij} = (pi_j / pi_i) P_{ji}`.
pub fn time_reversal(p: &StochasticMatrix, pi: &Distribution) -> Result<StochasticMatrix> {
    Error::check_dim(p.size(), pi.len())?;
    if pi.min() <= 0.0 {
        return Err(Error::domain("time reversal needs a strictly positive stationary vector"));
    }
    let residual = stationarity_residual(p, pi)?;
    if residual > STATIONARITY_TOL {
        return Err(Error::domain(format!("vector is not stationary (residual {residual:e})")));
    }
    let n = p.size();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(pi[j] / pi[i] * p.get(j, i));
        }
    }
    // Rows sum to (pi P)_i / pi_i, which is 1 up to the residual checked above.
    StochasticMatrix::normalized(n, data)
}

/// Eigenvalues of a `pi`-reversible matrix in decreasing order.
fn reversible_spectrum(a: &StochasticMatrix, pi: &Distribution) -> Result<Vec<f64>> {
    let n = a.size();
    let sqrt_pi: Vec<f64> = pi.as_slice().iter().map(|w| w.sqrt()).collect();
    let mut sym = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = sqrt_pi[i] * a.get(i, j) / sqrt_pi[j];
        }
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (sym[(i, j)], sym[(j, i)]);
            asym = asym.max((x - y).abs());
            let avg = 0.5 * (x + y);
            sym[(i, j)] = avg;
            sym[(j, i)] = avg;
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::domain(format!("symmetrized matrix is asymmetric by {asym:e}")));
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

fn check_reversible(p: &StochasticMatrix, pi: &Distribution) -> Result<()> {
    Error::check_dim(p.size(), pi.len())?;
    if pi.min() <= 0.0 {
        return Err(Error::domain("spectral gap needs a strictly positive stationary vector"));
    }
    if !p.is_reversible(pi, REVERSIBILITY_TOL) {
        return Err(Error::domain("matrix is not reversible with respect to the given vector"));
    }
    Ok(())
}

/// Eigenvalues of a reversible `p`, in decreasing order.
pub fn reversible_eigenvalues(p: &StochasticMatrix, pi: &Distribution) -> Result<Vec<f64>> {
    check_reversible(p, pi)?;
    reversible_spectrum(p, pi)
}

/// `1 - lambda_2(P)` for `P` reversible with respect to `pi`. A one-state
/// chain has gap 1.
pub fn gamma_rev(p: &StochasticMatrix, pi: &Distribution) -> Result<f64> {
    check_reversible(p, pi)?;
    if !is_irreducible(p) {
        return Err(Error::domain("spectral gap is defined for irreducible matrices only"));
    }
    Ok(second_eigenvalue_gap(&reversible_spectrum(p, pi)?))
}

fn second_eigenvalue_gap(spectrum: &[f64]) -> f64 {
    spectrum.get(1).map_or(1.0, |l2| 1.0 - l2)
}

/// Absolute spectral gap `1 - max{|lambda| : lambda != 1}` of a reversible `P`.
pub fn gamma_abs(p: &StochasticMatrix, pi: &Distribution) -> Result<f64> {
    check_reversible(p, pi)?;
    if !is_irreducible(p) {
        return Err(Error::domain("spectral gap is defined for irreducible matrices only"));
    }
    let spectrum = reversible_spectrum(p, pi)?;
    // the leading eigenvalue of an irreducible chain is the simple eigenvalue 1
    Ok(1.0 - spectrum.iter().skip(1).map(|l| l.abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoSpectralGap {
    pub gamma: f64,
    /// Smallest power attaining the supremum.
    pub k_star: usize,
}

/// `sup_k gamma_rev((P*)^k P^k) / k`.
///
/// Since `gamma_rev <= 1`, every term with index `k` is at most `1 / k`, so
/// the search stops at the first `k` with `1 / k <= best` and the result is
/// the exact supremum.
pub fn pseudo_spectral_gap(p: &StochasticMatrix) -> Result<PseudoSpectralGap> {
    let pi = stationary_distribution(p)?;
    pseudo_spectral_gap_with(p, &pi)
}

pub fn pseudo_spectral_gap_with(p: &StochasticMatrix, pi: &Distribution) -> Result<PseudoSpectralGap> {
    if !validate_irreducible_aperiodic(p) {
        return Err(Error::domain("pseudo-spectral gap needs an irreducible aperiodic matrix"));
    }
    let reversal = time_reversal(p, pi)?;
    let mut forward = p.clone();
    let mut backward = reversal.clone();
    let mut best = PseudoSpectralGap { gamma: 0.0, k_star: 1 };
    for k in 1..=MAX_POWER {
        if 1.0 / k as f64 <= best.gamma {
            return Ok(best);
        }
        if k > 1 {
            forward = forward.matmul(p)?;
            backward = backward.matmul(&reversal)?;
        }
        // (P*)^k P^k is pi-reversible by construction
        let product = backward.matmul(&forward)?;
        let value = second_eigenvalue_gap(&reversible_spectrum(&product, pi)?) / k as f64;
        if value > best.gamma {
            best = PseudoSpectralGap { gamma: value, k_star: k };
        }
    }
    Err(Error::domain(format!("pseudo-spectral gap search exceeded {MAX_POWER} powers")))
}

/// Effective time `gamma T / (1 + 1 / (gamma T))`.
pub fn effective_time(gamma_min: f64, horizon: usize) -> Result<f64> {
    if !(gamma_min > 0.0 && gamma_min <= 1.0) {
        return Err(Error::domain(format!("gamma_min must lie in (0, 1], got {gamma_min}")));
    }
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let gt = gamma_min * horizon as f64;
    Ok(gt / (1.0 + 1.0 / gt))
}

/// Absolute spectral gap `gamma (1 - cos(2 pi / n))` of the lazy cycle walk.
pub fn lazy_cycle_gamma_abs(size: usize, gamma: f64) -> f64 {
    gamma * (1.0 - (2.0 * std::f64::consts::PI / size as f64).cos())
}

/// Pseudo-spectral gap `1 - (1 - gamma_abs)^2` of the lazy cycle walk, valid for `gamma <= 1/2`.
pub fn lazy_cycle_gamma_ps(size: usize, gamma: f64) -> f64 {
    let g = lazy_cycle_gamma_abs(size, gamma);
    1.0 - (1.0 - g) * (1.0 - g)
}

#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub stationary: Distribution,
    /// `None` when the matrix is not reversible.
    pub gamma_rev: Option<f64>,
    /// `None` when the matrix is not reversible.
    pub gamma_abs: Option<f64>,
    pub gamma_ps: f64,
    pub k_star: usize,
}

pub fn spectral_summary(p: &StochasticMatrix) -> Result<SpectralSummary> {
    let stationary = stationary_distribution(p)?;
    let ps = pseudo_spectral_gap_with(p, &stationary)?;
    let (gamma_rev, gamma_abs) = if p.is_reversible(&stationary, REVERSIBILITY_TOL) {
        (Some(self::gamma_rev(p, &stationary)?), Some(self::gamma_abs(p, &stationary)?))
    } else {
        (None, None)
    };
    Ok(SpectralSummary { stationary, gamma_rev, gamma_abs, gamma_ps: ps.gamma, k_star: ps.k_star })
}
