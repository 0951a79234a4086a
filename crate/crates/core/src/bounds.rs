//! Heterogeneity metrics, Rényi divergences, and evaluators for the
//! nonasymptotic error bounds and concentration inequalities.
//!
//! Logarithms are natural. Probability bounds are returned as [`TailBound`]
//! values carrying the raw exponent, with the probability clamped to `[0, 1]`.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::{sup_norm_matrix, sup_norm_vector, Distribution, StochasticMatrix};
use crate::spectral::{effective_time, pseudo_spectral_gap_with, stationarity_residual};

/// Tolerance used when validating that `pi_m` is stationary for `P_m`.
pub const MODEL_STATIONARITY_TOL: f64 = 1e-8;

/// Everything the bounds need to know about one row of the ensemble.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub transition: StochasticMatrix,
    pub stationary: Distribution,
    pub initial: Distribution,
    /// Pseudo-spectral gap; computed on demand when `None`.
    pub gamma: Option<f64>,
}

impl ChainModel {
    pub fn new(transition: StochasticMatrix, stationary: Distribution, initial: Distribution) -> Self {
        ChainModel { transition, stationary, initial, gamma: None }
    }

    /// A chain started from `stationary`.
    pub fn stationary_start(transition: StochasticMatrix, stationary: Distribution) -> Self {
        ChainModel { transition, initial: stationary.clone(), stationary, gamma: None }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityMetrics {
    /// Mean of `|P_m - P|_inf`.
    pub delta1: f64,
    /// Max of `|P_m - P|_inf`.
    pub delta_inf: f64,
    /// Average stationary law `(1/M) sum_m pi_m`.
    pub pi_bar: Distribution,
    pub pi_bar_min: f64,
    /// Mean Rényi-2 divergence of the initial laws from the stationary laws.
    pub eta: f64,
    pub gamma_min: f64,
    /// Effective time `T'`.
    pub t_prime: f64,
}

/// Computes the metrics of an ensemble against `target`. Chains whose initial
/// law equals their stationary law contribute exactly zero to `eta`.
pub fn heterogeneity_metrics(
    target: &StochasticMatrix,
    chains: &[ChainModel],
    horizon: usize,
) -> Result<HeterogeneityMetrics> {
    if chains.is_empty() {
        return Err(Error::domain("heterogeneity metrics need at least one chain"));
    }
    let n = target.size();
    let m = chains.len() as f64;
    let mut delta_sum = 0.0;
    let mut delta_inf = 0.0f64;
    let mut pi_sum = vec![0.0; n];
    let mut eta_sum = 0.0;
    let mut gamma_min = f64::INFINITY;
    let mut last_gap: Option<(&StochasticMatrix, f64)> = None;
    for (idx, c) in chains.iter().enumerate() {
        Error::check_dim(n, c.transition.size())?;
        Error::check_dim(n, c.stationary.len())?;
        Error::check_dim(n, c.initial.len())?;
        let residual = stationarity_residual(&c.transition, &c.stationary)?;
        if residual > MODEL_STATIONARITY_TOL {
            return Err(Error::domain(format!(
                "chain {idx}: stationary vector has residual {residual:e}"
            )));
        }
        let d = sup_norm_matrix(&c.transition, target)?;
        delta_sum += d;
        delta_inf = delta_inf.max(d);
        pi_sum.iter_mut().zip(c.stationary.as_slice()).for_each(|(s, w)| *s += w);
        if c.initial != c.stationary {
            eta_sum += renyi_divergence(&c.initial, &c.stationary, 2.0)?;
        }
        let gamma = match (c.gamma, last_gap) {
            (Some(g), _) => g,
            (None, Some((p, g))) if p == &c.transition => g,
            (None, _) => pseudo_spectral_gap_with(&c.transition, &c.stationary)?.gamma,
        };
        last_gap = Some((&c.transition, gamma));
        gamma_min = gamma_min.min(gamma);
    }
    let pi_bar = Distribution::normalized(pi_sum.iter().map(|s| s / m).collect())?;
    let pi_bar_min = pi_bar.min();
    let t_prime = effective_time(gamma_min, horizon)?;
    Ok(HeterogeneityMetrics {
        delta1: delta_sum / m,
        delta_inf,
        pi_bar,
        pi_bar_min,
        eta: eta_sum / m,
        gamma_min,
        t_prime,
    })
}

/// Rényi divergence `D_alpha(p || q) = log(sum p_i^alpha q_i^(1 - alpha)) / (alpha - 1)`
/// for `alpha > 1`; infinite when `p` charges a state that `q` does not.
pub fn renyi_divergence(p: &Distribution, q: &Distribution, alpha: f64) -> Result<f64> {
    Error::check_dim(p.len(), q.len())?;
    if alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::domain(format!("Rényi order must be a finite alpha > 1, got {alpha}")));
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += pi.powf(alpha) * qi.powf(1.0 - alpha);
    }
    Ok(sum.ln() / (alpha - 1.0))
}

/// A bound of the form `prefactor * exp(exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub prefactor: f64,
    pub exponent: f64,
}

impl TailBound {
    pub fn unclamped(&self) -> f64 {
        self.prefactor * self.exponent.exp()
    }

    /// The bound clamped to `[0, 1]`.
    pub fn probability(&self) -> f64 {
        self.unclamped().clamp(0.0, 1.0)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

fn check_gamma(gamma_min: f64) -> Result<()> {
    if gamma_min > 0.0 && gamma_min <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma_min must lie in (0, 1], got {gamma_min}")))
    }
}

/// Bernstein-type tail for an ensemble-time average of centred functions:
///
/// `P(S >= s) <= exp(-gamma M T s^2 / (16 (1 + 1/(gamma T)) V + 40 Delta s) + M eta / 2)`.
///
/// With `V = Delta = 0` the exponent is `-inf` and the bound is 0.
pub fn ensemble_bernstein_tail(
    s: f64,
    chains: usize,
    horizon: usize,
    gamma_min: f64,
    variance: f64,
    delta: f64,
    eta: f64,
) -> Result<TailBound> {
    check_positive("s", s)?;
    check_gamma(gamma_min)?;
    check_nonnegative("V", variance)?;
    check_nonnegative("Delta", delta)?;
    check_nonnegative("eta", eta)?;
    if chains == 0 || horizon == 0 {
        return Err(Error::domain("M and T must be at least 1"));
    }
    let (m, t) = (chains as f64, horizon as f64);
    let denom = 16.0 * (1.0 + 1.0 / (gamma_min * t)) * variance + 40.0 * delta * s;
    let exponent = if denom == 0.0 {
        f64::NEG_INFINITY
    } else {
        -gamma_min * m * t * s * s / denom + 0.5 * m * eta
    };
    Ok(TailBound { prefactor: 1.0, exponent })
}

/// Two-sided tail for the empirical frequency of one state:
/// `P(|N_i / (M T) - pi_bar_i| >= s)`.
pub fn state_frequency_tail(
    s: f64,
    pi_bar_i: f64,
    chains: usize,
    horizon: usize,
    gamma_min: f64,
    eta: f64,
) -> Result<TailBound> {
    let one_sided = ensemble_bernstein_tail(s, chains, horizon, gamma_min, pi_bar_i, 1.0, eta)?;
    Ok(TailBound { prefactor: 2.0, ..one_sided })
}

/// Tail for the L1 deviation of one row of the empirical transition matrix
/// from the mean transition matrix, on the event `s1 <= N_i <= s2`:
///
/// `(1 + n) exp(-3 eps^2 s1 / (6 sqrt(2) n s2 / s1 + 2 sqrt(2) sqrt(n) eps))`.
pub fn transition_frequency_tail(eps: f64, s1: f64, s2: f64, omega_size: usize) -> Result<TailBound> {
    check_positive("eps", eps)?;
    check_positive("s1", s1)?;
    if s1 > s2 {
        return Err(Error::domain(format!("need s1 <= s2, got s1 = {s1}, s2 = {s2}")));
    }
    if omega_size == 0 {
        return Err(Error::domain("state space must be nonempty"));
    }
    let n = omega_size as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let exponent = -3.0 * eps * eps * s1 / (6.0 * sqrt2 * n * s2 / s1 + 2.0 * sqrt2 * n.sqrt() * eps);
    Ok(TailBound { prefactor: 1.0 + n, exponent })
}

/// Explicit constants for the error bounds. Unused constants are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl BoundConstants {
    /// Transition matrix bound: `(C1, C2, C3) = (7, 2, 144)`.
    pub const TRANSITION: BoundConstants = BoundConstants { c1: 7.0, c2: 2.0, c3: 144.0, c4: 0.0 };
    /// Stationary distribution bound: `C1 = sqrt(56)`.
    pub const STATIONARY: BoundConstants =
        BoundConstants { c1: 7.483_314_773_547_883, c2: 0.0, c3: 0.0, c4: 0.0 };
    /// Bound with corrupted rows: `(C1, C2, C3, C4) = (7, 2, 4, 144)`.
    pub const CORRUPTED: BoundConstants = BoundConstants { c1: 7.0, c2: 2.0, c3: 4.0, c4: 144.0 };
}

fn check_confidence(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("confidence parameter must lie in (0, 1], got {eps}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionBound {
    pub bound: f64,
    pub sampling_term: f64,
    pub heterogeneity_term: f64,
    pub condition_met: bool,
    /// `M T'`.
    pub condition_lhs: f64,
    pub condition_rhs: f64,
}

/// High-probability bound on `|P_hat - P|_inf`:
///
/// `C1 sqrt(n log(4n/eps) / (pi_bar_min M T)) + C2 min(Delta1 / pi_bar_min, Delta_inf)`,
///
/// valid when `M T' >= C3 (log(4n/eps) + M eta) / pi_bar_min`.
pub fn thm_transition_bound(
    metrics: &HeterogeneityMetrics,
    chains: usize,
    horizon: usize,
    omega_size: usize,
    eps: f64,
    consts: BoundConstants,
) -> Result<TransitionBound> {
    check_confidence(eps)?;
    check_positive("pi_bar_min", metrics.pi_bar_min)?;
    let (m, t, n) = (chains as f64, horizon as f64, omega_size as f64);
    let pmin = metrics.pi_bar_min;
    let log_term = (4.0 * n / eps).ln();
    let sampling_term = consts.c1 * (n * log_term / (pmin * m * t)).sqrt();
    let heterogeneity_term = consts.c2 * (metrics.delta1 / pmin).min(metrics.delta_inf);
    let condition_lhs = m * metrics.t_prime;
    let condition_rhs = consts.c3 * (log_term + m * metrics.eta) / pmin;
    Ok(TransitionBound {
        bound: sampling_term + heterogeneity_term,
        sampling_term,
        heterogeneity_term,
        condition_met: condition_lhs >= condition_rhs,
        condition_lhs,
        condition_rhs,
    })
}

/// High-probability bound on `|pi_hat - pi_bar|_inf`:
/// `C1 sqrt((log(2n/eps) + M eta) / (M T'))`.
pub fn thm_stationary_bound(
    metrics: &HeterogeneityMetrics,
    chains: usize,
    omega_size: usize,
    eps: f64,
    consts: BoundConstants,
) -> Result<f64> {
    check_confidence(eps)?;
    check_positive("T'", metrics.t_prime)?;
    let m = chains as f64;
    let log_term = (2.0 * omega_size as f64 / eps).ln();
    Ok(consts.c1 * ((log_term + m * metrics.eta) / (m * metrics.t_prime)).sqrt())
}

/// [`thm_stationary_bound`] plus `|pi_bar - pi|_inf`, bounding `|pi_hat - pi|_inf`.
pub fn thm_stationary_bound_triangle(
    metrics: &HeterogeneityMetrics,
    target_stationary: &Distribution,
    chains: usize,
    omega_size: usize,
    eps: f64,
    consts: BoundConstants,
) -> Result<f64> {
    let base = thm_stationary_bound(metrics, chains, omega_size, eps, consts)?;
    Ok(base + sup_norm_vector(metrics.pi_bar.as_slice(), target_stationary.as_slice())?)
}

/// Sizes of the clean and corrupted parts of an ensemble, with metrics over
/// the clean rows only.
#[derive(Debug, Clone)]
pub struct CorruptionProfile {
    pub m0: usize,
    pub m1: usize,
    pub metrics0: HeterogeneityMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptedBound {
    pub bound: f64,
    pub sampling_term: f64,
    pub heterogeneity_term: f64,
    pub corruption_term: f64,
    pub condition_met: bool,
    /// `M0 T'`.
    pub condition_lhs: f64,
    pub condition_rhs: f64,
}

/// High-probability bound on `|P_hat - P|_inf` when `M1` of the `M` rows are
/// arbitrary:
///
/// `C1 sqrt(n log(8n/eps) / (p M0 T)) + C2 min(Delta1 / p, Delta_inf) + C3 (M1/M) / p`
///
/// with `p = pi_bar_min` over the clean rows, valid when
/// `M0 T' >= C4 (log(8n/eps) + M0 eta) / p^2`.
pub fn thm_corrupted_bound(
    profile: &CorruptionProfile,
    horizon: usize,
    omega_size: usize,
    eps: f64,
    consts: BoundConstants,
) -> Result<CorruptedBound> {
    check_confidence(eps)?;
    if profile.m0 == 0 {
        return Err(Error::domain("corrupted-row bound needs at least one clean row"));
    }
    let metrics = &profile.metrics0;
    check_positive("pi_bar_min", metrics.pi_bar_min)?;
    let (m0, t, n) = (profile.m0 as f64, horizon as f64, omega_size as f64);
    let fraction = profile.m1 as f64 / (profile.m0 + profile.m1) as f64;
    let pmin = metrics.pi_bar_min;
    let log_term = (8.0 * n / eps).ln();
    let sampling_term = consts.c1 * (n * log_term / (pmin * m0 * t)).sqrt();
    let heterogeneity_term = consts.c2 * (metrics.delta1 / pmin).min(metrics.delta_inf);
    let corruption_term = consts.c3 * fraction / pmin;
    let condition_lhs = m0 * metrics.t_prime;
    let condition_rhs = consts.c4 * (log_term + m0 * metrics.eta) / (pmin * pmin);
    Ok(CorruptedBound {
        bound: sampling_term + heterogeneity_term + corruption_term,
        sampling_term,
        heterogeneity_term,
        corruption_term,
        condition_met: condition_lhs >= condition_rhs,
        condition_lhs,
        condition_rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// The quantity must be at least `margin`.
    Large,
    /// The quantity must be at most `1 / margin`.
    Small,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyItem {
    pub name: &'static str,
    pub value: f64,
    pub requirement: Requirement,
    pub threshold: f64,
    pub pass: bool,
}

impl fmt::Display for ConsistencyItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.requirement {
            Requirement::Large => ">=",
            Requirement::Small => "<=",
        };
        let verdict = if self.pass { "pass" } else { "fail" };
        write!(f, "{:<28} {:>12.6e} {op} {:<12.6e} {verdict}", self.name, self.value, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub margin: f64,
    pub items: Vec<ConsistencyItem>,
    /// `Delta1 / pi_bar_min`, reported separately from the minimum it enters.
    pub delta1_over_pi_min: f64,
    pub delta_inf: f64,
}

impl ConsistencyReport {
    fn group_passes(&self, prefix: &str) -> bool {
        self.items.iter().filter(|i| i.name.starts_with(prefix)).all(|i| i.pass)
    }

    pub fn transition_consistent(&self) -> bool {
        self.group_passes("transition")
    }

    pub fn stationary_consistent(&self) -> bool {
        self.group_passes("stationary")
    }

    pub fn item(&self, name: &str) -> Option<&ConsistencyItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Finite-sample reading of the consistency conditions: a ratio "much larger
/// than 1" must be at least `margin`, a quantity "much smaller than 1" at most
/// `1 / margin`. Ratios with a zero denominator count as infinite. The
/// `|pi_bar - pi|` item is only included when `target_stationary` is given.
pub fn consistency_check(
    metrics: &HeterogeneityMetrics,
    chains: usize,
    omega_size: usize,
    target_stationary: Option<&Distribution>,
    margin: f64,
) -> Result<ConsistencyReport> {
    if margin <= 1.0 || !margin.is_finite() {
        return Err(Error::domain(format!("margin must be a finite value > 1, got {margin}")));
    }
    check_positive("pi_bar_min", metrics.pi_bar_min)?;
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let n = omega_size as f64;
    let pmin = metrics.pi_bar_min;
    let mt = chains as f64 * metrics.t_prime;
    let large = |name, value| ConsistencyItem {
        name,
        value,
        requirement: Requirement::Large,
        threshold: margin,
        pass: value >= margin,
    };
    let small = |name, value| ConsistencyItem {
        name,
        value,
        requirement: Requirement::Small,
        threshold: 1.0 / margin,
        pass: value <= 1.0 / margin,
    };
    let delta1_over_pi_min = metrics.delta1 / pmin;
    let mut items = vec![
        large("transition_sample_size", ratio(mt, n * n.ln() / pmin)),
        large("transition_nonstationarity", ratio(metrics.t_prime, metrics.eta / pmin)),
        small("transition_heterogeneity", delta1_over_pi_min.min(metrics.delta_inf)),
        large("stationary_sample_size", ratio(mt, n.ln())),
        large("stationary_nonstationarity", ratio(metrics.t_prime, metrics.eta)),
    ];
    if let Some(pi) = target_stationary {
        items.push(small("stationary_bias", sup_norm_vector(metrics.pi_bar.as_slice(), pi.as_slice())?));
    }
    Ok(ConsistencyReport { margin, items, delta1_over_pi_min, delta_inf: metrics.delta_inf })
}

/// Right-hand side of `|diag(u) - u u^T|_2^2 <= sum_i u_i^2 (1 - 2 u_i + |u|_2^2)`.
pub fn spectral_norm_lemma_bound(u: &[f64]) -> f64 {
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    u.iter().map(|&x| x * x * (1.0 - 2.0 * x + norm2)).sum()
}
