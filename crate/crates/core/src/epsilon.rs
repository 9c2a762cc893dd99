//! Splitting a total security parameter across the four failure modes.
//!
//! The finite bound depends on how a fixed total `eps` is divided between
//! `(eps_pe, eps_smooth, eps_pa, eps_ec)`. This module searches for the
//! split that maximizes the bound. The split is parametrized as
//! `eps_i = eps_total * w_i` with softmax weights `w_i` of four log-weight
//! coordinates, and the search is a deterministic coordinate descent in
//! log-weight space with geometric step shrinking, restarted from five
//! fixed splits (the even split plus each component dominant at 97%).
//!
//! The even split is evaluated first and kept as the incumbent, so the
//! result is never worse than that baseline; on a plateau (bound zero
//! everywhere) the even split is returned unchanged.

use crate::error::{require, DomainError};
use crate::keyrate::{
    asymptotic_key_bound_from_leak, finite_key_bound_from_leak, leak_ec_fraction, BoundBreakdown,
    BoundMode, SecurityEpsilons,
};

/// Default relative-improvement tolerance of the descent.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Hard cap on objective evaluations per optimization call.
const MAX_EVALUATIONS: usize = 10_000;

/// Log-weight coordinates are clamped to this box; softmax weights then
/// stay far away from underflow.
const THETA_BOUND: f64 = 30.0;

/// Smallest coordinate step before the descent declares convergence.
const MIN_STEP: f64 = 1e-7;

/// Outcome of [`optimize_epsilons`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// The best split found. Components sum to the requested total.
    pub best_eps: SecurityEpsilons,
    /// Bound breakdown at `best_eps`.
    pub best_bound: BoundBreakdown,
    /// Number of objective evaluations spent.
    pub iterations: usize,
    /// Whether the winning descent met the tolerance (rather than running
    /// out of its evaluation budget).
    pub converged: bool,
}

/// One point of a bound-versus-`n` curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: u64,
    /// Split-optimized finite bound at this `n`.
    pub l_finite: f64,
    pub l_asymptotic: f64,
}

fn weights_from_log(theta: &[f64; 4]) -> [f64; 4] {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; 4];
    let mut sum = 0.0;
    for i in 0..4 {
        w[i] = (theta[i] - m).exp();
        sum += w[i];
    }
    for wi in &mut w {
        *wi /= sum;
    }
    w
}

fn eps_from_log(theta: &[f64; 4], eps_total: f64) -> SecurityEpsilons {
    let w = weights_from_log(theta);
    SecurityEpsilons::new(
        eps_total * w[0],
        eps_total * w[1],
        eps_total * w[2],
        eps_total * w[3],
    )
    .expect("softmax weights keep every component inside (0, eps_total)")
}

/// The five fixed starting splits: even, then each component at 97%.
fn starting_points() -> [[f64; 4]; 5] {
    let lo = 0.01f64.ln();
    let hi = 0.97f64.ln();
    let mut starts = [[0.0; 4]; 5];
    for (j, start) in starts.iter_mut().enumerate().skip(1) {
        *start = [lo; 4];
        start[j - 1] = hi;
    }
    starts
}

struct Descent {
    value: f64,
    theta: [f64; 4],
    evaluations: usize,
    converged: bool,
}

fn descend<F: Fn(&[f64; 4]) -> f64>(
    objective: &F,
    start: [f64; 4],
    tol: f64,
    budget: usize,
) -> Descent {
    let mut theta = start;
    let mut value = objective(&theta);
    let mut evaluations = 1usize;
    let mut step = 1.0f64;
    let mut converged = false;

    'outer: while evaluations < budget {
        let before = value;
        for i in 0..4 {
            for sign in [1.0, -1.0] {
                if evaluations >= budget {
                    break 'outer;
                }
                let mut cand = theta;
                cand[i] = (cand[i] + sign * step).clamp(-THETA_BOUND, THETA_BOUND);
                let v = objective(&cand);
                evaluations += 1;
                if v > value {
                    value = v;
                    theta = cand;
                }
            }
        }
        let gain = value - before;
        if gain <= tol * before.abs().max(1.0) {
            if step <= MIN_STEP {
                converged = true;
                break;
            }
            step *= 0.5;
        }
    }

    Descent {
        value,
        theta,
        evaluations,
        converged,
    }
}

/// Finds the split of `eps_total` maximizing the finite bound for the given
/// channel point, with the modeled leakage `f_ec * h(e_obs)`.
///
/// Deterministic for fixed inputs; never returns a bound below the even
/// four-way split of the same total.
///
/// # Example
///
/// ```
/// use qkdfk_core::epsilon::{optimize_epsilons, DEFAULT_TOLERANCE};
/// use qkdfk_core::keyrate::{finite_key_bound, SecurityEpsilons};
///
/// let r = optimize_epsilons(100_000, 0.025, 0.8, 1.2, 1e-10, DEFAULT_TOLERANCE).unwrap();
/// let even = SecurityEpsilons::equal_split(1e-10).unwrap();
/// let baseline = finite_key_bound(100_000, 0.025, 0.8, 1.2, &even).unwrap();
/// assert!(r.best_bound.l_finite >= baseline.l_finite);
/// ```
pub fn optimize_epsilons(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
    eps_total: f64,
    tol: f64,
) -> Result<OptimizationResult, DomainError> {
    optimize_epsilons_with_mode(n, e_obs, a_fraction, f_ec, eps_total, tol, BoundMode::Standard)
}

/// [`optimize_epsilons`] with an explicit leakage-accounting mode.
pub fn optimize_epsilons_with_mode(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
    eps_total: f64,
    tol: f64,
    mode: BoundMode,
) -> Result<OptimizationResult, DomainError> {
    let leak = leak_ec_fraction(e_obs, f_ec)?;
    optimize_epsilons_from_leak_with_mode(n, e_obs, a_fraction, leak, eps_total, tol, mode)
}

/// [`optimize_epsilons`] with an explicit per-bit leakage fraction.
pub fn optimize_epsilons_from_leak(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    leak_fraction: f64,
    eps_total: f64,
    tol: f64,
) -> Result<OptimizationResult, DomainError> {
    optimize_epsilons_from_leak_with_mode(
        n,
        e_obs,
        a_fraction,
        leak_fraction,
        eps_total,
        tol,
        BoundMode::Standard,
    )
}

fn optimize_epsilons_from_leak_with_mode(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    leak_fraction: f64,
    eps_total: f64,
    tol: f64,
    mode: BoundMode,
) -> Result<OptimizationResult, DomainError> {
    require(tol > 0.0, "tol", tol, "tol > 0")?;
    let equal = SecurityEpsilons::equal_split(eps_total)?;
    // One fallible evaluation validates the remaining inputs; the descent
    // closure can then unwrap.
    let equal_bound =
        finite_key_bound_from_leak(n, e_obs, a_fraction, leak_fraction, &equal, mode)?;

    let objective = |theta: &[f64; 4]| -> f64 {
        let eps = eps_from_log(theta, eps_total);
        finite_key_bound_from_leak(n, e_obs, a_fraction, leak_fraction, &eps, mode)
            .expect("inputs validated before the descent")
            .l_finite
    };

    let mut best_value = equal_bound.l_finite;
    let mut best_eps = equal;
    let mut best_bound = equal_bound;
    let mut best_converged = false;
    let mut evaluations = 1usize; // the baseline evaluation above

    for (idx, start) in starting_points().iter().enumerate() {
        if evaluations >= MAX_EVALUATIONS {
            break;
        }
        let d = descend(&objective, *start, tol, MAX_EVALUATIONS - evaluations);
        evaluations += d.evaluations;
        if d.value > best_value {
            best_value = d.value;
            best_eps = eps_from_log(&d.theta, eps_total);
            best_bound = finite_key_bound_from_leak(
                n,
                e_obs,
                a_fraction,
                leak_fraction,
                &best_eps,
                mode,
            )?;
            best_converged = d.converged;
        } else if idx == 0 {
            // The descent from the even split found nothing better; its
            // convergence verdict applies to the incumbent baseline.
            best_converged = d.converged;
        }
    }

    Ok(OptimizationResult {
        best_eps,
        best_bound,
        iterations: evaluations,
        converged: best_converged,
    })
}

/// Split-optimized finite bound plus the asymptotic bound for each `n`,
/// with the modeled leakage `f_ec * h(e_obs)`.
///
/// Per-point domain failures (e.g. `n = 0`) mark that point invalid instead
/// of failing the sweep; output order matches the input order.
pub fn bound_curve(
    n_values: &[u64],
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
    eps_total: f64,
) -> Vec<Result<CurvePoint, DomainError>> {
    match leak_ec_fraction(e_obs, f_ec) {
        Ok(leak) => bound_curve_from_leak(n_values, e_obs, a_fraction, leak, eps_total),
        Err(e) => n_values.iter().map(|_| Err(e.clone())).collect(),
    }
}

/// [`bound_curve`] with an explicit per-bit leakage fraction.
pub fn bound_curve_from_leak(
    n_values: &[u64],
    e_obs: f64,
    a_fraction: f64,
    leak_fraction: f64,
    eps_total: f64,
) -> Vec<Result<CurvePoint, DomainError>> {
    n_values
        .iter()
        .map(|&n| {
            let opt =
                optimize_epsilons_from_leak(n, e_obs, a_fraction, leak_fraction, eps_total, DEFAULT_TOLERANCE)?;
            let l_asymptotic = asymptotic_key_bound_from_leak(n, e_obs, a_fraction, leak_fraction)?;
            Ok(CurvePoint {
                n,
                l_finite: opt.best_bound.l_finite,
                l_asymptotic,
            })
        })
        .collect()
}

/// `count` log-spaced integers from `lo` to `hi` inclusive, deduplicated
/// while preserving order.
pub fn log_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo, "need 1 <= lo <= hi");
    if count <= 1 || lo == hi {
        return vec![lo];
    }
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 / (count - 1) as f64;
        let n = (llo + t * (lhi - llo)).exp().round() as u64;
        let n = n.clamp(lo, hi);
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    out
}
