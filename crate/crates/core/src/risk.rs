//! Risk evaluation: exact truncated-series oracles lifted from the
//! risk-difference identities, paired Monte Carlo with common random
//! numbers, the Hudson identity checker, the Bayes-risk integral of the
//! product-exponential family, and the Blyth admissibility diagnostic.
//!
//! The exact oracles exploit the reduction of every covered risk to a
//! one-dimensional expectation over the total count `X. ~ Po(Lambda)`: after
//! conditioning, the side observation `Y` enters only through its first two
//! moments, which are substituted analytically. Each oracle returns a value
//! together with a rigorous (Chernoff) bound on the discarded tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate_rule, EstimatorRule};
use crate::hierarchy::{sample_observations_stream, ParamTree};
use crate::losses::{balanced_entropy_loss, entropy_loss, sse_loss};
use crate::quadrature::gamma_expectation;

/// Monte Carlo estimate: sample mean, `stderr = sample sd / sqrt(reps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Exact series value with a rigorous bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub value: f64,
    pub truncation_bound: f64,
}

/// Loss used by the Monte Carlo runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Sse,
    Entropy,
    BalancedEntropy,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sse => "sse",
            Self::Entropy => "entropy",
            Self::BalancedEntropy => "balanced_entropy",
        }
    }

    fn evaluate(&self, estimate: &[f64], tree: &ParamTree) -> Result<f64> {
        match self {
            Self::Sse => sse_loss(estimate, tree.leaves()),
            Self::Entropy => entropy_loss(estimate, tree.leaves()),
            Self::BalancedEntropy => balanced_entropy_loss(estimate, tree),
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo with common random numbers
// ---------------------------------------------------------------------------

const CHUNK: u64 = 8192;

#[derive(Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    fn merge(self, other: Welford) -> Welford {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Welford {
            count,
            mean: self.mean + delta * other.count as f64 / count as f64,
            m2: self.m2
                + other.m2
                + delta * delta * (self.count as f64 * other.count as f64) / count as f64,
        }
    }

    fn finish(self, seed: u64) -> RiskEstimate {
        let n = self.count as f64;
        let stderr = if self.count > 1 {
            (self.m2 / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        RiskEstimate {
            mean: self.mean,
            stderr,
            reps: self.count,
            seed,
        }
    }
}

fn validate_mc(
    tree: &ParamTree,
    rules: &[&EstimatorRule],
    loss: LossKind,
    reps: u64,
) -> Result<usize> {
    if reps == 0 {
        return Err(Error::Domain(
            "Monte Carlo needs at least one replication".into(),
        ));
    }
    let mut start = usize::MAX;
    for rule in rules {
        if let Some(depth) = rule.model_depth() {
            if tree.spec().depth() != depth {
                return Err(Error::Shape(format!(
                    "rule {} expects a depth-{depth} hierarchy, tree has depth {}",
                    rule.name(),
                    tree.spec().depth()
                )));
            }
        }
        if matches!(loss, LossKind::Entropy | LossKind::BalancedEntropy)
            && !rule.strictly_positive()
        {
            return Err(Error::Domain(format!(
                "rule {} can output zero estimates; its {} risk is not well defined",
                rule.name(),
                loss.name()
            )));
        }
        let d = rule.required_start_depth();
        if d > tree.spec().depth() {
            return Err(Error::Shape(format!(
                "rule {} consumes design X({d}) but the tree has depth {}",
                rule.name(),
                tree.spec().depth()
            )));
        }
        start = start.min(d);
    }
    Ok(start)
}

fn mc_accumulate<F>(reps: u64, per_rep: F) -> Result<Welford>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let partials: Vec<Welford> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(reps);
            let mut acc = Welford::default();
            for rep in lo..hi {
                let value = per_rep(rep).map_err(|e| Error::Replication {
                    rep,
                    source: Box::new(e),
                })?;
                acc.push(value);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // fixed chunk size + ordered merge: the result does not depend on the
    // number of worker threads
    Ok(partials
        .into_iter()
        .fold(Welford::default(), Welford::merge))
}

/// Monte Carlo risk `E[L(rule(X), lambda)]` over `reps` independent
/// replications, one RNG stream per replication.
pub fn mc_risk(
    tree: &ParamTree,
    rule: &EstimatorRule,
    loss: LossKind,
    reps: u64,
    seed: u64,
) -> Result<RiskEstimate> {
    let start = validate_mc(tree, &[rule], loss, reps)?;
    let acc = mc_accumulate(reps, |rep| {
        let obs = sample_observations_stream(tree, start, seed, rep)?;
        let est = evaluate_rule(rule, &obs)?;
        loss.evaluate(&est.values, tree)
    })?;
    Ok(acc.finish(seed))
}

/// Paired Monte Carlo risk difference `risk(A) - risk(B)` with common
/// random numbers: each replication evaluates both rules on the same draw.
/// When the designs differ, the larger design is sampled and the smaller
/// rule ignores the extra counts.
pub fn mc_risk_diff(
    tree: &ParamTree,
    rule_a: &EstimatorRule,
    rule_b: &EstimatorRule,
    loss: LossKind,
    reps: u64,
    seed: u64,
) -> Result<RiskEstimate> {
    let start = validate_mc(tree, &[rule_a, rule_b], loss, reps)?;
    let acc = mc_accumulate(reps, |rep| {
        let obs = sample_observations_stream(tree, start, seed, rep)?;
        let est_a = evaluate_rule(rule_a, &obs)?;
        let est_b = evaluate_rule(rule_b, &obs)?;
        Ok(loss.evaluate(&est_a.values, tree)? - loss.evaluate(&est_b.values, tree)?)
    })?;
    Ok(acc.finish(seed))
}

// ---------------------------------------------------------------------------
// Exact risk series for the basic model
// ---------------------------------------------------------------------------

/// `x / (x + m - 1)` with the zero-count convention: for a single rate the
/// ratio is the indicator of a nonzero count.
fn shrink_ratio(x: u64, m: usize) -> f64 {
    if x == 0 {
        0.0
    } else {
        x as f64 / (x as f64 + m as f64 - 1.0)
    }
}

fn beta_bayes_series(beta: f64, m: usize, lambda: f64, tol: f64) -> Result<ExactValue> {
    let mf = m as f64;
    let c = 2.0 + beta;
    let g = |x: u64| {
        let xf = x as f64;
        (3.0 * lambda + mf) / (c * c) + lambda / (c * c) / (xf + mf)
            - (3.0 + 2.0 * beta) / (c * c) * lambda * shrink_ratio(x, m)
            + beta / c * lambda
    };
    let bound = crate::poisson::PolyBound::constant(
        (3.0 * lambda + mf) / (c * c)
            + lambda / (c * c * mf)
            + lambda * (3.0 + 2.0 * beta) / (c * c)
            + beta / c * lambda,
    );
    let (value, truncation_bound) = crate::poisson::truncated_expectation(lambda, g, &bound, tol)?;
    Ok(ExactValue {
        value,
        truncation_bound,
    })
}

fn ml_series(m: usize, lambda: f64, tol: f64) -> Result<ExactValue> {
    let mf = m as f64;
    let g = |x: u64| {
        let xf = x as f64;
        let x1 = xf + 1.0;
        let quad = x1 * x1 + 2.0 * x1 * lambda + lambda + lambda * lambda;
        let lead = (xf + mf) / (4.0 * x1 * x1) * quad;
        let middle = if x == 0 { 0.0 } else { xf + lambda };
        lead - middle + lambda
    };
    let growth = (1.0 + 3.0 * lambda + lambda * lambda) / 4.0;
    let bound = crate::poisson::PolyBound::linear(mf * growth + 2.0 * lambda + 1.0, growth + 1.0);
    let (value, truncation_bound) = crate::poisson::truncated_expectation(lambda, g, &bound, tol)?;
    Ok(ExactValue {
        value,
        truncation_bound,
    })
}

fn cz_series(m: usize, lambda: f64, tol: f64) -> Result<ExactValue> {
    if m == 1 {
        // the rule coincides with the unbiased one: constant risk 1
        return Ok(ExactValue {
            value: 1.0,
            truncation_bound: 0.0,
        });
    }
    let mf = m as f64;
    let c = (mf - 1.0) * (mf - 1.0);
    let g = |x: u64| {
        let xf = x as f64;
        mf + c / (xf + mf) - 2.0 * c / (xf + mf - 1.0)
    };
    let bound = crate::poisson::PolyBound::constant(mf + 3.0 * c);
    let (value, truncation_bound) = crate::poisson::truncated_expectation(lambda, g, &bound, tol)?;
    Ok(ExactValue {
        value,
        truncation_bound,
    })
}

fn shrink_flat_diff_series(m: usize, lambda: f64, tol: f64) -> Result<ExactValue> {
    let mf = m as f64;
    let g = |x: u64| {
        let xf = x as f64;
        (mf - 1.0) * ((mf - 1.0) / 4.0 / (xf + mf) - 0.5 + 0.5 * xf / (xf + mf - 1.0))
    };
    let bound = crate::poisson::PolyBound::constant((mf - 1.0) * ((mf - 1.0) / (4.0 * mf) + 1.0));
    let (value, truncation_bound) = crate::poisson::truncated_expectation(lambda, g, &bound, tol)?;
    Ok(ExactValue {
        value,
        truncation_bound,
    })
}

fn shrink_cz_diff_series(m: usize, lambda: f64, tol: f64) -> Result<ExactValue> {
    let mf = m as f64;
    let g = |x: u64| {
        if x == 0 {
            return -0.75 / mf;
        }
        let xf = x as f64;
        0.25 * xf / (xf + mf - 1.0) + 1.5 * xf * xf / (xf + mf - 1.0)
            - 0.75 * (xf + 1.0) * (xf + 1.0) / (xf + mf)
            - 0.75 * xf * (xf - 1.0) / (xf + mf - 2.0)
    };
    let bound = crate::poisson::PolyBound::linear(1.0, 3.0);
    let (value, truncation_bound) = crate::poisson::truncated_expectation(lambda, g, &bound, tol)?;
    Ok(ExactValue {
        value,
        truncation_bound,
    })
}

/// Exact risk of a basic-model rule at total rate `lambda`, by truncated
/// summation over `X. ~ Po(lambda)` with the side count integrated out
/// analytically. These risks depend on the rates only through their total.
pub fn exact_risk_basic(
    rule: &EstimatorRule,
    m: usize,
    lambda: f64,
    tol: f64,
) -> Result<ExactValue> {
    if m == 0 {
        return Err(Error::Shape("m must be at least 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "total rate must be positive, got {lambda}"
        )));
    }
    match rule {
        EstimatorRule::XOnlyMl => Ok(ExactValue {
            value: m as f64,
            truncation_bound: 0.0,
        }),
        EstimatorRule::BasicFlatGb => beta_bayes_series(0.0, m, lambda, tol),
        EstimatorRule::BetaBayes { beta } => {
            if !(*beta >= 0.0) {
                return Err(Error::Domain(format!(
                    "beta must be nonnegative, got {beta}"
                )));
            }
            beta_bayes_series(*beta, m, lambda, tol)
        }
        EstimatorRule::BasicMl => ml_series(m, lambda, tol),
        EstimatorRule::XOnlyCz => cz_series(m, lambda, tol),
        EstimatorRule::BasicShrinkGb => {
            if m == 1 {
                // the two generalized Bayes rules coincide for a single rate
                return beta_bayes_series(0.0, 1, lambda, tol);
            }
            let flat = beta_bayes_series(0.0, m, lambda, tol / 2.0)?;
            let diff = shrink_flat_diff_series(m, lambda, tol / 2.0)?;
            Ok(ExactValue {
                value: flat.value + diff.value,
                truncation_bound: flat.truncation_bound + diff.truncation_bound,
            })
        }
        other => Err(Error::Capability(format!(
            "no exact risk series for rule {}",
            other.name()
        ))),
    }
}

/// The two exact risk-difference series of the basic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffPair {
    /// shrink(X, Y) - flat(X, Y)
    ShrinkMinusFlat,
    /// shrink(X, Y) - Clevenson-Zidek(X)
    ShrinkXyMinusCzX,
}

/// Exact risk difference for `m >= 2`; for a single rate the estimators
/// coincide and the series are not derived.
pub fn exact_risk_diff_basic(
    pair: DiffPair,
    m: usize,
    lambda: f64,
    tol: f64,
) -> Result<ExactValue> {
    if m < 2 {
        return Err(Error::Capability(
            "risk-difference series require m >= 2 (the rules coincide at m = 1)".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "total rate must be positive, got {lambda}"
        )));
    }
    match pair {
        DiffPair::ShrinkMinusFlat => shrink_flat_diff_series(m, lambda, tol),
        DiffPair::ShrinkXyMinusCzX => shrink_cz_diff_series(m, lambda, tol),
    }
}

// ---------------------------------------------------------------------------
// Hudson identity checker
// ---------------------------------------------------------------------------

/// Two-sided evaluation of the Hudson identities for one test function.
#[derive(Debug, Clone, Copy)]
pub struct HudsonReport {
    /// `E[lambda phi(X)]` vs `E[X phi(X-1)]`.
    pub multiplication: (f64, f64),
    /// `E[phi(X)/lambda]` vs `E[phi(X+1)/(X+1)]`, present when `phi(0) = 0`.
    pub reciprocal: Option<(f64, f64)>,
    pub max_abs_diff: f64,
    pub truncation_bound: f64,
}

/// Checks both Hudson identities by evaluating each side as an independent
/// truncated series. `poly` must dominate `|phi|` (growth cap, degree <= 2,
/// verified on the summed support).
pub fn hudson_check<F>(
    phi: F,
    lambda: f64,
    poly: &crate::poisson::PolyBound,
    tol: f64,
) -> Result<HudsonReport>
where
    F: Fn(u64) -> f64,
{
    if poly.c3 != 0.0 {
        return Err(Error::Domain(
            "growth cap: the Hudson checker accepts at most quadratic test functions".into(),
        ));
    }
    let support_cap = (lambda + 40.0 * lambda.sqrt() + 200.0).ceil() as u64 + 2;
    for x in 0..=support_cap {
        let xf = x as f64;
        let cap = poly.c0 + poly.c1 * xf + poly.c2 * xf * xf;
        if phi(x).abs() > cap * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "growth cap violated at x = {x}: |phi| = {} > {cap}",
                phi(x).abs()
            )));
        }
    }

    let mut truncation = 0.0;

    let (e_phi, b) = crate::poisson::truncated_expectation(lambda, &phi, poly, tol)?;
    truncation += b * lambda.max(1.0);
    let lhs1 = lambda * e_phi;
    let shifted = crate::poisson::PolyBound::cubic(0.0, poly.c0, poly.c1, poly.c2);
    let (rhs1, b) = crate::poisson::truncated_expectation(
        lambda,
        |x| if x == 0 { 0.0 } else { x as f64 * phi(x - 1) },
        &shifted,
        tol,
    )?;
    truncation += b;

    let mut max_abs_diff = (lhs1 - rhs1).abs();
    let reciprocal = if phi(0) == 0.0 {
        let lhs2 = e_phi / lambda;
        let over = crate::poisson::PolyBound::quadratic(
            poly.c0 + poly.c1 + poly.c2,
            poly.c1 + 2.0 * poly.c2,
            poly.c2,
        );
        let (rhs2, b) = crate::poisson::truncated_expectation(
            lambda,
            |x| phi(x + 1) / (x as f64 + 1.0),
            &over,
            tol,
        )?;
        truncation += b + b / lambda.max(1e-2);
        max_abs_diff = max_abs_diff.max((lhs2 - rhs2).abs());
        Some((lhs2, rhs2))
    } else {
        None
    };

    Ok(HudsonReport {
        multiplication: (lhs1, rhs1),
        reciprocal,
        max_abs_diff,
        truncation_bound: truncation,
    })
}

// ---------------------------------------------------------------------------
// Bayes risk under the product-exponential prior
// ---------------------------------------------------------------------------

/// Bayes risk of the `beta`-prior Bayes rule: the exact frequentist risk
/// integrated over `Lambda ~ Gamma(m, beta)` (the prior's total-rate
/// marginal). Approaches `m - 1/2` as `beta` tends to zero.
pub fn bayes_risk_beta(beta: f64, m: usize, tol: f64) -> Result<ExactValue> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if m == 0 {
        return Err(Error::Shape("m must be at least 1".into()));
    }
    let inner_tol = (tol * 1e-3).min(1e-10);
    let quad = gamma_expectation(
        m as f64,
        beta,
        |lambda| {
            beta_bayes_series(beta, m, lambda, inner_tol)
                .map(|v| v.value)
                .unwrap_or(f64::NAN)
        },
        tol,
    )?;
    if !quad.value.is_finite() {
        return Err(Error::Numeric(
            "inner risk series failed inside the Bayes-risk integral".into(),
        ));
    }
    Ok(ExactValue {
        value: quad.value,
        truncation_bound: quad.error + inner_tol,
    })
}

// ---------------------------------------------------------------------------
// Blyth admissibility diagnostic
// ---------------------------------------------------------------------------

/// `h_k(L) = 1 - log(1+L)/log(1+k+L)`, evaluated as a ratio of `log1p`
/// terms so large `k` does not cancel.
pub fn blyth_h(k: u32, lambda: f64) -> f64 {
    let kf = k as f64;
    (kf / (1.0 + lambda)).ln_1p() / (kf + lambda).ln_1p()
}

/// Derivative of `h_k`.
pub fn blyth_h_prime(k: u32, lambda: f64) -> f64 {
    let kf = k as f64;
    let log_term = (kf + lambda).ln_1p();
    -(kf / (1.0 + lambda) + blyth_h(k, lambda)) / ((1.0 + kf + lambda) * log_term)
}

/// Moment ratio `I_k(w) / I_k(w-1)` of the squared-`h_k` prior, where
/// `I_k(w) = int h_k^2 L^w e^(-2L) dL`; this is the data-dependent factor of
/// the Blyth rule. Requires `w >= 1` (the `w = -1` integral diverges).
pub fn blyth_moment_ratio(k: u32, w: u64) -> Result<f64> {
    if w == 0 {
        return Err(Error::Domain("moment ratio needs w >= 1".into()));
    }
    let h2 = |l: f64| {
        let h = blyth_h(k, l);
        h * h
    };
    let num = gamma_expectation(w as f64 + 1.0, 2.0, h2, 1e-12)?;
    let den = gamma_expectation(w as f64, 2.0, h2, 1e-12)?;
    Ok(w as f64 / 2.0 * num.value / den.value)
}

/// One term of the Blyth difference bound, in normalized Gamma-expectation
/// form: `(w/2) E[h h'(G_{w+1})]^2 / E[h^2(G_w)]` with rate-2 Gammas.
fn blyth_term(k: u32, w: u64) -> Result<f64> {
    let hh = |l: f64| blyth_h(k, l) * blyth_h_prime(k, l);
    let h2 = |l: f64| {
        let h = blyth_h(k, l);
        h * h
    };
    let num = gamma_expectation(w as f64 + 1.0, 2.0, hh, 1e-12)?;
    let den = gamma_expectation(w as f64, 2.0, h2, 1e-12)?;
    Ok(w as f64 / 2.0 * num.value * num.value / den.value)
}

/// Rigorous bound on the discarded tail of the Blyth series beyond `w_max`,
/// from the Cauchy-Schwarz envelope `|h_k'| <= 1/((1+L) log(1+k+L))` and a
/// split of the Gamma integral at `w/M`, `M = e + 1`.
fn blyth_tail_bound(k: u32, w_max: u64) -> Result<f64> {
    let m_const = std::f64::consts::E + 1.0;
    let c = 1.0 / (2.0 * m_const);
    let w = w_max as f64 + 1.0;
    if c * w <= std::f64::consts::E {
        return Err(Error::Numeric(format!(
            "w_max = {w_max} too small for a rigorous tail bound"
        )));
    }
    let log_k = (k as f64).ln_1p();
    // exponentially small piece
    let q: f64 = std::f64::consts::E / m_const;
    let part1 =
        2.0 * q.powf(w) / ((1.0 - q) * w * (2.0 * std::f64::consts::PI * w).sqrt() * log_k * log_k);
    // slowly decaying piece: sum_{w > W} (2/w) / log^2(1 + k + w/(2M))
    let log_cw = (c * w).ln();
    let part2 = 2.0 / log_cw + 2.0 / (w * log_cw * log_cw);
    Ok(part1 + part2)
}

/// Partial sum of the Blyth difference bound over `w = 1..=w_max`, plus the
/// rigorous tail bound. The bound itself is uniform in the number of rates,
/// so `m` only gates validity. Strictly positive and decreasing in `k`.
pub fn blyth_delta_bound(k: u32, m: usize, w_max: u64, tol: f64) -> Result<ExactValue> {
    if k < 1 {
        return Err(Error::Domain("Blyth index k must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::Shape("m must be at least 1".into()));
    }
    if w_max < 1 {
        return Err(Error::Domain("w_max must be >= 1".into()));
    }
    let tail = blyth_tail_bound(k, w_max)?;
    if tail > tol {
        return Err(Error::Truncation {
            achieved: tail,
            tolerance: tol,
        });
    }
    let partial: f64 = (1..=w_max)
        .into_par_iter()
        .map(|w| blyth_term(k, w))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(ExactValue {
        value: partial,
        truncation_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_param_tree, HierarchySpec};
    use crate::poisson::{truncated_expectation, PolyBound};

    fn tree_from(branching: &[usize], leaves: &[f64]) -> ParamTree {
        let spec = HierarchySpec::new(branching.to_vec()).unwrap();
        build_param_tree(&spec, leaves).unwrap()
    }

    #[test]
    fn flat_risk_single_rate_closed_form() {
        // 1/2 + (3L-1)/4 e^-L
        for &lambda in &[0.2, 1.0, 3.0, 20.0] {
            let exact = exact_risk_basic(&EstimatorRule::BasicFlatGb, 1, lambda, 1e-12).unwrap();
            let closed = 0.5 + (3.0 * lambda - 1.0) / 4.0 * (-lambda).exp();
            assert!(
                (exact.value - closed).abs() < 1e-10,
                "lambda={lambda}: {} vs {closed}",
                exact.value
            );
        }
    }

    #[test]
    fn flat_risk_two_rates_closed_form() {
        // 1/2 + (1/4) E[X/(X+1)] + (3/4)(1 - e^-L), independently evaluated
        for &lambda in &[0.5, 2.0, 100.0] {
            let exact = exact_risk_basic(&EstimatorRule::BasicFlatGb, 2, lambda, 1e-12).unwrap();
            let (frac, _) = truncated_expectation(
                lambda,
                |x| x as f64 / (x as f64 + 1.0),
                &PolyBound::constant(1.0),
                1e-13,
            )
            .unwrap();
            let closed = 0.5 + 0.25 * frac + 0.75 * (1.0 - (-lambda).exp());
            assert!(
                (exact.value - closed).abs() < 1e-10,
                "lambda={lambda}: {} vs {closed}",
                exact.value
            );
            assert!(exact.value < 1.5);
        }
        let big = exact_risk_basic(&EstimatorRule::BasicFlatGb, 2, 100.0, 1e-12).unwrap();
        assert!((big.value - 1.4975).abs() < 1e-3);
    }

    #[test]
    fn x_only_rules_exact_values() {
        let ml = exact_risk_basic(&EstimatorRule::XOnlyMl, 3, 7.0, 1e-12).unwrap();
        assert_eq!(ml.value, 3.0);
        assert_eq!(ml.truncation_bound, 0.0);

        // CZ risk tends to m from below and stays above m - 1/2 for large L
        let cz = exact_risk_basic(&EstimatorRule::XOnlyCz, 2, 1000.0, 1e-10).unwrap();
        assert!(cz.value < 2.0 && cz.value > 1.5, "cz={}", cz.value);
    }

    #[test]
    fn diff_series_signs_and_limits() {
        let near_zero = exact_risk_diff_basic(DiffPair::ShrinkMinusFlat, 2, 1e-6, 1e-12).unwrap();
        assert!(
            (near_zero.value - (-0.375)).abs() < 1e-4,
            "{}",
            near_zero.value
        );

        for &(m, lambda) in &[(2usize, 5.0f64), (3, 50.0), (5, 0.1)] {
            let d2 = exact_risk_diff_basic(DiffPair::ShrinkMinusFlat, m, lambda, 1e-11).unwrap();
            let d3 = exact_risk_diff_basic(DiffPair::ShrinkXyMinusCzX, m, lambda, 1e-11).unwrap();
            assert!(d2.value < 0.0, "d2 m={m} lambda={lambda}: {}", d2.value);
            assert!(d3.value < 0.0, "d3 m={m} lambda={lambda}: {}", d3.value);
        }

        assert!(matches!(
            exact_risk_diff_basic(DiffPair::ShrinkMinusFlat, 1, 1.0, 1e-10),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn diff_series_agree_with_risk_differences() {
        // two independent routes to shrink - CZ: the J-series and the
        // difference of exact risks
        for &(m, lambda) in &[(2usize, 1.0f64), (3, 8.0), (4, 30.0)] {
            let direct =
                exact_risk_diff_basic(DiffPair::ShrinkXyMinusCzX, m, lambda, 1e-11).unwrap();
            let shrink = exact_risk_basic(&EstimatorRule::BasicShrinkGb, m, lambda, 1e-11).unwrap();
            let cz = exact_risk_basic(&EstimatorRule::XOnlyCz, m, lambda, 1e-11).unwrap();
            assert!(
                (direct.value - (shrink.value - cz.value)).abs() < 1e-9,
                "m={m} lambda={lambda}: {} vs {}",
                direct.value,
                shrink.value - cz.value
            );
        }
    }

    #[test]
    fn exact_series_match_brute_force_enumeration() {
        // independent oracle: enumerate the full count vector and the side
        // count over a window whose discarded mass is negligible, apply the
        // actual estimator and loss, and sum
        use crate::estimators::estimate_basic;
        use crate::hierarchy::BasicObs;
        use crate::losses::sse_loss;
        use crate::poisson::log_pmf;

        let brute = |rule: &EstimatorRule, leaves: &[f64]| -> f64 {
            let cap = 24u64;
            let total: f64 = leaves.iter().sum();
            let mut risk = 0.0;
            let mut x = vec![0u64; leaves.len()];
            loop {
                let px: f64 = x
                    .iter()
                    .zip(leaves)
                    .map(|(&xi, &li)| log_pmf(li, xi).exp())
                    .product();
                for y in 0..=cap {
                    let py = log_pmf(total, y).exp();
                    let est = estimate_basic(&BasicObs { x: x.clone(), y }, rule).unwrap();
                    risk += px * py * sse_loss(&est.values, leaves).unwrap();
                }
                // odometer over the count vector
                let mut pos = 0;
                loop {
                    if pos == x.len() {
                        return risk;
                    }
                    x[pos] += 1;
                    if x[pos] <= cap {
                        break;
                    }
                    x[pos] = 0;
                    pos += 1;
                }
            }
        };

        let cases: [(&EstimatorRule, &[f64]); 6] = [
            (&EstimatorRule::BasicMl, &[0.4, 0.8]),
            (&EstimatorRule::BasicFlatGb, &[0.4, 0.8]),
            (&EstimatorRule::BasicShrinkGb, &[0.4, 0.8]),
            (&EstimatorRule::BetaBayes { beta: 0.7 }, &[0.4, 0.8]),
            (&EstimatorRule::BetaBayes { beta: 0.7 }, &[0.9]),
            (&EstimatorRule::XOnlyCz, &[0.3, 0.5, 0.7]),
        ];
        for (rule, leaves) in cases {
            let m = leaves.len();
            let lambda: f64 = leaves.iter().sum();
            let series = exact_risk_basic(rule, m, lambda, 1e-12).unwrap();
            let direct = brute(rule, leaves);
            assert!(
                (series.value - direct).abs() < 1e-7,
                "{}: series = {}, brute force = {direct}",
                rule.name(),
                series.value
            );
        }
    }

    #[test]
    fn ml_risk_exceeds_the_minimax_level_somewhere() {
        let mut exceeded = false;
        for &lambda in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let ml = exact_risk_basic(&EstimatorRule::BasicMl, 2, lambda, 1e-10).unwrap();
            if ml.value > 1.5 {
                exceeded = true;
            }
        }
        assert!(exceeded);
    }

    #[test]
    fn hudson_identities() {
        // constant and identity functions have closed moments
        let r = hudson_check(|_| 1.0, 2.0, &PolyBound::constant(1.0), 1e-12).unwrap();
        assert!((r.multiplication.0 - 2.0).abs() < 1e-10);
        assert!((r.multiplication.1 - 2.0).abs() < 1e-10);

        let r = hudson_check(|x| x as f64, 3.0, &PolyBound::linear(0.0, 1.0), 1e-12).unwrap();
        assert!((r.multiplication.0 - 9.0).abs() < 1e-9);
        assert!((r.multiplication.1 - 9.0).abs() < 1e-9);
        assert!(r.reciprocal.is_some());

        let r = hudson_check(
            |x| x as f64 / (x as f64 + 1.0),
            1.7,
            &PolyBound::constant(1.0),
            1e-12,
        )
        .unwrap();
        assert!(r.max_abs_diff < 1e-10, "diff={}", r.max_abs_diff);
    }

    #[test]
    fn hudson_growth_cap() {
        let err = hudson_check(
            |x| (x as f64).powi(3),
            2.0,
            &PolyBound::linear(0.0, 1.0),
            1e-10,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn bayes_risk_trend_single_rate() {
        let v = bayes_risk_beta(0.01, 1, 1e-8).unwrap();
        assert!((v.value - 0.5).abs() < 0.05, "bayes risk {}", v.value);
    }

    #[test]
    fn blyth_h_values() {
        assert!((blyth_h(1, 0.0) - 1.0).abs() < 1e-14);
        let v = blyth_h(1, std::f64::consts::E - 1.0);
        assert!((v - (1.0 - 1.0 / (std::f64::consts::E + 1.0).ln())).abs() < 1e-12);
        assert!((v - 0.23854).abs() < 1e-5);
        for &k in &[1u32, 10, 1000] {
            for &l in &[0.0, 0.3, 5.0, 500.0] {
                let h = blyth_h(k, l);
                assert!(h > 0.0 && h <= 1.0, "h_{k}({l}) = {h}");
            }
        }
    }

    #[test]
    fn blyth_h_prime_matches_finite_differences() {
        for &k in &[1u32, 10] {
            for &l in &[0.1, 1.0, 12.0] {
                let eps = 1e-6;
                let fd = (blyth_h(k, l + eps) - blyth_h(k, l - eps)) / (2.0 * eps);
                let an = blyth_h_prime(k, l);
                assert!((fd - an).abs() < 1e-8, "k={k} l={l}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn blyth_ratio_matches_direct_quadrature() {
        // independent route: plain trapezoid refinement of I_k(w)
        let k = 1u32;
        let direct = |w: i32| {
            let f = |l: f64| {
                let h = blyth_h(k, l);
                h * h * l.powi(w) * (-2.0 * l).exp()
            };
            let (a, b, n) = (1e-9, 40.0, 400_000);
            let h_step = (b - a) / n as f64;
            let mut acc = 0.5 * (f(a) + f(b));
            for i in 1..n {
                acc += f(a + i as f64 * h_step);
            }
            acc * h_step
        };
        let want = direct(2) / direct(1);
        let got = blyth_moment_ratio(k, 2).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn blyth_bound_positive_and_vanishing_for_large_k() {
        // the sequence peaks near k = 10 and then decays toward zero (the
        // admissibility mechanism); it is not monotone from k = 1
        let w_max = 400;
        let tol = 2.5; // the rigorous tail decays like 1/log(w_max)
        let b10 = blyth_delta_bound(10, 2, w_max, tol).unwrap();
        let b100 = blyth_delta_bound(100, 2, w_max, tol).unwrap();
        let b3000 = blyth_delta_bound(3000, 2, w_max, tol).unwrap();
        assert!(b10.value > b100.value && b100.value > b3000.value && b3000.value > 0.0);
        assert!(b10.truncation_bound < tol);
    }

    #[test]
    fn blyth_bound_reports_unattainable_tail() {
        let err = blyth_delta_bound(10, 2, 30, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn mc_matches_exact_oracle() {
        let tree = tree_from(&[2], &[1.2, 1.8]);
        let mc = mc_risk(
            &tree,
            &EstimatorRule::BasicFlatGb,
            LossKind::Sse,
            200_000,
            11,
        )
        .unwrap();
        let exact = exact_risk_basic(&EstimatorRule::BasicFlatGb, 2, 3.0, 1e-10).unwrap();
        assert!(
            (mc.mean - exact.value).abs() < 4.0 * mc.stderr,
            "mc={} exact={} stderr={}",
            mc.mean,
            exact.value,
            mc.stderr
        );
    }

    #[test]
    fn mc_risk_depends_only_on_the_total_for_covered_rules() {
        let uniform = tree_from(&[2], &[2.0, 2.0]);
        let skewed = tree_from(&[2], &[3.6, 0.4]);
        let a = mc_risk(
            &uniform,
            &EstimatorRule::BasicShrinkGb,
            LossKind::Sse,
            150_000,
            3,
        )
        .unwrap();
        let b = mc_risk(
            &skewed,
            &EstimatorRule::BasicShrinkGb,
            LossKind::Sse,
            150_000,
            4,
        )
        .unwrap();
        let joint = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 4.0 * joint,
            "{} vs {}",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn paired_diff_of_identical_rules_is_exactly_zero() {
        let tree = tree_from(&[2], &[0.5, 1.5]);
        let d = mc_risk_diff(
            &tree,
            &EstimatorRule::BasicShrinkGb,
            &EstimatorRule::BasicShrinkGb,
            LossKind::Sse,
            5_000,
            1,
        )
        .unwrap();
        assert_eq!(d.mean, 0.0);
        assert_eq!(d.stderr, 0.0);
    }

    #[test]
    fn paired_diff_tracks_exact_difference() {
        let tree = tree_from(&[2], &[2.0, 3.0]);
        let d = mc_risk_diff(
            &tree,
            &EstimatorRule::BasicShrinkGb,
            &EstimatorRule::BasicFlatGb,
            LossKind::Sse,
            200_000,
            5,
        )
        .unwrap();
        let exact = exact_risk_diff_basic(DiffPair::ShrinkMinusFlat, 2, 5.0, 1e-10).unwrap();
        assert!(d.mean < 0.0);
        assert!(
            (d.mean - exact.value).abs() < 4.0 * d.stderr,
            "mc={} exact={} stderr={}",
            d.mean,
            exact.value,
            d.stderr
        );
    }

    #[test]
    fn paired_diff_across_different_designs() {
        // shrink consumes X(0), the Clevenson-Zidek rule only X(1): the
        // richer design is sampled once and the smaller rule ignores the
        // root count, which keeps the pairing valid
        let tree = tree_from(&[3], &[1.0, 2.0, 1.5]);
        let d = mc_risk_diff(
            &tree,
            &EstimatorRule::BasicShrinkGb,
            &EstimatorRule::XOnlyCz,
            LossKind::Sse,
            200_000,
            8,
        )
        .unwrap();
        let exact = exact_risk_diff_basic(DiffPair::ShrinkXyMinusCzX, 3, 4.5, 1e-10).unwrap();
        assert!(
            (d.mean - exact.value).abs() < 4.0 * d.stderr,
            "mc={} exact={} stderr={}",
            d.mean,
            exact.value,
            d.stderr
        );
    }

    #[test]
    fn mc_is_deterministic_and_thread_count_invariant() {
        let tree = tree_from(&[2], &[1.0, 2.0]);
        let a = mc_risk(&tree, &EstimatorRule::BasicMl, LossKind::Sse, 30_000, 42).unwrap();
        let b = mc_risk(&tree, &EstimatorRule::BasicMl, LossKind::Sse, 30_000, 42).unwrap();
        assert_eq!(a, b);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool
            .install(|| mc_risk(&tree, &EstimatorRule::BasicMl, LossKind::Sse, 30_000, 42))
            .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn entropy_mc_rejects_rules_with_zero_values() {
        let tree = tree_from(&[2], &[1.0, 2.0]);
        let err = mc_risk(&tree, &EstimatorRule::BasicMl, LossKind::Entropy, 100, 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn entropy_mc_runs_for_positive_rules() {
        let tree = tree_from(&[2, 2], &[0.5, 1.0, 1.5, 2.0]);
        let r = mc_risk(
            &tree,
            &EstimatorRule::EntropyJeffreys { with_z: false },
            LossKind::Entropy,
            20_000,
            9,
        )
        .unwrap();
        assert!(r.mean > 0.0 && r.stderr > 0.0);
    }

    #[test]
    fn half_sum_has_constant_risk_one_half() {
        let tree = tree_from(&[1], &[1.7]);
        let r = mc_risk(&tree, &EstimatorRule::HalfSum, LossKind::Sse, 200_000, 2).unwrap();
        assert!(
            (r.mean - 0.5).abs() < 4.0 * r.stderr,
            "mean={} se={}",
            r.mean,
            r.stderr
        );
    }
}
