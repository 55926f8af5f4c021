//! Closed-form estimators for the basic, multi-set, and general hierarchical
//! Poisson models, plus a generic conjugate engine that recovers every one
//! of them from Gamma/Dirichlet posterior moments.
//!
//! Boundary convention: estimators tuned to standardized squared error
//! return exact zeros on zero counts (never NaN), matching the convention
//! used by the exact risk series. Entropy-loss estimators are strictly
//! positive by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{aggregate, BasicObs, MultiObs, ObservationSet};
use crate::priors::PriorExponents;
use crate::risk::blyth_moment_ratio;

/// Tagged choice of estimation rule with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorRule {
    /// Maximum likelihood from `(X, Y)`; zero vector when `X = 0`.
    BasicMl,
    /// Generalized Bayes against the prior flat on the rates.
    BasicFlatGb,
    /// Generalized Bayes against the prior flat on `(total, ratios)`.
    BasicShrinkGb,
    /// Maximum likelihood from `X` alone.
    XOnlyMl,
    /// The Clevenson-Zidek rule from `X` alone.
    XOnlyCz,
    /// `(X_1 + Y) / 2`, the constant-risk benchmark for a single rate.
    HalfSum,
    /// Bayes rule under the product-exponential prior; `beta = 0` recovers
    /// the flat-prior rule.
    BetaBayes {
        beta: f64,
    },
    /// Proper Bayes rule under the squared `h_k` sequence prior, the rules
    /// that witness admissibility.
    BlythK {
        k: u32,
    },
    MultiMl,
    MultiFlatGb,
    MultiShrinkGb,
    /// Posterior mean under a stick-breaking prior (entropy loss).
    EntropyStick {
        alpha: f64,
        a: Vec<f64>,
        with_z: bool,
    },
    /// Posterior mean under the Jeffreys prior (entropy loss).
    EntropyJeffreys {
        with_z: bool,
    },
    /// Posterior mean under exponent vector `a` and design `X(D')` for the
    /// general hierarchy (multi-level entropy loss).
    GeneralGb {
        prior: PriorExponents,
        d_prime: usize,
    },
}

impl EstimatorRule {
    /// Short name for report rows.
    pub fn name(&self) -> String {
        match self {
            Self::BasicMl => "basic_ml".into(),
            Self::BasicFlatGb => "basic_flat_gb".into(),
            Self::BasicShrinkGb => "basic_shrink_gb".into(),
            Self::XOnlyMl => "x_only_ml".into(),
            Self::XOnlyCz => "x_only_cz".into(),
            Self::HalfSum => "half_sum".into(),
            Self::BetaBayes { beta } => format!("beta_bayes({beta})"),
            Self::BlythK { k } => format!("blyth_k({k})"),
            Self::MultiMl => "multi_ml".into(),
            Self::MultiFlatGb => "multi_flat_gb".into(),
            Self::MultiShrinkGb => "multi_shrink_gb".into(),
            Self::EntropyStick { alpha, with_z, .. } => {
                format!(
                    "entropy_stick(alpha={alpha},z={})",
                    if *with_z { 1 } else { 0 }
                )
            }
            Self::EntropyJeffreys { with_z } => {
                format!("entropy_jeffreys(z={})", if *with_z { 1 } else { 0 })
            }
            Self::GeneralGb { d_prime, .. } => format!("general_gb(D'={d_prime})"),
        }
    }

    /// Depth of hierarchy this rule consumes (None = any depth).
    pub fn model_depth(&self) -> Option<usize> {
        match self {
            Self::BasicMl
            | Self::BasicFlatGb
            | Self::BasicShrinkGb
            | Self::XOnlyMl
            | Self::XOnlyCz
            | Self::HalfSum
            | Self::BetaBayes { .. }
            | Self::BlythK { .. } => Some(1),
            Self::MultiMl
            | Self::MultiFlatGb
            | Self::MultiShrinkGb
            | Self::EntropyStick { .. }
            | Self::EntropyJeffreys { .. } => Some(2),
            Self::GeneralGb { .. } => None,
        }
    }

    /// Start depth `D'` of the observation design the rule consumes.
    pub fn required_start_depth(&self) -> usize {
        match self {
            Self::XOnlyMl | Self::XOnlyCz => 1,
            Self::MultiMl | Self::MultiFlatGb | Self::MultiShrinkGb => 1,
            Self::EntropyStick { with_z, .. } | Self::EntropyJeffreys { with_z } => {
                if *with_z {
                    0
                } else {
                    1
                }
            }
            Self::GeneralGb { d_prime, .. } => *d_prime,
            _ => 0,
        }
    }

    /// True when every coordinate of the output is strictly positive, which
    /// the entropy losses require.
    pub fn strictly_positive(&self) -> bool {
        matches!(
            self,
            Self::EntropyStick { .. } | Self::EntropyJeffreys { .. } | Self::GeneralGb { .. }
        )
    }
}

/// Estimated leaf rates, flattened in leaf order. `flagged` marks degenerate
/// fallbacks (the Blyth rule at zero total count).
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub values: Vec<f64>,
    pub flagged: bool,
}

impl RateEstimate {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            flagged: false,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Basic-model estimators from `(X, Y)` or `X` alone.
pub fn estimate_basic(obs: &BasicObs, rule: &EstimatorRule) -> Result<RateEstimate> {
    let m = obs.x.len();
    let xs = obs.x_total();
    let y = obs.y;
    let xsf = xs as f64;
    let yf = y as f64;
    let mf = m as f64;

    // Per-coordinate zero convention: every rule below sends a zero count to
    // an exact zero, so only the nonzero coordinates need the formulas.
    let scaled = |scale: f64, denom: f64| -> Vec<f64> {
        obs.x
            .iter()
            .map(|&xi| {
                if xi == 0 {
                    0.0
                } else {
                    scale * xi as f64 / denom
                }
            })
            .collect()
    };

    match rule {
        EstimatorRule::BasicMl => Ok(RateEstimate::new(scaled((xsf + yf) / 2.0, xsf))),
        EstimatorRule::BasicFlatGb => Ok(RateEstimate::new(scaled(
            (xsf + yf + mf - 1.0) / 2.0,
            xsf + mf - 1.0,
        ))),
        EstimatorRule::BasicShrinkGb => {
            Ok(RateEstimate::new(scaled((xsf + yf) / 2.0, xsf + mf - 1.0)))
        }
        EstimatorRule::XOnlyMl => Ok(RateEstimate::new(
            obs.x.iter().map(|&xi| xi as f64).collect(),
        )),
        EstimatorRule::XOnlyCz => Ok(RateEstimate::new(scaled(xsf, xsf + mf - 1.0))),
        EstimatorRule::HalfSum => {
            if m != 1 {
                return Err(Error::Capability(format!(
                    "the half-sum benchmark is the m = 1 rule, got m = {m}"
                )));
            }
            Ok(RateEstimate::new(vec![(xsf + yf) / 2.0]))
        }
        EstimatorRule::BetaBayes { beta } => {
            if !(*beta >= 0.0) {
                return Err(Error::Domain(format!(
                    "beta must be nonnegative, got {beta}"
                )));
            }
            Ok(RateEstimate::new(scaled(
                (xsf + yf + mf - 1.0) / (2.0 + beta),
                xsf + mf - 1.0,
            )))
        }
        EstimatorRule::BlythK { k } => {
            if *k < 1 {
                return Err(Error::Domain("Blyth index k must be >= 1".into()));
            }
            let w = xs + y;
            if w == 0 {
                // the w - 1 = -1 moment integral diverges; X = 0 forces the
                // zero vector anyway
                return Ok(RateEstimate {
                    values: vec![0.0; m],
                    flagged: true,
                });
            }
            if xs == 0 {
                return Ok(RateEstimate::new(vec![0.0; m]));
            }
            let ratio = blyth_moment_ratio(*k, w)?;
            Ok(RateEstimate::new(scaled(ratio, xsf + mf - 1.0)))
        }
        other => Err(Error::Capability(format!(
            "{} is not a basic-model rule",
            other.name()
        ))),
    }
}

/// Multi-set estimators from `(X, Y)` under standardized squared error.
pub fn estimate_multi(obs: &MultiObs, rule: &EstimatorRule) -> Result<RateEstimate> {
    let m = obs.groups();
    let mf = m as f64;
    let mut values = Vec::with_capacity(obs.group_sizes().iter().sum());
    for i in 0..m {
        let ni = obs.x(i).len() as f64;
        let xi_dot = obs.x_group_total(i) as f64;
        let yi = obs.y(i) as f64;
        let (scale, denom) = match rule {
            EstimatorRule::MultiMl => ((xi_dot + yi) / 2.0, xi_dot),
            EstimatorRule::MultiFlatGb => ((xi_dot + yi + ni - 1.0) / 2.0, xi_dot + ni - 1.0),
            EstimatorRule::MultiShrinkGb => {
                let tot = (obs.x_total() + obs.y_total()) as f64;
                (
                    tot / 2.0 * ((xi_dot + yi) / (tot + mf - 1.0)),
                    xi_dot + ni - 1.0,
                )
            }
            other => {
                return Err(Error::Capability(format!(
                    "{} is not a multi-set squared-error rule",
                    other.name()
                )))
            }
        };
        for &xij in obs.x(i) {
            values.push(if xij == 0 {
                0.0
            } else {
                scale * xij as f64 / denom
            });
        }
    }
    Ok(RateEstimate::new(values))
}

/// Posterior-mean estimator under the stick-breaking prior `(alpha; a)`,
/// with or without the top-level count `Z`. Strictly positive.
pub fn estimate_entropy(
    obs: &MultiObs,
    alpha: f64,
    a: &[f64],
    with_z: bool,
) -> Result<RateEstimate> {
    let m = obs.groups();
    if a.len() != m {
        return Err(Error::Shape(format!(
            "expected {m} group exponents, got {}",
            a.len()
        )));
    }
    if !(alpha > 0.0) || a.iter().any(|ai| !(*ai > 0.0)) {
        return Err(Error::Domain(
            "stick-breaking exponents must be positive".into(),
        ));
    }
    let tot = (obs.x_total() + obs.y_total()) as f64;
    let a_dot: f64 = a.iter().sum();
    let root = if with_z {
        let z = obs
            .z()
            .ok_or_else(|| Error::Shape("rule expects the top-level count Z".into()))?;
        (tot + z as f64 + alpha) / 3.0
    } else {
        (tot + alpha) / 2.0
    };
    let mut values = Vec::with_capacity(obs.group_sizes().iter().sum());
    for i in 0..m {
        let ni = obs.x(i).len() as f64;
        let xi_dot = obs.x_group_total(i) as f64;
        let yi = obs.y(i) as f64;
        let mid = (xi_dot + yi + a[i]) / (tot + a_dot);
        for &xij in obs.x(i) {
            values.push(root * mid * (xij as f64 + 0.5) / (xi_dot + ni / 2.0));
        }
    }
    Ok(RateEstimate::new(values))
}

/// The Jeffreys-prior posterior mean: the stick-breaking rule with
/// `alpha = n./2` and `a_i = n_i/2`.
pub fn estimate_entropy_jeffreys(obs: &MultiObs, with_z: bool) -> Result<RateEstimate> {
    let sizes = obs.group_sizes();
    let a: Vec<f64> = sizes.iter().map(|&n| n as f64 / 2.0).collect();
    let alpha: f64 = a.iter().sum();
    estimate_entropy(obs, alpha, &a, with_z)
}

/// Generalized Bayes estimator for the general hierarchy, design `X(D')`
/// taken from the observation set, exponents `a`. Strictly positive.
pub fn estimate_general(obs: &ObservationSet, prior: &PriorExponents) -> Result<RateEstimate> {
    let spec = obs.spec().clone();
    let d_max = spec.depth();
    let d_prime = obs.start_depth();
    let totals = aggregate(obs);
    let rate = (1 + d_max - d_prime) as f64;

    // accumulate factor products level by level
    let mut values = vec![(totals.root() as f64 + prior.root()) / rate];
    for d in 1..=d_max {
        let mut next = vec![0.0; spec.level_width(d)];
        for parent in 0..spec.level_width(d - 1) {
            let denom: f64 = spec
                .children(d - 1, parent)
                .map(|c| totals.total(d, c) as f64 + prior.exponent(d, c))
                .sum();
            for c in spec.children(d - 1, parent) {
                let num = totals.total(d, c) as f64 + prior.exponent(d, c);
                next[c] = values[parent] * num / denom;
            }
        }
        values = next;
    }
    Ok(RateEstimate::new(values))
}

/// Which Bayes rule the conjugate engine derives from the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateLoss {
    /// Standardized squared error: reciprocal of the posterior mean of
    /// `1/lambda_i`.
    Sse,
    /// Entropy loss: the posterior mean.
    Entropy,
}

/// Generic conjugate engine. The posterior under an exponent prior is an
/// independent Gamma on the total and one Dirichlet per internal node;
/// the Bayes rules are assembled from their moments:
///
/// - entropy loss: `E[lambda_i | X]`,
/// - standardized squared error: `1 / E[1/lambda_i | X]`, with an exact
///   zero wherever the reciprocal moment diverges (shape <= 1), the same
///   boundary convention the closed forms use.
pub fn conjugate_engine(
    obs: &ObservationSet,
    prior: &PriorExponents,
    loss: ConjugateLoss,
) -> Result<RateEstimate> {
    let spec = obs.spec().clone();
    let d_max = spec.depth();
    let totals = aggregate(obs);
    let rate = (1 + d_max - obs.start_depth()) as f64;
    let root_shape = totals.root() as f64 + prior.root();

    let leaf_count = spec.leaf_count();
    let mut values = vec![0.0f64; leaf_count];
    'leaf: for (leaf, value) in values.iter_mut().enumerate() {
        let mut estimate = match loss {
            ConjugateLoss::Entropy => root_shape / rate,
            ConjugateLoss::Sse => {
                if root_shape <= 1.0 {
                    continue 'leaf; // E[1/total] diverges
                }
                (root_shape - 1.0) / rate
            }
        };
        // walk the ancestor chain, multiplying ratio moments
        let mut idx = leaf;
        for d in (1..=d_max).rev() {
            let parent = spec.parent(d, idx);
            let shape = totals.total(d, idx) as f64 + prior.exponent(d, idx);
            let block: f64 = spec
                .children(d - 1, parent)
                .map(|c| totals.total(d, c) as f64 + prior.exponent(d, c))
                .sum();
            match loss {
                ConjugateLoss::Entropy => estimate *= shape / block,
                ConjugateLoss::Sse => {
                    if shape <= 1.0 {
                        continue 'leaf; // E[1/ratio] diverges
                    }
                    estimate *= (shape - 1.0) / (block - 1.0);
                }
            }
            idx = parent;
        }
        *value = estimate;
    }
    Ok(RateEstimate::new(values))
}

/// Evaluates any rule against an observation set of at least the design the
/// rule consumes; deeper rules ignore the extra counts.
pub fn evaluate_rule(rule: &EstimatorRule, obs: &ObservationSet) -> Result<RateEstimate> {
    if let Some(depth) = rule.model_depth() {
        if obs.spec().depth() != depth {
            return Err(Error::Shape(format!(
                "rule {} expects a depth-{depth} hierarchy, got depth {}",
                rule.name(),
                obs.spec().depth()
            )));
        }
    }
    match rule {
        EstimatorRule::MultiMl | EstimatorRule::MultiFlatGb | EstimatorRule::MultiShrinkGb => {
            estimate_multi(&obs.multi_view()?, rule)
        }
        EstimatorRule::EntropyStick { alpha, a, with_z } => {
            estimate_entropy(&obs.multi_view()?, *alpha, a, *with_z)
        }
        EstimatorRule::EntropyJeffreys { with_z } => {
            estimate_entropy_jeffreys(&obs.multi_view()?, *with_z)
        }
        EstimatorRule::GeneralGb { prior, d_prime } => {
            let restricted = obs.restricted(*d_prime)?;
            estimate_general(&restricted, prior)
        }
        _ => {
            let view = if rule.required_start_depth() == 1 {
                obs.restricted(1)?.basic_view()?
            } else {
                obs.basic_view()?
            };
            estimate_basic(&view, rule)
        }
    }
}
