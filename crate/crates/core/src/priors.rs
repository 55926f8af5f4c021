//! Improper conjugate priors on the (total, ratios) parametrization of the
//! hierarchy: exponent families, the Jeffreys prior, the interpolating
//! `a(D0)(D')` family, log densities, and a numeric Fisher-information
//! oracle used to validate the closed-form Jeffreys exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{HierarchySpec, ParamTree};
use crate::poisson::{truncated_expectation, PolyBound};

/// Exponents applied to the ratio coordinates of one depth: either one value
/// shared by every node at that depth, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepthExponents {
    Uniform(f64),
    PerNode(Vec<f64>),
}

/// A prior `lambda^(a0 - 1) * prod_d prod_v theta_v^(a_d(v) - 1)` given by
/// its exponent vector. All exponents are strictly positive; densities are
/// improper and only ever evaluated in log space up to a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorExponents {
    root: f64,
    depths: Vec<DepthExponents>,
}

impl PriorExponents {
    pub fn new(spec: &HierarchySpec, root: f64, depths: Vec<DepthExponents>) -> Result<Self> {
        if !(root > 0.0) {
            return Err(Error::Domain(format!(
                "root exponent must be positive, got {root}"
            )));
        }
        if depths.len() != spec.depth() {
            return Err(Error::Shape(format!(
                "expected {} depth exponent entries, got {}",
                spec.depth(),
                depths.len()
            )));
        }
        for (d, e) in depths.iter().enumerate() {
            match e {
                DepthExponents::Uniform(a) => {
                    if !(*a > 0.0) {
                        return Err(Error::Domain(format!(
                            "exponent at depth {} must be positive",
                            d + 1
                        )));
                    }
                }
                DepthExponents::PerNode(v) => {
                    if v.len() != spec.level_width(d + 1) {
                        return Err(Error::Shape(format!(
                            "depth {} expects {} per-node exponents, got {}",
                            d + 1,
                            spec.level_width(d + 1),
                            v.len()
                        )));
                    }
                    if v.iter().any(|a| !(*a > 0.0)) {
                        return Err(Error::Domain(format!(
                            "exponents at depth {} must be positive",
                            d + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { root, depths })
    }

    /// Root exponent `a_0` (on the grand total).
    pub fn root(&self) -> f64 {
        self.root
    }

    /// Exponent on the ratio coordinate of node `(d, idx)`, `d >= 1`.
    pub fn exponent(&self, d: usize, idx: usize) -> f64 {
        match &self.depths[d - 1] {
            DepthExponents::Uniform(a) => *a,
            DepthExponents::PerNode(v) => v[idx],
        }
    }

    /// Per-depth exponents when the family is uniform at every depth.
    pub fn uniform_exponents(&self) -> Option<Vec<f64>> {
        self.depths
            .iter()
            .map(|e| match e {
                DepthExponents::Uniform(a) => Some(*a),
                DepthExponents::PerNode(_) => None,
            })
            .collect()
    }
}

/// The product-exponential prior `pi^(beta) = beta^m prod_i e^(-beta li)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub beta: f64,
}

impl BetaPrior {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }
}

/// Any prior accepted by the shared density evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Exponents(PriorExponents),
    Beta(BetaPrior),
}

/// The Jeffreys prior of the design `X(D')` for every `D'`:
/// `a_0 = n_1...n_D / 2` and `a_d = n_(d+1)...n_D / 2` (empty product = 1).
pub fn jeffreys_exponents(spec: &HierarchySpec) -> PriorExponents {
    let d_max = spec.depth();
    let prod_from = |d: usize| -> f64 { spec.branching()[d..].iter().product::<usize>() as f64 };
    let depths = (1..=d_max)
        .map(|d| DepthExponents::Uniform(prod_from(d) / 2.0))
        .collect();
    PriorExponents::new(spec, prod_from(0) / 2.0, depths).expect("jeffreys exponents are positive")
}

/// The interpolating family `a(D0)(D')`: below `D0`, branching factors enter
/// the product only when their level is `<= D'` or `> D0`; from `D0` on the
/// exponents coincide with the Jeffreys ones. `a(D0)(D0)` is the Jeffreys
/// prior exactly.
pub fn build_a_family(spec: &HierarchySpec, d0: usize, d_prime: usize) -> Result<PriorExponents> {
    let d_max = spec.depth();
    if d0 == 0 || d0 > d_max {
        return Err(Error::Shape(format!(
            "D0 must lie in 1..={d_max}, got {d0}"
        )));
    }
    if d_prime > d0 {
        return Err(Error::Shape(format!(
            "D' must lie in 0..={d0}, got {d_prime}"
        )));
    }
    let exponent = |d: usize| -> f64 {
        let mut prod = 1.0;
        for dd in d + 1..=d_max {
            let include = d >= d0 || dd <= d_prime || dd > d0;
            if include {
                prod *= spec.branching()[dd - 1] as f64;
            }
        }
        prod / 2.0
    };
    let depths = (1..=d_max)
        .map(|d| DepthExponents::Uniform(exponent(d)))
        .collect();
    PriorExponents::new(spec, exponent(0), depths)
}

/// Exponents of the prior that is flat on the leaf rates themselves: each
/// node's exponent is the number of leaves below it (the Jacobian of the
/// leaf-to-(total, ratios) change of variables).
pub fn flat_on_rates(spec: &HierarchySpec) -> PriorExponents {
    let d_max = spec.depth();
    let prod_from = |d: usize| -> f64 { spec.branching()[d..].iter().product::<usize>() as f64 };
    let depths = (1..=d_max)
        .map(|d| DepthExponents::Uniform(prod_from(d)))
        .collect();
    PriorExponents::new(spec, prod_from(0), depths).expect("leaf counts are positive")
}

/// Exponents of the prior that is flat on `(total, ratios)`: all ones.
pub fn flat_on_ratios(spec: &HierarchySpec) -> PriorExponents {
    let depths = (1..=spec.depth())
        .map(|_| DepthExponents::Uniform(1.0))
        .collect();
    PriorExponents::new(spec, 1.0, depths).expect("unit exponents are positive")
}

/// Stick-breaking prior of the two-level model: exponent `alpha` on the
/// total, `a_i` per group ratio, `1/2` on every within-group ratio.
pub fn stick_breaking(spec: &HierarchySpec, alpha: f64, a: &[f64]) -> Result<PriorExponents> {
    if spec.depth() != 2 {
        return Err(Error::Capability(format!(
            "stick-breaking priors are defined for two-level hierarchies, got depth {}",
            spec.depth()
        )));
    }
    PriorExponents::new(
        spec,
        alpha,
        vec![
            DepthExponents::PerNode(a.to_vec()),
            DepthExponents::Uniform(0.5),
        ],
    )
}

/// Log prior density at `point`, up to an additive constant.
pub fn log_prior_density(prior: &Prior, point: &ParamTree) -> Result<f64> {
    let spec = point.spec();
    let total = point.lambda_total();
    if !(total > 0.0) {
        return Err(Error::Domain(
            "parameter point must be strictly positive".into(),
        ));
    }
    match prior {
        Prior::Beta(b) => {
            let m = spec.leaf_count() as f64;
            Ok(m * b.beta.ln() - b.beta * total)
        }
        Prior::Exponents(e) => {
            let mut log_density = (e.root() - 1.0) * total.ln();
            for d in 1..=spec.depth() {
                for idx in 0..spec.level_width(d) {
                    let theta = point.theta(d, idx);
                    if !(theta > 0.0) {
                        return Err(Error::Domain(format!(
                            "zero ratio coordinate at depth {d}, index {idx}"
                        )));
                    }
                    log_density += (e.exponent(d, idx) - 1.0) * theta.ln();
                }
            }
            Ok(log_density)
        }
    }
}

/// Dense symmetric Fisher information over the coordinates
/// `(lambda, free ratio coordinates...)`, in the chart that drops the last
/// child of every internal node.
#[derive(Debug, Clone)]
pub struct FisherInfo {
    dim: usize,
    data: Vec<f64>,
}

impl FisherInfo {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Log-determinant via Cholesky; fails if the matrix is not positive
    /// definite.
    pub fn log_det(&self) -> Result<f64> {
        let n = self.dim;
        let mut chol = vec![0.0f64; n * n];
        let mut log_det = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= chol[i * n + k] * chol[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::Numeric(format!(
                            "Fisher information not positive definite at pivot {i}"
                        )));
                    }
                    chol[i * n + i] = sum.sqrt();
                    log_det += sum.ln();
                } else {
                    chol[i * n + j] = sum / chol[j * n + j];
                }
            }
        }
        Ok(log_det)
    }
}

/// Expected negative Hessian of the log likelihood of `X(D')`, with every
/// count's expectation evaluated by truncated summation (tail mass below
/// `tail_tol` per count). This is the oracle side of the Jeffreys
/// validation; nothing here uses the closed-form `E[X] = lambda`.
pub fn fisher_information_numeric(
    tree: &ParamTree,
    d_prime: usize,
    tail_tol: f64,
) -> Result<FisherInfo> {
    let spec = tree.spec();
    let d_max = spec.depth();
    if d_prime > d_max {
        return Err(Error::Shape(format!(
            "D' = {d_prime} exceeds depth {d_max}"
        )));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::Domain(format!(
            "tail_tol must lie in (0, 1e-6], got {tail_tol}"
        )));
    }

    // Numeric mean of each observed count, then subtree totals E[X~_(v,+)].
    let mut totals: Vec<Vec<f64>> = (0..=d_max)
        .map(|d| vec![0.0; spec.level_width(d)])
        .collect();
    for d in d_prime..=d_max {
        for idx in 0..spec.level_width(d) {
            let mean = tree.lambda(d, idx);
            let (value, _) =
                truncated_expectation(mean, |x| x as f64, &PolyBound::linear(0.0, 1.0), tail_tol)?;
            totals[d][idx] = value;
        }
    }
    for d in (0..d_max).rev() {
        for idx in 0..spec.level_width(d) {
            let below: f64 = spec.children(d, idx).map(|c| totals[d + 1][c]).sum();
            totals[d][idx] += below;
        }
    }

    // Coordinate layout: lambda first, then for every internal node its
    // children minus the last one, depth by depth.
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for d in 1..=d_max {
        let n = spec.branching()[d - 1];
        for parent in 0..spec.level_width(d - 1) {
            for j in 0..n - 1 {
                coords.push((d, parent * n + j));
            }
        }
    }
    let dim = 1 + coords.len();
    let mut data = vec![0.0f64; dim * dim];

    data[0] = totals[0][0] / (tree.lambda_total() * tree.lambda_total());
    for (i, &(d, idx)) in coords.iter().enumerate() {
        for (j, &(d2, idx2)) in coords.iter().enumerate() {
            if d != d2 || spec.parent(d, idx) != spec.parent(d2, idx2) {
                continue; // independent blocks
            }
            let parent = spec.parent(d, idx);
            let last = spec.children(d - 1, parent).end - 1;
            let mut entry = totals[d][last] / (tree.theta(d, last) * tree.theta(d, last));
            if idx == idx2 {
                entry += totals[d][idx] / (tree.theta(d, idx) * tree.theta(d, idx));
            }
            data[(i + 1) * dim + (j + 1)] = entry;
        }
    }

    Ok(FisherInfo { dim, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_param_tree;

    fn spec(branching: &[usize]) -> HierarchySpec {
        HierarchySpec::new(branching.to_vec()).unwrap()
    }

    #[test]
    fn jeffreys_scalar_poisson() {
        let e = jeffreys_exponents(&spec(&[1]));
        assert_eq!(e.root(), 0.5);
        assert_eq!(e.exponent(1, 0), 0.5);
    }

    #[test]
    fn jeffreys_two_level() {
        let e = jeffreys_exponents(&spec(&[2, 3]));
        assert_eq!(e.root(), 3.0);
        assert_eq!(e.exponent(1, 0), 1.5);
        assert_eq!(e.exponent(2, 4), 0.5);
    }

    #[test]
    fn jeffreys_matches_lemma_exponents_for_balanced_groups() {
        // m=2 groups of 4: density exponents n./2 - 1 on the total,
        // n_i/2 - 1 on group ratios, -1/2 within groups.
        let e = jeffreys_exponents(&spec(&[2, 4]));
        assert_eq!(e.root() - 1.0, 3.0);
        assert_eq!(e.exponent(1, 1) - 1.0, 1.0);
        assert_eq!(e.exponent(2, 0) - 1.0, -0.5);
    }

    #[test]
    fn a_family_examples() {
        let s = spec(&[2, 3]);
        let at_d0 = build_a_family(&s, 2, 2).unwrap();
        assert_eq!(at_d0, jeffreys_exponents(&s));

        let zero = build_a_family(&s, 2, 0).unwrap();
        assert_eq!(zero.root(), 0.5);
        assert_eq!(zero.exponent(1, 0), 0.5);
        assert_eq!(zero.exponent(2, 0), 0.5);

        let mid = build_a_family(&s, 1, 0).unwrap();
        assert_eq!(mid.root(), 1.5);
        assert_eq!(mid.exponent(1, 0), 1.5);
        assert_eq!(mid.exponent(2, 0), 0.5);
    }

    #[test]
    fn a_family_rejects_bad_indices() {
        let s = spec(&[2, 3]);
        assert!(build_a_family(&s, 0, 0).is_err());
        assert!(build_a_family(&s, 3, 0).is_err());
        assert!(build_a_family(&s, 1, 2).is_err());
    }

    #[test]
    fn log_density_examples() {
        // flat on (total, ratios) vanishes identically
        let s = spec(&[3]);
        let tree = build_param_tree(&s, &[0.5, 0.5, 1.0]).unwrap();
        let flat = Prior::Exponents(flat_on_ratios(&s));
        assert_eq!(log_prior_density(&flat, &tree).unwrap(), 0.0);

        // flat on rates, m = 3, total 2: (m-1) log 2
        let flat_rates = Prior::Exponents(flat_on_rates(&s));
        let base = log_prior_density(&flat_rates, &tree).unwrap();
        assert!((base - 2.0 * 2.0f64.ln()) < 1e-12 || (base - 2.0 * 2.0f64.ln()).abs() < 1e-12);

        // product-exponential: m log beta - beta * Lambda
        let s2 = spec(&[2]);
        let tree2 = build_param_tree(&s2, &[1.0, 2.0]).unwrap();
        let beta = Prior::Beta(BetaPrior::new(1.0).unwrap());
        assert!((log_prior_density(&beta, &tree2).unwrap() - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn beta_prior_integrates_to_one() {
        // marginal of the total under pi^(beta) is Gamma(m, beta)
        use crate::quadrature::integrate_log;
        use statrs::function::gamma::ln_gamma;
        let (m, beta) = (2.0f64, 0.7f64);
        let r = integrate_log(
            |t| ((m - 1.0) * t.ln() - beta * t + m * beta.ln() - ln_gamma(m)).exp(),
            1e-14,
            m / beta + 90.0 / beta,
            1e-12,
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "mass={}", r.value);
    }

    #[test]
    fn fisher_information_scalar_cases() {
        // one city, one county: (X, Y, Z) has information 3/Lambda,
        // (X, Y) has 2/Lambda.
        let s = spec(&[1, 1]);
        let tree = build_param_tree(&s, &[2.0]).unwrap();
        let with_z = fisher_information_numeric(&tree, 0, 1e-9).unwrap();
        assert_eq!(with_z.dim(), 1);
        assert!((with_z.get(0, 0) - 1.5).abs() < 1e-6);

        let tree4 = build_param_tree(&s, &[4.0]).unwrap();
        let no_z = fisher_information_numeric(&tree4, 1, 1e-9).unwrap();
        assert!((no_z.get(0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn fisher_matrix_is_symmetric() {
        let s = spec(&[2, 3]);
        let tree = build_param_tree(&s, &[0.4, 0.8, 1.2, 0.6, 1.0, 1.4]).unwrap();
        let fi = fisher_information_numeric(&tree, 0, 1e-9).unwrap();
        assert!(fi.max_asymmetry() < 1e-10);
        assert!(fi.log_det().is_ok());
    }

    #[test]
    fn sqrt_det_is_proportional_to_jeffreys_density() {
        // the computable restatement of "Jeffreys ∝ sqrt(det I)"
        let s = spec(&[2, 2]);
        let grids = [
            vec![0.4, 0.7, 1.1, 0.9],
            vec![1.5, 0.2, 0.8, 2.5],
            vec![3.0, 1.0, 0.5, 0.25],
        ];
        for d_prime in 0..=2 {
            let jeff = Prior::Exponents(jeffreys_exponents(&s));
            let mut ratios = Vec::new();
            for leaves in &grids {
                let tree = build_param_tree(&s, leaves).unwrap();
                let fi = fisher_information_numeric(&tree, d_prime, 1e-12).unwrap();
                let log_ratio =
                    0.5 * fi.log_det().unwrap() - log_prior_density(&jeff, &tree).unwrap();
                ratios.push(log_ratio);
            }
            let spread = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread.abs() < 1e-6, "D'={d_prime} spread={spread}");
        }
    }

    #[test]
    fn determinant_ratio_between_designs_is_parameter_free() {
        // Jeffreys is the same prior for every D': det I(D') / det I(D'-1)
        // must not depend on the parameter point.
        let s = spec(&[2, 2]);
        let grids = [
            vec![0.4, 0.7, 1.1, 0.9],
            vec![1.5, 0.2, 0.8, 2.5],
            vec![3.0, 1.0, 0.5, 0.25],
        ];
        for d_prime in 1..=2 {
            let mut diffs = Vec::new();
            for leaves in &grids {
                let tree = build_param_tree(&s, leaves).unwrap();
                let a = fisher_information_numeric(&tree, d_prime, 1e-12).unwrap();
                let b = fisher_information_numeric(&tree, d_prime - 1, 1e-12).unwrap();
                diffs.push(a.log_det().unwrap() - b.log_det().unwrap());
            }
            let spread = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - diffs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread.abs() < 1e-6, "D'={d_prime} spread={spread}");
        }
    }

    #[test]
    fn stick_breaking_shape_checks() {
        let s = spec(&[2, 4]);
        let prior = stick_breaking(&s, 2.0, &[1.5, 1.5]).unwrap();
        assert_eq!(prior.exponent(1, 1), 1.5);
        assert_eq!(prior.exponent(2, 3), 0.5);
        assert!(stick_breaking(&s, 2.0, &[1.5]).is_err());
        assert!(stick_breaking(&spec(&[2]), 2.0, &[1.0, 1.0]).is_err());
    }
}
