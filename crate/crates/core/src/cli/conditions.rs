//! Hypothesis prechecks for the dominance theorems, evaluated in exact
//! rational arithmetic (every f64 input is a dyadic rational, so the
//! inequalities are decided without rounding).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::FromPrimitive;

use crate::error::{Error, Result};

/// One hypothesis with its outcome.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: String,
    pub satisfied: bool,
    pub detail: String,
}

/// Outcome of all hypothesis checks for one experiment.
#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub items: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_satisfied(&self) -> bool {
        self.items.iter().all(|c| c.satisfied)
    }

    fn push(&mut self, name: impl Into<String>, satisfied: bool, detail: impl Into<String>) {
        self.items.push(ConditionCheck {
            name: name.into(),
            satisfied,
            detail: detail.into(),
        });
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact(x: f64) -> Result<BigRational> {
    BigRational::from_f64(x)
        .ok_or_else(|| Error::Domain(format!("cannot represent {x} as an exact rational")))
}

/// Multi-set dominance hypotheses: `m >= 2`, `min n_i >= 4`, and the
/// per-group inequality
/// `(m-1)^2/(2m) + (m-1)/m^2 + (2 n_i - 3)/m <= (n_i - 1)(n_i - 3)/2`.
pub fn multi_dominance_conditions(m: usize, group_sizes: &[usize]) -> ConditionReport {
    let mut report = ConditionReport::default();
    report.push("m >= 2", m >= 2, format!("m = {m}"));
    let min_n = group_sizes.iter().copied().min().unwrap_or(0);
    report.push("min n_i >= 4", min_n >= 4, format!("min n_i = {min_n}"));
    let mi = m as i64;
    for (i, &n) in group_sizes.iter().enumerate() {
        let ni = n as i64;
        let lhs =
            ratio((mi - 1) * (mi - 1), 2 * mi) + ratio(mi - 1, mi * mi) + ratio(2 * ni - 3, mi);
        let rhs = ratio((ni - 1) * (ni - 3), 2);
        report.push(
            format!("group {} shrinkage inequality", i + 1),
            lhs <= rhs,
            format!("lhs = {lhs}, rhs = {rhs}"),
        );
    }
    report
}

/// Stick-breaking dominance without the top count: `n_i/2 >= a_i >= 1`,
/// `a. >= alpha >= 1`, `alpha < n./2`.
pub fn entropy_no_z_conditions(
    group_sizes: &[usize],
    a: &[f64],
    alpha: f64,
) -> Result<ConditionReport> {
    let mut report = ConditionReport::default();
    let alpha_q = exact(alpha)?;
    let mut a_dot = BigRational::from_integer(BigInt::from(0));
    for (i, (&n, &ai)) in group_sizes.iter().zip(a).enumerate() {
        let ai_q = exact(ai)?;
        let half_n = ratio(n as i64, 2);
        report.push(
            format!("n_{0}/2 >= a_{0} >= 1", i + 1),
            ai_q <= half_n && ai_q >= ratio(1, 1),
            format!("a_{} = {ai}", i + 1),
        );
        a_dot += ai_q;
    }
    let n_dot: i64 = group_sizes.iter().map(|&n| n as i64).sum();
    report.push(
        "a. >= alpha >= 1",
        a_dot >= alpha_q && alpha_q >= ratio(1, 1),
        format!("a. = {a_dot}, alpha = {alpha}"),
    );
    report.push(
        "alpha < n./2",
        alpha_q < ratio(n_dot, 2),
        format!("n./2 = {}", ratio(n_dot, 2)),
    );
    Ok(report)
}

/// Stick-breaking dominance with the top count (balanced groups):
/// `n_1 = ... = n_m > 2`, `1 < alpha < n./2`, `(m+1)/m <= a_i < n_1/2`,
/// plus the two weighted inequalities.
pub fn entropy_with_z_conditions(
    group_sizes: &[usize],
    a: &[f64],
    alpha: f64,
) -> Result<ConditionReport> {
    let mut report = ConditionReport::default();
    let m = group_sizes.len() as i64;
    let balanced_n = group_sizes.windows(2).all(|w| w[0] == w[1]);
    let balanced_a = a.windows(2).all(|w| w[0] == w[1]);
    let n1 = group_sizes[0] as i64;
    report.push(
        "n_1 = ... = n_m > 2",
        balanced_n && n1 > 2,
        format!("group sizes {group_sizes:?}"),
    );
    report.push("a_1 = ... = a_m", balanced_a, format!("a = {a:?}"));

    let alpha_q = exact(alpha)?;
    let a1 = exact(a[0])?;
    let n_dot: i64 = group_sizes.iter().map(|&n| n as i64).sum();
    let half_ndot = ratio(n_dot, 2);
    report.push(
        "1 < alpha < n./2",
        alpha_q > ratio(1, 1) && alpha_q < half_ndot,
        format!("alpha = {alpha}, n./2 = {half_ndot}"),
    );
    report.push(
        "(m+1)/m <= a_1 < n_1/2",
        a1 >= ratio(m + 1, m) && a1 < ratio(n1, 2),
        format!("a_1 = {}", a[0]),
    );

    let a_dot = a
        .iter()
        .try_fold(BigRational::from_integer(BigInt::from(0)), |acc, &x| {
            Ok::<_, Error>(acc + exact(x)?)
        })?;
    let gap = half_ndot.clone() - a_dot;
    let lhs1 =
        ratio(2, 3) * (half_ndot.clone() - alpha_q.clone()) * (alpha_q.clone() - ratio(1, 1));
    let rhs1 = ratio(3, 2) * ratio(m - 1, 1) * gap.clone();
    report.push(
        "(2/3)(n./2 - alpha)(alpha - 1) >= (3/2)(m-1)(n./2 - a.)",
        lhs1 >= rhs1,
        format!("lhs = {lhs1}, rhs = {rhs1}"),
    );

    let lhs2 = (half_ndot.clone() - alpha_q) * (half_ndot - ratio(1, 1)) / ratio(3, 1);
    let rhs2 = ratio(m - 1, 2) * gap;
    report.push(
        "(n./2 - alpha)(n./2 - 1)/3 >= (m-1)(n./2 - a.)/2",
        lhs2 >= rhs2,
        format!("lhs = {lhs2}, rhs = {rhs2}"),
    );
    Ok(report)
}

/// Design-chain dominance: the deepest level must split.
pub fn design_chain_conditions(branching: &[usize]) -> ConditionReport {
    let mut report = ConditionReport::default();
    let n_last = *branching.last().unwrap_or(&0);
    report.push("n_D >= 2", n_last >= 2, format!("n_D = {n_last}"));
    report
}

/// Prior-chain dominance for `a(D0)(D')`: every level down to `D0` splits,
/// the deepest retained Jeffreys exponent is at least 2, and the displayed
/// per-level inequality holds for `D' = 2..=D0`.
pub fn prior_chain_conditions(branching: &[usize], d0: usize) -> ConditionReport {
    let mut report = ConditionReport::default();
    let d_max = branching.len();
    let ok_split = (1..=d0).all(|d| branching[d - 1] >= 2);
    report.push(
        "n_D' >= 2 for D' = 1..=D0",
        ok_split,
        format!("branching = {branching:?}, D0 = {d0}"),
    );
    // a = a_{D0}^{(D0)} = (prod_{d > D0} n_d) / 2, a dyadic rational
    let prod: i64 = branching[d0..].iter().map(|&n| n as i64).product();
    let a = ratio(prod, 2);
    report.push("a_{D0}^{(D0)} >= 2", a >= ratio(2, 1), format!("a = {a}"));

    for d_prime in 2..=d0 {
        let n_dp = branching[d_prime - 1] as i64;
        let n_prev = branching[d_prime - 2] as i64;
        let denom = ratio(n_prev, 1) * a.clone() - ratio(2, 1);
        let name = format!("level inequality at D' = {d_prime}");
        if denom <= ratio(0, 1) {
            report.push(name, false, "n_{D'-1} a - 2 <= 0".to_string());
            continue;
        }
        let lhs =
            ratio((2 + d_max - d0) as i64, (d0 - 1) as i64) * (a.clone() - ratio(1, 1)) / a.clone();
        let rhs = ratio(n_dp, 1) * ratio(n_prev, 1) * a.clone() / denom;
        report.push(name, lhs >= rhs, format!("lhs = {lhs}, rhs = {rhs}"));
    }
    report
}
