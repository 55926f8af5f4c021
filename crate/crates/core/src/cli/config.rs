//! JSON experiment configurations. Every file carries `"schema": 1` and
//! unknown keys are rejected.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::EstimatorRule;
use crate::hierarchy::{build_param_tree, HierarchySpec, ParamTree};
use crate::priors::{self, BetaPrior, Prior, PriorExponents};

pub const SCHEMA_VERSION: u32 = 1;

pub fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema version {schema}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// The default total-rate grid.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
}

/// `{"branching":[n1,...,nD], "leaf_rates":[...]}`
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub branching: Vec<usize>,
    pub leaf_rates: Vec<f64>,
}

impl TreeConfig {
    pub fn build(&self) -> Result<ParamTree> {
        let spec = HierarchySpec::new(self.branching.clone())?;
        build_param_tree(&spec, &self.leaf_rates)
    }
}

/// Prior families addressable from configs.
#[derive(Debug, Clone)]
pub enum PriorSpec {
    Jeffreys,
    AFamily { d0: usize, d_prime: usize },
    Stick { alpha: f64, a: Vec<f64> },
    Beta { beta: f64 },
    FlatLambda,
    FlatThetaLambda,
}

/// Flat wire form: `{"family": ..., "alpha": ..., "a": [...], "beta": ...,
/// "D0": ..., "Dprime": ...}` with unknown keys rejected and per-family
/// field validation. (An internally tagged enum would silently accept
/// unknown keys.)
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriorSpec {
    family: String,
    alpha: Option<f64>,
    a: Option<Vec<f64>>,
    beta: Option<f64>,
    #[serde(rename = "D0")]
    d0: Option<usize>,
    #[serde(rename = "Dprime")]
    d_prime: Option<usize>,
}

impl<'de> Deserialize<'de> for PriorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = RawPriorSpec::deserialize(deserializer)?;
        let expect_none = |ok: bool, family: &str| {
            if ok {
                Ok(())
            } else {
                Err(D::Error::custom(format!(
                    "unexpected field for family {family:?}"
                )))
            }
        };
        match raw.family.as_str() {
            "jeffreys" | "flat_lambda" | "flat_theta_Lambda" => {
                expect_none(
                    raw.alpha.is_none()
                        && raw.a.is_none()
                        && raw.beta.is_none()
                        && raw.d0.is_none()
                        && raw.d_prime.is_none(),
                    &raw.family,
                )?;
                Ok(match raw.family.as_str() {
                    "jeffreys" => Self::Jeffreys,
                    "flat_lambda" => Self::FlatLambda,
                    _ => Self::FlatThetaLambda,
                })
            }
            "a_family" => {
                expect_none(
                    raw.alpha.is_none() && raw.a.is_none() && raw.beta.is_none(),
                    "a_family",
                )?;
                Ok(Self::AFamily {
                    d0: raw.d0.ok_or_else(|| D::Error::missing_field("D0"))?,
                    d_prime: raw
                        .d_prime
                        .ok_or_else(|| D::Error::missing_field("Dprime"))?,
                })
            }
            "stick" => {
                expect_none(
                    raw.beta.is_none() && raw.d0.is_none() && raw.d_prime.is_none(),
                    "stick",
                )?;
                Ok(Self::Stick {
                    alpha: raw.alpha.ok_or_else(|| D::Error::missing_field("alpha"))?,
                    a: raw.a.ok_or_else(|| D::Error::missing_field("a"))?,
                })
            }
            "beta" => {
                expect_none(
                    raw.alpha.is_none()
                        && raw.a.is_none()
                        && raw.d0.is_none()
                        && raw.d_prime.is_none(),
                    "beta",
                )?;
                Ok(Self::Beta {
                    beta: raw.beta.ok_or_else(|| D::Error::missing_field("beta"))?,
                })
            }
            other => Err(D::Error::custom(format!("unknown prior family {other:?}"))),
        }
    }
}

impl PriorSpec {
    pub fn resolve(&self, spec: &HierarchySpec) -> Result<Prior> {
        Ok(match self {
            Self::Jeffreys => Prior::Exponents(priors::jeffreys_exponents(spec)),
            Self::AFamily { d0, d_prime } => {
                Prior::Exponents(priors::build_a_family(spec, *d0, *d_prime)?)
            }
            Self::Stick { alpha, a } => Prior::Exponents(priors::stick_breaking(spec, *alpha, a)?),
            Self::Beta { beta } => Prior::Beta(BetaPrior::new(*beta)?),
            Self::FlatLambda => Prior::Exponents(priors::flat_on_rates(spec)),
            Self::FlatThetaLambda => Prior::Exponents(priors::flat_on_ratios(spec)),
        })
    }

    pub fn resolve_exponents(&self, spec: &HierarchySpec) -> Result<PriorExponents> {
        match self.resolve(spec)? {
            Prior::Exponents(e) => Ok(e),
            Prior::Beta(_) => Err(Error::Config(
                "this experiment needs an exponent-family prior, not the beta family".into(),
            )),
        }
    }
}

fn default_reps() -> u64 {
    1_000_000
}

fn default_tol() -> f64 {
    1e-10
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < 1_000 {
        return Err(Error::Config(format!(
            "Monte Carlo experiments need reps >= 1000, got {reps}"
        )));
    }
    Ok(())
}

/// `dominance`: exact risk differences plus paired-MC confirmation for the
/// basic model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominanceConfig {
    pub schema: u32,
    pub m: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// `minimax`: exact risk curves and the Bayes-risk trend table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxConfig {
    pub schema: u32,
    pub m: usize,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_beta_grid")]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_beta_grid() -> Vec<f64> {
    vec![1.0, 0.1, 0.01]
}

/// `multi_dominance`: paired MC for the multi-set model on balanced groups.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiDominanceConfig {
    pub schema: u32,
    pub m: usize,
    /// leaves per group (balanced)
    pub n: usize,
    /// uniform per-leaf rates, one MC run per value
    pub leaf_rate_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
}

/// `entropy_dominance`: stick-breaking vs Jeffreys under entropy loss.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyDominanceConfig {
    pub schema: u32,
    pub m: usize,
    /// leaves per group (balanced)
    pub n: usize,
    pub alpha: f64,
    pub a: Vec<f64>,
    pub with_z: bool,
    pub leaf_rate_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
}

/// `hierarchy`: design-chain and prior-chain dominance for the general model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub schema: u32,
    pub branching: Vec<usize>,
    pub leaf_rates: Vec<f64>,
    #[serde(rename = "D0")]
    pub d0: usize,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
}

/// `blyth`: the admissibility diagnostic over a grid of k.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlythConfig {
    pub schema: u32,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<u32>,
    #[serde(default = "default_m2")]
    pub m: usize,
    #[serde(default = "default_w_max")]
    pub w_max: u64,
    /// tolerance for the rigorous tail bound (decays like 1/log(w_max))
    #[serde(default = "default_blyth_tol")]
    pub tol: f64,
}

fn default_k_grid() -> Vec<u32> {
    vec![1, 10, 100]
}

fn default_m2() -> usize {
    2
}

fn default_w_max() -> u64 {
    20_000
}

fn default_blyth_tol() -> f64 {
    0.3
}

/// `hudson`: the identity suite over a grid of rates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HudsonConfig {
    pub schema: u32,
    #[serde(default = "default_hudson_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_hudson_tol")]
    pub tol: f64,
}

fn default_hudson_lambdas() -> Vec<f64> {
    vec![0.2, 0.7, 1.7, 3.0, 8.5, 20.0]
}

fn default_hudson_tol() -> f64 {
    1e-10
}

/// `predictive_check`: both sides of the predictive-density identity for a
/// single-rate instance, on two interpolation paths.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictiveConfig {
    pub schema: u32,
    pub leaf_rate: f64,
    /// training exposures (root, leaf)
    #[serde(default = "default_unit_pair")]
    pub r: [f64; 2],
    /// prediction exposures (root, leaf)
    #[serde(default = "default_unit_pair")]
    pub s: [f64; 2],
    #[serde(default = "default_tau_grid")]
    pub tau_grid_size: usize,
    #[serde(default = "default_predictive_tol")]
    pub tol: f64,
}

fn default_unit_pair() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_tau_grid() -> usize {
    64
}

fn default_predictive_tol() -> f64 {
    1e-6
}

impl DominanceConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        check_reps(self.reps)?;
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid must be nonempty".into()));
        }
        Ok(())
    }
}

impl MinimaxConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if self.lambda_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(Error::Config("grids must be nonempty".into()));
        }
        Ok(())
    }
}

impl MultiDominanceConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        check_reps(self.reps)?;
        if self.leaf_rate_grid.is_empty() {
            return Err(Error::Config("leaf rate grid must be nonempty".into()));
        }
        Ok(())
    }
}

impl EntropyDominanceConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        check_reps(self.reps)?;
        if self.a.len() != self.m {
            return Err(Error::Config(format!(
                "expected {} group exponents, got {}",
                self.m,
                self.a.len()
            )));
        }
        if self.leaf_rate_grid.is_empty() {
            return Err(Error::Config("leaf rate grid must be nonempty".into()));
        }
        Ok(())
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        check_reps(self.reps)?;
        Ok(())
    }
}

impl BlythConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if self.k_grid.is_empty() {
            return Err(Error::Config("k grid must be nonempty".into()));
        }
        Ok(())
    }
}

impl HudsonConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if self.lambdas.is_empty() {
            return Err(Error::Config("lambda grid must be nonempty".into()));
        }
        Ok(())
    }
}

impl PredictiveConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if !(self.leaf_rate > 0.0) {
            return Err(Error::Config("leaf rate must be positive".into()));
        }
        Ok(())
    }
}

/// Rule specification straight from config JSON.
pub fn parse_rule(value: &serde_json::Value) -> Result<EstimatorRule> {
    Ok(serde_json::from_value(value.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_spec_json_families() {
        let spec = HierarchySpec::new(vec![2, 3]).unwrap();
        let jeffreys: PriorSpec = serde_json::from_str(r#"{"family":"jeffreys"}"#).unwrap();
        match jeffreys.resolve(&spec).unwrap() {
            Prior::Exponents(e) => assert_eq!(e.root(), 3.0),
            _ => panic!("expected exponents"),
        }

        let a_family: PriorSpec =
            serde_json::from_str(r#"{"family":"a_family","D0":2,"Dprime":0}"#).unwrap();
        match a_family.resolve(&spec).unwrap() {
            Prior::Exponents(e) => assert_eq!(e.root(), 0.5),
            _ => panic!("expected exponents"),
        }

        let stick: PriorSpec =
            serde_json::from_str(r#"{"family":"stick","alpha":2.0,"a":[1.0,1.5]}"#).unwrap();
        assert!(stick.resolve(&spec).is_ok());

        let beta: PriorSpec = serde_json::from_str(r#"{"family":"beta","beta":0.5}"#).unwrap();
        assert!(matches!(beta.resolve(&spec).unwrap(), Prior::Beta(_)));

        let flat: PriorSpec = serde_json::from_str(r#"{"family":"flat_theta_Lambda"}"#).unwrap();
        match flat.resolve(&spec).unwrap() {
            Prior::Exponents(e) => assert_eq!(e.root(), 1.0),
            _ => panic!("expected exponents"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<DominanceConfig>(r#"{"schema":1,"m":2,"bogus":true}"#);
        assert!(err.is_err());

        let err = serde_json::from_str::<PriorSpec>(r#"{"family":"jeffreys","extra":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn schema_version_is_enforced() {
        let cfg: DominanceConfig = serde_json::from_str(r#"{"schema":2,"m":2}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: DominanceConfig = serde_json::from_str(r#"{"schema":1,"m":2}"#).unwrap();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn tree_config_round_trip() {
        let cfg: TreeConfig =
            serde_json::from_str(r#"{"branching":[2,2],"leaf_rates":[1,2,3,4]}"#).unwrap();
        let tree = cfg.build().unwrap();
        assert_eq!(tree.lambda_total(), 10.0);
    }
}
