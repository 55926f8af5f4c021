//! Risk-row CSV serialization. One fixed schema for every risk-flavored
//! experiment; floats printed in shortest round-trip form so identical runs
//! produce byte-identical files.

/// One row of the risk table.
#[derive(Debug, Clone, Default)]
pub struct RiskRow {
    pub model: String,
    pub rule_a: String,
    pub rule_b: String,
    pub loss: String,
    pub m: Option<usize>,
    pub branching: String,
    pub lambda: Option<f64>,
    pub theta_desc: String,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub exact: Option<f64>,
    pub trunc_bound: Option<f64>,
}

pub const RISK_HEADER: &str =
    "model,rule_a,rule_b,loss,m,branching,Lambda,theta_desc,mean,stderr,reps,seed,exact,trunc_bound";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl RiskRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.rule_a,
            self.rule_b,
            self.loss,
            opt(&self.m),
            self.branching,
            opt(&self.lambda),
            self.theta_desc,
            opt(&self.mean),
            opt(&self.stderr),
            opt(&self.reps),
            opt(&self.seed),
            opt(&self.exact),
            opt(&self.trunc_bound),
        )
    }
}

/// Assembles a full CSV document from a header line and rows.
pub fn table(header: &str, lines: &[String]) -> String {
    let mut out = String::with_capacity(lines.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out
}
