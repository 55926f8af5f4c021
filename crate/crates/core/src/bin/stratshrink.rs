//! Command-line front end: JSON-configured experiment runners that check
//! each dominance/minimaxity/admissibility claim at desk scale and emit CSV
//! tables and SVG plots.
//!
//! Exit status: 0 when every theorem-claim check passed, 1 when some claim
//! failed, 2 on configuration or hypothesis-gate errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratshrink::cli::config::*;
use stratshrink::cli::runners::*;
use stratshrink::cli::ExperimentReport;
use stratshrink::error::Result;

#[derive(Parser)]
#[command(
    name = "stratshrink",
    version,
    about = "Shrinkage estimation experiments for stratified Poisson counts"
)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the seed in the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV table and SVG plot
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Run even when the theorem's hypothesis checks fail (marked in output)
    #[arg(long)]
    override_conditions: bool,
}

#[derive(Subcommand)]
enum Experiment {
    /// Exact risk-difference signs plus paired-MC confirmation (basic model)
    Dominance(Common),
    /// Exact risk curves and the Bayes-risk trend table
    Minimax(Common),
    /// Paired MC for the multi-set model
    #[command(name = "multi_dominance")]
    MultiDominance(Common),
    /// Stick-breaking vs Jeffreys under entropy loss
    #[command(name = "entropy_dominance")]
    EntropyDominance(Common),
    /// Design-chain and prior-chain dominance for the general hierarchy
    Hierarchy(Common),
    /// Blyth admissibility diagnostic
    Blyth(Common),
    /// Hudson identity suite
    Hudson(Common),
    /// Predictive-density identity check
    #[command(name = "predictive_check")]
    PredictiveCheck(Common),
}

impl Experiment {
    fn common(&self) -> &Common {
        match self {
            Self::Dominance(c)
            | Self::Minimax(c)
            | Self::MultiDominance(c)
            | Self::EntropyDominance(c)
            | Self::Hierarchy(c)
            | Self::Blyth(c)
            | Self::Hudson(c)
            | Self::PredictiveCheck(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Dominance(_) => "dominance",
            Self::Minimax(_) => "minimax",
            Self::MultiDominance(_) => "multi_dominance",
            Self::EntropyDominance(_) => "entropy_dominance",
            Self::Hierarchy(_) => "hierarchy",
            Self::Blyth(_) => "blyth",
            Self::Hudson(_) => "hudson",
            Self::PredictiveCheck(_) => "predictive_check",
        }
    }
}

fn load_config<T: serde::de::DeserializeOwned>(common: &Common) -> Result<T> {
    let text = std::fs::read_to_string(&common.config)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(experiment: &Experiment) -> Result<ExperimentReport> {
    let common = experiment.common();
    match experiment {
        Experiment::Dominance(_) => {
            let mut cfg: DominanceConfig = load_config(common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            run_dominance(&cfg)
        }
        Experiment::Minimax(_) => {
            let cfg: MinimaxConfig = load_config(common)?;
            run_minimax(&cfg)
        }
        Experiment::MultiDominance(_) => {
            let mut cfg: MultiDominanceConfig = load_config(common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            run_multi_dominance(&cfg, common.override_conditions)
        }
        Experiment::EntropyDominance(_) => {
            let mut cfg: EntropyDominanceConfig = load_config(common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            run_entropy_dominance(&cfg, common.override_conditions)
        }
        Experiment::Hierarchy(_) => {
            let mut cfg: HierarchyConfig = load_config(common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            run_hierarchy(&cfg, common.override_conditions)
        }
        Experiment::Blyth(_) => {
            let cfg: BlythConfig = load_config(common)?;
            run_blyth(&cfg)
        }
        Experiment::Hudson(_) => {
            let cfg: HudsonConfig = load_config(common)?;
            run_hudson(&cfg)
        }
        Experiment::PredictiveCheck(_) => {
            let cfg: PredictiveConfig = load_config(common)?;
            run_predictive_check(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.experiment.common();
    let name = cli.experiment.name();

    let report = match run(&cli.experiment) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };

    if let Err(err) = std::fs::create_dir_all(&common.out) {
        eprintln!("error: cannot create output directory: {err}");
        return ExitCode::from(2);
    }
    let csv_path = common.out.join(format!("{name}.csv"));
    let svg_path = common.out.join(format!("{name}.svg"));
    if let Err(err) =
        std::fs::write(&csv_path, &report.csv).and_then(|_| std::fs::write(&svg_path, &report.svg))
    {
        eprintln!("error: cannot write outputs: {err}");
        return ExitCode::from(2);
    }

    for warning in &report.warnings {
        println!("WARNING: {warning}");
    }
    for cond in &report.conditions {
        println!(
            "CONDITION {}: {} ({})",
            cond.name,
            if cond.satisfied {
                "satisfied"
            } else {
                "VIOLATED"
            },
            cond.detail
        );
    }
    for claim in &report.claims {
        println!(
            "CLAIM {}{}: {}{}",
            claim.name,
            if claim.gating { "" } else { " [informational]" },
            if claim.passed { "PASS" } else { "FAIL" },
            if claim.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", claim.detail)
            }
        );
    }
    println!("wrote {} and {}", csv_path.display(), svg_path.display());

    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
