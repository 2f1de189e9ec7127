use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Parser, Subcommand};

use satmc::campaign::{emit_results, prepare_out_dir, run_campaign, CampaignSpec};
use satmc::channel::table_dump_csv;
use satmc::config::{ConfigError, Policy, ScenarioConfig};

/// TN/NTN dual-connectivity simulator.
///
/// Config precedence: command-line flags, then SIM_<SECTION>_<KEY>
/// environment variables, then the config file, then built-in defaults.
#[derive(Parser)]
#[command(name = "satmc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a campaign and write CSV/JSON results.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Comma-separated: off, rsrp, bo, mcs.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        /// Inclusive seed range `a..b`.
        #[arg(long)]
        seeds: Option<SeedRange>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a config, print the effective values.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the SINR-to-MCS table and link constants as CSV.
    TableDump {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug)]
struct SeedRange(u64, u64);

impl FromStr for SeedRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or("expected `a..b`")?;
        let a = a.trim().parse().map_err(|e| format!("seed `{a}`: {e}"))?;
        let b = b.trim().parse().map_err(|e| format!("seed `{b}`: {e}"))?;
        if a > b {
            return Err(format!("empty range {a}..{b}"));
        }
        Ok(SeedRange(a, b))
    }
}

fn load(config: Option<&PathBuf>) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::resolve(config.map(|p| p.as_path()), std::env::vars())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg_path = match &cli.cmd {
        Cmd::Run { config, .. } | Cmd::Validate { config } | Cmd::TableDump { config } => config.clone(),
    };
    let cfg = match load(cfg_path.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let res = match cli.cmd {
        Cmd::Validate { .. } => {
            print!("{}", cfg.dump());
            Ok(())
        }
        Cmd::TableDump { .. } => {
            print!("{}", table_dump_csv(&cfg));
            Ok(())
        }
        Cmd::Run {
            out,
            policies,
            seeds,
            jobs,
            ..
        } => run(cfg, out, policies, seeds, jobs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(
    cfg: ScenarioConfig,
    out: PathBuf,
    policies: Option<Vec<Policy>>,
    seeds: Option<SeedRange>,
    jobs: Option<usize>,
) -> anyhow::Result<()> {
    let seeds = seeds.unwrap_or(SeedRange(1, cfg.sim.rng_runs));
    let mut spec = CampaignSpec::new(policies.unwrap_or_else(|| Policy::ALL.to_vec()), seeds.0..=seeds.1);
    spec.jobs = jobs.unwrap_or(0);
    prepare_out_dir(&out)?;
    let result = run_campaign(&cfg, &spec).context("campaign failed")?;
    for s in &result.settings {
        println!(
            "{:<10} mean={:.1} kbps p5={:.1} kbps adds={:.2} releases={:.2}",
            s.policy.as_str(),
            s.mean_kbps,
            s.p5_kbps,
            s.avg_sn_adds,
            s.avg_sn_releases
        );
    }
    emit_results(&result, &out)?;
    Ok(())
}
