//! Multi-seed, multi-policy campaigns and their on-disk results.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::RangeInclusive;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Policy, ScenarioConfig};
use crate::sim::{build_scenario, run_scenario, RunOptions, RunOutput};
use crate::stats::{empirical_cdf, mean, percentile};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("empty seed range {lo}..{hi}")]
    EmptySeeds { lo: u64, hi: u64 },
    #[error("no policies selected")]
    NoPolicies,
    #[error("run {policy} seed {seed} failed: {message}")]
    RunFailed { policy: Policy, seed: u64, message: String },
    #[error("runs of {0} have unequal UE counts")]
    UnequalUeCounts(Policy),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("output directory {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub policies: Vec<Policy>,
    pub seeds: RangeInclusive<u64>,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub options: RunOptions,
}

impl CampaignSpec {
    pub fn new(policies: Vec<Policy>, seeds: RangeInclusive<u64>) -> Self {
        CampaignSpec {
            policies,
            seeds,
            jobs: 0,
            options: RunOptions::default(),
        }
    }
}

/// Aggregates for one policy setting.
#[derive(Debug, Clone)]
pub struct SettingResult {
    pub policy: Policy,
    /// Per-run mean throughput averaged over runs.
    pub mean_kbps: f64,
    /// 5th percentile of the pooled per-UE throughputs.
    pub p5_kbps: f64,
    pub cdf: Vec<(f64, f64)>,
    pub avg_sn_adds: f64,
    pub avg_sn_releases: f64,
    /// Runs sorted by seed.
    pub runs: Vec<RunOutput>,
}

impl SettingResult {
    pub fn pooled_throughputs(&self) -> Vec<f64> {
        self.runs
            .iter()
            .flat_map(|r| r.records.iter().map(|x| x.throughput_kbps))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub settings: Vec<SettingResult>,
}

impl CampaignResult {
    pub fn setting(&self, policy: Policy) -> Option<&SettingResult> {
        self.settings.iter().find(|s| s.policy == policy)
    }
}

fn aggregate(policy: Policy, mut runs: Vec<RunOutput>) -> Result<SettingResult, CampaignError> {
    runs.sort_by_key(|r| r.run_index);
    let n_ues = runs.first().map_or(0, |r| r.records.len());
    if runs.iter().any(|r| r.records.len() != n_ues) {
        return Err(CampaignError::UnequalUeCounts(policy));
    }
    let per_run_means: Vec<f64> = runs
        .iter()
        .map(|r| mean(&r.records.iter().map(|x| x.throughput_kbps).collect::<Vec<_>>()))
        .collect();
    let pooled: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.records.iter().map(|x| x.throughput_kbps))
        .collect();
    let n_runs = runs.len().max(1) as f64;
    Ok(SettingResult {
        policy,
        mean_kbps: mean(&per_run_means),
        p5_kbps: percentile(&pooled, 5.0).unwrap_or(0.0),
        cdf: empirical_cdf(&pooled),
        avg_sn_adds: runs.iter().map(|r| r.sn_adds).sum::<u64>() as f64 / n_runs,
        avg_sn_releases: runs.iter().map(|r| r.sn_releases).sum::<u64>() as f64 / n_runs,
        runs,
    })
}

/// Runs every `(policy, seed)` pair and aggregates per policy. The same seed
/// gives the same drop and channel under every policy.
pub fn run_campaign(cfg: &ScenarioConfig, spec: &CampaignSpec) -> Result<CampaignResult, CampaignError> {
    if spec.policies.is_empty() {
        return Err(CampaignError::NoPolicies);
    }
    let seeds: Vec<u64> = spec.seeds.clone().collect();
    if seeds.is_empty() {
        return Err(CampaignError::EmptySeeds {
            lo: *spec.seeds.start(),
            hi: *spec.seeds.end(),
        });
    }
    let tasks: Vec<(usize, Policy, u64)> = spec
        .policies
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| seeds.iter().map(move |&s| (i, p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    let outputs: Vec<Result<(usize, RunOutput), CampaignError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, policy, seed)| {
                let mut run_cfg = cfg.clone();
                run_cfg.mc.policy = policy;
                catch_unwind(AssertUnwindSafe(|| {
                    let scenario = build_scenario(&run_cfg, run_cfg.sim.base_seed, seed);
                    run_scenario(&run_cfg, &scenario, seed, &spec.options)
                }))
                .map(|out| (i, out))
                .map_err(|panic| CampaignError::RunFailed {
                    policy,
                    seed,
                    message: panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into()),
                })
            })
            .collect()
    });
    let mut grouped: Vec<Vec<RunOutput>> = vec![Vec::new(); spec.policies.len()];
    for o in outputs {
        let (i, out) = o?;
        grouped[i].push(out);
    }
    let settings = spec
        .policies
        .iter()
        .zip(grouped)
        .map(|(&p, runs)| aggregate(p, runs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignResult {
        config: cfg.clone(),
        seeds,
        settings,
    })
}

/// Creates `dir` and checks it accepts files, so a bad path fails before any run.
pub fn prepare_out_dir(dir: &Path) -> Result<(), CampaignError> {
    let wrap = |source| CampaignError::Output {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(wrap)?;
    fs::remove_file(&probe).map_err(wrap)?;
    Ok(())
}

pub fn summary_csv(result: &CampaignResult) -> String {
    let mut s = String::from("setting,mean_kbps,p5_kbps,avg_sn_adds,avg_sn_releases\n");
    for r in &result.settings {
        writeln!(
            s,
            "{},{:.3},{:.3},{:.3},{:.3}",
            r.policy.as_str(),
            r.mean_kbps,
            r.p5_kbps,
            r.avg_sn_adds,
            r.avg_sn_releases
        )
        .expect("string write");
    }
    s
}

pub fn cdf_csv(setting: &SettingResult) -> String {
    let mut s = String::from("throughput_kbps,cumulative_fraction\n");
    for (x, f) in &setting.cdf {
        writeln!(s, "{x:.6},{f:.6}").expect("string write");
    }
    s
}

pub fn events_csv(run: &RunOutput) -> String {
    let mut s = String::from("time_s,event,ue_id,mn_id,sn_id,cause\n");
    for e in &run.events {
        writeln!(
            s,
            "{:.6},{},{},{},{},{}",
            e.time.as_secs_f64(),
            e.kind,
            e.ue_id,
            e.mn_id,
            e.sn_id,
            e.cause
        )
        .expect("string write");
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    seeds: &'a [u64],
    settings: Vec<&'static str>,
    config: &'a ScenarioConfig,
}

pub fn manifest_json(result: &CampaignResult) -> String {
    let m = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seeds: &result.seeds,
        settings: result.settings.iter().map(|s| s.policy.as_str()).collect(),
        config: &result.config,
    };
    serde_json::to_string_pretty(&m).expect("manifest serializes")
}

/// Writes summary, CDFs, per-run event logs and the manifest; returns the paths written.
pub fn emit_results(result: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    prepare_out_dir(dir)?;
    let mut written = vec![];
    let mut put = |name: String, body: String| -> Result<(), CampaignError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| CampaignError::Output {
            path: path.clone(),
            source,
        })?;
        written.push(path);
        Ok(())
    };
    put("summary.csv".into(), summary_csv(result))?;
    for s in &result.settings {
        put(format!("cdf_{}.csv", s.policy.short()), cdf_csv(s))?;
        for r in &s.runs {
            put(
                format!("events_{}_{}.csv", s.policy.short(), r.run_index),
                events_csv(r),
            )?;
        }
    }
    put("manifest.json".into(), manifest_json(result))?;
    Ok(written)
}
