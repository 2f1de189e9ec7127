//! One run of one policy with a per-UE breakdown.
//!
//!     cargo run --release --example single_run -- mcs 1
//!
//! `SIM_*` environment variables override config keys as for the CLI.

use satmc::config::{Policy, ScenarioConfig};
use satmc::sim::{build_scenario, run_scenario, RunOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let policy: Policy = args
        .next()
        .as_deref()
        .unwrap_or("mcs")
        .parse()
        .map_err(anyhow::Error::msg)?;
    let seed: u64 = args.next().as_deref().unwrap_or("1").parse()?;

    let mut cfg = ScenarioConfig::resolve(None, std::env::vars())?;
    cfg.mc.policy = policy;
    let scenario = build_scenario(&cfg, cfg.sim.base_seed, seed);
    let out = run_scenario(&cfg, &scenario, seed, &RunOptions::default());

    let d = &out.diagnostics;
    println!("policy {policy}, seed {seed}");
    println!(
        "TN: mean SINR {:.2} dB, mean MCS {:.2}, mean load {:.3}",
        d.mean_tn_sinr_db, d.mean_tn_mcs, d.mean_tn_load
    );
    println!(
        "NTN: mean RSRP {:.2} dBm, mean SINR {:.2} dB, mean MCS {:.2}, mean load {:.3}",
        d.mean_ntn_rsrp_dbm, d.mean_ntn_sinr_db, d.mean_ntn_mcs, d.mean_ntn_load
    );
    println!(
        "SN adds {}, releases {}, rejects {}; eligible UEs {}, ever added {}",
        out.sn_adds,
        out.sn_releases,
        out.sn_rejects,
        out.ntn_eligible.len(),
        out.ever_added.len()
    );
    println!("skipped PDCP SNs {}, bytes {:?}", d.skipped_sns, out.bytes);

    let mut info = out.ue_info.clone();
    info.sort_by(|a, b| a.throughput_kbps.total_cmp(&b.throughput_kbps));
    println!("\n  ue  mn mcs tn_sinr  sn_time  via_sn_kB  kbps");
    for u in &info {
        println!(
            "{:>4} {:>3} {:>3} {:>7.2} {:>8.2} {:>10.1} {:>7.1}",
            u.ue_id.0,
            u.mn_id.0,
            u.mn_mcs.value(),
            u.tn_sinr_db,
            u.secondary_time_s,
            u.via_sn_bytes as f64 / 1e3,
            u.throughput_kbps
        );
    }
    let mean = info.iter().map(|u| u.throughput_kbps).sum::<f64>() / info.len() as f64;
    println!("\nmean {mean:.1} kbps");
    Ok(())
}
