//! A reduced campaign through the library API, written out like the CLI does.
//!
//!     cargo run --release --example campaign -- results-small 5

use std::path::PathBuf;

use satmc::campaign::{emit_results, run_campaign, CampaignSpec};
use satmc::{Policy, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "results-small".into()));
    let seeds: u64 = args.next().as_deref().unwrap_or("5").parse()?;

    let cfg = ScenarioConfig::resolve(None, std::env::vars())?;
    let spec = CampaignSpec::new(Policy::ALL.to_vec(), 1..=seeds);
    let res = run_campaign(&cfg, &spec)?;

    let off = res.setting(Policy::Off).map_or(f64::NAN, |s| s.mean_kbps);
    println!(
        "{:<10} {:>9} {:>8} {:>8} {:>6} {:>6}",
        "setting", "mean", "p5", "vs off", "adds", "rel"
    );
    for s in &res.settings {
        println!(
            "{:<10} {:>9.1} {:>8.1} {:>7.1}% {:>6.2} {:>6.2}",
            s.policy.as_str(),
            s.mean_kbps,
            s.p5_kbps,
            (s.mean_kbps / off - 1.0) * 100.0,
            s.avg_sn_adds,
            s.avg_sn_releases
        );
    }
    let files = emit_results(&res, &out)?;
    println!("\nwrote {} files to {}", files.len(), out.display());
    Ok(())
}
