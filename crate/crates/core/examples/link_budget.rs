//! Per-UE TN and NTN link quality for one drop, and where it lands in the
//! MCS table.
//!
//!     cargo run --example link_budget -- 3

use satmc::channel::{noise_per_re_dbm, ntn_eirp_per_re_dbm, tn_tx_per_re_dbm};
use satmc::sim::build_scenario;
use satmc::stats::percentile;
use satmc::{ScenarioConfig, SimTime};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).as_deref().unwrap_or("1").parse()?;
    let cfg = ScenarioConfig::resolve(None, std::env::vars())?;
    let sc = build_scenario(&cfg, cfg.sim.base_seed, seed);
    let ch = &sc.channel;

    println!(
        "noise per RE        {:>8.2} dBm",
        noise_per_re_dbm(cfg.ue.noise_figure_db)
    );
    println!("TN power per RE     {:>8.2} dBm", tn_tx_per_re_dbm(&cfg.tn));
    println!("NTN EIRP per RE     {:>8.2} dBm", ntn_eirp_per_re_dbm(&cfg.ntn));
    println!("co-channel WA beams {:>8}", ch.wa_cochannel_count());

    let mut tn_sinr = vec![];
    let mut ntn_rsrp = vec![];
    let mut ntn_sinr = vec![];
    let mut eligible = 0;
    for (i, ue) in sc.ues.iter().enumerate() {
        let serving = (0..sc.layout.sectors.len())
            .max_by(|&a, &b| ch.tn_rsrp_dbm(i, a).total_cmp(&ch.tn_rsrp_dbm(i, b)))
            .unwrap_or(ue.sector);
        tn_sinr.push(ch.tn_sinr_db(i, serving));
        if let Some(s) = ch.ntn_sample(i, SimTime::ZERO) {
            ntn_rsrp.push(s.rsrp_dbm);
            ntn_sinr.push(s.sinr_db);
            if s.rsrp_dbm >= cfg.mc.rsrp_th_dbm {
                eligible += 1;
            }
        }
    }

    println!("\n{:<14} {:>8} {:>8} {:>8} {:>8}", "", "p5", "median", "p95", "MCS@med");
    for (name, v) in [
        ("TN SINR dB", &tn_sinr),
        ("NTN SINR dB", &ntn_sinr),
        ("NTN RSRP dBm", &ntn_rsrp),
    ] {
        let p = |q| percentile(v, q).unwrap_or(f64::NAN);
        let mcs = if name.contains("SINR") {
            ch.mcs.sinr_to_mcs(p(50.0)).value().to_string()
        } else {
            "-".into()
        };
        println!("{name:<14} {:>8.2} {:>8.2} {:>8.2} {mcs:>8}", p(5.0), p(50.0), p(95.0));
    }
    println!(
        "\n{eligible} of {} UEs meet the {} dBm NTN RSRP threshold",
        sc.ues.len(),
        cfg.mc.rsrp_th_dbm
    );
    Ok(())
}
