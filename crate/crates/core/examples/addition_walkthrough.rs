//! The MCS-based addition logic on a hand-built cell: which UEs the MN asks
//! for, and how the satellite answers as it fills up.
//!
//!     cargo run --example addition_walkthrough

use satmc::channel::{McsIndex, RsrpMeasurement};
use satmc::config::{ms, Policy};
use satmc::mc::{AdmissionDecision, CandidateState, CandidateView, McTimers, RequesterState, UeView};
use satmc::{NodeId, ScenarioConfig, SimTime, UeId};

const SAT: NodeId = NodeId(9);

fn main() {
    let mut cfg = ScenarioConfig::default().mc;
    cfg.policy = Policy::McsBased;
    let timers = McTimers::from_config(&cfg);

    // (ue, MN MCS, satellite RSRP)
    let cell = [
        (1, 18, -104.0),
        (2, 4, -109.5),
        (3, 9, -113.0),
        (4, 2, -108.0),
        (5, 15, -110.0),
    ];
    let ues: Vec<UeView> = cell
        .iter()
        .map(|&(u, m, _)| UeView {
            ue: UeId(u),
            mcs: McsIndex::new(m).unwrap(),
            occupancy: 1.0,
        })
        .collect();

    let mut mn = RequesterState::new(NodeId(0), ues.iter().map(|v| v.ue), SimTime::ZERO);
    let mut sat = CandidateState::default();
    let mut secondaries: Vec<(UeId, McsIndex)> = vec![(UeId(40), McsIndex::new(22).unwrap())];
    let mut load = 1.0;

    for step in 0..6u64 {
        let t = ms(10.0 + 60.0 * step as f64);
        for &(u, _, rsrp) in &cell {
            mn.on_measurement_report(RsrpMeasurement {
                ue_id: UeId(u),
                cell_id: SAT,
                rsrp_dbm: rsrp,
                time: t,
            });
        }
        let single: Vec<UeView> = ues
            .iter()
            .copied()
            .filter(|v| !secondaries.iter().any(|s| s.0 == v.ue))
            .collect();
        let reqs = mn.evaluate(&single, t, &cfg, &timers);
        if reqs.is_empty() {
            println!(
                "t={t}: no request (request period or nobody left under MCS {})",
                cfg.mcs_th
            );
        }
        for r in reqs {
            let view = CandidateView {
                load,
                secondaries: &secondaries,
                ue_already_bound: false,
            };
            let d = sat.handle_sn_addition_request(&r, t, view, &cfg, &timers);
            println!(
                "t={t}: {} (MCS {}) asks, load {load:.2} -> {d:?}",
                r.ue_id,
                r.mn_mcs.value()
            );
            match d {
                AdmissionDecision::Ack => secondaries.push((r.ue_id, r.mn_mcs)),
                AdmissionDecision::AckWithPreemption(k) => {
                    secondaries.retain(|s| s.0 != k);
                    secondaries.push((r.ue_id, r.mn_mcs));
                }
                AdmissionDecision::Reject(_) => {}
            }
        }
        // the satellite drains a little between evaluations
        load = (load - 0.02f64).max(0.9);
    }
    println!("\nsecondaries at the satellite: {secondaries:?}");
}
