//! SN data requests and the MN's forwarding decision for one CBR flow.
//!
//!     cargo run --example traffic_split -- 0.7 6.0

use satmc::config::ms;
use satmc::split::{compute_request_amount, DataRequest, ForwardDecision, RequestInputs, SplitLedger};
use satmc::{NodeId, ScenarioConfig, SimTime, UeId};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let primary_load: f64 = args.next().as_deref().unwrap_or("0.7").parse()?;
    let sinr_db: f64 = args.next().as_deref().unwrap_or("6.0").parse()?;
    let cfg = ScenarioConfig::default();
    let window = ms(cfg.split.delta_t_ms + cfg.split.t_off_ms);

    println!("n_s  request_bits (L_pr={primary_load}, SINR={sinr_db} dB)");
    for n in [1, 2, 4, 8] {
        let d = compute_request_amount(&RequestInputs {
            alpha: cfg.split.alpha,
            primary_load,
            n_secondaries: n,
            bandwidth_hz: cfg.ntn.bandwidth_hz,
            sinr_db,
            window,
        })?;
        println!("{n:>3}  {d:>12.0}");
    }

    // one UE sharing the SN with three others, for 200 ms
    let ue = UeId(0);
    let amount = compute_request_amount(&RequestInputs {
        alpha: cfg.split.alpha,
        primary_load,
        n_secondaries: 4,
        bandwidth_hz: cfg.ntn.bandwidth_hz,
        sinr_db,
        window,
    })? as u64;
    let pdu_bits = cfg.traffic.packet_bytes as u64 * 8;
    let interval = SimTime::from_secs_f64(pdu_bits as f64 / cfg.traffic.cbr_rate_bps);
    let period = ms(cfg.split.delta_t_ms);

    let mut ledger = SplitLedger::default();
    let (mut to_sn, mut local) = (0, 0);
    let mut next_req = SimTime::ZERO;
    let mut t = SimTime::ZERO;
    while t < ms(200.0) {
        if t >= next_req {
            ledger.install(DataRequest {
                sn_node: NodeId(9),
                ue_id: ue,
                amount_bits: amount,
                issued_at: next_req,
                valid_for: window,
            });
            next_req += period;
        }
        match ledger.mn_forwarding_decision(ue, pdu_bits, t) {
            ForwardDecision::ForwardToSn(_) => to_sn += 1,
            ForwardDecision::SendLocal => local += 1,
        }
        t += interval;
    }
    println!("\ngrant {amount} bits every {period}: {to_sn} PDUs via SN, {local} kept at the MN");
    Ok(())
}
