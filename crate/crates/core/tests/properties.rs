use proptest::prelude::*;

use satmc::channel::{McsIndex, McsTable, RsrpMeasurement};
use satmc::config::{ms, Policy, ScenarioConfig};
use satmc::dataplane::{allocate_tti, round_robin_shares, Demand, PdcpPdu, PdcpReceiveEntity, PduPath, TxQueue};
use satmc::geometry::slant_range_from_elevation;
use satmc::mc::{
    AdmissionDecision, CandidateState, CandidateView, McTimers, RequesterState, SnAdditionRequest, UeView,
};
use satmc::split::{compute_request_amount, DataRequest, ForwardDecision, RequestInputs, SplitLedger};
use satmc::stats::{empirical_cdf, percentile};
use satmc::{NodeId, SimTime, UeId};

fn mcs(v: u8) -> McsIndex {
    McsIndex::new(v).unwrap()
}

proptest! {
    #[test]
    fn shares_fill_capacity_fairly(cap in 0u32..500, needs in prop::collection::vec(0u32..200, 0..12), start in 0usize..20) {
        let s = round_robin_shares(cap, &needs, start);
        prop_assert_eq!(s.len(), needs.len());
        let total: u32 = s.iter().sum();
        prop_assert_eq!(total, cap.min(needs.iter().sum()));
        for (g, n) in s.iter().zip(&needs) {
            prop_assert!(g <= n);
        }
        // any UE left wanting got at least as much as everyone else, give or take one
        let max = s.iter().copied().max().unwrap_or(0);
        for (g, n) in s.iter().zip(&needs) {
            if g < n {
                prop_assert!(g + 1 >= max);
            }
        }
    }

    #[test]
    fn tti_grants_stay_within_capacity(
        cap in 1u32..624,
        raw in prop::collection::vec((0u32..300, any::<bool>()), 0..10),
        start in 0usize..10,
        prio in any::<bool>(),
    ) {
        let demands: Vec<Demand> = raw
            .iter()
            .enumerate()
            .map(|(i, &(need_res, primary))| Demand { ue: UeId(i as u32), need_res, primary })
            .collect();
        let grants = allocate_tti(cap, &demands, start, prio);
        let total: u32 = grants.iter().map(|g| g.res).sum();
        prop_assert!(total <= cap);
        for g in &grants {
            let d = demands.iter().find(|d| d.ue == g.ue).unwrap();
            prop_assert!(g.res <= d.need_res);
            prop_assert_eq!(g.primary, d.primary);
        }
        if prio {
            let primary_need: u32 = demands.iter().filter(|d| d.primary).map(|d| d.need_res).sum();
            let primary_got: u32 = grants.iter().filter(|g| g.primary).map(|g| g.res).sum();
            prop_assert_eq!(primary_got, primary_need.min(cap));
        }
    }

    #[test]
    fn queue_transmits_bytes_in_order(sizes in prop::collection::vec(1u32..3000, 1..30), budgets in prop::collection::vec(0u64..5000, 1..40)) {
        let mut q = TxQueue::new(u64::MAX);
        let total: u64 = sizes.iter().map(|&b| b as u64).sum();
        for (sn, &bytes) in sizes.iter().enumerate() {
            q.push(PdcpPdu { ue: UeId(0), sn: sn as u64, bytes, created_at: SimTime::ZERO, path: PduPath::MnDirect }).unwrap();
        }
        let mut sent = 0;
        let mut done_sns = vec![];
        for b in budgets {
            let (done, used) = q.transmit(b);
            prop_assert!(used <= b);
            sent += used;
            done_sns.extend(done.iter().map(|p| p.sn));
        }
        prop_assert_eq!(sent + q.pending_bytes(), total);
        prop_assert!(done_sns.windows(2).all(|w| w[0] + 1 == w[1]));
        prop_assert!(done_sns.first().is_none_or(|&s| s == 0));
    }

    #[test]
    fn pdcp_delivers_in_order(perm in Just((0u64..40).collect::<Vec<_>>()).prop_shuffle()) {
        let mut rx = PdcpReceiveEntity::new(ms(1000.0), 100);
        let mut delivered = vec![];
        for (i, &sn) in perm.iter().enumerate() {
            let out = rx.receive(sn, 100, SimTime::from_micros(i as u64));
            delivered.extend(out.delivered.into_iter().map(|d| d.0));
        }
        prop_assert_eq!(delivered, (0u64..40).collect::<Vec<_>>());
        prop_assert_eq!(rx.buffered_pdus(), 0);
    }

    #[test]
    fn percentile_lies_between_extremes(v in prop::collection::vec(-1e6f64..1e6, 1..60), p in 0f64..=100.0, q in 0f64..=100.0) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let a = percentile(&v, p).unwrap();
        prop_assert!(a >= lo && a <= hi);
        let b = percentile(&v, q).unwrap();
        if p <= q {
            prop_assert!(a <= b + 1e-9 * hi.abs().max(1.0));
        }
    }

    #[test]
    fn cdf_is_a_step_function(v in prop::collection::vec(0f64..100.0, 1..80)) {
        let c = empirical_cdf(&v);
        prop_assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(c.last().unwrap().1, 1.0);
        for &(x, f) in &c {
            let below = v.iter().filter(|&&y| y <= x).count() as f64 / v.len() as f64;
            prop_assert!((below - f).abs() < 1e-12);
        }
    }

    #[test]
    fn slant_range_shrinks_with_elevation(e1 in 0.0f64..90.0, e2 in 0.0f64..90.0, h in 300e3f64..2000e3) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let d_lo = slant_range_from_elevation(lo.to_radians(), h);
        let d_hi = slant_range_from_elevation(hi.to_radians(), h);
        prop_assert!(d_hi <= d_lo + 1e-6);
        prop_assert!(d_hi >= h - 1e-6);
    }

    #[test]
    fn mcs_lookup_is_monotone(a in -30f64..40.0, b in -30f64..40.0) {
        let t = McsTable::from_params(&ScenarioConfig::default().mcs);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(t.sinr_to_mcs(lo) <= t.sinr_to_mcs(hi));
        let m = t.sinr_to_mcs(hi);
        if m.value() > 0 {
            prop_assert!(t.threshold_db(m) <= hi);
        }
    }

    #[test]
    fn request_amount_grows_with_sinr(s1 in -20f64..40.0, s2 in -20f64..40.0, load in 0f64..1.0, n in 1usize..30) {
        let amount = |s| compute_request_amount(&RequestInputs {
            alpha: 0.6, primary_load: load, n_secondaries: n, bandwidth_hz: 10e6, sinr_db: s, window: ms(50.0),
        }).unwrap();
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(amount(lo) >= 0.0);
        prop_assert!(amount(lo) <= amount(hi));
    }

    #[test]
    fn ledger_never_overspends(
        amounts in prop::collection::vec(0u64..200_000, 1..6),
        pdus in prop::collection::vec((1u64..20_000, 0u64..120), 0..200),
    ) {
        let ue = UeId(3);
        let mut ledger = SplitLedger::default();
        let mut pdus = pdus;
        pdus.sort_by_key(|p| p.1);
        // a fresh grant every 25 ms, valid for 50 ms
        let mut spent = vec![0u64; amounts.len()];
        let mut current: Option<usize> = None;
        for (bits, at_ms) in pdus {
            let slot = (at_ms / 25) as usize;
            if slot < amounts.len() && current != Some(slot) {
                ledger.install(DataRequest {
                    sn_node: NodeId(9), ue_id: ue, amount_bits: amounts[slot],
                    issued_at: ms(slot as f64 * 25.0), valid_for: ms(50.0),
                });
                current = Some(slot);
            }
            let t = ms(at_ms as f64);
            if let ForwardDecision::ForwardToSn(_) = ledger.mn_forwarding_decision(ue, bits, t) {
                let g = current.unwrap();
                prop_assert!(t <= ms(g as f64 * 25.0 + 50.0));
                spent[g] += bits;
            }
        }
        for (s, a) in spent.iter().zip(&amounts) {
            prop_assert!(s <= a);
        }
    }

    #[test]
    fn preemption_only_hits_higher_mcs(
        req_mcs in 0u8..28,
        load in 0.9f64..1.2,
        secondaries in prop::collection::vec(0u8..28, 0..8),
    ) {
        let mut cfg = ScenarioConfig::default().mc;
        cfg.policy = Policy::McsBased;
        let timers = McTimers::from_config(&cfg);
        let list: Vec<(UeId, McsIndex)> = secondaries.iter().enumerate().map(|(i, &m)| (UeId(100 + i as u32), mcs(m))).collect();
        let req = SnAdditionRequest { ue_id: UeId(1), requesting_node: NodeId(0), candidate: NodeId(9), mn_mcs: mcs(req_mcs), sent_at: SimTime::ZERO };
        let view = CandidateView { load, secondaries: &list, ue_already_bound: false };
        let d = CandidateState::default().handle_sn_addition_request(&req, ms(500.0), view, &cfg, &timers);
        match d {
            AdmissionDecision::AckWithPreemption(k) => {
                prop_assert!(load > cfg.l_th);
                let victim = list.iter().find(|s| s.0 == k).unwrap().1;
                prop_assert!(victim > req.mn_mcs);
                prop_assert!(list.iter().all(|s| s.1 <= victim));
            }
            AdmissionDecision::Ack => prop_assert!(load <= cfg.l_th),
            AdmissionDecision::Reject(_) => prop_assert!(list.iter().all(|s| s.1 <= req.mn_mcs) && load > cfg.l_th),
        }
    }

    #[test]
    fn mcs_requests_form_an_ascending_prefix(ue_mcs in prop::collection::vec(0u8..28, 1..15), has_cand in prop::collection::vec(any::<bool>(), 15)) {
        let mut cfg = ScenarioConfig::default().mc;
        cfg.policy = Policy::McsBased;
        let timers = McTimers::from_config(&cfg);
        let t = ms(1000.0);
        let ids: Vec<UeId> = (0..ue_mcs.len() as u32).map(UeId).collect();
        let mut r = RequesterState::new(NodeId(0), ids.clone(), SimTime::ZERO);
        for (i, id) in ids.iter().enumerate() {
            if has_cand[i] {
                r.on_measurement_report(RsrpMeasurement { ue_id: *id, cell_id: NodeId(100 + i as u32), rsrp_dbm: -100.0, time: t });
            }
        }
        let views: Vec<UeView> = ids.iter().zip(&ue_mcs).map(|(&ue, &m)| UeView { ue, mcs: mcs(m), occupancy: 0.0 }).collect();
        let out = r.evaluate_mcs_based(&views, t, &cfg, &timers);
        let got: Vec<UeId> = out.iter().map(|q| q.ue_id).collect();

        let mut order: Vec<&UeView> = views.iter().collect();
        order.sort_by_key(|v| (v.mcs, v.ue));
        let want: Vec<UeId> = order
            .iter()
            .take_while(|v| v.mcs.value() <= cfg.mcs_th)
            .filter(|v| has_cand[v.ue.0 as usize])
            .map(|v| v.ue)
            .collect();
        prop_assert_eq!(got, want);
    }
}
