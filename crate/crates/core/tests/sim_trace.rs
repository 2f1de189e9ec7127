use satmc::config::{ms, Policy, ScenarioConfig};
use satmc::mc::SnEventKind;
use satmc::sim::{build_scenario, run_scenario, RunOptions, RunOutput};
use satmc::SimTime;

fn short(policy: Policy) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.sim.sim_time_s = 2.0;
    c.sim.warmup_s = 0.5;
    c.mc.policy = policy;
    c
}

fn run(cfg: &ScenarioConfig, seed: u64, opts: &RunOptions) -> RunOutput {
    run_scenario(cfg, &build_scenario(cfg, cfg.sim.base_seed, seed), seed, opts)
}

#[test]
fn no_sn_data_outside_an_established_binding() {
    let mut cfg = short(Policy::McsBased);
    cfg.mc.xn_latency_ms = 5.0;
    cfg.mc.uu_latency_ms = 5.0;
    let handshake = ms(20.0);
    let out = run(
        &cfg,
        4,
        &RunOptions {
            audit: true,
            ..Default::default()
        },
    );
    assert!(out.sn_adds > 0);

    // first evaluation at 10 ms, request takes one Xn hop, then the handshake
    let first_add = out.events.iter().find(|e| e.kind == SnEventKind::Add).unwrap();
    assert!(first_add.time >= ms(10.0) + ms(5.0) + handshake, "{}", first_add.time);

    let audit = out.audit.unwrap();
    for f in &audit.forwards {
        let mut bound_since: Option<SimTime> = None;
        for e in out.events.iter().filter(|e| e.ue_id == f.ue_id && e.time <= f.time) {
            match e.kind {
                SnEventKind::Add => bound_since = Some(e.time),
                SnEventKind::Release => bound_since = None,
                SnEventKind::Reject => {}
            }
        }
        assert!(
            bound_since.is_some(),
            "{} forwarded at {} while unbound",
            f.ue_id,
            f.time
        );
    }
}

#[test]
fn latency_delays_the_first_addition() {
    let fast = run(&short(Policy::RsrpBased), 2, &RunOptions::default());
    let mut slow_cfg = short(Policy::RsrpBased);
    slow_cfg.mc.uu_latency_ms = 10.0;
    let slow = run(&slow_cfg, 2, &RunOptions::default());
    let first = |o: &RunOutput| {
        o.events
            .iter()
            .find(|e| e.kind == SnEventKind::Add)
            .map(|e| e.time)
            .unwrap()
    };
    assert!(first(&slow) >= first(&fast) + ms(20.0));
}

#[test]
fn same_seed_same_output() {
    let cfg = short(Policy::McsBased);
    let a = run(&cfg, 7, &RunOptions::default());
    let b = run(&cfg, 7, &RunOptions::default());
    assert_eq!(a.events, b.events);
    assert_eq!(a.records, b.records);
    assert_eq!(a.bytes, b.bytes);
    let c = run(&cfg, 8, &RunOptions::default());
    assert_ne!(a.records, c.records);
}

#[test]
fn policies_share_the_drop_and_channel() {
    let off = short(Policy::Off);
    let mcs = short(Policy::McsBased);
    let a = build_scenario(&off, off.sim.base_seed, 3);
    let b = build_scenario(&mcs, mcs.sim.base_seed, 3);
    assert_eq!(a.ues, b.ues);
    let (ra, rb) = (
        run_scenario(&off, &a, 3, &Default::default()),
        run_scenario(&mcs, &b, 3, &Default::default()),
    );
    let mn = |o: &RunOutput| o.ue_info.iter().map(|u| (u.mn_id, u.mn_mcs)).collect::<Vec<_>>();
    assert_eq!(mn(&ra), mn(&rb));
}

#[test]
fn off_policy_never_touches_the_satellite() {
    let out = run(
        &short(Policy::Off),
        1,
        &RunOptions {
            audit: true,
            ..Default::default()
        },
    );
    assert!(out.events.is_empty());
    assert_eq!(out.sn_adds + out.sn_releases + out.sn_rejects, 0);
    assert!(out.audit.unwrap().forwards.is_empty());
    assert!(out.ue_info.iter().all(|u| u.via_sn_bytes == 0));
}

#[test]
fn bo_and_rsrp_never_release() {
    for p in [Policy::BoBased, Policy::RsrpBased] {
        let out = run(&short(p), 5, &RunOptions::default());
        assert_eq!(out.sn_releases, 0, "{p}");
    }
}

#[test]
fn checkpoints_balance_with_jitter_and_latency() {
    let mut cfg = short(Policy::McsBased);
    cfg.mc.xn_latency_ms = 3.0;
    cfg.traffic.max_queue_bytes = 30_000;
    let opts = RunOptions {
        audit: false,
        checkpoint_period: Some(ms(50.0)),
        latency_jitter: Some(ms(15.0)),
    };
    let out = run(&cfg, 11, &opts);
    assert_eq!(out.checkpoints.len(), 40);
    assert!(out.checkpoints.iter().all(|c| c.bytes.imbalance() == 0));
    assert_eq!(out.order_violations, 0);
}
