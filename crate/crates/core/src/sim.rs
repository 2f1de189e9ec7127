//! One simulation run: scenario construction and the event handlers that
//! tie the user plane, control plane and flow control together.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::{res_per_tti, ChannelModel, McsIndex, NtnLinkSample, RsrpMeasurement};
use crate::config::{ms, Policy, ScenarioConfig};
use crate::dataplane::{
    allocate_tti, res_needed, CbrFlow, Demand, LoadTracker, PdcpPdu, PdcpReceiveEntity, PduPath, TxQueue,
};
use crate::engine::{EventQueue, RngStream, SimTime};
use crate::geometry::{build_tn_layout, drop_ues, DroppedUe, GroundPosition, TnLayout};
use crate::ids::{NodeId, UeId};
use crate::mc::{
    AdmissionDecision, BindingTable, CandidateState, CandidateView, McTimers, RequesterState, SecondaryBinding,
    SnAdditionRequest, SnEvent, SnEventKind, UeView,
};
use crate::split::{
    compute_request_amount, DataRequest, ForwardDecision, ForwardRecord, RequestInputs, SplitAudit, SplitLedger,
};
use crate::stats::UeThroughputRecord;

pub const TTI: SimTime = SimTime::from_millis(1);

/// Placed UEs plus the frozen channel state of one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: TnLayout,
    pub ues: Vec<DroppedUe>,
    pub channel: ChannelModel,
}

pub fn build_scenario(cfg: &ScenarioConfig, campaign_seed: u64, run_index: u64) -> Scenario {
    let origin = GroundPosition::new(cfg.layout.center_lat, cfg.layout.center_lon);
    let layout = build_tn_layout(cfg.layout.isd_m, cfg.layout.n_sites, origin);
    let mut drop_rng = RngStream::new(campaign_seed, run_index, "ue-drop");
    let ues = drop_ues(
        &layout,
        cfg.layout.ues_per_sector,
        cfg.layout.min_ue_distance_m,
        &mut drop_rng,
    );
    let positions: Vec<_> = ues.iter().map(|u| u.position).collect();
    let mut los = RngStream::new(campaign_seed, run_index, "los");
    let mut shadow = RngStream::new(campaign_seed, run_index, "shadowing");
    let channel = ChannelModel::new(cfg, &layout, &positions, &mut los, &mut shadow);
    Scenario { layout, ues, channel }
}

/// Optional instrumentation for tests and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep the raw grant/forward record.
    pub audit: bool,
    /// Check byte conservation at this period.
    pub checkpoint_period: Option<SimTime>,
    /// Extra per-transport-block air delay, uniform on [0, max).
    pub latency_jitter: Option<SimTime>,
}

/// Byte accounting across the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ByteCounters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_mn: u64,
    pub dropped_sn: u64,
    pub discarded_late: u64,
    pub discarded_stale: u64,
    pub queued: u64,
    pub in_flight: u64,
    pub reorder_buffered: u64,
}

impl ByteCounters {
    /// `generated` minus every place a byte can be; zero when nothing leaked.
    pub fn imbalance(&self) -> i128 {
        self.generated as i128
            - (self.delivered
                + self.dropped_mn
                + self.dropped_sn
                + self.discarded_late
                + self.discarded_stale
                + self.queued
                + self.in_flight
                + self.reorder_buffered) as i128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub time: SimTime,
    pub bytes: ByteCounters,
}

/// Per-UE state at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UeInfo {
    pub ue_id: UeId,
    pub mn_id: NodeId,
    pub mn_mcs: McsIndex,
    pub tn_sinr_db: f64,
    pub ntn_mcs: McsIndex,
    /// Seconds spent with an active secondary after warmup.
    pub secondary_time_s: f64,
    /// App bytes that arrived over the secondary leg after warmup.
    pub via_sn_bytes: u64,
    pub throughput_kbps: f64,
}

/// Per-run channel summaries, useful when calibrating link constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub mean_tn_sinr_db: f64,
    pub mean_tn_mcs: f64,
    pub mean_ntn_sinr_db: f64,
    pub mean_ntn_rsrp_dbm: f64,
    pub mean_ntn_mcs: f64,
    pub mean_tn_load: f64,
    pub mean_ntn_load: f64,
    pub aborted_handshakes: u64,
    pub skipped_sns: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_index: u64,
    pub policy: Policy,
    pub records: Vec<UeThroughputRecord>,
    pub events: Vec<SnEvent>,
    pub sn_adds: u64,
    pub sn_releases: u64,
    pub sn_rejects: u64,
    /// UEs whose NTN RSRP met the addition threshold in some report.
    pub ntn_eligible: Vec<UeId>,
    /// UEs that completed at least one SN addition.
    pub ever_added: Vec<UeId>,
    pub ue_info: Vec<UeInfo>,
    pub bytes: ByteCounters,
    pub checkpoints: Vec<Checkpoint>,
    pub order_violations: u64,
    pub audit: Option<SplitAudit>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone)]
enum Ev {
    Tti,
    Packet(UeId),
    Reports,
    ChannelUpdate,
    McEval(NodeId),
    SnRequest(SnAdditionRequest),
    HandshakeDone {
        ue: UeId,
        mn: NodeId,
        sn: NodeId,
    },
    RequestTick {
        ue: UeId,
        epoch: u64,
    },
    RequestArrive {
        req: DataRequest,
        epoch: u64,
    },
    XnForward {
        pdu: PdcpPdu,
        sn: NodeId,
        epoch: u64,
    },
    AirArrival {
        ue: UeId,
        via_sn: bool,
        pdus: Vec<(u64, u32)>,
    },
    ReorderTimer {
        ue: UeId,
        generation: u64,
    },
    Checkpoint,
}

struct Node {
    is_ntn: bool,
    queues: BTreeMap<UeId, TxQueue>,
    load: LoadTracker,
    rr: usize,
    requester: Option<RequesterState>,
    candidate: CandidateState,
    load_sum: f64,
    load_samples: u64,
}

struct Ue {
    mn: NodeId,
    mn_mcs: McsIndex,
    tn_sinr_db: f64,
    next_sn: u64,
    rx: PdcpReceiveEntity,
    ntn: Option<NtnLinkSample>,
    ntn_mcs: McsIndex,
    epoch: u64,
    stats_bits: u64,
    last_delivered: Option<u64>,
    eligible: bool,
    added: bool,
    bound_since: Option<SimTime>,
    secondary_time: SimTime,
    via_sn_bytes: u64,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    channel: &'a ChannelModel,
    timers: McTimers,
    nodes: Vec<Node>,
    ues: Vec<Ue>,
    ntn_id: NodeId,
    bindings: BindingTable,
    ledger: SplitLedger,
    audit: Option<SplitAudit>,
    events: Vec<SnEvent>,
    bytes: ByteCounters,
    checkpoints: Vec<Checkpoint>,
    order_violations: u64,
    jitter: RngStream,
    latency_rng: RngStream,
    latency_jitter: Option<SimTime>,
    checkpoint_period: Option<SimTime>,
    warmup: SimTime,
    xn: SimTime,
    uu: SimTime,
    tn_delay: SimTime,
    packet_interval: SimTime,
    ntn_sinr_sum: f64,
    ntn_rsrp_sum: f64,
    ntn_mcs_sum: f64,
    ntn_samples: u64,
}

/// Runs one scenario to completion under `cfg.mc.policy`.
pub fn run_scenario(cfg: &ScenarioConfig, scenario: &Scenario, run_index: u64, opts: &RunOptions) -> RunOutput {
    let campaign_seed = cfg.sim.base_seed;
    let channel = &scenario.channel;
    let n_sectors = scenario.layout.sectors.len();
    let ntn_id = NodeId(n_sectors as u32);
    let timers = McTimers::from_config(&cfg.mc);
    let tn_cap = res_per_tti(cfg.tn.prbs);
    let ntn_cap = res_per_tti(cfg.ntn.prbs);
    let window_ttis = (cfg.mc.load_window_ms.round() as usize).max(1);

    let serving: Vec<usize> = scenario
        .ues
        .iter()
        .enumerate()
        .map(|(k, u)| {
            if cfg.layout.strongest_cell_association {
                (0..n_sectors)
                    .max_by(|&a, &b| {
                        channel
                            .tn_rsrp_dbm(k, a)
                            .total_cmp(&channel.tn_rsrp_dbm(k, b))
                            .then(b.cmp(&a))
                    })
                    .expect("at least one sector")
            } else {
                u.sector
            }
        })
        .collect();

    let mut nodes: Vec<Node> = (0..=n_sectors)
        .map(|i| {
            let is_ntn = i == n_sectors;
            let id = NodeId(i as u32);
            let requester = (!is_ntn).then(|| {
                let served = (0..serving.len()).filter(|&k| serving[k] == i).map(|k| UeId(k as u32));
                RequesterState::new(id, served, timers.t_eval_period)
            });
            Node {
                is_ntn,
                queues: BTreeMap::new(),
                load: LoadTracker::new(window_ttis, if is_ntn { ntn_cap } else { tn_cap }),
                rr: 0,
                requester,
                candidate: CandidateState::default(),
                load_sum: 0.0,
                load_samples: 0,
            }
        })
        .collect();

    let ues: Vec<Ue> = serving
        .iter()
        .enumerate()
        .map(|(k, &sector)| {
            let sinr = channel.tn_sinr_db(k, sector);
            Ue {
                mn: NodeId(sector as u32),
                mn_mcs: channel.mcs.sinr_to_mcs(sinr),
                tn_sinr_db: sinr,
                next_sn: 0,
                rx: PdcpReceiveEntity::new(ms(cfg.pdcp.reorder_timer_ms), cfg.pdcp.reorder_buffer_pdus),
                ntn: None,
                ntn_mcs: McsIndex::new(0).expect("valid"),
                epoch: 0,
                stats_bits: 0,
                last_delivered: None,
                eligible: false,
                added: false,
                bound_since: None,
                secondary_time: SimTime::ZERO,
                via_sn_bytes: 0,
            }
        })
        .collect();
    for (k, u) in ues.iter().enumerate() {
        nodes[u.mn.idx()]
            .queues
            .insert(UeId(k as u32), TxQueue::new(cfg.traffic.max_queue_bytes));
    }

    let mut sim = Sim {
        cfg,
        channel,
        timers,
        nodes,
        ues,
        ntn_id,
        bindings: BindingTable::default(),
        ledger: SplitLedger::default(),
        audit: opts.audit.then(SplitAudit::default),
        events: vec![],
        bytes: ByteCounters::default(),
        checkpoints: vec![],
        order_violations: 0,
        jitter: RngStream::new(campaign_seed, run_index, "eval-jitter"),
        latency_rng: RngStream::new(campaign_seed, run_index, "latency-jitter"),
        latency_jitter: opts.latency_jitter,
        checkpoint_period: opts.checkpoint_period,
        warmup: cfg.warmup(),
        xn: ms(cfg.mc.xn_latency_ms),
        uu: ms(cfg.mc.uu_latency_ms),
        tn_delay: ms(cfg.tn.latency_ms),
        packet_interval: CbrFlow {
            ue: UeId(0),
            rate_bps: cfg.traffic.cbr_rate_bps,
            packet_bytes: cfg.traffic.packet_bytes,
            start: SimTime::ZERO,
        }
        .interval(),
        ntn_sinr_sum: 0.0,
        ntn_rsrp_sum: 0.0,
        ntn_mcs_sum: 0.0,
        ntn_samples: 0,
    };

    let mut q: EventQueue<Ev> = EventQueue::new();
    let t0 = SimTime::ZERO;
    q.schedule(t0, Ev::ChannelUpdate).expect("t0");
    q.schedule(t0, Ev::Reports).expect("t0");
    for k in 0..sim.ues.len() {
        q.schedule(t0, Ev::Packet(UeId(k as u32))).expect("t0");
    }
    q.schedule(t0, Ev::Tti).expect("t0");
    if cfg.mc.policy != Policy::Off {
        for n in 0..n_sectors {
            q.schedule(timers.t_eval_period, Ev::McEval(NodeId(n as u32)))
                .expect("future");
        }
    }
    if let Some(p) = sim.checkpoint_period {
        q.schedule(p, Ev::Checkpoint).expect("future");
    }

    let end = cfg.sim_time();
    q.run_until(end, |q, t, ev| sim.handle(q, t, ev));
    sim.finish(run_index, end)
}

impl Sim<'_> {
    fn handle(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ev: Ev) {
        match ev {
            Ev::Tti => {
                self.on_tti(q, t);
                q.schedule_in(TTI, Ev::Tti);
            }
            Ev::Packet(ue) => {
                self.on_packet(q, t, ue);
                q.schedule_in(self.packet_interval, Ev::Packet(ue));
            }
            Ev::Reports => {
                self.on_reports(t);
                q.schedule_in(ms(self.cfg.mc.rsrp_report_interval_ms), Ev::Reports);
            }
            Ev::ChannelUpdate => {
                self.on_channel_update(t);
                q.schedule_in(ms(self.cfg.sim.channel_update_ms), Ev::ChannelUpdate);
            }
            Ev::McEval(node) => self.on_eval(q, t, node),
            Ev::SnRequest(req) => self.on_sn_request(q, t, req),
            Ev::HandshakeDone { ue, mn, sn } => self.on_handshake_done(q, t, ue, mn, sn),
            Ev::RequestTick { ue, epoch } => self.on_request_tick(q, t, ue, epoch),
            Ev::RequestArrive { req, epoch } => {
                if self.binding_current(req.ue_id, epoch) {
                    self.ledger.install(req);
                    if let Some(a) = self.audit.as_mut() {
                        a.grants.push(req);
                    }
                }
            }
            Ev::XnForward { pdu, sn, epoch } => {
                self.bytes.in_flight -= pdu.bytes as u64;
                self.enqueue_at_sn(pdu, sn, epoch);
            }
            Ev::AirArrival { ue, via_sn, pdus } => self.on_air_arrival(q, t, ue, via_sn, pdus),
            Ev::ReorderTimer { ue, generation } => {
                let out = self.ues[ue.idx()].rx.on_timer(generation, t);
                self.apply_rx(q, t, ue, out);
            }
            Ev::Checkpoint => {
                self.record_checkpoint(t);
                if let Some(p) = self.checkpoint_period {
                    q.schedule_in(p, Ev::Checkpoint);
                }
            }
        }
    }

    fn binding_current(&self, ue: UeId, epoch: u64) -> bool {
        self.bindings.get(ue).is_some() && self.ues[ue.idx()].epoch == epoch
    }

    fn mcs_at(&self, node: &Node, ue: UeId) -> McsIndex {
        if node.is_ntn {
            self.ues[ue.idx()].ntn_mcs
        } else {
            self.ues[ue.idx()].mn_mcs
        }
    }

    fn on_tti(&mut self, q: &mut EventQueue<Ev>, t: SimTime) {
        let discard = self.cfg.pdcp.discard_passed;
        let priority = self.cfg.mc.rr_primary_priority;
        for n in 0..self.nodes.len() {
            if discard {
                let mut stale = 0;
                let node = &mut self.nodes[n];
                for (ue, queue) in node.queues.iter_mut() {
                    stale += queue.discard_below(self.ues[ue.idx()].rx.next_expected()).1;
                }
                self.bytes.discarded_stale += stale;
            }
            let node = &self.nodes[n];
            let demands: Vec<Demand> = node
                .queues
                .iter()
                .filter(|(_, queue)| queue.pending_bytes() > 0)
                .map(|(&ue, queue)| {
                    let eff = self.channel.mcs.spectral_efficiency(self.mcs_at(node, ue));
                    Demand {
                        ue,
                        need_res: res_needed(queue.pending_bytes(), eff),
                        primary: !node.is_ntn,
                    }
                })
                .collect();
            let cap = node.load.capacity_per_tti();
            let grants = allocate_tti(cap, &demands, node.rr, priority);
            let mut total = 0;
            let mut primary = 0;
            for g in grants {
                total += g.res;
                if g.primary {
                    primary += g.res;
                }
                let mcs = self.mcs_at(&self.nodes[n], g.ue);
                let tb_bytes = self.channel.mcs.tb_bits(mcs, g.res) / 8;
                let node = &mut self.nodes[n];
                let (done, _) = node.queues.get_mut(&g.ue).expect("granted queue").transmit(tb_bytes);
                if done.is_empty() {
                    continue;
                }
                let delay = if node.is_ntn {
                    self.ues[g.ue.idx()]
                        .ntn
                        .map(|s| s.one_way_delay)
                        .unwrap_or(SimTime::ZERO)
                } else {
                    self.tn_delay
                };
                let extra = match self.latency_jitter {
                    Some(j) if j > SimTime::ZERO => {
                        SimTime::from_nanos((self.latency_rng.unit() * j.as_nanos() as f64) as u64)
                    }
                    _ => SimTime::ZERO,
                };
                let pdus: Vec<(u64, u32)> = done.iter().map(|p| (p.sn, p.bytes)).collect();
                self.bytes.in_flight += pdus.iter().map(|p| p.1 as u64).sum::<u64>();
                q.schedule(
                    t + delay + extra,
                    Ev::AirArrival {
                        ue: g.ue,
                        via_sn: node.is_ntn,
                        pdus,
                    },
                )
                .expect("future");
            }
            let node = &mut self.nodes[n];
            node.rr = node.rr.wrapping_add(1);
            node.load.record(total, primary);
            if t >= self.warmup {
                node.load_sum += total as f64 / cap as f64;
                node.load_samples += 1;
            }
        }
    }

    fn on_packet(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ue: UeId) {
        let bytes = self.cfg.traffic.packet_bytes;
        self.bytes.generated += bytes as u64;
        let u = &self.ues[ue.idx()];
        let mn = u.mn;
        if let Some(b) = self.bindings.get(ue).copied() {
            let sn_queue = &self.nodes[b.sn_node.idx()].queues[&ue];
            if sn_queue.queued_bytes() + bytes as u64 <= sn_queue.max_bytes() {
                if let ForwardDecision::ForwardToSn(sn) = self.ledger.mn_forwarding_decision(ue, bytes as u64 * 8, t) {
                    let pdu = self.new_pdu(ue, bytes, t, PduPath::ViaSn);
                    if let Some(a) = self.audit.as_mut() {
                        a.forwards.push(ForwardRecord {
                            ue_id: ue,
                            time: t,
                            bits: bytes as u64 * 8,
                            grants_installed: a.grants.len(),
                        });
                    }
                    let epoch = self.ues[ue.idx()].epoch;
                    if self.xn == SimTime::ZERO {
                        self.enqueue_at_sn(pdu, sn, epoch);
                    } else {
                        self.bytes.in_flight += bytes as u64;
                        q.schedule(t + self.xn, Ev::XnForward { pdu, sn, epoch })
                            .expect("future");
                    }
                    return;
                }
            }
        }
        let queue = &self.nodes[mn.idx()].queues[&ue];
        if queue.queued_bytes() + bytes as u64 > queue.max_bytes() {
            self.bytes.dropped_mn += bytes as u64;
            return;
        }
        let pdu = self.new_pdu(ue, bytes, t, PduPath::MnDirect);
        self.nodes[mn.idx()]
            .queues
            .get_mut(&ue)
            .expect("MN queue")
            .push(pdu)
            .expect("room checked");
    }

    fn new_pdu(&mut self, ue: UeId, bytes: u32, t: SimTime, path: PduPath) -> PdcpPdu {
        let u = &mut self.ues[ue.idx()];
        let sn = u.next_sn;
        u.next_sn += 1;
        PdcpPdu {
            ue,
            sn,
            bytes,
            created_at: t,
            path,
        }
    }

    fn enqueue_at_sn(&mut self, pdu: PdcpPdu, sn: NodeId, epoch: u64) {
        let ue = pdu.ue;
        if self.binding_current(ue, epoch) {
            if let Some(queue) = self.nodes[sn.idx()].queues.get_mut(&ue) {
                if queue.push(pdu).is_err() {
                    self.bytes.dropped_sn += pdu.bytes as u64;
                }
                return;
            }
        }
        // leg torn down while the PDU was on Xn
        let mn = self.ues[ue.idx()].mn;
        self.nodes[mn.idx()]
            .queues
            .get_mut(&ue)
            .expect("MN queue")
            .push_front_forced(vec![pdu]);
    }

    fn on_air_arrival(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ue: UeId, via_sn: bool, pdus: Vec<(u64, u32)>) {
        for (sn, bytes) in pdus {
            self.bytes.in_flight -= bytes as u64;
            if via_sn && t >= self.warmup {
                self.ues[ue.idx()].via_sn_bytes += bytes as u64;
            }
            let out = self.ues[ue.idx()].rx.receive(sn, bytes, t);
            if let Some((_, b)) = out.discarded {
                self.bytes.discarded_late += b as u64;
            }
            self.apply_rx(q, t, ue, out);
        }
    }

    fn apply_rx(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ue: UeId, out: crate::dataplane::RxOutcome) {
        let u = &mut self.ues[ue.idx()];
        for (sn, bytes) in out.delivered {
            if u.last_delivered.is_some_and(|last| sn <= last) {
                self.order_violations += 1;
            }
            u.last_delivered = Some(sn);
            self.bytes.delivered += bytes as u64;
            if t >= self.warmup {
                u.stats_bits += bytes as u64 * 8;
            }
        }
        if let Some((generation, expiry)) = out.start_timer {
            q.schedule(expiry, Ev::ReorderTimer { ue, generation }).expect("future");
        }
    }

    fn on_reports(&mut self, t: SimTime) {
        let th = self.cfg.mc.rsrp_th_dbm;
        for k in 0..self.ues.len() {
            let Some(s) = self.channel.ntn_sample(k, t) else {
                continue;
            };
            let ue = UeId(k as u32);
            let u = &mut self.ues[k];
            if s.rsrp_dbm >= th {
                u.eligible = true;
            }
            let m = RsrpMeasurement {
                ue_id: ue,
                cell_id: self.ntn_id,
                rsrp_dbm: s.rsrp_dbm,
                time: t,
            };
            if let Some(r) = self.nodes[u.mn.idx()].requester.as_mut() {
                r.on_measurement_report(m);
            }
        }
    }

    fn on_channel_update(&mut self, t: SimTime) {
        for k in 0..self.ues.len() {
            let s = self.channel.ntn_sample(k, t);
            let u = &mut self.ues[k];
            u.ntn = s;
            u.ntn_mcs = match s {
                Some(s) => self.channel.mcs.sinr_to_mcs(s.sinr_db),
                None => McsIndex::new(0).expect("valid"),
            };
            if let Some(s) = s {
                if t >= self.warmup {
                    self.ntn_sinr_sum += s.sinr_db;
                    self.ntn_rsrp_sum += s.rsrp_dbm;
                    self.ntn_mcs_sum += u.ntn_mcs.value() as f64;
                    self.ntn_samples += 1;
                }
            }
            // the terrestrial link is static, so the MN MCS only changes if the
            // channel model ever makes it time-varying
            let mn_mcs = u.mn_mcs;
            self.bindings.update_mn_mcs(UeId(k as u32), mn_mcs);
        }
    }

    fn on_eval(&mut self, q: &mut EventQueue<Ev>, t: SimTime, node: NodeId) {
        let views: Vec<UeView> = self.nodes[node.idx()]
            .queues
            .iter()
            .filter(|(ue, _)| self.ues[ue.idx()].mn == node && !self.bindings.is_bound_or_pending(**ue))
            .map(|(&ue, queue)| UeView {
                ue,
                mcs: self.ues[ue.idx()].mn_mcs,
                occupancy: queue.occupancy(),
            })
            .collect();
        let requester = self.nodes[node.idx()].requester.as_mut().expect("TN node");
        let requests = requester.evaluate(&views, t, &self.cfg.mc, &self.timers);
        let next = requester.advance_eval(&self.timers, &mut self.jitter);
        for req in requests {
            q.schedule(t + self.xn, Ev::SnRequest(req)).expect("future");
        }
        q.schedule(next, Ev::McEval(node)).expect("future");
    }

    fn on_sn_request(&mut self, q: &mut EventQueue<Ev>, t: SimTime, req: SnAdditionRequest) {
        let cand = req.candidate;
        let secondaries = self.bindings.secondaries_of(cand);
        let view = CandidateView {
            load: self.nodes[cand.idx()].load.load(),
            secondaries: &secondaries,
            ue_already_bound: self.bindings.is_bound_or_pending(req.ue_id),
        };
        let decision =
            self.nodes[cand.idx()]
                .candidate
                .handle_sn_addition_request(&req, t, view, &self.cfg.mc, &self.timers);
        match decision {
            AdmissionDecision::Reject(cause) => self.log(
                t,
                SnEventKind::Reject,
                req.ue_id,
                req.requesting_node,
                cand,
                cause.to_string(),
            ),
            AdmissionDecision::Ack | AdmissionDecision::AckWithPreemption(_) => {
                if let AdmissionDecision::AckWithPreemption(victim) = decision {
                    self.release_secondary(victim, "PREEMPTION", t);
                }
                if self.bindings.begin_handshake(req.ue_id).is_ok() {
                    // ack over Xn, reconfiguration and completion over Uu, completion over Xn
                    let done = t + self.xn + self.uu + self.uu + self.xn;
                    q.schedule(
                        done,
                        Ev::HandshakeDone {
                            ue: req.ue_id,
                            mn: req.requesting_node,
                            sn: cand,
                        },
                    )
                    .expect("future");
                }
            }
        }
    }

    fn on_handshake_done(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ue: UeId, mn: NodeId, sn: NodeId) {
        let binding = SecondaryBinding {
            ue_id: ue,
            mn_node: mn,
            sn_node: sn,
            established_at: t,
            last_known_mn_mcs: self.ues[ue.idx()].mn_mcs,
        };
        if self.bindings.complete_reconfiguration(binding).is_err() {
            return;
        }
        self.nodes[sn.idx()]
            .queues
            .insert(ue, TxQueue::new(self.cfg.traffic.max_queue_bytes));
        let u = &mut self.ues[ue.idx()];
        u.epoch += 1;
        u.added = true;
        u.bound_since = Some(t);
        let epoch = u.epoch;
        self.log(t, SnEventKind::Add, ue, mn, sn, "RECONFIGURATION_COMPLETE".into());
        q.schedule(t, Ev::RequestTick { ue, epoch }).expect("now");
    }

    fn on_request_tick(&mut self, q: &mut EventQueue<Ev>, t: SimTime, ue: UeId, epoch: u64) {
        if !self.binding_current(ue, epoch) {
            return;
        }
        let sn = self.bindings.get(ue).expect("bound").sn_node;
        let node = &self.nodes[sn.idx()];
        let window = ms(self.cfg.split.delta_t_ms + self.cfg.split.t_off_ms);
        let amount = match self.ues[ue.idx()].ntn {
            Some(s) => compute_request_amount(&RequestInputs {
                alpha: self.cfg.split.alpha,
                primary_load: node.load.primary_load(),
                n_secondaries: self.bindings.count_for(sn),
                bandwidth_hz: self.cfg.ntn.bandwidth_hz,
                sinr_db: s.sinr_db,
                window,
            })
            .expect("bound UE counts as a secondary"),
            None => 0.0,
        };
        let req = DataRequest {
            sn_node: sn,
            ue_id: ue,
            amount_bits: amount.floor() as u64,
            issued_at: t,
            valid_for: window,
        };
        q.schedule(t + self.xn, Ev::RequestArrive { req, epoch })
            .expect("future");
        q.schedule(t + ms(self.cfg.split.delta_t_ms), Ev::RequestTick { ue, epoch })
            .expect("future");
    }

    /// Tears down `ue`'s secondary leg and moves its SN backlog to the MN.
    fn release_secondary(&mut self, ue: UeId, cause: &str, t: SimTime) {
        let Ok(b) = self.bindings.release(ue) else { return };
        let backlog = self.nodes[b.sn_node.idx()]
            .queues
            .remove(&ue)
            .map(|mut queue| queue.drain_all())
            .unwrap_or_default();
        self.nodes[b.mn_node.idx()]
            .queues
            .get_mut(&ue)
            .expect("MN queue")
            .push_front_forced(backlog);
        self.ledger.remove(ue);
        self.close_secondary_time(ue, t);
        self.log(t, SnEventKind::Release, ue, b.mn_node, b.sn_node, cause.into());
    }

    fn close_secondary_time(&mut self, ue: UeId, t: SimTime) {
        let warmup = self.warmup;
        let u = &mut self.ues[ue.idx()];
        if let Some(since) = u.bound_since.take() {
            let from = since.max(warmup);
            if t > from {
                u.secondary_time += t - from;
            }
        }
    }

    fn log(&mut self, time: SimTime, kind: SnEventKind, ue_id: UeId, mn_id: NodeId, sn_id: NodeId, cause: String) {
        self.events.push(SnEvent {
            time,
            kind,
            ue_id,
            mn_id,
            sn_id,
            cause,
        });
    }

    fn snapshot(&self) -> ByteCounters {
        let mut b = self.bytes;
        b.queued = self
            .nodes
            .iter()
            .flat_map(|n| n.queues.values())
            .map(|queue| queue.queued_bytes())
            .sum();
        b.reorder_buffered = self.ues.iter().map(|u| u.rx.buffered_bytes()).sum();
        b
    }

    fn record_checkpoint(&mut self, t: SimTime) {
        let bytes = self.snapshot();
        self.checkpoints.push(Checkpoint { time: t, bytes });
    }

    fn finish(mut self, run_index: u64, end: SimTime) -> RunOutput {
        for k in 0..self.ues.len() {
            self.close_secondary_time(UeId(k as u32), end);
        }
        let window_s = (end - self.warmup).as_secs_f64();
        let records: Vec<UeThroughputRecord> = self
            .ues
            .iter()
            .enumerate()
            .map(|(k, u)| UeThroughputRecord::new(run_index, UeId(k as u32), u.stats_bits, window_s))
            .collect();
        let ue_info = self
            .ues
            .iter()
            .zip(&records)
            .map(|(u, r)| UeInfo {
                ue_id: r.ue_id,
                mn_id: u.mn,
                mn_mcs: u.mn_mcs,
                tn_sinr_db: u.tn_sinr_db,
                ntn_mcs: u.ntn_mcs,
                secondary_time_s: u.secondary_time.as_secs_f64(),
                via_sn_bytes: u.via_sn_bytes,
                throughput_kbps: r.throughput_kbps,
            })
            .collect();
        let count = |kind: SnEventKind| self.events.iter().filter(|e| e.kind == kind).count() as u64;
        let n = self.ues.len().max(1) as f64;
        let tn_nodes: Vec<&Node> = self.nodes.iter().filter(|n| !n.is_ntn).collect();
        let avg_load = |n: &Node| n.load_sum / n.load_samples.max(1) as f64;
        let ntn_samples = self.ntn_samples.max(1) as f64;
        let diagnostics = RunDiagnostics {
            mean_tn_sinr_db: self.ues.iter().map(|u| u.tn_sinr_db).sum::<f64>() / n,
            mean_tn_mcs: self.ues.iter().map(|u| u.mn_mcs.value() as f64).sum::<f64>() / n,
            mean_ntn_sinr_db: self.ntn_sinr_sum / ntn_samples,
            mean_ntn_rsrp_dbm: self.ntn_rsrp_sum / ntn_samples,
            mean_ntn_mcs: self.ntn_mcs_sum / ntn_samples,
            mean_tn_load: tn_nodes.iter().map(|n| avg_load(n)).sum::<f64>() / tn_nodes.len().max(1) as f64,
            mean_ntn_load: avg_load(&self.nodes[self.ntn_id.idx()]),
            aborted_handshakes: self.bindings.aborted_handshakes,
            skipped_sns: self.ues.iter().map(|u| u.rx.counters.skipped_sns).sum(),
        };
        let bytes = self.snapshot();
        RunOutput {
            run_index,
            policy: self.cfg.mc.policy,
            records,
            sn_adds: count(SnEventKind::Add),
            sn_releases: count(SnEventKind::Release),
            sn_rejects: count(SnEventKind::Reject),
            ntn_eligible: (0..self.ues.len())
                .filter(|&k| self.ues[k].eligible)
                .map(|k| UeId(k as u32))
                .collect(),
            ever_added: (0..self.ues.len())
                .filter(|&k| self.ues[k].added)
                .map(|k| UeId(k as u32))
                .collect(),
            ue_info,
            events: self.events,
            bytes,
            checkpoints: self.checkpoints,
            order_violations: self.order_violations,
            audit: self.audit,
            diagnostics,
        }
    }
}
