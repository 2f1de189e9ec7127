//! Dual-connectivity control plane: measurement storage, the three SN
//! addition policies, candidate-side admission with preemption, and the
//! binding table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{McsIndex, RsrpMeasurement};
use crate::config::{ms, McPolicyConfig, Policy};
use crate::engine::{RngStream, SimTime};
use crate::ids::{NodeId, UeId};

/// Time-domain gates of the addition logic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McTimers {
    pub t_eval_period: SimTime,
    pub t_req_period: SimTime,
    pub t_add: SimTime,
    pub t_val: SimTime,
}

impl McTimers {
    pub fn from_config(c: &McPolicyConfig) -> Self {
        McTimers {
            t_eval_period: ms(c.t_eval_ms),
            t_req_period: ms(c.t_req_period_ms),
            t_add: ms(c.t_add_ms),
            t_val: ms(c.t_val_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnAdditionRequest {
    pub ue_id: UeId,
    pub requesting_node: NodeId,
    pub candidate: NodeId,
    pub mn_mcs: McsIndex,
    pub sent_at: SimTime,
}

/// What the requester knows about one of its single-connectivity UEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeView {
    pub ue: UeId,
    pub mcs: McsIndex,
    pub occupancy: f64,
}

/// Requester-side controller state of one MN.
#[derive(Debug, Clone)]
pub struct RequesterState {
    pub node: NodeId,
    reports: BTreeMap<UeId, BTreeMap<NodeId, RsrpMeasurement>>,
    served: BTreeSet<UeId>,
    last_request: BTreeMap<NodeId, SimTime>,
    next_eval: SimTime,
    t_prev: SimTime,
    pub ignored_reports: u64,
}

impl RequesterState {
    pub fn new(node: NodeId, served: impl IntoIterator<Item = UeId>, first_eval: SimTime) -> Self {
        RequesterState {
            node,
            reports: BTreeMap::new(),
            served: served.into_iter().collect(),
            last_request: BTreeMap::new(),
            next_eval: first_eval,
            t_prev: SimTime::ZERO,
            ignored_reports: 0,
        }
    }

    pub fn next_eval(&self) -> SimTime {
        self.next_eval
    }

    pub fn last_request_to(&self, cell: NodeId) -> Option<SimTime> {
        self.last_request.get(&cell).copied()
    }

    /// Stores a report, replacing any older one for the same (UE, cell).
    pub fn on_measurement_report(&mut self, m: RsrpMeasurement) {
        if !self.served.contains(&m.ue_id) {
            self.ignored_reports += 1;
            return;
        }
        let per_ue = self.reports.entry(m.ue_id).or_default();
        match per_ue.get(&m.cell_id) {
            Some(old) if old.time > m.time => {}
            _ => {
                per_ue.insert(m.cell_id, m);
            }
        }
    }

    /// Highest-RSRP valid measurement toward a cell not requested within
    /// `t_req_period`. Ties keep the lower cell id.
    fn best_candidate(&self, ue: UeId, t: SimTime, timers: &McTimers) -> Option<(NodeId, f64)> {
        let mut best: Option<(NodeId, f64)> = None;
        for m in self.reports.get(&ue)?.values() {
            let fresh = t.saturating_sub(m.time) <= timers.t_val && m.time <= t;
            let gate_open = match self.last_request.get(&m.cell_id) {
                Some(&last) => t.saturating_sub(last) >= timers.t_req_period,
                None => true,
            };
            if fresh && gate_open && best.is_none_or(|(_, r)| m.rsrp_dbm > r) {
                best = Some((m.cell_id, m.rsrp_dbm));
            }
        }
        best
    }

    fn try_request(
        &mut self,
        v: &UeView,
        t: SimTime,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> Option<SnAdditionRequest> {
        let (cell, rsrp) = self.best_candidate(v.ue, t, timers)?;
        if rsrp < cfg.rsrp_th_dbm {
            return None;
        }
        self.last_request.insert(cell, t);
        Some(SnAdditionRequest {
            ue_id: v.ue,
            requesting_node: self.node,
            candidate: cell,
            mn_mcs: v.mcs,
            sent_at: t,
        })
    }

    /// MCS-ascending walk over single-connectivity UEs, stopping at the first
    /// UE above the MCS threshold.
    pub fn evaluate_mcs_based(
        &mut self,
        ues: &[UeView],
        t: SimTime,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> Vec<SnAdditionRequest> {
        let mut order: Vec<&UeView> = ues.iter().collect();
        order.sort_by_key(|v| (v.mcs, v.ue));
        let mut out = vec![];
        for v in order {
            if v.mcs.value() > cfg.mcs_th {
                break;
            }
            out.extend(self.try_request(v, t, cfg, timers));
        }
        out
    }

    pub fn evaluate_rsrp_based(
        &mut self,
        ues: &[UeView],
        t: SimTime,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> Vec<SnAdditionRequest> {
        let mut order: Vec<&UeView> = ues.iter().collect();
        order.sort_by_key(|v| v.ue);
        order
            .into_iter()
            .filter_map(|v| self.try_request(v, t, cfg, timers))
            .collect()
    }

    /// UEs at or above the occupancy threshold, fullest first.
    pub fn evaluate_bo_based(
        &mut self,
        ues: &[UeView],
        t: SimTime,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> Vec<SnAdditionRequest> {
        let mut order: Vec<&UeView> = ues.iter().filter(|v| v.occupancy >= cfg.o_th).collect();
        order.sort_by(|a, b| b.occupancy.total_cmp(&a.occupancy).then(a.ue.cmp(&b.ue)));
        order
            .into_iter()
            .filter_map(|v| self.try_request(v, t, cfg, timers))
            .collect()
    }

    pub fn evaluate(
        &mut self,
        ues: &[UeView],
        t: SimTime,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> Vec<SnAdditionRequest> {
        match cfg.policy {
            Policy::Off => vec![],
            Policy::RsrpBased => self.evaluate_rsrp_based(ues, t, cfg, timers),
            Policy::BoBased => self.evaluate_bo_based(ues, t, cfg, timers),
            Policy::McsBased => self.evaluate_mcs_based(ues, t, cfg, timers),
        }
    }

    /// Advances the evaluation clock: `t_eval += period - t_prev + t_del`
    /// with a fresh `t_del` uniform on [0, 1 ms).
    pub fn advance_eval(&mut self, timers: &McTimers, jitter: &mut RngStream) -> SimTime {
        let t_del = SimTime::from_nanos((jitter.unit() * 1_000_000.0) as u64);
        self.next_eval = self.next_eval + timers.t_eval_period - self.t_prev + t_del;
        self.t_prev = t_del;
        self.next_eval
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RejectCause {
    AlreadyBound,
    AckPeriod,
    Overloaded,
}

impl fmt::Display for RejectCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectCause::AlreadyBound => "ALREADY_BOUND",
            RejectCause::AckPeriod => "ACK_PERIOD",
            RejectCause::Overloaded => "OVERLOADED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissionDecision {
    Ack,
    /// Acknowledge after releasing the named secondary UE.
    AckWithPreemption(UeId),
    Reject(RejectCause),
}

/// Candidate-side controller state of one SN-capable node.
#[derive(Debug, Clone, Default)]
pub struct CandidateState {
    pub last_ack: Option<SimTime>,
}

/// Inputs the candidate looks at when a request arrives.
#[derive(Debug, Clone, Copy)]
pub struct CandidateView<'a> {
    pub load: f64,
    /// `(ue, last_known_mn_mcs)` of every UE it serves as SN.
    pub secondaries: &'a [(UeId, McsIndex)],
    /// The UE already has (or is acquiring) a secondary.
    pub ue_already_bound: bool,
}

/// UE to preempt: highest MN MCS, lowest id on ties.
fn preemption_victim(secondaries: &[(UeId, McsIndex)]) -> Option<(UeId, McsIndex)> {
    secondaries
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
}

impl CandidateState {
    pub fn handle_sn_addition_request(
        &mut self,
        req: &SnAdditionRequest,
        t: SimTime,
        view: CandidateView<'_>,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> AdmissionDecision {
        let decision = self.decide(req, t, view, cfg, timers);
        if !matches!(decision, AdmissionDecision::Reject(_)) {
            self.last_ack = Some(t);
        }
        decision
    }

    fn decide(
        &self,
        req: &SnAdditionRequest,
        t: SimTime,
        view: CandidateView<'_>,
        cfg: &McPolicyConfig,
        timers: &McTimers,
    ) -> AdmissionDecision {
        if view.ue_already_bound {
            return AdmissionDecision::Reject(RejectCause::AlreadyBound);
        }
        let recently_acked = self.last_ack.is_some_and(|a| t.saturating_sub(a) <= timers.t_add);
        match cfg.policy {
            Policy::Off => AdmissionDecision::Reject(RejectCause::Overloaded),
            // admits every UE that meets the RSRP threshold
            Policy::RsrpBased => AdmissionDecision::Ack,
            Policy::BoBased => {
                if recently_acked {
                    AdmissionDecision::Reject(RejectCause::AckPeriod)
                } else if view.load <= cfg.l_th {
                    AdmissionDecision::Ack
                } else {
                    AdmissionDecision::Reject(RejectCause::Overloaded)
                }
            }
            Policy::McsBased => {
                if recently_acked {
                    return AdmissionDecision::Reject(RejectCause::AckPeriod);
                }
                if view.load <= cfg.l_th {
                    return AdmissionDecision::Ack;
                }
                match preemption_victim(view.secondaries) {
                    Some((k, mcs)) if mcs > req.mn_mcs => AdmissionDecision::AckWithPreemption(k),
                    _ => AdmissionDecision::Reject(RejectCause::Overloaded),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondaryBinding {
    pub ue_id: UeId,
    pub mn_node: NodeId,
    pub sn_node: NodeId,
    pub established_at: SimTime,
    pub last_known_mn_mcs: McsIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("UE {0} already has a secondary node")]
    AlreadyBound(UeId),
    #[error("UE {0} has no secondary node")]
    NotBound(UeId),
}

/// Active and in-progress secondary bindings, at most one per UE.
#[derive(Debug, Clone, Default)]
pub struct BindingTable {
    active: BTreeMap<UeId, SecondaryBinding>,
    pending: BTreeSet<UeId>,
    pub aborted_handshakes: u64,
    pub noop_releases: u64,
}

impl BindingTable {
    pub fn get(&self, ue: UeId) -> Option<&SecondaryBinding> {
        self.active.get(&ue)
    }

    pub fn is_bound_or_pending(&self, ue: UeId) -> bool {
        self.active.contains_key(&ue) || self.pending.contains(&ue)
    }

    pub fn is_pending(&self, ue: UeId) -> bool {
        self.pending.contains(&ue)
    }

    /// Marks an acknowledged addition whose reconfiguration is under way.
    pub fn begin_handshake(&mut self, ue: UeId) -> Result<(), BindingError> {
        if self.is_bound_or_pending(ue) {
            self.aborted_handshakes += 1;
            return Err(BindingError::AlreadyBound(ue));
        }
        self.pending.insert(ue);
        Ok(())
    }

    /// Final reconfiguration message processed; the binding becomes usable.
    pub fn complete_reconfiguration(&mut self, b: SecondaryBinding) -> Result<&SecondaryBinding, BindingError> {
        self.pending.remove(&b.ue_id);
        if self.active.contains_key(&b.ue_id) {
            self.aborted_handshakes += 1;
            return Err(BindingError::AlreadyBound(b.ue_id));
        }
        Ok(self.active.entry(b.ue_id).or_insert(b))
    }

    pub fn release(&mut self, ue: UeId) -> Result<SecondaryBinding, BindingError> {
        self.active.remove(&ue).ok_or_else(|| {
            self.noop_releases += 1;
            BindingError::NotBound(ue)
        })
    }

    /// Records a new MN MCS; returns true when it differs from the stored value
    /// (an update message goes out).
    pub fn update_mn_mcs(&mut self, ue: UeId, mcs: McsIndex) -> bool {
        match self.active.get_mut(&ue) {
            Some(b) if b.last_known_mn_mcs != mcs => {
                b.last_known_mn_mcs = mcs;
                true
            }
            _ => false,
        }
    }

    pub fn secondaries_of(&self, sn: NodeId) -> Vec<(UeId, McsIndex)> {
        self.active
            .values()
            .filter(|b| b.sn_node == sn)
            .map(|b| (b.ue_id, b.last_known_mn_mcs))
            .collect()
    }

    pub fn count_for(&self, sn: NodeId) -> usize {
        self.active.values().filter(|b| b.sn_node == sn).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SecondaryBinding> {
        self.active.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SnEventKind {
    Add,
    Release,
    Reject,
}

impl fmt::Display for SnEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnEventKind::Add => "ADD",
            SnEventKind::Release => "RELEASE",
            SnEventKind::Reject => "REJECT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnEvent {
    pub time: SimTime,
    pub kind: SnEventKind,
    pub ue_id: UeId,
    pub mn_id: NodeId,
    pub sn_id: NodeId,
    pub cause: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    const MN: NodeId = NodeId(0);
    const NTN: NodeId = NodeId(9);

    fn cfg(policy: Policy) -> (McPolicyConfig, McTimers) {
        let mut c = ScenarioConfig::default().mc;
        c.policy = policy;
        let t = McTimers::from_config(&c);
        (c, t)
    }

    fn mcs(v: u8) -> McsIndex {
        McsIndex::new(v).unwrap()
    }

    fn report(ue: u32, rsrp: f64, at_ms: u64) -> RsrpMeasurement {
        RsrpMeasurement {
            ue_id: UeId(ue),
            cell_id: NTN,
            rsrp_dbm: rsrp,
            time: SimTime::from_millis(at_ms),
        }
    }

    fn view(ue: u32, m: u8, occ: f64) -> UeView {
        UeView {
            ue: UeId(ue),
            mcs: mcs(m),
            occupancy: occ,
        }
    }

    #[test]
    fn newer_report_replaces_and_unknown_is_counted() {
        let mut r = RequesterState::new(MN, [UeId(1)], SimTime::ZERO);
        r.on_measurement_report(report(1, -120.0, 0));
        r.on_measurement_report(report(1, -100.0, 120));
        r.on_measurement_report(report(7, -100.0, 120));
        assert_eq!(r.ignored_reports, 1);
        let (c, t) = cfg(Policy::RsrpBased);
        let out = r.evaluate(&[view(1, 3, 0.0)], SimTime::from_millis(130), &c, &t);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn requests_prefix_only_and_per_cell_gate() {
        let (c, t) = cfg(Policy::McsBased);
        let mut r = RequesterState::new(MN, (0..3).map(UeId), SimTime::ZERO);
        for ue in 0..3 {
            r.on_measurement_report(report(ue, -100.0, 0));
        }
        let ues = [view(0, 9, 0.0), view(1, 2, 0.0), view(2, 16, 0.0)];
        let out = r.evaluate(&ues, SimTime::from_millis(10), &c, &t);
        // lowest MCS first; the cell is then gated for the other UE
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].ue_id, UeId(1));
        assert!(r.evaluate(&ues, SimTime::from_millis(109), &c, &t).is_empty());
        let out = r.evaluate(&ues, SimTime::from_millis(110), &c, &t);
        assert_eq!(out[0].ue_id, UeId(1));
    }

    #[test]
    fn bo_orders_by_occupancy() {
        let (c, t) = cfg(Policy::BoBased);
        let mut r = RequesterState::new(MN, (0..3).map(UeId), SimTime::ZERO);
        for ue in 0..3 {
            r.on_measurement_report(report(ue, -110.0, 0));
        }
        let ues = [view(0, 1, 0.85), view(1, 1, 0.2), view(2, 1, 0.95)];
        let out = r.evaluate(&ues, SimTime::from_millis(10), &c, &t);
        assert_eq!(out.iter().map(|q| q.ue_id).collect::<Vec<_>>(), vec![UeId(2)]);
    }

    #[test]
    fn bo_rsrp_gate() {
        let (c, t) = cfg(Policy::BoBased);
        let mut r = RequesterState::new(MN, [UeId(0)], SimTime::ZERO);
        r.on_measurement_report(report(0, -115.0, 0));
        assert!(r
            .evaluate(&[view(0, 1, 0.9)], SimTime::from_millis(10), &c, &t)
            .is_empty());
    }

    #[test]
    fn rsrp_boundary_and_staleness() {
        let (c, t) = cfg(Policy::RsrpBased);
        let mut r = RequesterState::new(MN, [UeId(0)], SimTime::ZERO);
        r.on_measurement_report(report(0, -111.0, 0));
        assert!(r
            .evaluate(&[view(0, 20, 0.0)], SimTime::from_millis(121), &c, &t)
            .is_empty());
        assert_eq!(
            r.evaluate(&[view(0, 20, 0.0)], SimTime::from_millis(120), &c, &t).len(),
            1
        );
    }

    #[test]
    fn eval_clock_follows_update_rule() {
        let (_, t) = cfg(Policy::McsBased);
        let mut r = RequesterState::new(MN, [], SimTime::from_millis(10));
        let mut rng = RngStream::new(1, 0, "eval-jitter");
        let mut oracle = RngStream::new(1, 0, "eval-jitter");
        let mut prev_del = 0u64;
        let mut expect = 10_000_000u64;
        for _ in 0..50 {
            let got = r.advance_eval(&t, &mut rng);
            let del = (oracle.unit() * 1e6) as u64;
            expect = expect + 10_000_000 - prev_del + del;
            prev_del = del;
            assert_eq!(got.as_nanos(), expect);
        }
    }

    #[test]
    fn bo_candidate_never_preempts() {
        let (c, t) = cfg(Policy::BoBased);
        let mut cand = CandidateState::default();
        let req = SnAdditionRequest {
            ue_id: UeId(1),
            requesting_node: MN,
            candidate: NTN,
            mn_mcs: mcs(5),
            sent_at: SimTime::ZERO,
        };
        let sec = [(UeId(4), mcs(20))];
        let v = CandidateView {
            load: 1.0,
            secondaries: &sec,
            ue_already_bound: false,
        };
        assert_eq!(
            cand.handle_sn_addition_request(&req, SimTime::ZERO, v, &c, &t),
            AdmissionDecision::Reject(RejectCause::Overloaded)
        );
        assert!(cand.last_ack.is_none());
    }

    #[test]
    fn preemption_victim_tie_breaks_on_lower_id() {
        assert_eq!(
            preemption_victim(&[(UeId(5), mcs(20)), (UeId(2), mcs(20)), (UeId(1), mcs(3))]),
            Some((UeId(2), mcs(20)))
        );
    }

    #[test]
    fn binding_table_uniqueness_and_updates() {
        let mut b = BindingTable::default();
        b.begin_handshake(UeId(1)).unwrap();
        assert!(b.begin_handshake(UeId(1)).is_err());
        let binding = SecondaryBinding {
            ue_id: UeId(1),
            mn_node: MN,
            sn_node: NTN,
            established_at: SimTime::ZERO,
            last_known_mn_mcs: mcs(5),
        };
        b.complete_reconfiguration(binding).unwrap();
        assert!(b.complete_reconfiguration(binding).is_err());
        assert_eq!(b.aborted_handshakes, 2);
        assert!(b.update_mn_mcs(UeId(1), mcs(7)));
        assert!(!b.update_mn_mcs(UeId(1), mcs(7)));
        assert_eq!(b.secondaries_of(NTN), vec![(UeId(1), mcs(7))]);
        b.release(UeId(1)).unwrap();
        assert!(b.release(UeId(1)).is_err());
        assert_eq!(b.noop_releases, 1);
    }
}
