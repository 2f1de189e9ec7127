//! SN-driven flow control for split bearers: periodic data requests from the
//! SN and the MN's per-PDU forwarding decision.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::channel::db_to_linear;
use crate::engine::SimTime;
use crate::ids::{NodeId, UeId};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SplitError {
    #[error("data request computed with no secondary UEs at the SN")]
    NoSecondaries,
}

/// Inputs of one request computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestInputs {
    pub alpha: f64,
    /// Share of the SN's resources used by its own primary UEs.
    pub primary_load: f64,
    pub n_secondaries: usize,
    pub bandwidth_hz: f64,
    pub sinr_db: f64,
    /// Request period plus offset.
    pub window: SimTime,
}

/// Bits the SN asks for: its spare capacity share for this UE at the
/// Shannon rate, scaled by `alpha`, over the request window.
pub fn compute_request_amount(p: &RequestInputs) -> Result<f64, SplitError> {
    if p.n_secondaries == 0 {
        return Err(SplitError::NoSecondaries);
    }
    if p.primary_load >= 1.0 {
        return Ok(0.0);
    }
    let spare = (1.0 - p.primary_load) / p.n_secondaries as f64;
    let rate = p.bandwidth_hz * (1.0 + db_to_linear(p.sinr_db)).log2();
    Ok(p.alpha * spare * rate * p.window.as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataRequest {
    pub sn_node: NodeId,
    pub ue_id: UeId,
    pub amount_bits: u64,
    pub issued_at: SimTime,
    pub valid_for: SimTime,
}

impl DataRequest {
    pub fn expires_at(&self) -> SimTime {
        self.issued_at + self.valid_for
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    ForwardToSn(NodeId),
    SendLocal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ActiveGrant {
    request: DataRequest,
    remaining_bits: u64,
}

/// The MN's record of outstanding data requests, one per UE.
#[derive(Debug, Clone, Default)]
pub struct SplitLedger {
    grants: BTreeMap<UeId, ActiveGrant>,
}

impl SplitLedger {
    /// Installs a request, replacing whatever was left of the previous one.
    pub fn install(&mut self, req: DataRequest) {
        self.grants.insert(
            req.ue_id,
            ActiveGrant {
                request: req,
                remaining_bits: req.amount_bits,
            },
        );
    }

    pub fn remove(&mut self, ue: UeId) {
        self.grants.remove(&ue);
    }

    /// Unexpired remaining bits for `ue` at `t`.
    pub fn remaining(&self, ue: UeId, t: SimTime) -> u64 {
        match self.grants.get(&ue) {
            Some(g) if t <= g.request.expires_at() => g.remaining_bits,
            _ => 0,
        }
    }

    /// Forward iff an unexpired grant still covers the whole PDU; the grant
    /// is charged on forward.
    pub fn mn_forwarding_decision(&mut self, ue: UeId, pdu_bits: u64, t: SimTime) -> ForwardDecision {
        match self.grants.get_mut(&ue) {
            Some(g) if t <= g.request.expires_at() && g.remaining_bits >= pdu_bits => {
                g.remaining_bits -= pdu_bits;
                ForwardDecision::ForwardToSn(g.request.sn_node)
            }
            _ => ForwardDecision::SendLocal,
        }
    }
}

/// Raw record of grants issued and PDUs forwarded, for offline checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitAudit {
    /// Installed grants, in installation order.
    pub grants: Vec<DataRequest>,
    pub forwards: Vec<ForwardRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardRecord {
    pub ue_id: UeId,
    pub time: SimTime,
    pub bits: u64,
    /// Length of `grants` when the forward was decided; orders forwards and
    /// installs that share a timestamp.
    pub grants_installed: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> RequestInputs {
        RequestInputs {
            alpha: 0.6,
            primary_load: 0.5,
            n_secondaries: 2,
            bandwidth_hz: 10e6,
            sinr_db: 0.0,
            window: SimTime::from_millis(50),
        }
    }

    #[test]
    fn hand_evaluated_amount() {
        let d = compute_request_amount(&inputs()).unwrap();
        assert!((d - 75_000.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn full_primary_load_requests_nothing() {
        let mut p = inputs();
        p.primary_load = 1.0;
        assert_eq!(compute_request_amount(&p).unwrap(), 0.0);
    }

    #[test]
    fn zero_secondaries_is_an_error() {
        let mut p = inputs();
        p.n_secondaries = 0;
        assert_eq!(compute_request_amount(&p), Err(SplitError::NoSecondaries));
    }

    fn req(bits: u64, at_ms: u64) -> DataRequest {
        DataRequest {
            sn_node: NodeId(9),
            ue_id: UeId(3),
            amount_bits: bits,
            issued_at: SimTime::from_millis(at_ms),
            valid_for: SimTime::from_millis(50),
        }
    }

    #[test]
    fn ledger_arithmetic_and_expiry() {
        let mut l = SplitLedger::default();
        l.install(req(75_000, 0));
        assert_eq!(
            l.mn_forwarding_decision(UeId(3), 12_000, SimTime::from_millis(1)),
            ForwardDecision::ForwardToSn(NodeId(9))
        );
        assert_eq!(l.remaining(UeId(3), SimTime::from_millis(1)), 63_000);
        assert_eq!(
            l.mn_forwarding_decision(UeId(3), 12_000, SimTime::from_millis(51)),
            ForwardDecision::SendLocal
        );
        assert_eq!(
            l.mn_forwarding_decision(UeId(4), 1, SimTime::from_millis(1)),
            ForwardDecision::SendLocal
        );
    }

    #[test]
    fn grants_replace_rather_than_accumulate() {
        let mut l = SplitLedger::default();
        l.install(req(20_000, 0));
        l.install(req(10_000, 25));
        assert_eq!(l.remaining(UeId(3), SimTime::from_millis(25)), 10_000);
        assert_eq!(
            l.mn_forwarding_decision(UeId(3), 12_000, SimTime::from_millis(26)),
            ForwardDecision::SendLocal
        );
    }
}
