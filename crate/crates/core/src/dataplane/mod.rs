//! Downlink user plane: transmit queues, per-TTI scheduling, load tracking,
//! PDCP receive-side reordering and the CBR source.

pub mod load;
pub mod pdcp;
pub mod queue;
pub mod scheduler;

pub use load::LoadTracker;
pub use pdcp::{PdcpReceiveEntity, PdcpRxCounters, RxOutcome};
pub use queue::{BufferOccupancy, PdcpPdu, PduPath, TxQueue};
pub use scheduler::{allocate_tti, round_robin_shares, Demand, Grant};

use crate::engine::SimTime;
use crate::ids::UeId;

/// Constant-bit-rate downlink flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrFlow {
    pub ue: UeId,
    pub rate_bps: f64,
    pub packet_bytes: u32,
    pub start: SimTime,
}

impl CbrFlow {
    pub fn interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.packet_bytes as f64 * 8.0 / self.rate_bps)
    }
}

/// REs needed to carry `bytes` at `bits_per_re`, rounded up.
pub fn res_needed(bytes: u64, bits_per_re: f64) -> u32 {
    let res = (bytes as f64 * 8.0 / bits_per_re).ceil();
    if res >= u32::MAX as f64 {
        u32::MAX
    } else {
        res as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cbr_interval_exact() {
        let f = CbrFlow {
            ue: UeId(0),
            rate_bps: 3_200_000.0,
            packet_bytes: 1500,
            start: SimTime::ZERO,
        };
        assert_eq!(f.interval(), SimTime::from_nanos(3_750_000));
    }

    #[test]
    fn res_needed_rounds_up() {
        assert_eq!(res_needed(1, 8.0), 1);
        assert_eq!(res_needed(1500, 1.0), 12_000);
        assert_eq!(res_needed(1500, 7.0), 1715);
    }
}
