use std::collections::VecDeque;

use serde::Serialize;

use crate::engine::SimTime;
use crate::ids::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PduPath {
    MnDirect,
    ViaSn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PdcpPdu {
    pub ue: UeId,
    pub sn: u64,
    pub bytes: u32,
    pub created_at: SimTime,
    pub path: PduPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferOccupancy {
    pub ue_id: UeId,
    pub occupancy: f64,
}

/// Per-UE FIFO of PDCP PDUs at one node. A PDU may be sent across several
/// transport blocks; it leaves the queue once its last byte is sent.
#[derive(Debug, Clone)]
pub struct TxQueue {
    pdus: VecDeque<PdcpPdu>,
    head_sent: u32,
    queued_bytes: u64,
    max_bytes: u64,
}

impl TxQueue {
    pub fn new(max_bytes: u64) -> Self {
        TxQueue {
            pdus: VecDeque::new(),
            head_sent: 0,
            queued_bytes: 0,
            max_bytes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pdus.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pdus.len()
    }

    /// Full size of every queued PDU, including a partly sent head.
    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    /// Bytes still to be put on air.
    pub fn pending_bytes(&self) -> u64 {
        self.queued_bytes - self.head_sent as u64
    }

    pub fn max_bytes(&self) -> u64 {
        self.max_bytes
    }

    pub fn occupancy(&self) -> f64 {
        (self.queued_bytes as f64 / self.max_bytes as f64).min(1.0)
    }

    /// Appends a PDU, handing it back if it does not fit.
    pub fn push(&mut self, pdu: PdcpPdu) -> Result<(), PdcpPdu> {
        if self.queued_bytes + pdu.bytes as u64 > self.max_bytes {
            return Err(pdu);
        }
        self.queued_bytes += pdu.bytes as u64;
        self.pdus.push_back(pdu);
        Ok(())
    }

    /// Inserts PDUs ahead of everything not yet started, ignoring the byte cap.
    /// Used when a secondary leg is torn down and its backlog moves home.
    pub fn push_front_forced(&mut self, pdus: Vec<PdcpPdu>) {
        let keep_head = if self.head_sent > 0 {
            self.pdus.pop_front()
        } else {
            None
        };
        for pdu in pdus.into_iter().rev() {
            self.queued_bytes += pdu.bytes as u64;
            self.pdus.push_front(pdu);
        }
        if let Some(h) = keep_head {
            self.pdus.push_front(h);
        }
    }

    /// Sends up to `budget` bytes; returns PDUs whose last byte went out and
    /// the number of bytes used.
    pub fn transmit(&mut self, budget: u64) -> (Vec<PdcpPdu>, u64) {
        let mut left = budget;
        let mut done = vec![];
        while left > 0 {
            let Some(head) = self.pdus.front() else { break };
            let remaining = (head.bytes - self.head_sent) as u64;
            if remaining <= left {
                left -= remaining;
                let pdu = self.pdus.pop_front().expect("front exists");
                self.queued_bytes -= pdu.bytes as u64;
                self.head_sent = 0;
                done.push(pdu);
            } else {
                self.head_sent += left as u32;
                left = 0;
            }
        }
        (done, budget - left)
    }

    /// Removes PDUs with `sn < below` that have not started transmission.
    pub fn discard_below(&mut self, below: u64) -> (u64, u64) {
        let mut n = 0u64;
        let mut bytes = 0u64;
        let started = self.head_sent > 0;
        let mut i = 0usize;
        self.pdus.retain(|p| {
            let keep = (i == 0 && started) || p.sn >= below;
            i += 1;
            if !keep {
                n += 1;
                bytes += p.bytes as u64;
            }
            keep
        });
        self.queued_bytes -= bytes;
        (n, bytes)
    }

    pub fn drain_all(&mut self) -> Vec<PdcpPdu> {
        self.queued_bytes = 0;
        self.head_sent = 0;
        self.pdus.drain(..).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PdcpPdu> {
        self.pdus.iter()
    }
}
