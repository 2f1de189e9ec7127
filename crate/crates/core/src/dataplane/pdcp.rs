//! PDCP receive side: reordering buffer, t-Reordering timer and in-order
//! delivery to the application.

use std::collections::BTreeMap;

use crate::engine::SimTime;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PdcpRxCounters {
    pub delivered_pdus: u64,
    pub delivered_bytes: u64,
    pub late_pdus: u64,
    pub late_bytes: u64,
    pub skipped_sns: u64,
    pub overflow_releases: u64,
}

/// Result of one receive or timer event.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RxOutcome {
    /// `(sn, bytes)` handed to the application, ascending.
    pub delivered: Vec<(u64, u32)>,
    /// Set when a new reordering timer generation was armed.
    pub start_timer: Option<(u64, SimTime)>,
    /// `(sn, bytes)` dropped as duplicate or already passed.
    pub discarded: Option<(u64, u32)>,
}

#[derive(Debug, Clone)]
pub struct PdcpReceiveEntity {
    next_expected: u64,
    rx_next: u64,
    buffer: BTreeMap<u64, u32>,
    reorder_target: Option<u64>,
    timer_generation: u64,
    reorder_timer: SimTime,
    bound: usize,
    buffered_bytes: u64,
    pub counters: PdcpRxCounters,
}

impl PdcpReceiveEntity {
    pub fn new(reorder_timer: SimTime, bound: usize) -> Self {
        assert!(bound > 0);
        PdcpReceiveEntity {
            next_expected: 0,
            rx_next: 0,
            buffer: BTreeMap::new(),
            reorder_target: None,
            timer_generation: 0,
            reorder_timer,
            bound,
            buffered_bytes: 0,
            counters: PdcpRxCounters::default(),
        }
    }

    pub fn next_expected(&self) -> u64 {
        self.next_expected
    }

    pub fn buffered_pdus(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffered_bytes(&self) -> u64 {
        self.buffered_bytes
    }

    pub fn timer_running(&self) -> bool {
        self.reorder_target.is_some()
    }

    pub fn receive(&mut self, sn: u64, bytes: u32, t: SimTime) -> RxOutcome {
        let mut out = RxOutcome::default();
        if sn < self.next_expected || self.buffer.contains_key(&sn) {
            self.counters.late_pdus += 1;
            self.counters.late_bytes += bytes as u64;
            out.discarded = Some((sn, bytes));
            return out;
        }
        self.buffer.insert(sn, bytes);
        self.buffered_bytes += bytes as u64;
        if sn >= self.rx_next {
            self.rx_next = sn + 1;
        }
        if sn == self.next_expected {
            self.deliver_consecutive(&mut out);
        }
        while self.buffer.len() > self.bound {
            self.counters.overflow_releases += 1;
            let lowest = *self.buffer.keys().next().expect("non-empty");
            self.skip_to(lowest);
            self.deliver_consecutive(&mut out);
        }
        self.update_timer(t, &mut out);
        out
    }

    /// Handles expiry of timer generation `generation`; stale generations are ignored.
    pub fn on_timer(&mut self, generation: u64, t: SimTime) -> RxOutcome {
        let mut out = RxOutcome::default();
        let Some(target) = self.reorder_target else {
            return out;
        };
        if generation != self.timer_generation {
            return out;
        }
        self.reorder_target = None;
        // release everything below the target, skipping holes
        while let Some((&sn, _)) = self.buffer.iter().next() {
            if sn >= target {
                break;
            }
            self.skip_to(sn);
            self.deliver_consecutive(&mut out);
        }
        if self.next_expected < target {
            self.skip_to(target);
        }
        self.deliver_consecutive(&mut out);
        self.update_timer(t, &mut out);
        out
    }

    fn skip_to(&mut self, sn: u64) {
        if sn > self.next_expected {
            let missing = (self.next_expected..sn)
                .filter(|s| !self.buffer.contains_key(s))
                .count() as u64;
            self.counters.skipped_sns += missing;
            self.next_expected = sn;
        }
    }

    fn deliver_consecutive(&mut self, out: &mut RxOutcome) {
        while let Some(bytes) = self.buffer.remove(&self.next_expected) {
            self.buffered_bytes -= bytes as u64;
            self.counters.delivered_pdus += 1;
            self.counters.delivered_bytes += bytes as u64;
            out.delivered.push((self.next_expected, bytes));
            self.next_expected += 1;
        }
    }

    fn update_timer(&mut self, t: SimTime, out: &mut RxOutcome) {
        if let Some(target) = self.reorder_target {
            if target <= self.next_expected {
                self.reorder_target = None;
                self.timer_generation += 1;
            }
        }
        if self.reorder_target.is_none() && self.next_expected < self.rx_next {
            self.timer_generation += 1;
            self.reorder_target = Some(self.rx_next);
            out.start_timer = Some((self.timer_generation, t + self.reorder_timer));
        }
    }
}
