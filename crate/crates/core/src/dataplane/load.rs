use std::collections::VecDeque;

/// Trailing-window RE utilisation of one node.
#[derive(Debug, Clone)]
pub struct LoadTracker {
    window_ttis: usize,
    capacity_per_tti: u32,
    samples: VecDeque<(u32, u32)>,
    sum_total: u64,
    sum_primary: u64,
}

impl LoadTracker {
    pub fn new(window_ttis: usize, capacity_per_tti: u32) -> Self {
        assert!(window_ttis > 0, "load window must be positive");
        LoadTracker {
            window_ttis,
            capacity_per_tti,
            samples: VecDeque::with_capacity(window_ttis),
            sum_total: 0,
            sum_primary: 0,
        }
    }

    pub fn record(&mut self, granted: u32, primary_granted: u32) {
        debug_assert!(primary_granted <= granted && granted <= self.capacity_per_tti);
        if self.samples.len() == self.window_ttis {
            let (t, p) = self.samples.pop_front().expect("full window");
            self.sum_total -= t as u64;
            self.sum_primary -= p as u64;
        }
        self.samples.push_back((granted, primary_granted));
        self.sum_total += granted as u64;
        self.sum_primary += primary_granted as u64;
    }

    pub fn capacity_per_tti(&self) -> u32 {
        self.capacity_per_tti
    }

    fn denom(&self) -> f64 {
        (self.window_ttis as u64 * self.capacity_per_tti as u64) as f64
    }

    /// Fraction of the window's REs granted to anyone; TTIs not yet seen count as idle.
    pub fn load(&self) -> f64 {
        self.sum_total as f64 / self.denom()
    }

    /// Fraction granted to primary-connection UEs.
    pub fn primary_load(&self) -> f64 {
        self.sum_primary as f64 / self.denom()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_is_zero() {
        let t = LoadTracker::new(100, 8736);
        assert_eq!(t.load(), 0.0);
    }

    #[test]
    fn saturated_is_one() {
        let mut t = LoadTracker::new(100, 8736);
        for _ in 0..250 {
            t.record(8736, 0);
        }
        assert_eq!(t.load(), 1.0);
        assert_eq!(t.primary_load(), 0.0);
    }

    #[test]
    fn half_busy_window() {
        let mut t = LoadTracker::new(100, 8736);
        for i in 0..300 {
            if i % 2 == 0 {
                t.record(8736, 8736);
            } else {
                t.record(0, 0);
            }
        }
        assert!((t.load() - 0.5).abs() < 1e-12);
        assert!((t.primary_load() - 0.5).abs() < 1e-12);
    }
}
