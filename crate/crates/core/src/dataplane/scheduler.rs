//! Round-robin resource split with primary-connection priority.

use crate::ids::UeId;

/// Splits `capacity` REs equally over the non-zero `needs` (water-filling:
/// a UE never gets more than it needs and the excess is re-shared). Any
/// indivisible remainder goes one RE at a time to unsatisfied UEs in cyclic
/// order starting at index `start`.
pub fn round_robin_shares(capacity: u32, needs: &[u32], start: usize) -> Vec<u32> {
    let n = needs.len();
    let mut alloc = vec![0u32; n];
    if n == 0 {
        return alloc;
    }
    let start = start % n;
    // cyclic order from `start`
    let mut active: Vec<usize> = (0..n).map(|k| (start + k) % n).filter(|&i| needs[i] > 0).collect();
    let mut cap = capacity;
    while cap > 0 && !active.is_empty() {
        let share = cap / active.len() as u32;
        if share > 0 {
            let before = active.len();
            active.retain(|&i| {
                let want = needs[i] - alloc[i];
                if want <= share {
                    alloc[i] += want;
                    cap -= want;
                    false
                } else {
                    true
                }
            });
            if active.len() < before {
                continue;
            }
            for &i in &active {
                alloc[i] += share;
            }
            cap -= share * active.len() as u32;
        }
        for &i in &active {
            if cap == 0 {
                break;
            }
            alloc[i] += 1;
            cap -= 1;
        }
        active.retain(|&i| alloc[i] < needs[i]);
        if share == 0 {
            break;
        }
    }
    alloc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demand {
    pub ue: UeId,
    pub need_res: u32,
    pub primary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub ue: UeId,
    pub res: u32,
    pub primary: bool,
}

/// One TTI worth of grants. With `primary_priority`, every primary demand is
/// served before secondaries see any leftover.
pub fn allocate_tti(capacity: u32, demands: &[Demand], rr_start: usize, primary_priority: bool) -> Vec<Grant> {
    let mut grants = Vec::with_capacity(demands.len());
    let mut split = |cap: u32, class: &[&Demand]| -> u32 {
        let needs: Vec<u32> = class.iter().map(|d| d.need_res).collect();
        let shares = round_robin_shares(cap, &needs, rr_start);
        let mut used = 0;
        for (d, res) in class.iter().zip(shares) {
            if res > 0 {
                used += res;
                grants.push(Grant {
                    ue: d.ue,
                    res,
                    primary: d.primary,
                });
            }
        }
        used
    };
    if primary_priority {
        let primaries: Vec<&Demand> = demands.iter().filter(|d| d.primary).collect();
        let secondaries: Vec<&Demand> = demands.iter().filter(|d| !d.primary).collect();
        let used = split(capacity, &primaries);
        split(capacity - used, &secondaries);
    } else {
        let all: Vec<&Demand> = demands.iter().collect();
        split(capacity, &all);
    }
    grants
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ue_takes_everything() {
        assert_eq!(round_robin_shares(8736, &[u32::MAX], 0), vec![8736]);
    }

    #[test]
    fn never_over_allocates() {
        assert_eq!(round_robin_shares(100, &[10, 500, 20], 0), vec![10, 70, 20]);
        assert_eq!(round_robin_shares(100, &[10, 20], 0), vec![10, 20]);
        assert_eq!(round_robin_shares(0, &[10, 20], 0), vec![0, 0]);
        assert_eq!(round_robin_shares(2, &[5, 5, 5], 1), vec![0, 1, 1]);
    }

    #[test]
    fn two_deep_primaries_split_evenly_over_10_ttis() {
        // odd capacity so the remainder RE rotates
        let cap = 8737;
        let mut totals = [0u64; 2];
        for tti in 0..10 {
            let g = round_robin_shares(cap, &[u32::MAX, u32::MAX], tti);
            totals[0] += g[0] as u64;
            totals[1] += g[1] as u64;
            assert_eq!(g[0] + g[1], cap);
        }
        assert!(totals[0].abs_diff(totals[1]) <= 1, "{totals:?}");
    }

    #[test]
    fn saturated_primaries_starve_secondaries() {
        let demands = [
            Demand {
                ue: UeId(1),
                need_res: 9000,
                primary: true,
            },
            Demand {
                ue: UeId(2),
                need_res: 500,
                primary: false,
            },
        ];
        let g = allocate_tti(8736, &demands, 0, true);
        assert_eq!(
            g,
            vec![Grant {
                ue: UeId(1),
                res: 8736,
                primary: true
            }]
        );

        let demands = [
            Demand {
                ue: UeId(1),
                need_res: 1000,
                primary: true,
            },
            Demand {
                ue: UeId(2),
                need_res: 9000,
                primary: false,
            },
        ];
        let g = allocate_tti(8736, &demands, 0, true);
        assert_eq!(
            g[1],
            Grant {
                ue: UeId(2),
                res: 7736,
                primary: false
            }
        );
    }
}
