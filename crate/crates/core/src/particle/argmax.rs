//! Incremental `argmax*` tracking: occupancy buckets holding the sites at
//! each level in total order, so the most populated site (ties broken by
//! `<=_to`, which coincides with linear index order) is always at hand.

use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct ArgmaxTracker {
    /// `buckets[k]` holds the sites with occupancy exactly `k` (k >= 1).
    buckets: Vec<BTreeSet<u32>>,
    occupancy: Vec<u32>,
    max_level: usize,
}

impl ArgmaxTracker {
    pub fn new(counts: &[u32]) -> Self {
        let max = counts.iter().cloned().max().unwrap_or(0) as usize;
        let mut buckets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); max + 1];
        for (site, &c) in counts.iter().enumerate() {
            if c > 0 {
                buckets[c as usize].insert(site as u32);
            }
        }
        ArgmaxTracker { buckets, occupancy: counts.to_vec(), max_level: max }
    }

    pub fn increment(&mut self, site: usize) {
        let level = self.occupancy[site] as usize;
        if level > 0 {
            self.buckets[level].remove(&(site as u32));
        }
        let next = level + 1;
        if next >= self.buckets.len() {
            self.buckets.resize(next + 1, BTreeSet::new());
        }
        self.buckets[next].insert(site as u32);
        self.occupancy[site] = next as u32;
        if next > self.max_level {
            self.max_level = next;
        }
    }

    pub fn decrement(&mut self, site: usize) {
        let level = self.occupancy[site] as usize;
        debug_assert!(level > 0, "decrement of empty site");
        self.buckets[level].remove(&(site as u32));
        let next = level - 1;
        if next > 0 {
            self.buckets[next].insert(site as u32);
        }
        self.occupancy[site] = next as u32;
        while self.max_level > 0 && self.buckets[self.max_level].is_empty() {
            self.max_level -= 1;
        }
    }

    pub fn occupancy(&self, site: usize) -> u32 {
        self.occupancy[site]
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// The most populated site, least in the total order among ties.
    /// `None` on an empty population.
    pub fn argmax_star(&self) -> Option<usize> {
        if self.max_level == 0 {
            return None;
        }
        self.buckets[self.max_level].first().map(|&s| s as usize)
    }
}

/// Reference implementation: linear scan with the same tie-break.
pub fn brute_force_argmax(counts: &[u32]) -> Option<usize> {
    let mut best: Option<(u32, usize)> = None;
    for (site, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        match best {
            Some((bc, _)) if bc >= c => {}
            _ => best = Some((c, site)),
        }
    }
    best.map(|(_, s)| s)
}
