//! Scenario difficulty metrics.

use crate::generator::{GroundTruth, ThreadSpec};
use std::collections::BTreeMap;

/// Fraction of pattern slots holding a symbol that no other thread uses.
/// 1.0 means fully disjoint patterns; lower values mean more sharing.
pub fn symbol_uniqueness(threads: &[ThreadSpec]) -> f64 {
    let mut thread_count: BTreeMap<crate::trace::SymbolId, usize> = BTreeMap::new();
    for th in threads {
        let mut distinct = th.pattern.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for s in distinct {
            *thread_count.entry(s).or_insert(0) += 1;
        }
    }
    let total_slots: usize = threads.iter().map(|t| t.pattern.len()).sum();
    if total_slots == 0 {
        return 0.0;
    }
    let unique_slots: usize = threads
        .iter()
        .flat_map(|t| t.pattern.iter())
        .filter(|s| thread_count[s] == 1)
        .count();
    unique_slots as f64 / total_slots as f64
}

/// Percentage of occupied schedule milliseconds that more than one thread
/// wanted, measured on the jitter-free nominal schedule, before wire
/// serialization. High overlap means heavy interleaving pressure.
pub fn time_overlap_pct(gt: &GroundTruth) -> f64 {
    let mut per_slot: BTreeMap<u64, u32> = BTreeMap::new();
    for r in &gt.records {
        *per_slot.entry(r.nominal_ms).or_insert(0) += 1;
    }
    if per_slot.is_empty() {
        return 0.0;
    }
    let contended = per_slot.values().filter(|&&c| c >= 2).count();
    100.0 * contended as f64 / per_slot.len() as f64
}
