//! Splitting the symbols of a multiplexed trace into per-thread sets.
//!
//! Every periodic thread contributes its pattern symbols at the thread's
//! burst frequency, so a symbol shared by several threads shows up with
//! the *sum* of their frequencies. The splitter walks the DTMC and peels
//! symbols into sets by matching frequencies within a similarity band,
//! resolving shared symbols through their neighborhoods. Ambiguous sum
//! decompositions fork alternative partitions; a later validation pass
//! picks among them.

use crate::dtmc::Dtmc;
use crate::error::Error;
use crate::trace::SymbolId;
use std::collections::BTreeMap;
use std::path::Path;

pub const DEFAULT_T_SIM: f64 = 0.05;

/// Strict similarity band: `value` lies inside `reference * (1 ± t_sim)`.
/// Note the asymmetry: `reference` scales the band, `value` is tested.
pub fn freq_similar(reference: f64, value: f64, t_sim: f64) -> bool {
    reference * (1.0 - t_sim) < value && value < reference * (1.0 + t_sim)
}

/// One recovered thread: a frequency and its member symbols. A symbol that
/// occurs several times per burst carries an instance count > 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSet {
    pub id: usize,
    pub freq: f64,
    pub members: BTreeMap<SymbolId, u32>,
}

impl SymbolSet {
    pub fn instance_total(&self) -> u64 {
        self.members.values().map(|&m| m as u64).sum()
    }
}

/// One complete way of assigning every symbol to sets. `unclassified`
/// lists symbols whose frequency could not be fully explained, with the
/// unexplained remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub sets: Vec<SymbolSet>,
    pub unclassified: Vec<(SymbolId, f64)>,
}

impl Partition {
    pub fn instance_total(&self) -> u64 {
        self.sets.iter().map(SymbolSet::instance_total).sum()
    }
}

/// How many alternative partitions a run may keep alive.
const MAX_PARTITIONS: usize = 8;
/// Subset search in the fork step only looks at neighborhoods this small.
const MAX_FORK_ADJACENCY: usize = 16;
/// The residual sweep may stack at most this many set instances.
const MAX_RESIDUAL_INSTANCES: u32 = 4;

#[derive(Clone)]
struct SplitState {
    set_freqs: Vec<f64>,
    memberships: BTreeMap<SymbolId, BTreeMap<usize, u32>>,
    /// Original node frequency minus everything explained so far.
    residual: BTreeMap<SymbolId, f64>,
}

impl SplitState {
    fn new(dtmc: &Dtmc) -> Self {
        SplitState {
            set_freqs: Vec::new(),
            memberships: BTreeMap::new(),
            residual: dtmc.nodes().map(|(s, f)| (s, f as f64)).collect(),
        }
    }

    fn found_set(&mut self, freq: f64, v: SymbolId) -> usize {
        let id = self.set_freqs.len();
        self.set_freqs.push(freq);
        self.join(v, id, 1);
        id
    }

    fn join(&mut self, v: SymbolId, set_id: usize, mult: u32) {
        *self
            .memberships
            .entry(v)
            .or_default()
            .entry(set_id)
            .or_insert(0) += mult;
        *self.residual.get_mut(&v).unwrap() -= mult as f64 * self.set_freqs[set_id];
    }

    fn assigned(&self, v: SymbolId) -> bool {
        self.memberships.contains_key(&v)
    }

    fn in_set(&self, v: SymbolId, set_id: usize) -> bool {
        self.memberships
            .get(&v)
            .is_some_and(|m| m.contains_key(&set_id))
    }

    /// The set id of `v` if it belongs to exactly one set (any multiplicity).
    fn single_set(&self, v: SymbolId) -> Option<usize> {
        match self.memberships.get(&v) {
            Some(m) if m.len() == 1 => m.keys().next().copied(),
            _ => None,
        }
    }

    /// Existing set closest in frequency to `f` within the band.
    fn best_similar_set(&self, f: f64, t_sim: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (id, &sf) in self.set_freqs.iter().enumerate() {
            if freq_similar(sf, f, t_sim) {
                let err = (sf - f).abs();
                if best.map_or(true, |(be, _)| err < be) {
                    best = Some((err, id));
                }
            }
        }
        best.map(|(_, id)| id)
    }

    fn residual_of(&self, v: SymbolId) -> f64 {
        self.residual[&v]
    }

    /// Total unexplained frequency mass; lower is a better-fitting state.
    fn residual_sum_abs(&self) -> f64 {
        self.residual.values().map(|r| r.abs()).sum()
    }

    fn fingerprint(&self) -> Vec<(SymbolId, Vec<(usize, u32)>)> {
        self.memberships
            .iter()
            .map(|(&s, m)| (s, m.iter().map(|(&id, &c)| (id, c)).collect()))
            .collect()
    }
}

/// Runs the seven-step frequency split and returns 1..=8 candidate
/// partitions, best residual fit first.
pub fn split_symbol_sets(dtmc: &Dtmc, t_sim: f64) -> Vec<Partition> {
    let vertices: Vec<SymbolId> = dtmc.nodes().map(|(s, _)| s).collect();
    let mut st = SplitState::new(dtmc);

    step1_isolated_cycles(&mut st, dtmc, t_sim, &vertices);
    step2_half_anchored(&mut st, dtmc, t_sim, &vertices);
    step3_neighbor_sums(&mut st, dtmc, t_sim, &vertices);
    let mut states = step4_fork_subsets(st, dtmc, t_sim, &vertices);
    for s in &mut states {
        step5_sandwiched(s, dtmc, &vertices);
        step6_leftovers(s, &vertices);
        step7_residual_sweep(s, dtmc, t_sim, &vertices);
    }
    dedupe_and_rank(&mut states, MAX_PARTITIONS);

    states
        .into_iter()
        .map(|s| finish_partition(s, dtmc, t_sim, &vertices))
        .collect()
}

/// Step 1: a vertex with exactly one in-edge and one out-edge belongs to a
/// single thread for sure. It joins the closest frequency-similar set or
/// founds a new one at its own frequency.
fn step1_isolated_cycles(st: &mut SplitState, dtmc: &Dtmc, t_sim: f64, vertices: &[SymbolId]) {
    for &v in vertices {
        if dtmc.in_degree(v) == 1 && dtmc.out_degree(v) == 1 {
            let f = dtmc.freq(v).unwrap() as f64;
            match st.best_similar_set(f, t_sim) {
                Some(id) => st.join(v, id, 1),
                None => {
                    st.found_set(f, v);
                }
            }
        }
    }
}

/// Step 2: a vertex with a single in-edge *or* a single out-edge may join
/// an existing similar set, but is not confident enough to found one.
fn step2_half_anchored(st: &mut SplitState, dtmc: &Dtmc, t_sim: f64, vertices: &[SymbolId]) {
    for &v in vertices {
        if st.assigned(v) {
            continue;
        }
        if dtmc.in_degree(v) == 1 || dtmc.out_degree(v) == 1 {
            let f = dtmc.freq(v).unwrap() as f64;
            if let Some(id) = st.best_similar_set(f, t_sim) {
                st.join(v, id, 1);
            }
        }
    }
}

/// Step 3: a shared vertex should occur as often as all its per-thread
/// predecessors combined. If the set frequencies of its single-set
/// in-neighbors (counted per neighbor, so two predecessors from the same
/// set contribute twice) sum to the vertex frequency, it joins each
/// neighbor's set once per neighbor. Out-neighbors are the fallback.
fn step3_neighbor_sums(st: &mut SplitState, dtmc: &Dtmc, t_sim: f64, vertices: &[SymbolId]) {
    for &v in vertices {
        if st.assigned(v) {
            continue;
        }
        let f = dtmc.freq(v).unwrap() as f64;
        let sides: [&[SymbolId]; 2] = [dtmc.in_neighbors(v), dtmc.out_neighbors(v)];
        for side in sides {
            let anchored: Vec<usize> = side.iter().filter_map(|&u| st.single_set(u)).collect();
            if anchored.is_empty() {
                continue;
            }
            let sum: f64 = anchored.iter().map(|&id| st.set_freqs[id]).sum();
            if freq_similar(sum, f, t_sim) {
                for id in anchored {
                    st.join(v, id, 1);
                }
                break;
            }
        }
    }
}

/// Step 4: for a still-unassigned vertex, enumerate multiplicity vectors
/// over the sets of its single-set neighbors. A set can claim at most as
/// many instances as the vertex has in- plus out-links into it, because
/// every pass through the vertex enters or leaves via some neighbor. Each
/// vector whose weighted frequency sum lands in the band is a plausible
/// explanation, so each forks its own partition.
fn step4_fork_subsets(
    st: SplitState,
    dtmc: &Dtmc,
    t_sim: f64,
    vertices: &[SymbolId],
) -> Vec<SplitState> {
    let mut states = vec![st];
    for &v in vertices {
        let mut next: Vec<SplitState> = Vec::new();
        for st in &states {
            if st.assigned(v) {
                next.push(st.clone());
                continue;
            }
            let mut caps: BTreeMap<usize, u32> = BTreeMap::new();
            let mut links = 0usize;
            for &u in dtmc.in_neighbors(v).iter().chain(dtmc.out_neighbors(v)) {
                if let Some(id) = st.single_set(u) {
                    *caps.entry(id).or_insert(0) += 1;
                    links += 1;
                }
            }
            if caps.is_empty() || links > MAX_FORK_ADJACENCY {
                next.push(st.clone());
                continue;
            }
            let caps: Vec<(usize, u32)> = caps.into_iter().collect();
            let f = dtmc.freq(v).unwrap() as f64;
            let feasible = feasible_multiplicities(&caps, &st.set_freqs, f, t_sim);
            if feasible.is_empty() {
                next.push(st.clone());
                continue;
            }
            for combo in &feasible {
                let mut forked = st.clone();
                for &(id, mult) in combo {
                    forked.join(v, id, mult);
                }
                next.push(forked);
                if next.len() >= MAX_PARTITIONS * MAX_PARTITIONS {
                    break;
                }
            }
        }
        dedupe_and_rank(&mut next, MAX_PARTITIONS);
        states = next;
    }
    states
}

/// All multiplicity assignments `set -> k` (`k` within its link cap, not
/// all zero) whose weighted frequency sum lands in the band around
/// `target`. Best fit first; ties prefer fewer total instances, then the
/// lexicographically smaller vector.
fn feasible_multiplicities(
    caps: &[(usize, u32)],
    set_freqs: &[f64],
    target: f64,
    t_sim: f64,
) -> Vec<Vec<(usize, u32)>> {
    fn rec(
        caps: &[(usize, u32)],
        set_freqs: &[f64],
        target: f64,
        t_sim: f64,
        pos: usize,
        sum: f64,
        ks: &mut Vec<u32>,
        found: &mut Vec<(f64, u32, Vec<u32>)>,
    ) {
        if sum > target * (1.0 + t_sim) {
            return;
        }
        if pos == caps.len() {
            if ks.iter().any(|&k| k > 0) && freq_similar(target, sum, t_sim) {
                found.push(((sum - target).abs(), ks.iter().sum(), ks.clone()));
            }
            return;
        }
        for k in 0..=caps[pos].1 {
            ks.push(k);
            let step = k as f64 * set_freqs[caps[pos].0];
            rec(caps, set_freqs, target, t_sim, pos + 1, sum + step, ks, found);
            ks.pop();
        }
    }

    let mut found: Vec<(f64, u32, Vec<u32>)> = Vec::new();
    rec(caps, set_freqs, target, t_sim, 0, 0.0, &mut Vec::new(), &mut found);
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    found
        .into_iter()
        .map(|(_, _, ks)| {
            caps.iter()
                .zip(ks)
                .filter(|&(_, k)| k > 0)
                .map(|(&(id, _), k)| (id, k))
                .collect()
        })
        .collect()
}

/// Step 5: a vertex wedged on a path through one set (an in-neighbor and
/// an out-neighbor both in the set, at least one of them a confident
/// degree-(1,1) vertex) joins that set.
fn step5_sandwiched(st: &mut SplitState, dtmc: &Dtmc, vertices: &[SymbolId]) {
    for &v in vertices {
        if st.assigned(v) {
            continue;
        }
        for id in 0..st.set_freqs.len() {
            let deg11 =
                |u: SymbolId| dtmc.in_degree(u) == 1 && dtmc.out_degree(u) == 1;
            let ins = dtmc.in_neighbors(v).iter().filter(|&&u| st.in_set(u, id));
            let outs = dtmc.out_neighbors(v).iter().filter(|&&u| st.in_set(u, id));
            let has_in = ins.clone().next().is_some();
            let has_out = outs.clone().next().is_some();
            let anchored = ins.clone().any(|&u| deg11(u)) || outs.clone().any(|&u| deg11(u));
            if has_in && has_out && anchored {
                st.join(v, id, 1);
            }
        }
    }
}

/// Step 6: everything still unassigned is swept into one final set whose
/// frequency is the smallest member frequency.
fn step6_leftovers(st: &mut SplitState, vertices: &[SymbolId]) {
    let leftovers: Vec<SymbolId> = vertices
        .iter()
        .copied()
        .filter(|&v| !st.assigned(v))
        .collect();
    if leftovers.is_empty() {
        return;
    }
    let freq = leftovers
        .iter()
        .map(|&v| st.residual_of(v))
        .fold(f64::INFINITY, f64::min);
    let id = st.set_freqs.len();
    st.set_freqs.push(freq);
    for v in leftovers {
        st.join(v, id, 1);
    }
}

/// Step 7: a vertex whose frequency is still substantially unexplained
/// gets extra instance counts: find a small stack of existing sets whose
/// frequencies sum to the leftover and join once per instance.
fn step7_residual_sweep(st: &mut SplitState, dtmc: &Dtmc, t_sim: f64, vertices: &[SymbolId]) {
    for &v in vertices {
        let orig = dtmc.freq(v).unwrap() as f64;
        let r = st.residual_of(v);
        if r < t_sim * orig {
            continue;
        }
        if let Some(combo) = best_residual_combo(&st.set_freqs, r, t_sim) {
            for (id, mult) in combo {
                st.join(v, id, mult);
            }
        }
    }
}

/// Smallest-error multiset of set frequencies (at most
/// `MAX_RESIDUAL_INSTANCES` instances in total) summing into the band
/// around `target`. Ties prefer fewer instances, then lower set ids.
fn best_residual_combo(freqs: &[f64], target: f64, t_sim: f64) -> Option<Vec<(usize, u32)>> {
    let mut best: Option<(f64, u32, Vec<usize>)> = None;
    let mut stack: Vec<usize> = Vec::new();

    fn rec(
        freqs: &[f64],
        target: f64,
        t_sim: f64,
        start: usize,
        sum: f64,
        stack: &mut Vec<usize>,
        best: &mut Option<(f64, u32, Vec<usize>)>,
    ) {
        if !stack.is_empty() && freq_similar(sum, target, t_sim) {
            let err = (sum - target).abs();
            let len = stack.len() as u32;
            let better = match best {
                None => true,
                Some((be, bl, bs)) => {
                    err < *be || (err == *be && (len < *bl || (len == *bl && stack < bs)))
                }
            };
            if better {
                *best = Some((err, len, stack.clone()));
            }
        }
        if stack.len() == MAX_RESIDUAL_INSTANCES as usize {
            return;
        }
        for id in start..freqs.len() {
            stack.push(id);
            rec(freqs, target, t_sim, id, sum + freqs[id], stack, best);
            stack.pop();
        }
    }

    rec(freqs, target, t_sim, 0, 0.0, &mut stack, &mut best);
    best.map(|(_, _, ids)| {
        let mut combo: Vec<(usize, u32)> = Vec::new();
        for id in ids {
            match combo.last_mut() {
                Some((last, mult)) if *last == id => *mult += 1,
                _ => combo.push((id, 1)),
            }
        }
        combo
    })
}

fn dedupe_and_rank(states: &mut Vec<SplitState>, cap: usize) {
    let mut seen = Vec::new();
    states.retain(|s| {
        let fp = s.fingerprint();
        if seen.contains(&fp) {
            false
        } else {
            seen.push(fp);
            true
        }
    });
    states.sort_by(|a, b| a.residual_sum_abs().total_cmp(&b.residual_sum_abs()));
    states.truncate(cap);
}

fn finish_partition(
    st: SplitState,
    dtmc: &Dtmc,
    t_sim: f64,
    vertices: &[SymbolId],
) -> Partition {
    let sets = st
        .set_freqs
        .iter()
        .enumerate()
        .map(|(id, &freq)| SymbolSet {
            id,
            freq,
            members: st
                .memberships
                .iter()
                .filter_map(|(&s, m)| m.get(&id).map(|&c| (s, c)))
                .collect(),
        })
        .collect();
    let unclassified = vertices
        .iter()
        .filter_map(|&v| {
            let r = st.residual_of(v);
            let orig = dtmc.freq(v).unwrap() as f64;
            (r >= t_sim * orig && r > 0.0).then_some((v, r))
        })
        .collect();
    Partition { sets, unclassified }
}

/// Fraction of true thread instances recovered, maximized over an
/// injective matching of found sets to true sets. 1.0 means every set was
/// recovered with at least the true multiplicities.
pub fn partition_accuracy(found: &Partition, truth: &Partition) -> f64 {
    let total_true: u64 = truth.sets.iter().map(SymbolSet::instance_total).sum();
    if total_true == 0 {
        return 1.0;
    }
    let overlap = |f: &SymbolSet, t: &SymbolSet| -> u64 {
        t.members
            .iter()
            .map(|(s, &tm)| tm.min(f.members.get(s).copied().unwrap_or(0)) as u64)
            .sum()
    };

    let nf = found.sets.len();
    let matched = if nf <= 16 {
        // Exact assignment via subset DP over found sets.
        let full = 1usize << nf;
        let mut dp = vec![0u64; full];
        for t in &truth.sets {
            let mut next = dp.clone();
            for mask in 0..full {
                for (j, f) in found.sets.iter().enumerate() {
                    if mask & (1 << j) == 0 {
                        let cand = dp[mask] + overlap(f, t);
                        let m2 = mask | (1 << j);
                        if cand > next[m2] {
                            next[m2] = cand;
                        }
                    }
                }
            }
            dp = next;
        }
        dp.into_iter().max().unwrap_or(0)
    } else {
        // Too many sets for the exact search: greedy by frequency order.
        let mut fs: Vec<&SymbolSet> = found.sets.iter().collect();
        let mut ts: Vec<&SymbolSet> = truth.sets.iter().collect();
        fs.sort_by(|a, b| b.freq.total_cmp(&a.freq).then(a.id.cmp(&b.id)));
        ts.sort_by(|a, b| b.freq.total_cmp(&a.freq).then(a.id.cmp(&b.id)));
        fs.iter().zip(ts.iter()).map(|(f, t)| overlap(f, t)).sum()
    };

    matched as f64 / total_true as f64
}

/// True when the partitions agree exactly: same sets, same members, same
/// instance multiplicities (set ids and frequency estimates aside).
pub fn partition_matches_exactly(found: &Partition, truth: &Partition) -> bool {
    partition_accuracy(found, truth) == 1.0 && found.instance_total() == truth.instance_total()
}

/// Writes a partition as `set_id,freq,symbol,instances` CSV.
pub fn write_partition_dump(p: &Partition, path: &Path) -> Result<(), Error> {
    let mut out = String::from("set_id,freq,symbol,instances\n");
    for set in &p.sets {
        for (sym, mult) in &set.members {
            out.push_str(&format!("{},{},{sym},{mult}\n", set.id, set.freq));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
