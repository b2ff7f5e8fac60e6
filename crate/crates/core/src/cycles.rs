//! Reconstructing a thread's cyclic symbol pattern from its set.
//!
//! The induced subgraph of a correctly split set should be one Euler
//! cycle: every burst walks each edge once. Interleaving noise leaves two
//! kinds of damage, spurious low-count edges and missing wrap-around
//! edges, which get repaired before the cycle search. When several Euler
//! cycles explain the same set, all of them are returned as alternatives
//! and a validation pass downstream picks the winner.

use crate::dtmc::Dtmc;
use crate::error::Error;
use crate::split::SymbolSet;
use crate::trace::SymbolId;
use std::collections::BTreeMap;

pub const DEFAULT_T_MED: f64 = 0.05;
pub const MAX_ALTERNATIVES: usize = 4;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EdgeWeight {
    /// Bigram count carried over from the DTMC (repair edges get the
    /// current minimum).
    pub count: u64,
    /// Parallel-edge multiplicity: how often the pair is walked per burst.
    pub multi: u32,
}

/// The directed multigraph induced by one symbol set.
#[derive(Clone, Debug)]
pub struct CycleSubgraph {
    pub set_id: usize,
    pub vertices: Vec<(SymbolId, u32)>,
    pub edges: BTreeMap<(SymbolId, SymbolId), EdgeWeight>,
}

impl CycleSubgraph {
    pub fn in_degree(&self, v: SymbolId) -> u32 {
        self.edges
            .iter()
            .filter(|&(&(_, t), _)| t == v)
            .map(|(_, w)| w.multi)
            .sum()
    }

    pub fn out_degree(&self, u: SymbolId) -> u32 {
        self.edges
            .range((u, SymbolId(0))..=(u, SymbolId(u64::MAX)))
            .map(|(_, w)| w.multi)
            .sum()
    }

    /// Total directed edges counting multiplicity; equals the length of
    /// any Euler cycle.
    pub fn edge_total(&self) -> u32 {
        self.edges.values().map(|w| w.multi).sum()
    }

    /// True when every vertex's in- and out-degree both equal its
    /// instance count: the graph holds exactly one burst's worth of
    /// edges and needs no repair.
    pub fn degrees_match_instances(&self) -> bool {
        self.vertices
            .iter()
            .all(|&(v, m)| self.in_degree(v) == m && self.out_degree(v) == m)
    }
}

/// Induces the subgraph of DTMC edges whose endpoints both lie in `set`.
///
/// An edge whose count is a clean multiple of the set frequency was
/// walked several times per burst and enters as that many parallel
/// copies, capped by its endpoints' instance counts.
pub fn build_subgraph(dtmc: &Dtmc, set: &SymbolSet) -> CycleSubgraph {
    let edges = dtmc
        .edges()
        .filter(|((u, v), _)| set.members.contains_key(u) && set.members.contains_key(v))
        .map(|((u, v), e)| {
            let cap = set.members[&u].min(set.members[&v]).max(1);
            let multi = if set.freq > 0.0 {
                ((e.count as f64 / set.freq).round() as u32).clamp(1, cap)
            } else {
                1
            };
            ((u, v), EdgeWeight { count: e.count, multi })
        })
        .collect();
    CycleSubgraph {
        set_id: set.id,
        vertices: set.members.iter().map(|(&s, &m)| (s, m)).collect(),
        edges,
    }
}

fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// Drops edges whose count falls outside the median band
/// `m * (1 ± t_med)`: counts well below the median are stray interleaving
/// bigrams, counts well above it are cross-burst artifacts.
///
/// An edge is kept, band or not, when it is the last edge touching one of
/// its endpoints: an isolated vertex can never be repaired afterwards
/// (missed-edge repair only pairs degree-imbalanced vertices, and an
/// isolated vertex is perfectly balanced), so that drop would silently
/// write the symbol out of its own cycle.
pub fn drop_redundant_edges(g: &CycleSubgraph, t_med: f64) -> Result<CycleSubgraph, Error> {
    if g.edges.is_empty() {
        return Err(Error::EmptyEdgeSet { set_id: g.set_id });
    }
    let mut counts: Vec<u64> = g.edges.values().map(|w| w.count).collect();
    counts.sort_unstable();
    let m = median(&counts);
    let (lo, hi) = (m * (1.0 - t_med), m * (1.0 + t_med));
    let mut edges = g.edges.clone();
    // Weakest offenders go first so the survivors decide what counts as
    // a last edge.
    let mut outside: Vec<((SymbolId, SymbolId), u64)> = edges
        .iter()
        .filter(|(_, w)| {
            let c = w.count as f64;
            c < lo || c > hi
        })
        .map(|(&k, w)| (k, w.count))
        .collect();
    outside.sort_unstable_by_key(|&(k, c)| (c, k));
    for ((u, v), _) in outside {
        let touches = |x: SymbolId| edges.keys().filter(|&&(a, b)| a == x || b == x).count();
        if touches(u) > 1 && touches(v) > 1 {
            edges.remove(&(u, v));
        }
    }
    Ok(CycleSubgraph {
        set_id: g.set_id,
        vertices: g.vertices.clone(),
        edges,
    })
}

/// Completions may wire missing edges several ways; keep at most this many.
const MAX_COMPLETIONS: usize = 4;
/// Above this many missing edges per side, fall back to a single greedy
/// wiring instead of enumerating pairings.
const MAX_COMPLETION_SLOTS: usize = 6;

/// Re-adds edges the rare-bigram filter ate. Every vertex owes one in- and
/// one out-edge per instance, so each shortfall opens a slot; completion
/// pairs open out-slots with open in-slots. The degrees alone cannot tell
/// which wiring the thread actually used, so every distinct pairing (up to
/// a cap, fewest self-loops first) is returned as an alternative graph for
/// validation to arbitrate. A vertex whose degree already exceeds its
/// quota cannot be fixed by adding edges; such graphs are returned
/// unchanged and left for the Euler check to reject.
pub fn add_missed_edges(g: &CycleSubgraph) -> Vec<CycleSubgraph> {
    let Some(min_count) = g.edges.values().map(|w| w.count).min() else {
        return vec![g.clone()];
    };
    let overshot = g
        .vertices
        .iter()
        .any(|&(v, m)| g.in_degree(v) > m || g.out_degree(v) > m);
    if overshot {
        return vec![g.clone()];
    }
    let mut out_slots: Vec<SymbolId> = Vec::new();
    let mut in_slots: Vec<SymbolId> = Vec::new();
    for &(v, m) in &g.vertices {
        for _ in g.out_degree(v)..m {
            out_slots.push(v);
        }
        for _ in g.in_degree(v)..m {
            in_slots.push(v);
        }
    }
    // Every edge contributes one out- and one in-degree, so without an
    // overshoot the two slot lists are equally long.
    debug_assert_eq!(out_slots.len(), in_slots.len());
    if out_slots.is_empty() {
        return vec![g.clone()];
    }

    let materialize = |added: &BTreeMap<(SymbolId, SymbolId), u32>| {
        let mut g2 = g.clone();
        for (&k, &mult) in added {
            g2.edges
                .entry(k)
                .and_modify(|w| w.multi += mult)
                .or_insert(EdgeWeight { count: min_count, multi: mult });
        }
        g2
    };

    if out_slots.len() > MAX_COMPLETION_SLOTS {
        // Too many holes to enumerate: wire slot i to slot i, rotating the
        // in-side by one when that would close a self-loop.
        let mut added: BTreeMap<(SymbolId, SymbolId), u32> = BTreeMap::new();
        let n = in_slots.len();
        for (i, &a) in out_slots.iter().enumerate() {
            let b = if in_slots[i] != a || n == 1 {
                in_slots[i]
            } else {
                in_slots[(i + 1) % n]
            };
            *added.entry((a, b)).or_insert(0) += 1;
        }
        return vec![materialize(&added)];
    }

    // Enumerate distinct pairings of out-slots to in-slots.
    fn pair_up(
        out_slots: &[SymbolId],
        in_slots: &[SymbolId],
        used: &mut Vec<bool>,
        added: &mut BTreeMap<(SymbolId, SymbolId), u32>,
        pos: usize,
        found: &mut Vec<BTreeMap<(SymbolId, SymbolId), u32>>,
    ) {
        if pos == out_slots.len() {
            if !found.contains(added) {
                found.push(added.clone());
            }
            return;
        }
        let a = out_slots[pos];
        let mut tried: Vec<SymbolId> = Vec::new();
        for j in 0..in_slots.len() {
            let b = in_slots[j];
            if used[j] || tried.contains(&b) {
                continue;
            }
            tried.push(b);
            used[j] = true;
            *added.entry((a, b)).or_insert(0) += 1;
            pair_up(out_slots, in_slots, used, added, pos + 1, found);
            match added.get_mut(&(a, b)) {
                Some(m) if *m > 1 => *m -= 1,
                _ => {
                    added.remove(&(a, b));
                }
            }
            used[j] = false;
        }
    }

    let mut pairings: Vec<BTreeMap<(SymbolId, SymbolId), u32>> = Vec::new();
    pair_up(
        &out_slots,
        &in_slots,
        &mut vec![false; in_slots.len()],
        &mut BTreeMap::new(),
        0,
        &mut pairings,
    );
    let self_loops = |added: &BTreeMap<(SymbolId, SymbolId), u32>| -> u32 {
        added
            .iter()
            .filter(|&(&(a, b), _)| a == b)
            .map(|(_, &m)| m)
            .sum()
    };
    pairings.sort_by(|x, y| {
        self_loops(x).cmp(&self_loops(y)).then_with(|| {
            let xe: Vec<_> = x.iter().collect();
            let ye: Vec<_> = y.iter().collect();
            xe.cmp(&ye)
        })
    });
    pairings.truncate(MAX_COMPLETIONS);
    pairings.iter().map(materialize).collect()
}

/// Alternative cleanup for heavily diluted sets, where interleaving noise
/// drags true counts so far apart that no median band separates them:
/// greedily keep the strongest edges that still fit. Every vertex offers
/// one in-slot and one out-slot per instance; edges claim slots in
/// descending count order (key order on ties) and as many parallel copies
/// as both endpoints have free. Slots the observed edges cannot fill are
/// left for `add_missed_edges`.
pub fn keep_dominant_edges(g: &CycleSubgraph) -> CycleSubgraph {
    let mult: BTreeMap<SymbolId, u32> = g.vertices.iter().copied().collect();
    let mut order: Vec<(&(SymbolId, SymbolId), &EdgeWeight)> = g.edges.iter().collect();
    order.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(a.0.cmp(b.0)));
    let mut out_used: BTreeMap<SymbolId, u32> = BTreeMap::new();
    let mut in_used: BTreeMap<SymbolId, u32> = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for (&(u, v), w) in order {
        let free_out = mult.get(&u).copied().unwrap_or(0) - out_used.get(&u).copied().unwrap_or(0);
        let free_in = mult.get(&v).copied().unwrap_or(0) - in_used.get(&v).copied().unwrap_or(0);
        let take = w.multi.min(free_out).min(free_in);
        if take > 0 {
            *out_used.entry(u).or_insert(0) += take;
            *in_used.entry(v).or_insert(0) += take;
            edges.insert((u, v), EdgeWeight { count: w.count, multi: take });
        }
    }
    CycleSubgraph {
        set_id: g.set_id,
        vertices: g.vertices.clone(),
        edges,
    }
}

/// Enumerates up to `max_alternatives` distinct Euler cycles of `g`.
///
/// Returns an empty list when no cycle can represent the whole set: a
/// pattern visits each symbol exactly as often as its instance count, so
/// every vertex must have in-degree and out-degree equal to its
/// multiplicity and the graph must be weakly connected. Cycles are
/// canonicalized to start at the first occurrence of their smallest
/// symbol; alternatives come from varying the start vertex and the
/// direction sub-tours are stitched in.
pub fn euler_cycles(g: &CycleSubgraph, max_alternatives: usize) -> Vec<Vec<SymbolId>> {
    if g.vertices.is_empty() || !g.degrees_match_instances() {
        return Vec::new();
    }
    let mut active: Vec<SymbolId> = g.vertices.iter().map(|&(v, _)| v).collect();
    active.sort_unstable();
    active.dedup();
    if !weakly_connected(g, &active) {
        return Vec::new();
    }

    let mut cycles: Vec<Vec<SymbolId>> = Vec::new();
    'outer: for &start in &active {
        for ascending_first in [true, false] {
            let tour = hierholzer(g, start, ascending_first);
            debug_assert_eq!(tour.len(), g.edge_total() as usize);
            let canon = canonicalize(tour);
            if !cycles.contains(&canon) {
                cycles.push(canon);
                if cycles.len() == max_alternatives {
                    break 'outer;
                }
            }
        }
    }
    cycles
}

fn weakly_connected(g: &CycleSubgraph, active: &[SymbolId]) -> bool {
    let mut undirected: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    for &(u, v) in g.edges.keys() {
        undirected.entry(u).or_default().push(v);
        undirected.entry(v).or_default().push(u);
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![active[0]];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        if let Some(next) = undirected.get(&v) {
            stack.extend(next.iter().copied());
        }
    }
    active.iter().all(|v| seen.contains(v))
}

fn hierholzer(g: &CycleSubgraph, start: SymbolId, ascending_first: bool) -> Vec<SymbolId> {
    // Targets are popped from the back, so store them reversed for the
    // ascending orientation.
    let mut adj: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    for (&(u, v), w) in &g.edges {
        let list = adj.entry(u).or_default();
        for _ in 0..w.multi {
            list.push(v);
        }
    }
    if ascending_first {
        for list in adj.values_mut() {
            list.reverse();
        }
    }

    let mut stack = vec![start];
    let mut tour = Vec::with_capacity(g.edge_total() as usize + 1);
    while let Some(&v) = stack.last() {
        match adj.get_mut(&v).and_then(Vec::pop) {
            Some(next) => stack.push(next),
            None => {
                tour.push(v);
                stack.pop();
            }
        }
    }
    tour.reverse();
    tour.pop(); // drop the duplicated start at the wrap-around
    tour
}

/// Rotates a cyclic tour so its smallest symbol's first occurrence leads.
/// Only the phase is normalized; distinct visit orders stay distinct.
fn canonicalize(mut tour: Vec<SymbolId>) -> Vec<SymbolId> {
    if let Some(&min) = tour.iter().min() {
        let idx = tour.iter().position(|&s| s == min).unwrap();
        tour.rotate_left(idx);
    }
    tour
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(x: u64) -> SymbolId {
        SymbolId(x)
    }

    fn graph(vertices: &[(u64, u32)], edges: &[(u64, u64, u64)]) -> CycleSubgraph {
        CycleSubgraph {
            set_id: 0,
            vertices: vertices.iter().map(|&(v, m)| (sid(v), m)).collect(),
            edges: edges
                .iter()
                .map(|&(u, v, c)| ((sid(u), sid(v)), EdgeWeight { count: c, multi: 1 }))
                .collect(),
        }
    }

    fn cycle_syms(c: &[u64]) -> Vec<SymbolId> {
        c.iter().map(|&s| sid(s)).collect()
    }

    #[test]
    fn triangle_has_one_canonical_cycle() {
        let g = graph(&[(1, 1), (2, 1), (3, 1)], &[(1, 2, 5), (2, 3, 5), (3, 1, 5)]);
        assert_eq!(euler_cycles(&g, 4), vec![cycle_syms(&[1, 2, 3])]);
    }

    #[test]
    fn figure_eight_yields_both_visit_orders() {
        let g = graph(
            &[(1, 2), (2, 1), (3, 1)],
            &[(1, 2, 5), (2, 1, 5), (1, 3, 5), (3, 1, 5)],
        );
        let cycles = euler_cycles(&g, 4);
        assert_eq!(cycles.len(), 2);
        assert!(cycles.contains(&cycle_syms(&[1, 2, 1, 3])));
        assert!(cycles.contains(&cycle_syms(&[1, 3, 1, 2])));
    }

    #[test]
    fn repeated_visits_come_from_distinct_edges() {
        // w -> P -> Q -> P -> (wrap): P appears twice per burst.
        let g = graph(
            &[(1, 1), (8, 2), (9, 1)],
            &[(1, 8, 7), (8, 9, 7), (9, 8, 7), (8, 1, 7)],
        );
        assert_eq!(euler_cycles(&g, 4), vec![cycle_syms(&[1, 8, 9, 8])]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let g = graph(&[(4, 1)], &[(4, 4, 9)]);
        assert_eq!(euler_cycles(&g, 4), vec![cycle_syms(&[4])]);
    }

    #[test]
    fn unbalanced_or_disconnected_graphs_have_no_cycle() {
        let unbalanced = graph(&[(1, 1), (2, 1)], &[(1, 2, 5)]);
        assert!(euler_cycles(&unbalanced, 4).is_empty());

        let disconnected = graph(
            &[(1, 1), (2, 1), (3, 1), (4, 1)],
            &[(1, 2, 5), (2, 1, 5), (3, 4, 5), (4, 3, 5)],
        );
        assert!(euler_cycles(&disconnected, 4).is_empty());
    }

    #[test]
    fn median_band_drops_outliers_only() {
        let g = graph(
            &[(1, 1), (2, 1), (3, 1), (4, 1)],
            &[(1, 2, 100), (2, 3, 100), (3, 4, 100), (4, 1, 5)],
        );
        let cleaned = drop_redundant_edges(&g, 0.05).unwrap();
        assert_eq!(cleaned.edges.len(), 3);
        assert!(!cleaned.edges.contains_key(&(sid(4), sid(1))));

        // All-equal counts survive untouched.
        let g2 = graph(&[(1, 1), (2, 1)], &[(1, 2, 7), (2, 1, 7)]);
        assert_eq!(drop_redundant_edges(&g2, 0.05).unwrap().edges.len(), 2);

        // A doubled-count edge sits above the band and is dropped too.
        let g3 = graph(
            &[(1, 1), (2, 1), (3, 1)],
            &[(1, 2, 50), (2, 3, 50), (3, 1, 100)],
        );
        let cleaned3 = drop_redundant_edges(&g3, 0.05).unwrap();
        assert!(!cleaned3.edges.contains_key(&(sid(3), sid(1))));
    }

    #[test]
    fn median_band_never_isolates_a_vertex() {
        // (1,2) is far below the band but is vertex 1's only edge; the
        // wrap 4 -> 1 has not been observed yet, so dropping it would
        // erase 1 from the cycle for good.
        let g = graph(
            &[(1, 1), (2, 1), (3, 1), (4, 1)],
            &[(1, 2, 5), (2, 3, 100), (3, 4, 100), (4, 2, 100)],
        );
        let cleaned = drop_redundant_edges(&g, 0.05).unwrap();
        assert!(cleaned.edges.contains_key(&(sid(1), sid(2))));
    }

    #[test]
    fn cycles_must_visit_every_set_member() {
        // 1 -> 2 -> 1 is Eulerian, but vertex 9 belongs to the set and
        // has no edges left; no cycle can represent this set.
        let g = graph(&[(1, 1), (2, 1), (9, 1)], &[(1, 2, 5), (2, 1, 5)]);
        assert!(euler_cycles(&g, 4).is_empty());
    }

    #[test]
    fn empty_edge_sets_error() {
        let g = graph(&[(1, 1)], &[]);
        assert!(matches!(
            drop_redundant_edges(&g, 0.05),
            Err(Error::EmptyEdgeSet { set_id: 0 })
        ));
    }

    #[test]
    fn repair_closes_a_broken_wrap_edge() {
        // Path 1 -> 2 -> 3 is missing its 3 -> 1 wrap-around; there is
        // only one way to close it.
        let g = graph(&[(1, 1), (2, 1), (3, 1)], &[(1, 2, 80), (2, 3, 78)]);
        let repaired = add_missed_edges(&g);
        assert_eq!(repaired.len(), 1);
        let w = repaired[0].edges[&(sid(3), sid(1))];
        assert_eq!(w.count, 78); // current minimum
        assert_eq!(euler_cycles(&repaired[0], 4), vec![cycle_syms(&[1, 2, 3])]);
    }

    #[test]
    fn dominant_edges_win_their_slots() {
        // True cycle 1 -> 2 -> 3 -> 1 with strong counts; a phase-locked
        // noise edge (3, 2) is too strong for any median band but loses
        // both its slots to stronger holders.
        let g = graph(
            &[(1, 1), (2, 1), (3, 1)],
            &[(1, 2, 30), (2, 3, 28), (3, 1, 26), (3, 2, 20)],
        );
        let kept = keep_dominant_edges(&g);
        assert_eq!(kept.edges.len(), 3);
        assert!(!kept.edges.contains_key(&(sid(3), sid(2))));
        assert_eq!(euler_cycles(&kept, 4), vec![cycle_syms(&[1, 2, 3])]);

        // Slot accounting honors multiplicities: the hub (mult 2) keeps
        // both petal round trips and sheds only the cross-petal stray.
        let g2 = graph(
            &[(1, 2), (2, 1), (3, 1)],
            &[(1, 2, 50), (2, 1, 49), (1, 3, 48), (3, 1, 47), (2, 3, 9)],
        );
        let kept2 = keep_dominant_edges(&g2);
        assert!(!kept2.edges.contains_key(&(sid(2), sid(3))));
        assert_eq!(euler_cycles(&kept2, 4).len(), 2);
    }

    #[test]
    fn repair_fills_multi_instance_quotas() {
        // Vertex 9 occurs twice per burst but only one of its visits
        // survived the filter: both missing links (2 -> 9 and 9 -> 1)
        // must be restored, not just a plain degree imbalance. The
        // self-loop wiring (2 -> 1 plus 9 -> 9) is the weaker alternative.
        let g = graph(&[(1, 1), (2, 1), (9, 2)], &[(1, 9, 40), (9, 2, 40)]);
        let repaired = add_missed_edges(&g);
        assert_eq!(repaired.len(), 2);
        assert_eq!(euler_cycles(&repaired[0], 4), vec![cycle_syms(&[1, 9, 2, 9])]);
        assert_eq!(euler_cycles(&repaired[1], 4), vec![cycle_syms(&[1, 9, 9, 2])]);
    }

    #[test]
    fn repair_gives_up_on_double_imbalance() {
        // Vertex 3 has two incoming surpluses; added edges cannot shrink
        // a degree, so the graph comes back untouched.
        let g = graph(
            &[(1, 1), (2, 1), (3, 1)],
            &[(1, 3, 10), (2, 3, 10)],
        );
        let repaired = add_missed_edges(&g);
        assert_eq!(repaired.len(), 1);
        assert_eq!(repaired[0].edges.len(), g.edges.len());
        assert!(euler_cycles(&repaired[0], 4).is_empty());
    }

    #[test]
    fn alternatives_respect_the_cap() {
        // A hub with three petals has 3! = 6 visit orders; ask for two.
        let mut edges = Vec::new();
        for petal in [2u64, 3, 4] {
            edges.push((1, petal, 5));
            edges.push((petal, 1, 5));
        }
        let g = graph(&[(1, 3), (2, 1), (3, 1), (4, 1)], &edges);
        assert_eq!(euler_cycles(&g, 2).len(), 2);
        assert!(euler_cycles(&g, 4).len() <= 4);
    }
}
