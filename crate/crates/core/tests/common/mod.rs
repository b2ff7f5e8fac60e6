//! Helpers shared by the integration test targets.

use std::collections::BTreeMap;

use muxwatch_core::cycles::{CycleSubgraph, EdgeWeight};
use muxwatch_core::trace::SymbolId;

pub fn sid(x: u64) -> SymbolId {
    SymbolId(x)
}

/// Builds the multigraph walked by `tour` (with wrap-around), which is
/// therefore Eulerian by construction.
pub fn graph_from_tour(tour: &[u64]) -> CycleSubgraph {
    let mut vertices: BTreeMap<SymbolId, u32> = BTreeMap::new();
    let mut edges: BTreeMap<(SymbolId, SymbolId), EdgeWeight> = BTreeMap::new();
    for (i, &v) in tour.iter().enumerate() {
        *vertices.entry(sid(v)).or_insert(0) += 1;
        let u = tour[(i + 1) % tour.len()];
        edges
            .entry((sid(v), sid(u)))
            .or_insert(EdgeWeight { count: 1, multi: 0 })
            .multi += 1;
    }
    CycleSubgraph {
        set_id: 0,
        vertices: vertices.into_iter().collect(),
        edges,
    }
}

/// True when `cycle`, read cyclically, uses every edge instance of `g`
/// exactly once.
pub fn is_euler_cycle(g: &CycleSubgraph, cycle: &[SymbolId]) -> bool {
    if cycle.len() != g.edge_total() as usize {
        return false;
    }
    let mut remaining: BTreeMap<(SymbolId, SymbolId), u32> =
        g.edges.iter().map(|(&k, w)| (k, w.multi)).collect();
    for (i, &u) in cycle.iter().enumerate() {
        let v = cycle[(i + 1) % cycle.len()];
        match remaining.get_mut(&(u, v)) {
            Some(m) if *m > 0 => *m -= 1,
            _ => return false,
        }
    }
    true
}

/// Exhaustively enumerates every Euler cycle of `g` as a linear tour
/// anchored on the smallest vertex, the same normal form the library
/// emits. Tours that cover the edges but visit a vertex more or less
/// often than its instance count are discarded: a pattern visits each
/// symbol exactly as often as it occurs.
pub fn brute_force_euler(g: &CycleSubgraph) -> Vec<Vec<SymbolId>> {
    let Some(&(start, _)) = g.vertices.iter().min_by_key(|&&(v, _)| v) else {
        return Vec::new();
    };
    let total = g.edge_total() as usize;
    let mut remaining: BTreeMap<(SymbolId, SymbolId), u32> =
        g.edges.iter().map(|(&k, w)| (k, w.multi)).collect();
    let mut path = vec![start];
    let mut found = Vec::new();
    walk(start, start, total, &mut remaining, &mut path, &mut found);
    found.retain(|tour| {
        g.vertices
            .iter()
            .all(|&(v, m)| tour.iter().filter(|&&x| x == v).count() == m as usize)
    });
    found
}

fn walk(
    at: SymbolId,
    start: SymbolId,
    total: usize,
    remaining: &mut BTreeMap<(SymbolId, SymbolId), u32>,
    path: &mut Vec<SymbolId>,
    found: &mut Vec<Vec<SymbolId>>,
) {
    if path.len() == total + 1 {
        if at == start {
            found.push(path[..total].to_vec());
        }
        return;
    }
    let nexts: Vec<SymbolId> = remaining
        .range((at, SymbolId(0))..=(at, SymbolId(u64::MAX)))
        .filter(|&(_, &m)| m > 0)
        .map(|(&(_, v), _)| v)
        .collect();
    for v in nexts {
        *remaining.get_mut(&(at, v)).unwrap() -= 1;
        path.push(v);
        walk(v, start, total, remaining, path, found);
        path.pop();
        *remaining.get_mut(&(at, v)).unwrap() += 1;
    }
}
