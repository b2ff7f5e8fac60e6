//! First-order Markov statistics over a symbol trace.
//!
//! The chain is the raw material for channel splitting: node frequencies
//! say how often each symbol occurs, edge counts say how often one symbol
//! directly follows another. Edges that are rare relative to both of
//! their endpoints are treated as interleaving noise and dropped.

use crate::error::Error;
use crate::trace::{SymbolId, Trace};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Edge {
    pub count: u64,
    /// Transition probability out of the source node, renormalized after
    /// rare-edge removal.
    pub probability: f64,
}

/// A discrete-time Markov chain over the symbols of one trace.
///
/// All maps are keyed by [`SymbolId`], so iteration order (and everything
/// derived from it) is deterministic.
#[derive(Clone, Debug, Default)]
pub struct Dtmc {
    nodes: BTreeMap<SymbolId, u64>,
    edges: BTreeMap<(SymbolId, SymbolId), Edge>,
    out_adj: BTreeMap<SymbolId, Vec<SymbolId>>,
    in_adj: BTreeMap<SymbolId, Vec<SymbolId>>,
    /// Strongest incoming bigram count per node, taken before filtering.
    max_in_prefilter: BTreeMap<SymbolId, u64>,
}

impl Dtmc {
    /// Assembles a chain from explicit node frequencies and edge counts,
    /// e.g. pre-aggregated statistics. No rare-edge filtering is applied;
    /// probabilities are normalized over the given out-edges.
    pub fn from_parts(nodes: &[(SymbolId, u64)], edge_counts: &[(SymbolId, SymbolId, u64)]) -> Dtmc {
        let nodes: BTreeMap<SymbolId, u64> = nodes.iter().copied().collect();
        let counts: BTreeMap<(SymbolId, SymbolId), u64> = edge_counts
            .iter()
            .map(|&(u, v, c)| ((u, v), c))
            .collect();

        let mut max_in_prefilter: BTreeMap<SymbolId, u64> = BTreeMap::new();
        let mut out_totals: BTreeMap<SymbolId, u64> = BTreeMap::new();
        for (&(u, v), &c) in &counts {
            let slot = max_in_prefilter.entry(v).or_insert(0);
            *slot = (*slot).max(c);
            *out_totals.entry(u).or_insert(0) += c;
        }

        let mut edges = BTreeMap::new();
        let mut out_adj: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
        let mut in_adj: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
        for (&(u, v), &c) in &counts {
            edges.insert(
                (u, v),
                Edge {
                    count: c,
                    probability: c as f64 / out_totals[&u] as f64,
                },
            );
            out_adj.entry(u).or_default().push(v);
            in_adj.entry(v).or_default().push(u);
        }

        Dtmc {
            nodes,
            edges,
            out_adj,
            in_adj,
            max_in_prefilter,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (SymbolId, u64)> + '_ {
        self.nodes.iter().map(|(&s, &f)| (s, f))
    }

    pub fn freq(&self, v: SymbolId) -> Option<u64> {
        self.nodes.get(&v).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((SymbolId, SymbolId), Edge)> + '_ {
        self.edges.iter().map(|(&k, &e)| (k, e))
    }

    pub fn edge(&self, u: SymbolId, v: SymbolId) -> Option<Edge> {
        self.edges.get(&(u, v)).copied()
    }

    /// Sources of surviving edges into `v`, ascending.
    pub fn in_neighbors(&self, v: SymbolId) -> &[SymbolId] {
        self.in_adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Targets of surviving edges out of `u`, ascending.
    pub fn out_neighbors(&self, u: SymbolId) -> &[SymbolId] {
        self.out_adj.get(&u).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_degree(&self, v: SymbolId) -> usize {
        self.in_neighbors(v).len()
    }

    pub fn out_degree(&self, u: SymbolId) -> usize {
        self.out_neighbors(u).len()
    }

    /// Largest bigram count among edges that entered `v` before rare-edge
    /// filtering. 0 for a node with no incoming edges (a trace-initial
    /// symbol that never recurs).
    pub fn max_incoming_count(&self, v: SymbolId) -> Result<u64, Error> {
        if !self.nodes.contains_key(&v) {
            return Err(Error::UnknownSymbol(v));
        }
        Ok(self.max_in_prefilter.get(&v).copied().unwrap_or(0))
    }
}

/// Two consecutive events further apart than this belong to different
/// bursts: the pattern pause has begun and whatever follows is another
/// sender's traffic (or the same pattern's next lap). Such pairs say
/// nothing about symbol order inside a pattern, so they form no bigram.
pub const BURST_GAP_MS: u64 = 2;

/// Builds the chain from consecutive same-burst event pairs, then removes
/// every edge whose count is below `t_rare` times the occurrence count of
/// its less frequent endpoint, renormalizing the surviving out-edge
/// probabilities once. A pattern's own transition fires roughly as often
/// as its rarer symbol, so anything far below that is cross-pattern
/// interleaving; measuring against the rarer endpoint keeps a slow
/// pattern's edges alive where they meet a busy shared symbol. Nodes
/// count all events and are never removed.
pub fn build_dtmc(trace: &Trace, t_rare: f64) -> Result<Dtmc, Error> {
    if !(0.0..1.0).contains(&t_rare) {
        return Err(Error::InvalidParam(format!(
            "t_rare must be in [0, 1), got {t_rare}"
        )));
    }
    if trace.events.len() < 2 {
        return Err(Error::TraceTooShort {
            need: 2,
            have: trace.events.len(),
        });
    }

    let mut nodes: BTreeMap<SymbolId, u64> = BTreeMap::new();
    for ev in &trace.events {
        *nodes.entry(ev.symbol).or_insert(0) += 1;
    }

    let mut counts: BTreeMap<(SymbolId, SymbolId), u64> = BTreeMap::new();
    for pair in trace.events.windows(2) {
        if pair[1].time_ms - pair[0].time_ms <= BURST_GAP_MS {
            *counts.entry((pair[0].symbol, pair[1].symbol)).or_insert(0) += 1;
        }
    }

    let mut max_in_prefilter: BTreeMap<SymbolId, u64> = BTreeMap::new();
    for (&(_, v), &c) in &counts {
        let slot = max_in_prefilter.entry(v).or_insert(0);
        *slot = (*slot).max(c);
    }

    let kept: BTreeMap<(SymbolId, SymbolId), u64> = counts
        .into_iter()
        .filter(|&((u, v), c)| (c as f64) >= t_rare * nodes[&u].min(nodes[&v]) as f64)
        .collect();

    let mut out_totals: BTreeMap<SymbolId, u64> = BTreeMap::new();
    for (&(u, _), &c) in &kept {
        *out_totals.entry(u).or_insert(0) += c;
    }

    let mut edges = BTreeMap::new();
    let mut out_adj: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    let mut in_adj: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    for (&(u, v), &c) in &kept {
        edges.insert(
            (u, v),
            Edge {
                count: c,
                probability: c as f64 / out_totals[&u] as f64,
            },
        );
        out_adj.entry(u).or_default().push(v);
        in_adj.entry(v).or_default().push(u);
    }
    // (u, v) iteration order already yields sorted adjacency lists.

    Ok(Dtmc {
        nodes,
        edges,
        out_adj,
        in_adj,
        max_in_prefilter,
    })
}

/// Writes the chain's surviving edges as `u,v,count,probability` CSV.
pub fn write_edge_dump(dtmc: &Dtmc, path: &Path) -> Result<(), Error> {
    let mut out = String::from("u,v,count,probability\n");
    for ((u, v), e) in dtmc.edges() {
        out.push_str(&format!("{u},{v},{},{}\n", e.count, e.probability));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
