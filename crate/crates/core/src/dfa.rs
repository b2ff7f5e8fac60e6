//! Per-thread pattern automata.
//!
//! A `PatternDfa` encodes one thread's cyclic symbol pattern. Each state
//! is one position in the cycle; stepping classifies an observed symbol
//! as the expected next symbol (Normal), a repeat of the current one
//! (Retransmission), a skip ahead (Miss, landing on the nearest matching
//! position), or foreign traffic (Unknown, which changes nothing).

use crate::error::Error;
use crate::trace::{SymbolId, Trace};
use std::collections::BTreeMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TransitionEvent {
    Normal,
    Retransmission,
    Miss,
    Unknown,
}

impl TransitionEvent {
    /// Single-letter code used in enforcement logs.
    pub fn code(self) -> char {
        match self {
            TransitionEvent::Normal => 'N',
            TransitionEvent::Retransmission => 'R',
            TransitionEvent::Miss => 'M',
            TransitionEvent::Unknown => 'U',
        }
    }
}

#[derive(Clone, Debug)]
pub struct PatternDfa {
    dfa_id: usize,
    pattern: Vec<SymbolId>,
    /// Expected gap in ms from seeing state i's symbol to seeing state
    /// i+1's (wrapping), used for arrival prediction.
    tns: Vec<f64>,
    positions: BTreeMap<SymbolId, Vec<usize>>,
}

impl PartialEq for PatternDfa {
    fn eq(&self, other: &Self) -> bool {
        self.dfa_id == other.dfa_id && self.pattern == other.pattern && self.tns == other.tns
    }
}

impl PatternDfa {
    pub fn new(dfa_id: usize, pattern: Vec<SymbolId>, tns: Vec<f64>) -> PatternDfa {
        assert!(!pattern.is_empty(), "pattern must be non-empty");
        assert_eq!(pattern.len(), tns.len(), "one gap per pattern position");
        assert!(
            tns.iter().all(|g| g.is_finite() && *g >= 0.0),
            "gaps must be finite and non-negative"
        );
        let mut positions: BTreeMap<SymbolId, Vec<usize>> = BTreeMap::new();
        for (i, &s) in pattern.iter().enumerate() {
            positions.entry(s).or_default().push(i);
        }
        PatternDfa {
            dfa_id,
            pattern,
            tns,
            positions,
        }
    }

    pub fn dfa_id(&self) -> usize {
        self.dfa_id
    }

    pub fn pattern(&self) -> &[SymbolId] {
        &self.pattern
    }

    pub fn tns(&self) -> &[f64] {
        &self.tns
    }

    /// Number of states; also the model-size contribution of this DFA.
    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        false // patterns are never empty by construction
    }

    pub fn contains(&self, s: SymbolId) -> bool {
        self.positions.contains_key(&s)
    }

    pub fn distinct_symbols(&self) -> usize {
        self.positions.len()
    }

    /// Smallest state advance d >= 1 with `pattern[(from + d) % len] == s`.
    fn smallest_advance(&self, from: usize, s: SymbolId) -> Option<usize> {
        let l = self.pattern.len();
        self.positions
            .get(&s)?
            .iter()
            .map(|&p| (p + l - from) % l)
            .filter(|&d| d > 0)
            .min()
    }
}

/// Mutable per-channel state for one DFA: current position and the time
/// of the last event this DFA accounted for.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DfaRuntime {
    pub current: usize,
    pub t_last: u64,
}

impl DfaRuntime {
    /// Enforcement always starts at position 0 with `t_last` pinned to
    /// the first observed event time.
    pub fn new(first_event_time: u64) -> DfaRuntime {
        DfaRuntime {
            current: 0,
            t_last: first_event_time,
        }
    }
}

/// Classifies one observed symbol and advances the runtime.
///
/// Normal wins over Retransmission when both apply (a pattern may repeat
/// a symbol in adjacent positions). Unknown leaves both the position and
/// `t_last` untouched; every other outcome refreshes `t_last`.
pub fn step(dfa: &PatternDfa, rt: &mut DfaRuntime, symbol: SymbolId, time_ms: u64) -> TransitionEvent {
    let l = dfa.pattern.len();
    let next = (rt.current + 1) % l;
    if symbol == dfa.pattern[next] {
        rt.current = next;
        rt.t_last = time_ms;
        return TransitionEvent::Normal;
    }
    if symbol == dfa.pattern[rt.current] {
        rt.t_last = time_ms;
        return TransitionEvent::Retransmission;
    }
    if let Some(d) = dfa.smallest_advance(rt.current, symbol) {
        rt.current = (rt.current + d) % l;
        rt.t_last = time_ms;
        return TransitionEvent::Miss;
    }
    TransitionEvent::Unknown
}

pub const DEFAULT_VALIDATION_MULTIPLIER: usize = 4;

/// Brute-force single-pattern learner: try every candidate length and
/// start offset from the head of the trace, replay each against the
/// following events, and keep the candidate with the highest fraction of
/// Normal transitions. Ties prefer shorter patterns, then earlier
/// offsets. The winner's gaps are the mean Normal deltas out of each
/// state observed during its validation replay.
pub fn learn_pattern(
    trace: &Trace,
    max_len: usize,
    validation_multiplier: usize,
) -> Result<PatternDfa, Error> {
    if max_len == 0 {
        return Err(Error::InvalidParam("max_len must be >= 1".into()));
    }
    if validation_multiplier == 0 {
        return Err(Error::InvalidParam(
            "validation_multiplier must be >= 1".into(),
        ));
    }
    let n = trace.events.len();
    let need = max_len * (validation_multiplier + 1);
    if n < need {
        return Err(Error::TraceTooShort { need, have: n });
    }

    let mut best: Option<(f64, usize, usize)> = None; // score, len, offset
    for len in 1..=max_len {
        for offset in 0..len {
            let score = candidate_score(trace, offset, len, validation_multiplier, max_len);
            if best.is_none_or(|(bs, _, _)| score > bs) {
                best = Some((score, len, offset));
            }
        }
    }
    let (_, len, offset) = best.unwrap();

    let pattern: Vec<SymbolId> = trace.events[offset..offset + len]
        .iter()
        .map(|e| e.symbol)
        .collect();
    let dfa = PatternDfa::new(0, pattern.clone(), vec![0.0; len]);
    let val = validation_slice(trace, offset, len, validation_multiplier, max_len);

    // Replay the winner once more, collecting Normal deltas per state.
    let mut per_state: Vec<Vec<u64>> = vec![Vec::new(); len];
    let mut all: Vec<u64> = Vec::new();
    if let Some(first) = val.first() {
        let mut rt = DfaRuntime::new(first.time_ms);
        for ev in val {
            let from = rt.current;
            let before = rt.t_last;
            if step(&dfa, &mut rt, ev.symbol, ev.time_ms) == TransitionEvent::Normal {
                let delta = ev.time_ms - before;
                per_state[from].push(delta);
                all.push(delta);
            }
        }
    }
    let overall = if all.is_empty() {
        0.0
    } else {
        all.iter().sum::<u64>() as f64 / all.len() as f64
    };
    let tns: Vec<f64> = per_state
        .iter()
        .map(|ds| {
            if ds.is_empty() {
                overall
            } else {
                ds.iter().sum::<u64>() as f64 / ds.len() as f64
            }
        })
        .collect();

    Ok(PatternDfa::new(0, pattern, tns))
}

fn validation_slice<'a>(
    trace: &'a Trace,
    offset: usize,
    len: usize,
    validation_multiplier: usize,
    max_len: usize,
) -> &'a [crate::trace::SymbolEvent] {
    let start = offset + len;
    let end = (start + validation_multiplier * max_len).min(trace.events.len());
    &trace.events[start..end]
}

fn candidate_score(
    trace: &Trace,
    offset: usize,
    len: usize,
    validation_multiplier: usize,
    max_len: usize,
) -> f64 {
    let pattern: Vec<SymbolId> = trace.events[offset..offset + len]
        .iter()
        .map(|e| e.symbol)
        .collect();
    let dfa = PatternDfa::new(0, pattern, vec![0.0; len]);
    let val = validation_slice(trace, offset, len, validation_multiplier, max_len);
    let Some(first) = val.first() else {
        return 0.0;
    };
    let mut rt = DfaRuntime::new(first.time_ms);
    let normals = val
        .iter()
        .filter(|ev| step(&dfa, &mut rt, ev.symbol, ev.time_ms) == TransitionEvent::Normal)
        .count();
    normals as f64 / val.len() as f64
}
