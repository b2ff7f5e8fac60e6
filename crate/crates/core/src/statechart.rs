//! The statechart: several pattern DFAs behind a symbol-indexed selector.
//!
//! Each observed symbol is routed to the DFA responsible for it. Symbols
//! claimed by several DFAs are disambiguated by predicted arrival time:
//! copies of a shared symbol come off the wire in due order, so among the
//! claimants that can consume the symbol most gracefully the one that has
//! been expecting it the longest wins.

use crate::dfa::{step, DfaRuntime, PatternDfa, TransitionEvent};
use crate::error::Error;
use crate::trace::{SymbolId, Trace};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub struct Statechart {
    dfas: Vec<PatternDfa>,
    /// Symbol -> ids of the DFAs whose pattern contains it, ascending.
    phi: BTreeMap<SymbolId, Vec<usize>>,
}

impl Statechart {
    pub fn new(dfas: Vec<PatternDfa>) -> Statechart {
        assert!(!dfas.is_empty(), "a statechart needs at least one DFA");
        for (i, d) in dfas.iter().enumerate() {
            assert_eq!(d.dfa_id(), i, "DFA ids must be contiguous from 0");
        }
        let mut phi: BTreeMap<SymbolId, Vec<usize>> = BTreeMap::new();
        for d in &dfas {
            for &s in d.pattern() {
                let ids = phi.entry(s).or_default();
                if ids.last() != Some(&d.dfa_id()) {
                    ids.push(d.dfa_id());
                }
            }
        }
        Statechart { dfas, phi }
    }

    pub fn dfas(&self) -> &[PatternDfa] {
        &self.dfas
    }

    pub fn phi(&self, s: SymbolId) -> &[usize] {
        self.phi.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn covers(&self, s: SymbolId) -> bool {
        self.phi.contains_key(&s)
    }

    /// Total state count across all DFAs.
    pub fn model_size(&self) -> usize {
        self.dfas.iter().map(PatternDfa::len).sum()
    }

    /// Symbols appearing in at least one pattern.
    pub fn distinct_symbols(&self) -> usize {
        self.phi.len()
    }

    /// Estimated resident size: each state stores a pointer-sized slot
    /// per routable symbol plus one for the gap, and each DFA carries 12
    /// bytes of bookkeeping. `n_dsym` is the channel's distinct-symbol
    /// count, which must cover this model's own symbols.
    pub fn memory_footprint_bytes(&self, n_dsym: usize) -> u64 {
        debug_assert!(n_dsym >= self.distinct_symbols());
        (self.model_size() as u64) * (n_dsym as u64 + 1) * 8 + (self.dfas.len() as u64) * 12
    }

    /// When DFA `dfa_id` would account for `symbol` next, at what time
    /// should it arrive? Walks the Normal-path gaps from the current
    /// position forward to the symbol's next occurrence. The occurrence
    /// is always strictly in the future: the just-consumed symbol is
    /// expected again only after a full cycle, so a DFA that has already
    /// taken its share of a shared symbol stops competing for the next
    /// copy.
    pub fn predicted_arrival(
        &self,
        dfa_id: usize,
        rt: &DfaRuntime,
        symbol: SymbolId,
    ) -> Result<f64, Error> {
        let dfa = &self.dfas[dfa_id];
        if !dfa.contains(symbol) {
            return Err(Error::UnknownSymbol(symbol));
        }
        let l = dfa.len();
        let pattern = dfa.pattern();
        let advance = (1..=l)
            .find(|&d| pattern[(rt.current + d) % l] == symbol)
            .expect("contains() guaranteed a position");
        let mut t = rt.t_last as f64;
        for j in 0..advance {
            t += dfa.tns()[(rt.current + j) % l];
        }
        Ok(t)
    }

    /// Routes a symbol: no claiming DFA means the selector itself flags
    /// the event; several claimants are resolved by how gracefully each
    /// would consume the symbol, then by due order.
    ///
    /// Claimants whose immediate next expected symbol matches outrank
    /// those currently sitting on the symbol (a retransmission), which
    /// outrank the rest (a skip). Within a tier the earliest predicted
    /// arrival wins: when transmissions pile up, copies of a shared
    /// symbol leave the wire in due order, so the longest-waiting DFA
    /// owns the next copy. Ties go to the lowest id. The observed time
    /// itself does not enter the decision, which keeps routing stable
    /// when serialization shifts arrivals away from their schedule.
    pub fn select_dfa(&self, rts: &[DfaRuntime], symbol: SymbolId, _time_ms: u64) -> Option<usize> {
        let ids = self.phi.get(&symbol)?;
        if ids.len() == 1 {
            return Some(ids[0]);
        }
        let mut best: Option<(u8, f64, usize)> = None;
        for &id in ids {
            let dfa = &self.dfas[id];
            let rt = &rts[id];
            let l = dfa.len();
            let tier = if dfa.pattern()[(rt.current + 1) % l] == symbol {
                0u8
            } else if dfa.pattern()[rt.current] == symbol {
                1
            } else {
                2
            };
            let pred = self
                .predicted_arrival(id, rt, symbol)
                .expect("phi only lists DFAs containing the symbol");
            if best.is_none_or(|(bt, bp, _)| (tier, pred) < (bt, bp)) {
                best = Some((tier, pred, id));
            }
        }
        best.map(|(_, _, id)| id)
    }

    /// Replays a trace against the model, classifying every event.
    pub fn enforce(&self, trace: &Trace) -> EnforcementResult {
        let mut records = Vec::with_capacity(trace.events.len());
        let Some(first) = trace.events.first() else {
            return EnforcementResult {
                records,
                summary: EnforcementSummary::empty(),
            };
        };
        let mut rts: Vec<DfaRuntime> = self
            .dfas
            .iter()
            .map(|_| DfaRuntime::new(first.time_ms))
            .collect();
        // Cumulative state advance per DFA; until a DFA has advanced
        // through one full cycle its flags are warm-up artifacts of the
        // arbitrary starting position.
        let mut advanced: Vec<usize> = vec![0; self.dfas.len()];

        for ev in &trace.events {
            match self.select_dfa(&rts, ev.symbol, ev.time_ms) {
                None => records.push(EnforcementRecord {
                    time_ms: ev.time_ms,
                    symbol: ev.symbol,
                    dfa_id: None,
                    event: TransitionEvent::Unknown,
                    warmup: false,
                }),
                Some(id) => {
                    let l = self.dfas[id].len();
                    let from = rts[id].current;
                    let event = step(&self.dfas[id], &mut rts[id], ev.symbol, ev.time_ms);
                    debug_assert_ne!(
                        event,
                        TransitionEvent::Unknown,
                        "a selected DFA always contains the symbol"
                    );
                    let warmup = advanced[id] < l;
                    advanced[id] += match event {
                        TransitionEvent::Normal => 1,
                        TransitionEvent::Retransmission => 0,
                        // A miss lands short of a full lap, so the
                        // modular distance is the real step count.
                        TransitionEvent::Miss => (rts[id].current + l - from) % l,
                        TransitionEvent::Unknown => 0,
                    };
                    records.push(EnforcementRecord {
                        time_ms: ev.time_ms,
                        symbol: ev.symbol,
                        dfa_id: Some(id),
                        event,
                        warmup,
                    });
                }
            }
        }

        let summary = EnforcementSummary::from_records(&records);
        EnforcementResult { records, summary }
    }
}

/// One classified event. `dfa_id` is `None` when no DFA claimed the
/// symbol (a selector-level Unknown).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnforcementRecord {
    pub time_ms: u64,
    pub symbol: SymbolId,
    pub dfa_id: Option<usize>,
    pub event: TransitionEvent,
    pub warmup: bool,
}

impl EnforcementRecord {
    fn is_false_alarm(&self) -> bool {
        matches!(
            self.event,
            TransitionEvent::Miss | TransitionEvent::Unknown
        )
    }
}

/// False-alarm rate of one 5-second bucket, expressed as a percentage of
/// the average event rate over the same span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BucketRate {
    pub start_ms: u64,
    pub pct_of_aer: f64,
}

pub const BUCKET_MS: u64 = 5_000;

#[derive(Clone, Debug, PartialEq)]
pub struct EnforcementSummary {
    pub total: usize,
    pub normal: usize,
    pub retransmission: usize,
    pub miss: usize,
    /// Per-DFA Unknowns; structurally impossible, tracked for honesty.
    pub unknown: usize,
    pub selector_unknown: usize,
    pub warmup: usize,
    /// Events included in the false-alarm rate (total minus warm-up).
    pub counted: usize,
    pub false_alarms: usize,
    pub false_alarm_pct: f64,
    /// Average event rate over the whole trace, events per second.
    pub aer: f64,
    pub buckets: Vec<BucketRate>,
}

impl EnforcementSummary {
    fn empty() -> EnforcementSummary {
        EnforcementSummary {
            total: 0,
            normal: 0,
            retransmission: 0,
            miss: 0,
            unknown: 0,
            selector_unknown: 0,
            warmup: 0,
            counted: 0,
            false_alarms: 0,
            false_alarm_pct: 0.0,
            aer: 0.0,
            buckets: Vec::new(),
        }
    }

    fn from_records(records: &[EnforcementRecord]) -> EnforcementSummary {
        let Some(first) = records.first() else {
            return EnforcementSummary::empty();
        };
        let mut s = EnforcementSummary::empty();
        s.total = records.len();
        for r in records {
            match (r.dfa_id, r.event) {
                (None, _) => s.selector_unknown += 1,
                (_, TransitionEvent::Normal) => s.normal += 1,
                (_, TransitionEvent::Retransmission) => s.retransmission += 1,
                (_, TransitionEvent::Miss) => s.miss += 1,
                (_, TransitionEvent::Unknown) => s.unknown += 1,
            }
            if r.warmup {
                s.warmup += 1;
            } else if r.is_false_alarm() {
                s.false_alarms += 1;
            }
        }
        s.counted = s.total - s.warmup;
        s.false_alarm_pct = if s.counted == 0 {
            0.0
        } else {
            100.0 * s.false_alarms as f64 / s.counted as f64
        };

        let t0 = first.time_ms;
        let duration_ms = records.last().unwrap().time_ms - t0;
        s.aer = if duration_ms == 0 {
            s.total as f64
        } else {
            s.total as f64 / (duration_ms as f64 / 1000.0)
        };

        let n_buckets = (duration_ms / BUCKET_MS) as usize + 1;
        let mut fa_per_bucket = vec![0usize; n_buckets];
        for r in records {
            if !r.warmup && r.is_false_alarm() {
                fa_per_bucket[((r.time_ms - t0) / BUCKET_MS) as usize] += 1;
            }
        }
        let expected_per_bucket = s.aer * (BUCKET_MS as f64 / 1000.0);
        s.buckets = fa_per_bucket
            .into_iter()
            .enumerate()
            .map(|(i, fa)| BucketRate {
                start_ms: t0 + i as u64 * BUCKET_MS,
                pct_of_aer: if expected_per_bucket == 0.0 {
                    0.0
                } else {
                    100.0 * fa as f64 / expected_per_bucket
                },
            })
            .collect();
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnforcementResult {
    pub records: Vec<EnforcementRecord>,
    pub summary: EnforcementSummary,
}

/// Writes the per-event log: `time_ms,symbol,dfa_id,event` with `-` for
/// selector-level Unknowns and single-letter event codes.
pub fn write_event_log(result: &EnforcementResult, path: &Path) -> Result<(), Error> {
    std::fs::write(path, event_log_to_string(result)).map_err(|e| Error::io(path, e))
}

pub fn event_log_to_string(result: &EnforcementResult) -> String {
    let mut out = String::from("time_ms,symbol,dfa_id,event\n");
    for r in &result.records {
        match r.dfa_id {
            Some(id) => {
                let _ = writeln!(out, "{},{},{id},{}", r.time_ms, r.symbol, r.event.code());
            }
            None => {
                let _ = writeln!(out, "{},{},-,{}", r.time_ms, r.symbol, r.event.code());
            }
        }
    }
    out
}

/// Renders the bucketed false-alarm summary:
/// `bucket_start_ms,false_alarm_pct_of_aer` rows, then a `total` row with
/// the overall false-alarm percentage.
pub fn summary_to_string(summary: &EnforcementSummary) -> String {
    let mut out = String::from("bucket_start_ms,false_alarm_pct_of_aer\n");
    for b in &summary.buckets {
        let _ = writeln!(out, "{},{}", b.start_ms, b.pct_of_aer);
    }
    let _ = writeln!(out, "total,{}", summary.false_alarm_pct);
    out
}

pub fn write_summary(summary: &EnforcementSummary, path: &Path) -> Result<(), Error> {
    std::fs::write(path, summary_to_string(summary)).map_err(|e| Error::io(path, e))
}

pub const MODEL_HEADER: &str = "statechart v1";

/// Serializes a model. Gaps use shortest-round-trip float formatting, so
/// parse(write(m)) == m exactly.
pub fn write_model(sc: &Statechart, path: &Path) -> Result<(), Error> {
    std::fs::write(path, model_to_string(sc)).map_err(|e| Error::io(path, e))
}

pub fn model_to_string(sc: &Statechart) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    let _ = writeln!(out, "n_dfas={}", sc.dfas.len());
    for d in &sc.dfas {
        let _ = writeln!(out, "dfa {}", d.dfa_id());
        let pattern: Vec<String> = d.pattern().iter().map(SymbolId::to_string).collect();
        let _ = writeln!(out, "pattern={}", pattern.join(","));
        let tns: Vec<String> = d.tns().iter().map(f64::to_string).collect();
        let _ = writeln!(out, "tns={}", tns.join(","));
    }
    out
}

pub fn parse_model(path: &Path) -> Result<Statechart, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_str(&text)
}

pub fn parse_model_str(text: &str) -> Result<Statechart, Error> {
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String), Error> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {expect}")))
    };

    let (n, header) = next("header")?;
    if header != MODEL_HEADER {
        return Err(Error::parse(n, format!("expected {MODEL_HEADER:?}")));
    }
    let (n, count_line) = next("n_dfas")?;
    let n_dfas: usize = count_line
        .strip_prefix("n_dfas=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(n, "expected n_dfas=<count>"))?;
    if n_dfas == 0 {
        return Err(Error::parse(n, "a model needs at least one DFA"));
    }

    let mut dfas = Vec::with_capacity(n_dfas);
    for id in 0..n_dfas {
        let (n, dfa_line) = next("dfa header")?;
        if dfa_line != format!("dfa {id}") {
            return Err(Error::parse(n, format!("expected \"dfa {id}\"")));
        }
        let (n, pat_line) = next("pattern")?;
        let pattern: Vec<SymbolId> = pat_line
            .strip_prefix("pattern=")
            .ok_or_else(|| Error::parse(n, "expected pattern=..."))?
            .split(',')
            .map(SymbolId::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| Error::parse(n, e))?;
        let (n, tns_line) = next("tns")?;
        let tns: Vec<f64> = tns_line
            .strip_prefix("tns=")
            .ok_or_else(|| Error::parse(n, "expected tns=..."))?
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(n, format!("bad gap value {v:?}")))
            })
            .collect::<Result<_, _>>()?;
        if tns.len() != pattern.len() {
            return Err(Error::parse(
                n,
                format!("{} gaps for {} pattern symbols", tns.len(), pattern.len()),
            ));
        }
        if tns.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::parse(n, "gaps must be finite and non-negative"));
        }
        dfas.push(PatternDfa::new(id, pattern, tns));
    }
    if let Some((i, extra)) = lines.next() {
        return Err(Error::parse(i + 1, format!("trailing content {extra:?}")));
    }
    Ok(Statechart::new(dfas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::SymbolEvent;

    fn sid(x: u64) -> SymbolId {
        SymbolId(x)
    }

    fn chart(dfas: &[(&[u64], &[f64])]) -> Statechart {
        Statechart::new(
            dfas.iter()
                .enumerate()
                .map(|(id, (pat, tns))| {
                    PatternDfa::new(id, pat.iter().map(|&s| sid(s)).collect(), tns.to_vec())
                })
                .collect(),
        )
    }

    #[test]
    fn phi_routes_shared_symbols_to_all_claimants() {
        let sc = chart(&[(&[1, 9], &[1.0, 99.0]), (&[2, 9, 9], &[1.0, 1.0, 298.0])]);
        assert_eq!(sc.phi(sid(1)), &[0]);
        assert_eq!(sc.phi(sid(2)), &[1]);
        assert_eq!(sc.phi(sid(9)), &[0, 1]); // deduped per DFA
        assert_eq!(sc.phi(sid(5)), &[] as &[usize]);
        assert!(!sc.covers(sid(5)));
        assert_eq!(sc.model_size(), 5);
        assert_eq!(sc.distinct_symbols(), 3);
    }

    #[test]
    fn footprint_formula() {
        let sc = chart(&[(&[1, 9], &[0.0, 0.0]), (&[2], &[0.0])]);
        // 3 states, 3 distinct symbols, 2 DFAs.
        assert_eq!(sc.memory_footprint_bytes(3), 3 * 4 * 8 + 2 * 12);
        let single = chart(&[(&[1], &[0.0])]);
        assert_eq!(single.memory_footprint_bytes(1), 28);
    }

    #[test]
    fn predicted_arrival_sums_gaps_along_the_path() {
        let sc = chart(&[(&[1, 2, 3], &[10.0, 20.0, 300.0])]);
        let rt = DfaRuntime { current: 0, t_last: 1000 };
        // Normal step: one gap.
        assert_eq!(sc.predicted_arrival(0, &rt, sid(2)).unwrap(), 1010.0);
        // Two steps ahead: both gaps.
        assert_eq!(sc.predicted_arrival(0, &rt, sid(3)).unwrap(), 1030.0);
        // The current symbol comes around again after a full lap.
        assert_eq!(sc.predicted_arrival(0, &rt, sid(1)).unwrap(), 1330.0);
        assert!(sc.predicted_arrival(0, &rt, sid(9)).is_err());
    }

    #[test]
    fn selector_routes_shared_symbols_in_due_order() {
        let sc = chart(&[(&[1, 9], &[1.0, 99.0]), (&[2, 9], &[5.0, 295.0])]);
        let rts = [
            DfaRuntime { current: 0, t_last: 1000 }, // expects 9 at 1001
            DfaRuntime { current: 0, t_last: 900 },  // expects 9 at 905
        ];
        // Both expect 9 next; the longer-waiting DFA owns the next copy,
        // wherever the observed time happens to land.
        assert_eq!(sc.select_dfa(&rts, sid(9), 1000), Some(1));
        assert_eq!(sc.select_dfa(&rts, sid(9), 907), Some(1));
        // Unshared symbols route directly; unknown symbols route nowhere.
        assert_eq!(sc.select_dfa(&rts, sid(2), 500), Some(1));
        assert_eq!(sc.select_dfa(&rts, sid(42), 500), None);
    }

    #[test]
    fn selector_prefers_in_sequence_claimants_over_earlier_due_ones() {
        // dfa0 just wrapped past 9 and would re-consume it as a skip;
        // dfa1 expects 9 as its immediate next symbol. dfa0 is due far
        // earlier, but dfa1 still wins the copy.
        let sc = chart(&[(&[1, 9, 3], &[1.0, 1.0, 1.0]), (&[2, 9], &[50.0, 50.0])]);
        let rts = [
            DfaRuntime { current: 2, t_last: 100 }, // next is 1; 9 due at 102
            DfaRuntime { current: 0, t_last: 200 }, // next is 9, due at 250
        ];
        assert_eq!(sc.select_dfa(&rts, sid(9), 102), Some(1));

        // A claimant sitting on the symbol (retransmission) likewise
        // outranks one that would take it as a skip.
        let rts = [
            DfaRuntime { current: 2, t_last: 100 }, // 9 is a skip
            DfaRuntime { current: 1, t_last: 200 }, // 9 repeats in place
        ];
        assert_eq!(sc.select_dfa(&rts, sid(9), 102), Some(1));
    }

    #[test]
    fn selector_ties_go_to_the_lowest_id() {
        let sc = chart(&[(&[1, 9], &[10.0, 90.0]), (&[2, 9], &[10.0, 90.0])]);
        let rts = [
            DfaRuntime { current: 0, t_last: 1000 }, // predicts 1010
            DfaRuntime { current: 0, t_last: 1000 }, // predicts 1010
        ];
        assert_eq!(sc.select_dfa(&rts, sid(9), 1000), Some(0));
    }

    #[test]
    fn enforce_counts_and_flags() {
        let sc = chart(&[(&[1, 2], &[1.0, 9.0])]);
        let events = vec![
            SymbolEvent { time_ms: 0, symbol: sid(1) },  // Retransmission (warm-up)
            SymbolEvent { time_ms: 1, symbol: sid(2) },  // Normal (warm-up)
            SymbolEvent { time_ms: 10, symbol: sid(1) }, // Normal (warm-up)
            SymbolEvent { time_ms: 11, symbol: sid(2) }, // Normal (counted)
            SymbolEvent { time_ms: 12, symbol: sid(7) }, // selector Unknown
            SymbolEvent { time_ms: 20, symbol: sid(1) }, // Normal
        ];
        let res = sc.enforce(&Trace::new("t", events));
        let s = &res.summary;
        assert_eq!(s.total, 6);
        assert_eq!(s.normal, 4);
        assert_eq!(s.retransmission, 1);
        assert_eq!(s.miss, 0);
        assert_eq!(s.unknown, 0);
        assert_eq!(s.selector_unknown, 1);
        // Warm-up: cumulative advance before the event must reach 2.
        assert_eq!(s.warmup, 3);
        assert_eq!(s.counted, 3);
        assert_eq!(s.false_alarms, 1);
        assert!((s.false_alarm_pct - 100.0 / 3.0).abs() < 1e-12);
        // Selector Unknowns are never excused as warm-up.
        assert!(!res.records[4].warmup);
        assert_eq!(res.records[4].dfa_id, None);
        // 20 ms span, one bucket starting at the first event.
        assert_eq!(s.buckets.len(), 1);
        assert_eq!(s.buckets[0].start_ms, 0);
        let expected = s.aer * 5.0;
        assert!((s.buckets[0].pct_of_aer - 100.0 / expected).abs() < 1e-12);
    }

    #[test]
    fn enforce_on_empty_trace_is_all_zeros() {
        let sc = chart(&[(&[1], &[10.0])]);
        let res = sc.enforce(&Trace::new("t", vec![]));
        assert!(res.records.is_empty());
        assert_eq!(res.summary.total, 0);
        assert_eq!(res.summary.aer, 0.0);
        assert!(res.summary.buckets.is_empty());
    }

    #[test]
    fn model_file_round_trip() {
        let sc = chart(&[
            (&[1, 9], &[1.0, 98.7]),
            (&[2, 9, 3], &[0.5, 1.0, 297.25]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        write_model(&sc, &path).unwrap();
        assert_eq!(parse_model(&path).unwrap(), sc);

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "statechart v1\n\
             n_dfas=2\n\
             dfa 0\n\
             pattern=0000000000000001,0000000000000009\n\
             tns=1,98.7\n\
             dfa 1\n\
             pattern=0000000000000002,0000000000000009,0000000000000003\n\
             tns=0.5,1,297.25\n"
        );
    }

    #[test]
    fn model_parser_rejects_damage() {
        let good = "statechart v1\nn_dfas=1\ndfa 0\npattern=0000000000000001\ntns=5\n";
        assert!(parse_model_str(good).is_ok());
        for bad in [
            "",
            "statechart v2\nn_dfas=1\ndfa 0\npattern=0000000000000001\ntns=5\n",
            "statechart v1\nn_dfas=0\n",
            "statechart v1\nn_dfas=1\ndfa 1\npattern=0000000000000001\ntns=5\n",
            "statechart v1\nn_dfas=1\ndfa 0\npattern=0000000000000001\ntns=5,6\n",
            "statechart v1\nn_dfas=1\ndfa 0\npattern=0000000000000001\ntns=-1\n",
            "statechart v1\nn_dfas=1\ndfa 0\npattern=0000000000000001\ntns=5\nextra\n",
            "statechart v1\nn_dfas=2\ndfa 0\npattern=0000000000000001\ntns=5\n",
        ] {
            assert!(parse_model_str(bad).is_err(), "should reject {bad:?}");
        }
    }
}
