//! Unsupervised statechart learning.
//!
//! Pipeline: take a learning window off the head of the trace, build its
//! DTMC, split the symbols into per-thread sets, reconstruct each set's
//! cyclic pattern (possibly several alternatives per set, several
//! partitions overall), attach time gaps, then score every candidate
//! statechart on a validation window and keep the best.

use crate::cycles::{
    add_missed_edges, build_subgraph, drop_redundant_edges, euler_cycles, keep_dominant_edges,
    CycleSubgraph, DEFAULT_T_MED, MAX_ALTERNATIVES,
};
use crate::dfa::{learn_pattern, PatternDfa, DEFAULT_VALIDATION_MULTIPLIER};
use crate::dtmc::{build_dtmc, BURST_GAP_MS};
use crate::error::Error;
use crate::split::{split_symbol_sets, Partition, DEFAULT_T_SIM};
use crate::statechart::Statechart;
use crate::trace::{SymbolEvent, SymbolId, Trace};
use std::path::Path;

/// Base number of events in the learning window.
pub const LEARN_WINDOW_EVENTS: usize = 800;
/// The window may grow this much further to finish an in-flight burst.
const LEARN_WINDOW_EXTENSION: usize = 200;
/// Extra rare-edge filter levels tried beside the configured one.
/// Harmonically related periods align bursts so collision bigrams pile up
/// on fixed symbol pairs; no single threshold then fits every channel.
/// Higher levels trade recall on slow threads for immunity to pileups, so
/// partitions from every level compete and validation arbitrates.
const ESCALATED_T_RARE: [f64; 2] = [0.25, 0.40];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnConfig {
    pub max_pattern_len: usize,
    pub t_rare: f64,
    pub t_sim: f64,
    pub t_med: f64,
    pub validation_multiplier: usize,
    pub max_candidates: usize,
    /// Echoed into reports for reproducibility bookkeeping; the learner
    /// itself is deterministic and never draws randomness.
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> LearnConfig {
        LearnConfig {
            max_pattern_len: 200,
            t_rare: crate::DEFAULT_T_RARE,
            t_sim: DEFAULT_T_SIM,
            t_med: DEFAULT_T_MED,
            validation_multiplier: DEFAULT_VALIDATION_MULTIPLIER,
            max_candidates: 64,
            seed: 1,
        }
    }
}

/// Reads a `key=value` config file; keys not present keep their
/// defaults, unknown keys are rejected. Blank lines and `#` comments are
/// allowed.
pub fn parse_config(path: &Path) -> Result<LearnConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<LearnConfig, Error> {
    let mut cfg = LearnConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got {line:?}")))?;
        let bad = |what: &str| Error::parse(lineno, format!("bad {what} value {value:?}"));
        match key {
            "max_pattern_len" => cfg.max_pattern_len = value.parse().map_err(|_| bad(key))?,
            "t_rare" => cfg.t_rare = value.parse().map_err(|_| bad(key))?,
            "t_sim" => cfg.t_sim = value.parse().map_err(|_| bad(key))?,
            "t_med" => cfg.t_med = value.parse().map_err(|_| bad(key))?,
            "validation_multiplier" => {
                cfg.validation_multiplier = value.parse().map_err(|_| bad(key))?
            }
            "max_candidates" => cfg.max_candidates = value.parse().map_err(|_| bad(key))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad(key))?,
            _ => return Err(Error::parse(lineno, format!("unknown key {key:?}"))),
        }
    }
    Ok(cfg)
}

/// What the learner did, alongside the model it produced.
#[derive(Clone, Debug)]
pub struct LearnReport {
    /// Events actually used for learning ([0, window_end)).
    pub window_end: usize,
    pub partitions: usize,
    /// Candidate statecharts scored (after the cap).
    pub candidates: usize,
    pub scores: Vec<f64>,
    pub chosen: usize,
    pub validation_score: f64,
    /// The partition behind the winning candidate.
    pub chosen_partition: Partition,
    pub warnings: Vec<String>,
}

/// End of the learning window: `base` events, extended while events keep
/// arriving within a burst so no thread's burst is cut in half (a
/// truncated burst skews that thread's frequency out of the similarity
/// band).
pub fn learning_window_end(events: &[SymbolEvent], base: usize) -> usize {
    if events.len() <= base {
        return events.len();
    }
    let mut end = base;
    while end < events.len()
        && end - base < LEARN_WINDOW_EXTENSION
        && events[end].time_ms - events[end - 1].time_ms <= BURST_GAP_MS
    {
        end += 1;
    }
    end
}

/// Derives the per-position time gaps for one reconstructed cycle.
///
/// The thread's period is the window duration over its burst frequency.
/// Intra-burst gaps are medians of observed direct-succession deltas
/// (only deltas under half a period count; larger ones are wrap-arounds
/// or noise). The final wrap-around gap is the period minus everything
/// else, floored at zero.
pub fn deduce_time_gaps(
    events: &[SymbolEvent],
    cycle: &[SymbolId],
    set_freq: f64,
) -> Result<Vec<f64>, Error> {
    assert!(!cycle.is_empty());
    assert!(set_freq > 0.0);
    for &s in cycle {
        if !events.iter().any(|e| e.symbol == s) {
            return Err(Error::Learn(format!(
                "cycle symbol {s} never observed in the learning window"
            )));
        }
    }
    let duration = match (events.first(), events.last()) {
        (Some(a), Some(b)) => (b.time_ms - a.time_ms) as f64,
        _ => 0.0,
    };
    let period = duration / set_freq;

    let l = cycle.len();
    let mut gaps: Vec<Option<f64>> = vec![None; l.saturating_sub(1)];
    for (i, gap) in gaps.iter_mut().enumerate() {
        let (a, b) = (cycle[i], cycle[i + 1]);
        let mut deltas: Vec<u64> = events
            .windows(2)
            .filter(|w| w[0].symbol == a && w[1].symbol == b)
            .map(|w| w[1].time_ms - w[0].time_ms)
            .filter(|&d| (d as f64) < period / 2.0)
            .collect();
        if !deltas.is_empty() {
            deltas.sort_unstable();
            *gap = Some(median_u64(&deltas));
        }
    }
    // A pair that never occurred back-to-back in the window (heavy
    // interleaving) borrows the typical intra-burst gap.
    let observed: Vec<f64> = gaps.iter().flatten().copied().collect();
    let fallback = if observed.is_empty() {
        0.0
    } else {
        let mut sorted = observed.clone();
        sorted.sort_by(f64::total_cmp);
        median_f64(&sorted)
    };
    let mut tns: Vec<f64> = gaps.into_iter().map(|g| g.unwrap_or(fallback)).collect();
    let spent: f64 = tns.iter().sum();
    tns.push((period - spent).max(0.0));
    Ok(tns)
}

fn median_u64(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

fn median_f64(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median interval between consecutive sightings of one symbol; used as a
/// sanity check against the derived period.
fn recurrence_interval(events: &[SymbolEvent], s: SymbolId) -> Option<f64> {
    let times: Vec<u64> = events
        .iter()
        .filter(|e| e.symbol == s)
        .map(|e| e.time_ms)
        .collect();
    if times.len() < 2 {
        return None;
    }
    let mut deltas: Vec<u64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.sort_unstable();
    Some(median_u64(&deltas))
}

/// Learns a multi-thread statechart from an unlabeled trace.
pub fn learn_statechart(trace: &Trace, cfg: &LearnConfig) -> Result<(Statechart, LearnReport), Error> {
    let need = cfg.max_pattern_len * 5;
    if trace.events.len() < need {
        return Err(Error::TraceTooShort {
            need,
            have: trace.events.len(),
        });
    }
    let window_end = learning_window_end(&trace.events, LEARN_WINDOW_EVENTS);
    let window = &trace.events[..window_end];
    let learn_trace = Trace::new(trace.channel_id.clone(), window.to_vec());

    let mut warnings: Vec<String> = Vec::new();

    // Split at the configured rare-edge level and at the escalated
    // levels; duplicate partitions keep their first (lowest-level)
    // appearance. Each partition remembers its DTMC, since subgraph
    // counts must come from the same filter level that produced it.
    let mut dtmcs = vec![build_dtmc(&learn_trace, cfg.t_rare)?];
    for &level in ESCALATED_T_RARE.iter().filter(|&&l| l > cfg.t_rare) {
        match build_dtmc(&learn_trace, level) {
            Ok(d) => dtmcs.push(d),
            Err(e) => warnings.push(format!("rare-edge filter at {level}: {e}")),
        }
    }
    let mut pool: Vec<(usize, Partition)> = Vec::new();
    let mut seen: Vec<Vec<Vec<(SymbolId, u32)>>> = Vec::new();
    for (di, dtmc) in dtmcs.iter().enumerate() {
        for p in split_symbol_sets(dtmc, cfg.t_sim) {
            let mut sig: Vec<Vec<(SymbolId, u32)>> = p
                .sets
                .iter()
                .map(|s| s.members.iter().map(|(&sym, &m)| (sym, m)).collect())
                .collect();
            sig.sort();
            if !seen.contains(&sig) {
                seen.push(sig);
                pool.push((di, p));
            }
        }
    }

    // Reconstruct cycle alternatives and gaps per set, per partition.
    struct SetChoice {
        set_idx: usize,
        alternatives: Vec<(Vec<SymbolId>, Vec<f64>)>,
    }
    let mut per_partition: Vec<Vec<SetChoice>> = Vec::new();
    for (pi, (di, p)) in pool.iter().enumerate() {
        let dtmc = &dtmcs[*di];
        let mut choices: Vec<SetChoice> = Vec::new();
        for (si, set) in p.sets.iter().enumerate() {
            let sub = build_subgraph(dtmc, set);
            // A graph that already carries exactly one burst's worth of
            // edges must not be second-guessed. Otherwise repair it both
            // ways: trim with the median band when there is excess (the
            // band only makes sense while the spurious edges are still
            // present), and independently keep the per-slot dominant
            // edges; close the remaining gaps and let the cycles compete.
            let mut repaired: Vec<CycleSubgraph> = Vec::new();
            if sub.degrees_match_instances() {
                repaired.push(sub);
            } else {
                let over_full = sub.edge_total() as u64 >= set.instance_total();
                if over_full {
                    match drop_redundant_edges(&sub, cfg.t_med) {
                        Ok(trimmed) => repaired.extend(add_missed_edges(&trimmed)),
                        Err(e) => warnings.push(format!("partition {pi}: set {}: {e}", set.id)),
                    }
                } else {
                    repaired.extend(add_missed_edges(&sub));
                }
                repaired.extend(add_missed_edges(&keep_dominant_edges(&sub)));
            }
            let mut cycles: Vec<Vec<SymbolId>> = Vec::new();
            for r in &repaired {
                for c in euler_cycles(r, MAX_ALTERNATIVES) {
                    if !cycles.contains(&c) {
                        cycles.push(c);
                    }
                }
            }
            if cycles.is_empty() {
                warnings.push(format!(
                    "partition {pi}: set {} has no Euler cycle after repair, dropping it",
                    set.id
                ));
                continue;
            }
            if set.freq <= 0.0 {
                warnings.push(format!(
                    "partition {pi}: set {} has non-positive frequency, dropping it",
                    set.id
                ));
                continue;
            }
            let mut alternatives = Vec::new();
            for cycle in cycles {
                match deduce_time_gaps(window, &cycle, set.freq) {
                    Ok(tns) => alternatives.push((cycle, tns)),
                    Err(e) => warnings.push(format!("partition {pi}: set {}: {e}", set.id)),
                }
            }
            if !alternatives.is_empty() {
                choices.push(SetChoice {
                    set_idx: si,
                    alternatives,
                });
            }
        }
        per_partition.push(choices);
    }

    // Period sanity diagnostics on the first partition's sets.
    if let (Some((_, p)), Some(choices)) = (pool.first(), per_partition.first()) {
        let duration = learn_trace.duration_ms() as f64;
        for c in choices {
            let set = &p.sets[c.set_idx];
            let period = duration / set.freq;
            if let Some(rec) = recurrence_interval(window, c.alternatives[0].0[0]) {
                if (rec - period).abs() / period > 0.25 {
                    warnings.push(format!(
                        "set {}: lead symbol recurs every {rec:.0} ms but the derived period is {period:.0} ms",
                        set.id
                    ));
                }
            }
        }
    }

    // Enumerate candidate statecharts: within a partition, the Cartesian
    // product of per-set alternatives. Partitions emit candidates in
    // round-robin so a fork-happy partition cannot starve the rest out of
    // the candidate budget.
    let val_end = (window_end + cfg.validation_multiplier * cfg.max_pattern_len)
        .min(trace.events.len());
    let val_trace = Trace::new(trace.channel_id.clone(), trace.events[window_end..val_end].to_vec());
    if val_trace.is_empty() {
        warnings.push("validation window is empty; scores are meaningless".into());
    }

    struct Candidate {
        pool_idx: usize,
        statechart: Statechart,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut odometers: Vec<Option<Vec<usize>>> = per_partition
        .iter()
        .map(|choices| (!choices.is_empty()).then(|| vec![0usize; choices.len()]))
        .collect();
    'outer: loop {
        let mut live = false;
        for (pi, choices) in per_partition.iter().enumerate() {
            let Some(odometer) = odometers[pi].as_mut() else {
                continue;
            };
            live = true;
            let dfas: Vec<PatternDfa> = choices
                .iter()
                .zip(odometer.iter())
                .map(|(c, &ai)| {
                    let (cycle, tns) = &c.alternatives[ai];
                    (cycle.clone(), tns.clone())
                })
                .enumerate()
                .map(|(id, (cycle, tns))| PatternDfa::new(id, cycle, tns))
                .collect();
            candidates.push(Candidate {
                pool_idx: pi,
                statechart: Statechart::new(dfas),
            });
            if candidates.len() >= cfg.max_candidates {
                break 'outer;
            }
            // Advance the odometer, last set fastest; retire it once it
            // wraps back around to the start.
            let mut pos = choices.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                odometer[pos] += 1;
                if odometer[pos] < choices[pos].alternatives.len() {
                    break;
                }
                odometer[pos] = 0;
            }
            if odometer.iter().all(|&x| x == 0) {
                odometers[pi] = None;
            }
        }
        if !live {
            break;
        }
    }

    if candidates.is_empty() {
        return Err(Error::Learn(
            "no symbol set produced an Euler cycle in any partition".into(),
        ));
    }

    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| {
            if val_trace.is_empty() {
                return 0.0;
            }
            let summary = c.statechart.enforce(&val_trace).summary;
            summary.normal as f64 / summary.total as f64
        })
        .collect();
    // First-best wins: later candidates must strictly beat the leader.
    let chosen = scores
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .unwrap();

    let winner = candidates.swap_remove(chosen);
    let report = LearnReport {
        window_end,
        partitions: pool.len(),
        candidates: scores.len(),
        validation_score: scores[chosen],
        scores,
        chosen,
        chosen_partition: pool[winner.pool_idx].1.clone(),
        warnings,
    };
    Ok((winner.statechart, report))
}

/// The baseline: one flat pattern DFA over the whole interleaved trace.
pub fn learn_naive(trace: &Trace, cfg: &LearnConfig) -> Result<Statechart, Error> {
    let dfa = learn_pattern(trace, cfg.max_pattern_len, cfg.validation_multiplier)?;
    Ok(Statechart::new(vec![dfa]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, ScenarioSpec, ThreadSpec};

    fn sid(x: u64) -> SymbolId {
        SymbolId(x)
    }

    #[test]
    fn config_parses_partial_files_and_rejects_junk() {
        let cfg = parse_config_str("max_pattern_len=50\n\n# tuning\nt_sim=0.1\nseed=9\n").unwrap();
        assert_eq!(cfg.max_pattern_len, 50);
        assert_eq!(cfg.t_sim, 0.1);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.t_rare, 0.10);
        assert_eq!(cfg.validation_multiplier, 4);
        assert!(parse_config_str("nope=1\n").is_err());
        assert!(parse_config_str("t_rare=abc\n").is_err());
        assert!(parse_config_str("just a line\n").is_err());
    }

    #[test]
    fn window_extends_to_burst_boundary() {
        // 250 bursts of four events 1 ms apart, bursts 100 ms apart.
        let mut events = Vec::new();
        for b in 0..250u64 {
            for i in 0..4u64 {
                events.push(SymbolEvent {
                    time_ms: b * 100 + i,
                    symbol: sid(i),
                });
            }
        }
        // 800 lands exactly on a burst boundary here, so no extension…
        assert_eq!(learning_window_end(&events, 800), 800);
        // …but 798 sits mid-burst and must run to the boundary.
        assert_eq!(learning_window_end(&events, 798), 800);
        // Short traces are used whole.
        assert_eq!(learning_window_end(&events[..500], 800), 500);
    }

    #[test]
    fn time_gaps_come_from_medians_and_the_period_remainder() {
        // Bursts of [1,2] at t, t+1 every 100 ms, 10 bursts over ~1000 ms.
        let mut events = Vec::new();
        for b in 0..10u64 {
            events.push(SymbolEvent { time_ms: b * 100, symbol: sid(1) });
            events.push(SymbolEvent { time_ms: b * 100 + 1, symbol: sid(2) });
        }
        let tns = deduce_time_gaps(&events, &[sid(1), sid(2)], 9.01).unwrap();
        assert_eq!(tns.len(), 2);
        assert_eq!(tns[0], 1.0);
        // period = 901 / 9.01 = 100; wrap gap = 100 - 1 = 99.
        assert!((tns[1] - 99.0).abs() < 0.2);

        assert!(deduce_time_gaps(&events, &[sid(1), sid(7)], 9.0).is_err());
    }

    fn two_thread_spec(duration_ms: u64) -> ScenarioSpec {
        ScenarioSpec {
            name: "unit".into(),
            threads: vec![
                ThreadSpec {
                    pattern: vec![sid(0x101), sid(0x102), sid(0x103)],
                    period_ms: 50,
                    jitter_ms: 2,
                },
                ThreadSpec {
                    pattern: vec![sid(0x201), sid(0x202)],
                    period_ms: 130,
                    jitter_ms: 2,
                },
            ],
            duration_ms,
            seed: 11,
        }
    }

    #[test]
    fn learns_two_disjoint_threads() {
        let (trace, _) = generate(&two_thread_spec(60_000)).unwrap();
        let cfg = LearnConfig { max_pattern_len: 20, ..LearnConfig::default() };
        let (sc, report) = learn_statechart(&trace, &cfg).unwrap();
        assert_eq!(sc.dfas().len(), 2);
        let mut patterns: Vec<Vec<SymbolId>> =
            sc.dfas().iter().map(|d| d.pattern().to_vec()).collect();
        patterns.sort();
        assert_eq!(patterns[0], vec![sid(0x101), sid(0x102), sid(0x103)]);
        assert_eq!(patterns[1], vec![sid(0x201), sid(0x202)]);
        assert!(report.validation_score > 0.95, "score {}", report.validation_score);
        assert_eq!(report.chosen_partition.sets.len(), 2);
        assert_eq!(report.chosen_partition.instance_total(), 5);
        assert!(report.window_end >= 800);
    }

    #[test]
    fn naive_learner_wraps_a_single_dfa() {
        let (trace, _) = generate(&two_thread_spec(30_000)).unwrap();
        let cfg = LearnConfig { max_pattern_len: 12, ..LearnConfig::default() };
        let sc = learn_naive(&trace, &cfg).unwrap();
        assert_eq!(sc.dfas().len(), 1);
        assert!(sc.dfas()[0].len() <= 12);
    }

    #[test]
    fn short_traces_are_rejected() {
        let (trace, _) = generate(&two_thread_spec(5_000)).unwrap();
        let cfg = LearnConfig::default(); // needs 1000 events
        assert!(matches!(
            learn_statechart(&trace, &cfg),
            Err(Error::TraceTooShort { .. })
        ));
    }
}
