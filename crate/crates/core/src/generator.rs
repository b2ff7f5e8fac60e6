//! Synthetic multiplexed traffic.
//!
//! Each simulated thread wakes once per period (give or take a uniform
//! jitter), emits its pattern at one symbol per millisecond, and goes
//! back to sleep. All threads share one wire: simultaneous schedules are
//! serialized in fixed thread-priority order, the way a fixed-priority
//! scheduler drains simultaneous wake-ups, and pushed to strictly
//! increasing wire times at 1 ms granularity.

use crate::error::Error;
use crate::trace::{SymbolEvent, SymbolId, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadSpec {
    pub pattern: Vec<SymbolId>,
    pub period_ms: u64,
    pub jitter_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub name: String,
    pub threads: Vec<ThreadSpec>,
    pub duration_ms: u64,
    pub seed: u64,
}

/// Where one emitted symbol really came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthRecord {
    /// Serialized wire time; identical to the trace event time.
    pub time_ms: u64,
    /// Intended emission time (jittered) before wire serialization.
    pub sched_ms: u64,
    /// Jitter-free schedule slot, burst index x period + position.
    pub nominal_ms: u64,
    pub symbol: SymbolId,
    pub thread: usize,
    /// Position within the thread's pattern.
    pub pos: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

/// Wake-up perturbation applied to every burst, matching a couple of
/// desktop-OS scheduler quanta. Large enough that harmonically aligned
/// bursts usually serialize apart instead of piling up every cycle.
pub const DEFAULT_JITTER_MS: u64 = 40;

/// Generates the trace and its ground truth. Every thread completes
/// exactly `duration_ms / period_ms` bursts, so event counts are an exact
/// function of the scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<(Trace, GroundTruth), Error> {
    if spec.threads.is_empty() {
        return Err(Error::InvalidParam("scenario has no threads".into()));
    }
    for (k, th) in spec.threads.iter().enumerate() {
        if th.pattern.is_empty() {
            return Err(Error::InvalidParam(format!("thread {k} has an empty pattern")));
        }
        if th.period_ms <= th.pattern.len() as u64 {
            return Err(Error::InvalidParam(format!(
                "thread {k}: period {} ms must exceed the pattern length {}",
                th.period_ms,
                th.pattern.len()
            )));
        }
    }

    struct Pending {
        sched: u64,
        nominal: u64,
        thread: usize,
        pos: usize,
        symbol: SymbolId,
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pending: Vec<Pending> = Vec::new();
    for (k, th) in spec.threads.iter().enumerate() {
        let bursts = spec.duration_ms / th.period_ms;
        let j = th.jitter_ms as i64;
        for n in 0..bursts {
            let jitter = rng.random_range(-j..=j);
            let start = ((n * th.period_ms) as i64 + jitter).max(0) as u64;
            for (pos, &symbol) in th.pattern.iter().enumerate() {
                pending.push(Pending {
                    sched: start + pos as u64,
                    nominal: n * th.period_ms + pos as u64,
                    thread: k,
                    pos,
                    symbol,
                });
            }
        }
    }
    // Schedule collisions drain in thread-priority order, every time.
    pending.sort_by_key(|p| (p.sched, p.thread, p.pos));

    let mut records = Vec::with_capacity(pending.len());
    let mut last_wire: Option<u64> = None;
    for p in pending {
        let wire = match last_wire {
            None => p.sched,
            Some(w) => p.sched.max(w + 1),
        };
        last_wire = Some(wire);
        records.push(TruthRecord {
            time_ms: wire,
            sched_ms: p.sched,
            nominal_ms: p.nominal,
            symbol: p.symbol,
            thread: p.thread,
            pos: p.pos,
        });
    }

    let events = records
        .iter()
        .map(|r| SymbolEvent {
            time_ms: r.time_ms,
            symbol: r.symbol,
        })
        .collect();
    Ok((
        Trace::new(spec.name.clone(), events),
        GroundTruth { records },
    ))
}

/// Writes ground truth as `time_ms,symbol,thread,pos` CSV (wire times).
pub fn write_ground_truth(gt: &GroundTruth, path: &Path) -> Result<(), Error> {
    let mut out = String::from("time_ms,symbol,thread,pos\n");
    for r in &gt.records {
        let _ = writeln!(out, "{},{},{},{}", r.time_ms, r.symbol, r.thread, r.pos);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The 13 built-in stress scenarios. Thread shapes (pattern length,
/// unique-symbol count, period in ms) sweep from fully disjoint patterns
/// to heavy symbol sharing across 2 to 4 threads.
///
/// Patterns are built by a fixed rule so every run is reproducible:
/// thread k's unique symbols are (k+1)*0x100 + 1.. in order; the shared
/// slots of a (length L, c shared) pattern sit at the positions where
/// floor((i+1)*c/L) increments, and they draw round-robin from a global
/// pool 0xF000.. whose size is the smallest shared-slot count among the
/// scenario's sharing threads, continuing the cursor from thread to
/// thread.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let table: &[&[(usize, usize, u64)]] = &[
        &[(6, 6, 300), (4, 4, 950)],
        &[(6, 6, 300), (4, 4, 950)],
        &[(6, 4, 300), (4, 1, 400)],
        &[(6, 4, 300), (4, 2, 950)],
        &[(10, 9, 300), (4, 2, 600), (4, 3, 200)],
        &[(10, 7, 300), (10, 7, 950), (10, 7, 2000)],
        &[(10, 8, 300), (8, 7, 350), (10, 9, 400)],
        &[(10, 8, 300), (8, 7, 850), (10, 9, 1300)],
        &[(10, 7, 300), (8, 4, 350), (10, 8, 400)],
        &[(6, 3, 300), (4, 2, 350), (6, 2, 400)],
        &[(10, 8, 250), (4, 2, 650), (6, 4, 1100), (8, 7, 420)],
        &[(6, 4, 250), (4, 4, 350), (10, 9, 550), (8, 7, 420)],
        &[(10, 9, 300), (4, 2, 600), (4, 2, 200), (6, 3, 350)],
    ];
    table
        .iter()
        .enumerate()
        .map(|(i, shapes)| ScenarioSpec {
            name: (i + 1).to_string(),
            threads: build_threads(shapes),
            duration_ms: 970_000,
            seed: 1,
        })
        .collect()
}

pub fn builtin_scenario(id: usize) -> Option<ScenarioSpec> {
    (1..=13).contains(&id).then(|| builtin_scenarios().swap_remove(id - 1))
}

fn build_threads(shapes: &[(usize, usize, u64)]) -> Vec<ThreadSpec> {
    let pool_size = shapes
        .iter()
        .filter(|&&(l, u, _)| l > u)
        .map(|&(l, u, _)| l - u)
        .min()
        .unwrap_or(0);
    let mut cursor = 0usize;
    let mut threads = Vec::with_capacity(shapes.len());
    for (k, &(len, uniq, period)) in shapes.iter().enumerate() {
        let shared = len - uniq;
        let mut next_unique = 0u64;
        let mut pattern = Vec::with_capacity(len);
        for i in 0..len {
            let is_shared = shared > 0 && (i + 1) * shared / len > i * shared / len;
            if is_shared {
                pattern.push(SymbolId(0xF000 + (cursor % pool_size) as u64));
                cursor += 1;
            } else {
                next_unique += 1;
                pattern.push(SymbolId(((k as u64 + 1) << 8) + next_unique));
            }
        }
        threads.push(ThreadSpec {
            pattern,
            period_ms: period,
            jitter_ms: DEFAULT_JITTER_MS,
        });
    }
    threads
}

/// Reads a scenario file:
///
/// ```text
/// duration_ms=60000
/// seed=7
/// thread
/// pattern=0000000000000101,0000000000000102
/// period_ms=300
/// jitter_ms=2
/// ```
pub fn parse_scenario(path: &Path) -> Result<ScenarioSpec, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_scenario_str(&text, name)
}

pub fn parse_scenario_str(text: &str, name: impl Into<String>) -> Result<ScenarioSpec, Error> {
    let mut duration_ms: Option<u64> = None;
    let mut seed: Option<u64> = None;
    let mut threads: Vec<ThreadSpec> = Vec::new();
    let mut current: Option<(usize, Option<Vec<SymbolId>>, Option<u64>, Option<u64>)> = None;

    let finish = |c: Option<(usize, Option<Vec<SymbolId>>, Option<u64>, Option<u64>)>,
                  threads: &mut Vec<ThreadSpec>|
     -> Result<(), Error> {
        if let Some((line, pattern, period, jitter)) = c {
            let pattern = pattern.ok_or_else(|| Error::parse(line, "thread missing pattern="))?;
            let period_ms = period.ok_or_else(|| Error::parse(line, "thread missing period_ms="))?;
            threads.push(ThreadSpec {
                pattern,
                period_ms,
                jitter_ms: jitter.unwrap_or(DEFAULT_JITTER_MS),
            });
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "thread" {
            finish(current.take(), &mut threads)?;
            current = Some((lineno, None, None, None));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got {line:?}")))?;
        let parse_u64 = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::parse(lineno, format!("bad integer {v:?}")))
        };
        match (key, &mut current) {
            ("duration_ms", None) => duration_ms = Some(parse_u64(value)?),
            ("seed", None) => seed = Some(parse_u64(value)?),
            ("pattern", Some((_, pat, _, _))) => {
                let symbols: Vec<SymbolId> = value
                    .split(',')
                    .map(SymbolId::from_str)
                    .collect::<Result<_, _>>()
                    .map_err(|e| Error::parse(lineno, e))?;
                *pat = Some(symbols);
            }
            ("period_ms", Some((_, _, per, _))) => *per = Some(parse_u64(value)?),
            ("jitter_ms", Some((_, _, _, jit))) => *jit = Some(parse_u64(value)?),
            _ => {
                return Err(Error::parse(
                    lineno,
                    format!("unexpected key {key:?} here"),
                ))
            }
        }
    }
    finish(current, &mut threads)?;

    let duration_ms = duration_ms.ok_or_else(|| Error::parse(1, "missing duration_ms="))?;
    if threads.is_empty() {
        return Err(Error::parse(1, "scenario has no thread blocks"));
    }
    Ok(ScenarioSpec {
        name: name.into(),
        threads,
        duration_ms,
        seed: seed.unwrap_or(1),
    })
}

pub fn write_scenario(spec: &ScenarioSpec, path: &Path) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "duration_ms={}", spec.duration_ms);
    let _ = writeln!(out, "seed={}", spec.seed);
    for th in &spec.threads {
        let _ = writeln!(out, "thread");
        let pattern: Vec<String> = th.pattern.iter().map(SymbolId::to_string).collect();
        let _ = writeln!(out, "pattern={}", pattern.join(","));
        let _ = writeln!(out, "period_ms={}", th.period_ms);
        let _ = writeln!(out, "jitter_ms={}", th.jitter_ms);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(x: u64) -> SymbolId {
        SymbolId(x)
    }

    fn tiny_spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            name: "tiny".into(),
            threads: vec![
                ThreadSpec {
                    pattern: vec![sid(1), sid(2)],
                    period_ms: 10,
                    jitter_ms: 2,
                },
                ThreadSpec {
                    pattern: vec![sid(3)],
                    period_ms: 7,
                    jitter_ms: 1,
                },
            ],
            duration_ms: 1000,
            seed,
        }
    }

    #[test]
    fn event_count_is_exact() {
        let (trace, gt) = generate(&tiny_spec(42)).unwrap();
        // floor(1000/10)*2 + floor(1000/7)*1 = 200 + 142
        assert_eq!(trace.events.len(), 342);
        assert_eq!(gt.records.len(), 342);
    }

    #[test]
    fn wire_times_strictly_increase_and_match_truth() {
        let (trace, gt) = generate(&tiny_spec(7)).unwrap();
        for w in trace.events.windows(2) {
            assert!(w[0].time_ms < w[1].time_ms);
        }
        for (ev, r) in trace.events.iter().zip(&gt.records) {
            assert_eq!(ev.time_ms, r.time_ms);
            assert_eq!(ev.symbol, r.symbol);
            assert!(r.time_ms >= r.sched_ms);
        }
    }

    #[test]
    fn per_thread_positions_cycle_in_order() {
        let (_, gt) = generate(&tiny_spec(3)).unwrap();
        let mut expect = [0usize; 2];
        for r in &gt.records {
            assert_eq!(r.pos, expect[r.thread]);
            let len = [2, 1][r.thread];
            expect[r.thread] = (r.pos + 1) % len;
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let (t1, g1) = generate(&tiny_spec(9)).unwrap();
        let (t2, g2) = generate(&tiny_spec(9)).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(g1, g2);
        let (t3, _) = generate(&tiny_spec(10)).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn jitter_zero_stays_on_schedule() {
        let mut spec = tiny_spec(1);
        spec.threads[1].jitter_ms = 0;
        let (_, gt) = generate(&spec).unwrap();
        for r in gt.records.iter().filter(|r| r.thread == 1) {
            assert_eq!(r.sched_ms % 7, 0);
        }
    }

    #[test]
    fn rejects_period_not_exceeding_pattern_length() {
        let mut spec = tiny_spec(1);
        spec.threads[0].period_ms = 2;
        assert!(matches!(generate(&spec), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn builtin_shapes_match_their_table() {
        let scenarios = builtin_scenarios();
        assert_eq!(scenarios.len(), 13);
        let expected: &[&[(usize, usize, u64)]] = &[
            &[(6, 6, 300), (4, 4, 950)],
            &[(6, 6, 300), (4, 4, 950)],
            &[(6, 4, 300), (4, 1, 400)],
            &[(6, 4, 300), (4, 2, 950)],
            &[(10, 9, 300), (4, 2, 600), (4, 3, 200)],
            &[(10, 7, 300), (10, 7, 950), (10, 7, 2000)],
            &[(10, 8, 300), (8, 7, 350), (10, 9, 400)],
            &[(10, 8, 300), (8, 7, 850), (10, 9, 1300)],
            &[(10, 7, 300), (8, 4, 350), (10, 8, 400)],
            &[(6, 3, 300), (4, 2, 350), (6, 2, 400)],
            &[(10, 8, 250), (4, 2, 650), (6, 4, 1100), (8, 7, 420)],
            &[(6, 4, 250), (4, 4, 350), (10, 9, 550), (8, 7, 420)],
            &[(10, 9, 300), (4, 2, 600), (4, 2, 200), (6, 3, 350)],
        ];
        for (sc, shapes) in scenarios.iter().zip(expected) {
            assert_eq!(sc.duration_ms, 970_000);
            assert_eq!(sc.seed, 1);
            assert_eq!(sc.threads.len(), shapes.len());
            // Count globally-unique symbols per thread to check the
            // (length, unique) shape.
            let mut thread_count: std::collections::BTreeMap<SymbolId, usize> =
                std::collections::BTreeMap::new();
            for th in &sc.threads {
                let mut seen: Vec<SymbolId> = th.pattern.clone();
                seen.sort_unstable();
                seen.dedup();
                for s in seen {
                    *thread_count.entry(s).or_insert(0) += 1;
                }
            }
            for (th, &(len, uniq, period)) in sc.threads.iter().zip(shapes.iter()) {
                assert_eq!(th.pattern.len(), len);
                assert_eq!(th.period_ms, period);
                let unique_slots = th
                    .pattern
                    .iter()
                    .filter(|s| thread_count[s] == 1)
                    .count();
                assert_eq!(unique_slots, uniq);
            }
        }
    }

    #[test]
    fn builtin_10_has_the_doubled_shared_bigram() {
        // Scenario 10's third thread interleaves two shared symbols
        // back-to-back twice per burst; that shape is what defeats the
        // practical learner, so pin it down.
        let sc = builtin_scenario(10).unwrap();
        let t3 = &sc.threads[2].pattern;
        assert_eq!(
            t3.as_slice(),
            &[
                sid(0x301),
                sid(0xF001),
                sid(0xF000),
                sid(0x302),
                sid(0xF001),
                sid(0xF000)
            ]
        );
        assert!(builtin_scenario(0).is_none());
        assert!(builtin_scenario(14).is_none());
    }

    #[test]
    fn scenario_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.scenario");
        let spec = ScenarioSpec {
            name: "demo".into(),
            ..tiny_spec(5)
        };
        write_scenario(&spec, &path).unwrap();
        assert_eq!(parse_scenario(&path).unwrap(), spec);
    }

    #[test]
    fn scenario_parser_rejects_damage() {
        for bad in [
            "",
            "seed=1\nthread\npattern=0000000000000001\nperiod_ms=5\n", // no duration
            "duration_ms=100\n",                                       // no threads
            "duration_ms=100\nthread\nperiod_ms=5\n",                  // no pattern
            "duration_ms=100\nthread\npattern=0000000000000001\n",     // no period
            "duration_ms=x\n",
            "duration_ms=100\nbogus=1\n",
            "duration_ms=100\nthread\npattern=01\nperiod_ms=5\n", // short symbol
        ] {
            assert!(parse_scenario_str(bad, "x").is_err(), "should reject {bad:?}");
        }
    }
}
