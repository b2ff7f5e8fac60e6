//! The three-model comparison harness.
//!
//! For a scenario, generate traffic with ground truth, learn a naive
//! single-DFA model and a practical statechart from the trace alone,
//! derive an ideal statechart from the ground truth, then enforce all
//! three on the same held-out suffix and report false-alarm rates and
//! model sizes.

use crate::dfa::PatternDfa;
use crate::dtmc::build_dtmc;
use crate::error::Error;
use crate::generator::{generate, GroundTruth, ScenarioSpec};
use crate::learner::{
    learn_naive, learn_statechart, learning_window_end, LearnConfig, LEARN_WINDOW_EVENTS,
};
use crate::metrics::{symbol_uniqueness, time_overlap_pct};
use crate::split::{split_symbol_sets, Partition, SymbolSet};
use crate::statechart::Statechart;
use crate::trace::Trace;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

/// Baseline learner settings: a single pattern of up to 100 states.
pub fn naive_config() -> LearnConfig {
    LearnConfig {
        max_pattern_len: 100,
        ..LearnConfig::default()
    }
}

/// Practical statechart learner settings (the defaults).
pub fn practical_config() -> LearnConfig {
    LearnConfig::default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelStats {
    pub false_alarm_pct: f64,
    pub model_size: usize,
    pub mem_bytes: u64,
}

#[derive(Clone, Debug)]
pub struct ScenarioEvaluation {
    pub name: String,
    pub uniqueness: f64,
    pub overlap_pct: f64,
    pub naive: ModelStats,
    /// `Err` carries the reason the statechart learner failed (no usable
    /// cycles, or a model that cannot route every observed symbol).
    pub practical: Result<ModelStats, String>,
    pub ideal: ModelStats,
    /// The partition behind the learned statechart, if learning got far
    /// enough to pick one.
    pub found_partition: Option<Partition>,
    pub truth_partition: Partition,
    pub practical_model: Option<Statechart>,
    pub ideal_model: Statechart,
    pub naive_model: Statechart,
    pub learn_wall: Duration,
}

fn stats_of(model: &Statechart, suffix: &Trace) -> ModelStats {
    let summary = model.enforce(suffix).summary;
    ModelStats {
        false_alarm_pct: summary.false_alarm_pct,
        model_size: model.model_size(),
        mem_bytes: model.memory_footprint_bytes(model.distinct_symbols()),
    }
}

/// Runs the whole protocol for one scenario.
pub fn evaluate_scenario(spec: &ScenarioSpec) -> Result<ScenarioEvaluation, Error> {
    let (trace, gt) = generate(spec)?;
    let practical_cfg = practical_config();
    let naive_cfg = naive_config();

    let window_end = learning_window_end(&trace.events, LEARN_WINDOW_EVENTS);
    // Everything either learner may touch ends here; what follows is the
    // held-out enforcement suffix shared by all three models.
    let holdout_start =
        (window_end + practical_cfg.validation_multiplier * practical_cfg.max_pattern_len)
            .min(trace.events.len());
    let suffix = Trace::new(
        trace.channel_id.clone(),
        trace.events[holdout_start..].to_vec(),
    );

    let naive_model = learn_naive(&trace, &naive_cfg)?;
    let naive = stats_of(&naive_model, &suffix);

    let learn_start = std::time::Instant::now();
    let practical_learned = learn_statechart(&trace, &practical_cfg);
    let learn_wall = learn_start.elapsed();

    let (practical, found_partition, practical_model) = match practical_learned {
        Err(e) => {
            // Learning failed outright, so no partition was chosen; run
            // the split stage on its own to grade how far it got.
            let window = Trace::new(
                trace.channel_id.clone(),
                trace.events[..window_end].to_vec(),
            );
            let split_only = build_dtmc(&window, practical_cfg.t_rare)
                .ok()
                .and_then(|d| split_symbol_sets(&d, practical_cfg.t_sim).into_iter().next());
            (Err(e.to_string()), split_only, None)
        }
        Ok((model, report)) => {
            // A model that cannot route symbols seen during learning
            // would flag them forever; that counts as a failed build.
            let uncovered = trace.events[..window_end]
                .iter()
                .map(|e| e.symbol)
                .find(|&s| !model.covers(s));
            match uncovered {
                Some(s) => (
                    Err(format!("learned model does not cover symbol {s}")),
                    Some(report.chosen_partition),
                    None,
                ),
                None => (
                    Ok(stats_of(&model, &suffix)),
                    Some(report.chosen_partition),
                    Some(model),
                ),
            }
        }
    };

    let ideal_model = ideal_statechart(spec, &gt, window_end);
    let ideal = stats_of(&ideal_model, &suffix);

    Ok(ScenarioEvaluation {
        name: spec.name.clone(),
        uniqueness: symbol_uniqueness(&spec.threads),
        overlap_pct: time_overlap_pct(&gt),
        naive,
        practical,
        ideal,
        found_partition,
        truth_partition: truth_partition(spec, &gt, window_end),
        practical_model,
        ideal_model,
        naive_model,
        learn_wall,
    })
}

/// Builds the reference statechart straight from the scenario: true
/// patterns, gaps read off the ground truth over the learning window.
pub fn ideal_statechart(spec: &ScenarioSpec, gt: &GroundTruth, window_end: usize) -> Statechart {
    let dfas = spec
        .threads
        .iter()
        .enumerate()
        .map(|(k, th)| {
            let l = th.pattern.len();
            let mut per_slot: Vec<Vec<u64>> = vec![Vec::new(); l.saturating_sub(1)];
            // Per-thread records keep their pattern order on the wire, so
            // bursts are consecutive runs of positions 0..l-1.
            let thread_records: Vec<&crate::generator::TruthRecord> = gt
                .records
                .iter()
                .take(window_end)
                .filter(|r| r.thread == k)
                .collect();
            for burst in thread_records.chunks_exact(l) {
                debug_assert!(burst.iter().enumerate().all(|(i, r)| r.pos == i));
                for i in 0..l - 1 {
                    per_slot[i].push(burst[i + 1].time_ms - burst[i].time_ms);
                }
            }
            let mut tns: Vec<f64> = per_slot
                .iter_mut()
                .map(|ds| {
                    if ds.is_empty() {
                        // No complete burst in the window; fall back to
                        // the nominal 1 ms emission spacing.
                        1.0
                    } else {
                        ds.sort_unstable();
                        let n = ds.len();
                        if n % 2 == 1 {
                            ds[n / 2] as f64
                        } else {
                            (ds[n / 2 - 1] as f64 + ds[n / 2] as f64) / 2.0
                        }
                    }
                })
                .collect();
            let spent: f64 = tns.iter().sum();
            tns.push((th.period_ms as f64 - spent).max(0.0));
            PatternDfa::new(k, th.pattern.clone(), tns)
        })
        .collect();
    Statechart::new(dfas)
}

/// The reference partition: one set per thread, instance counts straight
/// from the pattern, frequency = bursts begun inside the window.
pub fn truth_partition(spec: &ScenarioSpec, gt: &GroundTruth, window_end: usize) -> Partition {
    let sets = spec
        .threads
        .iter()
        .enumerate()
        .map(|(k, th)| {
            let mut members: BTreeMap<crate::trace::SymbolId, u32> = BTreeMap::new();
            for &s in &th.pattern {
                *members.entry(s).or_insert(0) += 1;
            }
            let freq = gt
                .records
                .iter()
                .take(window_end)
                .filter(|r| r.thread == k && r.pos == 0)
                .count() as f64;
            SymbolSet {
                id: k,
                freq,
                members,
            }
        })
        .collect();
    Partition {
        sets,
        unclassified: Vec::new(),
    }
}

/// Evaluates all 13 built-in scenarios in order.
pub fn evaluate_builtins() -> Result<Vec<ScenarioEvaluation>, Error> {
    crate::generator::builtin_scenarios()
        .iter()
        .map(evaluate_scenario)
        .collect()
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Renders the comparison as CSV, one row per scenario and model. With
/// `include_medians`, appends per-model median rows over the scenarios
/// where every model was built (failed scenarios would skew the
/// comparison).
pub fn report_csv(evals: &[ScenarioEvaluation], include_medians: bool) -> String {
    let mut out =
        String::from("scenario,model,false_alarm_pct,model_size,mem_bytes,uniqueness,overlap_pct\n");
    let mut row = |scenario: &str, model: &str, stats: Option<&ModelStats>, u: f64, o: f64| {
        match stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{scenario},{model},{:.4},{},{},{:.4},{:.2}",
                    s.false_alarm_pct, s.model_size, s.mem_bytes, u, o
                );
            }
            None => {
                let _ = writeln!(out, "{scenario},{model},FAILED,-,-,{u:.4},{o:.2}");
            }
        }
    };
    for e in evals {
        row(&e.name, "naive", Some(&e.naive), e.uniqueness, e.overlap_pct);
        row(
            &e.name,
            "statechart",
            e.practical.as_ref().ok(),
            e.uniqueness,
            e.overlap_pct,
        );
        row(&e.name, "ideal", Some(&e.ideal), e.uniqueness, e.overlap_pct);
    }

    if include_medians {
        let ok: Vec<&ScenarioEvaluation> =
            evals.iter().filter(|e| e.practical.is_ok()).collect();
        if !ok.is_empty() {
            let med = |f: &dyn Fn(&ScenarioEvaluation) -> f64| {
                let mut v: Vec<f64> = ok.iter().map(|e| f(e)).collect();
                median(&mut v)
            };
            let models: [(&str, Box<dyn Fn(&ScenarioEvaluation) -> &ModelStats>); 3] = [
                ("naive", Box::new(|e| &e.naive)),
                ("statechart", Box::new(|e| e.practical.as_ref().unwrap())),
                ("ideal", Box::new(|e| &e.ideal)),
            ];
            for (name, get) in &models {
                let _ = writeln!(
                    out,
                    "median,{name},{:.4},{:.1},{:.1},{:.4},{:.2}",
                    med(&|e| get(e).false_alarm_pct),
                    med(&|e| get(e).model_size as f64),
                    med(&|e| get(e).mem_bytes as f64),
                    med(&|e: &ScenarioEvaluation| e.uniqueness),
                    med(&|e: &ScenarioEvaluation| e.overlap_pct),
                );
            }
        }
    }
    out
}

/// Per-model median false-alarm percentages over the scenarios where the
/// statechart was successfully built: (naive, statechart, ideal).
pub fn fa_medians(evals: &[ScenarioEvaluation]) -> (f64, f64, f64) {
    let ok: Vec<&ScenarioEvaluation> = evals.iter().filter(|e| e.practical.is_ok()).collect();
    let mut naive: Vec<f64> = ok.iter().map(|e| e.naive.false_alarm_pct).collect();
    let mut practical: Vec<f64> = ok
        .iter()
        .map(|e| e.practical.as_ref().unwrap().false_alarm_pct)
        .collect();
    let mut ideal: Vec<f64> = ok.iter().map(|e| e.ideal.false_alarm_pct).collect();
    (median(&mut naive), median(&mut practical), median(&mut ideal))
}
