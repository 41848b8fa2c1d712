//! Offline replay of schedules against recorded solver runs.
//!
//! A recorded run is the list of improving solutions a solver found on an
//! instance plus its final status. Replay shifts each record to the start
//! of the solver's slot and keeps whatever fits before the slot ends. Bound
//! sharing and restarts are not simulated.

use std::collections::BTreeMap;

use log::warn;
use serde::Deserialize;
use thiserror::Error;

use crate::features::FeatureVector;
use crate::kb::{neighbors, solver_stats, InstanceKind, KbError, KnowledgeBase, RunRecord, RunStatus};
use crate::problem::Direction;
use crate::scheduler::{parallelize, sunny_schedule, CoreAssignment, Schedule, ScheduleError};
use crate::scoring::{AnswerKind, InstanceResult};

pub const TRAILS_FILE: &str = "trails.csv";
/// Solver name used for the selector's results.
pub const SELECTOR_NAME: &str = "sunny";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no recorded run of solver `{solver}` on instance `{instance}`")]
    MissingTrail { instance: String, solver: String },
    #[error("test instance `{0}` is also in the knowledge base")]
    Overlap(String),
    #[error("trails line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One solver's recorded behaviour on one instance. Times are seconds
/// from launch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordedRun {
    pub trail: Vec<(f64, Option<i64>)>,
    pub completion: Option<(RunStatus, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub kind: AnswerKind,
    /// Seconds.
    pub time: f64,
    pub objective: Option<i64>,
    pub trail: Vec<(f64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrailRow {
    pub instance: String,
    pub solver: String,
    pub time: f64,
    pub objective: Option<i64>,
}

pub fn parse_trails_csv(text: &str) -> Result<Vec<TrailRow>, SimError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SimError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["instance", "solver", "time", "objective"];
    if headers.iter().ne(expected) {
        return Err(SimError::Malformed {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<TrailRow>().enumerate() {
        let row = row.map_err(|e| SimError::Malformed {
            line: i + 2,
            message: e.to_string(),
        })?;
        if !row.time.is_finite() || row.time < 0.0 {
            return Err(SimError::Malformed {
                line: i + 2,
                message: format!("bad time {}", row.time),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_trails_csv(rows: &[TrailRow]) -> String {
    let mut out = String::from("instance,solver,time,objective\n");
    for r in rows {
        let obj = r.objective.map(|o| o.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.instance, r.solver, r.time, obj));
    }
    out
}

/// Groups run records and trail rows by instance, then solver. A final
/// objective missing from the trail is added at the run's time.
pub fn recorded_runs(
    runs: &[RunRecord],
    trails: &[TrailRow],
) -> BTreeMap<String, BTreeMap<String, RecordedRun>> {
    let mut out: BTreeMap<String, BTreeMap<String, RecordedRun>> = BTreeMap::new();
    for t in trails {
        out.entry(t.instance.clone())
            .or_default()
            .entry(t.solver.clone())
            .or_default()
            .trail
            .push((t.time, t.objective));
    }
    for r in runs {
        let rec = out
            .entry(r.instance.clone())
            .or_default()
            .entry(r.solver.clone())
            .or_default();
        match r.status {
            RunStatus::Unknown | RunStatus::Error => {}
            status => rec.completion = Some((status, r.time)),
        }
        if let Some(obj) = r.objective {
            if !rec.trail.iter().any(|&(_, o)| o == Some(obj)) {
                rec.trail.push((r.time, Some(obj)));
            }
        }
    }
    for rec in out.values_mut().flat_map(|m| m.values_mut()) {
        rec.trail.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// Replays `assignment` against the recorded runs of one instance. The
/// outcome is the earliest completion inside a slot, else the best solution
/// found before the timeout.
pub fn replay_schedule(
    assignment: &CoreAssignment,
    runs: &BTreeMap<String, RecordedRun>,
    kind: InstanceKind,
    instance: &str,
) -> Result<ReplayOutcome, SimError> {
    let timeout = assignment.total_ms() as f64 / 1000.0;
    let direction = kind.direction();
    let mut solutions: Vec<(f64, Option<i64>)> = Vec::new();
    let mut completions: Vec<(f64, RunStatus)> = Vec::new();
    for slot in assignment.cores().iter().flatten() {
        let run = runs.get(&slot.solver).ok_or_else(|| SimError::MissingTrail {
            instance: instance.to_string(),
            solver: slot.solver.clone(),
        })?;
        let start = slot.start_ms as f64 / 1000.0;
        let end = slot.end_ms as f64 / 1000.0;
        for &(t, obj) in &run.trail {
            if start + t <= end {
                solutions.push((start + t, obj));
            }
        }
        if let Some((status, t)) = run.completion {
            if start + t <= end && (kind.is_solved(status) || status == RunStatus::Unsat) {
                completions.push((start + t, status));
            }
        }
    }
    solutions.sort_by(|a, b| a.0.total_cmp(&b.0));
    completions.sort_by(|a, b| a.0.total_cmp(&b.0));

    let improves = |v: i64, best: Option<i64>| match (direction, best) {
        (_, None) => true,
        (Some(d), Some(b)) => d.improves(v, b),
        (None, Some(_)) => false,
    };
    let finished_at = completions.first().map(|&(t, _)| t);
    let mut trail = Vec::new();
    let mut best: Option<i64> = None;
    for &(t, obj) in &solutions {
        if finished_at.is_some_and(|f| t > f) {
            break;
        }
        if let Some(v) = obj {
            if improves(v, best) {
                best = Some(v);
                trail.push((t, v));
            }
        }
    }

    Ok(match completions.first() {
        Some(&(t, RunStatus::Unsat)) => ReplayOutcome {
            kind: AnswerKind::Unsat,
            time: t,
            objective: None,
            trail: Vec::new(),
        },
        Some(&(t, _)) => ReplayOutcome {
            kind: if direction.is_some() {
                AnswerKind::Optimal
            } else {
                AnswerKind::Sat
            },
            time: t,
            objective: best,
            trail,
        },
        // a satisfaction instance is answered by its first solution
        None if direction.is_none() && !solutions.is_empty() => ReplayOutcome {
            kind: AnswerKind::Sat,
            time: solutions[0].0,
            objective: None,
            trail: Vec::new(),
        },
        None if best.is_some() => ReplayOutcome {
            kind: AnswerKind::Sat,
            time: timeout,
            objective: best,
            trail,
        },
        None => ReplayOutcome {
            kind: AnswerKind::Unknown,
            time: timeout,
            objective: None,
            trail: Vec::new(),
        },
    })
}

fn result_of(instance: &str, solver: &str, kind: InstanceKind, outcome: &ReplayOutcome) -> InstanceResult {
    InstanceResult {
        instance: instance.to_string(),
        solver: solver.to_string(),
        kind: outcome.kind,
        time: outcome.time,
        objective: match kind.direction() {
            Some(_) => outcome.objective,
            None => None,
        },
        direction: kind.direction(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorConfig {
    pub k: usize,
    pub timeout_ms: u64,
    pub cores: usize,
    /// Skip selection and give every solver an equal share.
    pub launch_all: bool,
}

pub struct TestInstance {
    pub id: String,
    pub features: FeatureVector,
    pub kind: InstanceKind,
    pub runs: BTreeMap<String, RecordedRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub solved: usize,
    /// Mean time over all instances, unsolved ones counted at the timeout.
    pub average_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    /// The selector's results followed by every single-solver baseline.
    pub results: Vec<InstanceResult>,
}

impl Evaluation {
    pub fn summary(&self) -> BTreeMap<String, Summary> {
        let mut out: BTreeMap<String, (usize, f64, usize)> = BTreeMap::new();
        for r in &self.results {
            let entry = out.entry(r.solver.clone()).or_default();
            let solved = match r.kind {
                AnswerKind::Optimal | AnswerKind::Unsat => true,
                AnswerKind::Sat => r.direction.is_none(),
                _ => false,
            };
            entry.0 += solved as usize;
            entry.1 += r.time;
            entry.2 += 1;
        }
        out.into_iter()
            .map(|(s, (solved, total, n))| {
                (
                    s,
                    Summary {
                        solved,
                        average_time: total / n as f64,
                    },
                )
            })
            .collect()
    }
}

/// Selector assignment for one query.
pub fn select(
    kb: &KnowledgeBase,
    features: &FeatureVector,
    config: &SelectorConfig,
) -> Result<CoreAssignment, SimError> {
    let portfolio: Vec<String> = kb.solvers().map(str::to_string).collect();
    let schedule = if config.launch_all {
        Schedule::uniform(&portfolio, config.timeout_ms)?
    } else {
        let hood = neighbors(kb, features, config.k)?;
        let stats = solver_stats(kb, &hood)?;
        sunny_schedule(&stats, &portfolio, config.timeout_ms, config.k)?
    };
    Ok(parallelize(&schedule, config.cores, config.timeout_ms)?)
}

pub fn evaluate_selector(
    kb: &KnowledgeBase,
    tests: &[TestInstance],
    config: &SelectorConfig,
) -> Result<Evaluation, SimError> {
    if let Some(t) = tests.iter().find(|t| kb.features(&t.id).is_some()) {
        return Err(SimError::Overlap(t.id.clone()));
    }
    let solvers: Vec<String> = kb.solvers().map(str::to_string).collect();
    let mut selector = Vec::new();
    let mut baselines = Vec::new();
    for test in tests {
        let assignment = select(kb, &test.features, config)?;
        let outcome = replay_schedule(&assignment, &test.runs, test.kind, &test.id)?;
        selector.push(result_of(&test.id, SELECTOR_NAME, test.kind, &outcome));
        for s in &solvers {
            if !test.runs.contains_key(s) {
                warn!("no record of {s} on {}; skipping baseline", test.id);
                continue;
            }
            let single = CoreAssignment::solver_per_core(std::slice::from_ref(s), config.timeout_ms)?;
            let outcome = replay_schedule(&single, &test.runs, test.kind, &test.id)?;
            baselines.push(result_of(&test.id, s, test.kind, &outcome));
        }
    }
    selector.extend(baselines);
    Ok(Evaluation { results: selector })
}

/// Evaluates every KB instance against the KB without it.
pub fn leave_one_out(
    kb: &KnowledgeBase,
    trails: &[TrailRow],
    config: &SelectorConfig,
) -> Result<Evaluation, SimError> {
    let records = recorded_runs(kb.runs(), trails);
    let mut results = Vec::new();
    let ids: Vec<String> = kb.instances().map(|(id, _)| id.to_string()).collect();
    for id in &ids {
        let reduced = kb.without(&[id.as_str()])?;
        let test = TestInstance {
            id: id.clone(),
            features: kb.features(id).expect("listed instance").clone(),
            kind: kb.kind(id).expect("listed instance"),
            runs: records.get(id).cloned().unwrap_or_default(),
        };
        let eval = evaluate_selector(&reduced, std::slice::from_ref(&test), config)?;
        results.extend(eval.results);
    }
    // selector rows first, then baselines, each in instance order
    results.sort_by_key(|r| r.solver != SELECTOR_NAME);
    Ok(Evaluation { results })
}

/// Direction of a recorded instance, when the caller only has runs.
pub fn kind_from_runs(runs: &BTreeMap<String, RecordedRun>, maximize: bool) -> InstanceKind {
    let optimization = runs.values().any(|r| r.trail.iter().any(|(_, o)| o.is_some()));
    match (optimization, maximize) {
        (false, _) => InstanceKind::Satisfaction,
        (true, false) => InstanceKind::Optimization(Direction::Minimize),
        (true, true) => InstanceKind::Optimization(Direction::Maximize),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trail: &[(f64, i64)], completion: Option<(RunStatus, f64)>) -> RecordedRun {
        RecordedRun {
            trail: trail.iter().map(|&(t, o)| (t, Some(o))).collect(),
            completion,
        }
    }

    fn one(solver: &str, total_ms: u64) -> CoreAssignment {
        CoreAssignment::solver_per_core(&[solver.to_string()], total_ms).unwrap()
    }

    const MIN: InstanceKind = InstanceKind::Optimization(Direction::Minimize);

    #[test]
    fn completion_inside_slot() {
        let mut runs = BTreeMap::new();
        runs.insert("s".to_string(), rec(&[(10.0, 7), (30.0, 5)], Some((RunStatus::Optimal, 30.0))));
        let out = replay_schedule(&one("s", 1_200_000), &runs, MIN, "i").unwrap();
        assert_eq!(out.kind, AnswerKind::Optimal);
        assert_eq!(out.time, 30.0);
        assert_eq!(out.objective, Some(5));
        assert_eq!(out.trail, vec![(10.0, 7), (30.0, 5)]);
    }

    #[test]
    fn completion_outside_slot() {
        let mut runs = BTreeMap::new();
        runs.insert("s".to_string(), rec(&[], Some((RunStatus::Optimal, 30.0))));
        let out = replay_schedule(&one("s", 20_000), &runs, MIN, "i").unwrap();
        assert_eq!(out.kind, AnswerKind::Unknown);
        assert_eq!(out.time, 20.0);
    }

    #[test]
    fn partial_trail_is_sat() {
        let mut runs = BTreeMap::new();
        runs.insert("s".to_string(), rec(&[(10.0, 7), (30.0, 5)], Some((RunStatus::Optimal, 30.0))));
        let out = replay_schedule(&one("s", 20_000), &runs, MIN, "i").unwrap();
        assert_eq!((out.kind, out.objective, out.time), (AnswerKind::Sat, Some(7), 20.0));
    }

    #[test]
    fn missing_trail() {
        let out = replay_schedule(&one("s", 1000), &BTreeMap::new(), MIN, "i");
        assert!(matches!(out, Err(SimError::MissingTrail { .. })));
    }

    #[test]
    fn satisfaction_completion() {
        let mut runs = BTreeMap::new();
        runs.insert(
            "s".to_string(),
            RecordedRun {
                trail: vec![(3.0, None)],
                completion: Some((RunStatus::Sat, 3.0)),
            },
        );
        let out = replay_schedule(&one("s", 10_000), &runs, InstanceKind::Satisfaction, "i").unwrap();
        assert_eq!((out.kind, out.time), (AnswerKind::Sat, 3.0));
    }

    #[test]
    fn trails_csv() {
        let text = "instance,solver,time,objective\ni,s,1.5,4\ni,t,2,\n";
        let rows = parse_trails_csv(text).unwrap();
        assert_eq!(rows[1].objective, None);
        assert_eq!(render_trails_csv(&rows), text);
        assert!(parse_trails_csv("instance,solver,time\n").is_err());
        assert!(matches!(
            parse_trails_csv("instance,solver,time,objective\ni,s,x,1\n"),
            Err(SimError::Malformed { line: 2, .. })
        ));
    }
}
