//! Borda-count tournament scoring of per-instance results.
//!
//! Every pair of solvers is compared on every instance. The better answer
//! takes the point; indistinguishable answers split it by solving time
//! (`t_b / (t_a + t_b)` to `a`); two non-answers split it evenly. A wrong
//! answer scores nothing and its opponent is scored as if facing an
//! `UNKNOWN` at the timeout.
//!
//! The `Incomplete` mode ignores optimality and infeasibility proofs: an
//! `OPTIMAL` counts as a plain solution and `UNSAT` as no answer.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::Direction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("cannot compare results of different instances `{0}` and `{1}`")]
    InstanceMismatch(String, String),
    #[error("instance `{0}` has inconsistent objective directions")]
    DirectionMismatch(String),
    #[error("duplicate result for solver `{solver}` on instance `{instance}`")]
    Duplicate { instance: String, solver: String },
    #[error("time {time} of `{solver}` on `{instance}` is outside [0, {timeout}]")]
    TimeOutOfRange {
        instance: String,
        solver: String,
        time: f64,
        timeout: f64,
    },
    #[error("results line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnswerKind {
    Optimal,
    Sat,
    Unsat,
    Unknown,
    Wrong,
}

impl AnswerKind {
    pub fn token(self) -> &'static str {
        match self {
            AnswerKind::Optimal => "opt",
            AnswerKind::Sat => "sat",
            AnswerKind::Unsat => "unsat",
            AnswerKind::Unknown => "unk",
            AnswerKind::Wrong => "wrong",
        }
    }
}

impl FromStr for AnswerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "opt" => AnswerKind::Optimal,
            "sat" => AnswerKind::Sat,
            "unsat" => AnswerKind::Unsat,
            "unk" => AnswerKind::Unknown,
            "wrong" => AnswerKind::Wrong,
            other => return Err(format!("unknown answer kind `{other}`")),
        })
    }
}

impl fmt::Display for AnswerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    #[default]
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub instance: String,
    pub solver: String,
    pub kind: AnswerKind,
    /// Seconds.
    pub time: f64,
    pub objective: Option<i64>,
    /// `None` for satisfaction instances.
    pub direction: Option<Direction>,
}

impl InstanceResult {
    pub fn unknown(
        instance: impl Into<String>,
        solver: impl Into<String>,
        timeout: f64,
        direction: Option<Direction>,
    ) -> Self {
        InstanceResult {
            instance: instance.into(),
            solver: solver.into(),
            kind: AnswerKind::Unknown,
            time: timeout,
            objective: None,
            direction,
        }
    }
}

/// Answer tier and the objective oriented so that larger is better.
fn quality(r: &InstanceResult, mode: ScoringMode) -> (u8, Option<i128>) {
    let oriented = match (r.direction, r.objective) {
        (Some(Direction::Minimize), Some(v)) => Some(-(v as i128)),
        (Some(Direction::Maximize), Some(v)) => Some(v as i128),
        _ => None,
    };
    let satisfaction = r.direction.is_none();
    match (mode, r.kind) {
        (_, AnswerKind::Wrong) | (_, AnswerKind::Unknown) => (0, None),
        (ScoringMode::Incomplete, AnswerKind::Unsat) => (0, None),
        (ScoringMode::Incomplete, _) => (1, oriented),
        (ScoringMode::Complete, AnswerKind::Sat) if !satisfaction => (1, oriented),
        (ScoringMode::Complete, _) => (2, oriented),
    }
}

fn compare(a: &InstanceResult, b: &InstanceResult, mode: ScoringMode) -> Ordering {
    let (ta, va) = quality(a, mode);
    let (tb, vb) = quality(b, mode);
    ta.cmp(&tb).then(match (va, vb) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) if ta == 1 => Ordering::Greater,
        (None, Some(_)) if ta == 1 => Ordering::Less,
        _ => Ordering::Equal,
    })
}

/// Points of `a` and `b` on one instance.
pub fn pairwise_score(
    a: &InstanceResult,
    b: &InstanceResult,
    mode: ScoringMode,
    timeout: f64,
) -> Result<(f64, f64), ScoringError> {
    if a.instance != b.instance {
        return Err(ScoringError::InstanceMismatch(
            a.instance.clone(),
            b.instance.clone(),
        ));
    }
    if a.direction != b.direction {
        return Err(ScoringError::DirectionMismatch(a.instance.clone()));
    }
    let stand_in = |r: &InstanceResult| InstanceResult::unknown(&r.instance, &r.solver, timeout, r.direction);
    Ok(match (a.kind, b.kind) {
        (AnswerKind::Wrong, AnswerKind::Wrong) => (0.0, 0.0),
        (AnswerKind::Wrong, _) => (0.0, pairwise_score(&stand_in(a), b, mode, timeout)?.1),
        (_, AnswerKind::Wrong) => (pairwise_score(a, &stand_in(b), mode, timeout)?.0, 0.0),
        _ => match compare(a, b, mode) {
            Ordering::Greater => (1.0, 0.0),
            Ordering::Less => (0.0, 1.0),
            Ordering::Equal if quality(a, mode).0 == 0 => (0.5, 0.5),
            Ordering::Equal => {
                let total = a.time + b.time;
                if total <= 0.0 {
                    (0.5, 0.5)
                } else {
                    (b.time / total, a.time / total)
                }
            }
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Score {
    pub complete: f64,
    pub incomplete: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub scores: BTreeMap<String, Score>,
}

impl ScoreTable {
    pub fn get(&self, solver: &str) -> Option<Score> {
        self.scores.get(solver).copied()
    }

    /// Solvers by descending score, ties by id.
    pub fn ranking(&self, mode: ScoringMode) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self
            .scores
            .iter()
            .map(|(s, score)| {
                let v = match mode {
                    ScoringMode::Complete => score.complete,
                    ScoringMode::Incomplete => score.incomplete,
                };
                (s.clone(), v)
            })
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver,complete,incomplete\n");
        for (solver, s) in self.ranking(ScoringMode::Complete) {
            let score = self.scores[&solver];
            out.push_str(&format!("{solver},{},{}\n", s, score.incomplete));
        }
        out
    }
}

/// Sums pairwise points over all instances and solver pairs. Solvers
/// without a result on an instance are scored as `UNKNOWN` at `timeout`.
pub fn borda_score(results: &[InstanceResult], timeout: f64) -> Result<ScoreTable, ScoringError> {
    let mut table: BTreeMap<&str, BTreeMap<&str, &InstanceResult>> = BTreeMap::new();
    let mut directions: BTreeMap<&str, Option<Direction>> = BTreeMap::new();
    let mut solvers: BTreeSet<&str> = BTreeSet::new();
    for r in results {
        if !(0.0..=timeout).contains(&r.time) {
            return Err(ScoringError::TimeOutOfRange {
                instance: r.instance.clone(),
                solver: r.solver.clone(),
                time: r.time,
                timeout,
            });
        }
        if *directions.entry(&r.instance).or_insert(r.direction) != r.direction {
            return Err(ScoringError::DirectionMismatch(r.instance.clone()));
        }
        if table
            .entry(&r.instance)
            .or_default()
            .insert(&r.solver, r)
            .is_some()
        {
            return Err(ScoringError::Duplicate {
                instance: r.instance.clone(),
                solver: r.solver.clone(),
            });
        }
        solvers.insert(&r.solver);
    }

    let solvers: Vec<&str> = solvers.into_iter().collect();
    let mut scores: BTreeMap<String, Score> =
        solvers.iter().map(|s| (s.to_string(), Score::default())).collect();
    for (instance, rows) in &table {
        let direction = directions[instance];
        let full: Vec<InstanceResult> = solvers
            .iter()
            .map(|s| match rows.get(s) {
                Some(r) => (*r).clone(),
                None => InstanceResult::unknown(*instance, *s, timeout, direction),
            })
            .collect();
        for i in 0..full.len() {
            for j in i + 1..full.len() {
                for mode in [ScoringMode::Complete, ScoringMode::Incomplete] {
                    let (pa, pb) = pairwise_score(&full[i], &full[j], mode, timeout)?;
                    let (sa, sb) = (solvers[i], solvers[j]);
                    match mode {
                        ScoringMode::Complete => {
                            scores.get_mut(sa).unwrap().complete += pa;
                            scores.get_mut(sb).unwrap().complete += pb;
                        }
                        ScoringMode::Incomplete => {
                            scores.get_mut(sa).unwrap().incomplete += pa;
                            scores.get_mut(sb).unwrap().incomplete += pb;
                        }
                    }
                }
            }
        }
    }
    Ok(ScoreTable { scores })
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    instance: String,
    solver: String,
    kind: String,
    time: f64,
    objective: Option<i64>,
    direction: String,
}

fn direction_token(d: Option<Direction>) -> &'static str {
    match d {
        Some(Direction::Minimize) => "min",
        Some(Direction::Maximize) => "max",
        None => "none",
    }
}

pub fn parse_results_csv(text: &str) -> Result<Vec<InstanceResult>, ScoringError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ScoringError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["instance", "solver", "kind", "time", "objective", "direction"];
    if headers.iter().ne(expected) {
        return Err(ScoringError::Malformed {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<ResultRow>().enumerate() {
        let line = i + 2;
        let malformed = |message: String| ScoringError::Malformed { line, message };
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let kind: AnswerKind = row.kind.parse().map_err(malformed)?;
        let direction = match row.direction.as_str() {
            "min" => Some(Direction::Minimize),
            "max" => Some(Direction::Maximize),
            "none" => None,
            other => return Err(malformed(format!("unknown direction `{other}`"))),
        };
        if !row.time.is_finite() || row.time < 0.0 {
            return Err(malformed(format!("bad time {}", row.time)));
        }
        if direction.is_none() && row.objective.is_some() {
            return Err(malformed("objective on a satisfaction instance".to_string()));
        }
        if direction.is_some()
            && matches!(kind, AnswerKind::Sat | AnswerKind::Optimal)
            && row.objective.is_none()
        {
            return Err(malformed("missing objective".to_string()));
        }
        out.push(InstanceResult {
            instance: row.instance,
            solver: row.solver,
            kind,
            time: row.time,
            objective: row.objective,
            direction,
        });
    }
    Ok(out)
}

pub fn render_results_csv(results: &[InstanceResult]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in results {
        writer
            .serialize(ResultRow {
                instance: r.instance.clone(),
                solver: r.solver.clone(),
                kind: r.kind.token().to_string(),
                time: r.time,
                objective: r.objective,
                direction: direction_token(r.direction).to_string(),
            })
            .expect("writing to memory");
    }
    let bytes = writer.into_inner().expect("writing to memory");
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    if results.is_empty() {
        "instance,solver,kind,time,objective,direction\n".to_string()
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(solver: &str, kind: AnswerKind, time: f64, obj: Option<i64>) -> InstanceResult {
        InstanceResult {
            instance: "i".into(),
            solver: solver.into(),
            kind,
            time,
            objective: obj,
            direction: Some(Direction::Minimize),
        }
    }

    #[test]
    fn pairwise_examples() {
        let a = r("a", AnswerKind::Optimal, 100.0, Some(10));
        let b = r("b", AnswerKind::Sat, 50.0, Some(10));
        assert_eq!(pairwise_score(&a, &b, ScoringMode::Complete, 1200.0).unwrap(), (1.0, 0.0));
        let a = r("a", AnswerKind::Sat, 300.0, Some(10));
        let b = r("b", AnswerKind::Sat, 900.0, Some(10));
        assert_eq!(pairwise_score(&a, &b, ScoringMode::Complete, 1200.0).unwrap(), (0.75, 0.25));
        let w = r("a", AnswerKind::Wrong, 1.0, Some(1));
        assert_eq!(pairwise_score(&w, &b, ScoringMode::Complete, 1200.0).unwrap(), (0.0, 1.0));
        assert_eq!(pairwise_score(&w, &w, ScoringMode::Complete, 1200.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn wrong_against_unknown() {
        let w = r("a", AnswerKind::Wrong, 1.0, None);
        let u = r("b", AnswerKind::Unknown, 1200.0, None);
        assert_eq!(pairwise_score(&w, &u, ScoringMode::Complete, 1200.0).unwrap(), (0.0, 0.5));
    }

    #[test]
    fn incomplete_mode() {
        let a = r("a", AnswerKind::Optimal, 100.0, Some(10));
        let b = r("b", AnswerKind::Sat, 300.0, Some(10));
        assert_eq!(pairwise_score(&a, &b, ScoringMode::Incomplete, 1200.0).unwrap(), (0.75, 0.25));
        let u = r("a", AnswerKind::Unsat, 1.0, None);
        let k = r("b", AnswerKind::Unknown, 1200.0, None);
        assert_eq!(pairwise_score(&u, &k, ScoringMode::Incomplete, 1200.0).unwrap(), (0.5, 0.5));
        assert_eq!(pairwise_score(&u, &k, ScoringMode::Complete, 1200.0).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn satisfaction_answers() {
        let mut a = r("a", AnswerKind::Sat, 10.0, None);
        let mut b = r("b", AnswerKind::Unsat, 30.0, None);
        a.direction = None;
        b.direction = None;
        assert_eq!(pairwise_score(&a, &b, ScoringMode::Complete, 100.0).unwrap(), (0.75, 0.25));
        let zero_a = InstanceResult { time: 0.0, ..a.clone() };
        let zero_b = InstanceResult { time: 0.0, kind: AnswerKind::Sat, ..b };
        assert_eq!(pairwise_score(&zero_a, &zero_b, ScoringMode::Complete, 100.0).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn errors() {
        let a = r("a", AnswerKind::Sat, 1.0, Some(1));
        let mut b = a.clone();
        b.instance = "j".into();
        assert!(pairwise_score(&a, &b, ScoringMode::Complete, 10.0).is_err());
        assert!(matches!(
            borda_score(&[a.clone(), a.clone()], 10.0),
            Err(ScoringError::Duplicate { .. })
        ));
        let mut c = r("c", AnswerKind::Unknown, 10.0, None);
        c.direction = Some(Direction::Maximize);
        assert!(matches!(
            borda_score(&[a.clone(), c], 10.0),
            Err(ScoringError::DirectionMismatch(_))
        ));
        assert!(matches!(
            borda_score(&[r("a", AnswerKind::Sat, 11.0, Some(1))], 10.0),
            Err(ScoringError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn identical_answers_split_evenly() {
        let a = r("a", AnswerKind::Sat, 5.0, Some(3));
        let b = r("b", AnswerKind::Sat, 5.0, Some(3));
        let t = borda_score(&[a, b], 10.0).unwrap();
        assert_eq!(t.get("a").unwrap().complete, 0.5);
        assert_eq!(t.get("b").unwrap().complete, 0.5);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            r("a", AnswerKind::Optimal, 1.5, Some(3)),
            InstanceResult {
                direction: None,
                ..r("b", AnswerKind::Unsat, 2.0, None)
            },
        ];
        let text = render_results_csv(&rows);
        assert!(text.starts_with("instance,solver,kind,time,objective,direction\n"));
        assert_eq!(parse_results_csv(&text).unwrap(), rows);
        assert!(parse_results_csv("instance,solver,kind,time,objective,direction\ni,a,sat,1,,min\n").is_err());
        let err = parse_results_csv("instance,solver,kind,time,objective,direction\ni,a,sat,1,2,min\ni,b,nope,1,,min\n")
            .unwrap_err();
        assert!(matches!(err, ScoringError::Malformed { line: 3, .. }));
    }
}
