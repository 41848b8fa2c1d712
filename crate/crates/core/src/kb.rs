//! Training knowledge base: raw feature vectors, per-solver run records,
//! neighbour queries and neighbourhood statistics.
//!
//! On disk a knowledge base is a directory holding three files:
//!
//! * `kb.meta`: `key=value` lines. `schema` and `timeout` are required;
//!   `solvers=a,b,...` optionally declares the solver set (otherwise it is
//!   the set of solvers named in `runs.csv`) and `maximize=i,j,...` lists
//!   maximization instances for schemas that do not encode the objective.
//! * `features.csv`: `instance,f1,...,fd`.
//! * `runs.csv`: `instance,solver,status,time,objective`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    distance, fit_normalization, normalize, FeatureError, FeatureVector, NormalizationBounds,
    BUILTIN_DIMENSION, BUILTIN_SCHEMA, OBJECTIVE_FLAG_INDEX,
};
use crate::problem::Direction;

pub const META_FILE: &str = "kb.meta";
pub const FEATURES_FILE: &str = "features.csv";
pub const RUNS_FILE: &str = "runs.csv";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Malformed {
        file: &'static str,
        line: u64,
        message: String,
    },
    #[error("{file} line {line}: expected {expected} features, found {found}")]
    DimensionMismatch {
        file: &'static str,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{RUNS_FILE} line {line}: duplicate run for instance `{instance}` and solver `{solver}`")]
    DuplicateRun {
        line: u64,
        instance: String,
        solver: String,
    },
    #[error("{FEATURES_FILE} line {line}: duplicate instance `{instance}`")]
    DuplicateInstance { line: u64, instance: String },
    #[error("{RUNS_FILE} line {line}: unknown instance `{instance}`")]
    UnknownInstance { line: u64, instance: String },
    #[error("{RUNS_FILE} line {line}: unknown solver `{solver}`")]
    UnknownSolver { line: u64, solver: String },
    #[error("knowledge base has no instances")]
    Empty,
    #[error("unknown instance `{0}`")]
    NotInKb(String),
    #[error("k = {k} but the knowledge base holds {size} instances")]
    KTooLarge { k: usize, size: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("query schema `{found}` does not match knowledge base schema `{expected}`")]
    SchemaMismatch { expected: String, found: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn malformed(file: &'static str, line: u64, message: impl Into<String>) -> KbError {
    KbError::Malformed {
        file,
        line,
        message: message.into(),
    }
}

/// Status token of a recorded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunStatus {
    Sat,
    Optimal,
    Unsat,
    Unknown,
    Error,
}

impl RunStatus {
    pub fn token(self) -> &'static str {
        match self {
            RunStatus::Sat => "sat",
            RunStatus::Optimal => "opt",
            RunStatus::Unsat => "unsat",
            RunStatus::Unknown => "unk",
            RunStatus::Error => "err",
        }
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "sat" => RunStatus::Sat,
            "opt" => RunStatus::Optimal,
            "unsat" => RunStatus::Unsat,
            "unk" => RunStatus::Unknown,
            "err" => RunStatus::Error,
            other => return Err(format!("unknown status `{other}`")),
        })
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Whether an instance is a satisfaction or an optimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    Satisfaction,
    Optimization(Direction),
}

impl InstanceKind {
    pub fn direction(self) -> Option<Direction> {
        match self {
            InstanceKind::Satisfaction => None,
            InstanceKind::Optimization(d) => Some(d),
        }
    }

    /// Satisfaction instances are solved by any definite answer,
    /// optimization instances only by a proof of optimality.
    pub fn is_solved(self, status: RunStatus) -> bool {
        match self {
            InstanceKind::Satisfaction => {
                matches!(status, RunStatus::Sat | RunStatus::Unsat | RunStatus::Optimal)
            }
            InstanceKind::Optimization(_) => status == RunStatus::Optimal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    #[serde(with = "status_token")]
    pub status: RunStatus,
    pub time: f64,
    pub objective: Option<i64>,
}

mod status_token {
    use super::RunStatus;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(status: &RunStatus, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(status.token())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RunStatus, D::Error> {
        let token = String::deserialize(d)?;
        token.parse().map_err(serde::de::Error::custom)
    }
}

/// Contents of `kb.meta`.
#[derive(Debug, Clone, PartialEq)]
pub struct KbMeta {
    pub schema: String,
    /// Training timeout in seconds.
    pub timeout: f64,
    pub solvers: Option<Vec<String>>,
    pub maximize: Vec<String>,
}

impl KbMeta {
    pub fn new(schema: impl Into<String>, timeout: f64) -> Self {
        KbMeta {
            schema: schema.into(),
            timeout,
            solvers: None,
            maximize: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut schema = None;
        let mut timeout = None;
        let mut solvers = None;
        let mut maximize = Vec::new();
        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx as u64 + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| malformed(META_FILE, line, "expected key=value"))?;
            let value = value.trim();
            match key.trim() {
                "schema" => schema = Some(value.to_string()),
                "timeout" => {
                    let t: f64 = value
                        .parse()
                        .map_err(|_| malformed(META_FILE, line, "timeout must be a number"))?;
                    if !(t.is_finite() && t > 0.0) {
                        return Err(malformed(META_FILE, line, "timeout must be positive"));
                    }
                    timeout = Some(t);
                }
                "solvers" => solvers = Some(list(value)),
                "maximize" => maximize = list(value),
                other => log::warn!("{META_FILE} line {line}: ignoring unknown key `{other}`"),
            }
        }
        Ok(KbMeta {
            schema: schema.ok_or_else(|| malformed(META_FILE, 0, "missing `schema`"))?,
            timeout: timeout.ok_or_else(|| malformed(META_FILE, 0, "missing `timeout`"))?,
            solvers,
            maximize,
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("schema={}\ntimeout={}\n", self.schema, self.timeout);
        if let Some(solvers) = &self.solvers {
            out.push_str(&format!("solvers={}\n", solvers.join(",")));
        }
        if !self.maximize.is_empty() {
            out.push_str(&format!("maximize={}\n", self.maximize.join(",")));
        }
        out
    }
}

/// Validated, immutable knowledge base.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    meta: KbMeta,
    dimension: usize,
    instances: BTreeMap<String, FeatureVector>,
    solvers: BTreeSet<String>,
    runs: Vec<RunRecord>,
    run_index: HashMap<(String, String), usize>,
    kinds: BTreeMap<String, InstanceKind>,
    bounds: NormalizationBounds,
    normalized: BTreeMap<String, FeatureVector>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.instances == other.instances
            && self.solvers == other.solvers
            && self.runs == other.runs
    }
}

impl KnowledgeBase {
    /// Builds and validates a knowledge base. Errors report CSV line numbers
    /// as if `features` and `runs` were read from files with a header row.
    pub fn new(
        meta: KbMeta,
        features: Vec<(String, Vec<f64>)>,
        runs: Vec<RunRecord>,
    ) -> Result<Self, KbError> {
        let line_of = |i: usize| i as u64 + 2;
        let dimension = features.first().map(|(_, v)| v.len()).ok_or(KbError::Empty)?;
        if meta.schema == BUILTIN_SCHEMA && dimension != BUILTIN_DIMENSION {
            return Err(KbError::DimensionMismatch {
                file: FEATURES_FILE,
                line: 2,
                expected: BUILTIN_DIMENSION,
                found: dimension,
            });
        }

        let mut instances = BTreeMap::new();
        for (i, (id, values)) in features.into_iter().enumerate() {
            if values.len() != dimension {
                return Err(KbError::DimensionMismatch {
                    file: FEATURES_FILE,
                    line: line_of(i),
                    expected: dimension,
                    found: values.len(),
                });
            }
            let vector = FeatureVector::new(meta.schema.clone(), values)
                .map_err(|e| malformed(FEATURES_FILE, line_of(i), e.to_string()))?;
            if instances.insert(id.clone(), vector).is_some() {
                return Err(KbError::DuplicateInstance {
                    line: line_of(i),
                    instance: id,
                });
            }
        }

        let declared: Option<BTreeSet<String>> =
            meta.solvers.as_ref().map(|s| s.iter().cloned().collect());
        let mut solvers = declared.clone().unwrap_or_default();
        let mut run_index = HashMap::new();
        for (i, run) in runs.iter().enumerate() {
            let line = line_of(i);
            if !instances.contains_key(&run.instance) {
                return Err(KbError::UnknownInstance {
                    line,
                    instance: run.instance.clone(),
                });
            }
            match &declared {
                Some(set) if !set.contains(&run.solver) => {
                    return Err(KbError::UnknownSolver {
                        line,
                        solver: run.solver.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    solvers.insert(run.solver.clone());
                }
            }
            if !(run.time.is_finite() && run.time >= 0.0 && run.time <= meta.timeout) {
                return Err(malformed(
                    RUNS_FILE,
                    line,
                    format!("time {} outside [0, {}]", run.time, meta.timeout),
                ));
            }
            if run.objective.is_some() && !matches!(run.status, RunStatus::Sat | RunStatus::Optimal)
            {
                return Err(malformed(
                    RUNS_FILE,
                    line,
                    format!("objective given for a `{}` run", run.status),
                ));
            }
            let key = (run.instance.clone(), run.solver.clone());
            if run_index.insert(key, i).is_some() {
                return Err(KbError::DuplicateRun {
                    line,
                    instance: run.instance.clone(),
                    solver: run.solver.clone(),
                });
            }
        }

        let mut kinds = BTreeMap::new();
        for (id, vector) in &instances {
            let kind = if meta.schema == BUILTIN_SCHEMA {
                match vector.values()[OBJECTIVE_FLAG_INDEX] {
                    1.0 => InstanceKind::Optimization(Direction::Minimize),
                    2.0 => InstanceKind::Optimization(Direction::Maximize),
                    _ => InstanceKind::Satisfaction,
                }
            } else if runs
                .iter()
                .any(|r| &r.instance == id && r.objective.is_some())
                || meta.maximize.contains(id)
            {
                if meta.maximize.contains(id) {
                    InstanceKind::Optimization(Direction::Maximize)
                } else {
                    InstanceKind::Optimization(Direction::Minimize)
                }
            } else {
                InstanceKind::Satisfaction
            };
            kinds.insert(id.clone(), kind);
        }

        let raw: Vec<FeatureVector> = instances.values().cloned().collect();
        let bounds = fit_normalization(&raw)?;
        let normalized = instances
            .iter()
            .map(|(id, v)| Ok((id.clone(), normalize(v, &bounds)?)))
            .collect::<Result<_, FeatureError>>()?;

        Ok(KnowledgeBase {
            meta,
            dimension,
            instances,
            solvers,
            runs,
            run_index,
            kinds,
            bounds,
            normalized,
        })
    }

    pub fn meta(&self) -> &KbMeta {
        &self.meta
    }

    pub fn schema(&self) -> &str {
        &self.meta.schema
    }

    /// Training timeout in seconds.
    pub fn timeout(&self) -> f64 {
        self.meta.timeout
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = (&str, &FeatureVector)> {
        self.instances.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn features(&self, instance: &str) -> Option<&FeatureVector> {
        self.instances.get(instance)
    }

    pub fn solvers(&self) -> impl Iterator<Item = &str> {
        self.solvers.iter().map(String::as_str)
    }

    pub fn runs(&self) -> &[RunRecord] {
        &self.runs
    }

    pub fn run(&self, instance: &str, solver: &str) -> Option<&RunRecord> {
        self.run_index
            .get(&(instance.to_string(), solver.to_string()))
            .map(|&i| &self.runs[i])
    }

    pub fn kind(&self, instance: &str) -> Option<InstanceKind> {
        self.kinds.get(instance).copied()
    }

    pub fn normalization(&self) -> &NormalizationBounds {
        &self.bounds
    }

    /// Whether `solver` solved `instance` (missing runs count as unsolved).
    pub fn solved(&self, instance: &str, solver: &str) -> bool {
        match (self.kind(instance), self.run(instance, solver)) {
            (Some(kind), Some(run)) => kind.is_solved(run.status),
            _ => false,
        }
    }

    /// A copy without the listed instances (and their runs), with the
    /// normalization refitted. Used for leave-one-out evaluation.
    pub fn without(&self, excluded: &[&str]) -> Result<KnowledgeBase, KbError> {
        let features = self
            .instances
            .iter()
            .filter(|(id, _)| !excluded.contains(&id.as_str()))
            .map(|(id, v)| (id.clone(), v.values().to_vec()))
            .collect();
        let runs = self
            .runs
            .iter()
            .filter(|r| !excluded.contains(&r.instance.as_str()))
            .cloned()
            .collect();
        let mut meta = self.meta.clone();
        if meta.solvers.is_none() {
            meta.solvers = Some(self.solvers.iter().cloned().collect());
        }
        KnowledgeBase::new(meta, features, runs)
    }
}

/// Reads a knowledge base directory.
pub fn load_kb(dir: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|source| KbError::Io { path, source })
    };
    let meta = KbMeta::parse(&read(META_FILE)?)?;
    let features = parse_features_csv(&read(FEATURES_FILE)?)?;
    let runs = parse_runs_csv(&read(RUNS_FILE)?)?;
    KnowledgeBase::new(meta, features, runs)
}

/// Writes `kb` as a knowledge base directory, creating it if needed.
pub fn save_kb(kb: &KnowledgeBase, dir: impl AsRef<Path>) -> Result<(), KbError> {
    let dir = dir.as_ref();
    let io_err = |path: PathBuf| move |source| KbError::Io { path, source };
    fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;

    let mut meta = kb.meta.clone();
    meta.solvers = Some(kb.solvers.iter().cloned().collect());
    let path = dir.join(META_FILE);
    fs::write(&path, meta.render()).map_err(io_err(path.clone()))?;

    let path = dir.join(FEATURES_FILE);
    let mut out = String::from("instance");
    for i in 1..=kb.dimension {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (id, v) in &kb.instances {
        out.push_str(id);
        for x in v.values() {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    fs::write(&path, out).map_err(io_err(path.clone()))?;

    let path = dir.join(RUNS_FILE);
    fs::write(&path, render_runs_csv(&kb.runs)).map_err(io_err(path.clone()))?;
    Ok(())
}

pub fn render_runs_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("instance,solver,status,time,objective\n");
    for r in runs {
        let objective = r.objective.map(|o| o.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.instance, r.solver, r.status, r.time, objective
        ));
    }
    out
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses `features.csv`; the dimension is taken from the header.
pub fn parse_features_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>, KbError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| malformed(FEATURES_FILE, 1, e.to_string()))?
        .clone();
    if header.get(0) != Some("instance") || header.len() < 2 {
        return Err(malformed(FEATURES_FILE, 1, "header must be `instance,f1,...,fd`"));
    }
    let dimension = header.len() - 1;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(FEATURES_FILE, line, e.to_string())
        })?;
        let line = record_line(&record);
        if record.len() != dimension + 1 {
            return Err(KbError::DimensionMismatch {
                file: FEATURES_FILE,
                line,
                expected: dimension,
                found: record.len().saturating_sub(1),
            });
        }
        let values = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| malformed(FEATURES_FILE, line, format!("`{f}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((record[0].to_string(), values));
    }
    Ok(rows)
}

/// Parses `runs.csv`.
pub fn parse_runs_csv(text: &str) -> Result<Vec<RunRecord>, KbError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| malformed(RUNS_FILE, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["instance", "solver", "status", "time", "objective"] {
        return Err(malformed(
            RUNS_FILE,
            1,
            "header must be `instance,solver,status,time,objective`",
        ));
    }
    let mut runs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(RUNS_FILE, line, e.to_string())
        })?;
        let line = record_line(&record);
        let run: RunRecord = record
            .deserialize(None)
            .map_err(|e| malformed(RUNS_FILE, line, e.to_string()))?;
        runs.push(run);
    }
    Ok(runs)
}

/// Per-solver statistics over a neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    /// Neighbourhood instances this solver solved.
    pub solved: BTreeSet<String>,
    /// Mean time over the solved neighbourhood instances; the training
    /// timeout when none was solved.
    pub average_time: f64,
    /// Mean quality score over the neighbourhood, in `[0, 1]`.
    pub quality: f64,
    /// Instances solved over the whole knowledge base.
    pub kb_solved: usize,
}

impl SolverStats {
    pub fn solved_count(&self) -> usize {
        self.solved.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodStats {
    pub neighborhood: Vec<String>,
    /// Training timeout, seconds.
    pub timeout: f64,
    pub solvers: BTreeMap<String, SolverStats>,
}

impl NeighborhoodStats {
    /// Stats of `solver`, or the all-unsolved default for solvers the
    /// knowledge base never ran.
    pub fn get(&self, solver: &str) -> SolverStats {
        self.solvers.get(solver).cloned().unwrap_or(SolverStats {
            solved: BTreeSet::new(),
            average_time: self.timeout,
            quality: 0.0,
            kb_solved: 0,
        })
    }
}

/// The `k` stored instances closest to `query`, nearest first. Distances
/// are Euclidean over normalized features; ties go to the lexicographically
/// smaller instance id.
pub fn neighbors(
    kb: &KnowledgeBase,
    query: &FeatureVector,
    k: usize,
) -> Result<Vec<String>, KbError> {
    if k == 0 {
        return Err(KbError::ZeroK);
    }
    if k > kb.len() {
        return Err(KbError::KTooLarge { k, size: kb.len() });
    }
    if query.schema() != kb.schema() {
        return Err(KbError::SchemaMismatch {
            expected: kb.schema().to_string(),
            found: query.schema().to_string(),
        });
    }
    let query = normalize(query, &kb.bounds)?;
    let mut scored = kb
        .normalized
        .iter()
        .map(|(id, v)| Ok((distance(&query, v)?, id.as_str())))
        .collect::<Result<Vec<(f64, &str)>, FeatureError>>()?;
    let order = |a: &(f64, &str), b: &(f64, &str)| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    Ok(scored.into_iter().map(|(_, id)| id.to_string()).collect())
}

/// Aggregates per-solver performance over `neighborhood`.
pub fn solver_stats(
    kb: &KnowledgeBase,
    neighborhood: &[String],
) -> Result<NeighborhoodStats, KbError> {
    if let Some(missing) = neighborhood.iter().find(|id| !kb.instances.contains_key(*id)) {
        return Err(KbError::NotInKb(missing.clone()));
    }

    // quality of every solver on every neighbourhood instance
    let mut quality: HashMap<(&str, &str), f64> = HashMap::new();
    for instance in neighborhood {
        let kind = kb.kinds[instance];
        match kind.direction() {
            None => {
                for solver in &kb.solvers {
                    let q = if kb.solved(instance, solver) { 1.0 } else { 0.0 };
                    quality.insert((instance, solver), q);
                }
            }
            Some(direction) => {
                let values: Vec<(&str, i64)> = kb
                    .solvers
                    .iter()
                    .filter_map(|s| {
                        kb.run(instance, s)
                            .and_then(|r| r.objective)
                            .map(|o| (s.as_str(), o))
                    })
                    .collect();
                let best = values.iter().map(|&(_, v)| v).reduce(|a, b| {
                    if direction.improves(b, a) {
                        b
                    } else {
                        a
                    }
                });
                let worst = values.iter().map(|&(_, v)| v).reduce(|a, b| {
                    if direction.improves(a, b) {
                        b
                    } else {
                        a
                    }
                });
                for solver in &kb.solvers {
                    quality.insert((instance, solver), 0.0);
                }
                if let (Some(best), Some(worst)) = (best, worst) {
                    for (solver, v) in values {
                        let q = if best == worst {
                            1.0
                        } else {
                            (worst as f64 - v as f64) / (worst as f64 - best as f64)
                        };
                        quality.insert((instance, solver), q);
                    }
                }
            }
        }
    }

    let mut solvers = BTreeMap::new();
    for solver in &kb.solvers {
        let solved: BTreeSet<String> = neighborhood
            .iter()
            .filter(|i| kb.solved(i, solver))
            .cloned()
            .collect();
        let average_time = if solved.is_empty() {
            kb.timeout()
        } else {
            solved
                .iter()
                .map(|i| kb.run(i, solver).map(|r| r.time).unwrap_or(kb.timeout()))
                .sum::<f64>()
                / solved.len() as f64
        };
        let quality = if neighborhood.is_empty() {
            0.0
        } else {
            neighborhood
                .iter()
                .map(|i| quality[&(i.as_str(), solver.as_str())])
                .sum::<f64>()
                / neighborhood.len() as f64
        };
        let kb_solved = kb.instances.keys().filter(|i| kb.solved(i, solver)).count();
        solvers.insert(
            solver.clone(),
            SolverStats {
                solved,
                average_time,
                quality,
                kb_solved,
            },
        );
    }
    Ok(NeighborhoodStats {
        neighborhood: neighborhood.to_vec(),
        timeout: kb.timeout(),
        solvers,
    })
}
