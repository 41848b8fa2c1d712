//! Shared best bound and the bound-and-restart policy.

use std::fmt;
use std::str::FromStr;

use crate::problem::{
    check_solution, evaluate_objective, Assignment, CheckResult, Direction, ProblemDescriptor,
};

/// Best objective found so far by any worker. For satisfaction problems the
/// direction is `None` and only the first solution is accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestBoundRegister {
    best: Option<i64>,
    owner: Option<String>,
    direction: Option<Direction>,
    filled: bool,
}

impl BestBoundRegister {
    pub fn new(direction: Option<Direction>) -> Self {
        BestBoundRegister {
            best: None,
            owner: None,
            direction,
            filled: false,
        }
    }

    pub fn best(&self) -> Option<i64> {
        self.best
    }

    pub fn owner(&self) -> Option<&str> {
        self.owner.as_deref()
    }

    pub fn direction(&self) -> Option<Direction> {
        self.direction
    }

    /// True when `value` would strictly improve the register.
    pub fn would_improve(&self, value: Option<i64>) -> bool {
        match (self.direction, value, self.best) {
            (None, _, _) => !self.filled,
            (Some(_), Some(_), None) => true,
            (Some(d), Some(v), Some(b)) => d.improves(v, b),
            (Some(_), None, _) => false,
        }
    }

    fn accept(&mut self, solver: &str, value: Option<i64>) {
        self.best = value;
        self.owner = Some(solver.to_string());
        self.filled = true;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolutionVerdict {
    /// Register updated; carries the new bound on optimization problems.
    Accepted(Option<i64>),
    NotImproving(Option<i64>),
    Invalid(CheckResult),
}

/// Offers a solution to the register. With `check` set the assignment must
/// pass `check_solution`; objectives are always recomputed here.
pub fn record_solution(
    register: &mut BestBoundRegister,
    solver: &str,
    check: bool,
    assignment: &Assignment,
    problem: &ProblemDescriptor,
) -> SolutionVerdict {
    if check {
        let result = check_solution(problem, assignment);
        if !result.is_valid() {
            return SolutionVerdict::Invalid(result);
        }
    }
    let value = if register.direction.is_some() {
        match evaluate_objective(problem, assignment) {
            Ok(v) => Some(v),
            Err(_) => return SolutionVerdict::Invalid(check_solution(problem, assignment)),
        }
    } else {
        None
    };
    if register.would_improve(value) {
        register.accept(solver, value);
        SolutionVerdict::Accepted(value)
    } else {
        SolutionVerdict::NotImproving(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestartPolicy {
    /// Silent for `T_r` and holding an obsolete bound.
    #[default]
    All,
    /// Silent for `T_r` or holding an obsolete bound.
    Any,
}

impl FromStr for RestartPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(RestartPolicy::All),
            "any" => Ok(RestartPolicy::Any),
            other => Err(format!("unknown restart policy `{other}` (expected all|any)")),
        }
    }
}

impl fmt::Display for RestartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RestartPolicy::All => "all",
            RestartPolicy::Any => "any",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerState {
    pub core: usize,
    pub solver: String,
    pub run_start_ms: u64,
    pub last_solution_ms: u64,
    pub best: Option<i64>,
    pub restarts: u32,
}

impl WorkerState {
    pub fn new(core: usize, solver: impl Into<String>, start_ms: u64, best: Option<i64>) -> Self {
        WorkerState {
            core,
            solver: solver.into(),
            run_start_ms: start_ms,
            last_solution_ms: start_ms,
            best,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartDecision {
    Continue,
    RestartWith(i64),
}

pub fn restart_decision(
    worker: &WorkerState,
    register: &BestBoundRegister,
    threshold_ms: u64,
    now_ms: u64,
    policy: RestartPolicy,
) -> RestartDecision {
    let (Some(direction), Some(global)) = (register.direction(), register.best()) else {
        return RestartDecision::Continue;
    };
    let silent = now_ms.saturating_sub(worker.last_solution_ms) >= threshold_ms;
    let obsolete = match worker.best {
        None => true,
        Some(own) => direction.improves(global, own),
    };
    let restart = match policy {
        RestartPolicy::All => silent && obsolete,
        RestartPolicy::Any => silent || obsolete,
    };
    if restart {
        RestartDecision::RestartWith(global)
    } else {
        RestartDecision::Continue
    }
}
