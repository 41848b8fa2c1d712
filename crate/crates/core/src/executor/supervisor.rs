//! The supervisor loop: one tick every `tick_ms`, all decisions serialized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use log::{info, warn};

use crate::problem::{check_solution, evaluate_objective, Assignment, Direction, ProblemDescriptor};
use crate::scheduler::{CoreAssignment, CoreSlot};

use super::clock::Clock;
use super::launcher::{LaunchRequest, Launcher, SolverRun, SolverSpec};
use super::log::{EventKind, EventLog};
use super::protocol::{ProtocolParser, SolverEvent};
use super::register::{
    record_solution, restart_decision, BestBoundRegister, RestartDecision, RestartPolicy,
    SolutionVerdict, WorkerState,
};
use super::ExecError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub timeout_ms: u64,
    pub restart_threshold_ms: u64,
    pub policy: RestartPolicy,
    pub tick_ms: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            timeout_ms: 1_200_000,
            restart_threshold_ms: 5_000,
            policy: RestartPolicy::All,
            tick_ms: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnswerStatus {
    Optimal,
    Sat,
    Unsat,
    Unknown,
    Error,
    Wrong,
}

impl fmt::Display for AnswerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerStatus::Optimal => "OPTIMAL",
            AnswerStatus::Sat => "SAT",
            AnswerStatus::Unsat => "UNSAT",
            AnswerStatus::Unknown => "UNKNOWN",
            AnswerStatus::Error => "ERROR",
            AnswerStatus::Wrong => "WRONG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverAnswer {
    pub status: AnswerStatus,
    pub assignment: Option<Assignment>,
    pub objective: Option<i64>,
    pub time_ms: u64,
    /// Checked improving solutions, `(time, objective)`.
    pub trail: Vec<(u64, i64)>,
}

struct Candidate {
    t_ms: u64,
    core: usize,
    solver: String,
    assignment: Assignment,
    objective: Option<i64>,
    valid: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClaimKind {
    Unsat,
    /// The run's own best value is optimal.
    Optimal(i64),
    /// Nothing beats the bound the run was launched with.
    Bound(i64),
}

impl fmt::Display for ClaimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClaimKind::Unsat => write!(f, "claim=unsat"),
            ClaimKind::Optimal(v) => write!(f, "claim=optimal value={v}"),
            ClaimKind::Bound(v) => write!(f, "claim=bound value={v}"),
        }
    }
}

struct Claim {
    core: usize,
    solver: String,
    kind: ClaimKind,
}

struct Worker {
    core: usize,
    slots: Vec<CoreSlot>,
    slot: usize,
    state: WorkerState,
    run: Option<Box<dyn SolverRun>>,
    parser: ProtocolParser,
    launch_bound: Option<i64>,
    /// Best value and candidate index among this run's own solutions.
    run_best: Option<(i64, usize)>,
    run_solutions: usize,
}

impl Worker {
    fn solver(&self) -> &str {
        &self.slots[self.slot].solver
    }

    fn slot_end(&self) -> u64 {
        self.slots[self.slot].end_ms
    }

    fn has_next_slot(&self) -> bool {
        self.slot + 1 < self.slots.len()
    }
}

enum Finish {
    Optimal,
    Unsat,
    Sat,
}

struct Supervisor<'a> {
    problem: &'a ProblemDescriptor,
    direction: Option<Direction>,
    specs: &'a BTreeMap<String, SolverSpec>,
    config: &'a ExecConfig,
    launcher: &'a mut dyn Launcher,
    log: EventLog,
    register: BestBoundRegister,
    workers: Vec<Worker>,
    candidates: Vec<Candidate>,
    pending: Vec<Claim>,
    distrusted: BTreeSet<String>,
    launched_ok: bool,
    now: u64,
    finish: Option<Finish>,
}

/// Runs the solvers of `assignment` on `problem` and returns the portfolio
/// answer together with the event log.
pub fn run_portfolio(
    problem: &ProblemDescriptor,
    assignment: &CoreAssignment,
    specs: &BTreeMap<String, SolverSpec>,
    config: &ExecConfig,
    launcher: &mut dyn Launcher,
    clock: &mut dyn Clock,
) -> Result<(SolverAnswer, EventLog), ExecError> {
    if config.timeout_ms == 0 {
        return Err(ExecError::NonPositiveTimeout);
    }
    if config.tick_ms == 0 {
        return Err(ExecError::ZeroTick);
    }
    if let Some(missing) = assignment.solvers().find(|s| !specs.contains_key(*s)) {
        return Err(ExecError::MissingSpec(missing.to_string()));
    }

    let workers = assignment
        .cores()
        .iter()
        .enumerate()
        .filter(|(_, slots)| !slots.is_empty())
        .map(|(i, slots)| Worker {
            core: i + 1,
            state: WorkerState::new(i + 1, slots[0].solver.clone(), 0, None),
            slots: slots.clone(),
            slot: 0,
            run: None,
            parser: ProtocolParser::new(),
            launch_bound: None,
            run_best: None,
            run_solutions: 0,
        })
        .collect();
    let mut sup = Supervisor {
        problem,
        direction: problem.direction(),
        specs,
        config,
        launcher,
        log: EventLog::new(),
        register: BestBoundRegister::new(problem.direction()),
        workers,
        candidates: Vec::new(),
        pending: Vec::new(),
        distrusted: BTreeSet::new(),
        launched_ok: false,
        now: 0,
        finish: None,
    };

    clock.wait_until(0);
    for w in 0..sup.workers.len() {
        sup.launch(w, None, false);
    }
    let total = config.timeout_ms.min(assignment.total_ms());
    loop {
        sup.deliver();
        if sup.finish.is_some() || sup.now >= total {
            break;
        }
        sup.advance_slots();
        sup.restarts();
        if sup.idle() {
            info!("all solvers exited at {} ms", sup.now);
            break;
        }
        sup.now = (sup.now + config.tick_ms).min(total);
        clock.wait_until(sup.now);
    }
    let answer = sup.conclude(total);
    Ok((answer, sup.log))
}

impl Supervisor<'_> {
    fn launch(&mut self, w: usize, bound: Option<i64>, restart: bool) {
        let solver = self.workers[w].solver().to_string();
        let core = self.workers[w].core;
        let spec = &self.specs[&solver];
        let request = LaunchRequest {
            spec,
            problem: self.problem,
            bound,
            start_ms: self.now,
        };
        let result = self.launcher.launch(&request);
        let worker = &mut self.workers[w];
        worker.parser = ProtocolParser::new();
        worker.launch_bound = bound;
        worker.run_best = None;
        worker.run_solutions = 0;
        match result {
            Ok(run) => {
                worker.run = Some(run);
                let restarts = if restart { worker.state.restarts + 1 } else { 0 };
                worker.state = WorkerState::new(core, solver.clone(), self.now, bound);
                worker.state.restarts = restarts;
                self.launched_ok = true;
                let detail = bound.map(|b| format!("bound={b}")).unwrap_or_default();
                let kind = if restart { EventKind::Restart } else { EventKind::Launch };
                self.log.push(self.now, core, &solver, kind, detail);
            }
            Err(e) => {
                warn!("cannot start solver {solver}: {e}");
                worker.run = None;
                self.log.push(self.now, core, &solver, EventKind::Error, "reason=spawn");
            }
        }
    }

    fn kill(&mut self, w: usize, reason: &str) {
        let worker = &mut self.workers[w];
        if let Some(mut run) = worker.run.take() {
            run.terminate();
            let solver = worker.solver().to_string();
            self.log
                .push(self.now, worker.core, &solver, EventKind::Kill, format!("reason={reason}"));
        }
    }

    fn deliver(&mut self) {
        for w in 0..self.workers.len() {
            let cutoff = self.now.min(self.workers[w].slot_end());
            let lines = match self.workers[w].run.as_mut() {
                Some(run) => run.poll(cutoff),
                None => continue,
            };
            for line in lines {
                if let Some(event) = self.workers[w].parser.push_line(&line) {
                    self.handle(w, event);
                }
                if self.finish.is_some() {
                    break;
                }
            }
            let worker = &mut self.workers[w];
            if let Some(run) = worker.run.as_mut() {
                if run.finished(cutoff) {
                    info!("solver {} on core {} exited", worker.solver(), worker.core);
                    worker.run = None;
                }
            }
            if self.finish.is_some() {
                return;
            }
        }
    }

    fn handle(&mut self, w: usize, event: SolverEvent) {
        let core = self.workers[w].core;
        let solver = self.workers[w].solver().to_string();
        match event {
            SolverEvent::Solution(assignment) => self.solution(w, assignment),
            SolverEvent::ProtocolError(message) => {
                warn!("solver {solver}: {message}");
                self.log.push(self.now, core, &solver, EventKind::Error, "reason=protocol");
            }
            SolverEvent::Complete => self.claim(w, EventKind::Complete),
            SolverEvent::Unsat => self.claim(w, EventKind::Unsat),
        }
    }

    fn solution(&mut self, w: usize, assignment: Assignment) {
        let core = self.workers[w].core;
        let solver = self.workers[w].solver().to_string();
        let check = self.specs[&solver].check;
        let shown = self
            .direction
            .and_then(|_| evaluate_objective(self.problem, &assignment).ok())
            .map(|v| format!("objective={v}"))
            .unwrap_or_default();
        self.log.push(self.now, core, &solver, EventKind::Solution, shown);
        {
            let worker = &mut self.workers[w];
            worker.state.last_solution_ms = self.now;
            worker.run_solutions += 1;
        }

        let verdict = record_solution(&mut self.register, &solver, check, &assignment, self.problem);
        let value = match &verdict {
            SolutionVerdict::Invalid(result) => {
                self.log
                    .push(self.now, core, &solver, EventKind::CheckFail, format!("reason={result}"));
                if check {
                    self.distrusted.insert(solver);
                }
                return;
            }
            SolutionVerdict::Accepted(v) | SolutionVerdict::NotImproving(v) => *v,
        };
        let index = self.candidates.len();
        self.candidates.push(Candidate {
            t_ms: self.now,
            core,
            solver: solver.clone(),
            assignment,
            objective: value,
            valid: check.then_some(true),
        });

        if let (Some(direction), Some(v)) = (self.direction, value) {
            let worker = &mut self.workers[w];
            if worker.state.best.is_none_or(|b| direction.improves(v, b)) {
                worker.state.best = Some(v);
            }
            if worker.run_best.is_none_or(|(b, _)| direction.improves(v, b)) {
                worker.run_best = Some((v, index));
            }
        }
        if let SolutionVerdict::Accepted(Some(v)) = verdict {
            self.log.push(self.now, core, &solver, EventKind::Bound, format!("bound={v}"));
            self.sweep();
        }
        if self.direction.is_none() && self.validate(index) {
            self.sweep();
            self.finish = Some(Finish::Sat);
        }
    }

    fn claim(&mut self, w: usize, event: EventKind) {
        let worker = &self.workers[w];
        let core = worker.core;
        let solver = worker.solver().to_string();
        let bounded = worker.launch_bound;
        let kind = match (event, worker.run_solutions > 0, self.direction) {
            (EventKind::Complete, true, None) => None,
            (EventKind::Complete, true, Some(_)) => match worker.run_best {
                Some((v, _)) => Some(ClaimKind::Optimal(v)),
                None => {
                    // every solution of this run was rejected
                    self.log.push(self.now, core, &solver, event, "claim=optimal verdict=wrong");
                    self.log.push(
                        self.now,
                        core,
                        &solver,
                        EventKind::CheckFail,
                        "reason=invalid-solution claim=optimal",
                    );
                    return;
                }
            },
            _ => Some(match bounded {
                Some(b) => ClaimKind::Bound(b),
                None => ClaimKind::Unsat,
            }),
        };
        let Some(kind) = kind else {
            self.log.push(self.now, core, &solver, event, "claim=none");
            return;
        };

        let wrong_reason = if self.distrusted.contains(&solver) {
            Some("distrusted")
        } else if self.contradicted(kind) {
            Some("contradicted")
        } else if let (ClaimKind::Optimal(_), Some((_, index))) = (kind, self.workers[w].run_best) {
            (!self.validate(index)).then_some("invalid-solution")
        } else {
            None
        };
        if let Some(reason) = wrong_reason {
            self.log.push(self.now, core, &solver, event, format!("{kind} verdict=wrong"));
            self.log.push(
                self.now,
                core,
                &solver,
                EventKind::CheckFail,
                format!("reason={reason} {kind}"),
            );
            self.distrusted.insert(solver);
            return;
        }

        let trusted = self.specs[&solver].reliable_completion;
        let finish = match kind {
            ClaimKind::Unsat => Some(Finish::Unsat),
            ClaimKind::Optimal(_) => Some(Finish::Optimal),
            ClaimKind::Bound(b) => {
                // only conclusive if a checked solution actually reaches b
                (self.best_valid().and_then(|i| self.candidates[i].objective) == Some(b))
                    .then_some(Finish::Optimal)
            }
        };
        let verdict = match (&finish, trusted) {
            (Some(_), true) => "trusted",
            (None, true) => "unverified",
            (_, false) => "untrusted",
        };
        self.log
            .push(self.now, core, &solver, event, format!("{kind} verdict={verdict}"));
        match finish {
            Some(f) if trusted => self.finish = Some(f),
            _ => self.pending.push(Claim { core, solver, kind }),
        }
    }

    /// Runs the checker on a candidate once, logging failures.
    fn validate(&mut self, index: usize) -> bool {
        if let Some(valid) = self.candidates[index].valid {
            return valid;
        }
        let c = &self.candidates[index];
        let result = check_solution(self.problem, &c.assignment);
        let valid = result.is_valid();
        if !valid {
            let (core, solver) = (c.core, c.solver.clone());
            self.log.push(
                self.now,
                core,
                &solver,
                EventKind::CheckFail,
                format!("reason={result}"),
            );
        }
        self.candidates[index].valid = Some(valid);
        valid
    }

    fn contradicted(&mut self, kind: ClaimKind) -> bool {
        let limit = match kind {
            ClaimKind::Unsat => None,
            ClaimKind::Optimal(v) | ClaimKind::Bound(v) => Some(v),
        };
        let direction = self.direction;
        for i in 0..self.candidates.len() {
            let beats = match (limit, direction, self.candidates[i].objective) {
                (None, _, _) => true,
                (Some(l), Some(d), Some(v)) => d.improves(v, l),
                _ => false,
            };
            if beats && self.validate(i) {
                return true;
            }
        }
        false
    }

    /// Re-examines pending claims against the solutions known so far.
    fn sweep(&mut self) {
        let pending = std::mem::take(&mut self.pending);
        for claim in pending {
            if self.contradicted(claim.kind) {
                self.log.push(
                    self.now,
                    claim.core,
                    &claim.solver,
                    EventKind::CheckFail,
                    format!("reason=contradicted {}", claim.kind),
                );
                self.distrusted.insert(claim.solver);
            } else {
                self.pending.push(claim);
            }
        }
    }

    /// Index of the best checked candidate, earliest among equals.
    fn best_valid(&mut self) -> Option<usize> {
        let mut order: Vec<usize> = (0..self.candidates.len()).collect();
        if let Some(d) = self.direction {
            order.sort_by(|&a, &b| {
                let (va, vb) = (self.candidates[a].objective, self.candidates[b].objective);
                match (va, vb) {
                    (Some(x), Some(y)) if d.improves(x, y) => std::cmp::Ordering::Less,
                    (Some(x), Some(y)) if d.improves(y, x) => std::cmp::Ordering::Greater,
                    _ => a.cmp(&b),
                }
            });
        }
        order.into_iter().find(|&i| self.validate(i))
    }

    fn advance_slots(&mut self) {
        for w in 0..self.workers.len() {
            while self.workers[w].has_next_slot() && self.now >= self.workers[w].slot_end() {
                self.kill(w, "slot-end");
                self.workers[w].slot += 1;
                let bound = self.register.best();
                self.launch(w, bound, false);
            }
        }
    }

    fn restarts(&mut self) {
        if self.direction.is_none() {
            return;
        }
        for w in 0..self.workers.len() {
            if self.workers[w].run.is_none() {
                continue;
            }
            let decision = restart_decision(
                &self.workers[w].state,
                &self.register,
                self.config.restart_threshold_ms,
                self.now,
                self.config.policy,
            );
            if let RestartDecision::RestartWith(bound) = decision {
                self.kill(w, "restart");
                self.launch(w, Some(bound), true);
            }
        }
    }

    fn idle(&self) -> bool {
        self.workers
            .iter()
            .all(|w| w.run.is_none() && !w.has_next_slot())
    }

    fn conclude(&mut self, total: u64) -> SolverAnswer {
        let reason = if self.finish.is_some() {
            "done"
        } else if self.now >= total {
            "timeout"
        } else {
            "idle"
        };
        for w in 0..self.workers.len() {
            self.kill(w, reason);
        }
        self.sweep();

        let mut answer = SolverAnswer {
            status: AnswerStatus::Unknown,
            assignment: None,
            objective: None,
            time_ms: self.now,
            trail: Vec::new(),
        };
        if let Some(Finish::Unsat) = self.finish {
            answer.status = AnswerStatus::Unsat;
            return answer;
        }
        if let Some(best) = self.best_valid() {
            answer.status = match self.finish {
                Some(Finish::Optimal) => AnswerStatus::Optimal,
                _ => AnswerStatus::Sat,
            };
            answer.assignment = Some(self.candidates[best].assignment.clone());
            answer.objective = self.candidates[best].objective;
        } else if !self.launched_ok {
            answer.status = AnswerStatus::Error;
        }
        if let Some(d) = self.direction {
            let mut running: Option<i64> = None;
            for i in 0..self.candidates.len() {
                let (t, v) = (self.candidates[i].t_ms, self.candidates[i].objective);
                if let Some(v) = v {
                    if running.is_none_or(|r| d.improves(v, r)) && self.validate(i) {
                        running = Some(v);
                        answer.trail.push((t, v));
                    }
                }
            }
        }
        answer
    }
}
