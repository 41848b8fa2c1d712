//! Sequential schedules built from neighbourhood statistics and their
//! mapping onto a fixed number of cores.
//!
//! All time arithmetic is done in integer milliseconds so that slots always
//! add up to the budget exactly; the rounding remainder of any proportional
//! division goes to the first slot of the group being divided.

use std::collections::BTreeSet;

use itertools::Itertools;
use thiserror::Error;

use crate::kb::NeighborhoodStats;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("portfolio is empty")]
    EmptyPortfolio,
    #[error("time budget must be positive")]
    NonPositiveBudget,
    #[error("pre-solving time {presolve_ms} ms must be below the budget {total_ms} ms")]
    PresolveTooLong { presolve_ms: u64, total_ms: u64 },
    #[error("pre-solving list is empty")]
    EmptyPresolve,
    #[error("solver `{0}` listed twice")]
    DuplicateSolver(String),
    #[error("core count must be positive")]
    NoCores,
    #[error("slots must be positive and sum to {total_ms} ms")]
    BadSlots { total_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub solver: String,
    pub ms: u64,
}

/// Ordered `(solver, time)` slots summing exactly to the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    slots: Vec<Slot>,
    total_ms: u64,
}

impl Schedule {
    /// Validates distinct solvers, positive slots and the exact sum.
    pub fn new(slots: Vec<Slot>, total_ms: u64) -> Result<Self, ScheduleError> {
        if total_ms == 0 {
            return Err(ScheduleError::NonPositiveBudget);
        }
        let mut seen = BTreeSet::new();
        for slot in &slots {
            if !seen.insert(slot.solver.as_str()) {
                return Err(ScheduleError::DuplicateSolver(slot.solver.clone()));
            }
        }
        if slots.iter().any(|s| s.ms == 0) || slots.iter().map(|s| s.ms).sum::<u64>() != total_ms {
            return Err(ScheduleError::BadSlots { total_ms });
        }
        Ok(Schedule { slots, total_ms })
    }

    /// Equal split of `total_ms` over `solvers` in the given order.
    pub fn uniform(solvers: &[String], total_ms: u64) -> Result<Self, ScheduleError> {
        if solvers.is_empty() {
            return Err(ScheduleError::EmptyPortfolio);
        }
        let weights: Vec<(String, u64)> = solvers.iter().map(|s| (s.clone(), 1)).collect();
        Schedule::new(apportion(&weights, total_ms), total_ms)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn total_ms(&self) -> u64 {
        self.total_ms
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Splits `total_ms` proportionally to `weights`, flooring each share and
/// handing the remainder to the first entry. Zero shares are dropped.
fn apportion(weights: &[(String, u64)], total_ms: u64) -> Vec<Slot> {
    let sum: u64 = weights.iter().map(|(_, w)| w).sum();
    assert!(sum > 0, "weights must not all be zero");
    let mut slots: Vec<Slot> = weights
        .iter()
        .map(|(solver, w)| Slot {
            solver: solver.clone(),
            ms: (total_ms as u128 * *w as u128 / sum as u128) as u64,
        })
        .collect();
    let assigned: u64 = slots.iter().map(|s| s.ms).sum();
    slots[0].ms += total_ms - assigned;
    slots.retain(|s| s.ms > 0);
    slots
}

/// Builds the SUNNY schedule for one query.
///
/// 1. Pick the smallest subset of the portfolio that solves as many
///    neighbourhood instances as the whole portfolio does; ties go to the
///    smaller sum of average times, then to the lexicographically smaller
///    sorted id list.
/// 2. Weight each member by its own solved count. The instances nobody in
///    the subset solves add their count to the backup solver (the portfolio
///    member solving most instances over the whole knowledge base), which
///    joins the schedule if needed.
/// 3. Order by ascending average time (ties by id) and split `total_ms`
///    proportionally to the weights.
pub fn sunny_schedule(
    stats: &NeighborhoodStats,
    portfolio: &[String],
    total_ms: u64,
    k: usize,
) -> Result<Schedule, ScheduleError> {
    if portfolio.is_empty() {
        return Err(ScheduleError::EmptyPortfolio);
    }
    if total_ms == 0 {
        return Err(ScheduleError::NonPositiveBudget);
    }
    let solvers: Vec<String> = portfolio.iter().cloned().sorted().dedup().collect();
    let info: Vec<_> = solvers.iter().map(|s| stats.get(s)).collect();

    let coverage = |members: &[usize]| -> usize {
        members
            .iter()
            .flat_map(|&i| info[i].solved.iter())
            .collect::<BTreeSet<_>>()
            .len()
    };
    let all: Vec<usize> = (0..solvers.len()).collect();
    let target = coverage(&all);

    // The whole portfolio reaches the maximum coverage, so the answer is the
    // best subset of the smallest size that also reaches it.
    let mut selected: Vec<usize> = Vec::new();
    if target > 0 {
        for size in 1..=solvers.len() {
            let best = (0..solvers.len())
                .combinations(size)
                .filter(|c| coverage(c) == target)
                .min_by(|a, b| {
                    let time = |c: &Vec<usize>| c.iter().map(|&i| info[i].average_time).sum::<f64>();
                    time(a).total_cmp(&time(b)).then_with(|| {
                        // combinations are emitted with ascending indices and
                        // solvers are sorted, so index order is id order
                        a.iter()
                            .map(|&i| &solvers[i])
                            .cmp(b.iter().map(|&i| &solvers[i]))
                    })
                });
            if let Some(best) = best {
                selected = best;
                break;
            }
        }
    }

    let mut weights: Vec<(usize, u64)> = selected
        .iter()
        .map(|&i| (i, info[i].solved_count() as u64))
        .collect();
    let unsolved = k.saturating_sub(target) as u64;
    if unsolved > 0 || weights.is_empty() {
        let backup = (0..solvers.len())
            .max_by(|&a, &b| info[a].kb_solved.cmp(&info[b].kb_solved).then(b.cmp(&a)))
            .expect("portfolio is non-empty");
        let share = unsolved.max(1);
        match weights.iter_mut().find(|(i, _)| *i == backup) {
            Some(entry) => entry.1 += share,
            None => weights.push((backup, share)),
        }
    }
    weights.sort_by(|&(a, _), &(b, _)| {
        info[a]
            .average_time
            .total_cmp(&info[b].average_time)
            .then_with(|| solvers[a].cmp(&solvers[b]))
    });
    let named: Vec<(String, u64)> = weights
        .into_iter()
        .map(|(i, w)| (solvers[i].clone(), w))
        .collect();
    Schedule::new(apportion(&named, total_ms), total_ms)
}

/// One solver run on a core, `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreSlot {
    pub solver: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

/// Per-core timelines covering `[0, total_ms]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreAssignment {
    cores: Vec<Vec<CoreSlot>>,
    total_ms: u64,
}

impl CoreAssignment {
    /// Builds an assignment from explicit timelines. Each non-empty core must
    /// be contiguous from 0 to `total_ms`; a solver may use only one core.
    pub fn new(cores: Vec<Vec<CoreSlot>>, total_ms: u64) -> Result<Self, ScheduleError> {
        if cores.is_empty() {
            return Err(ScheduleError::NoCores);
        }
        if total_ms == 0 {
            return Err(ScheduleError::NonPositiveBudget);
        }
        let mut seen = BTreeSet::new();
        for core in &cores {
            let mut at = 0;
            for slot in core {
                assert!(
                    slot.start_ms == at && slot.end_ms > slot.start_ms,
                    "core slots must be contiguous and non-empty"
                );
                at = slot.end_ms;
            }
            assert!(core.is_empty() || at == total_ms, "core timeline must end at the budget");
            for solver in core.iter().map(|s| &s.solver).unique() {
                if !seen.insert(solver.clone()) {
                    return Err(ScheduleError::DuplicateSolver(solver.clone()));
                }
            }
        }
        Ok(CoreAssignment { cores, total_ms })
    }

    /// Every solver on its own core for the full window.
    pub fn solver_per_core(solvers: &[String], total_ms: u64) -> Result<Self, ScheduleError> {
        CoreAssignment::new(
            solvers
                .iter()
                .map(|s| {
                    vec![CoreSlot {
                        solver: s.clone(),
                        start_ms: 0,
                        end_ms: total_ms,
                    }]
                })
                .collect(),
            total_ms,
        )
    }

    pub fn cores(&self) -> &[Vec<CoreSlot>] {
        &self.cores
    }

    pub fn total_ms(&self) -> u64 {
        self.total_ms
    }

    pub fn solvers(&self) -> impl Iterator<Item = &str> {
        self.cores.iter().flatten().map(|s| s.solver.as_str())
    }
}

/// Maps a sequential schedule onto `cores` cores.
///
/// With no more slots than cores every solver gets a core for the whole
/// window. Otherwise the first `cores - 1` solvers each take a full core and
/// the rest share the last core, their durations stretched by
/// `total_ms / (sum of remaining durations)` in schedule order.
pub fn parallelize(
    schedule: &Schedule,
    cores: usize,
    total_ms: u64,
) -> Result<CoreAssignment, ScheduleError> {
    if cores == 0 {
        return Err(ScheduleError::NoCores);
    }
    let slots = schedule.slots();
    if slots.len() <= cores {
        let names: Vec<String> = slots.iter().map(|s| s.solver.clone()).collect();
        return CoreAssignment::solver_per_core(&names, total_ms);
    }
    let (head, tail) = slots.split_at(cores - 1);
    let mut timelines: Vec<Vec<CoreSlot>> = head
        .iter()
        .map(|s| {
            vec![CoreSlot {
                solver: s.solver.clone(),
                start_ms: 0,
                end_ms: total_ms,
            }]
        })
        .collect();
    let weights: Vec<(String, u64)> = tail.iter().map(|s| (s.solver.clone(), s.ms)).collect();
    let mut at = 0;
    let last = apportion(&weights, total_ms)
        .into_iter()
        .map(|s| {
            let slot = CoreSlot {
                solver: s.solver,
                start_ms: at,
                end_ms: at + s.ms,
            };
            at += s.ms;
            slot
        })
        .collect();
    timelines.push(last);
    CoreAssignment::new(timelines, total_ms)
}

/// Prepends a pre-solving phase: each static solver runs for an equal share
/// of `presolve_ms`, then `main` runs compressed into the remaining time.
/// A static solver that also appears in `main` keeps its earlier position
/// and absorbs the later slot.
pub fn presolve_prefix(
    static_solvers: &[String],
    presolve_ms: u64,
    main: &Schedule,
) -> Result<Schedule, ScheduleError> {
    let total_ms = main.total_ms();
    if static_solvers.is_empty() {
        return Err(ScheduleError::EmptyPresolve);
    }
    if presolve_ms >= total_ms {
        return Err(ScheduleError::PresolveTooLong {
            presolve_ms,
            total_ms,
        });
    }
    if let Some(dup) = static_solvers.iter().duplicates().next() {
        return Err(ScheduleError::DuplicateSolver(dup.clone()));
    }
    let mut slots = if presolve_ms > 0 {
        let even: Vec<(String, u64)> = static_solvers.iter().map(|s| (s.clone(), 1)).collect();
        apportion(&even, presolve_ms)
    } else {
        Vec::new()
    };
    let weights: Vec<(String, u64)> = main
        .slots()
        .iter()
        .map(|s| (s.solver.clone(), s.ms))
        .collect();
    for slot in apportion(&weights, total_ms - presolve_ms) {
        match slots.iter_mut().find(|s| s.solver == slot.solver) {
            Some(existing) => existing.ms += slot.ms,
            None => slots.push(slot),
        }
    }
    Schedule::new(slots, total_ms)
}
