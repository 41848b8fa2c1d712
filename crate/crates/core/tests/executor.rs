use std::collections::BTreeMap;

use portfolio_core::executor::{
    run_portfolio, AnswerStatus, EventKind, EventLog, ExecConfig, ScriptLauncher, SolverAnswer,
    SolverSpec, VirtualClock,
};
use portfolio_core::mock::MockScript;
use portfolio_core::problem::{parse_problem, ProblemDescriptor};
use portfolio_core::scheduler::{CoreAssignment, CoreSlot};

const COOP_PROBLEM: &str = "PROBLEM coop\nVAR x INT 0 20\nCON LIN 1*x >= 8\nOBJ MIN x\n";

fn spec(id: &str, check: bool, trusted: bool) -> SolverSpec {
    let template = ["mock-solver", "--bound", "{bound}", "{problem}"]
        .map(String::from)
        .to_vec();
    SolverSpec::new(id, template, check, trusted).unwrap()
}

fn run(
    problem: &ProblemDescriptor,
    solvers: &[(&str, &str, bool, bool)],
    cores: Vec<Vec<(&str, u64, u64)>>,
    timeout_ms: u64,
) -> (SolverAnswer, EventLog) {
    let mut specs = BTreeMap::new();
    let mut scripts = BTreeMap::new();
    for &(id, script, check, trusted) in solvers {
        specs.insert(id.to_string(), spec(id, check, trusted));
        scripts.insert(id.to_string(), MockScript::parse(script).unwrap());
    }
    let cores = cores
        .into_iter()
        .map(|c| {
            c.into_iter()
                .map(|(s, a, b)| CoreSlot {
                    solver: s.to_string(),
                    start_ms: a,
                    end_ms: b,
                })
                .collect()
        })
        .collect();
    let assignment = CoreAssignment::new(cores, timeout_ms).unwrap();
    let config = ExecConfig {
        timeout_ms,
        ..ExecConfig::default()
    };
    run_portfolio(
        problem,
        &assignment,
        &specs,
        &config,
        &mut ScriptLauncher::new(scripts),
        &mut VirtualClock,
    )
    .unwrap()
}

const A: &str = "AT 2 SOLUTION x=10\n";
const B: &str = "AT 2 SOLUTION x=12\nIFBOUND < 10 AT 0.5 SOLUTION x=8\nIFBOUND < 10 AT 1 COMPLETE\n";

#[test]
fn cooperation_trace() {
    let p = parse_problem(COOP_PROBLEM).unwrap();
    let (answer, log) = run(
        &p,
        &[("A", A, true, true), ("B", B, true, true)],
        vec![vec![("A", 0, 60_000)], vec![("B", 0, 60_000)]],
        60_000,
    );
    assert_eq!(answer.status, AnswerStatus::Optimal);
    assert_eq!(answer.objective, Some(8));
    assert_eq!(answer.time_ms, 8000);
    assert_eq!(answer.trail, vec![(2000, 10), (7500, 8)]);
    let expected = "\
t=0 core=1 solver=A event=LAUNCH
t=0 core=2 solver=B event=LAUNCH
t=2000 core=1 solver=A event=SOLUTION objective=10
t=2000 core=1 solver=A event=BOUND bound=10
t=2000 core=2 solver=B event=SOLUTION objective=12
t=7000 core=2 solver=B event=KILL reason=restart
t=7000 core=2 solver=B event=RESTART bound=10
t=7500 core=2 solver=B event=SOLUTION objective=8
t=7500 core=2 solver=B event=BOUND bound=8
t=7500 core=1 solver=A event=KILL reason=restart
t=7500 core=1 solver=A event=RESTART bound=8
t=8000 core=2 solver=B event=COMPLETE claim=optimal value=8 verdict=trusted
t=8000 core=1 solver=A event=KILL reason=done
";
    assert_eq!(log.to_string(), expected);
}

#[test]
fn neither_mock_alone_reaches_eight() {
    let p = parse_problem(COOP_PROBLEM).unwrap();
    for (id, script) in [("A", A), ("B", B)] {
        let (answer, _) = run(&p, &[(id, script, true, true)], vec![vec![(id, 0, 30_000)]], 30_000);
        assert_eq!(answer.status, AnswerStatus::Sat);
        assert_ne!(answer.objective, Some(8));
    }
}

#[test]
fn single_solver_completes() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MAX x\n").unwrap();
    let (answer, log) = run(
        &p,
        &[("s", "AT 2 SOLUTION x=5\nAT 3 COMPLETE", true, true)],
        vec![vec![("s", 0, 1_200_000)]],
        1_200_000,
    );
    assert_eq!(answer.status, AnswerStatus::Optimal);
    assert_eq!(answer.time_ms, 3000);
    assert_eq!(log.of_kind(EventKind::Complete).count(), 1);
}

#[test]
fn unsound_unsat_is_contained() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 1*x >= 2\nOBJ SAT\n").unwrap();
    let (answer, log) = run(
        &p,
        &[
            ("liar", "AT 1 UNSAT", true, false),
            ("honest", "AT 4 SOLUTION x=3", true, true),
        ],
        vec![vec![("liar", 0, 10_000)], vec![("honest", 0, 10_000)]],
        10_000,
    );
    assert_eq!(answer.status, AnswerStatus::Sat);
    assert_eq!(answer.assignment.unwrap().get("x"), Some(3));
    let fails: Vec<_> = log.of_kind(EventKind::CheckFail).collect();
    assert_eq!(fails.len(), 1);
    assert_eq!(fails[0].solver, "liar");
    assert_eq!(fails[0].get("reason"), Some("contradicted"));
}

#[test]
fn trusted_liar_marked_wrong_when_already_contradicted() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN x\n").unwrap();
    let (answer, log) = run(
        &p,
        &[
            ("liar", "AT 3 UNSAT", true, true),
            ("honest", "AT 1 SOLUTION x=0\nAT 5 COMPLETE", true, true),
        ],
        vec![vec![("liar", 0, 10_000)], vec![("honest", 0, 10_000)]],
        10_000,
    );
    assert_eq!(answer.status, AnswerStatus::Optimal);
    assert_eq!(answer.objective, Some(0));
    let fail = log.of_kind(EventKind::CheckFail).next().unwrap();
    assert_eq!((fail.t_ms, fail.solver.as_str()), (3000, "liar"));
}

#[test]
fn checked_invalid_solution_distrusts_solver() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 1*x >= 2\nOBJ MIN x\n").unwrap();
    let (answer, log) = run(
        &p,
        &[
            ("bad", "AT 1 SOLUTION x=1\nAT 2 COMPLETE", true, true),
            ("good", "AT 3 SOLUTION x=4", true, true),
        ],
        vec![vec![("bad", 0, 10_000)], vec![("good", 0, 10_000)]],
        10_000,
    );
    assert_eq!(answer.status, AnswerStatus::Sat);
    assert_eq!(answer.objective, Some(4));
    assert_eq!(answer.time_ms, 10_000);
    let reasons: Vec<_> = log
        .of_kind(EventKind::CheckFail)
        .map(|e| e.get("reason").unwrap().to_string())
        .collect();
    assert_eq!(reasons, vec!["violates:0", "invalid-solution"]);
}

#[test]
fn unchecked_invalid_solution_never_returned() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 1*x >= 2\nOBJ MIN x\n").unwrap();
    let (answer, log) = run(
        &p,
        &[
            ("bad", "AT 1 SOLUTION x=1", false, true),
            ("good", "AT 3 SOLUTION x=4", true, true),
        ],
        vec![vec![("bad", 0, 10_000)], vec![("good", 0, 10_000)]],
        10_000,
    );
    assert_eq!(answer.objective, Some(4));
    assert_eq!(log.of_kind(EventKind::CheckFail).count(), 1);
    assert_eq!(answer.trail, vec![(3000, 4)]);
}

#[test]
fn slot_boundary_passes_bound() {
    let p = parse_problem(COOP_PROBLEM).unwrap();
    let (answer, log) = run(
        &p,
        &[("A", A, true, true), ("B", B, true, true)],
        vec![vec![("A", 0, 3000), ("B", 3000, 20_000)]],
        20_000,
    );
    assert_eq!(answer.status, AnswerStatus::Optimal);
    assert_eq!(answer.time_ms, 4000);
    let lines: Vec<String> = log.events().iter().map(|e| e.to_string()).collect();
    assert!(lines.contains(&"t=3000 core=1 solver=A event=KILL reason=slot-end".to_string()));
    assert!(lines.contains(&"t=3000 core=1 solver=B event=LAUNCH bound=10".to_string()));
}

#[test]
fn output_after_slot_end_is_ignored() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN x\n").unwrap();
    let (answer, _) = run(
        &p,
        &[
            ("late", "AT 2.05 SOLUTION x=0\nAT 2.05 COMPLETE", true, true),
            ("next", "AT 100 SOLUTION x=5", true, true),
        ],
        vec![vec![("late", 0, 2000), ("next", 2000, 5000)]],
        5000,
    );
    assert_eq!(answer.status, AnswerStatus::Unknown);
    assert_eq!(answer.time_ms, 5000);
}

#[test]
fn spawn_failures() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ SAT\n").unwrap();
    let mut specs = BTreeMap::new();
    specs.insert("ghost".to_string(), spec("ghost", true, true));
    let assignment = CoreAssignment::solver_per_core(&["ghost".to_string()], 5000).unwrap();
    let config = ExecConfig {
        timeout_ms: 5000,
        ..ExecConfig::default()
    };
    let (answer, log) = run_portfolio(
        &p,
        &assignment,
        &specs,
        &config,
        &mut ScriptLauncher::default(),
        &mut VirtualClock,
    )
    .unwrap();
    assert_eq!(answer.status, AnswerStatus::Error);
    assert_eq!(log.to_string(), "t=0 core=1 solver=ghost event=ERROR reason=spawn\n");
}

#[test]
fn one_failure_does_not_stop_the_others() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ SAT\n").unwrap();
    let mut specs = BTreeMap::new();
    specs.insert("ghost".to_string(), spec("ghost", true, true));
    specs.insert("ok".to_string(), spec("ok", true, true));
    let mut scripts = BTreeMap::new();
    scripts.insert("ok".to_string(), MockScript::parse("AT 1 SOLUTION x=2").unwrap());
    let assignment =
        CoreAssignment::solver_per_core(&["ghost".to_string(), "ok".to_string()], 5000).unwrap();
    let config = ExecConfig {
        timeout_ms: 5000,
        ..ExecConfig::default()
    };
    let (answer, _) = run_portfolio(
        &p,
        &assignment,
        &specs,
        &config,
        &mut ScriptLauncher::new(scripts),
        &mut VirtualClock,
    )
    .unwrap();
    assert_eq!(answer.status, AnswerStatus::Sat);
    assert_eq!(answer.time_ms, 1000);
}

#[test]
fn stalled_run_times_out_and_idle_runs_end_early() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN x\n").unwrap();
    let (answer, log) = run(&p, &[("s", "AT 1 SOLUTION x=3", true, true)], vec![vec![("s", 0, 9000)]], 9000);
    assert_eq!((answer.status, answer.time_ms), (AnswerStatus::Sat, 9000));
    assert_eq!(log.events().last().unwrap().get("reason"), Some("timeout"));

    let (answer, _) = run(
        &p,
        &[("s", "AT 1 SOLUTION x=3\nAT 2 COMPLETE", true, false)],
        vec![vec![("s", 0, 9000)]],
        9000,
    );
    assert_eq!((answer.status, answer.time_ms), (AnswerStatus::Sat, 2000));
}

#[test]
fn protocol_error_is_logged() {
    let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN x\n").unwrap();
    let (answer, log) = run(
        &p,
        &[("s", "AT 1 PRINT x = oops\nAT 1 PRINT ----------\nAT 2 SOLUTION x=4", true, true)],
        vec![vec![("s", 0, 3000)]],
        3000,
    );
    assert_eq!(answer.objective, Some(4));
    let err = log.of_kind(EventKind::Error).next().unwrap();
    assert_eq!((err.t_ms, err.get("reason")), (1000, Some("protocol")));
}

#[test]
fn virtual_runs_are_reproducible() {
    let p = parse_problem(COOP_PROBLEM).unwrap();
    let go = || {
        run(
            &p,
            &[("A", A, true, true), ("B", B, true, true)],
            vec![vec![("A", 0, 60_000)], vec![("B", 0, 60_000)]],
            60_000,
        )
    };
    let first = go();
    for _ in 0..5 {
        assert_eq!(go(), first);
    }
}
