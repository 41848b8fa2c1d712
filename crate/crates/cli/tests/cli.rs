use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use portfolio_core::features::{extract_features, BUILTIN_SCHEMA};
use portfolio_core::problem::parse_problem;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
const PORTFOLIO: &str = env!("CARGO_BIN_EXE_portfolio");
const MOCK: &str = env!("CARGO_BIN_EXE_mock-solver");

fn portfolio(dir: &Path, args: &[&str]) -> Output {
    Command::new(PORTFOLIO)
        .args(args)
        .current_dir(dir)
        .env_remove("PORTFOLIO_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Temp dir holding `problem.mpd`, the given scripts and a config.
fn setup(problem: &str, solvers: &[(&str, &str)], extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("problem.mpd"), problem).unwrap();
    let mut ini = format!("[portfolio]\ntimeout = 30\n{extra}");
    for (id, script) in solvers {
        std::fs::write(dir.path().join(format!("{id}.script")), script).unwrap();
        ini.push_str(&format!(
            "\n[solver {id}]\ncmd = {MOCK} --script {id}.script --bound {{bound}} {{problem}}\n"
        ));
    }
    std::fs::write(dir.path().join("portfolio.ini"), ini).unwrap();
    dir
}

const SOLVE: [&str; 6] = [
    "solve",
    "problem.mpd",
    "--config",
    "portfolio.ini",
    "--virtual-clock",
    "--no-selection",
];

#[test]
fn satisfaction_answer() {
    let dir = setup(
        "PROBLEM c\nVAR x INT 0 5\nVAR y INT 0 5\nCON LIN 1*x + 1*y = 7\nOBJ SAT\n",
        &[("bad", "AT 1 SOLUTION x=1,y=1\n"), ("good", "AT 2 SOLUTION y=3,x=4\n")],
        "",
    );
    let out = portfolio(dir.path(), &SOLVE);
    assert!(out.status.success());
    // declaration order, not solver order
    assert_eq!(stdout(&out), "x = 4;\ny = 3;\n----------\n");
}

#[test]
fn unsat_answer() {
    let dir = setup(
        "PROBLEM u\nVAR x INT 0 5\nCON LIN 1*x >= 9\nOBJ SAT\n",
        &[("s", "AT 3 UNSAT\n")],
        "",
    );
    let out = portfolio(dir.path(), &SOLVE);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "=====UNSATISFIABLE=====\n");
}

#[test]
fn unknown_when_nothing_found() {
    let dir = setup(
        "PROBLEM u\nVAR x INT 0 5\nOBJ MIN 1*x\n",
        &[("s", "AT 2 PRINT thinking\n")],
        "",
    );
    let out = portfolio(dir.path(), &SOLVE);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "=====UNKNOWN=====\n");
}

#[test]
fn unlaunchable_solver_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("problem.mpd"), "PROBLEM e\nVAR x INT 0 1\nOBJ SAT\n").unwrap();
    std::fs::write(
        dir.path().join("portfolio.ini"),
        "[solver gone]\ncmd = /nonexistent/solver {problem}\n",
    )
    .unwrap();
    let out = portfolio(dir.path(), &SOLVE);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out), "=====ERROR=====\n");
}

#[test]
fn bad_input_exits_with_two() {
    let dir = setup("PROBLEM p\nVAR x INT 0 5\nOBJ MIN 1*x\n", &[("s", "AT 1 SOLUTION x=1\n")], "");
    std::fs::write(dir.path().join("broken.mpd"), "PROBLEM p\nVAR x INT 5 0\n").unwrap();
    std::fs::write(dir.path().join("broken.ini"), "[solver s]\ncmd = run\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["solve", "broken.mpd", "--config", "portfolio.ini", "--no-selection"],
        &["solve", "problem.mpd", "--config", "broken.ini", "--no-selection"],
        &["solve", "problem.mpd", "--no-selection"],
        // selection needs a knowledge base
        &["solve", "problem.mpd", "--config", "portfolio.ini"],
        &["solve", "problem.mpd", "--config", "portfolio.ini", "--no-selection", "-T", "4", "--restart-threshold", "5"],
    ];
    for args in cases {
        let out = portfolio(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_from_environment() {
    let dir = setup("PROBLEM p\nVAR x INT 0 5\nOBJ MAX 1*x\n", &[("s", "AT 1 SOLUTION x=5\nAT 2 COMPLETE\n")], "");
    let out = Command::new(PORTFOLIO)
        .args(["solve", "problem.mpd", "--virtual-clock", "--no-selection"])
        .env("PORTFOLIO_CONFIG", dir.path().join("portfolio.ini"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out), "x = 5;\n----------\n==========\n");
}

#[test]
fn presolve_runs_static_solver_first() {
    let dir = setup(
        "PROBLEM p\nVAR x INT 0 50\nOBJ MIN 1*x\n",
        &[("fast", "AT 1 SOLUTION x=40\n"), ("slow", "AT 1 SOLUTION x=30\n")],
        "",
    );
    let log = dir.path().join("events.log");
    let mut args = SOLVE.to_vec();
    args.extend(["-c", "1", "--presolve", "fast:4", "--log", log.to_str().unwrap()]);
    let out = portfolio(dir.path(), &args);
    assert!(out.status.success());
    let log = std::fs::read_to_string(log).unwrap();
    let launches: Vec<&str> = log.lines().filter(|l| l.contains("event=LAUNCH")).collect();
    assert!(launches[0].starts_with("t=0 ") && launches[0].contains("solver=fast"), "{log}");
    // fast keeps its presolve position and absorbs its main slot: 4 + 26/2 s
    assert!(launches[1].starts_with("t=17000 ") && launches[1].contains("solver=slow"), "{log}");
    assert_eq!(stdout(&out), "x = 30;\n----------\n");
}

/// Knowledge base in the built-in schema with one instance shaped like the
/// cooperation problem and one far away from it.
fn write_selection_kb(dir: &Path) -> PathBuf {
    let coop = std::fs::read_to_string(Path::new(FIXTURES).join("coop/problem.mpd")).unwrap();
    let near = extract_features(&parse_problem(&coop).unwrap());
    let far: Vec<f64> = near.values().iter().map(|v| v + 10.0).collect();
    let row = |id: &str, v: &[f64]| {
        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        format!("{id},{}\n", cells.join(","))
    };
    let mut features = String::from("instance");
    for i in 1..=near.dimension() {
        features.push_str(&format!(",f{i}"));
    }
    features.push('\n');
    features.push_str(&row("far", &far));
    features.push_str(&row("near", near.values()));
    let kb = dir.join("kb");
    std::fs::create_dir(&kb).unwrap();
    std::fs::write(kb.join("features.csv"), features).unwrap();
    std::fs::write(
        kb.join("runs.csv"),
        "instance,solver,status,time,objective\n\
         near,A,unk,30,\nnear,B,opt,3,8\nfar,A,opt,2,1\nfar,B,unk,30,\n",
    )
    .unwrap();
    std::fs::write(kb.join("kb.meta"), format!("schema={BUILTIN_SCHEMA}\ntimeout=30\n")).unwrap();
    kb
}

#[test]
fn selection_schedules_the_neighbour_solver() {
    let coop = Path::new(FIXTURES).join("coop");
    let dir = setup(
        &std::fs::read_to_string(coop.join("problem.mpd")).unwrap(),
        &[
            ("A", &std::fs::read_to_string(coop.join("a.script")).unwrap()),
            ("B", &std::fs::read_to_string(coop.join("b.script")).unwrap()),
        ],
        "",
    );
    let kb = write_selection_kb(dir.path());
    let log = dir.path().join("events.log");
    let out = portfolio(
        dir.path(),
        &[
            "solve", "problem.mpd", "--config", "portfolio.ini", "--virtual-clock",
            "--kb", kb.to_str().unwrap(), "-k", "1", "--log", log.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(log).unwrap();
    assert!(log.contains("solver=B event=LAUNCH"));
    assert!(!log.contains("solver=A"), "{log}");
    // alone, B never sees a bound below 10
    assert_eq!(stdout(&out), "x = 12;\n----------\n");

    // k larger than the knowledge base is clamped, not rejected
    let out = portfolio(
        dir.path(),
        &["solve", "problem.mpd", "--config", "portfolio.ini", "--virtual-clock", "--kb", kb.to_str().unwrap(), "-k", "9"],
    );
    assert!(out.status.success());
}

#[test]
fn train_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(FIXTURES).join("complementary");
    let kb = dir.path().join("kb");
    let out = portfolio(
        dir.path(),
        &[
            "train",
            "--features", src.join("features.csv").to_str().unwrap(),
            "--runs", src.join("runs.csv").to_str().unwrap(),
            "--out", kb.to_str().unwrap(),
            "-T", "1000", "--schema", "synthetic-v1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "instances=20 solvers=3 runs=60\n");

    let results = dir.path().join("results.csv");
    let out = portfolio(
        dir.path(),
        &["simulate", "--kb", kb.to_str().unwrap(), "-k", "5", "-c", "1", "--out", results.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let solved = |name: &str| -> usize {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(solved("sunny"), 20);
    assert_eq!(solved("gamma"), 14);

    // the results table feeds straight into scoring
    let out = portfolio(dir.path(), &["score", "-T", "1000", results.to_str().unwrap()]);
    assert!(out.status.success());
    let ranking = stdout(&out);
    let first = ranking.lines().nth(1).unwrap();
    assert!(first.contains("sunny"), "{ranking}");
}

#[test]
fn simulate_on_held_out_instances() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(FIXTURES).join("complementary");
    let (train, test) = (dir.path().join("train"), dir.path().join("test"));
    for (d, keep) in [(&train, "0"), (&test, "1")] {
        std::fs::create_dir(d).unwrap();
        std::fs::copy(src.join("kb.meta"), d.join("kb.meta")).unwrap();
        // odd-numbered instances train, even-numbered ones test
        let filter = |file: &str| {
            let text = std::fs::read_to_string(src.join(file)).unwrap();
            let mut lines = text.lines();
            let mut out = format!("{}\n", lines.next().unwrap());
            for l in lines {
                let n: u32 = l[1..3].parse().unwrap();
                if n.is_multiple_of(2) == (keep == "1") {
                    out.push_str(l);
                    out.push('\n');
                }
            }
            out
        };
        std::fs::write(d.join("features.csv"), filter("features.csv")).unwrap();
        std::fs::write(d.join("runs.csv"), filter("runs.csv")).unwrap();
    }
    let out = portfolio(
        dir.path(),
        &["simulate", "--kb", train.to_str().unwrap(), "--test", test.to_str().unwrap(), "-k", "3", "-c", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("sunny") && l.split_whitespace().nth(1) == Some("10")), "{text}");

    // the same instances on both sides are rejected
    let out = portfolio(
        dir.path(),
        &["simulate", "--kb", train.to_str().unwrap(), "--test", train.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn score_rejects_malformed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    std::fs::write(&path, "instance,solver,kind,time,objective,direction\ni,a,maybe,1,,none\n").unwrap();
    let out = portfolio(dir.path(), &["score", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
