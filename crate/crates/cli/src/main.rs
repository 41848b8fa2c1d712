mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use portfolio_core::executor::{
    render_solution, run_portfolio, AnswerStatus, Clock, ExecConfig, ProcessLauncher,
    RestartPolicy, SolverAnswer, VirtualClock, WallClock,
};
use portfolio_core::features::{extract_features, BUILTIN_SCHEMA};
use portfolio_core::kb::{
    load_kb, neighbors, parse_features_csv, parse_runs_csv, save_kb, solver_stats, KbMeta,
    KnowledgeBase,
};
use portfolio_core::problem::{parse_problem, ProblemDescriptor};
use portfolio_core::scheduler::{parallelize, presolve_prefix, sunny_schedule, Schedule};
use portfolio_core::scoring::{borda_score, parse_results_csv, render_results_csv, ScoringMode};
use portfolio_core::simulation::{
    evaluate_selector, leave_one_out, parse_trails_csv, recorded_runs, SelectorConfig,
    TestInstance, TRAILS_FILE,
};

const CONFIG_ENV: &str = "PORTFOLIO_CONFIG";
const DEFAULT_TIMEOUT: f64 = 1200.0;
const DEFAULT_CORES: usize = 8;
const DEFAULT_K: usize = 70;
const DEFAULT_RESTART_THRESHOLD: f64 = 5.0;

#[derive(Parser)]
#[command(name = "portfolio", version, about = "k-NN scheduled portfolio of constraint solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem with the configured solvers.
    Solve(SolveArgs),
    /// Build a knowledge base from feature and run tables.
    Train(TrainArgs),
    /// Rank solvers from a results table.
    Score(ScoreArgs),
    /// Replay the selector against recorded runs.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file.
    problem: PathBuf,
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Knowledge base directory.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Time budget in seconds.
    #[arg(short = 'T', long)]
    timeout: Option<f64>,
    #[arg(short = 'c', long)]
    cores: Option<usize>,
    /// Neighbourhood size.
    #[arg(short = 'k', long)]
    knn: Option<usize>,
    /// Seconds without a solution before a dominated solver is restarted.
    #[arg(long)]
    restart_threshold: Option<f64>,
    /// `all` or `any` of the restart conditions.
    #[arg(long)]
    restart_policy: Option<String>,
    /// Give every solver an equal share instead of selecting.
    #[arg(long)]
    no_selection: bool,
    /// Run solvers first for a fixed time, as `id1,id2:seconds`.
    #[arg(long)]
    presolve: Option<String>,
    /// Deterministic time: solvers report their own timestamps.
    #[arg(long)]
    virtual_clock: bool,
    /// Event log file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    runs: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Timeout the runs were recorded with, in seconds.
    #[arg(short = 'T', long, default_value_t = DEFAULT_TIMEOUT)]
    timeout: f64,
    /// Feature schema of the features table.
    #[arg(long, default_value = BUILTIN_SCHEMA)]
    schema: String,
    /// Comma separated instances whose objective is maximized.
    #[arg(long, value_delimiter = ',')]
    maximize: Vec<String>,
}

#[derive(Args)]
struct ScoreArgs {
    results: PathBuf,
    /// Timeout in seconds.
    #[arg(short = 'T', long, default_value_t = DEFAULT_TIMEOUT)]
    timeout: f64,
    /// Also write the scores as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    kb: PathBuf,
    /// Trails table; defaults to the one in the knowledge base directory.
    #[arg(long)]
    trails: Option<PathBuf>,
    /// Held-out instances in knowledge base layout. Without it every KB
    /// instance is evaluated leave-one-out.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(short = 'k', long, default_value_t = DEFAULT_K)]
    knn: usize,
    /// Defaults to the knowledge base timeout.
    #[arg(short = 'T', long)]
    timeout: Option<f64>,
    #[arg(short = 'c', long, default_value_t = DEFAULT_CORES)]
    cores: usize,
    #[arg(long)]
    launch_all: bool,
    /// Results table for `score`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input or configuration problems; reported with exit status 2.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(result: Result<T>) -> Result<T> {
    result.map_err(|e| Usage(e).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Train(args) => train(args).map(|_| ExitCode::SUCCESS),
        Command::Score(args) => score(args).map(|_| ExitCode::SUCCESS),
        Command::Simulate(args) => simulate(args).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn seconds_to_ms(seconds: f64, what: &str) -> Result<u64> {
    if !seconds.is_finite() || seconds <= 0.0 {
        bail!("{what} must be a positive number of seconds");
    }
    Ok((seconds * 1000.0).round() as u64)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

struct SolvePlan {
    exec: ExecConfig,
    cores: usize,
    k: usize,
}

fn plan(args: &SolveArgs, settings: &config::Settings) -> Result<SolvePlan> {
    let timeout = args.timeout.or(settings.timeout).unwrap_or(DEFAULT_TIMEOUT);
    let cores = args.cores.or(settings.cores).unwrap_or(DEFAULT_CORES);
    let k = args.knn.or(settings.knn).unwrap_or(DEFAULT_K);
    let threshold = args
        .restart_threshold
        .or(settings.restart_threshold)
        .unwrap_or(DEFAULT_RESTART_THRESHOLD);
    let policy: RestartPolicy = args
        .restart_policy
        .as_deref()
        .or(settings.restart_policy.as_deref())
        .unwrap_or("all")
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    let timeout_ms = seconds_to_ms(timeout, "timeout")?;
    let threshold_ms = seconds_to_ms(threshold, "restart threshold")?;
    if threshold_ms >= timeout_ms {
        bail!("restart threshold must be below the timeout");
    }
    if cores == 0 {
        bail!("at least one core is needed");
    }
    if k == 0 {
        bail!("k must be positive");
    }
    Ok(SolvePlan {
        exec: ExecConfig {
            timeout_ms,
            restart_threshold_ms: threshold_ms,
            policy,
            ..ExecConfig::default()
        },
        cores,
        k,
    })
}

fn parse_presolve(text: &str, known: &BTreeSet<&str>) -> Result<(Vec<String>, u64)> {
    let (ids, secs) = text
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("--presolve expects `ids:seconds`"))?;
    let ids: Vec<String> = ids.split(',').map(|s| s.trim().to_string()).collect();
    if let Some(unknown) = ids.iter().find(|id| !known.contains(id.as_str())) {
        bail!("--presolve names unknown solver `{unknown}`");
    }
    let secs: f64 = secs
        .trim()
        .parse()
        .map_err(|_| anyhow!("--presolve: bad seconds `{secs}`"))?;
    Ok((ids, seconds_to_ms(secs, "presolve time")?))
}

fn schedule_for(
    args: &SolveArgs,
    plan: &SolvePlan,
    problem: &ProblemDescriptor,
    portfolio: &[String],
    kb_path: Option<&Path>,
) -> Result<Schedule> {
    let total = plan.exec.timeout_ms;
    if args.no_selection {
        return Ok(Schedule::uniform(portfolio, total)?);
    }
    let kb_path = kb_path.ok_or_else(|| anyhow!("a knowledge base (--kb) is needed unless --no-selection is given"))?;
    let kb = load_kb(kb_path).with_context(|| format!("cannot load {}", kb_path.display()))?;
    let mut k = plan.k;
    if k > kb.len() {
        warn!("k = {k} exceeds the knowledge base size; using {}", kb.len());
        k = kb.len();
    }
    let features = extract_features(problem);
    let hood = neighbors(&kb, &features, k)?;
    info!("neighbourhood: {}", hood.join(" "));
    let stats = solver_stats(&kb, &hood)?;
    Ok(sunny_schedule(&stats, portfolio, total, k)?)
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let config_path = usage(
        args.config
            .clone()
            .ok_or_else(|| anyhow!("no config given (--config or {CONFIG_ENV})")),
    )?;
    let config = usage(config::load(&config_path))?;
    let plan = usage(plan(&args, &config.settings))?;
    let problem = usage(read(&args.problem).and_then(|text| {
        parse_problem(&text).with_context(|| format!("bad problem {}", args.problem.display()))
    }))?;

    let portfolio: Vec<String> = config.solvers.keys().cloned().collect();
    let kb_path = args.kb.clone().or(config.settings.kb.clone());
    let mut schedule = usage(schedule_for(&args, &plan, &problem, &portfolio, kb_path.as_deref()))?;
    if let Some(text) = &args.presolve {
        let known = portfolio.iter().map(String::as_str).collect();
        let (ids, ms) = usage(parse_presolve(text, &known))?;
        schedule = usage(presolve_prefix(&ids, ms, &schedule).map_err(Into::into))?;
    }
    for slot in schedule.slots() {
        info!("slot {} {} ms", slot.solver, slot.ms);
    }
    let assignment = parallelize(&schedule, plan.cores, plan.exec.timeout_ms)?;

    let mut launcher = ProcessLauncher::new(Some(config.dir.clone()), args.virtual_clock)?;
    let mut virtual_clock = VirtualClock;
    let mut wall_clock = WallClock::start();
    let clock: &mut dyn Clock = if args.virtual_clock {
        &mut virtual_clock
    } else {
        &mut wall_clock
    };
    let (answer, log) = run_portfolio(
        &problem,
        &assignment,
        &config.solvers,
        &plan.exec,
        &mut launcher,
        clock,
    )?;
    if let Some(path) = &args.log {
        std::fs::write(path, log.to_string())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{}", render_answer(&answer, &problem));
    Ok(if answer.status == AnswerStatus::Error {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn render_answer(answer: &SolverAnswer, problem: &ProblemDescriptor) -> String {
    let mut out = String::new();
    if let Some(a) = &answer.assignment {
        out.push_str(&render_solution(a, problem.variables().iter().map(|v| v.id.as_str())));
    }
    match answer.status {
        AnswerStatus::Optimal => out.push_str("==========\n"),
        AnswerStatus::Unsat => out.push_str("=====UNSATISFIABLE=====\n"),
        AnswerStatus::Unknown => out.push_str("=====UNKNOWN=====\n"),
        AnswerStatus::Error | AnswerStatus::Wrong => out.push_str("=====ERROR=====\n"),
        AnswerStatus::Sat => {}
    }
    out
}

fn train(args: TrainArgs) -> Result<()> {
    let features = usage(read(&args.features).and_then(|t| Ok(parse_features_csv(&t)?)))?;
    let runs = usage(read(&args.runs).and_then(|t| Ok(parse_runs_csv(&t)?)))?;
    if !args.timeout.is_finite() || args.timeout <= 0.0 {
        return usage(Err(anyhow!("timeout must be positive")));
    }
    let mut meta = KbMeta::new(args.schema, args.timeout);
    meta.maximize = args.maximize;
    let kb = usage(KnowledgeBase::new(meta, features, runs).map_err(Into::into))?;
    save_kb(&kb, &args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    println!(
        "instances={} solvers={} runs={}",
        kb.len(),
        kb.solvers().count(),
        kb.runs().len()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let results = usage(read(&args.results).and_then(|t| Ok(parse_results_csv(&t)?)))?;
    let table = usage(borda_score(&results, args.timeout).map_err(Into::into))?;
    let mut out = String::new();
    for (title, mode) in [("complete", ScoringMode::Complete), ("incomplete", ScoringMode::Incomplete)] {
        writeln!(out, "{title}").unwrap();
        for (i, (solver, points)) in table.ranking(mode).iter().enumerate() {
            writeln!(out, "{:>3}  {solver:<20} {points:>10.4}", i + 1).unwrap();
        }
    }
    print!("{out}");
    if let Some(path) = &args.out {
        std::fs::write(path, table.to_csv())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let kb = usage(load_kb(&args.kb).with_context(|| format!("cannot load {}", args.kb.display())))?;
    let trails_path = args.trails.clone().unwrap_or_else(|| args.kb.join(TRAILS_FILE));
    let trails = if trails_path.exists() {
        usage(read(&trails_path).and_then(|t| Ok(parse_trails_csv(&t)?)))?
    } else {
        Vec::new()
    };
    let timeout = args.timeout.unwrap_or(kb.timeout());
    let mut config = SelectorConfig {
        k: args.knn,
        timeout_ms: usage(seconds_to_ms(timeout, "timeout"))?,
        cores: args.cores,
        launch_all: args.launch_all,
    };
    if config.cores == 0 {
        return usage(Err(anyhow!("at least one core is needed")));
    }
    let evaluation = match &args.test {
        None => {
            let limit = kb.len().saturating_sub(1).max(1);
            if config.k > limit {
                warn!("k = {} exceeds the leave-one-out size; using {limit}", config.k);
                config.k = limit;
            }
            usage(leave_one_out(&kb, &trails, &config).map_err(Into::into))?
        }
        Some(dir) => {
            let test_kb = usage(load_kb(dir).with_context(|| format!("cannot load {}", dir.display())))?;
            let test_trails = match std::fs::read_to_string(dir.join(TRAILS_FILE)) {
                Ok(t) => usage(parse_trails_csv(&t).map_err(Into::into))?,
                Err(_) => Vec::new(),
            };
            if config.k > kb.len() {
                warn!("k = {} exceeds the knowledge base size; using {}", config.k, kb.len());
                config.k = kb.len();
            }
            let records = recorded_runs(test_kb.runs(), &test_trails);
            let tests: Vec<TestInstance> = test_kb
                .instances()
                .map(|(id, features)| TestInstance {
                    id: id.to_string(),
                    features: features.clone(),
                    kind: test_kb.kind(id).expect("listed instance"),
                    runs: records.get(id).cloned().unwrap_or_default(),
                })
                .collect();
            usage(evaluate_selector(&kb, &tests, &config).map_err(Into::into))?
        }
    };

    println!("{:<20} {:>8} {:>12}", "solver", "solved", "avg_time");
    for (solver, s) in evaluation.summary() {
        println!("{solver:<20} {:>8} {:>12.3}", s.solved, s.average_time);
    }
    if let Some(path) = &args.out {
        std::fs::write(path, render_results_csv(&evaluation.results))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
