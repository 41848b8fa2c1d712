//! Scripted stand-in for a constraint solver.
//!
//! Plays back a script on stdout in real time. With the virtual clock
//! variable set it prints the whole timeline at once, each group of lines
//! preceded by a `% t=<ms>` marker, and `% exit` if the script terminates.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use clap::Parser;

use portfolio_core::executor::VIRTUAL_CLOCK_ENV;
use portfolio_core::mock::MockScript;
use portfolio_core::problem::parse_problem;

#[derive(Parser)]
#[command(name = "mock-solver", about = "Scripted solver for testing portfolios")]
struct Args {
    /// Script file.
    #[arg(long)]
    script: PathBuf,
    /// Inclusive objective limit for this run.
    #[arg(long, allow_hyphen_values = true)]
    bound: Option<i64>,
    /// Problem file; parsed to make sure it is well formed.
    problem: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let script = match std::fs::read_to_string(&args.script)
        .map_err(|e| e.to_string())
        .and_then(|text| MockScript::parse(&text).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("mock-solver: {}: {e}", args.script.display());
            return ExitCode::from(2);
        }
    };
    if let Some(path) = &args.problem {
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_problem(&text).map_err(|e| e.to_string()));
        if let Err(e) = parsed {
            eprintln!("mock-solver: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }

    let rendered = script.render(args.bound);
    let mut out = std::io::stdout().lock();
    if std::env::var_os(VIRTUAL_CLOCK_ENV).is_some() {
        let mut current = None;
        for (t, line) in &rendered.lines {
            if current != Some(*t) {
                let _ = writeln!(out, "% t={t}");
                current = Some(*t);
            }
            let _ = writeln!(out, "{line}");
        }
        if let Some(t) = rendered.exit_ms {
            if current != Some(t) {
                let _ = writeln!(out, "% t={t}");
            }
            let _ = writeln!(out, "% exit");
        } else if current.is_none() {
            // a marker tells the reader this run stalls rather than exits
            let _ = writeln!(out, "% t=0");
        }
        let _ = out.flush();
        return ExitCode::SUCCESS;
    }

    let start = Instant::now();
    for (t, line) in &rendered.lines {
        let due = start + Duration::from_millis(*t);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
        if writeln!(out, "{line}").and_then(|_| out.flush()).is_err() {
            return ExitCode::SUCCESS;
        }
    }
    if rendered.exit_ms.is_some() {
        return ExitCode::SUCCESS;
    }
    drop(out);
    loop {
        thread::sleep(Duration::from_secs(3600));
    }
}
