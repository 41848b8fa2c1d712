//! Starting solver runs, either as child processes or from in-memory scripts.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use log::warn;
use tempfile::TempDir;

use crate::mock::MockScript;
use crate::problem::{improvement_limit, tighten_bound, ProblemDescriptor};

use super::ExecError;

/// Environment variable telling a solver to print `% t=<ms>` markers
/// instead of sleeping.
pub const VIRTUAL_CLOCK_ENV: &str = "PORTFOLIO_VIRTUAL_CLOCK";

const PROBLEM_PLACEHOLDER: &str = "{problem}";
const BOUND_PLACEHOLDER: &str = "{bound}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverSpec {
    pub id: String,
    pub template: Vec<String>,
    pub check: bool,
    pub reliable_completion: bool,
}

impl SolverSpec {
    pub fn new(
        id: impl Into<String>,
        template: Vec<String>,
        check: bool,
        reliable_completion: bool,
    ) -> Result<Self, ExecError> {
        let id = id.into();
        let count: usize = template
            .iter()
            .map(|t| t.matches(PROBLEM_PLACEHOLDER).count())
            .sum();
        if count != 1 || template.is_empty() {
            return Err(ExecError::BadTemplate(id));
        }
        Ok(SolverSpec {
            id,
            template,
            check,
            reliable_completion,
        })
    }

    pub fn accepts_bound(&self) -> bool {
        self.template.iter().any(|t| t.contains(BOUND_PLACEHOLDER))
    }

    /// Command line for one run. Without a bound every token mentioning
    /// `{bound}` is dropped, together with a preceding flag when the
    /// placeholder stands alone.
    pub fn argv(&self, problem_path: &str, bound: Option<i64>) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for token in &self.template {
            if token.contains(BOUND_PLACEHOLDER) {
                match bound {
                    Some(b) => out.push(token.replace(BOUND_PLACEHOLDER, &b.to_string())),
                    None => {
                        if token == BOUND_PLACEHOLDER
                            && out.last().is_some_and(|p| p.starts_with('-'))
                        {
                            out.pop();
                        }
                    }
                }
                continue;
            }
            out.push(token.replace(PROBLEM_PLACEHOLDER, problem_path));
        }
        out
    }
}

pub struct LaunchRequest<'a> {
    pub spec: &'a SolverSpec,
    pub problem: &'a ProblemDescriptor,
    /// Objective value the run has to beat, if any.
    pub bound: Option<i64>,
    pub start_ms: u64,
}

impl LaunchRequest<'_> {
    /// Value substituted for `{bound}`: the inclusive limit a solution must
    /// reach to improve on the bound.
    pub fn bound_argument(&self) -> Option<i64> {
        let direction = self.problem.direction()?;
        self.bound.map(|b| improvement_limit(direction, b))
    }
}

/// A started solver.
pub trait SolverRun {
    /// Output lines produced at or before `cutoff_ms`, in order.
    fn poll(&mut self, cutoff_ms: u64) -> Vec<String>;
    /// True once the solver exited and all of its output was consumed.
    fn finished(&mut self, at_ms: u64) -> bool;
    fn terminate(&mut self);
}

pub trait Launcher {
    fn launch(&mut self, request: &LaunchRequest<'_>) -> Result<Box<dyn SolverRun>, String>;
}

/// Output fully known in advance, with absolute timestamps.
#[derive(Debug)]
pub struct BufferedRun {
    lines: VecDeque<(u64, String)>,
    exit_ms: Option<u64>,
}

impl BufferedRun {
    pub fn new(lines: Vec<(u64, String)>, exit_ms: Option<u64>) -> Self {
        BufferedRun {
            lines: lines.into(),
            exit_ms,
        }
    }
}

impl SolverRun for BufferedRun {
    fn poll(&mut self, cutoff_ms: u64) -> Vec<String> {
        let mut out = Vec::new();
        while self.lines.front().is_some_and(|(t, _)| *t <= cutoff_ms) {
            out.push(self.lines.pop_front().unwrap().1);
        }
        out
    }

    fn finished(&mut self, at_ms: u64) -> bool {
        self.exit_ms.is_some_and(|e| e <= at_ms) && self.lines.is_empty()
    }

    fn terminate(&mut self) {
        self.lines.clear();
        self.exit_ms = Some(0);
    }
}

/// Runs mock scripts in process.
#[derive(Debug, Default)]
pub struct ScriptLauncher {
    scripts: BTreeMap<String, MockScript>,
}

impl ScriptLauncher {
    pub fn new(scripts: BTreeMap<String, MockScript>) -> Self {
        ScriptLauncher { scripts }
    }
}

impl Launcher for ScriptLauncher {
    fn launch(&mut self, request: &LaunchRequest<'_>) -> Result<Box<dyn SolverRun>, String> {
        let script = self
            .scripts
            .get(&request.spec.id)
            .ok_or_else(|| "no script".to_string())?;
        let bound = if request.spec.accepts_bound() {
            request.bound_argument()
        } else {
            None
        };
        let rendered = script.render(bound);
        let start = request.start_ms;
        Ok(Box::new(BufferedRun::new(
            rendered.lines.into_iter().map(|(t, l)| (start + t, l)).collect(),
            rendered.exit_ms.map(|e| start + e),
        )))
    }
}

/// Spawns solver processes. Problem files go to a private temporary
/// directory; with `virtual_clock` the solver's whole output is read up
/// front and timed by its `% t=<ms>` markers.
pub struct ProcessLauncher {
    workdir: Option<PathBuf>,
    virtual_clock: bool,
    files: TempDir,
    launched: usize,
    virtual_guard: Duration,
}

impl ProcessLauncher {
    pub fn new(workdir: Option<PathBuf>, virtual_clock: bool) -> std::io::Result<Self> {
        Ok(ProcessLauncher {
            workdir,
            virtual_clock,
            files: tempfile::Builder::new().prefix("portfolio-").tempdir()?,
            launched: 0,
            virtual_guard: Duration::from_secs(10),
        })
    }

    fn command(&mut self, request: &LaunchRequest<'_>) -> Result<Command, String> {
        let problem = match request.bound {
            Some(b) if request.problem.direction().is_some() => {
                tighten_bound(request.problem, b).map_err(|e| e.to_string())?
            }
            _ => request.problem.clone(),
        };
        self.launched += 1;
        let path = self.files.path().join(format!("run-{}.mpd", self.launched));
        std::fs::write(&path, problem.to_mpd()).map_err(|e| e.to_string())?;
        let bound = if request.spec.accepts_bound() {
            request.bound_argument()
        } else {
            None
        };
        let argv = request.spec.argv(&path.to_string_lossy(), bound);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        if self.virtual_clock {
            cmd.env(VIRTUAL_CLOCK_ENV, "1");
        }
        Ok(cmd)
    }
}

enum Message {
    Line(u64, String),
    Eof,
}

fn spawn_reader(child: &mut Child, start_ms: u64) -> Receiver<Message> {
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    let spawned = Instant::now();
    thread::spawn(move || {
        let mut reader = BufReader::new(stdout);
        let mut buf = Vec::new();
        loop {
            buf.clear();
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) | Err(_) => break,
                Ok(_) => {
                    let line = String::from_utf8_lossy(&buf).trim_end().to_string();
                    let t = start_ms + spawned.elapsed().as_millis() as u64;
                    if tx.send(Message::Line(t, line)).is_err() {
                        return;
                    }
                }
            }
        }
        let _ = tx.send(Message::Eof);
    });
    rx
}

impl Launcher for ProcessLauncher {
    fn launch(&mut self, request: &LaunchRequest<'_>) -> Result<Box<dyn SolverRun>, String> {
        let mut cmd = self.command(request)?;
        let mut child = cmd.spawn().map_err(|e| e.to_string())?;
        let rx = spawn_reader(&mut child, request.start_ms);
        if !self.virtual_clock {
            return Ok(Box::new(ProcessRun {
                child: Some(child),
                rx,
                buffer: VecDeque::new(),
                eof: false,
            }));
        }

        let deadline = Instant::now() + self.virtual_guard;
        let mut raw = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(Message::Line(_, line)) => raw.push(line),
                Ok(Message::Eof) | Err(RecvTimeoutError::Disconnected) => break,
                Err(RecvTimeoutError::Timeout) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err("solver ignored the virtual clock".to_string());
                }
            }
        }
        let _ = child.wait();
        let (lines, exit) = virtual_timeline(raw, request.start_ms);
        Ok(Box::new(BufferedRun::new(lines, exit)))
    }
}

/// Stamps lines using `% t=<ms>` markers; `% exit` records the exit time.
/// Output without any marker counts as produced, and exited, at launch.
fn virtual_timeline(raw: Vec<String>, start_ms: u64) -> (Vec<(u64, String)>, Option<u64>) {
    let mut offset = 0;
    let mut timed = false;
    let mut exit = None;
    let mut lines = Vec::new();
    for line in raw {
        let trimmed = line.trim();
        if let Some(t) = trimmed.strip_prefix("% t=") {
            match t.parse::<u64>() {
                Ok(t) => {
                    offset = t;
                    timed = true;
                }
                Err(_) => warn!("bad time marker: {trimmed}"),
            }
        } else if trimmed == "% exit" {
            exit = Some(start_ms + offset);
        } else {
            lines.push((start_ms + offset, line));
        }
    }
    if !timed && exit.is_none() {
        exit = Some(start_ms);
    }
    (lines, exit)
}

/// A live child process.
pub struct ProcessRun {
    child: Option<Child>,
    rx: Receiver<Message>,
    buffer: VecDeque<(u64, String)>,
    eof: bool,
}

impl ProcessRun {
    fn drain(&mut self) {
        loop {
            match self.rx.try_recv() {
                Ok(Message::Line(t, line)) => self.buffer.push_back((t, line)),
                Ok(Message::Eof) | Err(TryRecvError::Disconnected) => {
                    self.eof = true;
                    break;
                }
                Err(TryRecvError::Empty) => break,
            }
        }
    }
}

impl SolverRun for ProcessRun {
    fn poll(&mut self, cutoff_ms: u64) -> Vec<String> {
        self.drain();
        let mut out = Vec::new();
        while self.buffer.front().is_some_and(|(t, _)| *t <= cutoff_ms) {
            out.push(self.buffer.pop_front().unwrap().1);
        }
        out
    }

    fn finished(&mut self, _at_ms: u64) -> bool {
        self.drain();
        self.eof && self.buffer.is_empty()
    }

    /// SIGTERM, then SIGKILL after a one second grace period. Waiting
    /// happens off the supervisor thread.
    fn terminate(&mut self) {
        self.buffer.clear();
        let Some(mut child) = self.child.take() else {
            return;
        };
        if let Ok(Some(_)) = child.try_wait() {
            return;
        }
        unsafe {
            libc::kill(child.id() as libc::pid_t, libc::SIGTERM);
        }
        thread::spawn(move || {
            for _ in 0..20 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(50));
            }
            let _ = child.kill();
            let _ = child.wait();
        });
    }
}

impl Drop for ProcessRun {
    fn drop(&mut self) {
        self.terminate();
    }
}
