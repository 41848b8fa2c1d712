//! Parallel execution of scheduled solvers with bound sharing.

pub mod clock;
pub mod launcher;
pub mod log;
pub mod protocol;
pub mod register;
pub mod supervisor;

use thiserror::Error;

pub use clock::{Clock, VirtualClock, WallClock};
pub use launcher::{
    LaunchRequest, Launcher, ProcessLauncher, ScriptLauncher, SolverRun, SolverSpec,
    VIRTUAL_CLOCK_ENV,
};
pub use log::{Event, EventKind, EventLog};
pub use protocol::{parse_solver_output, render_solution, ProtocolParser, SolverEvent};
pub use register::{
    record_solution, restart_decision, BestBoundRegister, RestartDecision, RestartPolicy,
    SolutionVerdict, WorkerState,
};
pub use supervisor::{run_portfolio, AnswerStatus, ExecConfig, SolverAnswer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("solver `{0}`: command template must contain {{problem}} exactly once")]
    BadTemplate(String),
    #[error("no specification for solver `{0}`")]
    MissingSpec(String),
    #[error("timeout must be positive")]
    NonPositiveTimeout,
    #[error("tick must be positive")]
    ZeroTick,
}
