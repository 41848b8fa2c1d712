//! Event log.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Launch,
    Solution,
    Bound,
    Restart,
    Kill,
    Complete,
    Unsat,
    CheckFail,
    Error,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Launch => "LAUNCH",
            EventKind::Solution => "SOLUTION",
            EventKind::Bound => "BOUND",
            EventKind::Restart => "RESTART",
            EventKind::Kill => "KILL",
            EventKind::Complete => "COMPLETE",
            EventKind::Unsat => "UNSAT",
            EventKind::CheckFail => "CHECK_FAIL",
            EventKind::Error => "ERROR",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "LAUNCH" => EventKind::Launch,
            "SOLUTION" => EventKind::Solution,
            "BOUND" => EventKind::Bound,
            "RESTART" => EventKind::Restart,
            "KILL" => EventKind::Kill,
            "COMPLETE" => EventKind::Complete,
            "UNSAT" => EventKind::Unsat,
            "CHECK_FAIL" => EventKind::CheckFail,
            "ERROR" => EventKind::Error,
            other => return Err(format!("unknown event `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub t_ms: u64,
    pub core: usize,
    pub solver: String,
    pub kind: EventKind,
    /// Space separated `key=value` pairs.
    pub detail: String,
}

impl Event {
    /// Value of `key` in the detail field.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} core={} solver={} event={}",
            self.t_ms,
            self.core,
            self.solver,
            self.kind.as_str()
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let mut parts = line.splitn(5, ' ');
        let mut field = |key: &str| -> Result<String, String> {
            let part = parts.next().ok_or_else(|| format!("missing `{key}` in `{line}`"))?;
            part.strip_prefix(key)
                .and_then(|p| p.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| format!("expected `{key}=` in `{line}`"))
        };
        let t_ms = field("t")?.parse().map_err(|e| format!("bad time: {e}"))?;
        let core = field("core")?.parse().map_err(|e| format!("bad core: {e}"))?;
        let solver = field("solver")?;
        let kind = field("event")?.parse()?;
        let detail = parts.next().unwrap_or("").to_string();
        Ok(Event {
            t_ms,
            core,
            solver,
            kind,
            detail,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        t_ms: u64,
        core: usize,
        solver: &str,
        kind: EventKind,
        detail: impl Into<String>,
    ) {
        let event = Event {
            t_ms,
            core,
            solver: solver.to_string(),
            kind,
            detail: detail.into(),
        };
        log::debug!("{event}");
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(EventLog { events })
    }
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for event in &self.events {
            writeln!(f, "{event}")?;
        }
        Ok(())
    }
}
