//! Solver stdout protocol.

use log::warn;

use crate::problem::Assignment;

pub const SOLUTION_SEPARATOR: &str = "----------";
pub const COMPLETE_MARKER: &str = "==========";
pub const UNSAT_MARKER: &str = "=====UNSATISFIABLE=====";
pub const UNKNOWN_MARKER: &str = "=====UNKNOWN=====";
pub const ERROR_MARKER: &str = "=====ERROR=====";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverEvent {
    Solution(Assignment),
    Complete,
    Unsat,
    /// A solution block containing a malformed assignment line.
    ProtocolError(String),
}

/// Incremental line parser. Assignment lines accumulate until the next
/// separator; a malformed assignment poisons the whole block.
#[derive(Debug, Default)]
pub struct ProtocolParser {
    pending: Assignment,
    poisoned: Option<String>,
}

impl ProtocolParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_line(&mut self, raw: &str) -> Option<SolverEvent> {
        let line = raw.trim();
        match line {
            "" => None,
            SOLUTION_SEPARATOR => {
                let block = std::mem::take(&mut self.pending);
                Some(match self.poisoned.take() {
                    Some(message) => SolverEvent::ProtocolError(message),
                    None => SolverEvent::Solution(block),
                })
            }
            COMPLETE_MARKER => {
                self.reset();
                Some(SolverEvent::Complete)
            }
            UNSAT_MARKER => {
                self.reset();
                Some(SolverEvent::Unsat)
            }
            UNKNOWN_MARKER | ERROR_MARKER => {
                self.reset();
                None
            }
            _ if line.starts_with('%') => None,
            _ => {
                match line.split_once('=') {
                    Some((id, value)) if is_identifier(id.trim()) => {
                        let value = value.trim();
                        let value = value.strip_suffix(';').unwrap_or(value).trim();
                        match value.parse::<i64>() {
                            Ok(v) => {
                                self.pending.insert(id.trim(), v);
                            }
                            Err(_) => {
                                if self.poisoned.is_none() {
                                    self.poisoned =
                                        Some(format!("bad value for `{}`: `{value}`", id.trim()));
                                }
                            }
                        }
                    }
                    _ => warn!("ignoring unparseable solver output line: {line}"),
                }
                None
            }
        }
    }

    fn reset(&mut self) {
        self.pending = Assignment::new();
        self.poisoned = None;
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_solver_output<'a>(lines: impl IntoIterator<Item = &'a str>) -> Vec<SolverEvent> {
    let mut parser = ProtocolParser::new();
    lines
        .into_iter()
        .filter_map(|l| parser.push_line(l))
        .collect()
}

/// Renders an assignment as a solution block, variables in `order`.
pub fn render_solution<'a>(assignment: &Assignment, order: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for id in order {
        if let Some(v) = assignment.get(id) {
            out.push_str(&format!("{id} = {v};\n"));
        }
    }
    out.push_str(SOLUTION_SEPARATOR);
    out.push('\n');
    out
}
