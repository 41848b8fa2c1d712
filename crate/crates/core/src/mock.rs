//! Scripted solver timelines.
//!
//! A script is a list of timed actions:
//!
//! ```text
//! AT 2 SOLUTION x=10,y=3
//! IFBOUND < 10 AT 0.5 SOLUTION x=8
//! IFBOUND < 10 AT 1 COMPLETE
//! AT 30 UNSAT
//! AT 4 PRINT some free text
//! ```
//!
//! Times are seconds since launch. A guarded line is enabled only when the
//! run was given a bound satisfying the relation. The script ends at the
//! first enabled `COMPLETE` or `UNSAT`; without one the solver stalls until
//! killed. Blank lines and lines starting with `#` are skipped.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardRelation {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl GuardRelation {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            GuardRelation::Lt => lhs < rhs,
            GuardRelation::Le => lhs <= rhs,
            GuardRelation::Gt => lhs > rhs,
            GuardRelation::Ge => lhs >= rhs,
            GuardRelation::Eq => lhs == rhs,
            GuardRelation::Ne => lhs != rhs,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            GuardRelation::Lt => "<",
            GuardRelation::Le => "<=",
            GuardRelation::Gt => ">",
            GuardRelation::Ge => ">=",
            GuardRelation::Eq => "=",
            GuardRelation::Ne => "!=",
        }
    }
}

impl FromStr for GuardRelation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "<" => GuardRelation::Lt,
            "<=" => GuardRelation::Le,
            ">" => GuardRelation::Gt,
            ">=" => GuardRelation::Ge,
            "=" | "==" => GuardRelation::Eq,
            "!=" => GuardRelation::Ne,
            other => return Err(format!("unknown relation `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockAction {
    Solution(Vec<(String, i64)>),
    Complete,
    Unsat,
    Print(String),
}

impl MockAction {
    /// Stdout lines produced by this action.
    pub fn output(&self) -> Vec<String> {
        match self {
            MockAction::Solution(values) => values
                .iter()
                .map(|(id, v)| format!("{id} = {v};"))
                .chain(std::iter::once("----------".to_string()))
                .collect(),
            MockAction::Complete => vec!["==========".to_string()],
            MockAction::Unsat => vec!["=====UNSATISFIABLE=====".to_string()],
            MockAction::Print(text) => vec![text.clone()],
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, MockAction::Complete | MockAction::Unsat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub guard: Option<(GuardRelation, i64)>,
    pub at_ms: u64,
    pub action: MockAction,
}

impl ScriptLine {
    pub fn enabled(&self, bound: Option<i64>) -> bool {
        match (self.guard, bound) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((rel, rhs)), Some(b)) => rel.holds(b, rhs),
        }
    }
}

impl fmt::Display for ScriptLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((rel, rhs)) = self.guard {
            write!(f, "IFBOUND {} {} ", rel.as_str(), rhs)?;
        }
        write!(f, "AT {} ", self.at_ms as f64 / 1000.0)?;
        match &self.action {
            MockAction::Solution(values) => {
                let body: Vec<String> = values.iter().map(|(id, v)| format!("{id}={v}")).collect();
                write!(f, "SOLUTION {}", body.join(","))
            }
            MockAction::Complete => write!(f, "COMPLETE"),
            MockAction::Unsat => write!(f, "UNSAT"),
            MockAction::Print(text) => write!(f, "PRINT {text}"),
        }
    }
}

/// Rendered timeline of one run: stdout lines with their offsets from launch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub lines: Vec<(u64, String)>,
    /// Offset at which the solver exits, when the script terminates.
    pub exit_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MockScript {
    pub lines: Vec<ScriptLine>,
}

impl MockScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            lines.push(parse_line(line).map_err(|message| ScriptError { line: i + 1, message })?);
        }
        Ok(MockScript { lines })
    }

    /// Timeline of a run launched with `bound`. Enabled actions are ordered
    /// by time, keeping script order among equal times, and cut after the
    /// first completion or unsatisfiability claim.
    pub fn render(&self, bound: Option<i64>) -> Rendered {
        let mut enabled: Vec<&ScriptLine> = self.lines.iter().filter(|l| l.enabled(bound)).collect();
        enabled.sort_by_key(|l| l.at_ms);
        let mut lines = Vec::new();
        for l in enabled {
            lines.extend(l.action.output().into_iter().map(|s| (l.at_ms, s)));
            if l.action.is_final() {
                return Rendered {
                    lines,
                    exit_ms: Some(l.at_ms),
                };
            }
        }
        Rendered {
            lines,
            exit_ms: None,
        }
    }
}

impl fmt::Display for MockScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for MockScript {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, ScriptError> {
        MockScript::parse(s)
    }
}

fn parse_line(line: &str) -> Result<ScriptLine, String> {
    let mut rest = line;
    let mut guard = None;
    if let Some(after) = rest.strip_prefix("IFBOUND") {
        let mut parts = after.split_whitespace();
        let rel: GuardRelation = parts.next().ok_or("missing guard relation")?.parse()?;
        let rhs_text = parts.next().ok_or("missing guard value")?;
        let rhs: i64 = rhs_text
            .parse()
            .map_err(|_| format!("bad guard value `{rhs_text}`"))?;
        guard = Some((rel, rhs));
        let at = after.find("AT").ok_or("guard must be followed by AT")?;
        rest = &after[at..];
    }
    let rest = rest.strip_prefix("AT").ok_or("expected AT")?.trim_start();
    let (time_text, rest) = rest.split_once(char::is_whitespace).ok_or("missing action")?;
    let seconds: f64 = time_text
        .parse()
        .map_err(|_| format!("bad time `{time_text}`"))?;
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(format!("bad time `{time_text}`"));
    }
    let at_ms = (seconds * 1000.0).round() as u64;
    let rest = rest.trim_start();
    let (keyword, body) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let action = match keyword {
        "SOLUTION" => {
            let mut values = Vec::new();
            for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (id, v) = pair.split_once('=').ok_or(format!("bad pair `{pair}`"))?;
                let v: i64 = v.trim().parse().map_err(|_| format!("bad value in `{pair}`"))?;
                values.push((id.trim().to_string(), v));
            }
            if values.is_empty() {
                return Err("empty solution".to_string());
            }
            MockAction::Solution(values)
        }
        "COMPLETE" => MockAction::Complete,
        "UNSAT" => MockAction::Unsat,
        "PRINT" => MockAction::Print(body.to_string()),
        other => return Err(format!("unknown action `{other}`")),
    };
    Ok(ScriptLine {
        guard,
        at_ms,
        action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: &str = "AT 2 SOLUTION x=12\nIFBOUND < 10 AT 0.5 SOLUTION x=8\nIFBOUND < 10 AT 1 COMPLETE\n";

    #[test]
    fn unguarded_run_stalls() {
        let s = MockScript::parse(B).unwrap();
        let r = s.render(None);
        assert_eq!(
            r.lines,
            vec![(2000, "x = 12;".to_string()), (2000, "----------".to_string())]
        );
        assert_eq!(r.exit_ms, None);
    }

    #[test]
    fn guard_enables_lines_and_final_cuts() {
        let s = MockScript::parse(B).unwrap();
        let r = s.render(Some(9));
        assert_eq!(
            r.lines,
            vec![
                (500, "x = 8;".to_string()),
                (500, "----------".to_string()),
                (1000, "==========".to_string()),
            ]
        );
        assert_eq!(r.exit_ms, Some(1000));
        assert_eq!(s.render(Some(10)).exit_ms, None);
    }

    #[test]
    fn relations() {
        for (rel, b, expected) in [
            ("<", 3, true),
            ("<=", 5, true),
            (">", 5, false),
            (">=", 5, true),
            ("=", 4, false),
            ("!=", 4, true),
        ] {
            let s = MockScript::parse(&format!("IFBOUND {rel} 5 AT 0 UNSAT")).unwrap();
            assert_eq!(s.render(Some(b)).exit_ms.is_some(), expected, "{rel} {b}");
        }
    }

    #[test]
    fn display_round_trip() {
        let text = "# comment\n\nAT 1.25 SOLUTION x=-1,y=2\nIFBOUND >= -3 AT 0 PRINT hello there\nAT 3 UNSAT\n";
        let s = MockScript::parse(text).unwrap();
        assert_eq!(s.lines.len(), 3);
        assert_eq!(MockScript::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn bad_lines() {
        for text in [
            "AT x SOLUTION a=1",
            "AT -1 COMPLETE",
            "AT 1 SOLUTION",
            "AT 1 SOLUTION a=b",
            "AT 1 FINISH",
            "IFBOUND ~ 3 AT 1 COMPLETE",
            "IFBOUND < 3 COMPLETE",
            "SOLUTION a=1",
        ] {
            assert!(MockScript::parse(text).is_err(), "{text}");
        }
        assert_eq!(MockScript::parse("\nAT 1 NOPE").unwrap_err().line, 2);
    }
}
