//! Neutral problem descriptors (the MPD v1 format), solution checking,
//! objective evaluation and bound tightening.
//!
//! The constraint language is intentionally tiny: integer variables with
//! interval domains, linear constraints and `ALLDIFF`. It is just enough to
//! express objectives and to check solver answers exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while parsing or building a [`ProblemDescriptor`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate variable `{id}`")]
    DuplicateVariable { line: usize, id: String },
    #[error("line {line}: reference to undeclared variable `{id}`")]
    UndeclaredVariable { line: usize, id: String },
    #[error("variable `{id}` has lower bound {lb} above upper bound {ub}")]
    EmptyDomain { id: String, lb: i64, ub: i64 },
    #[error("line {line}: {message}")]
    InvalidConstraint { line: usize, message: String },
    #[error("empty problem")]
    Empty,
}

/// Errors raised by [`evaluate_objective`] and [`tighten_bound`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("problem `{0}` is a satisfaction problem and has no objective")]
    Satisfaction(String),
    #[error("assignment does not give a value to `{0}`")]
    Incomplete(String),
    #[error("objective value does not fit in a 64-bit integer")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: String,
    pub lb: i64,
    pub ub: i64,
}

impl Variable {
    pub fn domain_size(&self) -> u64 {
        (self.ub as i128 - self.lb as i128 + 1) as u64
    }
}

/// Relational operator of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
    Ne,
}

impl Relation {
    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ne => lhs != rhs,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
            Relation::Ne => "!=",
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "<=" => Ok(Relation::Le),
            ">=" => Ok(Relation::Ge),
            "=" => Ok(Relation::Eq),
            "!=" => Ok(Relation::Ne),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

/// A weighted sum `c1*v1 + ... + ck*vk`. Terms are kept as written, so the
/// same variable may occur more than once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearExpr {
    pub terms: Vec<(i64, String)>,
}

impl LinearExpr {
    pub fn new(terms: Vec<(i64, String)>) -> Self {
        LinearExpr { terms }
    }

    /// Value under `assignment`, or the first variable without a value.
    pub fn eval(&self, assignment: &Assignment) -> Result<i128, String> {
        let mut sum = 0i128;
        for (coef, var) in &self.terms {
            let value = assignment.get(var).ok_or_else(|| var.clone())?;
            sum += *coef as i128 * value as i128;
        }
        Ok(sum)
    }

    /// Distinct variables, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.terms
            .iter()
            .filter(|(_, v)| seen.insert(v.as_str()))
            .map(|(_, v)| v.as_str())
            .collect()
    }
}

impl fmt::Display for LinearExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (coef, var)) in self.terms.iter().enumerate() {
            if i == 0 {
                write!(f, "{coef}*{var}")?;
            } else if *coef < 0 {
                write!(f, " - {}*{var}", coef.unsigned_abs())?;
            } else {
                write!(f, " + {coef}*{var}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    Linear {
        expr: LinearExpr,
        relation: Relation,
        rhs: i64,
    },
    AllDifferent(Vec<String>),
}

impl Constraint {
    /// Distinct variables referenced by the constraint.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Constraint::Linear { expr, .. } => expr.variables(),
            Constraint::AllDifferent(vars) => vars.iter().map(String::as_str).collect(),
        }
    }

    /// Whether the constraint holds. `assignment` must cover its variables.
    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        match self {
            Constraint::Linear {
                expr,
                relation,
                rhs,
            } => match expr.eval(assignment) {
                Ok(lhs) => relation.holds(lhs, *rhs as i128),
                Err(_) => false,
            },
            Constraint::AllDifferent(vars) => {
                let mut seen = HashSet::with_capacity(vars.len());
                vars.iter()
                    .all(|v| assignment.get(v).is_some_and(|value| seen.insert(value)))
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Linear {
                expr,
                relation,
                rhs,
            } => write!(f, "CON LIN {expr} {} {rhs}", relation.as_str()),
            Constraint::AllDifferent(vars) => write!(f, "CON ALLDIFF {}", vars.join(" ")),
        }
    }
}

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    pub fn improves(self, a: i64, b: i64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    Satisfy,
    Minimize(LinearExpr),
    Maximize(LinearExpr),
}

impl Objective {
    pub fn direction(&self) -> Option<Direction> {
        match self {
            Objective::Satisfy => None,
            Objective::Minimize(_) => Some(Direction::Minimize),
            Objective::Maximize(_) => Some(Direction::Maximize),
        }
    }

    pub fn expr(&self) -> Option<&LinearExpr> {
        match self {
            Objective::Satisfy => None,
            Objective::Minimize(e) | Objective::Maximize(e) => Some(e),
        }
    }
}

/// Variable id to value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Assignment(BTreeMap<String, i64>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: impl Into<String>, value: i64) -> Option<i64> {
        self.0.insert(var.into(), value)
    }

    pub fn get(&self, var: &str) -> Option<i64> {
        self.0.get(var).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<K: Into<String>> FromIterator<(K, i64)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (K, i64)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Outcome of [`check_solution`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Valid,
    /// Index of the first violated constraint.
    Violates(usize),
    OutOfDomain(String),
    Incomplete(String),
}

impl CheckResult {
    pub fn is_valid(&self) -> bool {
        matches!(self, CheckResult::Valid)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckResult::Valid => f.write_str("valid"),
            CheckResult::Violates(i) => write!(f, "violates:{i}"),
            CheckResult::OutOfDomain(v) => write!(f, "out-of-domain:{v}"),
            CheckResult::Incomplete(v) => write!(f, "incomplete:{v}"),
        }
    }
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDescriptor {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl ProblemDescriptor {
    /// Builds a descriptor, enforcing unique ids, non-empty domains and
    /// that every constraint and the objective only mention declared
    /// variables.
    pub fn new(
        name: impl Into<String>,
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        objective: Objective,
    ) -> Result<Self, ProblemError> {
        let mut ids = HashSet::new();
        for var in &variables {
            if !ids.insert(var.id.as_str()) {
                return Err(ProblemError::DuplicateVariable {
                    line: 0,
                    id: var.id.clone(),
                });
            }
            if var.lb > var.ub {
                return Err(ProblemError::EmptyDomain {
                    id: var.id.clone(),
                    lb: var.lb,
                    ub: var.ub,
                });
            }
        }
        for con in &constraints {
            validate_constraint(con, &ids, 0)?;
        }
        if let Some(expr) = objective.expr() {
            validate_expr(expr, &ids, 0)?;
        }
        Ok(ProblemDescriptor {
            name: name.into(),
            variables,
            constraints,
            objective,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn direction(&self) -> Option<Direction> {
        self.objective.direction()
    }

    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    /// Serializes to MPD v1 text.
    pub fn to_mpd(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ProblemDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PROBLEM {}", self.name)?;
        for v in &self.variables {
            writeln!(f, "VAR {} INT {} {}", v.id, v.lb, v.ub)?;
        }
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        match &self.objective {
            Objective::Satisfy => writeln!(f, "OBJ SAT"),
            Objective::Minimize(e) => writeln!(f, "OBJ MIN {e}"),
            Objective::Maximize(e) => writeln!(f, "OBJ MAX {e}"),
        }
    }
}

impl FromStr for ProblemDescriptor {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_problem(s)
    }
}

fn validate_expr(expr: &LinearExpr, ids: &HashSet<&str>, line: usize) -> Result<(), ProblemError> {
    if expr.terms.is_empty() {
        return Err(ProblemError::InvalidConstraint {
            line,
            message: "linear expression has no terms".into(),
        });
    }
    for (_, var) in &expr.terms {
        if !ids.contains(var.as_str()) {
            return Err(ProblemError::UndeclaredVariable {
                line,
                id: var.clone(),
            });
        }
    }
    Ok(())
}

fn validate_constraint(
    con: &Constraint,
    ids: &HashSet<&str>,
    line: usize,
) -> Result<(), ProblemError> {
    match con {
        Constraint::Linear { expr, .. } => validate_expr(expr, ids, line),
        Constraint::AllDifferent(vars) => {
            if vars.len() < 2 {
                return Err(ProblemError::InvalidConstraint {
                    line,
                    message: "ALLDIFF needs at least two variables".into(),
                });
            }
            let mut seen = HashSet::new();
            for var in vars {
                if !ids.contains(var.as_str()) {
                    return Err(ProblemError::UndeclaredVariable {
                        line,
                        id: var.clone(),
                    });
                }
                if !seen.insert(var.as_str()) {
                    return Err(ProblemError::InvalidConstraint {
                        line,
                        message: format!("ALLDIFF lists `{var}` twice"),
                    });
                }
            }
            Ok(())
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn syntax(line: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_int(tok: &str, line: usize) -> Result<i64, ProblemError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("expected an integer, found `{tok}`")))
}

/// Parses `2*x + 3*y - z`. A bare identifier means coefficient 1.
fn parse_linear_expr(text: &str, line: usize) -> Result<LinearExpr, ProblemError> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err(syntax(line, "empty linear expression"));
    }
    let malformed = || syntax(line, format!("malformed linear expression `{text}`"));
    let mut terms = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let mut negative = false;
        if !terms.is_empty() {
            match chars[pos] {
                '+' => {}
                '-' => negative = true,
                _ => return Err(malformed()),
            }
            pos += 1;
        }
        // optional sign belonging to the coefficient itself, as in `+ -2*x`
        if pos < chars.len() && (chars[pos] == '-' || chars[pos] == '+') {
            negative ^= chars[pos] == '-';
            pos += 1;
        }
        let digits_start = pos;
        while pos < chars.len() && chars[pos].is_ascii_digit() {
            pos += 1;
        }
        let magnitude: i64 = if pos > digits_start {
            let digits: String = chars[digits_start..pos].iter().collect();
            if chars.get(pos) != Some(&'*') {
                return Err(malformed());
            }
            pos += 1;
            digits
                .parse()
                .map_err(|_| syntax(line, format!("coefficient `{digits}` out of range")))?
        } else {
            1
        };
        let ident_start = pos;
        while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
            pos += 1;
        }
        let var: String = chars[ident_start..pos].iter().collect();
        if !is_identifier(&var) {
            return Err(malformed());
        }
        terms.push((if negative { -magnitude } else { magnitude }, var));
    }
    Ok(LinearExpr { terms })
}

/// Parses MPD v1 text.
pub fn parse_problem(text: &str) -> Result<ProblemDescriptor, ProblemError> {
    let mut name: Option<String> = None;
    let mut variables: Vec<Variable> = Vec::new();
    let mut var_lines: HashMap<String, usize> = HashMap::new();
    let mut constraints: Vec<(usize, Constraint)> = Vec::new();
    let mut objective: Option<(usize, Objective)> = None;
    let mut saw_directive = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        saw_directive = true;
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((content, ""));
        match keyword {
            "PROBLEM" => {
                if name.is_some() {
                    return Err(syntax(line, "second PROBLEM line"));
                }
                if !is_identifier(rest) && (rest.is_empty() || rest.contains(char::is_whitespace)) {
                    return Err(syntax(line, "PROBLEM expects a single name"));
                }
                name = Some(rest.to_string());
            }
            "VAR" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 4 || toks[1] != "INT" {
                    return Err(syntax(line, "expected `VAR <id> INT <lb> <ub>`"));
                }
                if !is_identifier(toks[0]) {
                    return Err(syntax(line, format!("invalid variable id `{}`", toks[0])));
                }
                let (lb, ub) = (parse_int(toks[2], line)?, parse_int(toks[3], line)?);
                if lb > ub {
                    return Err(ProblemError::EmptyDomain {
                        id: toks[0].into(),
                        lb,
                        ub,
                    });
                }
                if var_lines.insert(toks[0].to_string(), line).is_some() {
                    return Err(ProblemError::DuplicateVariable {
                        line,
                        id: toks[0].into(),
                    });
                }
                variables.push(Variable {
                    id: toks[0].into(),
                    lb,
                    ub,
                });
            }
            "CON" => {
                let (kind, body) = rest
                    .split_once(char::is_whitespace)
                    .map(|(k, b)| (k, b.trim()))
                    .unwrap_or((rest, ""));
                let con = match kind {
                    "LIN" => {
                        let toks: Vec<&str> = body.split_whitespace().collect();
                        if toks.len() < 3 {
                            return Err(syntax(line, "expected `CON LIN <expr> <rel> <rhs>`"));
                        }
                        let rhs = parse_int(toks[toks.len() - 1], line)?;
                        let relation: Relation =
                            toks[toks.len() - 2].parse().map_err(|m| syntax(line, m))?;
                        let expr = parse_linear_expr(&toks[..toks.len() - 2].join(" "), line)?;
                        Constraint::Linear {
                            expr,
                            relation,
                            rhs,
                        }
                    }
                    "ALLDIFF" => {
                        let vars: Vec<String> =
                            body.split_whitespace().map(str::to_string).collect();
                        if let Some(bad) = vars.iter().find(|v| !is_identifier(v)) {
                            return Err(syntax(line, format!("invalid variable id `{bad}`")));
                        }
                        Constraint::AllDifferent(vars)
                    }
                    other => return Err(syntax(line, format!("unknown constraint kind `{other}`"))),
                };
                constraints.push((line, con));
            }
            "OBJ" => {
                if objective.is_some() {
                    return Err(syntax(line, "second OBJ line"));
                }
                let (kind, body) = rest
                    .split_once(char::is_whitespace)
                    .map(|(k, b)| (k, b.trim()))
                    .unwrap_or((rest, ""));
                let obj = match kind {
                    "SAT" if body.is_empty() => Objective::Satisfy,
                    "MIN" => Objective::Minimize(parse_linear_expr(body, line)?),
                    "MAX" => Objective::Maximize(parse_linear_expr(body, line)?),
                    _ => return Err(syntax(line, "expected `OBJ SAT`, `OBJ MIN <expr>` or `OBJ MAX <expr>`")),
                };
                objective = Some((line, obj));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    if !saw_directive || variables.is_empty() {
        return Err(ProblemError::Empty);
    }
    let name = name.ok_or_else(|| syntax(1, "missing PROBLEM line"))?;
    let (obj_line, objective) =
        objective.ok_or_else(|| syntax(text.lines().count().max(1), "missing OBJ line"))?;

    let ids: HashSet<&str> = variables.iter().map(|v| v.id.as_str()).collect();
    for (line, con) in &constraints {
        validate_constraint(con, &ids, *line)?;
    }
    if let Some(expr) = objective.expr() {
        validate_expr(expr, &ids, obj_line)?;
    }
    Ok(ProblemDescriptor {
        name,
        variables,
        constraints: constraints.into_iter().map(|(_, c)| c).collect(),
        objective,
    })
}

/// Checks `assignment` against every variable domain and constraint.
///
/// Variables are inspected first, in declaration order, then constraints in
/// declaration order; the first failure is reported. Values for variables the
/// problem does not declare are ignored.
pub fn check_solution(problem: &ProblemDescriptor, assignment: &Assignment) -> CheckResult {
    for var in &problem.variables {
        match assignment.get(&var.id) {
            None => return CheckResult::Incomplete(var.id.clone()),
            Some(v) if v < var.lb || v > var.ub => return CheckResult::OutOfDomain(var.id.clone()),
            Some(_) => {}
        }
    }
    match problem
        .constraints
        .iter()
        .position(|c| !c.is_satisfied(assignment))
    {
        Some(i) => CheckResult::Violates(i),
        None => CheckResult::Valid,
    }
}

/// Value of the objective expression under `assignment`.
pub fn evaluate_objective(
    problem: &ProblemDescriptor,
    assignment: &Assignment,
) -> Result<i64, ObjectiveError> {
    let expr = problem
        .objective
        .expr()
        .ok_or_else(|| ObjectiveError::Satisfaction(problem.name.clone()))?;
    let value = expr.eval(assignment).map_err(ObjectiveError::Incomplete)?;
    i64::try_from(value).map_err(|_| ObjectiveError::Overflow)
}

/// Inclusive limit a solution must reach to strictly improve on `bound`:
/// `bound - 1` when minimizing, `bound + 1` when maximizing.
pub fn improvement_limit(direction: Direction, bound: i64) -> i64 {
    match direction {
        Direction::Minimize => bound.saturating_sub(1),
        Direction::Maximize => bound.saturating_add(1),
    }
}

/// Copy of `problem` with one extra linear constraint that only admits
/// objective values strictly better than `bound`.
pub fn tighten_bound(
    problem: &ProblemDescriptor,
    bound: i64,
) -> Result<ProblemDescriptor, ObjectiveError> {
    let (expr, relation, direction) = match &problem.objective {
        Objective::Satisfy => return Err(ObjectiveError::Satisfaction(problem.name.clone())),
        Objective::Minimize(e) => (e, Relation::Le, Direction::Minimize),
        Objective::Maximize(e) => (e, Relation::Ge, Direction::Maximize),
    };
    let mut tightened = problem.clone();
    tightened.constraints.push(Constraint::Linear {
        expr: expr.clone(),
        relation,
        rhs: improvement_limit(direction, bound),
    });
    Ok(tightened)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ProblemDescriptor {
        parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 1*x <= 3\nOBJ SAT\n").unwrap()
    }

    #[test]
    fn minimal_problem() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ SAT").unwrap();
        assert_eq!(p.name(), "t");
        assert_eq!(p.variables().len(), 1);
        assert!(p.constraints().is_empty());
        assert_eq!(p.objective(), &Objective::Satisfy);
    }

    #[test]
    fn duplicate_variable_is_rejected() {
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nVAR x INT 1 2\nOBJ SAT").unwrap_err();
        assert_eq!(
            err,
            ProblemError::DuplicateVariable {
                line: 3,
                id: "x".into()
            }
        );
    }

    #[test]
    fn undeclared_reference_reports_line() {
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 2*x + 1*y <= 4\nOBJ SAT")
            .unwrap_err();
        assert_eq!(
            err,
            ProblemError::UndeclaredVariable {
                line: 3,
                id: "y".into()
            }
        );
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN z").unwrap_err();
        assert!(matches!(err, ProblemError::UndeclaredVariable { line: 3, .. }));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_problem("PROBLEM t\n# comment\nVAR x INT zero 5\nOBJ SAT").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { line: 3, .. }));
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON LIN 1*x << 3\nOBJ SAT").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { line: 3, .. }));
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ SAT\nOBJ MIN x").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { line: 4, .. }));
    }

    #[test]
    fn empty_problem() {
        assert_eq!(parse_problem("").unwrap_err(), ProblemError::Empty);
        assert_eq!(parse_problem("# only a comment\n\n").unwrap_err(), ProblemError::Empty);
        assert_eq!(parse_problem("PROBLEM t\nOBJ SAT").unwrap_err(), ProblemError::Empty);
    }

    #[test]
    fn alldiff_needs_distinct_ids() {
        let err =
            parse_problem("PROBLEM t\nVAR x INT 0 5\nCON ALLDIFF x x\nOBJ SAT").unwrap_err();
        assert!(matches!(err, ProblemError::InvalidConstraint { line: 3, .. }));
        let err = parse_problem("PROBLEM t\nVAR x INT 0 5\nCON ALLDIFF x\nOBJ SAT").unwrap_err();
        assert!(matches!(err, ProblemError::InvalidConstraint { line: 3, .. }));
    }

    #[test]
    fn linear_expression_forms() {
        let p = parse_problem(
            "PROBLEM t\nVAR x INT -5 5\nVAR y INT -5 5\nCON LIN 2*x-3*y + -1*x + y >= -4 # tail\nOBJ MAX x - 2*y",
        )
        .unwrap();
        let Constraint::Linear { expr, relation, rhs } = &p.constraints()[0] else {
            panic!("expected linear constraint");
        };
        assert_eq!(
            expr.terms,
            vec![(2, "x".into()), (-3, "y".into()), (-1, "x".into()), (1, "y".into())]
        );
        assert_eq!(*relation, Relation::Ge);
        assert_eq!(*rhs, -4);
        assert_eq!(
            p.objective().expr().unwrap().terms,
            vec![(1, "x".into()), (-2, "y".into())]
        );
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let text = "PROBLEM m\nVAR a INT 0 4\nVAR b INT -2 3\nVAR c INT 1 9\n\
                    CON LIN 2*a - 1*b + 3*c <= 20\nCON ALLDIFF a b c\nOBJ MIN a + 2*c\n";
        let p = parse_problem(text).unwrap();
        let again = parse_problem(&p.to_mpd()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn check_examples() {
        let p = toy();
        let ok: Assignment = [("x", 2)].into_iter().collect();
        assert_eq!(check_solution(&p, &ok), CheckResult::Valid);
        let bad: Assignment = [("x", 4)].into_iter().collect();
        assert_eq!(check_solution(&p, &bad), CheckResult::Violates(0));
        let oob: Assignment = [("x", 6)].into_iter().collect();
        assert_eq!(check_solution(&p, &oob), CheckResult::OutOfDomain("x".into()));
        assert_eq!(
            check_solution(&p, &Assignment::new()),
            CheckResult::Incomplete("x".into())
        );
    }

    #[test]
    fn alldiff_check() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nVAR y INT 0 5\nCON ALLDIFF x y\nOBJ SAT")
            .unwrap();
        let same: Assignment = [("x", 1), ("y", 1)].into_iter().collect();
        let diff: Assignment = [("x", 1), ("y", 2)].into_iter().collect();
        assert_eq!(check_solution(&p, &same), CheckResult::Violates(0));
        assert_eq!(check_solution(&p, &diff), CheckResult::Valid);
    }

    #[test]
    fn objective_examples() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 9\nVAR y INT 0 9\nOBJ MIN 2*x + y").unwrap();
        let a: Assignment = [("x", 1), ("y", 3)].into_iter().collect();
        assert_eq!(evaluate_objective(&p, &a), Ok(5));
        let q = parse_problem("PROBLEM t\nVAR x INT 0 9\nOBJ MIN x").unwrap();
        let zero: Assignment = [("x", 0)].into_iter().collect();
        assert_eq!(evaluate_objective(&q, &zero), Ok(0));
        assert!(matches!(
            evaluate_objective(&toy(), &zero),
            Err(ObjectiveError::Satisfaction(_))
        ));
        assert_eq!(
            evaluate_objective(&p, &zero),
            Err(ObjectiveError::Incomplete("y".into()))
        );
    }

    #[test]
    fn tighten_examples() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 20\nOBJ MIN x").unwrap();
        let t = tighten_bound(&p, 10).unwrap();
        assert_eq!(t.constraints().last().unwrap().to_string(), "CON LIN 1*x <= 9");
        assert!(p.constraints().is_empty());

        let q = parse_problem("PROBLEM t\nVAR x INT 0 20\nVAR y INT 0 20\nOBJ MAX 3*x + y").unwrap();
        let t = tighten_bound(&q, 7).unwrap();
        assert_eq!(t.constraints().last().unwrap().to_string(), "CON LIN 3*x + 1*y >= 8");

        assert!(tighten_bound(&toy(), 3).is_err());
    }

    #[test]
    fn builder_validates_invariants() {
        let err = ProblemDescriptor::new(
            "t",
            vec![Variable { id: "x".into(), lb: 3, ub: 1 }],
            vec![],
            Objective::Satisfy,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::EmptyDomain { .. }));
    }
}
