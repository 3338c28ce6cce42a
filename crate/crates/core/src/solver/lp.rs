//! A small linear-program model in CPLEX LP text form: writer, parser and an
//! evaluator that checks a variable assignment against the parsed model.
//!
//! Only the subset needed by the exporter is supported: a single linear
//! objective, linear constraints with `<=`, `>=` or `=`, a `Bounds` section
//! (`l <= x <= u`, `x = v`, `x free`, `x >= l`, `x <= u`) and `Binaries`.
//! Variables not listed in `Bounds` default to `[0, +inf)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no value supplied for variable {0}")]
    MissingValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Sum of `coefficient · variable` terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(f64, String)>,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coef · var`, merging with an existing term for `var`.
    pub fn add(&mut self, coef: f64, var: &str) -> &mut Self {
        if let Some(term) = self.terms.iter_mut().find(|(_, v)| v == var) {
            term.0 += coef;
        } else {
            self.terms.push((coef, var.to_string()));
        }
        self
    }

    pub fn with(mut self, coef: f64, var: &str) -> Self {
        self.add(coef, var);
        self
    }

    pub fn evaluate(&self, values: &BTreeMap<String, f64>) -> Result<f64, LpError> {
        self.terms.iter().try_fold(0.0, |acc, (c, v)| {
            let x = values.get(v).ok_or_else(|| LpError::MissingValue(v.clone()))?;
            Ok(acc + c * x)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// Variable bound; `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub var: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub comments: Vec<String>,
    pub objective_name: String,
    pub objective: LinearExpr,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
    pub binaries: Vec<String>,
}

/// A constraint, bound or integrality requirement that does not hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub what: String,
    pub amount: f64,
}

const TERMS_PER_LINE: usize = 8;

fn write_expr(out: &mut String, expr: &LinearExpr) {
    if expr.terms.is_empty() {
        out.push_str(" 0");
    }
    for (i, (c, v)) in expr.terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {v}", c.abs());
    }
}

impl LpModel {
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "\\ {c}");
        }
        out.push_str("Minimize\n ");
        out.push_str(&self.objective_name);
        out.push(':');
        write_expr(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            write_expr(&mut out, &c.expr);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
        }
        if !self.bounds.is_empty() {
            out.push_str("Bounds\n");
            for b in &self.bounds {
                let _ = match (b.lower, b.upper) {
                    (None, None) => writeln!(out, " {} free", b.var),
                    (Some(l), Some(u)) if l == u => writeln!(out, " {} = {l}", b.var),
                    (Some(l), Some(u)) => writeln!(out, " {l} <= {} <= {u}", b.var),
                    (Some(l), None) => writeln!(out, " {} >= {l}", b.var),
                    (None, Some(u)) => writeln!(out, " -inf <= {} <= {u}", b.var),
                };
            }
        }
        if !self.binaries.is_empty() {
            out.push_str("Binaries\n");
            for chunk in self.binaries.chunks(TERMS_PER_LINE) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, LpError> {
        Parser::default().run(text)
    }

    /// Every variable mentioned anywhere in the model.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut vars: BTreeSet<String> = self.objective.terms.iter().map(|(_, v)| v.clone()).collect();
        for c in &self.constraints {
            vars.extend(c.expr.terms.iter().map(|(_, v)| v.clone()));
        }
        vars.extend(self.bounds.iter().map(|b| b.var.clone()));
        vars.extend(self.binaries.iter().cloned());
        vars
    }

    pub fn evaluate_objective(&self, values: &BTreeMap<String, f64>) -> Result<f64, LpError> {
        self.objective.evaluate(values)
    }

    /// Everything `values` violates by more than `tol`.
    pub fn violations(&self, values: &BTreeMap<String, f64>, tol: f64) -> Result<Vec<Violation>, LpError> {
        let mut out = Vec::new();
        for c in &self.constraints {
            let lhs = c.expr.evaluate(values)?;
            let excess = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            if excess > tol {
                out.push(Violation { what: format!("constraint {}", c.name), amount: excess });
            }
        }
        let explicit: BTreeMap<&str, &Bound> = self.bounds.iter().map(|b| (b.var.as_str(), b)).collect();
        for var in self.variables() {
            let x = *values.get(&var).ok_or_else(|| LpError::MissingValue(var.clone()))?;
            let (lower, upper) = match explicit.get(var.as_str()) {
                Some(b) => (b.lower, b.upper),
                None => (Some(0.0), None),
            };
            if let Some(l) = lower.filter(|&l| x < l - tol) {
                out.push(Violation { what: format!("lower bound of {var}"), amount: l - x });
            }
            if let Some(u) = upper.filter(|&u| x > u + tol) {
                out.push(Violation { what: format!("upper bound of {var}"), amount: x - u });
            }
        }
        for var in &self.binaries {
            let x = values[var];
            let gap = x.min((x - 1.0).abs()).min(x.abs());
            if gap > tol {
                out.push(Violation { what: format!("integrality of {var}"), amount: gap });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Done,
}

#[derive(Default)]
struct Parser {
    model: LpModel,
    pending: Option<(usize, String)>,
}

fn parse_number(token: &str, line: usize) -> Result<f64, LpError> {
    match token {
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
        _ => token
            .parse::<f64>()
            .map_err(|_| LpError::Parse { line, message: format!("expected a number, found `{token}`") }),
    }
}

fn is_number(token: &str) -> bool {
    token.parse::<f64>().is_ok()
}

fn parse_sense(token: &str) -> Option<Sense> {
    match token {
        "<=" | "<" | "=<" => Some(Sense::Le),
        ">=" | ">" | "=>" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

type Statement = (String, LinearExpr, Option<(Sense, f64)>);

/// Parses `[name:] expr [sense rhs]`.
fn parse_statement(
    text: &str,
    line: usize,
    need_sense: bool,
) -> Result<Statement, LpError> {
    let (name, body) = match text.split_once(':') {
        Some((n, b)) => (n.trim().to_string(), b),
        None => (String::new(), text),
    };
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let mut expr = LinearExpr::new();
    let mut i = 0;
    let mut sense_rhs = None;
    while i < tokens.len() {
        if let Some(sense) = parse_sense(tokens[i]) {
            let rhs_tokens = &tokens[i + 1..];
            let rhs = match rhs_tokens {
                [n] => parse_number(n, line)?,
                ["-", n] => -parse_number(n, line)?,
                ["+", n] => parse_number(n, line)?,
                _ => return Err(LpError::Parse { line, message: "malformed right-hand side".into() }),
            };
            sense_rhs = Some((sense, rhs));
            break;
        }
        let mut sign = 1.0;
        let mut tok = tokens[i];
        if tok == "+" || tok == "-" {
            if tok == "-" {
                sign = -1.0;
            }
            i += 1;
            tok = *tokens.get(i).ok_or_else(|| LpError::Parse { line, message: "dangling sign".into() })?;
        }
        let coef;
        if is_number(tok) {
            coef = sign * parse_number(tok, line)?;
            i += 1;
            match tokens.get(i) {
                Some(&next) if parse_sense(next).is_none() && next != "+" && next != "-" => tok = next,
                _ if coef == 0.0 => continue,
                _ => return Err(LpError::Parse { line, message: "constant terms are not supported".into() }),
            }
        } else {
            coef = sign;
        }
        expr.add(coef, tok);
        i += 1;
    }
    if need_sense && sense_rhs.is_none() {
        return Err(LpError::Parse { line, message: "constraint without sense".into() });
    }
    Ok((name, expr, sense_rhs))
}

fn parse_bound(text: &str, line: usize) -> Result<Bound, LpError> {
    let t: Vec<&str> = text.split_whitespace().collect();
    let bad = || LpError::Parse { line, message: format!("unsupported bound `{text}`") };
    let finite = |x: f64| if x.is_infinite() { None } else { Some(x) };
    match t.as_slice() {
        [v, "free"] => Ok(Bound { var: v.to_string(), lower: None, upper: None }),
        [l, "<=", v, "<=", u] => Ok(Bound {
            var: v.to_string(),
            lower: finite(parse_number(l, line)?),
            upper: finite(parse_number(u, line)?),
        }),
        [v, "=", x] => {
            let x = parse_number(x, line)?;
            Ok(Bound { var: v.to_string(), lower: Some(x), upper: Some(x) })
        }
        [v, ">=", l] => Ok(Bound { var: v.to_string(), lower: finite(parse_number(l, line)?), upper: None }),
        [v, "<=", u] => Ok(Bound { var: v.to_string(), lower: Some(0.0), upper: finite(parse_number(u, line)?) }),
        _ => Err(bad()),
    }
}

impl Parser {
    fn flush(&mut self, section: Section) -> Result<(), LpError> {
        let Some((line, text)) = self.pending.take() else {
            return Ok(());
        };
        match section {
            Section::Objective => {
                let (name, expr, _) = parse_statement(&text, line, false)?;
                self.model.objective_name = name;
                self.model.objective = expr;
            }
            Section::Constraints => {
                let (name, expr, sr) = parse_statement(&text, line, true)?;
                let (sense, rhs) = sr.expect("checked by parse_statement");
                self.model.constraints.push(Constraint { name, expr, sense, rhs });
            }
            _ => {}
        }
        Ok(())
    }

    fn run(mut self, text: &str) -> Result<LpModel, LpError> {
        let mut section = Section::Preamble;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if let Some(comment) = raw.trim_start().strip_prefix('\\') {
                if section == Section::Preamble {
                    self.model.comments.push(comment.strip_prefix(' ').unwrap_or(comment).to_string());
                }
                continue;
            }
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let next = match trimmed.to_ascii_lowercase().as_str() {
                "minimize" | "minimise" | "min" => Some(Section::Objective),
                "subject to" | "st" | "s.t." => Some(Section::Constraints),
                "bounds" => Some(Section::Bounds),
                "binaries" | "binary" | "bin" => Some(Section::Binaries),
                "end" => Some(Section::Done),
                _ => None,
            };
            if let Some(next) = next {
                self.flush(section)?;
                section = next;
                continue;
            }
            match section {
                Section::Objective | Section::Constraints => {
                    let starts_new = trimmed.contains(':') && !raw.starts_with("   ");
                    match (&mut self.pending, starts_new) {
                        (Some((_, buf)), false) => {
                            buf.push(' ');
                            buf.push_str(trimmed);
                        }
                        _ => {
                            self.flush(section)?;
                            self.pending = Some((line, trimmed.to_string()));
                        }
                    }
                }
                Section::Bounds => self.model.bounds.push(parse_bound(trimmed, line)?),
                Section::Binaries => self.model.binaries.extend(trimmed.split_whitespace().map(str::to_string)),
                Section::Preamble | Section::Done => {
                    return Err(LpError::Parse { line, message: format!("unexpected content `{trimmed}`") })
                }
            }
        }
        self.flush(section)?;
        if section != Section::Done {
            return Err(LpError::Parse { line: text.lines().count(), message: "missing End".into() });
        }
        Ok(self.model)
    }
}
