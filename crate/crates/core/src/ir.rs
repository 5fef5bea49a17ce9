//! Three-address program model.
//!
//! A [`Program`] is a straight-line sequence of statements. Every statement is
//! either a simple assignment `t := OP a b` or a combining statement
//! `t := COMBINE (s0,v0) (s1,v1) ...`, which evaluates to `sum_j s_j * v_j`
//! for selector bits `s_j`. The program returns the target of its last
//! statement.
//!
//! The textual form (see [`Program::to_text`]) is line oriented:
//!
//! ```text
//! prime 2305843009213693951
//! input x
//! const c0 -9999
//! t0 := DIV x y
//! t1 := COMBINE (s0,t0) (s1,x)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use thiserror::Error;

use crate::field::{Value, MODULUS};

/// A program variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// An encrypted selector bit, written `s<j>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelectorId(pub u32);

impl fmt::Debug for SelectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for SelectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl FromStr for SelectorId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('s')
            .and_then(|n| n.parse().ok())
            .map(SelectorId)
            .ok_or(())
    }
}

/// Binary operations available to simple expressions.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    pub const ALL: [Op; 10] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Eq,
        Op::Neq,
        Op::Lt,
        Op::Le,
        Op::Gt,
        Op::Ge,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::Add => "ADD",
            Op::Sub => "SUB",
            Op::Mul => "MUL",
            Op::Div => "DIV",
            Op::Eq => "EQ",
            Op::Neq => "NEQ",
            Op::Lt => "LT",
            Op::Le => "LE",
            Op::Gt => "GT",
            Op::Ge => "GE",
        }
    }

    /// Surface-language spelling.
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Eq => "==",
            Op::Neq => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }

    /// Operator name as used in mined pattern tables (`plus`, `notEquals`, ...).
    pub fn pattern_name(self) -> &'static str {
        match self {
            Op::Add => "plus",
            Op::Sub => "minus",
            Op::Mul => "multiply",
            Op::Div => "divide",
            Op::Eq => "equals",
            Op::Neq => "notEquals",
            Op::Lt => "less",
            Op::Le => "lessEquals",
            Op::Gt => "greater",
            Op::Ge => "greaterEquals",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Op::Eq | Op::Neq | Op::Lt | Op::Le | Op::Gt | Op::Ge)
    }

    pub fn apply(self, a: Value, b: Value) -> Value {
        use std::cmp::Ordering::*;
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
            Op::Eq => Value::from_bool(a == b),
            Op::Neq => Value::from_bool(a != b),
            Op::Lt => Value::from_bool(a.signed_cmp(b) == Less),
            Op::Le => Value::from_bool(a.signed_cmp(b) != Greater),
            Op::Gt => Value::from_bool(a.signed_cmp(b) == Greater),
            Op::Ge => Value::from_bool(a.signed_cmp(b) != Less),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Op {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .into_iter()
            .find(|op| op.mnemonic().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// One operation over exactly two variables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SimpleExpr {
    pub op: Op,
    pub lhs: Var,
    pub rhs: Var,
}

impl SimpleExpr {
    pub fn new(op: Op, lhs: impl Into<Var>, rhs: impl Into<Var>) -> Self {
        SimpleExpr {
            op,
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }
}

impl fmt::Display for SimpleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.op, self.lhs, self.rhs)
    }
}

impl From<String> for Var {
    fn from(s: String) -> Self {
        Var(s)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CombineOption {
    pub selector: SelectorId,
    pub source: Var,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Statement {
    Assign {
        target: Var,
        expr: SimpleExpr,
    },
    Combine {
        target: Var,
        options: Vec<CombineOption>,
    },
}

impl Statement {
    pub fn assign(
        target: impl Into<Var>,
        op: Op,
        lhs: impl Into<Var>,
        rhs: impl Into<Var>,
    ) -> Self {
        Statement::Assign {
            target: target.into(),
            expr: SimpleExpr::new(op, lhs, rhs),
        }
    }

    pub fn target(&self) -> &Var {
        match self {
            Statement::Assign { target, .. } | Statement::Combine { target, .. } => target,
        }
    }

    /// Variables read by this statement, in operand order.
    pub fn reads(&self) -> Vec<&Var> {
        match self {
            Statement::Assign { expr, .. } => vec![&expr.lhs, &expr.rhs],
            Statement::Combine { options, .. } => options.iter().map(|o| &o.source).collect(),
        }
    }

    pub fn is_combine(&self) -> bool {
        matches!(self, Statement::Combine { .. })
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Assign { target, expr } => write!(f, "{target} := {expr}"),
            Statement::Combine { target, options } => {
                write!(f, "{target} := COMBINE")?;
                for o in options {
                    write!(f, " ({},{})", o.selector, o.source)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("prime {found} does not match the field modulus {expected}")]
    PrimeMismatch { found: u64, expected: u64 },
    #[error("statement {index}: variable `{var}` used before assignment")]
    UseBeforeDef { index: usize, var: Var },
    #[error("statement {index}: combine needs at least two options")]
    CombineTooSmall { index: usize },
    #[error("selector {0} appears more than once")]
    DuplicateSelector(SelectorId),
    #[error("variable `{0}` declared twice")]
    DuplicateDeclaration(Var),
    #[error("program has no statements")]
    Empty,
}

/// A three-address program.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub inputs: Vec<Var>,
    /// Hoisted literals, bound before the first statement like inputs.
    pub constants: Vec<(Var, Value)>,
    pub statements: Vec<Statement>,
}

impl Program {
    pub fn new(inputs: Vec<Var>, constants: Vec<(Var, Value)>, statements: Vec<Statement>) -> Self {
        Program {
            inputs,
            constants,
            statements,
        }
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn output(&self) -> Option<&Var> {
        self.statements.last().map(Statement::target)
    }

    pub fn constant(&self, var: &Var) -> Option<Value> {
        self.constants
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, c)| *c)
    }

    pub fn combine_count(&self) -> usize {
        self.statements.iter().filter(|s| s.is_combine()).count()
    }

    /// All selectors in order of appearance.
    pub fn selectors(&self) -> Vec<SelectorId> {
        self.statements
            .iter()
            .flat_map(|s| match s {
                Statement::Combine { options, .. } => options.iter().map(|o| o.selector).collect(),
                Statement::Assign { .. } => Vec::new(),
            })
            .collect()
    }

    /// Every name the program mentions.
    pub fn names(&self) -> HashSet<String> {
        let mut names: HashSet<String> = self.inputs.iter().map(|v| v.0.clone()).collect();
        names.extend(self.constants.iter().map(|(v, _)| v.0.clone()));
        for s in &self.statements {
            names.insert(s.target().0.clone());
            names.extend(s.reads().into_iter().map(|v| v.0.clone()));
        }
        names
    }

    /// Checks definition-before-use and combine well-formedness.
    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.statements.is_empty() {
            return Err(ProgramError::Empty);
        }
        let mut defined: HashSet<&Var> = HashSet::new();
        for v in self
            .inputs
            .iter()
            .chain(self.constants.iter().map(|(v, _)| v))
        {
            if !defined.insert(v) {
                return Err(ProgramError::DuplicateDeclaration(v.clone()));
            }
        }
        let mut selectors = BTreeSet::new();
        for (index, s) in self.statements.iter().enumerate() {
            for r in s.reads() {
                if !defined.contains(r) {
                    return Err(ProgramError::UseBeforeDef {
                        index,
                        var: r.clone(),
                    });
                }
            }
            if let Statement::Combine { options, .. } = s {
                if options.len() < 2 {
                    return Err(ProgramError::CombineTooSmall { index });
                }
                for o in options {
                    if !selectors.insert(o.selector) {
                        return Err(ProgramError::DuplicateSelector(o.selector));
                    }
                }
            }
            defined.insert(s.target());
        }
        Ok(())
    }

    /// Renders the line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut out = format!("prime {MODULUS}\n");
        for v in &self.inputs {
            out.push_str(&format!("input {v}\n"));
        }
        for (v, c) in &self.constants {
            out.push_str(&format!("const {v} {c}\n"));
        }
        for s in &self.statements {
            out.push_str(&format!("{s}\n"));
        }
        out
    }

    /// Parses the text form. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Program, ProgramError> {
        let mut program = Program::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ProgramError::Syntax {
                line: line_no,
                message,
            };
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "prime" => {
                    let p: u64 = words
                        .get(1)
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| syntax("expected `prime <p>`".into()))?;
                    if p != MODULUS {
                        return Err(ProgramError::PrimeMismatch {
                            found: p,
                            expected: MODULUS,
                        });
                    }
                }
                "input" => {
                    if words.len() != 2 || !is_identifier(words[1]) {
                        return Err(syntax("expected `input <var>`".into()));
                    }
                    program.inputs.push(Var::new(words[1]));
                }
                "const" => {
                    let value = (words.len() == 3 && is_identifier(words[1]))
                        .then(|| words[2].parse::<i64>().ok())
                        .flatten()
                        .ok_or_else(|| syntax("expected `const <var> <integer>`".into()))?;
                    program
                        .constants
                        .push((Var::new(words[1]), Value::from_i64(value)));
                }
                _ => program
                    .statements
                    .push(parse_statement(line).map_err(syntax)?),
            }
        }
        Ok(program)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_statement(line: &str) -> Result<Statement, String> {
    let (target, rhs) = line
        .split_once(":=")
        .ok_or_else(|| "expected `<var> := ...`".to_string())?;
    let target = target.trim();
    if !is_identifier(target) {
        return Err(format!("invalid target `{target}`"));
    }
    let words: Vec<&str> = rhs.split_whitespace().collect();
    match words.first() {
        Some(&"COMBINE") => {
            let options = words[1..]
                .iter()
                .map(|w| parse_option(w))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Statement::Combine {
                target: Var::new(target),
                options,
            })
        }
        Some(op) => {
            let op: Op = op
                .parse()
                .map_err(|_| format!("unknown operation `{op}`"))?;
            if words.len() != 3 || !is_identifier(words[1]) || !is_identifier(words[2]) {
                return Err("expected `OP <var> <var>`".into());
            }
            Ok(Statement::assign(target, op, words[1], words[2]))
        }
        None => Err("missing expression".into()),
    }
}

fn parse_option(word: &str) -> Result<CombineOption, String> {
    let inner = word
        .strip_prefix('(')
        .and_then(|w| w.strip_suffix(')'))
        .ok_or_else(|| format!("malformed combine option `{word}`"))?;
    let (sel, src) = inner
        .split_once(',')
        .ok_or_else(|| format!("malformed combine option `{word}`"))?;
    let selector = sel
        .parse()
        .map_err(|_| format!("malformed selector `{sel}`"))?;
    if !is_identifier(src) {
        return Err(format!("invalid variable `{src}`"));
    }
    Ok(CombineOption {
        selector,
        source: Var::new(src),
    })
}

/// Upper bound `|ops| * |vars|^arity` on distinct simple expressions.
pub fn count_expressions(num_vars: u32, num_ops: u32, arity: u32) -> BigUint {
    BigUint::from(num_ops) * BigUint::from(num_vars).pow(arity)
}

/// Number of reads of each variable across all statements.
pub(crate) fn use_counts(p: &Program) -> BTreeMap<Var, usize> {
    let mut uses = BTreeMap::new();
    for s in &p.statements {
        for r in s.reads() {
            *uses.entry(r.clone()).or_insert(0) += 1;
        }
    }
    uses
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let text = "prime 2305843009213693951\ninput a\nconst c0 -9999\nt0 := MUL a a\nt1 := ADD a c0\nt2 := COMBINE (s0,t0) (s1,t1)\n";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.to_text(), text);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_wrong_prime() {
        assert!(matches!(
            Program::parse("prime 7\n"),
            Err(ProgramError::PrimeMismatch { found: 7, .. })
        ));
    }

    #[test]
    fn syntax_errors_report_line() {
        let err = Program::parse("input a\nb := FOO a a\n").unwrap_err();
        assert_eq!(
            err,
            ProgramError::Syntax {
                line: 2,
                message: "unknown operation `FOO`".into()
            }
        );
    }

    #[test]
    fn validate_catches_structure_errors() {
        let p = Program::parse("input a\nb := MUL a c\n").unwrap();
        assert!(matches!(
            p.validate(),
            Err(ProgramError::UseBeforeDef { .. })
        ));
        let p = Program::parse("input a\nb := COMBINE (s0,a)\n").unwrap();
        assert_eq!(
            p.validate(),
            Err(ProgramError::CombineTooSmall { index: 0 })
        );
        let p = Program::parse("input a\nb := COMBINE (s0,a) (s0,a)\n").unwrap();
        assert_eq!(
            p.validate(),
            Err(ProgramError::DuplicateSelector(SelectorId(0)))
        );
    }

    #[test]
    fn comparisons_are_boolean() {
        for op in Op::ALL.into_iter().filter(|o| o.is_comparison()) {
            for a in -3..=3 {
                for b in -3..=3 {
                    let r = op.apply(Value::from_i64(a), Value::from_i64(b));
                    assert!(r == Value::ZERO || r == Value::ONE);
                }
            }
        }
        assert_eq!(Op::Lt.apply((-9999).into(), 0.into()), Value::ONE);
    }

    #[test]
    fn count_expressions_examples() {
        assert_eq!(count_expressions(1, 3, 2), BigUint::from(3u32));
        assert_eq!(count_expressions(2, 3, 2), BigUint::from(12u32));
        assert_eq!(count_expressions(6, 2, 2), BigUint::from(72u32));
    }

    fn enumerate_distinct(num_vars: usize, num_ops: usize, arity: usize) -> usize {
        // Independent oracle: build every operand tuple and collect distinct expressions.
        let mut tuples: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..arity {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..num_vars).map(move |v| {
                        let mut t = t.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        let mut set = HashSet::new();
        for op in 0..num_ops {
            for t in &tuples {
                set.insert((op, t.clone()));
            }
        }
        set.len()
    }

    #[test]
    fn count_expressions_matches_enumeration() {
        for vars in 1..=6u32 {
            for ops in 1..=4u32 {
                for arity in 1..=2u32 {
                    assert_eq!(
                        count_expressions(vars, ops, arity),
                        BigUint::from(enumerate_distinct(
                            vars as usize,
                            ops as usize,
                            arity as usize
                        )),
                    );
                }
            }
        }
    }
}
