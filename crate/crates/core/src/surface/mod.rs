//! The surface language: assignments, if/else, bounded for-loops and
//! fixed-size input arrays over field integers.
//!
//! ```text
//! # task: guarded division
//! input x, y
//! if (y != 0) then r := x / y else r := -9999
//! ```
//!
//! Every loop carries an explicit `bound N` giving the maximum trip count.

mod eval;
mod parse;

use std::fmt::{self, Write as _};

pub use eval::{eval_surface, SurfaceEvalError};
pub use parse::{parse_surface, SyntaxError};

use crate::ir::Op;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: Op, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn index(array: &str, idx: Expr) -> Expr {
        Expr::Index(array.to_string(), Box::new(idx))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LValue {
    Scalar(String),
    Element(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Scalar(n) | LValue::Element(n, _) => n,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Stmt {
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    For {
        var: String,
        init: Expr,
        cond: Expr,
        step_var: String,
        step: Expr,
        bound: u32,
        body: Vec<Stmt>,
    },
    Return(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InputDecl {
    pub name: String,
    /// `Some(n)` for an array input of length `n`.
    pub len: Option<usize>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SurfaceProgram {
    pub inputs: Vec<InputDecl>,
    pub body: Vec<Stmt>,
}

/// Name of the flattened input variable holding element `i` of `array`.
pub fn element_name(array: &str, i: usize) -> String {
    format!("{array}_{i}")
}

impl SurfaceProgram {
    /// The variable whose final value the program returns: the `return`
    /// target if present, else the target of the textually last assignment.
    pub fn output_var(&self) -> Option<&str> {
        fn last_assigned(stmts: &[Stmt]) -> Option<&str> {
            stmts.iter().rev().find_map(|s| match s {
                Stmt::Assign { target, .. } => Some(target.name()),
                Stmt::Return(v) => Some(v.as_str()),
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => last_assigned(else_branch).or_else(|| last_assigned(then_branch)),
                Stmt::For { body, step_var, .. } => last_assigned(body).or(Some(step_var.as_str())),
            })
        }
        last_assigned(&self.body)
    }

    pub fn array_len(&self, name: &str) -> Option<usize> {
        self.inputs
            .iter()
            .find(|d| d.name == name)
            .and_then(|d| d.len)
    }

    /// Names of the flattened program inputs, scalars first then array
    /// elements, each group in declaration order.
    pub fn flat_inputs(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .inputs
            .iter()
            .filter(|d| d.len.is_none())
            .map(|d| d.name.clone())
            .collect();
        for d in &self.inputs {
            if let Some(n) = d.len {
                out.extend((0..n).map(|i| element_name(&d.name, i)));
            }
        }
        out
    }

    /// Canonical text form; parses back to an equal program.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.inputs.is_empty() {
            let decls: Vec<String> = self
                .inputs
                .iter()
                .map(|d| match d.len {
                    None => d.name.clone(),
                    Some(n) => format!("{}[{n}]", d.name),
                })
                .collect();
            writeln!(out, "input {}", decls.join(", ")).unwrap();
        }
        render_block(&mut out, &self.body, 0);
        out
    }
}

impl fmt::Display for SurfaceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn render_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Assign { target, value } => {
                writeln!(out, "{pad}{} := {value}", render_lvalue(target)).unwrap();
            }
            Stmt::Return(v) => writeln!(out, "{pad}return {v}").unwrap(),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                writeln!(out, "{pad}if ({cond}) {{").unwrap();
                render_block(out, then_branch, depth + 1);
                if else_branch.is_empty() {
                    writeln!(out, "{pad}}}").unwrap();
                } else {
                    writeln!(out, "{pad}}} else {{").unwrap();
                    render_block(out, else_branch, depth + 1);
                    writeln!(out, "{pad}}}").unwrap();
                }
            }
            Stmt::For {
                var,
                init,
                cond,
                step_var,
                step,
                bound,
                body,
            } => {
                writeln!(
                    out,
                    "{pad}for ({var} := {init}; {cond}; {step_var} := {step}) bound {bound} {{"
                )
                .unwrap();
                render_block(out, body, depth + 1);
                writeln!(out, "{pad}}}").unwrap();
            }
        }
    }
}

fn render_lvalue(lv: &LValue) -> String {
    match lv {
        LValue::Scalar(n) => n.clone(),
        LValue::Element(n, idx) => format!("{n}[{idx}]"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
            match e {
                Expr::Binary(..) | Expr::Unary(..) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Index(a, i) => write!(f, "{a}[{i}]"),
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                match **e {
                    // Keep `-(5)` distinct from the literal `-5`.
                    Expr::Int(_) => write!(f, "({e})"),
                    _ => operand(f, e),
                }
            }
            Expr::Unary(UnaryOp::Not, e) => {
                f.write_str("!")?;
                operand(f, e)
            }
            Expr::Binary(op, l, r) => {
                operand(f, l)?;
                write!(f, " {} ", op.symbol())?;
                operand(f, r)
            }
        }
    }
}
