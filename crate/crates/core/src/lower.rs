//! Lowering from the surface language to branch-free three-address code.
//!
//! * Every literal becomes a constant variable `c<i>`; every intermediate
//!   result a fresh temporary `t<i>`, so the output is in SSA form.
//! * `if` is if-converted: both branches run and each variable they touch is
//!   merged as `c * then + (1 - c) * else`.
//! * Loops are unrolled to their declared bound. Iteration `i` runs under the
//!   guard `g_i = g_{i-1} * cond_i`, merged like an `if` with an empty else.
//! * Reads `a[e]` with a data-dependent index become `sum_i EQ(e, i) * a_i`;
//!   writes update each cell as `a_i + EQ(e, i) * (v - a_i)`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::field::Value;
use crate::ir::{Op, Program, Statement, Var};
use crate::surface::{element_name, Expr, LValue, Stmt, SurfaceProgram, UnaryOp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LowerError {
    #[error("variable `{0}` is read before it is assigned")]
    Unbound(String),
    #[error("`{0}` is not a declared array")]
    UnknownArray(String),
    #[error("constant index {index} out of range for `{array}`")]
    IndexOutOfRange { array: String, index: i64 },
    #[error("input name `{0}` collides with generated temporaries")]
    ReservedName(String),
    #[error("program assigns no output")]
    NoOutput,
}

/// A lowered program together with the guard variable of every unrolled
/// iteration, grouped per loop in source order.
#[derive(Debug, Clone)]
pub struct Lowered {
    pub program: Program,
    pub loop_guards: Vec<Vec<Var>>,
}

pub fn lower(sp: &SurfaceProgram) -> Result<Program, LowerError> {
    lower_with_guards(sp).map(|l| l.program)
}

pub fn lower_with_guards(sp: &SurfaceProgram) -> Result<Lowered, LowerError> {
    let mut lw = Lowerer::default();
    for d in &sp.inputs {
        let reserved = |n: &str| {
            let mut chars = n.chars();
            matches!(chars.next(), Some('t' | 'c'))
                && !n[1..].is_empty()
                && n[1..].chars().all(|c| c.is_ascii_digit())
        };
        match d.len {
            None => {
                if reserved(&d.name) {
                    return Err(LowerError::ReservedName(d.name.clone()));
                }
                lw.env
                    .scalars
                    .insert(d.name.clone(), Var::new(d.name.as_str()));
            }
            Some(n) => {
                let cells = (0..n).map(|i| Var::new(element_name(&d.name, i))).collect();
                lw.env.arrays.insert(d.name.clone(), cells);
            }
        }
    }
    lw.block(&sp.body)?;

    let out_name = sp.output_var().ok_or(LowerError::NoOutput)?;
    let out = lw
        .env
        .scalars
        .get(out_name)
        .cloned()
        .ok_or_else(|| LowerError::Unbound(out_name.to_string()))?;
    if lw.statements.last().map(Statement::target) != Some(&out) {
        let zero = lw.constant(0);
        lw.emit(Op::Add, out, zero);
    }

    let inputs = sp.flat_inputs().into_iter().map(Var::new).collect();
    Ok(Lowered {
        program: Program::new(inputs, lw.constants, lw.statements),
        loop_guards: lw.guards,
    })
}

#[derive(Clone, Default)]
struct Env {
    scalars: BTreeMap<String, Var>,
    arrays: BTreeMap<String, Vec<Var>>,
}

#[derive(Default)]
struct Lowerer {
    statements: Vec<Statement>,
    constants: Vec<(Var, Value)>,
    const_vars: HashMap<i64, Var>,
    next_temp: usize,
    env: Env,
    guards: Vec<Vec<Var>>,
}

impl Lowerer {
    fn constant(&mut self, n: i64) -> Var {
        if let Some(v) = self.const_vars.get(&n) {
            return v.clone();
        }
        let v = Var::new(format!("c{}", self.constants.len()));
        self.constants.push((v.clone(), Value::from_i64(n)));
        self.const_vars.insert(n, v.clone());
        v
    }

    fn emit(&mut self, op: Op, lhs: Var, rhs: Var) -> Var {
        let t = Var::new(format!("t{}", self.next_temp));
        self.next_temp += 1;
        self.statements
            .push(Statement::assign(t.clone(), op, lhs, rhs));
        t
    }

    fn array(&self, name: &str) -> Result<&Vec<Var>, LowerError> {
        self.env
            .arrays
            .get(name)
            .ok_or_else(|| LowerError::UnknownArray(name.to_string()))
    }

    fn literal_index(&self, array: &str, n: i64) -> Result<usize, LowerError> {
        let len = self.array(array)?.len();
        usize::try_from(n)
            .ok()
            .filter(|i| *i < len)
            .ok_or(LowerError::IndexOutOfRange {
                array: array.to_string(),
                index: n,
            })
    }

    fn expr(&mut self, e: &Expr) -> Result<Var, LowerError> {
        match e {
            Expr::Int(n) => Ok(self.constant(*n)),
            Expr::Var(v) => self
                .env
                .scalars
                .get(v)
                .cloned()
                .ok_or_else(|| LowerError::Unbound(v.clone())),
            Expr::Index(a, idx) => {
                if let Expr::Int(n) = **idx {
                    let i = self.literal_index(a, n)?;
                    return Ok(self.array(a)?[i].clone());
                }
                let iv = self.expr(idx)?;
                let cells = self.array(a)?.clone();
                let mut acc: Option<Var> = None;
                for (i, cell) in cells.into_iter().enumerate() {
                    let ci = self.constant(i as i64);
                    let hit = self.emit(Op::Eq, iv.clone(), ci);
                    let term = self.emit(Op::Mul, hit, cell);
                    acc = Some(match acc {
                        None => term,
                        Some(a) => self.emit(Op::Add, a, term),
                    });
                }
                Ok(acc.expect("arrays are non-empty"))
            }
            Expr::Unary(UnaryOp::Neg, inner) => {
                let v = self.expr(inner)?;
                let zero = self.constant(0);
                Ok(self.emit(Op::Sub, zero, v))
            }
            Expr::Unary(UnaryOp::Not, inner) => {
                let v = self.expr(inner)?;
                let zero = self.constant(0);
                Ok(self.emit(Op::Eq, v, zero))
            }
            Expr::Binary(op, l, r) => {
                let lv = self.expr(l)?;
                let rv = self.expr(r)?;
                Ok(self.emit(*op, lv, rv))
            }
        }
    }

    /// Lowers a condition to a 0/1 variable.
    fn condition(&mut self, e: &Expr) -> Result<Var, LowerError> {
        let boolean = matches!(e, Expr::Binary(op, ..) if op.is_comparison())
            || matches!(e, Expr::Unary(UnaryOp::Not, _));
        let v = self.expr(e)?;
        if boolean {
            Ok(v)
        } else {
            let zero = self.constant(0);
            Ok(self.emit(Op::Neq, v, zero))
        }
    }

    fn assign(&mut self, target: &LValue, value: &Expr) -> Result<(), LowerError> {
        let v = self.expr(value)?;
        match target {
            LValue::Scalar(n) => {
                self.env.scalars.insert(n.clone(), v);
            }
            LValue::Element(a, idx) => {
                if let Expr::Int(n) = *idx {
                    let i = self.literal_index(a, n)?;
                    self.env.arrays.get_mut(a).expect("checked")[i] = v;
                    return Ok(());
                }
                let iv = self.expr(idx)?;
                let len = self.array(a)?.len();
                for i in 0..len {
                    let old = self.env.arrays[a][i].clone();
                    let ci = self.constant(i as i64);
                    let hit = self.emit(Op::Eq, iv.clone(), ci);
                    let delta = self.emit(Op::Sub, v.clone(), old.clone());
                    let masked = self.emit(Op::Mul, hit, delta);
                    let new = self.emit(Op::Add, old, masked);
                    self.env.arrays.get_mut(a).expect("checked")[i] = new;
                }
            }
        }
        Ok(())
    }

    /// `sel * taken + (1 - sel) * other` for every binding that differs.
    fn merge(&mut self, sel: &Var, taken: Env, other: Env) -> Env {
        let mut one_minus: Option<Var> = None;
        let mut blend = |lw: &mut Lowerer, t: Option<&Var>, o: Option<&Var>| -> Var {
            if t == o {
                return t.expect("present in at least one env").clone();
            }
            let t = t.cloned().unwrap_or_else(|| lw.constant(0));
            let o = o.cloned().unwrap_or_else(|| lw.constant(0));
            let nc = match &one_minus {
                Some(v) => v.clone(),
                None => {
                    let one = lw.constant(1);
                    let v = lw.emit(Op::Sub, one, sel.clone());
                    one_minus = Some(v.clone());
                    v
                }
            };
            let a = lw.emit(Op::Mul, sel.clone(), t);
            let b = lw.emit(Op::Mul, nc, o);
            lw.emit(Op::Add, a, b)
        };

        let mut merged = Env::default();
        let mut names: Vec<&String> = taken.scalars.keys().chain(other.scalars.keys()).collect();
        names.sort();
        names.dedup();
        for name in names {
            let v = blend(self, taken.scalars.get(name), other.scalars.get(name));
            merged.scalars.insert(name.clone(), v);
        }
        for (name, cells) in &taken.arrays {
            let other_cells = &other.arrays[name];
            let new = cells
                .iter()
                .zip(other_cells)
                .map(|(t, o)| blend(self, Some(t), Some(o)))
                .collect();
            merged.arrays.insert(name.clone(), new);
        }
        merged
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), LowerError> {
        for s in stmts {
            match s {
                Stmt::Assign { target, value } => self.assign(target, value)?,
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    let c = self.condition(cond)?;
                    let before = self.env.clone();
                    self.block(then_branch)?;
                    let taken = std::mem::replace(&mut self.env, before);
                    self.block(else_branch)?;
                    let other = std::mem::take(&mut self.env);
                    self.env = self.merge(&c, taken, other);
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
                    let v = self.expr(init)?;
                    self.env.scalars.insert(var.clone(), v);
                    let mut guards = Vec::with_capacity(*bound as usize);
                    let mut active: Option<Var> = None;
                    for _ in 0..*bound {
                        let c = self.condition(cond)?;
                        let g = match active {
                            None => c,
                            Some(a) => self.emit(Op::Mul, a, c),
                        };
                        guards.push(g.clone());
                        active = Some(g.clone());
                        let before = self.env.clone();
                        self.block(body)?;
                        let sv = self.expr(step)?;
                        self.env.scalars.insert(step_var.clone(), sv);
                        let taken = std::mem::take(&mut self.env);
                        self.env = self.merge(&g, taken, before);
                    }
                    self.guards.push(guards);
                }
                Stmt::Return(_) => {}
            }
        }
        Ok(())
    }
}
