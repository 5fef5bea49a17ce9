//! Reference interpreter for the surface language. It executes branches and
//! loops directly and serves as the oracle for lowering.

use std::collections::HashMap;

use thiserror::Error;

use super::{element_name, Expr, LValue, Stmt, SurfaceProgram, UnaryOp};
use crate::field::Value;
use crate::interp::Inputs;
use crate::ir::Var;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceEvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown array `{0}`")]
    UnknownArray(String),
    #[error("index {index} out of range for `{array}`")]
    OutOfRange { array: String, index: i64 },
    #[error("loop over `{var}` exceeded its bound {bound}")]
    BoundExceeded { var: String, bound: u32 },
    #[error("program assigns no output")]
    NoOutput,
}

struct Machine {
    scalars: HashMap<String, Value>,
    arrays: HashMap<String, Vec<Value>>,
}

impl Machine {
    fn expr(&self, e: &Expr) -> Result<Value, SurfaceEvalError> {
        Ok(match e {
            Expr::Int(n) => Value::from_i64(*n),
            Expr::Var(v) => *self
                .scalars
                .get(v)
                .ok_or_else(|| SurfaceEvalError::Unbound(v.clone()))?,
            Expr::Index(a, idx) => {
                let i = self.expr(idx)?;
                *self.slot(a, i)?.1
            }
            Expr::Unary(UnaryOp::Neg, e) => Value::ZERO - self.expr(e)?,
            Expr::Unary(UnaryOp::Not, e) => Value::from_bool(self.expr(e)?.is_zero()),
            Expr::Binary(op, l, r) => op.apply(self.expr(l)?, self.expr(r)?),
        })
    }

    fn slot(&self, array: &str, index: Value) -> Result<(usize, &Value), SurfaceEvalError> {
        let cells = self
            .arrays
            .get(array)
            .ok_or_else(|| SurfaceEvalError::UnknownArray(array.to_string()))?;
        let i = index.to_signed();
        usize::try_from(i)
            .ok()
            .and_then(|u| cells.get(u).map(|c| (u, c)))
            .ok_or(SurfaceEvalError::OutOfRange {
                array: array.to_string(),
                index: i,
            })
    }

    fn truthy(&self, e: &Expr) -> Result<bool, SurfaceEvalError> {
        Ok(!self.expr(e)?.is_zero())
    }

    fn assign(&mut self, target: &LValue, v: Value) -> Result<(), SurfaceEvalError> {
        match target {
            LValue::Scalar(n) => {
                self.scalars.insert(n.clone(), v);
            }
            LValue::Element(a, idx) => {
                let i = self.expr(idx)?;
                let (u, _) = self.slot(a, i)?;
                self.arrays.get_mut(a).expect("checked by slot")[u] = v;
            }
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), SurfaceEvalError> {
        for s in stmts {
            match s {
                Stmt::Assign { target, value } => {
                    let v = self.expr(value)?;
                    self.assign(target, v)?;
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    if self.truthy(cond)? {
                        self.block(then_branch)?;
                    } else {
                        self.block(else_branch)?;
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
                    let v = self.expr(init)?;
                    self.scalars.insert(var.clone(), v);
                    let mut trips = 0u32;
                    while self.truthy(cond)? {
                        if trips == *bound {
                            return Err(SurfaceEvalError::BoundExceeded {
                                var: var.clone(),
                                bound: *bound,
                            });
                        }
                        trips += 1;
                        self.block(body)?;
                        let v = self.expr(step)?;
                        self.scalars.insert(step_var.clone(), v);
                    }
                }
                Stmt::Return(_) => {}
            }
        }
        Ok(())
    }
}

/// Runs `sp` directly on flattened inputs (array element `i` of `a` is the
/// input `a_i`).
pub fn eval_surface(sp: &SurfaceProgram, inputs: &Inputs) -> Result<Value, SurfaceEvalError> {
    let mut m = Machine {
        scalars: HashMap::new(),
        arrays: HashMap::new(),
    };
    let get = |name: &str| {
        inputs
            .get(&Var::new(name))
            .copied()
            .ok_or_else(|| SurfaceEvalError::Unbound(name.to_string()))
    };
    for d in &sp.inputs {
        match d.len {
            None => {
                m.scalars.insert(d.name.clone(), get(&d.name)?);
            }
            Some(n) => {
                let cells = (0..n)
                    .map(|i| get(&element_name(&d.name, i)))
                    .collect::<Result<_, _>>()?;
                m.arrays.insert(d.name.clone(), cells);
            }
        }
    }
    m.block(&sp.body)?;
    let out = sp.output_var().ok_or(SurfaceEvalError::NoOutput)?;
    m.scalars
        .get(out)
        .copied()
        .ok_or_else(|| SurfaceEvalError::Unbound(out.to_string()))
}
