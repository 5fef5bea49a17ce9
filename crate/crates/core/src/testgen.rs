//! Seeded random programs and inputs for differential testing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::field::Value;
use crate::interp::Inputs;
use crate::ir::{Op, Program, Statement, Var};
use crate::surface::{element_name, Expr, InputDecl, LValue, Stmt, SurfaceProgram, UnaryOp};

/// A straight-line program with `n_inputs` inputs `x<i>`, `n_consts`
/// constants `k<i>` in `-10..=10`, and `n_statements` assignments `v<i>`
/// over previously defined variables.
pub fn random_program(
    rng: &mut impl Rng,
    n_inputs: usize,
    n_consts: usize,
    n_statements: usize,
) -> Program {
    let inputs: Vec<Var> = (0..n_inputs).map(|i| Var::new(format!("x{i}"))).collect();
    let constants: Vec<(Var, Value)> = (0..n_consts)
        .map(|i| {
            (
                Var::new(format!("k{i}")),
                Value::from_i64(rng.gen_range(-10..=10)),
            )
        })
        .collect();
    let mut defined: Vec<Var> = inputs
        .iter()
        .cloned()
        .chain(constants.iter().map(|(v, _)| v.clone()))
        .collect();
    let mut statements = Vec::with_capacity(n_statements);
    for i in 0..n_statements {
        let op = *Op::ALL.choose(rng).expect("non-empty");
        let l = defined.choose(rng).expect("at least one input").clone();
        let r = defined.choose(rng).expect("at least one input").clone();
        let t = Var::new(format!("v{i}"));
        statements.push(Statement::assign(t.clone(), op, l, r));
        defined.push(t);
    }
    Program::new(inputs, constants, statements)
}

/// Values in `-range..=range` for every input of `p`.
pub fn random_inputs(rng: &mut impl Rng, p: &Program, range: i64) -> Inputs {
    p.inputs
        .iter()
        .map(|v| (v.clone(), Value::from_i64(rng.gen_range(-range..=range))))
        .collect()
}

/// Limits for [`random_surface`].
#[derive(Clone, Copy, Debug)]
pub struct SurfaceSpec {
    /// Total statements, nested ones included.
    pub max_statements: usize,
    pub max_array: usize,
    pub max_bound: u32,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec {
            max_statements: 8,
            max_array: 4,
            max_bound: 4,
        }
    }
}

/// Name of the scalar input used as a data-dependent array index.
pub const INDEX_INPUT: &str = "j";

struct SurfaceGen<'a, R> {
    rng: &'a mut R,
    spec: SurfaceSpec,
    array_len: usize,
    budget: usize,
    loops: usize,
}

impl<R: Rng> SurfaceGen<'_, R> {
    fn atom(&mut self, defined: &[String], loop_vars: &[(String, u32)]) -> Expr {
        match self.rng.gen_range(0..10) {
            0..=1 => Expr::Int(self.rng.gen_range(-5..=5)),
            2 if self.array_len > 0 => {
                // Index by a literal, the index input, or a loop variable
                // whose bound keeps it in range.
                let idx = match self.rng.gen_range(0..3) {
                    0 => Expr::Int(self.rng.gen_range(0..self.array_len as i64)),
                    1 => Expr::var(INDEX_INPUT),
                    _ => match loop_vars.choose(self.rng) {
                        Some((v, _)) => Expr::var(v),
                        None => Expr::var(INDEX_INPUT),
                    },
                };
                Expr::index("a", idx)
            }
            _ => Expr::var(defined.choose(self.rng).expect("inputs are defined")),
        }
    }

    fn expr(&mut self, depth: u32, defined: &[String], loop_vars: &[(String, u32)]) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.atom(defined, loop_vars);
        }
        match self.rng.gen_range(0..10) {
            0 => {
                let op = if self.rng.gen_bool(0.5) {
                    UnaryOp::Neg
                } else {
                    UnaryOp::Not
                };
                Expr::Unary(op, Box::new(self.expr(depth - 1, defined, loop_vars)))
            }
            _ => {
                let op = *Op::ALL.choose(self.rng).expect("non-empty");
                let l = self.expr(depth - 1, defined, loop_vars);
                let r = self.expr(depth - 1, defined, loop_vars);
                Expr::bin(op, l, r)
            }
        }
    }

    /// Generates a block and returns the variables it definitely assigns.
    fn block(
        &mut self,
        defined: &mut Vec<String>,
        loop_vars: &mut Vec<(String, u32)>,
        depth: u32,
    ) -> Vec<Stmt> {
        let mut out = Vec::new();
        let want = self.rng.gen_range(1..=3);
        for _ in 0..want {
            if self.budget <= 1 {
                break;
            }
            self.budget -= 1;
            let kind = if depth >= 2 {
                0
            } else {
                self.rng.gen_range(0..10)
            };
            match kind {
                7 | 8 => {
                    let cond = self.expr(2, defined, loop_vars);
                    let mut then_defs = defined.clone();
                    let then_branch = self.block(&mut then_defs, loop_vars, depth + 1);
                    let mut else_defs = defined.clone();
                    let else_branch = if self.rng.gen_bool(0.6) {
                        self.block(&mut else_defs, loop_vars, depth + 1)
                    } else {
                        Vec::new()
                    };
                    for v in then_defs {
                        if else_defs.contains(&v) && !defined.contains(&v) {
                            defined.push(v);
                        }
                    }
                    out.push(Stmt::If {
                        cond,
                        then_branch,
                        else_branch,
                    });
                }
                9 => {
                    let max_bound = if self.array_len > 0 {
                        self.spec.max_bound.min(self.array_len as u32)
                    } else {
                        self.spec.max_bound
                    };
                    let bound = self.rng.gen_range(1..=max_bound);
                    let trips = self.rng.gen_range(0..=bound);
                    let var = format!("i{}", self.loops);
                    self.loops += 1;
                    let mut body_defs = defined.clone();
                    body_defs.push(var.clone());
                    loop_vars.push((var.clone(), bound));
                    let body = self.block(&mut body_defs, loop_vars, depth + 1);
                    loop_vars.pop();
                    defined.push(var.clone());
                    if trips > 0 {
                        for v in body_defs {
                            if !defined.contains(&v) {
                                defined.push(v);
                            }
                        }
                    }
                    out.push(Stmt::For {
                        init: Expr::Int(0),
                        cond: Expr::bin(Op::Lt, Expr::var(&var), Expr::Int(trips as i64)),
                        step_var: var.clone(),
                        step: Expr::bin(Op::Add, Expr::var(&var), Expr::Int(1)),
                        var,
                        bound,
                        body,
                    });
                }
                _ => {
                    let value = self.expr(2, defined, loop_vars);
                    let target = if self.array_len > 0 && self.rng.gen_bool(0.2) {
                        let idx = match loop_vars.choose(self.rng) {
                            Some((v, _)) => Expr::var(v),
                            None => Expr::Int(self.rng.gen_range(0..self.array_len as i64)),
                        };
                        LValue::Element("a".into(), idx)
                    } else {
                        let name = ["r", "s", "u", "x", "y"]
                            .choose(self.rng)
                            .expect("non-empty")
                            .to_string();
                        if !defined.contains(&name) {
                            defined.push(name.clone());
                        }
                        LValue::Scalar(name)
                    };
                    out.push(Stmt::Assign { target, value });
                }
            }
        }
        out
    }
}

/// A random surface program with scalar inputs `x`, `y`, the index input
/// `j`, and an optional input array `a`. Loop variables only index `a`
/// within their bound, and the program ends with an assignment to `out`.
pub fn random_surface(rng: &mut impl Rng, spec: SurfaceSpec) -> SurfaceProgram {
    let array_len = rng.gen_range(0..=spec.max_array);
    let mut inputs = vec![
        InputDecl {
            name: "x".into(),
            len: None,
        },
        InputDecl {
            name: "y".into(),
            len: None,
        },
    ];
    if array_len > 0 {
        inputs.push(InputDecl {
            name: INDEX_INPUT.into(),
            len: None,
        });
        inputs.push(InputDecl {
            name: "a".into(),
            len: Some(array_len),
        });
    }
    let mut g = SurfaceGen {
        rng,
        spec,
        array_len,
        budget: spec.max_statements,
        loops: 0,
    };
    let mut defined: Vec<String> = vec!["x".into(), "y".into()];
    let mut body = g.block(&mut defined, &mut Vec::new(), 0);
    let value = g.expr(2, &defined, &[]);
    body.push(Stmt::Assign {
        target: LValue::Scalar("out".into()),
        value,
    });
    SurfaceProgram { inputs, body }
}

/// Inputs for a program from [`random_surface`]: scalars and array cells in
/// `-range..=range`, the index input within the array.
pub fn random_surface_inputs(rng: &mut impl Rng, sp: &SurfaceProgram, range: i64) -> Inputs {
    let mut out = Inputs::new();
    for d in &sp.inputs {
        match d.len {
            Some(n) => {
                for i in 0..n {
                    out.insert(
                        Var::new(element_name(&d.name, i)),
                        Value::from_i64(rng.gen_range(-range..=range)),
                    );
                }
            }
            None if d.name == INDEX_INPUT => {
                let n = sp.array_len("a").unwrap_or(1) as i64;
                out.insert(Var::new(INDEX_INPUT), Value::from_i64(rng.gen_range(0..n)));
            }
            None => {
                out.insert(
                    Var::new(d.name.as_str()),
                    Value::from_i64(rng.gen_range(-range..=range)),
                );
            }
        }
    }
    out
}
