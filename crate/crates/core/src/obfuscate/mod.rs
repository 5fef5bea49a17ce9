//! Obfuscation by encrypted selection: every real statement runs next to
//! misleading alternatives, and a combining statement keeps the real result
//! through one-hot selector bits that only the key holder knows.

mod config;
mod deobf;
mod encrypted;
mod misleading;
mod program_level;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::crypto::SelectorKey;
use crate::field::{Value, MODULUS};
use crate::ir::{CombineOption, Op, Program, ProgramError, SelectorId, SimpleExpr, Statement, Var};

pub use config::{FakeVars, ObfuscationConfig, SlotPlan, StatementPlan, Strategy, DEFAULT_SEED};
pub use deobf::{deobfuscate, normalize, resolve};
pub use encrypted::{encrypt_inputs, eval_encrypted, EncryptedEvalError};
pub use misleading::gen_misleading;
pub use program_level::obfuscate_program_level;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObfError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("statement {index} is a combining statement; obfuscate lowered programs only")]
    NotAssignOnly { index: usize },
    #[error(
        "cannot draw {needed} distinct alternatives for `{statement}`: only {available} exist"
    )]
    PoolExhausted {
        statement: String,
        needed: usize,
        available: usize,
    },
    #[error("fake variable `{0}` clashes with a program variable")]
    NameClash(String),
    #[error("confidential program index {index} out of range for {count} programs")]
    IStarOutOfRange { index: usize, count: usize },
    #[error("no programs to obfuscate")]
    NoPrograms,
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// An obfuscated program. Its combining statements are public; which option
/// each one keeps is not.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ObfProgram {
    pub program: Program,
}

impl ObfProgram {
    /// The option sources of each combining statement, in statement order.
    pub fn combines(&self) -> Vec<&[CombineOption]> {
        self.program
            .statements
            .iter()
            .filter_map(|s| match s {
                Statement::Combine { options, .. } => Some(options.as_slice()),
                _ => None,
            })
            .collect()
    }

    pub fn selectors(&self) -> Vec<SelectorId> {
        self.program.selectors()
    }

    pub fn to_text(&self) -> String {
        self.program.to_text()
    }

    pub fn parse(text: &str) -> Result<Self, ProgramError> {
        let program = Program::parse(text)?;
        program.validate()?;
        Ok(ObfProgram { program })
    }

    /// The attacker-visible structure: statements with every name replaced
    /// by its kind and first-occurrence index, constants without values.
    pub fn skeleton(&self) -> String {
        let mut names: BTreeMap<&Var, String> = BTreeMap::new();
        let p = &self.program;
        for (i, v) in p.inputs.iter().enumerate() {
            names.insert(v, format!("in{i}"));
        }
        for (i, (v, _)) in p.constants.iter().enumerate() {
            names.insert(v, format!("k{i}"));
        }
        let mut out = String::new();
        for (next, s) in p.statements.iter().enumerate() {
            let name = |v: &Var| -> String {
                names
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| panic!("validated program reads `{v}` before definition"))
            };
            let line = match s {
                Statement::Assign { expr, .. } => {
                    format!("{} {} {}", expr.op, name(&expr.lhs), name(&expr.rhs))
                }
                Statement::Combine { options, .. } => {
                    let srcs: Vec<String> = options.iter().map(|o| name(&o.source)).collect();
                    format!("COMBINE {}", srcs.join(" "))
                }
            };
            let t = format!("v{next}");
            names.insert(s.target(), t.clone());
            out.push_str(&format!("{t} := {line}\n"));
        }
        out
    }
}

struct Builder<'a> {
    cfg: &'a ObfuscationConfig,
    rng: ChaCha8Rng,
    used: HashSet<String>,
    next_temp: usize,
    next_const: usize,
    zeros: HashSet<Var>,
}

/// Statements emitted for one source statement or one fake.
struct Group {
    statements: Vec<Statement>,
    real: bool,
}

impl Builder<'_> {
    fn fresh(&mut self, prefix: char) -> Var {
        loop {
            let n = if prefix == 'c' {
                &mut self.next_const
            } else {
                &mut self.next_temp
            };
            let name = format!("{prefix}{n}");
            *n += 1;
            if self.used.insert(name.clone()) {
                return Var::new(name);
            }
        }
    }

    fn fresh_nonzero(&mut self) -> Value {
        Value::new(self.rng.gen_range(1..MODULUS))
    }

    /// Emits `target := COMBINE` over `k` shuffled options built by
    /// `make`, returning the statements. Option 0 is the real one.
    fn combine<T: Clone>(
        &mut self,
        target: Var,
        options: Vec<T>,
        mut make: impl FnMut(&mut Self, T) -> (Var, Option<Statement>),
        out: &mut Vec<Statement>,
    ) {
        let mut tagged: Vec<(bool, T)> = options
            .into_iter()
            .enumerate()
            .map(|(i, o)| (i == 0, o))
            .collect();
        tagged.shuffle(&mut self.rng);
        let mut opts = Vec::with_capacity(tagged.len());
        for (real, o) in tagged {
            let (src, def) = make(self, o);
            out.extend(def);
            // Real options carry selector 1 and misleading ones selector 0
            // until renumbering turns them into sequential ids.
            opts.push(CombineOption {
                selector: SelectorId(u32::from(real)),
                source: src,
            });
        }
        out.push(Statement::Combine {
            target,
            options: opts,
        });
    }

    fn assign_option(&mut self, e: SimpleExpr) -> (Var, Option<Statement>) {
        let t = self.fresh('t');
        (t.clone(), Some(Statement::Assign { target: t, expr: e }))
    }

    fn whole(
        &mut self,
        target: &Var,
        e: &SimpleExpr,
        available: &[Var],
    ) -> Result<Vec<Statement>, ObfError> {
        let misleading = gen_misleading(e, available, &self.zeros, self.cfg, &mut self.rng)?;
        let options: Vec<SimpleExpr> = std::iter::once(e.clone()).chain(misleading).collect();
        let mut out = Vec::new();
        self.combine(target.clone(), options, |b, e| b.assign_option(e), &mut out);
        Ok(out)
    }

    fn slots(
        &mut self,
        target: &Var,
        e: &SimpleExpr,
        plan: &SlotPlan,
        available: &[Var],
    ) -> Result<Vec<Statement>, ObfError> {
        let ops = if plan.ops.is_empty() {
            self.cfg.ops.clone()
        } else {
            plan.ops.clone()
        };
        let pool = if plan.vars.is_empty() {
            available.to_vec()
        } else {
            plan.vars.clone()
        };
        let mut out = Vec::new();

        let op_options: Vec<Op> = std::iter::once(e.op)
            .chain(misleading::choose_others(
                &ops,
                &e.op,
                plan.op.saturating_sub(1),
                &mut self.rng,
            )?)
            .collect();
        let divides = op_options.contains(&Op::Div);

        let slot =
            |b: &mut Self, original: &Var, n: usize, no_zero: bool, out: &mut Vec<Statement>| {
                if n <= 1 {
                    return Ok(original.clone());
                }
                let candidates: Vec<Var> = pool
                    .iter()
                    .filter(|v| !(no_zero && b.zeros.contains(v)))
                    .cloned()
                    .collect();
                let others = misleading::choose_others(&candidates, original, n - 1, &mut b.rng)?;
                let t = b.fresh('t');
                let options: Vec<Var> = std::iter::once(original.clone()).chain(others).collect();
                b.combine(t.clone(), options, |_, v| (v, None), out);
                Ok::<Var, ObfError>(t)
            };
        let l = slot(self, &e.lhs, plan.lhs, false, &mut out)?;
        let r = slot(self, &e.rhs, plan.rhs, divides, &mut out)?;

        if op_options.len() == 1 {
            out.push(Statement::assign(target.clone(), e.op, l, r));
        } else {
            self.combine(
                target.clone(),
                op_options,
                |b, op| b.assign_option(SimpleExpr::new(op, l.clone(), r.clone())),
                &mut out,
            );
        }
        Ok(out)
    }

    /// An all-misleading combining statement over fresh targets.
    fn fake_group(&mut self, available: &[Var]) -> Result<Vec<Statement>, ObfError> {
        let vars: Vec<&Var> = available.iter().collect();
        let k = self.cfg.k;
        let mut exprs: Vec<SimpleExpr> = Vec::with_capacity(k);
        let space = self.cfg.ops.len() * vars.len() * vars.len();
        if space < k {
            return Err(ObfError::PoolExhausted {
                statement: "misleading combining statement".into(),
                needed: k,
                available: space,
            });
        }
        let mut attempts = 0;
        while exprs.len() < k {
            attempts += 1;
            let op = self.cfg.ops[self.rng.gen_range(0..self.cfg.ops.len())];
            let l = vars[self.rng.gen_range(0..vars.len())].clone();
            let r = vars[self.rng.gen_range(0..vars.len())].clone();
            let e = SimpleExpr::new(op, l, r);
            let zero_div = op == Op::Div && self.zeros.contains(&e.rhs);
            if !zero_div && !exprs.contains(&e) {
                exprs.push(e);
            } else if attempts > 1_000_000 {
                return Err(ObfError::PoolExhausted {
                    statement: "misleading combining statement".into(),
                    needed: k,
                    available: exprs.len(),
                });
            }
        }
        let target = self.fresh('t');
        let mut out = Vec::new();
        // The key marks the first drawn option; all of them are random.
        self.combine(target, exprs, |b, e| b.assign_option(e), &mut out);
        Ok(out)
    }
}

/// Gives selectors sequential ids in order of appearance and builds the key
/// from the provisional 0/1 marks.
fn renumber(statements: &mut [Statement]) -> SelectorKey {
    let mut key = SelectorKey::default();
    let mut next = 0;
    for s in statements {
        if let Statement::Combine { options, .. } = s {
            for o in options {
                key.bits
                    .insert(SelectorId(next), o.selector == SelectorId(1));
                o.selector = SelectorId(next);
                next += 1;
            }
        }
    }
    key
}

/// Replaces each in-scope assignment with `k` shuffled options and a
/// combining statement, and inserts `fake_combining` all-misleading
/// combining statements.
pub fn obfuscate_statement_level(
    p: &Program,
    cfg: &ObfuscationConfig,
) -> Result<(ObfProgram, SelectorKey), ObfError> {
    cfg.validate()?;
    p.validate()?;
    if let Some(index) = p.statements.iter().position(Statement::is_combine) {
        return Err(ObfError::NotAssignOnly { index });
    }
    let mut b = Builder {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        used: p.names(),
        next_temp: 0,
        next_const: 0,
        zeros: p
            .constants
            .iter()
            .filter(|(_, c)| c.is_zero())
            .map(|(v, _)| v.clone())
            .collect(),
    };

    let mut constants = p.constants.clone();
    match &cfg.fake_vars {
        FakeVars::Count(n) => {
            for _ in 0..*n {
                let v = b.fresh('c');
                let value = b.fresh_nonzero();
                constants.push((v, value));
            }
        }
        FakeVars::Named(names) => {
            for n in names {
                if !crate::ir::is_identifier(n) || !b.used.insert(n.clone()) {
                    return Err(ObfError::NameClash(n.clone()));
                }
                let value = b.fresh_nonzero();
                constants.push((Var::new(n.as_str()), value));
            }
        }
    }

    let base: Vec<Var> = p
        .inputs
        .iter()
        .cloned()
        .chain(constants.iter().map(|(v, _)| v.clone()))
        .collect();
    let mut available = base.clone();
    // Variables readable before each group, for fake insertion.
    let mut available_before: Vec<Vec<Var>> = Vec::with_capacity(p.len());
    let mut groups: Vec<Group> = Vec::with_capacity(p.len() + cfg.fake_combining);
    for (i, s) in p.statements.iter().enumerate() {
        let Statement::Assign { target, expr } = s else {
            unreachable!("checked above")
        };
        available_before.push(available.clone());
        let statements = match cfg.plan_for(i) {
            StatementPlan::Keep => vec![s.clone()],
            StatementPlan::Whole => b.whole(target, expr, &available)?,
            StatementPlan::Slots(plan) => b.slots(target, expr, &plan, &available)?,
        };
        groups.push(Group {
            statements,
            real: true,
        });
        if !available.contains(target) {
            available.push(target.clone());
        }
    }

    // Fakes go before any real group except after the last, so the
    // program still ends with its real output.
    let mut positions: Vec<usize> = (0..cfg.fake_combining)
        .map(|_| b.rng.gen_range(0..p.len()))
        .collect();
    positions.sort_unstable();
    for &pos in positions.iter().rev() {
        let group = b.fake_group(&available_before[pos])?;
        groups.insert(
            pos,
            Group {
                statements: group,
                real: false,
            },
        );
    }
    debug_assert!(groups.last().is_some_and(|g| g.real));

    let mut statements: Vec<Statement> = groups.into_iter().flat_map(|g| g.statements).collect();
    let key = renumber(&mut statements);
    let program = Program::new(p.inputs.clone(), constants, statements);
    debug_assert_eq!(program.validate(), Ok(()));
    Ok((ObfProgram { program }, key))
}
