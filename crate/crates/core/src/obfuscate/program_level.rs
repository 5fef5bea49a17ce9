//! Running several whole programs and selecting the confidential result.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::SelectorKey;
use crate::ir::{CombineOption, Program, SelectorId, SimpleExpr, Statement, Var};

use super::{ObfError, ObfProgram};

struct Names {
    used: HashSet<String>,
    next: usize,
}

impl Names {
    fn fresh(&mut self, prefix: &str) -> Var {
        loop {
            let name = format!("{prefix}{}", self.next);
            self.next += 1;
            if self.used.insert(name.clone()) {
                return Var::new(name);
            }
        }
    }
}

/// Executes every program of `ps` in a seeded random order over the union of
/// their inputs, then combines their outputs so that only program `i_star`
/// contributes. Temporaries and constants are renamed apart. A single
/// program is emitted without a combining statement.
pub fn obfuscate_program_level(
    ps: &[Program],
    i_star: usize,
    seed: u64,
) -> Result<(ObfProgram, SelectorKey), ObfError> {
    if ps.is_empty() {
        return Err(ObfError::NoPrograms);
    }
    if i_star >= ps.len() {
        return Err(ObfError::IStarOutOfRange {
            index: i_star,
            count: ps.len(),
        });
    }
    let mut inputs: Vec<Var> = Vec::new();
    for p in ps {
        p.validate()?;
        if let Some(index) = p.statements.iter().position(Statement::is_combine) {
            return Err(ObfError::NotAssignOnly { index });
        }
        for v in &p.inputs {
            if !inputs.contains(v) {
                inputs.push(v.clone());
            }
        }
    }
    let mut names = Names {
        used: inputs.iter().map(|v| v.as_str().to_string()).collect(),
        next: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.shuffle(&mut rng);

    let mut constants = Vec::new();
    let mut statements = Vec::new();
    let mut outputs = Vec::with_capacity(ps.len());
    for &j in &order {
        let p = &ps[j];
        let mut env: HashMap<&Var, Var> = p.inputs.iter().map(|v| (v, v.clone())).collect();
        for (v, c) in &p.constants {
            let fresh = names.fresh("c");
            constants.push((fresh.clone(), *c));
            env.insert(v, fresh);
        }
        for s in &p.statements {
            let Statement::Assign { target, expr } = s else {
                unreachable!("checked above")
            };
            let expr = SimpleExpr::new(expr.op, env[&expr.lhs].clone(), env[&expr.rhs].clone());
            let fresh = names.fresh("t");
            env.insert(target, fresh.clone());
            statements.push(Statement::Assign {
                target: fresh,
                expr,
            });
        }
        outputs.push((j, env[p.output().expect("validated")].clone()));
    }

    let mut key = SelectorKey::default();
    if ps.len() > 1 {
        let options = outputs
            .iter()
            .enumerate()
            .map(|(i, (j, v))| {
                let sel = SelectorId(i as u32);
                key.bits.insert(sel, *j == i_star);
                CombineOption {
                    selector: sel,
                    source: v.clone(),
                }
            })
            .collect();
        statements.push(Statement::Combine {
            target: names.fresh("t"),
            options,
        });
    }
    let program = Program::new(inputs, constants, statements);
    debug_assert_eq!(program.validate(), Ok(()));
    Ok((ObfProgram { program }, key))
}
