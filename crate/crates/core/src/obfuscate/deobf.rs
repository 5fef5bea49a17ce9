//! Folding combining statements to a chosen option, and cleanup.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::crypto::{KeyError, SelectorKey};
use crate::field::Value;
use crate::ir::{use_counts, Op, Program, SimpleExpr, Statement, Var};

use super::ObfProgram;

/// Folds the `j`-th combining statement to option `choices[j]`.
///
/// Assignments that only feed one combining statement are dropped unless
/// chosen, in which case the chosen expression is written straight into
/// the combining statement's target. Combining statements over plain
/// variables become aliases. No other statement is removed.
pub fn resolve(p: &Program, choices: &[usize]) -> Program {
    let uses = use_counts(p);
    let mut definitions: HashMap<&Var, usize> = HashMap::new();
    for s in &p.statements {
        *definitions.entry(s.target()).or_default() += 1;
    }
    let output = p.output();
    let option_sources: HashSet<&Var> = p
        .statements
        .iter()
        .flat_map(|s| match s {
            Statement::Combine { options, .. } => options.iter().map(|o| &o.source).collect(),
            Statement::Assign { .. } => Vec::new(),
        })
        .collect();
    let exclusive = |t: &Var| {
        option_sources.contains(t)
            && uses.get(t) == Some(&1)
            && definitions.get(t) == Some(&1)
            && Some(t) != output
    };

    let mut alias: HashMap<Var, Var> = HashMap::new();
    let subst =
        |alias: &HashMap<Var, Var>, v: &Var| alias.get(v).cloned().unwrap_or_else(|| v.clone());
    let mut deferred: HashMap<Var, SimpleExpr> = HashMap::new();
    let mut out: Vec<Statement> = Vec::with_capacity(p.len());
    let mut combine = 0;
    for s in &p.statements {
        match s {
            Statement::Assign { target, expr } => {
                let expr =
                    SimpleExpr::new(expr.op, subst(&alias, &expr.lhs), subst(&alias, &expr.rhs));
                if exclusive(target) {
                    deferred.insert(target.clone(), expr);
                } else {
                    alias.remove(target);
                    out.push(Statement::Assign {
                        target: target.clone(),
                        expr,
                    });
                }
            }
            Statement::Combine { target, options } => {
                let chosen = &options[choices[combine]].source;
                combine += 1;
                match deferred.remove(chosen) {
                    Some(expr) => {
                        alias.remove(target);
                        out.push(Statement::Assign {
                            target: target.clone(),
                            expr,
                        });
                    }
                    None => {
                        let src = subst(&alias, chosen);
                        alias.insert(target.clone(), src);
                    }
                }
            }
        }
    }

    let mut constants = p.constants.clone();
    if let Some(out_var) = output {
        if let Some(src) = alias.get(out_var) {
            // The program must still end by assigning its output.
            let zero = match constants.iter().find(|(_, c)| c.is_zero()) {
                Some((v, _)) => v.clone(),
                None => {
                    let names = p.names();
                    let v = (0..)
                        .map(|i| format!("zero{i}"))
                        .find(|n| !names.contains(n))
                        .expect("unbounded search");
                    constants.push((Var::new(v.as_str()), Value::ZERO));
                    Var::new(v)
                }
            };
            out.push(Statement::assign(
                out_var.clone(),
                Op::Add,
                src.clone(),
                zero,
            ));
        }
    }
    Program::new(p.inputs.clone(), constants, out)
}

/// Removes statements whose results cannot reach the output.
fn dead_code_elimination(p: &Program) -> Program {
    let Some(output) = p.output() else {
        return p.clone();
    };
    let mut live: HashSet<&Var> = HashSet::from([output]);
    let mut keep = vec![false; p.len()];
    for (i, s) in p.statements.iter().enumerate().rev() {
        if live.remove(s.target()) {
            keep[i] = true;
            live.extend(s.reads());
        }
    }
    let statements = p
        .statements
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect();
    Program::new(p.inputs.clone(), p.constants.clone(), statements)
}

fn drop_unused_constants(mut p: Program) -> Program {
    let read: BTreeSet<Var> = p
        .statements
        .iter()
        .flat_map(|s| s.reads())
        .cloned()
        .collect();
    p.constants.retain(|(v, _)| read.contains(v));
    p
}

/// Dead-code elimination followed by removal of unread constants.
pub fn normalize(p: &Program) -> Program {
    drop_unused_constants(dead_code_elimination(p))
}

/// Recovers the confidential program: resolves every combining statement
/// to the option the key selects, then normalizes.
pub fn deobfuscate(op: &ObfProgram, key: &SelectorKey) -> Result<Program, KeyError> {
    let choices = key.choices(&op.program)?;
    Ok(normalize(&resolve(&op.program, &choices)))
}
