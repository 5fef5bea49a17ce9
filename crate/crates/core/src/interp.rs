//! Plaintext interpreter for three-address programs.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::field::Value;
use crate::ir::{Program, SelectorId, Statement, Var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(Var),
    #[error("unbound selector {0}")]
    UnboundSelector(SelectorId),
    #[error("program has no statements")]
    Empty,
}

pub type Inputs = BTreeMap<Var, Value>;

/// Evaluates `p` on `inputs`, returning the value of the last statement.
///
/// Combining statements need selector values; use [`eval_with_selectors`]
/// for programs that contain them.
pub fn eval_plain(p: &Program, inputs: &Inputs) -> Result<Value, EvalError> {
    eval_with_selectors(p, inputs, &BTreeMap::new())
}

pub fn eval_with_selectors(
    p: &Program,
    inputs: &Inputs,
    selectors: &BTreeMap<SelectorId, Value>,
) -> Result<Value, EvalError> {
    let out = p.output().ok_or(EvalError::Empty)?.clone();
    let env = run(p, inputs, |s| selectors.get(&s).copied())?;
    Ok(env[&out])
}

/// Evaluates and returns every variable's final value.
pub fn eval_trace(
    p: &Program,
    inputs: &Inputs,
    selectors: &BTreeMap<SelectorId, Value>,
) -> Result<HashMap<Var, Value>, EvalError> {
    run(p, inputs, |s| selectors.get(&s).copied())
}

/// Evaluates with selectors given by a per-combine choice of option index.
pub(crate) fn eval_with_choices(
    p: &Program,
    inputs: &Inputs,
    choices: &[usize],
) -> Result<Value, EvalError> {
    let out = p.output().ok_or(EvalError::Empty)?.clone();
    let mut env = bind(p, inputs)?;
    let mut combine = 0;
    for s in &p.statements {
        let v = match s {
            Statement::Assign { expr, .. } => expr
                .op
                .apply(lookup(&env, &expr.lhs)?, lookup(&env, &expr.rhs)?),
            Statement::Combine { options, .. } => {
                let chosen = &options[choices[combine]].source;
                combine += 1;
                lookup(&env, chosen)?
            }
        };
        env.insert(s.target().clone(), v);
    }
    Ok(env[&out])
}

fn bind(p: &Program, inputs: &Inputs) -> Result<HashMap<Var, Value>, EvalError> {
    let mut env = HashMap::with_capacity(p.len() + p.inputs.len() + p.constants.len());
    for v in &p.inputs {
        let value = inputs.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?;
        env.insert(v.clone(), *value);
    }
    for (v, c) in &p.constants {
        env.insert(v.clone(), *c);
    }
    Ok(env)
}

fn lookup(env: &HashMap<Var, Value>, v: &Var) -> Result<Value, EvalError> {
    env.get(v)
        .copied()
        .ok_or_else(|| EvalError::Unbound(v.clone()))
}

fn run(
    p: &Program,
    inputs: &Inputs,
    selector: impl Fn(SelectorId) -> Option<Value>,
) -> Result<HashMap<Var, Value>, EvalError> {
    let mut env = bind(p, inputs)?;
    for s in &p.statements {
        let v = match s {
            Statement::Assign { expr, .. } => expr
                .op
                .apply(lookup(&env, &expr.lhs)?, lookup(&env, &expr.rhs)?),
            Statement::Combine { options, .. } => {
                let mut acc = Value::ZERO;
                for o in options {
                    let b = selector(o.selector).ok_or(EvalError::UnboundSelector(o.selector))?;
                    acc = acc + b * lookup(&env, &o.source)?;
                }
                acc
            }
        };
        env.insert(s.target().clone(), v);
    }
    Ok(env)
}

/// Convenience constructor for input maps from `(name, value)` pairs.
pub fn inputs<'a>(pairs: impl IntoIterator<Item = (&'a str, i64)>) -> Inputs {
    pairs
        .into_iter()
        .map(|(k, v)| (Var::new(k), Value::from_i64(v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Op;

    #[test]
    fn squares_a_number() {
        let p = Program::new(
            vec!["a".into()],
            vec![],
            vec![Statement::assign("b", Op::Mul, "a", "a")],
        );
        assert_eq!(eval_plain(&p, &inputs([("a", 3)])), Ok(Value::from_i64(9)));
    }

    #[test]
    fn division_by_zero_is_zero() {
        let p = Program::new(
            vec!["a".into(), "b".into()],
            vec![],
            vec![Statement::assign("c", Op::Div, "a", "b")],
        );
        assert_eq!(
            eval_plain(&p, &inputs([("a", 5), ("b", 0)])),
            Ok(Value::ZERO)
        );
    }

    #[test]
    fn missing_input_is_reported() {
        let p = Program::new(
            vec!["a".into()],
            vec![],
            vec![Statement::assign("b", Op::Mul, "a", "a")],
        );
        assert_eq!(
            eval_plain(&p, &Inputs::new()),
            Err(EvalError::Unbound(Var::new("a")))
        );
    }

    #[test]
    fn combine_uses_selector_values() {
        let p =
            Program::parse("input a\nt0 := MUL a a\nt1 := ADD a a\nc := COMBINE (s0,t0) (s1,t1)\n")
                .unwrap();
        let sel: BTreeMap<_, _> =
            [(SelectorId(0), Value::ONE), (SelectorId(1), Value::ZERO)].into();
        assert_eq!(
            eval_with_selectors(&p, &inputs([("a", 3)]), &sel),
            Ok(Value::from_i64(9))
        );
        assert_eq!(
            eval_with_choices(&p, &inputs([("a", 3)]), &[1]),
            Ok(Value::from_i64(6))
        );
        assert_eq!(
            eval_plain(&p, &inputs([("a", 3)])),
            Err(EvalError::UnboundSelector(SelectorId(0)))
        );
    }
}
