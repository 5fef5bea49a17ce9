//! Running an obfuscated program on ciphertexts.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::crypto::{Ciphertext, CryptoError, KeyError, SecretKey, SelectorKey};
use crate::field::Value;
use crate::interp::Inputs;
use crate::ir::{Op, SelectorId, Statement, Var};

use super::ObfProgram;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncryptedEvalError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("no ciphertext for input `{0}`")]
    MissingInput(Var),
    #[error("unbound variable `{0}`")]
    Unbound(Var),
    #[error("program has no statements")]
    Empty,
}

pub fn encrypt_inputs(key: &SecretKey, inputs: &Inputs) -> BTreeMap<Var, Ciphertext> {
    inputs
        .iter()
        .map(|(v, x)| (v.clone(), key.enc(*x)))
        .collect()
}

/// Executes every statement homomorphically. Constants and selector bits are
/// encrypted first; each combining statement is `Σ ENC(b_s) · ENC(r_s)`.
pub fn eval_encrypted(
    op: &ObfProgram,
    key: &SecretKey,
    selectors: &SelectorKey,
    inputs: &BTreeMap<Var, Ciphertext>,
) -> Result<Ciphertext, EncryptedEvalError> {
    let p = &op.program;
    selectors.validate(p)?;
    let out = p.output().ok_or(EncryptedEvalError::Empty)?;
    let bits: HashMap<SelectorId, Ciphertext> = selectors
        .bits
        .iter()
        .map(|(s, b)| (*s, key.enc(Value::from_bool(*b))))
        .collect();

    let mut env: HashMap<&Var, Ciphertext> = HashMap::with_capacity(p.len() + p.inputs.len());
    for v in &p.inputs {
        let c = inputs
            .get(v)
            .ok_or_else(|| EncryptedEvalError::MissingInput(v.clone()))?;
        env.insert(v, *c);
    }
    for (v, c) in &p.constants {
        env.insert(v, key.enc(*c));
    }
    let get = |env: &HashMap<&Var, Ciphertext>, v: &Var| {
        env.get(v)
            .copied()
            .ok_or_else(|| EncryptedEvalError::Unbound(v.clone()))
    };
    for s in &p.statements {
        let c = match s {
            Statement::Assign { expr, .. } => {
                key.he_op(expr.op, get(&env, &expr.lhs)?, get(&env, &expr.rhs)?)?
            }
            Statement::Combine { options, .. } => {
                let mut acc: Option<Ciphertext> = None;
                for o in options {
                    let term = key.he_op(Op::Mul, bits[&o.selector], get(&env, &o.source)?)?;
                    acc = Some(match acc {
                        None => term,
                        Some(a) => key.he_op(Op::Add, a, term)?,
                    });
                }
                acc.expect("validated combines have options")
            }
        };
        env.insert(s.target(), c);
    }
    get(&env, out)
}
