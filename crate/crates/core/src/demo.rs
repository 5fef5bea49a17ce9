//! The two hand-sized obfuscation levels of the division-guard case study.
//!
//! The task is `if (y != u) then r := x / y else r := v`, with the constants
//! `0` and `-9999` passed in as the inputs `u` and `v`. Lowered, it reads
//!
//! ```text
//! t0 := NEQ y u
//! t1 := DIV x y
//! t2 := SUB c0 t0
//! t3 := MUL t0 t1
//! t4 := MUL t2 v
//! t5 := ADD t3 t4
//! ```
//!
//! L0 varies the five source-level variable positions over five of
//! `u,v,w,x,y,z` and both operators over two choices each, for
//! `5^5 * 2^2 = 12,500` candidates. L1 gives the comparison, the division
//! and the else-value five whole-statement options each over eight
//! variables and six operators, and adds three all-misleading combining
//! statements: `5^6 = 15,625` candidates.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::crypto::SelectorKey;
use crate::ir::{Op, Program, Var};
use crate::lower::lower;
use crate::obfuscate::{
    obfuscate_statement_level, FakeVars, ObfError, ObfProgram, ObfuscationConfig, SlotPlan,
    StatementPlan,
};
use crate::surface::parse_surface;

pub const TASK1_SOURCE: &str = "input y, u, x, v\nif (y != u) then r := x / y else r := v\n";

/// Indices of the comparison, the division and the else-branch product in
/// the lowered task.
const COMPARE: usize = 0;
const DIVIDE: usize = 1;
const ELSE_VALUE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    L0,
    L1,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Level::L0),
            "l1" => Ok(Level::L1),
            other => Err(format!("unknown level `{other}`, expected l0 or l1")),
        }
    }
}

pub fn task1() -> Program {
    lower(&parse_surface(TASK1_SOURCE).expect("task source parses")).expect("task source lowers")
}

fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(*n)).collect()
}

pub fn l0_config(seed: u64) -> ObfuscationConfig {
    let pool = vars(&["u", "v", "w", "x", "y", "z"]);
    let slots = |ops: Vec<Op>| {
        StatementPlan::Slots(SlotPlan {
            lhs: 5,
            rhs: 5,
            op: 2,
            ops,
            vars: pool.clone(),
        })
    };
    let plans = BTreeMap::from([
        (COMPARE, slots(vec![Op::Neq, Op::Lt])),
        (DIVIDE, slots(vec![Op::Mul, Op::Div])),
        (
            ELSE_VALUE,
            StatementPlan::Slots(SlotPlan {
                lhs: 1,
                rhs: 5,
                op: 1,
                ops: Vec::new(),
                vars: pool.clone(),
            }),
        ),
    ]);
    ObfuscationConfig {
        k: 5,
        fake_vars: FakeVars::Named(vec!["w".into(), "z".into()]),
        ops: vec![Op::Neq, Op::Lt, Op::Mul, Op::Div],
        scope: Some(Vec::new()),
        plans,
        ..ObfuscationConfig::with_k(5, seed)
    }
}

pub fn l1_config(seed: u64) -> ObfuscationConfig {
    ObfuscationConfig {
        k: 5,
        fake_vars: FakeVars::Named(vec!["w".into(), "z".into(), "g".into(), "h".into()]),
        ops: vec![Op::Neq, Op::Lt, Op::Mul, Op::Div, Op::Add, Op::Sub],
        fake_combining: 3,
        scope: Some(vec![COMPARE, DIVIDE, ELSE_VALUE]),
        ..ObfuscationConfig::with_k(5, seed)
    }
}

#[derive(Clone, Debug)]
pub struct Demo {
    pub program: Program,
    pub config: ObfuscationConfig,
    pub obfuscated: ObfProgram,
    pub key: SelectorKey,
}

pub fn demo(level: Level, seed: u64) -> Result<Demo, ObfError> {
    let program = task1();
    let config = match level {
        Level::L0 => l0_config(seed),
        Level::L1 => l1_config(seed),
    };
    let (obfuscated, key) = obfuscate_statement_level(&program, &config)?;
    Ok(Demo {
        program,
        config,
        obfuscated,
        key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::extract_class;
    use crate::crypto::SecretKey;
    use crate::interp::{eval_plain, inputs};
    use crate::obfuscate::{deobfuscate, encrypt_inputs, eval_encrypted};
    use crate::Value;
    use num_bigint::BigUint;

    #[test]
    fn lowered_task_matches_the_documented_shape() {
        let p = task1();
        let body: Vec<String> = p.statements.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            body,
            [
                "t0 := NEQ y u",
                "t1 := DIV x y",
                "t2 := SUB c0 t0",
                "t3 := MUL t0 t1",
                "t4 := MUL t2 v",
                "t5 := ADD t3 t4"
            ]
        );
    }

    #[test]
    fn class_sizes() {
        for (level, size) in [(Level::L0, 12_500u32), (Level::L1, 15_625)] {
            for seed in 0..5 {
                let d = demo(level, seed).unwrap();
                assert_eq!(extract_class(&d.obfuscated).size(), &BigUint::from(size));
            }
        }
        let d = demo(Level::L1, 0).unwrap();
        assert_eq!(d.obfuscated.combines().len(), 6);
    }

    #[test]
    fn both_levels_compute_the_task() {
        let sk = SecretKey::keygen(7);
        for level in [Level::L0, Level::L1] {
            let d = demo(level, 3).unwrap();
            for (y, out) in [(2, 4), (0, -9999)] {
                let ins = inputs([("y", y), ("u", 0), ("x", 8), ("v", -9999)]);
                assert_eq!(eval_plain(&d.program, &ins), Ok(Value::from_i64(out)));
                let enc = encrypt_inputs(&sk, &ins);
                let got = sk
                    .dec(eval_encrypted(&d.obfuscated, &sk, &d.key, &enc).unwrap())
                    .unwrap();
                assert_eq!(got.to_signed(), out);
            }
            let back = deobfuscate(&d.obfuscated, &d.key).unwrap();
            assert_eq!(
                eval_plain(&back, &inputs([("y", 3), ("u", 0), ("x", 9), ("v", 1)])),
                Ok(Value::from_i64(3))
            );
        }
    }

    #[test]
    fn levels_parse() {
        assert_eq!("L0".parse(), Ok(Level::L0));
        assert_eq!("l1".parse(), Ok(Level::L1));
        assert!("l2".parse::<Level>().is_err());
    }
}
