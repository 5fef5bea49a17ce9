use std::collections::BTreeMap;

use crate::ir::{Op, Var};
use crate::patterns::PatternTable;

use super::ObfError;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5e1ec7;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum FakeVars {
    /// This many fresh constants with random nonzero values.
    Count(usize),
    /// Constants with these names and random nonzero values.
    Named(Vec<String>),
}

#[derive(Clone, PartialEq, Debug)]
pub enum Strategy {
    /// Any operator from the pool over any available operands.
    Uniform,
    /// Like `Uniform`, but operators are drawn in proportion to their
    /// smoothed frequency in the table.
    PatternAware(PatternTable),
    /// Same operator, different operands.
    OperandOnly,
    /// Same operands, different operator.
    OperationOnly,
    /// Each operand and the operator get their own combining statement.
    CombinedTemporaries,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::PatternAware(_) => "pattern-aware",
            Strategy::OperandOnly => "operand-only",
            Strategy::OperationOnly => "operation-only",
            Strategy::CombinedTemporaries => "combined-temporaries",
        }
    }
}

/// Option counts for the three slots of `t := OP a b`. A count of 1 leaves
/// the slot as written.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SlotPlan {
    pub lhs: usize,
    pub rhs: usize,
    pub op: usize,
    /// Operator pool for the op slot; empty means the config's pool.
    pub ops: Vec<Op>,
    /// Operand pool for the variable slots; empty means every variable
    /// available at the statement.
    pub vars: Vec<Var>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StatementPlan {
    Keep,
    /// `k` whole-statement options under the config's strategy.
    Whole,
    Slots(SlotPlan),
}

#[derive(Clone, PartialEq, Debug)]
pub struct ObfuscationConfig {
    /// Options per combining statement.
    pub k: usize,
    pub fake_vars: FakeVars,
    pub ops: Vec<Op>,
    /// Number of all-misleading combining statements to insert.
    pub fake_combining: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// Statement indices to obfuscate; `None` means all.
    pub scope: Option<Vec<usize>>,
    /// Per-statement overrides of the strategy-derived plan.
    pub plans: BTreeMap<usize, StatementPlan>,
}

impl Default for ObfuscationConfig {
    fn default() -> Self {
        ObfuscationConfig {
            k: 2,
            fake_vars: FakeVars::Count(0),
            ops: Op::ALL.to_vec(),
            fake_combining: 0,
            strategy: Strategy::Uniform,
            seed: DEFAULT_SEED,
            scope: None,
            plans: BTreeMap::new(),
        }
    }
}

impl ObfuscationConfig {
    pub fn with_k(k: usize, seed: u64) -> Self {
        ObfuscationConfig {
            k,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ObfError> {
        if self.k < 2 {
            return Err(ObfError::InvalidConfig(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.ops.is_empty() {
            return Err(ObfError::InvalidConfig("operator pool is empty".into()));
        }
        Ok(())
    }

    pub(crate) fn plan_for(&self, index: usize) -> StatementPlan {
        if let Some(p) = self.plans.get(&index) {
            return p.clone();
        }
        if self.scope.as_ref().is_some_and(|s| !s.contains(&index)) {
            return StatementPlan::Keep;
        }
        match self.strategy {
            Strategy::CombinedTemporaries => StatementPlan::Slots(SlotPlan {
                lhs: self.k,
                rhs: self.k,
                op: self.k,
                ops: Vec::new(),
                vars: Vec::new(),
            }),
            _ => StatementPlan::Whole,
        }
    }

    /// Parses `key = value` lines. `load_table` resolves the
    /// `pattern_table` path.
    pub fn parse(
        text: &str,
        load_table: impl Fn(&str) -> Result<PatternTable, String>,
    ) -> Result<Self, ObfError> {
        let mut cfg = ObfuscationConfig::default();
        let mut strategy = None;
        let mut table = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ObfError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let number = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| err(format!("`{key}` needs an integer")))
            };
            match key {
                "k" => cfg.k = number(value)? as usize,
                "fake_combining" => cfg.fake_combining = number(value)? as usize,
                "seed" => cfg.seed = number(value)?,
                "fake_vars" => {
                    cfg.fake_vars = match value.parse::<usize>() {
                        Ok(n) => FakeVars::Count(n),
                        Err(_) => FakeVars::Named(split_list(value)),
                    }
                }
                "ops" => {
                    cfg.ops = split_list(value)
                        .iter()
                        .map(|o| {
                            o.parse()
                                .map_err(|_| err(format!("unknown operator `{o}`")))
                        })
                        .collect::<Result<_, _>>()?;
                }
                "strategy" => strategy = Some((value.to_string(), i + 1)),
                "pattern_table" => {
                    table = Some(load_table(value).map_err(|e| err(format!("pattern table: {e}")))?)
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if let Some((name, line)) = strategy {
            cfg.strategy = match name.as_str() {
                "uniform" => Strategy::Uniform,
                "operand-only" => Strategy::OperandOnly,
                "operation-only" => Strategy::OperationOnly,
                "combined-temporaries" => Strategy::CombinedTemporaries,
                "pattern-aware" => {
                    Strategy::PatternAware(table.take().ok_or(ObfError::Config {
                        line,
                        message: "pattern-aware strategy needs `pattern_table`".into(),
                    })?)
                }
                other => {
                    return Err(ObfError::Config {
                        line,
                        message: format!("unknown strategy `{other}`"),
                    })
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::Family;

    fn no_tables(_: &str) -> Result<PatternTable, String> {
        Err("no tables here".into())
    }

    #[test]
    fn parses_all_keys() {
        let text = "# demo\nk = 3\nfake_vars = w, z\nops = mul,DIV\nfake_combining = 2\nstrategy = pattern-aware\npattern_table = t.txt\nseed = 9\n";
        let cfg = ObfuscationConfig::parse(text, |path| {
            assert_eq!(path, "t.txt");
            let mut t = PatternTable::default();
            t.add(Family::Operator, "plus", 1);
            Ok(t)
        })
        .unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.fake_vars, FakeVars::Named(vec!["w".into(), "z".into()]));
        assert_eq!(cfg.ops, vec![Op::Mul, Op::Div]);
        assert_eq!(cfg.fake_combining, 2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.strategy.name(), "pattern-aware");
    }

    #[test]
    fn defaults_and_counts() {
        let cfg = ObfuscationConfig::parse("fake_vars = 4\n", no_tables).unwrap();
        assert_eq!(cfg.fake_vars, FakeVars::Count(4));
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "k = 1",
            "ops = ",
            "ops = pow",
            "colour = red",
            "k 3",
            "strategy = clever",
            "strategy = pattern-aware",
            "pattern_table = x",
        ];
        for text in bad {
            assert!(ObfuscationConfig::parse(text, no_tables).is_err(), "{text}");
        }
    }
}
