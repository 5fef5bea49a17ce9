//! Candidate spaces for misleading statements and seeded sampling from them.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ir::{Op, SimpleExpr, Var};

use super::{ObfError, ObfuscationConfig, Strategy};

/// Spaces up to this size are enumerated; larger ones use rejection
/// sampling, which draws from the same distribution.
const ENUMERATION_LIMIT: usize = 4096;

/// `op lhs rhs` for every weighted op and operand pair, minus the original
/// statement and divisions by a zero constant.
struct Space<'a> {
    ops: Vec<(Op, f64)>,
    lhs: Vec<&'a Var>,
    rhs: Vec<&'a Var>,
    original: &'a SimpleExpr,
    zeros: &'a HashSet<Var>,
}

impl Space<'_> {
    fn valid(&self, e: &SimpleExpr) -> bool {
        e != self.original && !(e.op == Op::Div && self.zeros.contains(&e.rhs))
    }

    fn valid_count(&self) -> usize {
        let nonzero_rhs = self.rhs.iter().filter(|v| !self.zeros.contains(v)).count();
        let total: usize = self
            .ops
            .iter()
            .map(|(op, _)| {
                self.lhs.len()
                    * if *op == Op::Div {
                        nonzero_rhs
                    } else {
                        self.rhs.len()
                    }
            })
            .sum();
        let o = self.original;
        let original_in_space = self.ops.iter().any(|(op, _)| *op == o.op)
            && self.lhs.contains(&&o.lhs)
            && self.rhs.contains(&&o.rhs)
            && !(o.op == Op::Div && self.zeros.contains(&o.rhs));
        total - usize::from(original_in_space)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SimpleExpr>, usize> {
        let available = self.valid_count();
        if available < n {
            return Err(available);
        }
        let total = self.ops.len() * self.lhs.len() * self.rhs.len();
        if total <= ENUMERATION_LIMIT {
            let mut pool: Vec<(SimpleExpr, f64)> = Vec::with_capacity(total);
            for &(op, w) in &self.ops {
                for l in &self.lhs {
                    for r in &self.rhs {
                        let e = SimpleExpr::new(op, (*l).clone(), (*r).clone());
                        if self.valid(&e) {
                            pool.push((e, w));
                        }
                    }
                }
            }
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let dist =
                    WeightedIndex::new(pool.iter().map(|(_, w)| *w)).expect("positive weights");
                out.push(pool.swap_remove(dist.sample(rng)).0);
            }
            Ok(out)
        } else {
            let op_dist =
                WeightedIndex::new(self.ops.iter().map(|(_, w)| *w)).expect("positive weights");
            let mut out: Vec<SimpleExpr> = Vec::with_capacity(n);
            while out.len() < n {
                let op = self.ops[op_dist.sample(rng)].0;
                let l = self.lhs[rng.gen_range(0..self.lhs.len())];
                let r = self.rhs[rng.gen_range(0..self.rhs.len())];
                let e = SimpleExpr::new(op, l.clone(), r.clone());
                if self.valid(&e) && !out.contains(&e) {
                    out.push(e);
                }
            }
            Ok(out)
        }
    }
}

fn dedup<T: PartialEq>(items: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Draws `cfg.k - 1` distinct misleading alternatives to `s` under a
/// whole-statement strategy. `available` lists the variables that may be
/// read at this point; `zeros` marks constants bound to zero.
pub fn gen_misleading(
    s: &SimpleExpr,
    available: &[Var],
    zeros: &HashSet<Var>,
    cfg: &ObfuscationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SimpleExpr>, ObfError> {
    let uniform = |ops: &[Op]| {
        dedup(ops.iter().copied())
            .into_iter()
            .map(|o| (o, 1.0))
            .collect()
    };
    let vars = dedup(available.iter());
    let (ops, lhs, rhs) = match &cfg.strategy {
        Strategy::Uniform => (uniform(&cfg.ops), vars.clone(), vars),
        Strategy::PatternAware(t) => (
            dedup(cfg.ops.iter().copied())
                .into_iter()
                .map(|o| (o, t.op_score(o)))
                .collect(),
            vars.clone(),
            vars,
        ),
        Strategy::OperandOnly => (vec![(s.op, 1.0)], vars.clone(), vars),
        Strategy::OperationOnly => (uniform(&cfg.ops), vec![&s.lhs], vec![&s.rhs]),
        Strategy::CombinedTemporaries => {
            return Err(ObfError::InvalidConfig(
                "combined temporaries expand operand and operator slots, not whole statements"
                    .into(),
            ))
        }
    };
    let space = Space {
        ops,
        lhs,
        rhs,
        original: s,
        zeros,
    };
    space
        .sample(cfg.k - 1, rng)
        .map_err(|available| ObfError::PoolExhausted {
            statement: s.to_string(),
            needed: cfg.k - 1,
            available,
        })
}

/// Picks `n` items of `pool` other than `original`, uniformly without
/// replacement.
pub(crate) fn choose_others<T: Clone + PartialEq + std::fmt::Display>(
    pool: &[T],
    original: &T,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<T>, ObfError> {
    let others: Vec<&T> = dedup(pool.iter().filter(|x| *x != original));
    if others.len() < n {
        return Err(ObfError::PoolExhausted {
            statement: format!("slot holding {original}"),
            needed: n,
            available: others.len(),
        });
    }
    Ok(index::sample(rng, others.len(), n)
        .into_iter()
        .map(|i| others[i].clone())
        .collect())
}
