//! The adversary: enumerates the program class an obfuscated program
//! defines, filters it with known input/output pairs, ranks the survivors
//! with a pattern-frequency model, and scores the defender by the rank of
//! the confidential program.

mod game;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::crypto::{KeyError, SelectorKey};
use crate::field::Value;
use crate::interp::{eval_with_choices, EvalError, Inputs};
use crate::ir::{Program, Statement};
use crate::obfuscate::{resolve, ObfProgram};
use crate::patterns::PatternTable;

pub use game::{game_exact, game_simulate, AttStrategy, GameValue, ObfStrategy};

/// Default limit on how many candidates the attacker will enumerate.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Relative tolerance under which two probabilities count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("class size {size} exceeds the enumeration cap {cap}")]
    CapExceeded { size: BigUint, cap: u64 },
    #[error("no confidential program is among the ranked candidates")]
    NotInClass,
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("game needs at least two statements, got {0}")]
    TooFewStatements(u32),
}

/// The candidate programs an obfuscated program could have come from: one
/// choice per combining statement, enumerated in mixed radix with the first
/// combining statement most significant.
#[derive(Clone, Debug)]
pub struct ClassDescriptor {
    program: Program,
    radices: Vec<usize>,
    size: BigUint,
}

pub fn extract_class(op: &ObfProgram) -> ClassDescriptor {
    let radices: Vec<usize> = op.combines().iter().map(|c| c.len()).collect();
    let size = radices.iter().map(|&r| BigUint::from(r)).product();
    ClassDescriptor {
        program: op.program.clone(),
        radices,
        size,
    }
}

impl ClassDescriptor {
    pub fn size(&self) -> &BigUint {
        &self.size
    }

    /// Option counts per combining statement.
    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// The class size as an enumerable count, or an error above `cap`.
    pub fn enumerable(&self, cap: u64) -> Result<u64, AttackError> {
        match self.size.to_u64() {
            Some(n) if n <= cap => Ok(n),
            _ => Err(AttackError::CapExceeded {
                size: self.size.clone(),
                cap,
            }),
        }
    }

    pub fn choices(&self, mut index: u64) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = (index % r as u64) as usize;
            index /= r as u64;
        }
        out
    }

    pub fn index_of_choices(&self, choices: &[usize]) -> u64 {
        choices
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&c, &r)| acc * r as u64 + c as u64)
    }

    pub fn index_of(&self, key: &SelectorKey) -> Result<u64, AttackError> {
        Ok(self.index_of_choices(&key.choices(&self.program)?))
    }

    /// The candidate with every combining statement folded; misleading
    /// alternatives are dropped but no other dead code is removed.
    pub fn candidate(&self, index: u64) -> Program {
        resolve(&self.program, &self.choices(index))
    }
}

/// Candidates that agree with every known pair, in index order.
pub fn kpa_filter(
    cd: &ClassDescriptor,
    pairs: &[(Inputs, Value)],
    cap: u64,
) -> Result<Vec<u64>, AttackError> {
    let n = cd.enumerable(cap)?;
    if let Some((ins, _)) = pairs.first() {
        // Surface missing inputs as an error rather than as a mismatch.
        eval_with_choices(&cd.program, ins, &cd.choices(0))?;
    }
    Ok((0..n)
        .into_par_iter()
        .filter(|&i| {
            let choices = cd.choices(i);
            pairs
                .iter()
                .all(|(ins, out)| eval_with_choices(&cd.program, ins, &choices).as_ref() == Ok(out))
        })
        .collect())
}

/// Per combining statement, how many options no survivor uses.
pub fn eliminated_options(cd: &ClassDescriptor, survivors: &[u64]) -> Vec<usize> {
    let mut used: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cd.radices.len()];
    for &i in survivors {
        for (set, c) in used.iter_mut().zip(cd.choices(i)) {
            set.insert(c);
        }
    }
    cd.radices
        .iter()
        .zip(used)
        .map(|(&r, u)| r - u.len())
        .collect()
}

/// Product over assignments of the smoothed operator frequency, times the
/// constant frequency for each constant operand when the table has any.
pub fn pattern_score(table: &PatternTable, p: &Program) -> f64 {
    p.statements
        .iter()
        .map(|s| match s {
            Statement::Assign { expr, .. } => {
                let mut score = table.op_score(expr.op);
                for v in [&expr.lhs, &expr.rhs] {
                    if let Some(c) = p.constant(v) {
                        score *= table.const_score(expr.op, c.to_signed()).unwrap_or(1.0);
                    }
                }
                score
            }
            Statement::Combine { .. } => 1.0,
        })
        .product()
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Ranked {
    pub index: u64,
    pub probability: f64,
}

/// Scores `indices` with `score`, normalizes to probabilities, and sorts by
/// probability, highest first. Ties are ordered by program text.
pub fn rank_with(
    cd: &ClassDescriptor,
    indices: &[u64],
    score: impl Fn(&Program) -> f64 + Sync,
) -> Vec<Ranked> {
    let scores: Vec<f64> = indices
        .par_iter()
        .map(|&i| score(&cd.candidate(i)))
        .collect();
    let total: f64 = scores.iter().sum();
    let mut ranked: Vec<Ranked> = indices
        .iter()
        .zip(&scores)
        .map(|(&index, &s)| Ranked {
            index,
            probability: if total > 0.0 {
                s / total
            } else {
                1.0 / indices.len() as f64
            },
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then(a.index.cmp(&b.index))
    });
    // Reorder each run of exact ties by canonical text.
    let mut start = 0;
    while start < ranked.len() {
        let p = ranked[start].probability;
        let end = start
            + ranked[start..]
                .iter()
                .take_while(|r| r.probability == p)
                .count();
        if end - start > 1 {
            let mut run: Vec<(String, Ranked)> = ranked[start..end]
                .par_iter()
                .map(|r| (cd.candidate(r.index).to_text(), *r))
                .collect();
            run.sort_by(|a, b| a.0.cmp(&b.0));
            for (slot, (_, r)) in ranked[start..end].iter_mut().zip(run) {
                *slot = r;
            }
        }
        start = end;
    }
    ranked
}

/// Ranks `indices` under the pattern table; an empty table ranks uniformly.
pub fn rank_candidates(cd: &ClassDescriptor, indices: &[u64], table: &PatternTable) -> Vec<Ranked> {
    rank_with(cd, indices, |p| pattern_score(table, p))
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Quality {
    pub min_rank: usize,
    pub q: f64,
}

/// `Q = 1 - 1/r`, where `r` is the best rank of any confidential program
/// and a program's rank counts every candidate at least as probable,
/// itself and ties included.
pub fn class_quality(
    ranking: &[Ranked],
    confidential: &BTreeSet<u64>,
) -> Result<Quality, AttackError> {
    let min_rank = ranking
        .iter()
        .filter(|r| confidential.contains(&r.index))
        .map(|c| {
            let threshold = c.probability * (1.0 - TIE_TOLERANCE);
            ranking
                .iter()
                .filter(|r| r.probability >= threshold)
                .count()
        })
        .min()
        .ok_or(AttackError::NotInClass)?;
    Ok(Quality {
        min_rank,
        q: 1.0 - 1.0 / min_rank as f64,
    })
}

/// One program per line with statements separated by `; `.
pub fn one_line(p: &Program) -> String {
    let body: Vec<String> = p.statements.iter().map(|s| s.to_string()).collect();
    body.join("; ")
}

#[derive(Clone, Debug)]
pub struct AttackReport {
    pub class_size: BigUint,
    pub survivors: usize,
    pub quality: Option<Quality>,
    /// The ten most probable survivors with their probabilities.
    pub top: Vec<(f64, String)>,
}

impl AttackReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "class_size {}", self.class_size).unwrap();
        writeln!(out, "survivors {}", self.survivors).unwrap();
        match self.quality {
            Some(q) => {
                writeln!(out, "min_rank {}", q.min_rank).unwrap();
                writeln!(out, "quality {:.6}", q.q).unwrap();
            }
            None => {
                out.push_str("min_rank unknown\nquality unknown\n");
            }
        }
        for (i, (p, text)) in self.top.iter().enumerate() {
            writeln!(out, "top {} {:.6e} {}", i + 1, p, text).unwrap();
        }
        out
    }
}

/// Runs the full attack. Without a key the report omits rank and quality.
pub fn run_attack(
    op: &ObfProgram,
    pairs: &[(Inputs, Value)],
    table: &PatternTable,
    key: Option<&SelectorKey>,
    cap: u64,
) -> Result<AttackReport, AttackError> {
    let cd = extract_class(op);
    let survivors = kpa_filter(&cd, pairs, cap)?;
    let ranking = rank_candidates(&cd, &survivors, table);
    let quality = match key {
        Some(k) => Some(class_quality(&ranking, &BTreeSet::from([cd.index_of(k)?]))?),
        None => None,
    };
    let top = ranking
        .iter()
        .take(10)
        .map(|r| (r.probability, one_line(&cd.candidate(r.index))))
        .collect();
    Ok(AttackReport {
        class_size: cd.size.clone(),
        survivors: survivors.len(),
        quality,
        top,
    })
}
