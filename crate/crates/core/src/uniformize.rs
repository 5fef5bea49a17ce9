//! Semantics-preserving local rewrites that strip programmer-specific
//! micro-patterns before obfuscation.
//!
//! A rule is data: a chain of pattern statements whose last statement is
//! replaced by a single statement. Earlier pattern statements are matched
//! against the reaching definitions of the variables the later ones read,
//! and are deleted if the rewrite leaves them dead.
//!
//! Text form, one rule per line:
//!
//! ```text
//! le-minus-one: J := SUB I #1; c := LE x J => c := LT x I
//! ```
//!
//! Upper-case or lower-case names are metavariables; `#n` matches a
//! constant variable bound to `n`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::Value;
use crate::ir::{is_identifier, use_counts, Op, Program, SimpleExpr, Statement, Var};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Operand {
    Meta(String),
    Const(i64),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PatternStmt {
    pub target: String,
    pub op: Op,
    pub lhs: Operand,
    pub rhs: Operand,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RewriteRule {
    name: String,
    pattern: Vec<PatternStmt>,
    replacement: PatternStmt,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule `{0}`: pattern is empty")]
    EmptyPattern(String),
    #[error("rule `{rule}`: intermediate `{meta}` is not read by a later pattern statement")]
    DanglingIntermediate { rule: String, meta: String },
    #[error("rule `{rule}`: replacement uses unbound `{meta}`")]
    UnboundReplacement { rule: String, meta: String },
    #[error("rule `{0}`: replacement must keep the pattern's final target")]
    TargetChanged(String),
    #[error("rule `{rule}`: not semantics-preserving (counterexample {counterexample})")]
    NotEquivalent {
        rule: String,
        counterexample: String,
    },
    #[error("cannot parse rule: {0}")]
    Syntax(String),
}

const EQUIVALENCE_SAMPLES: usize = 512;

impl RewriteRule {
    /// Builds a rule and checks on random inputs that the replacement
    /// computes the same value as the pattern's last statement.
    pub fn new(
        name: impl Into<String>,
        pattern: Vec<PatternStmt>,
        replacement: PatternStmt,
    ) -> Result<Self, RuleError> {
        let rule = RewriteRule {
            name: name.into(),
            pattern,
            replacement,
        };
        rule.check_shape()?;
        rule.check_equivalence()?;
        Ok(rule)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn check_shape(&self) -> Result<(), RuleError> {
        let last = self
            .pattern
            .last()
            .ok_or_else(|| RuleError::EmptyPattern(self.name.clone()))?;
        for (i, p) in self.pattern.iter().enumerate().take(self.pattern.len() - 1) {
            let read_later = self.pattern[i + 1..]
                .iter()
                .any(|q| [&q.lhs, &q.rhs].contains(&&Operand::Meta(p.target.clone())));
            if !read_later {
                return Err(RuleError::DanglingIntermediate {
                    rule: self.name.clone(),
                    meta: p.target.clone(),
                });
            }
        }
        if self.replacement.target != last.target {
            return Err(RuleError::TargetChanged(self.name.clone()));
        }
        let bound = self.free_metas();
        for o in [&self.replacement.lhs, &self.replacement.rhs] {
            match o {
                Operand::Meta(m) if !bound.contains(m) => {
                    return Err(RuleError::UnboundReplacement {
                        rule: self.name.clone(),
                        meta: m.clone(),
                    })
                }
                Operand::Const(_) => {
                    return Err(RuleError::UnboundReplacement {
                        rule: self.name.clone(),
                        meta: format!("{o:?}"),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Metavariables the pattern reads without defining.
    fn free_metas(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, p) in self.pattern.iter().enumerate() {
            for o in [&p.lhs, &p.rhs] {
                if let Operand::Meta(m) = o {
                    let defined_earlier = self.pattern[..i].iter().any(|q| &q.target == m);
                    if !defined_earlier && !out.contains(m) {
                        out.push(m.clone());
                    }
                }
            }
        }
        out
    }

    fn check_equivalence(&self) -> Result<(), RuleError> {
        let free = self.free_metas();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_u64);
        for sample in 0..EQUIVALENCE_SAMPLES {
            let mut env: HashMap<String, Value> = free
                .iter()
                .map(|m| {
                    // Small values first so boundary cases get hit.
                    let span = if sample < EQUIVALENCE_SAMPLES / 2 {
                        4
                    } else {
                        1_000_000
                    };
                    (m.clone(), Value::from_i64(rng.gen_range(-span..=span)))
                })
                .collect();
            let read = |env: &HashMap<String, Value>, o: &Operand| match o {
                Operand::Meta(m) => env[m],
                Operand::Const(c) => Value::from_i64(*c),
            };
            for p in &self.pattern {
                let v = p.op.apply(read(&env, &p.lhs), read(&env, &p.rhs));
                env.insert(p.target.clone(), v);
            }
            let expected = env[&self.replacement.target];
            let r = &self.replacement;
            let got = r.op.apply(read(&env, &r.lhs), read(&env, &r.rhs));
            if got != expected {
                let shown: BTreeMap<_, _> = free.iter().map(|m| (m.clone(), env[m])).collect();
                return Err(RuleError::NotEquivalent {
                    rule: self.name.clone(),
                    counterexample: format!("{shown:?}"),
                });
            }
        }
        Ok(())
    }

    /// Parses `name: P1; P2; ... => R` where each statement is
    /// `target := OP lhs rhs` and constant operands are written `#n`.
    pub fn parse(line: &str) -> Result<Self, RuleError> {
        let (name, body) = line
            .split_once(':')
            .filter(|(n, _)| !n.contains('='))
            .ok_or_else(|| RuleError::Syntax(format!("missing rule name in `{line}`")))?;
        let (pattern, replacement) = body
            .split_once("=>")
            .ok_or_else(|| RuleError::Syntax(format!("missing `=>` in `{line}`")))?;
        let pattern = pattern
            .split(';')
            .map(parse_pattern_stmt)
            .collect::<Result<Vec<_>, _>>()?;
        RewriteRule::new(name.trim(), pattern, parse_pattern_stmt(replacement)?)
    }
}

fn parse_pattern_stmt(s: &str) -> Result<PatternStmt, RuleError> {
    let err = || RuleError::Syntax(format!("malformed pattern statement `{}`", s.trim()));
    let (target, rhs) = s.split_once(":=").ok_or_else(err)?;
    let words: Vec<&str> = rhs.split_whitespace().collect();
    if words.len() != 3 || !is_identifier(target.trim()) {
        return Err(err());
    }
    let op: Op = words[0].parse().map_err(|_| err())?;
    let operand = |w: &str| -> Result<Operand, RuleError> {
        if let Some(n) = w.strip_prefix('#') {
            n.parse().map(Operand::Const).map_err(|_| err())
        } else if is_identifier(w) {
            Ok(Operand::Meta(w.to_string()))
        } else {
            Err(err())
        }
    };
    Ok(PatternStmt {
        target: target.trim().to_string(),
        op,
        lhs: operand(words[1])?,
        rhs: operand(words[2])?,
    })
}

#[derive(Clone, Debug)]
pub struct RewriteRuleSet {
    pub rules: Vec<RewriteRule>,
}

impl RewriteRuleSet {
    /// The two built-in rules: `x <= I - 1` becomes `x < I`, and `not (a == b)`
    /// becomes `a != b`.
    pub fn builtin() -> Self {
        let rules = [
            "le-minus-one: J := SUB I #1; c := LE x J => c := LT x I",
            "not-equals: t := EQ a b; u := EQ t #0 => u := NEQ a b",
        ]
        .iter()
        .map(|r| RewriteRule::parse(r).expect("built-in rules are valid"))
        .collect();
        RewriteRuleSet { rules }
    }

    pub fn empty() -> Self {
        RewriteRuleSet { rules: Vec::new() }
    }

    /// One rule per non-empty, non-comment line.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let rules = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(RewriteRule::parse)
            .collect::<Result<_, _>>()?;
        Ok(RewriteRuleSet { rules })
    }
}

/// Rewrites to a fixpoint. Unmatched rules leave the program untouched.
pub fn uniformize(p: &Program, rules: &RewriteRuleSet) -> Program {
    let mut current = p.clone();
    // Guards against user rule sets that rewrite in a cycle.
    let limit = 4 * (p.len() + 1) * (rules.rules.len() + 1);
    for _ in 0..limit {
        let mut changed = false;
        for rule in &rules.rules {
            while let Some(next) = apply_once(&current, rule) {
                current = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    current
}

/// Index of the last definition of `var` strictly before `before`.
fn reaching_def(p: &Program, var: &Var, before: usize) -> Option<usize> {
    (0..before).rev().find(|&i| p.statements[i].target() == var)
}

fn redefined_between(p: &Program, var: &Var, from: usize, to: usize) -> bool {
    p.statements[from + 1..to].iter().any(|s| s.target() == var)
}

fn apply_once(p: &Program, rule: &RewriteRule) -> Option<Program> {
    for use_idx in 0..p.len() {
        if let Some((bindings, intermediates)) = match_at(p, rule, use_idx) {
            let r = &rule.replacement;
            let operand = |o: &Operand| match o {
                Operand::Meta(m) => bindings[m].clone(),
                Operand::Const(_) => unreachable!("rejected at rule construction"),
            };
            let replacement = Statement::Assign {
                target: p.statements[use_idx].target().clone(),
                expr: SimpleExpr::new(r.op, operand(&r.lhs), operand(&r.rhs)),
            };
            if replacement == p.statements[use_idx] {
                continue;
            }
            let mut out = p.clone();
            out.statements[use_idx] = replacement;
            let output = out.output().cloned();
            let uses = use_counts(&out);
            let mut dead: Vec<usize> = intermediates
                .into_iter()
                .filter(|&i| {
                    let t = out.statements[i].target();
                    !uses.contains_key(t) && Some(t) != output.as_ref()
                })
                .collect();
            dead.sort_unstable();
            for i in dead.into_iter().rev() {
                out.statements.remove(i);
            }
            return Some(out);
        }
    }
    None
}

fn match_at(
    p: &Program,
    rule: &RewriteRule,
    use_idx: usize,
) -> Option<(HashMap<String, Var>, Vec<usize>)> {
    let mut bindings: HashMap<String, Var> = HashMap::new();
    let mut positions: HashMap<String, usize> = HashMap::new();
    let mut intermediates = Vec::new();

    let bind = |bindings: &mut HashMap<String, Var>, o: &Operand, v: &Var| -> bool {
        match o {
            Operand::Const(c) => p.constant(v) == Some(Value::from_i64(*c)),
            Operand::Meta(m) => match bindings.get(m) {
                Some(b) => b == v,
                None => {
                    bindings.insert(m.clone(), v.clone());
                    true
                }
            },
        }
    };
    let match_stmt = |bindings: &mut HashMap<String, Var>, pat: &PatternStmt, idx: usize| -> bool {
        let Statement::Assign { target, expr } = &p.statements[idx] else {
            return false;
        };
        expr.op == pat.op
            && bind(bindings, &Operand::Meta(pat.target.clone()), target)
            && bind(bindings, &pat.lhs, &expr.lhs)
            && bind(bindings, &pat.rhs, &expr.rhs)
    };

    let last = rule.pattern.last()?;
    if !match_stmt(&mut bindings, last, use_idx) {
        return None;
    }
    positions.insert(last.target.clone(), use_idx);
    // Walk earlier pattern statements backwards; each defines a metavariable
    // that a later one reads.
    for pat in rule.pattern.iter().rev().skip(1) {
        let var = bindings.get(&pat.target)?.clone();
        let reader = rule
            .pattern
            .iter()
            .filter(|q| [&q.lhs, &q.rhs].contains(&&Operand::Meta(pat.target.clone())))
            .filter_map(|q| positions.get(&q.target))
            .copied()
            .min()?;
        let def = reaching_def(p, &var, reader)?;
        if !match_stmt(&mut bindings, pat, def) {
            return None;
        }
        positions.insert(pat.target.clone(), def);
        intermediates.push(def);
    }
    // The replacement reads free metavariables at `use_idx`; they must still
    // hold the values the pattern saw.
    for pat in &rule.pattern[..rule.pattern.len() - 1] {
        let def = positions[&pat.target];
        for o in [&pat.lhs, &pat.rhs] {
            if let Operand::Meta(m) = o {
                if redefined_between(p, &bindings[m], def, use_idx) {
                    return None;
                }
            }
        }
    }
    Some((bindings, intermediates))
}
