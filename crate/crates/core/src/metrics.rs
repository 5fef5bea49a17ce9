//! Cost and strength figures for an (original, obfuscated) program pair.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attack::ClassDescriptor;
use crate::crypto::{SecretKey, SelectorKey};
use crate::interp::eval_plain;
use crate::ir::{Op, Program, Statement};
use crate::obfuscate::{encrypt_inputs, eval_encrypted, EncryptedEvalError, ObfProgram};
use crate::testgen::random_inputs;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("at least one timing sample is required")]
    NoSamples,
    #[error("eliminated counts cover {found} combining statements, the class has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("combining statement {index}: {eliminated} eliminated out of {options} options")]
    TooManyEliminated {
        index: usize,
        eliminated: usize,
        options: usize,
    },
    #[error("plaintext evaluation failed: {0}")]
    Plain(#[from] crate::interp::EvalError),
    #[error("encrypted evaluation failed: {0}")]
    Encrypted(#[from] EncryptedEvalError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MisleadFactor {
    pub min: usize,
    pub mean: f64,
    pub max: usize,
}

/// Size figures for one program.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potency {
    /// Operator applications, one per assignment.
    pub operators: usize,
    /// Distinct variables: inputs, constants and targets.
    pub variables: usize,
    /// Combining statements over all statements.
    pub combine_ratio: f64,
}

pub fn potency(p: &Program) -> Potency {
    let combines = p.combine_count();
    Potency {
        operators: p.len() - combines,
        variables: p.names().len(),
        combine_ratio: if p.is_empty() {
            0.0
        } else {
            combines as f64 / p.len() as f64
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `None` when the obfuscated program has no combining statement.
    pub mislead_factor: Option<MisleadFactor>,
    pub overhead_static: f64,
    /// Encrypted over plaintext evaluation time on the mock backend.
    pub overhead_dynamic_mock: f64,
    pub potency_original: Potency,
    pub potency_obfuscated: Potency,
    pub potency_reduction: Option<f64>,
    /// Total-variation distance between the operator mix of the original
    /// statements and that of the added ones; informational only.
    pub operator_distance: Option<f64>,
}

pub fn mislead_factor(op: &ObfProgram) -> Option<MisleadFactor> {
    let sizes: Vec<usize> = op.combines().iter().map(|c| c.len()).collect();
    Some(MisleadFactor {
        min: *sizes.iter().min()?,
        mean: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
        max: *sizes.iter().max()?,
    })
}

fn op_histogram(p: &Program) -> BTreeMap<Op, usize> {
    let mut h = BTreeMap::new();
    for s in &p.statements {
        if let Statement::Assign { expr, .. } = s {
            *h.entry(expr.op).or_insert(0) += 1;
        }
    }
    h
}

/// Distance between the operator distribution of `p` and that of the
/// assignments `op` adds on top of them, or `None` when it adds none.
pub fn operator_distance(p: &Program, op: &ObfProgram) -> Option<f64> {
    let original = op_histogram(p);
    let mut added = op_histogram(&op.program);
    for (o, n) in &original {
        if let Some(m) = added.get_mut(o) {
            *m = m.saturating_sub(*n);
        }
    }
    let n_orig: usize = original.values().sum();
    let n_added: usize = added.values().sum();
    if n_orig == 0 || n_added == 0 {
        return None;
    }
    let half_l1: f64 = Op::ALL
        .iter()
        .map(|o| {
            let a = *original.get(o).unwrap_or(&0) as f64 / n_orig as f64;
            let b = *added.get(o).unwrap_or(&0) as f64 / n_added as f64;
            (a - b).abs()
        })
        .sum::<f64>()
        / 2.0;
    Some(half_l1)
}

/// Mean over combining statements of the share of misleading options
/// eliminated.
pub fn potency_reduction(cd: &ClassDescriptor, eliminated: &[usize]) -> Result<f64, MetricsError> {
    let radices = cd.radices();
    if eliminated.len() != radices.len() {
        return Err(MetricsError::LengthMismatch {
            expected: radices.len(),
            found: eliminated.len(),
        });
    }
    if radices.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (index, (&e, &r)) in eliminated.iter().zip(radices).enumerate() {
        if e >= r {
            return Err(MetricsError::TooManyEliminated {
                index,
                eliminated: e,
                options: r,
            });
        }
        sum += e as f64 / (r - 1) as f64;
    }
    Ok(sum / radices.len() as f64)
}

/// Static figures plus the mock-backend timing ratio over `samples` runs
/// on one seeded input vector. Timing runs are sequential.
pub fn measure(
    p: &Program,
    op: &ObfProgram,
    samples: usize,
    seed: u64,
) -> Result<MetricsReport, MetricsError> {
    if samples == 0 {
        return Err(MetricsError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ins = random_inputs(&mut rng, p, 1000);
    // Timing does not depend on which option is selected.
    let selectors = SelectorKey::from_choices(&op.program, &vec![0; op.program.combine_count()]);
    let sk = SecretKey::keygen(seed);
    let enc = encrypt_inputs(&sk, &ins);

    let mut plain = Duration::ZERO;
    let mut encrypted = Duration::ZERO;
    for _ in 0..samples {
        let t = Instant::now();
        std::hint::black_box(eval_plain(p, &ins)?);
        plain += t.elapsed();
        let t = Instant::now();
        std::hint::black_box(eval_encrypted(op, &sk, &selectors, &enc)?);
        encrypted += t.elapsed();
    }

    Ok(MetricsReport {
        mislead_factor: mislead_factor(op),
        overhead_static: op.program.len() as f64 / p.len() as f64,
        overhead_dynamic_mock: encrypted.as_secs_f64() / plain.as_secs_f64().max(1e-12),
        potency_original: potency(p),
        potency_obfuscated: potency(&op.program),
        potency_reduction: None,
        operator_distance: operator_distance(p, op),
    })
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.mislead_factor {
            Some(m) => {
                writeln!(out, "mislead_factor_min {}", m.min).unwrap();
                writeln!(out, "mislead_factor_mean {:.4}", m.mean).unwrap();
                writeln!(out, "mislead_factor_max {}", m.max).unwrap();
            }
            None => out.push_str("mislead_factor none\n"),
        }
        writeln!(out, "overhead_static {:.4}", self.overhead_static).unwrap();
        writeln!(
            out,
            "overhead_dynamic_mock_backend {:.4}",
            self.overhead_dynamic_mock
        )
        .unwrap();
        for (label, pt) in [
            ("original", self.potency_original),
            ("obfuscated", self.potency_obfuscated),
        ] {
            writeln!(out, "potency_{label}_operators {}", pt.operators).unwrap();
            writeln!(out, "potency_{label}_variables {}", pt.variables).unwrap();
            writeln!(out, "potency_{label}_combine_ratio {:.4}", pt.combine_ratio).unwrap();
        }
        if let Some(r) = self.potency_reduction {
            writeln!(out, "potency_reduction {r:.4}").unwrap();
        }
        match self.operator_distance {
            Some(d) => writeln!(out, "operator_distance {d:.4}").unwrap(),
            None => out.push_str("operator_distance none\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{eliminated_options, extract_class, kpa_filter, DEFAULT_CAP};
    use crate::interp::inputs;
    use crate::obfuscate::{obfuscate_statement_level, ObfuscationConfig};
    use crate::testgen::random_program;
    use crate::Value;

    #[test]
    fn single_statement_costs_three() {
        let p = Program::parse("input a\nc := MUL a a\n").unwrap();
        let (op, _) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(2, 1)).unwrap();
        let m = measure(&p, &op, 3, 1).unwrap();
        assert_eq!(m.overhead_static, 3.0);
        assert_eq!(
            m.mislead_factor,
            Some(MisleadFactor {
                min: 2,
                mean: 2.0,
                max: 2
            })
        );
        assert!(m.overhead_dynamic_mock > 0.0);
        assert_eq!(m.potency_obfuscated.operators, 2);
        assert!((m.potency_obfuscated.combine_ratio - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn static_overhead_is_k_plus_one_without_fakes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 2..6 {
            let p = random_program(&mut rng, 2, 0, 5);
            let (op, _) =
                obfuscate_statement_level(&p, &ObfuscationConfig::with_k(k, k as u64)).unwrap();
            let m = measure(&p, &op, 1, 0).unwrap();
            assert_eq!(m.overhead_static, (k + 1) as f64);
            assert_eq!(m.mislead_factor.unwrap().min, k);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let p = Program::parse("input a\nc := MUL a a\n").unwrap();
        let (op, _) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(2, 1)).unwrap();
        assert_eq!(measure(&p, &op, 0, 1), Err(MetricsError::NoSamples));
    }

    #[test]
    fn reduction_bounds_and_kpa() {
        let op = ObfProgram::parse(
            "input a\nt0 := ADD a a\nt1 := MUL a a\nt2 := COMBINE (s0,t0) (s1,t1)\n",
        )
        .unwrap();
        let cd = extract_class(&op);
        assert_eq!(potency_reduction(&cd, &[0]), Ok(0.0));
        assert_eq!(potency_reduction(&cd, &[1]), Ok(1.0));
        assert!(potency_reduction(&cd, &[2]).is_err());
        assert!(potency_reduction(&cd, &[]).is_err());
        let survivors = kpa_filter(
            &cd,
            &[(inputs([("a", 3)]), Value::from_i64(9))],
            DEFAULT_CAP,
        )
        .unwrap();
        assert_eq!(
            potency_reduction(&cd, &eliminated_options(&cd, &survivors)),
            Ok(1.0)
        );
    }

    #[test]
    fn reduction_is_monotone() {
        let p = Program::parse("input a\ninput b\nx := ADD a b\ny := MUL x a\n").unwrap();
        let (op, _) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(4, 5)).unwrap();
        let cd = extract_class(&op);
        let mut last = -1.0;
        for e in [[0, 0], [1, 0], [1, 2], [3, 2], [3, 3]] {
            let r = potency_reduction(&cd, &e).unwrap();
            assert!(r > last && (0.0..=1.0).contains(&r));
            last = r;
        }
    }

    #[test]
    fn operator_distance_is_a_distance() {
        let p = Program::parse("input a\nc := MUL a a\n").unwrap();
        let same = ObfProgram::parse(
            "input a\nt0 := MUL a a\nt1 := MUL a a\nt2 := COMBINE (s0,t0) (s1,t1)\n",
        )
        .unwrap();
        assert_eq!(operator_distance(&p, &same), Some(0.0));
        let other = ObfProgram::parse(
            "input a\nt0 := MUL a a\nt1 := ADD a a\nt2 := COMBINE (s0,t0) (s1,t1)\n",
        )
        .unwrap();
        assert_eq!(operator_distance(&p, &other), Some(1.0));
        assert_eq!(
            operator_distance(&p, &ObfProgram { program: p.clone() }),
            None
        );
    }

    #[test]
    fn report_is_key_value() {
        let p = Program::parse("input a\nc := MUL a a\n").unwrap();
        let (op, _) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(2, 1)).unwrap();
        let text = measure(&p, &op, 1, 1).unwrap().to_text();
        for line in text.lines() {
            assert_eq!(line.split(' ').count(), 2, "{line}");
        }
        assert!(text.contains("overhead_static 3.0000\n"));
    }
}
