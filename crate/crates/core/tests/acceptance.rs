//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; the process fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use selectc::attack::{
    class_quality, eliminated_options, extract_class, game_exact, game_simulate, kpa_filter,
    pattern_score, rank_candidates, rank_with, AttStrategy, ObfStrategy, DEFAULT_CAP,
};
use selectc::crypto::{SecretKey, SelectorKey};
use selectc::demo::{demo, Level};
use selectc::interp::{eval_plain, Inputs};
use selectc::lower::lower;
use selectc::obfuscate::{
    deobfuscate, encrypt_inputs, eval_encrypted, normalize, obfuscate_program_level,
    obfuscate_statement_level, FakeVars, ObfProgram, ObfuscationConfig,
};
use selectc::patterns::{
    aggregate, mean_std, mine, synthetic_corpus, Family, PatternTable, SynthSpec,
};
use selectc::surface::eval_surface;
use selectc::testgen::{
    random_inputs, random_program, random_surface, random_surface_inputs, SurfaceSpec,
};
use selectc::{Op, Program, Statement, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn decrypt_run(
    op: &ObfProgram,
    key: &SelectorKey,
    sk: &SecretKey,
    ins: &Inputs,
) -> Result<Value, String> {
    let enc = encrypt_inputs(sk, ins);
    let c = eval_encrypted(op, sk, key, &enc).map_err(|e| e.to_string())?;
    sk.dec(c).map_err(|e| e.to_string())
}

fn correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = SurfaceSpec {
        max_statements: 8,
        max_array: 4,
        max_bound: 4,
    };
    let mut checked = 0;
    for i in 0..200u64 {
        let sp = random_surface(&mut rng, spec);
        let p = lower(&sp).map_err(|e| format!("program {i}: {e}"))?;
        let cfg = ObfuscationConfig {
            fake_vars: FakeVars::Count(rng.gen_range(0..3)),
            fake_combining: rng.gen_range(0..3),
            ..ObfuscationConfig::with_k(rng.gen_range(2..=3), i)
        };
        let (op, key) =
            obfuscate_statement_level(&p, &cfg).map_err(|e| format!("program {i}: {e}"))?;
        let sk = SecretKey::keygen(i);
        for _ in 0..100 {
            let ins = random_surface_inputs(&mut rng, &sp, 1000);
            let expected = eval_surface(&sp, &ins).map_err(|e| e.to_string())?;
            let got = decrypt_run(&op, &key, &sk, &ins)?;
            ensure(got == expected, || {
                format!(
                    "program {i}: decrypted {} but plaintext {}\n{}",
                    got,
                    expected,
                    sp.render()
                )
            })?;
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{checked} encrypted runs equal plaintext, {secs:.1}s"
    ))
}

fn search_space() -> Outcome {
    let mut sizes = Vec::new();
    for (level, expected) in [(Level::L0, 12_500u32), (Level::L1, 15_625)] {
        let d = demo(level, selectc::obfuscate::DEFAULT_SEED).map_err(|e| e.to_string())?;
        let report = selectc::attack::run_attack(
            &d.obfuscated,
            &[],
            &PatternTable::default(),
            Some(&d.key),
            DEFAULT_CAP,
        )
        .map_err(|e| e.to_string())?;
        ensure(report.class_size == BigUint::from(expected), || {
            format!("{level:?} class size {} != {expected}", report.class_size)
        })?;
        ensure(report.survivors == expected as usize, || {
            format!("{level:?} enumerated {}", report.survivors)
        })?;
        sizes.push(report.class_size.to_string());
    }
    Ok(format!("L0 {} and L1 {}", sizes[0], sizes[1]))
}

/// Counts class members by walking every selector assignment directly.
fn odometer_count(op: &ObfProgram) -> (usize, usize) {
    let radices: Vec<usize> = op.combines().iter().map(|c| c.len()).collect();
    let mut digits = vec![0; radices.len()];
    let mut texts = BTreeSet::new();
    let mut count = 0;
    loop {
        count += 1;
        texts.insert(selectc::obfuscate::resolve(&op.program, &digits).to_text());
        let mut i = digits.len();
        loop {
            if i == 0 {
                return (count, texts.len());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < radices[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

fn cost_tradeoff() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    for n in 1..=4usize {
        for k in 2..=3usize {
            for fakes in 0..=2usize {
                for trial in 0..5u64 {
                    let p = random_program(&mut rng, 2, 1, n);
                    let cfg = ObfuscationConfig {
                        fake_combining: fakes,
                        ..ObfuscationConfig::with_k(k, trial * 100 + n as u64)
                    };
                    let (op, _) = obfuscate_statement_level(&p, &cfg).map_err(|e| e.to_string())?;
                    // A misleading combining statement costs k assignments and one combine.
                    let bound = (k + 1) * n + fakes * (k + 1);
                    ensure(op.program.len() <= bound, || {
                        format!(
                            "n={n} k={k} fakes={fakes}: {} statements > {bound}",
                            op.program.len()
                        )
                    })?;
                    let expected = k.pow((n + fakes) as u32);
                    let (walked, distinct) = odometer_count(&op);
                    let cd = extract_class(&op);
                    let listed = kpa_filter(&cd, &[], DEFAULT_CAP)
                        .map_err(|e| e.to_string())?
                        .len();
                    ensure(
                        walked == expected && distinct == expected && listed == expected,
                        || {
                            format!("n={n} k={k} fakes={fakes}: walked {walked}, distinct {distinct}, listed {listed}, expected {expected}")
                        },
                    )?;
                    ensure(cd.size() == &BigUint::from(expected), || {
                        format!("size {}", cd.size())
                    })?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} configurations within (k+1)n + fakes(k+1), class size k^(n+fakes)"
    ))
}

fn program_level_guessing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut attacker = ChaCha8Rng::seed_from_u64(44);
    let trials = 10_000;
    let mut hits = 0;
    for t in 0..trials {
        let programs: Vec<Program> = (0..5).map(|_| random_program(&mut rng, 2, 1, 3)).collect();
        let i_star = rng.gen_range(0..5);
        let (op, key) = obfuscate_program_level(&programs, i_star, t).map_err(|e| e.to_string())?;
        let options = op.combines()[0].to_vec();
        let guess = &options[attacker.gen_range(0..options.len())];
        if key.bits[&guess.selector] {
            hits += 1;
        }
        if t < 200 {
            // The attacker's view does not depend on which program is real.
            let (other, _) = obfuscate_program_level(&programs, (i_star + 1) % 5, t)
                .map_err(|e| e.to_string())?;
            ensure(other.to_text() == op.to_text(), || {
                format!("trial {t}: view depends on the secret")
            })?;
        }
    }
    let freq = hits as f64 / trials as f64;
    ensure((freq - 0.2).abs() <= 0.02, || {
        format!("frequency {freq:.4}")
    })?;
    Ok(format!("uniform guesses hit {freq:.4} of {trials}"))
}

fn kpa_resilience() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000u64 {
        let n = rng.gen_range(1..=3);
        let p = random_program(&mut rng, 2, 1, n);
        let cfg = ObfuscationConfig::with_k(rng.gen_range(2..=4), case);
        let (op, key) = obfuscate_statement_level(&p, &cfg).map_err(|e| e.to_string())?;
        let pairs: Vec<(Inputs, Value)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let ins = random_inputs(&mut rng, &p, 100);
                let out = eval_plain(&p, &ins).expect("generated programs evaluate");
                (ins, out)
            })
            .collect();
        let cd = extract_class(&op);
        let survivors = kpa_filter(&cd, &pairs, DEFAULT_CAP).map_err(|e| e.to_string())?;
        let conf = cd.index_of(&key).map_err(|e| e.to_string())?;
        ensure(survivors.contains(&conf), || {
            format!("case {case}: confidential program eliminated")
        })?;
    }

    let p = Program::parse("input a\nc := MUL a a\n").map_err(|e| e.to_string())?;
    let cfg = ObfuscationConfig {
        ops: vec![Op::Mul, Op::Add],
        ..ObfuscationConfig::with_k(2, 1)
    };
    let (op, _) = obfuscate_statement_level(&p, &cfg).map_err(|e| e.to_string())?;
    let cd = extract_class(&op);
    let pair = (
        Inputs::from([("a".into(), Value::from_i64(3))]),
        Value::from_i64(9),
    );
    let survivors = kpa_filter(&cd, &[pair], DEFAULT_CAP).map_err(|e| e.to_string())?;
    let op_of = |i: u64| match cd.candidate(i).statements.last() {
        Some(Statement::Assign { expr, .. }) => Some(expr.op),
        _ => None,
    };
    let removed: Vec<Option<Op>> = (0..2)
        .filter(|i| !survivors.contains(i))
        .map(op_of)
        .collect();
    ensure(
        removed == [Some(Op::Add)] && eliminated_options(&cd, &survivors) == [1],
        || format!("squaring class: removed {removed:?}"),
    )?;
    Ok("1000 randomized runs kept the confidential program; a=3 -> 9 removed only ADD".into())
}

fn one_combine(n: usize) -> ObfProgram {
    let mut text = String::from("input a\n");
    for i in 0..n {
        text.push_str(&format!("const k{i} {i}\nt{i} := ADD a k{i}\n"));
    }
    let options: Vec<String> = (0..n).map(|i| format!("(s{i},t{i})")).collect();
    text.push_str(&format!("out := COMBINE {}\n", options.join(" ")));
    ObfProgram::parse(&text).expect("constructed program parses")
}

fn quality_metric() -> Outcome {
    for n in [2usize, 3, 10, 100, 1000] {
        let cd = extract_class(&one_combine(n));
        let all: Vec<u64> = (0..n as u64).collect();
        // Candidate i scores i + 1, so candidate n - 1 ranks first and 0 last.
        let score = |p: &Program| first_constant_used(p) + 1.0;
        let ranking = rank_with(&cd, &all, score);
        let top =
            class_quality(&ranking, &BTreeSet::from([n as u64 - 1])).map_err(|e| e.to_string())?;
        let bottom = class_quality(&ranking, &BTreeSet::from([0])).map_err(|e| e.to_string())?;
        ensure(top.min_rank == 1 && top.q == 0.0, || {
            format!("N={n}: top {top:?}")
        })?;
        ensure(
            bottom.min_rank == n && bottom.q == 1.0 - 1.0 / n as f64,
            || format!("N={n}: bottom {bottom:?}"),
        )?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut table = PatternTable::default();
    for (op, count) in [
        (Op::Add, 57),
        (Op::Mul, 21),
        (Op::Lt, 9),
        (Op::Sub, 30),
        (Op::Eq, 4),
    ] {
        table.add(Family::Operator, op.pattern_name(), count);
    }
    for case in 0..50u64 {
        let p = random_program(&mut rng, 2, 1, 3);
        let (op, key) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(3, case))
            .map_err(|e| e.to_string())?;
        let cd = extract_class(&op);
        let all: Vec<u64> = (0..27).collect();
        let conf = BTreeSet::from([cd.index_of(&key).map_err(|e| e.to_string())?]);
        let base =
            class_quality(&rank_candidates(&cd, &all, &table), &conf).map_err(|e| e.to_string())?;
        for lambda in [1e-6, 0.5, 3.0, 1e9] {
            let scaled = rank_with(&cd, &all, |c| lambda * pattern_score(&table, c));
            let q = class_quality(&scaled, &conf).map_err(|e| e.to_string())?;
            ensure(q == base, || {
                format!("case {case}, scale {lambda}: {q:?} != {base:?}")
            })?;
        }
    }
    Ok("Q=0 at rank 1, Q=1-1/N at rank N for N up to 1000; unchanged under 4 rescalings x 50 classes".into())
}

/// The value of the constant the candidate's final assignment adds.
fn first_constant_used(p: &Program) -> f64 {
    match p.statements.last() {
        Some(Statement::Assign { expr, .. }) => {
            p.constant(&expr.rhs).map_or(0.0, |v| v.to_signed() as f64)
        }
        _ => 0.0,
    }
}

fn guessing_game() -> Outcome {
    let trials = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for p_l in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for n in [2u32, 3, 5, 11, 20] {
            let obf = ObfStrategy::UniformMisleading;
            let att = AttStrategy::PreferFrequent;
            let exact = game_exact(p_l, n, obf, att)
                .map_err(|e| e.to_string())?
                .exact;
            let sim =
                game_simulate(p_l, n, trials, 7 + n as u64, obf, att).map_err(|e| e.to_string())?;
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            let z = (sim - exact).abs() / sigma;
            worst = worst.max(z);
            ensure(z <= 3.0, || {
                format!("p_l={p_l} n={n}: simulated {sim:.5}, exact {exact:.5}, {z:.2} sigma")
            })?;

            let f = game_simulate(p_l, n, trials, 99, ObfStrategy::FrequentAsMisleading, att)
                .map_err(|e| e.to_string())?;
            ensure((f - p_l).abs() <= 0.005, || {
                format!("p_l={p_l} n={n}: F-as-misleading gives {f:.4}")
            })?;
            points += 1;
        }
    }
    let v = game_exact(
        0.5,
        11,
        ObfStrategy::UniformMisleading,
        AttStrategy::PreferFrequent,
    )
    .map_err(|e| e.to_string())?;
    Ok(format!(
        "{points} grid points within {worst:.2} sigma; F-as-misleading within 0.005 of p_l; (0.5, 11): exact {:.4}, alt_form {:.4}",
        v.exact, v.alt_form
    ))
}

fn pattern_aggregation() -> Outcome {
    let (mean, std) = mean_std(&[9.0, 7.0, 13.0, 10.0, 17.0]);
    ensure(
        (mean - 11.1).abs() <= 0.2 && (std - 3.4).abs() <= 0.2,
        || format!("mean {mean:.3}, std {std:.3}"),
    )?;

    let mut tables = Vec::new();
    for seed in 0..6u64 {
        let (trees, tally) =
            synthetic_corpus(&SynthSpec::java_like(seed, 1500 + 500 * seed as usize));
        let mined = mine(&trees).map_err(|e| e.to_string())?;
        ensure(mined == tally, || {
            format!("corpus {seed}: mined counts differ from the generator's")
        })?;
        tables.push((format!("c{seed}"), mined));
    }
    let agg = aggregate(&tables);
    for family in [Family::Operator, Family::IntConst, Family::Structural] {
        let rows: Vec<_> = agg
            .sections
            .iter()
            .filter(|(f, _)| *f == family)
            .flat_map(|(_, r)| r)
            .collect();
        for (c, (_, table)) in tables.iter().enumerate() {
            if table.total(family) == 0 {
                continue;
            }
            let sum: f64 = rows.iter().map(|r| r.percents[c]).sum();
            ensure((sum - 100.0).abs() <= 0.5, || {
                format!("{family:?} in corpus {c} sums to {sum:.3}%")
            })?;
        }
    }
    Ok(format!(
        "printed row gives {mean:.2}/{std:.2}; 6 synthetic corpora match their tallies"
    ))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..100u64 {
        let n = rng.gen_range(1..=8);
        let p = random_program(&mut rng, 3, 2, n);
        let cfg = ObfuscationConfig {
            fake_vars: FakeVars::Count(2),
            fake_combining: 2,
            ..ObfuscationConfig::with_k(rng.gen_range(2..=4), case)
        };
        let (op, key) = obfuscate_statement_level(&p, &cfg).map_err(|e| e.to_string())?;
        let back = deobfuscate(&op, &key).map_err(|e| e.to_string())?;
        ensure(back == normalize(&p), || {
            format!("case {case}: not syntactically equal\n{}", back.to_text())
        })?;

        let plain = ObfuscationConfig {
            fake_combining: 0,
            ..cfg.clone()
        };
        let (op0, key0) = obfuscate_statement_level(&p, &plain).map_err(|e| e.to_string())?;
        let sk = SecretKey::keygen(case);
        for _ in 0..10 {
            let ins = random_inputs(&mut rng, &p, 1000);
            let expected = eval_plain(&p, &ins).map_err(|e| e.to_string())?;
            ensure(eval_plain(&back, &ins) == Ok(expected), || {
                format!("case {case}: semantics differ")
            })?;
            let with = decrypt_run(&op, &key, &sk, &ins)?;
            let without = decrypt_run(&op0, &key0, &sk, &ins)?;
            ensure(with == without && with == expected, || {
                format!("case {case}: fakes changed the output")
            })?;
        }
    }
    Ok("100 programs recovered exactly; fake combining statements never changed an output".into())
}

fn permutation_uniformity() -> Outcome {
    let p = Program::parse("input a\ninput b\nc := MUL a b\n").map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for k in [2usize, 3, 5] {
        let mut counts = vec![0u64; k];
        let seeds = 1000;
        for seed in 0..seeds {
            let (op, key) = obfuscate_statement_level(&p, &ObfuscationConfig::with_k(k, seed))
                .map_err(|e| e.to_string())?;
            let options = op.combines()[0];
            let pos = options
                .iter()
                .position(|o| key.bits[&o.selector])
                .ok_or("no confidential option")?;
            counts[pos] += 1;
        }
        let expected = seeds as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new((k - 1) as f64)
            .map_err(|e| e.to_string())?
            .inverse_cdf(0.99);
        ensure(chi2 <= critical, || {
            format!("k={k}: chi2 {chi2:.2} > {critical:.2}, counts {counts:?}")
        })?;
        report.push(format!("k={k} chi2 {chi2:.2}/{critical:.2}"));
    }
    Ok(report.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("correctness under encryption", correctness),
        ("search-space arithmetic", search_space),
        ("cost and class size", cost_tradeoff),
        ("program-level guessing", program_level_guessing),
        ("known-pair resilience", kpa_resilience),
        ("class quality", quality_metric),
        ("guessing game", guessing_game),
        ("pattern aggregation", pattern_aggregation),
        ("round trip", round_trip),
        ("permutation uniformity", permutation_uniformity),
    ];
    let mut failed = BTreeMap::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                let line = why.lines().next().unwrap_or_default().to_string();
                println!("criterion {:>2} {name}: FAIL ({line})", i + 1);
                failed.insert(i + 1, why);
            }
        }
    }
    if !failed.is_empty() {
        for (i, why) in &failed {
            eprintln!("criterion {i}:\n{why}");
        }
        std::process::exit(1);
    }
}
