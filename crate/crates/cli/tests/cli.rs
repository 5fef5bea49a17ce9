use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selectc::interp::{eval_plain, Inputs};
use selectc::patterns::{synthetic_corpus, trees_to_text, SynthSpec};
use selectc::{Program, Value, Var};
use tempfile::TempDir;

fn selectc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selectc"))
        .args(args)
        .env_remove("SELECTC_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = selectc(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn assert_one_line_error(out: &Output, code: i32) {
    assert_eq!(out.status.code(), Some(code));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

const SOURCE: &str =
    "input a, b, c\nt := a * b\nif (t < c) then r := t - c else r := c / a\ns := r + 7\n";

#[test]
fn demos_report_the_case_study_class_sizes() {
    let dir = TempDir::new().unwrap();
    for (level, size) in [("l0", "12500"), ("l1", "15625")] {
        let out = path(&dir, level);
        assert_eq!(
            ok(&["demo", level, "-o", &out]),
            format!("class_size {size}\n")
        );
        let obf = format!("{out}/task1.obf");
        let report = ok(&["attack", &obf]);
        assert!(
            report.starts_with(&format!("class_size {size}\n")),
            "{report}"
        );
    }
}

#[test]
fn demo_runs_the_task_under_encryption() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "l0");
    ok(&["demo", "l0", "-o", &out]);
    let (obf, key) = (format!("{out}/task1.obf"), format!("{out}/task1.key"));
    assert_eq!(
        ok(&[
            "run",
            &obf,
            "--key",
            &key,
            "--inputs",
            "y=2,u=0,x=8,v=-9999"
        ]),
        "4\n"
    );
    assert_eq!(
        ok(&[
            "run",
            &obf,
            "--key",
            &key,
            "--inputs",
            "y=0,u=0,x=8,v=-9999"
        ]),
        "-9999\n"
    );
}

#[test]
fn obfuscate_then_deobfuscate_preserves_semantics() {
    let dir = TempDir::new().unwrap();
    let src = path(&dir, "p.src");
    let cfg = path(&dir, "p.cfg");
    fs::write(&src, SOURCE).unwrap();
    fs::write(&cfg, "k = 3\nfake_vars = 2\nfake_combining = 2\n").unwrap();
    let (obf, key, back) = (
        path(&dir, "p.obf"),
        path(&dir, "p.key"),
        path(&dir, "p.tac"),
    );
    ok(&[
        "obfuscate",
        &src,
        "--config",
        &cfg,
        "-o",
        &obf,
        "--key",
        &key,
    ]);
    ok(&["deobfuscate", &obf, "--key", &key, "-o", &back]);

    let original =
        selectc::lower::lower(&selectc::surface::parse_surface(SOURCE).unwrap()).unwrap();
    let recovered = Program::parse(&fs::read_to_string(&back).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let ins: Inputs = ["a", "b", "c"]
            .iter()
            .map(|v| (Var::new(*v), Value::from_i64(rng.gen_range(-30..=30))))
            .collect();
        let expected = eval_plain(&original, &ins).unwrap();
        assert_eq!(eval_plain(&recovered, &ins), Ok(expected));
        let arg: Vec<String> = ins
            .iter()
            .map(|(k, v)| format!("{k}={}", v.to_signed()))
            .collect();
        let ran = ok(&["run", &obf, "--key", &key, "--inputs", &arg.join(",")]);
        assert_eq!(ran.trim(), expected.to_signed().to_string());
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let src = path(&dir, "p.src");
    fs::write(&src, SOURCE).unwrap();
    let run = |tag: &str, seed: &str| {
        let (obf, key) = (
            path(&dir, &format!("{tag}.obf")),
            path(&dir, &format!("{tag}.key")),
        );
        ok(&["obfuscate", &src, "-o", &obf, "--key", &key, "--seed", seed]);
        (fs::read(obf).unwrap(), fs::read(key).unwrap())
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("c", "5").0, run("d", "6").0);
}

#[test]
fn seed_environment_variable_overrides_the_default() {
    let dir = TempDir::new().unwrap();
    let src = path(&dir, "p.src");
    fs::write(&src, SOURCE).unwrap();
    let (a, b, c) = (
        path(&dir, "a.obf"),
        path(&dir, "b.obf"),
        path(&dir, "c.obf"),
    );
    let key = path(&dir, "k");
    let status = Command::new(env!("CARGO_BIN_EXE_selectc"))
        .args(["obfuscate", &src, "-o", &a, "--key", &key])
        .env("SELECTC_SEED", "77")
        .status()
        .unwrap();
    assert!(status.success());
    ok(&["obfuscate", &src, "-o", &b, "--key", &key, "--seed", "77"]);
    ok(&["obfuscate", &src, "-o", &c, "--key", &key]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn game_prints_both_closed_forms() {
    let out = ok(&["game", "--pl", "0.5", "--n", "11", "--trials", "200000"]);
    assert!(
        out.starts_with("exact 0.7250\nalt_form 0.7273\nsimulated 0.72"),
        "{out}"
    );
    let out = ok(&[
        "game",
        "--pl",
        "0.3",
        "--n",
        "8",
        "--trials",
        "200000",
        "--obfuscator",
        "frequent",
    ]);
    assert!(out.starts_with("exact 0.3000\n"), "{out}");
}

#[test]
fn kpa_pairs_shrink_the_class() {
    let dir = TempDir::new().unwrap();
    let obf = path(&dir, "sq.obf");
    let pairs = path(&dir, "pairs");
    fs::write(
        &obf,
        "input a\nt0 := ADD a a\nt1 := MUL a a\nt2 := COMBINE (s0,t0) (s1,t1)\n",
    )
    .unwrap();
    fs::write(&pairs, "# squaring\na=3 -> 9\n").unwrap();
    let report = ok(&["attack", &obf, "--pairs", &pairs]);
    assert!(
        report.starts_with("class_size 2\nsurvivors 1\n"),
        "{report}"
    );
    assert!(
        report.contains("top 1 1.000000e0 t2 := MUL a a"),
        "{report}"
    );
    let src = path(&dir, "sq.tac");
    fs::write(&src, "input a\nc := MUL a a\n").unwrap();
    let metrics = ok(&["metrics", &src, &obf, "--pairs", &pairs, "--samples", "2"]);
    assert!(metrics.contains("potency_reduction 1.0000\n"), "{metrics}");
    assert!(metrics.contains("overhead_static 3.0000\n"), "{metrics}");
}

#[test]
fn mine_counts_and_exports() {
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for (name, seed) in [("alpha", 1), ("beta", 2)] {
        let (trees, _) = synthetic_corpus(&SynthSpec::java_like(seed, 300));
        let f = path(&dir, &format!("{name}.trees"));
        fs::write(&f, trees_to_text(&trees)).unwrap();
        files.push(f);
    }
    let (table, export) = (path(&dir, "t.txt"), path(&dir, "e.txt"));
    ok(&[
        "mine", &files[0], &files[1], "-o", &table, "--export", &export,
    ]);
    let t = selectc::patterns::PatternTable::parse(&fs::read_to_string(&table).unwrap()).unwrap();
    assert!(!t.is_empty());
    let e = fs::read_to_string(&export).unwrap();
    assert!(
        e.starts_with("pattern | alpha | beta | mean | std\n"),
        "{e}"
    );

    let src = path(&dir, "p.src");
    fs::write(&src, SOURCE).unwrap();
    ok(&["mine", "--source", &src, "-o", &table]);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        selectc(&["obfuscate", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(selectc(&[]).status.code(), Some(1));
    assert_eq!(selectc(&["--help"]).status.code(), Some(0));

    assert_one_line_error(
        &selectc(&["deobfuscate", &path(&dir, "missing"), "--key", "k"]),
        2,
    );
    assert_one_line_error(&selectc(&["game", "--pl", "1.5", "--n", "3"]), 2);

    let out = path(&dir, "l1");
    ok(&["demo", "l1", "-o", &out]);
    assert_one_line_error(
        &selectc(&["attack", &format!("{out}/task1.obf"), "--cap", "100"]),
        2,
    );

    let bad = path(&dir, "bad.src");
    fs::write(&bad, "input a\nthis is not a program\n").unwrap();
    let (o, k) = (path(&dir, "o"), path(&dir, "k"));
    assert_one_line_error(&selectc(&["obfuscate", &bad, "-o", &o, "--key", &k]), 2);

    let wrong_key = path(&dir, "wrong.key");
    fs::write(&wrong_key, "seed 1\nsel s0 = 1\n").unwrap();
    assert_one_line_error(
        &selectc(&[
            "deobfuscate",
            &format!("{out}/task1.obf"),
            "--key",
            &wrong_key,
        ]),
        2,
    );
    assert!(!Path::new(&o).exists());
}
