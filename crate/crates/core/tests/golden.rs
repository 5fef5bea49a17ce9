//! Byte-level snapshots of seeded outputs. Run with `UPDATE_GOLDEN=1` to
//! rewrite them after an intended change.

use std::fs;
use std::path::PathBuf;

use selectc::crypto::KeyFile;
use selectc::demo::{demo, task1, Level};
use selectc::obfuscate::DEFAULT_SEED;
use selectc::patterns::{aggregate, export_table, mine, synthetic_corpus, SynthSpec};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!(
            "{}: {e}; run with UPDATE_GOLDEN=1 to create it",
            path.display()
        )
    });
    assert_eq!(actual, expected, "{name} differs from its snapshot");
}

#[test]
fn lowered_division_task() {
    check("task1.tac", &task1().to_text());
}

#[test]
fn seeded_obfuscations() {
    for (level, name) in [(Level::L0, "l0"), (Level::L1, "l1")] {
        let d = demo(level, DEFAULT_SEED).unwrap();
        check(&format!("{name}.obf"), &d.obfuscated.to_text());
        check(
            &format!("{name}.key"),
            &KeyFile {
                seed: DEFAULT_SEED,
                selectors: d.key,
            }
            .to_text(),
        );
    }
}

#[test]
fn synthetic_pattern_export() {
    let tables: Vec<(String, _)> = (1..=4)
        .map(|seed| {
            let (trees, _) = synthetic_corpus(&SynthSpec::java_like(seed, 2000));
            (format!("dev{seed}"), mine(&trees).unwrap())
        })
        .collect();
    check("synthetic_export.txt", &export_table(&aggregate(&tables)));
}
