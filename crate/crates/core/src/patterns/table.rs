use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ir::Op;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Family {
    Operator,
    IntConst,
    Structural,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Operator, Family::IntConst, Family::Structural];

    fn tag(self) -> &'static str {
        match self {
            Family::Operator => "op",
            Family::IntConst => "const",
            Family::Structural => "struct",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Family::Operator => "operators",
            Family::IntConst => "integer constants",
            Family::Structural => "expression structure",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("pattern table line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

/// Absolute counts for each pattern family.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PatternTable {
    families: BTreeMap<Family, BTreeMap<String, u64>>,
}

impl PatternTable {
    pub fn add(&mut self, family: Family, key: &str, n: u64) {
        if n > 0 {
            *self
                .families
                .entry(family)
                .or_default()
                .entry(key.to_string())
                .or_default() += n;
        }
    }

    pub fn count(&self, family: Family, key: &str) -> u64 {
        self.families
            .get(&family)
            .and_then(|m| m.get(key))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, family: Family) -> u64 {
        self.families.get(&family).map_or(0, |m| m.values().sum())
    }

    /// Fraction of the family's total; 0 for an empty family.
    pub fn relative(&self, family: Family, key: &str) -> f64 {
        match self.total(family) {
            0 => 0.0,
            t => self.count(family, key) as f64 / t as f64,
        }
    }

    pub fn entries(&self, family: Family) -> impl Iterator<Item = (&str, u64)> {
        self.families
            .get(&family)
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), *v)))
    }

    pub fn is_empty(&self) -> bool {
        Family::ALL.iter().all(|&f| self.total(f) == 0)
    }

    /// Pointwise count addition.
    pub fn merge(&mut self, other: &PatternTable) {
        for f in Family::ALL {
            for (k, v) in other.entries(f) {
                self.add(f, k, v);
            }
        }
    }

    /// Add-one smoothed relative frequency of an IR operator. Operators are
    /// looked up by their pattern name (`plus`, `multiply`, ...).
    pub fn op_score(&self, op: Op) -> f64 {
        let mut vocab: BTreeSet<&str> = Op::ALL.iter().map(|o| o.pattern_name()).collect();
        vocab.extend(self.entries(Family::Operator).map(|(k, _)| k));
        (self.count(Family::Operator, op.pattern_name()) + 1) as f64
            / (self.total(Family::Operator) + vocab.len() as u64) as f64
    }

    /// Add-one smoothed frequency of `op` used with the integer constant
    /// `value`, or `None` when the table has no constant statistics.
    pub fn const_score(&self, op: Op, value: i64) -> Option<f64> {
        let total = self.total(Family::IntConst);
        if total == 0 {
            return None;
        }
        let key = format!("{} {value}", op.pattern_name());
        // Every seen key plus one shared bucket for unseen ones.
        let vocab = self.entries(Family::IntConst).count() as u64 + 1;
        Some((self.count(Family::IntConst, &key) + 1) as f64 / (total + vocab) as f64)
    }

    /// One line per entry: `<family> <count> <key>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in Family::ALL {
            for (k, v) in self.entries(f) {
                writeln!(out, "{} {v} {k}", f.tag()).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut t = PatternTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| TableError {
                line: i + 1,
                message: message.to_string(),
            };
            let mut parts = line.splitn(3, ' ');
            let family = match parts.next() {
                Some("op") => Family::Operator,
                Some("const") => Family::IntConst,
                Some("struct") => Family::Structural,
                _ => return Err(err("expected `op`, `const` or `struct`")),
            };
            let count: u64 = parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| err("bad count"))?;
            let key = parts.next().map(str::trim).filter(|k| !k.is_empty());
            t.add(
                family,
                key.ok_or_else(|| err("missing pattern key"))?,
                count,
            );
        }
        Ok(t)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct AggregateRow {
    pub key: String,
    /// Relative frequency in percent, per corpus.
    pub percents: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct AggregateTable {
    pub corpora: Vec<String>,
    pub sections: Vec<(Family, Vec<AggregateRow>)>,
}

impl AggregateTable {
    pub fn row(&self, family: Family, key: &str) -> Option<&AggregateRow> {
        self.sections
            .iter()
            .find(|(f, _)| *f == family)
            .and_then(|(_, rows)| rows.iter().find(|r| r.key == key))
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-family relative frequencies across corpora, with rows sorted by the
/// first corpus's frequency, highest first.
pub fn aggregate(tables: &[(String, PatternTable)]) -> AggregateTable {
    let mut sections = Vec::new();
    for f in Family::ALL {
        let keys: BTreeSet<&str> = tables
            .iter()
            .flat_map(|(_, t)| t.entries(f).map(|(k, _)| k))
            .collect();
        if keys.is_empty() {
            continue;
        }
        let mut rows: Vec<AggregateRow> = keys
            .into_iter()
            .map(|k| {
                let counts: Vec<u64> = tables.iter().map(|(_, t)| t.count(f, k)).collect();
                let percents: Vec<f64> = tables
                    .iter()
                    .map(|(_, t)| 100.0 * t.relative(f, k))
                    .collect();
                let (mean, std) = mean_std(&percents);
                AggregateRow {
                    key: k.to_string(),
                    percents,
                    counts,
                    mean,
                    std,
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            b.percents[0]
                .total_cmp(&a.percents[0])
                .then_with(|| b.mean.total_cmp(&a.mean))
                .then_with(|| a.key.cmp(&b.key))
        });
        sections.push((f, rows));
    }
    AggregateTable {
        corpora: tables.iter().map(|(n, _)| n.clone()).collect(),
        sections,
    }
}

/// Pipe-delimited rendering with integer percentages, absolute counts in
/// parentheses, and mean/std to one decimal.
pub fn export_table(t: &AggregateTable) -> String {
    let mut out = String::from("pattern");
    for c in &t.corpora {
        write!(out, " | {c}").unwrap();
    }
    out.push_str(" | mean | std\n");
    for (f, rows) in &t.sections {
        writeln!(out, "# {}", f.title()).unwrap();
        for r in rows {
            out.push_str(&r.key);
            for (p, c) in r.percents.iter().zip(&r.counts) {
                write!(out, " | {p:.0}({c})").unwrap();
            }
            writeln!(out, " | {:.1} | {:.1}", r.mean, r.std).unwrap();
        }
    }
    out
}
