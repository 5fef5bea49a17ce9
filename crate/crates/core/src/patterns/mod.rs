//! Code-pattern statistics over expression trees: operator frequencies,
//! integer constants used with binary operators, and the shapes of
//! unary and binary expressions.

mod bridge;
mod synth;
mod table;

use std::fmt::Write as _;

use thiserror::Error;

pub use bridge::surface_to_trees;
pub use synth::{synthetic_corpus, SynthSpec};
pub use table::{
    aggregate, export_table, mean_std, AggregateRow, AggregateTable, Family, PatternTable,
};

/// A node of a language-neutral expression tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExprTree {
    pub kind: String,
    pub op: Option<String>,
    pub value: Option<i64>,
    pub children: Vec<ExprTree>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{kind} node has {found} children, expected {expected}")]
    Arity {
        kind: String,
        expected: &'static str,
        found: usize,
    },
    #[error("{0} node is missing its operator")]
    MissingOp(String),
    #[error("IntegerLiteralE node is missing its value")]
    MissingValue,
}

pub const INT_LITERAL: &str = "IntegerLiteralE";

impl ExprTree {
    pub fn leaf(kind: &str) -> Self {
        ExprTree {
            kind: kind.to_string(),
            op: None,
            value: None,
            children: Vec::new(),
        }
    }

    pub fn int(value: i64) -> Self {
        ExprTree {
            value: Some(value),
            ..ExprTree::leaf(INT_LITERAL)
        }
    }

    pub fn node(kind: &str, op: &str, children: Vec<ExprTree>) -> Self {
        ExprTree {
            kind: kind.to_string(),
            op: Some(op.to_string()),
            value: None,
            children,
        }
    }

    pub fn binary(op: &str, l: ExprTree, r: ExprTree) -> Self {
        ExprTree::node("BinaryE", op, vec![l, r])
    }

    pub fn unary(op: &str, child: ExprTree) -> Self {
        ExprTree::node("UnaryE", op, vec![child])
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let arity = |expected: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(TreeError::Arity {
                    kind: self.kind.clone(),
                    expected,
                    found: self.children.len(),
                })
            }
        };
        match self.kind.as_str() {
            "BinaryE" => {
                arity("2", self.children.len() == 2)?;
                self.op
                    .as_ref()
                    .ok_or_else(|| TreeError::MissingOp(self.kind.clone()))?;
            }
            "UnaryE" => {
                arity("1", self.children.len() == 1)?;
                self.op
                    .as_ref()
                    .ok_or_else(|| TreeError::MissingOp(self.kind.clone()))?;
            }
            INT_LITERAL if self.value.is_none() => return Err(TreeError::MissingValue),
            _ => {}
        }
        if self.op.is_some() {
            arity("1 or 2", matches!(self.children.len(), 1 | 2))?;
        }
        self.children.iter().try_for_each(ExprTree::validate)
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(ExprTree::node_count)
            .sum::<usize>()
    }

    fn write(&self, out: &mut String, depth: usize) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&self.kind);
        if let Some(op) = &self.op {
            write!(out, " op={op}").unwrap();
        }
        if let Some(v) = self.value {
            write!(out, " value={v}").unwrap();
        }
        out.push('\n');
        for c in &self.children {
            c.write(out, depth + 1);
        }
    }
}

/// Serializes a corpus, one node per line, two spaces of indent per level.
pub fn trees_to_text(trees: &[ExprTree]) -> String {
    let mut out = String::new();
    for t in trees {
        t.write(&mut out, 0);
    }
    out
}

/// Parses the indented node-per-line format. Each unindented line starts
/// a new tree.
pub fn parse_trees(text: &str) -> Result<Vec<ExprTree>, TreeError> {
    // Stack of (depth, node) for the current spine.
    let mut roots = Vec::new();
    let mut stack: Vec<(usize, ExprTree)> = Vec::new();

    fn pop_into(stack: &mut Vec<(usize, ExprTree)>, roots: &mut Vec<ExprTree>) {
        let (_, node) = stack.pop().expect("non-empty");
        match stack.last_mut() {
            Some((_, parent)) => parent.children.push(node),
            None => roots.push(node),
        }
    }

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| TreeError::Syntax {
            line: line_no,
            message,
        };
        let trimmed = raw.trim_end();
        if trimmed.trim_start().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let indent = trimmed.len() - trimmed.trim_start_matches(' ').len();
        if indent % 2 != 0 || trimmed[indent..].starts_with('\t') {
            return Err(err("indent must be a multiple of two spaces".into()));
        }
        let depth = indent / 2;
        let mut words = trimmed[indent..].split_whitespace();
        let kind = words.next().expect("non-empty line");
        if !kind.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("bad node kind `{kind}`")));
        }
        let mut node = ExprTree::leaf(kind);
        for w in words {
            if let Some(op) = w.strip_prefix("op=") {
                node.op = Some(op.to_string());
            } else if let Some(v) = w.strip_prefix("value=") {
                node.value = Some(v.parse().map_err(|_| err(format!("bad value `{v}`")))?);
            } else {
                return Err(err(format!("unexpected attribute `{w}`")));
            }
        }
        while stack.last().is_some_and(|(d, _)| *d >= depth) {
            pop_into(&mut stack, &mut roots);
        }
        let expected = stack.last().map_or(0, |(d, _)| d + 1);
        if depth != expected {
            return Err(err(format!(
                "indent jumps to depth {depth}, expected {expected}"
            )));
        }
        stack.push((depth, node));
    }
    while !stack.is_empty() {
        pop_into(&mut stack, &mut roots);
    }
    roots.iter().try_for_each(ExprTree::validate)?;
    Ok(roots)
}

/// Counts the three pattern families over a corpus.
pub fn mine(corpus: &[ExprTree]) -> Result<PatternTable, TreeError> {
    let mut t = PatternTable::default();
    for tree in corpus {
        tree.validate()?;
        mine_node(tree, &mut t);
    }
    Ok(t)
}

fn mine_node(n: &ExprTree, t: &mut PatternTable) {
    if let Some(op) = &n.op {
        t.add(Family::Operator, op, 1);
        match n.children.as_slice() {
            [c] => t.add(Family::Structural, &format!("{op} {}", c.kind), 1),
            [l, r] => {
                t.add(
                    Family::Structural,
                    &format!("{} {op} {}", l.kind, r.kind),
                    1,
                );
                let literal = |c: &ExprTree| (c.kind == INT_LITERAL).then_some(c.value).flatten();
                match (literal(l), literal(r)) {
                    (Some(v), None) | (None, Some(v)) => {
                        t.add(Family::IntConst, &format!("{op} {v}"), 1)
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    for c in &n.children {
        mine_node(c, t);
    }
}
