//! Seeded synthetic corpora with counts tallied while the trees are built.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExprTree, Family, PatternTable, INT_LITERAL};

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub seed: u64,
    /// Exact number of nodes across the corpus.
    pub nodes: usize,
    pub binary_ops: Vec<(&'static str, u32)>,
    pub unary_ops: Vec<(&'static str, u32)>,
    pub leaf_kinds: Vec<(&'static str, u32)>,
    pub max_literal: i64,
    pub max_depth: u32,
}

impl SynthSpec {
    pub fn java_like(seed: u64, nodes: usize) -> Self {
        SynthSpec {
            seed,
            nodes,
            binary_ops: vec![
                ("plus", 30),
                ("minus", 12),
                ("multiply", 8),
                ("divide", 3),
                ("equals", 10),
                ("notEquals", 8),
                ("less", 12),
                ("lessEquals", 3),
                ("greater", 6),
                ("greaterEquals", 2),
            ],
            unary_ops: vec![("posIncrement", 10), ("not", 6), ("negative", 2)],
            leaf_kinds: vec![
                ("NameE", 60),
                (INT_LITERAL, 25),
                ("StringLiteralE", 10),
                ("MethodCallE", 5),
            ],
            max_literal: 3,
            max_depth: 4,
        }
    }
}

struct Gen<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    tally: PatternTable,
    binary: WeightedIndex<u32>,
    unary: WeightedIndex<u32>,
    leaf: WeightedIndex<u32>,
}

impl Gen<'_> {
    fn tree(&mut self, budget: usize, depth: u32) -> ExprTree {
        let can_nest = depth < self.spec.max_depth;
        let shape = self.rng.gen_range(0..10);
        if can_nest && budget >= 3 && shape < 5 {
            let left_budget = self.rng.gen_range(1..=budget - 2);
            let l = self.tree(left_budget, depth + 1);
            let r = self.tree(budget - 1 - l.node_count(), depth + 1);
            let op = self.spec.binary_ops[self.binary.sample(&mut self.rng)].0;
            self.tally.add(Family::Operator, op, 1);
            self.tally.add(
                Family::Structural,
                &format!("{} {op} {}", l.kind, r.kind),
                1,
            );
            let lit = |t: &ExprTree| (t.kind == INT_LITERAL).then(|| t.value.expect("literal"));
            if let (Some(v), None) | (None, Some(v)) = (lit(&l), lit(&r)) {
                self.tally.add(Family::IntConst, &format!("{op} {v}"), 1);
            }
            ExprTree::binary(op, l, r)
        } else if can_nest && budget >= 2 && shape < 7 {
            let c = self.tree(budget - 1, depth + 1);
            let op = self.spec.unary_ops[self.unary.sample(&mut self.rng)].0;
            self.tally.add(Family::Operator, op, 1);
            self.tally
                .add(Family::Structural, &format!("{op} {}", c.kind), 1);
            ExprTree::unary(op, c)
        } else {
            let kind = self.spec.leaf_kinds[self.leaf.sample(&mut self.rng)].0;
            if kind == INT_LITERAL {
                ExprTree::int(self.rng.gen_range(0..=self.spec.max_literal))
            } else {
                ExprTree::leaf(kind)
            }
        }
    }
}

/// Builds a corpus with exactly `spec.nodes` nodes and returns it with the
/// pattern counts recorded during construction.
pub fn synthetic_corpus(spec: &SynthSpec) -> (Vec<ExprTree>, PatternTable) {
    let weights = |v: &[(&str, u32)]| {
        WeightedIndex::new(v.iter().map(|(_, w)| *w)).expect("positive weights")
    };
    let mut g = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        tally: PatternTable::default(),
        binary: weights(&spec.binary_ops),
        unary: weights(&spec.unary_ops),
        leaf: weights(&spec.leaf_kinds),
    };
    let mut corpus = Vec::new();
    let mut remaining = spec.nodes;
    while remaining > 0 {
        let budget = remaining.min(g.rng.gen_range(1..=24));
        let t = g.tree(budget, 0);
        remaining -= t.node_count();
        corpus.push(t);
    }
    (corpus, g.tally)
}
