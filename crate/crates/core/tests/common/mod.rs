#![allow(dead_code)]

use autoderive::expr::{Arity, Formula, NodeKind, NodeTag};
use proptest::prelude::*;

pub fn leaf() -> impl Strategy<Value = Formula> {
    prop_oneof![
        3 => prop::sample::select(vec!["a", "b", "c", "x", "y", "gamma"]).prop_map(|n| Formula::try_sym(n).unwrap()),
        1 => prop::sample::select(vec!["0", "1", "2", "-1", "3.5"]).prop_map(|n| Formula::try_num(n).unwrap()),
    ]
}

fn operator_tags() -> Vec<NodeTag> {
    NodeTag::ALL.iter().copied().filter(|t| !t.is_leaf()).collect()
}

/// Arity-valid trees of depth at most `depth`.
pub fn formula(depth: u32) -> impl Strategy<Value = Formula> {
    leaf().prop_recursive(depth.saturating_sub(1), 64, 3, |inner| {
        prop::sample::select(operator_tags()).prop_flat_map(move |tag| {
            let (lo, hi) = match tag.arity() {
                Arity::Exactly(n) => (n, n),
                Arity::AtLeast(n) => (n, n + 1),
            };
            prop::collection::vec(inner.clone(), lo..=hi).prop_map(move |children| {
                let kind = match tag {
                    NodeTag::FuncApply => NodeKind::FuncApply("f".into()),
                    t => NodeKind::operator(t).expect("operator tag"),
                };
                Formula::new(kind, children).expect("arity respected")
            })
        })
    })
}

/// A rule's left-hand side with random subtrees in place of its variables.
pub fn instance_of(lhs: &Formula, vars: &autoderive::pattern::PatternVarSet, fill: &[Formula]) -> Formula {
    let mut next = 0;
    fn go(t: &Formula, vars: &autoderive::pattern::PatternVarSet, fill: &[Formula], next: &mut usize) -> Formula {
        if t.sym_name().is_some_and(|n| vars.contains(n)) {
            *next += 1;
            return fill[(*next - 1) % fill.len()].clone();
        }
        Formula::new(t.kind().clone(), t.children().iter().map(|c| go(c, vars, fill, next)).collect()).unwrap()
    }
    go(lhs, vars, fill, &mut next)
}
