//! Seeded random formulas and templates for tests and benchmarks.

use rand::Rng;

use crate::expr::{Arity, Formula, NodeKind, NodeTag};
use crate::pattern::PatternVarSet;

const LEAF_NAMES: [&str; 6] = ["a", "b", "c", "x", "y", "z"];
const NUMERALS: [&str; 4] = ["0", "1", "2", "-1"];

fn random_leaf<R: Rng + ?Sized>(rng: &mut R) -> Formula {
    if rng.random_bool(0.75) {
        Formula::try_sym(LEAF_NAMES[rng.random_range(0..LEAF_NAMES.len())]).expect("valid name")
    } else {
        Formula::try_num(NUMERALS[rng.random_range(0..NUMERALS.len())]).expect("valid numeral")
    }
}

/// A random arity-valid tree of depth at most `max_depth` (a leaf has depth 1).
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, max_depth: usize) -> Formula {
    if max_depth <= 1 || rng.random_bool(0.3) {
        return random_leaf(rng);
    }
    let operators: Vec<NodeTag> = NodeTag::ALL.iter().copied().filter(|t| !t.is_leaf()).collect();
    let tag = operators[rng.random_range(0..operators.len())];
    let (kind, n) = match tag {
        NodeTag::FuncApply => (NodeKind::FuncApply("f".into()), rng.random_range(0..=2)),
        _ => {
            let n = match tag.arity() {
                Arity::Exactly(n) => n,
                Arity::AtLeast(n) => rng.random_range(n..=n + 1),
            };
            (NodeKind::operator(tag).expect("operator tag"), n)
        }
    };
    let children = (0..n).map(|_| random_formula(rng, max_depth - 1)).collect();
    Formula::new(kind, children).expect("arity respected")
}

/// Derives a template from `f` by replacing some subtrees with pattern
/// variables. Equal subtrees may share a variable, which makes the template
/// non-linear. The template always matches `f` at the root.
pub fn random_template<R: Rng + ?Sized>(rng: &mut R, f: &Formula) -> (Formula, PatternVarSet) {
    let mut bound = Vec::new();
    let t = generalize(rng, f, &mut bound, true);
    let vars = bound.iter().map(|(name, _): &(String, Formula)| name.clone()).collect();
    (t, vars)
}

fn generalize<R: Rng + ?Sized>(rng: &mut R, f: &Formula, bound: &mut Vec<(String, Formula)>, root: bool) -> Formula {
    if !root && rng.random_bool(0.35) {
        let name = match bound.iter().find(|(_, g)| g == f) {
            Some((name, _)) if rng.random_bool(0.7) => name.clone(),
            _ => {
                let name = format!("v{}", bound.len());
                bound.push((name.clone(), f.clone()));
                name
            }
        };
        return Formula::try_sym(&name).expect("valid name");
    }
    let children = f.children().iter().map(|c| generalize(rng, c, bound, false)).collect();
    Formula::new(f.kind().clone(), children).expect("same arity")
}
