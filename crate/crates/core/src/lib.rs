//! Formula derivation over multiway expression trees.
//!
//! Formulas are trees of typed nodes ([`expr`]). Rewrite rules are template
//! pairs matched against subtrees ([`pattern`], [`rewrite`]). Trees are
//! flattened into fixed-length code vectors ([`encoding`]) that key a
//! Q-table or feed a small policy network ([`rl`]), which choose the next
//! rule inside a derivation environment ([`derivation`]). [`dataset`]
//! produces labeled first-order ODE derivations for training.

pub mod dataset;
pub mod derivation;
pub mod encoding;
pub mod expr;
pub mod par;
pub mod pattern;
pub mod random;
pub mod rewrite;
pub mod rl;

pub use derivation::{bfs_oracle, rollout, DerivationEnv, DerivationTrace, GoalSpec, Outcome};
pub use encoding::{distance, FeatureVector, SymbolTable};
pub use expr::{parse, Formula, NodeKind, NodeTag, Path};
pub use par::Execution;
pub use pattern::{find_all, find_first, Binding, PatternVarSet};
pub use rewrite::{apply_rule_at, apply_rule_first, Rule, RuleSet};
