//! Subtree search with pattern-variable binding.
//!
//! Matching is purely syntactic: a template leaf `Sym(v)` with `v` in the
//! variable set binds the whole corresponding subtree, and every other node
//! must agree with the formula in kind, payload and arity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::expr::{ExprError, Formula, NodeKind, Path};

/// Symbol names that act as wildcards in a template.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PatternVarSet(BTreeSet<String>);

impl PatternVarSet {
    pub fn new() -> Self {
        PatternVarSet(BTreeSet::new())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn insert(&mut self, name: impl Into<String>) -> bool {
        self.0.insert(name.into())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Variables that occur as leaves of `template`.
    pub fn occurring_in(&self, template: &Formula) -> PatternVarSet {
        let mut out = PatternVarSet::new();
        template.walk(&mut |_, node| {
            if let Some(name) = node.sym_name() {
                if self.contains(name) {
                    out.insert(name);
                }
            }
        });
        out
    }

    pub fn is_subset(&self, other: &PatternVarSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl<S: Into<String>> FromIterator<S> for PatternVarSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        PatternVarSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for PatternVarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, name) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(name)?;
        }
        Ok(())
    }
}

/// Pattern variable to concrete subtree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding(BTreeMap<String, Formula>);

impl Binding {
    pub fn get(&self, var: &str) -> Option<&Formula> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Formula)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Copies `template`, replacing every bound variable leaf with its subtree.
    /// Unbound leaves are kept as literals.
    pub fn substitute(&self, template: &Formula) -> Formula {
        if let Some(bound) = template.sym_name().and_then(|name| self.0.get(name)) {
            return bound.clone();
        }
        if template.children().is_empty() {
            return template.clone();
        }
        let children = template
            .children()
            .iter()
            .map(|c| self.substitute(c))
            .collect();
        Formula::new(template.kind().clone(), children).expect("arity unchanged by substitution")
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (var, value)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{var}={value}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub site: Path,
    pub binding: Binding,
}

fn match_node(node: &Formula, template: &Formula, vars: &PatternVarSet, binding: &mut Binding) -> bool {
    if let NodeKind::Sym(name) = template.kind() {
        if vars.contains(name) {
            return match binding.0.get(name) {
                Some(bound) => bound == node,
                None => {
                    binding.0.insert(name.clone(), node.clone());
                    true
                }
            };
        }
    }
    node.kind() == template.kind()
        && node.children().len() == template.children().len()
        && node
            .children()
            .iter()
            .zip(template.children())
            .all(|(n, t)| match_node(n, t, vars, binding))
}

/// Matches `template` anchored at the root of `node`.
pub fn match_here(node: &Formula, template: &Formula, vars: &PatternVarSet) -> Option<Binding> {
    let mut binding = Binding::default();
    match_node(node, template, vars, &mut binding).then_some(binding)
}

/// Matches `template` anchored at `site` inside `f`.
pub fn match_at(
    f: &Formula,
    site: &Path,
    template: &Formula,
    vars: &PatternVarSet,
) -> Result<Option<Binding>, ExprError> {
    Ok(match_here(f.subtree_at(site)?, template, vars))
}

/// First match in pre-order (root, then children left to right).
pub fn find_first(f: &Formula, template: &Formula, vars: &PatternVarSet) -> Option<Match> {
    fn go(node: &Formula, path: &mut Path, template: &Formula, vars: &PatternVarSet) -> Option<Match> {
        if let Some(binding) = match_here(node, template, vars) {
            return Some(Match {
                site: path.clone(),
                binding,
            });
        }
        for (i, child) in node.children().iter().enumerate() {
            path.0.push(i);
            let found = go(child, path, template, vars);
            path.0.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
    go(f, &mut Path::root(), template, vars)
}

/// Every match, in pre-order.
pub fn find_all(f: &Formula, template: &Formula, vars: &PatternVarSet) -> Vec<Match> {
    let mut out = Vec::new();
    f.walk(&mut |path, node| {
        if let Some(binding) = match_here(node, template, vars) {
            out.push(Match {
                site: path.clone(),
                binding,
            });
        }
    });
    out
}
