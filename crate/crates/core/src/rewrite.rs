//! Template-pair rewrite rules and their application.
//!
//! A rule `lhs ⇒ rhs` is applied by matching `lhs` at a site, substituting the
//! binding into a copy of `rhs`, and grafting the result back at that site.
//! Rules are directed; an inverse is a separate rule.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{self, ExprError, Formula, Path};
use crate::pattern::{self, PatternVarSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("rule `{rule}` does not apply{}", site.as_ref().map(|s| format!(" at {s}")).unwrap_or_default())]
    NotApplicable { rule: String, site: Option<Path> },
    #[error("rule id `{0}` is already registered")]
    DuplicateId(String),
    #[error("rule id `{0}` is invalid")]
    InvalidId(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{0}` rewrites a template to itself")]
    DegenerateRule(String),
    #[error("rule `{rule}` has pattern variable `{var}` on the right side only")]
    FreeRhsVariable { rule: String, var: String },
    #[error("derivation script for `{id}` does not reproduce its right side: {reason}")]
    ValidationFailed { id: String, reason: String },
    #[error("rule file line {line}: {message}")]
    RuleFile { line: usize, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// How a rule entered a rule set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Axiom,
    /// Derived: replaying these rule ids from the lhs reproduces the rhs.
    Script(Vec<String>),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Axiom => f.write_str("axiom"),
            Provenance::Script(ids) => write!(f, "script:{}", ids.join(",")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    id: String,
    lhs: Formula,
    rhs: Formula,
    vars: PatternVarSet,
    provenance: Provenance,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Rule {
    /// Builds an axiom rule. Every pattern variable used by `rhs` must also
    /// occur in `lhs`.
    pub fn new(
        id: impl Into<String>,
        lhs: Formula,
        rhs: Formula,
        vars: PatternVarSet,
    ) -> Result<Rule, RewriteError> {
        let id = id.into();
        if !valid_id(&id) {
            return Err(RewriteError::InvalidId(id));
        }
        let in_lhs = vars.occurring_in(&lhs);
        if let Some(var) = vars.occurring_in(&rhs).iter().find(|v| !in_lhs.contains(v)) {
            return Err(RewriteError::FreeRhsVariable {
                rule: id,
                var: var.to_string(),
            });
        }
        Ok(Rule {
            id,
            lhs,
            rhs,
            vars,
            provenance: Provenance::Axiom,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lhs(&self) -> &Formula {
        &self.lhs
    }

    pub fn rhs(&self) -> &Formula {
        &self.rhs
    }

    pub fn vars(&self) -> &PatternVarSet {
        &self.vars
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The same template pair with sides swapped.
    pub fn inverse(&self, id: impl Into<String>) -> Result<Rule, RewriteError> {
        Rule::new(id, self.rhs.clone(), self.lhs.clone(), self.vars.clone())
    }

    pub fn find_site(&self, f: &Formula) -> Option<Path> {
        pattern::find_first(f, &self.lhs, &self.vars).map(|m| m.site)
    }

    pub fn is_applicable(&self, f: &Formula) -> bool {
        pattern::find_first(f, &self.lhs, &self.vars).is_some()
    }

    fn to_line(&self) -> String {
        format!(
            "{} | {} | {} | {} | {}",
            self.id, self.lhs, self.rhs, self.vars, self.provenance
        )
    }
}

/// Rewrites `f` at `site` with `rule`.
pub fn apply_rule_at(f: &Formula, rule: &Rule, site: &Path) -> Result<Formula, RewriteError> {
    let binding = pattern::match_at(f, site, &rule.lhs, &rule.vars)?.ok_or_else(|| {
        RewriteError::NotApplicable {
            rule: rule.id.clone(),
            site: Some(site.clone()),
        }
    })?;
    Ok(f.replace_at(site, binding.substitute(&rule.rhs))?)
}

/// Rewrites `f` at the first pre-order site where `rule` matches.
pub fn apply_rule_first(f: &Formula, rule: &Rule) -> Result<(Formula, Path), RewriteError> {
    let m = pattern::find_first(f, &rule.lhs, &rule.vars).ok_or_else(|| {
        RewriteError::NotApplicable {
            rule: rule.id.clone(),
            site: None,
        }
    })?;
    let out = f.replace_at(&m.site, m.binding.substitute(&rule.rhs))?;
    Ok((out, m.site))
}

/// Ordered rules; a rule's position is its action index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new() -> Self {
        RuleSet::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }

    pub fn by_id(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    /// Appends an axiom rule.
    pub fn push(&mut self, rule: Rule) -> Result<usize, RewriteError> {
        if self.index_of(&rule.id).is_some() {
            return Err(RewriteError::DuplicateId(rule.id));
        }
        if rule.lhs == rule.rhs {
            return Err(RewriteError::DegenerateRule(rule.id));
        }
        self.rules.push(rule);
        Ok(self.rules.len() - 1)
    }

    /// Registers `before ⇒ after` as a new template pair at the end of the
    /// action order. A scripted rule is accepted only if replaying its rule
    /// ids from `before` reproduces `after`.
    pub fn register_derived_rule(
        &self,
        before: Formula,
        after: Formula,
        vars: PatternVarSet,
        id: &str,
        provenance: Provenance,
    ) -> Result<RuleSet, RewriteError> {
        let mut next = self.clone();
        next.register(before, after, vars, id, provenance)?;
        Ok(next)
    }

    /// In-place form of [`RuleSet::register_derived_rule`].
    pub fn register(
        &mut self,
        before: Formula,
        after: Formula,
        vars: PatternVarSet,
        id: &str,
        provenance: Provenance,
    ) -> Result<usize, RewriteError> {
        if self.index_of(id).is_some() {
            return Err(RewriteError::DuplicateId(id.to_string()));
        }
        if let Provenance::Script(script) = &provenance {
            self.replay(id, &before, &after, script)?;
        }
        let mut rule = Rule::new(id, before, after, vars)?;
        rule.provenance = provenance;
        self.push(rule)
    }

    fn replay(&self, id: &str, before: &Formula, after: &Formula, script: &[String]) -> Result<(), RewriteError> {
        let fail = |reason: String| RewriteError::ValidationFailed {
            id: id.to_string(),
            reason,
        };
        if script.is_empty() {
            return Err(fail("empty script".into()));
        }
        let mut current = before.clone();
        for step in script {
            let rule = self
                .by_id(step)
                .ok_or_else(|| fail(format!("unknown rule `{step}`")))?;
            current = apply_rule_first(&current, rule)
                .map_err(|_| fail(format!("`{step}` does not apply to {current}")))?
                .0;
        }
        if &current != after {
            return Err(fail(format!("replay ends at {current}")));
        }
        Ok(())
    }

    /// Rules with the given ids, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<RuleSet, RewriteError> {
        let rules = ids
            .iter()
            .map(|id| {
                self.by_id(id)
                    .cloned()
                    .ok_or_else(|| RewriteError::UnknownRule(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RuleSet { rules })
    }

    /// Indices of the rules that match somewhere in `f`.
    pub fn applicable_mask(&self, f: &Formula) -> Vec<bool> {
        self.rules.iter().map(|r| r.is_applicable(f)).collect()
    }

    /// Rule file text: one `id | lhs | rhs | vars | provenance` record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.to_line());
            out.push('\n');
        }
        out
    }

    /// Short digest of the canonical rule text; ties checkpoints to the
    /// action order they were trained with.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Reads a rule file. `#` starts a comment line; blank lines are skipped.
    /// Scripted rules are validated against the rules above them.
    pub fn from_text(text: &str) -> Result<RuleSet, RewriteError> {
        let mut set = RuleSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RewriteError::RuleFile {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            let [id, lhs, rhs, vars, provenance] = fields[..] else {
                return Err(err(format!("expected 5 `|`-separated fields, got {}", fields.len())));
            };
            let lhs = expr::parse(lhs).map_err(|e| err(format!("lhs: {e}")))?;
            let rhs = expr::parse(rhs).map_err(|e| err(format!("rhs: {e}")))?;
            let vars: PatternVarSet = vars
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .collect();
            if let Some(bad) = vars.iter().find(|v| !expr::is_valid_name(v)) {
                return Err(err(format!("invalid pattern variable `{bad}`")));
            }
            let provenance = match provenance {
                "axiom" => Provenance::Axiom,
                other => match other.strip_prefix("script:") {
                    Some(ids) => Provenance::Script(
                        ids.split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect(),
                    ),
                    None => return Err(err(format!("unknown provenance `{other}`"))),
                },
            };
            set.register(lhs, rhs, vars, id, provenance)
                .map_err(|e| match e {
                    RewriteError::RuleFile { .. } => e,
                    other => err(other.to_string()),
                })?;
        }
        Ok(set)
    }
}

/// Base rules for first-order linear ODE derivations.
pub const ODE_RULES: &str = include_str!("../rules/ode.rules");

/// Single-equation algebra rules used by the worked examples.
pub const TEXTBOOK_RULES: &str = include_str!("../rules/textbook.rules");

pub fn ode_rules() -> RuleSet {
    RuleSet::from_text(ODE_RULES).expect("packaged ODE rules are valid")
}

pub fn textbook_rules() -> RuleSet {
    RuleSet::from_text(TEXTBOOK_RULES).expect("packaged textbook rules are valid")
}
