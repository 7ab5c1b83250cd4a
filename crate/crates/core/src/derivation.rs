//! Derivation environment and search drivers.
//!
//! A state is the current formula; an action is a rule index, always applied
//! at the rule's first pre-order match site.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::encoding::{EncodingError, FeatureVector, SymbolTable};
use crate::expr::{self, ExprError, Formula, NodeTag, Path};
use crate::pattern::{self, PatternVarSet};
use crate::rewrite::{apply_rule_at, apply_rule_first, RewriteError, RuleSet};
use crate::rl::{select_action, ActionScorer, Rewards, RlError, SelectMode};

pub const DEFAULT_STEP_CAP: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivationError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action {action} out of range for {n_actions} rules")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("no derivation found within {depth_cap} steps")]
    NotFound { depth_cap: usize },
    #[error("pattern goals need at least one pattern variable")]
    GoalWithoutVariables,
    #[error("trace does not replay at step {step}: {reason}")]
    Replay { step: usize, reason: String },
    #[error("trace file: {0}")]
    TraceFormat(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// When a derivation counts as finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalSpec {
    Exact(Formula),
    /// Reached when the template matches at the root.
    Pattern { template: Formula, vars: PatternVarSet },
    /// `var = expr` where `expr` no longer mentions `var` and holds no
    /// integral, differential or derivative.
    Solved { var: String },
}

impl GoalSpec {
    pub fn pattern(template: Formula, vars: PatternVarSet) -> Result<GoalSpec, DerivationError> {
        if vars.is_empty() {
            return Err(DerivationError::GoalWithoutVariables);
        }
        Ok(GoalSpec::Pattern { template, vars })
    }

    /// Pattern goal from constructor text with `?` wildcards, e.g.
    /// `Equal(Sym("N"),?)`.
    pub fn parse_pattern(text: &str) -> Result<GoalSpec, DerivationError> {
        let (template, names) = expr::parse_with_wildcards(text)?;
        GoalSpec::pattern(template, names.into_iter().collect())
    }

    pub fn is_satisfied(&self, f: &Formula) -> bool {
        match self {
            GoalSpec::Exact(target) => f == target,
            GoalSpec::Pattern { template, vars } => pattern::match_here(f, template, vars).is_some(),
            GoalSpec::Solved { var } => {
                let [lhs, rhs] = f.children() else {
                    return false;
                };
                f.tag() == NodeTag::Equal
                    && lhs.sym_name() == Some(var.as_str())
                    && !rhs.contains_sym(var)
                    && ![NodeTag::Integral, NodeTag::Differential, NodeTag::DerivRatio]
                        .iter()
                        .any(|&t| rhs.contains_tag(t))
            }
        }
    }
}

impl fmt::Display for GoalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalSpec::Exact(target) => write!(f, "exact:{target}"),
            GoalSpec::Pattern { template, vars } => write!(f, "pattern:{vars}:{template}"),
            GoalSpec::Solved { var } => write!(f, "solved:{var}"),
        }
    }
}

impl FromStr for GoalSpec {
    type Err = DerivationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("exact:") {
            return Ok(GoalSpec::Exact(expr::parse(rest)?));
        }
        if let Some(rest) = s.strip_prefix("pattern:") {
            let (vars, template) = rest
                .split_once(':')
                .ok_or_else(|| DerivationError::TraceFormat(format!("bad goal `{s}`")))?;
            let vars = vars.split(',').filter(|v| !v.is_empty()).collect();
            return GoalSpec::pattern(expr::parse(template)?, vars);
        }
        if let Some(var) = s.strip_prefix("solved:") {
            if !expr::is_valid_name(var) {
                return Err(DerivationError::TraceFormat(format!("bad variable `{var}`")));
            }
            return Ok(GoalSpec::Solved { var: var.to_string() });
        }
        Err(DerivationError::TraceFormat(format!("unknown goal `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Reached,
    CapExceeded,
    DeadEnd,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Reached => "reached",
            Outcome::CapExceeded => "cap_exceeded",
            Outcome::DeadEnd => "dead_end",
        })
    }
}

impl FromStr for Outcome {
    type Err = DerivationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reached" => Ok(Outcome::Reached),
            "cap_exceeded" => Ok(Outcome::CapExceeded),
            "dead_end" => Ok(Outcome::DeadEnd),
            other => Err(DerivationError::TraceFormat(format!("unknown outcome `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub before: Formula,
    pub rule: String,
    pub site: Path,
    pub after: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTrace {
    pub goal: GoalSpec,
    pub start: Formula,
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
}

impl DerivationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_formula(&self) -> &Formula {
        self.steps.last().map_or(&self.start, |s| &s.after)
    }

    /// Every formula along the derivation, start included.
    pub fn formulas(&self) -> impl Iterator<Item = &Formula> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|s| &s.after))
    }

    /// Re-applies every step and checks the chain links up.
    pub fn replay(&self, rules: &RuleSet) -> Result<(), DerivationError> {
        let mut current = &self.start;
        for (i, step) in self.steps.iter().enumerate() {
            let fail = |reason: String| DerivationError::Replay { step: i, reason };
            if &step.before != current {
                return Err(fail("step does not start where the previous one ended".into()));
            }
            let rule = rules
                .by_id(&step.rule)
                .ok_or_else(|| fail(format!("unknown rule `{}`", step.rule)))?;
            let out = apply_rule_at(&step.before, rule, &step.site).map_err(|e| fail(e.to_string()))?;
            if out != step.after {
                return Err(fail(format!("rewrite gives {out}")));
            }
            current = &step.after;
        }
        if self.outcome == Outcome::Reached && !self.goal.is_satisfied(current) {
            return Err(DerivationError::Replay {
                step: self.steps.len(),
                reason: "outcome is reached but the goal does not hold".into(),
            });
        }
        Ok(())
    }

    /// Header `# goal=… <TAB> outcome=… <TAB> start=…`, then one
    /// `before <TAB> rule <TAB> site <TAB> after` line per step.
    pub fn to_text(&self) -> String {
        let mut out = format!("# goal={}\toutcome={}\tstart={}\n", self.goal, self.outcome, self.start);
        for s in &self.steps {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", s.before, s.rule, s.site, s.after));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<DerivationTrace, DerivationError> {
        let bad = |m: String| DerivationError::TraceFormat(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix("# "))
            .ok_or_else(|| bad("missing header".into()))?;
        let (mut goal, mut outcome, mut start) = (None, None, None);
        for field in header.split('\t') {
            match field.split_once('=') {
                Some(("goal", v)) => goal = Some(v.parse::<GoalSpec>()?),
                Some(("outcome", v)) => outcome = Some(v.parse::<Outcome>()?),
                Some(("start", v)) => start = Some(expr::parse(v)?),
                _ => return Err(bad(format!("bad header field `{field}`"))),
            }
        }
        let mut steps = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            let [before, rule, site, after] = cols[..] else {
                return Err(bad(format!("expected 4 tab-separated columns in `{line}`")));
            };
            steps.push(TraceStep {
                before: expr::parse(before)?,
                rule: rule.to_string(),
                site: site.parse().map_err(|e| bad(format!("{e}")))?,
                after: expr::parse(after)?,
            });
        }
        Ok(DerivationTrace {
            goal: goal.ok_or_else(|| bad("header lacks goal".into()))?,
            start: start.ok_or_else(|| bad("header lacks start".into()))?,
            outcome: outcome.ok_or_else(|| bad("header lacks outcome".into()))?,
            steps,
        })
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: FeatureVector,
    pub reward: f64,
    pub done: bool,
    /// `None` when the chosen rule did not apply.
    pub applied: Option<TraceStep>,
}

/// One derivation episode over a fixed rule set.
#[derive(Debug, Clone)]
pub struct DerivationEnv<'a> {
    rules: &'a RuleSet,
    table: &'a SymbolTable,
    rewards: Rewards,
    goal: GoalSpec,
    start: Formula,
    current: Formula,
    state: FeatureVector,
    seen: HashSet<Formula>,
    step_count: usize,
    step_cap: usize,
    outcome: Option<Outcome>,
}

impl<'a> DerivationEnv<'a> {
    pub fn new(
        start: Formula,
        goal: GoalSpec,
        rules: &'a RuleSet,
        table: &'a SymbolTable,
    ) -> Result<DerivationEnv<'a>, DerivationError> {
        let state = table.encode(&start)?;
        let outcome = if goal.is_satisfied(&start) {
            Some(Outcome::Reached)
        } else if !rules.rules().iter().any(|r| r.is_applicable(&start)) {
            Some(Outcome::DeadEnd)
        } else {
            None
        };
        Ok(DerivationEnv {
            rules,
            table,
            rewards: Rewards::default(),
            goal,
            seen: HashSet::from([start.clone()]),
            current: start.clone(),
            start,
            state,
            step_count: 0,
            step_cap: DEFAULT_STEP_CAP,
            outcome,
        })
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.step_cap = cap;
        if cap == 0 && self.outcome.is_none() {
            self.outcome = Some(Outcome::CapExceeded);
        }
        self
    }

    pub fn with_rewards(mut self, rewards: Rewards) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn current(&self) -> &Formula {
        &self.current
    }

    pub fn state(&self) -> &FeatureVector {
        &self.state
    }

    pub fn goal(&self) -> &GoalSpec {
        &self.goal
    }

    pub fn rules(&self) -> &RuleSet {
        self.rules
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Which actions would rewrite the current formula.
    pub fn mask(&self) -> Vec<bool> {
        self.rules.applicable_mask(&self.current)
    }

    /// Applies rule `action`. An inapplicable rule leaves the state unchanged
    /// and costs the invalid-action reward. Revisiting a formula or reaching
    /// one no rule applies to ends the episode as a dead end.
    pub fn step(&mut self, action: usize) -> Result<StepResult, DerivationError> {
        if self.outcome.is_some() {
            return Err(DerivationError::EpisodeFinished);
        }
        let rule = self.rules.get(action).ok_or(DerivationError::ActionOutOfRange {
            action,
            n_actions: self.rules.len(),
        })?;
        let (next, site) = match apply_rule_first(&self.current, rule) {
            Ok(found) => found,
            Err(RewriteError::NotApplicable { .. }) => {
                self.step_count += 1;
                if self.step_count >= self.step_cap {
                    self.outcome = Some(Outcome::CapExceeded);
                }
                return Ok(StepResult {
                    state: self.state.clone(),
                    reward: self.rewards.invalid,
                    done: self.outcome.is_some(),
                    applied: None,
                });
            }
            Err(other) => unreachable!("first-match application cannot fail otherwise: {other}"),
        };
        let state = self.table.encode(&next)?;
        self.step_count += 1;
        let reward = if self.goal.is_satisfied(&next) {
            self.outcome = Some(Outcome::Reached);
            self.rewards.goal
        } else if self.seen.contains(&next) || !self.rules.rules().iter().any(|r| r.is_applicable(&next)) {
            self.outcome = Some(Outcome::DeadEnd);
            self.rewards.dead_end
        } else {
            if self.step_count >= self.step_cap {
                self.outcome = Some(Outcome::CapExceeded);
            }
            self.rewards.step
        };
        let applied = TraceStep {
            before: std::mem::replace(&mut self.current, next.clone()),
            rule: rule.id().to_string(),
            site,
            after: next.clone(),
        };
        self.seen.insert(next);
        self.state = state.clone();
        Ok(StepResult {
            state,
            reward,
            done: self.outcome.is_some(),
            applied: Some(applied),
        })
    }
}

/// How a rollout chooses actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutMode {
    pub select: SelectMode,
    /// Restrict choices to rules that currently apply.
    pub masked: bool,
}

impl Default for RolloutMode {
    fn default() -> Self {
        RolloutMode {
            select: SelectMode::Greedy,
            masked: true,
        }
    }
}

/// Runs the environment to completion under `scorer`.
pub fn rollout<R: Rng + ?Sized>(
    mut env: DerivationEnv<'_>,
    scorer: &dyn ActionScorer,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<DerivationTrace, DerivationError> {
    let mut steps = Vec::new();
    while !env.done() {
        let mask = if mode.masked {
            env.mask()
        } else {
            vec![true; env.rules().len()]
        };
        let action = match select_action(&scorer.scores(env.state()), &mask, mode.select, rng) {
            Ok(a) => a,
            Err(RlError::NoApplicableAction) => {
                env.outcome = Some(Outcome::DeadEnd);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(step) = env.step(action)?.applied {
            steps.push(step);
        }
    }
    Ok(DerivationTrace {
        goal: env.goal.clone(),
        start: env.start.clone(),
        steps,
        outcome: env.outcome.expect("loop exits only when done"),
    })
}

/// Shortest derivation by breadth-first search over every rule in order.
/// Among equally short derivations the one found first wins, which favors
/// lower rule indices at earlier steps.
pub fn bfs_oracle(
    start: &Formula,
    goal: &GoalSpec,
    rules: &RuleSet,
    depth_cap: usize,
) -> Result<DerivationTrace, DerivationError> {
    struct Node {
        formula: Formula,
        parent: usize,
        rule: usize,
        site: Path,
    }
    let finish = |nodes: &[Node], mut idx: usize| {
        let mut steps = Vec::new();
        while idx != 0 {
            let node = &nodes[idx];
            steps.push(TraceStep {
                before: nodes[node.parent].formula.clone(),
                rule: rules.get(node.rule).expect("rule index").id().to_string(),
                site: node.site.clone(),
                after: node.formula.clone(),
            });
            idx = node.parent;
        }
        steps.reverse();
        DerivationTrace {
            goal: goal.clone(),
            start: start.clone(),
            steps,
            outcome: Outcome::Reached,
        }
    };

    let mut nodes = vec![Node {
        formula: start.clone(),
        parent: 0,
        rule: 0,
        site: Path::root(),
    }];
    if goal.is_satisfied(start) {
        return Ok(finish(&nodes, 0));
    }
    let mut visited = HashSet::from([start.clone()]);
    let mut frontier = VecDeque::from([(0usize, 0usize)]);
    while let Some((idx, depth)) = frontier.pop_front() {
        if depth >= depth_cap {
            continue;
        }
        for (r, rule) in rules.rules().iter().enumerate() {
            let Ok((next, site)) = apply_rule_first(&nodes[idx].formula, rule) else {
                continue;
            };
            if !visited.insert(next.clone()) {
                continue;
            }
            let reached = goal.is_satisfied(&next);
            nodes.push(Node {
                formula: next,
                parent: idx,
                rule: r,
                site,
            });
            let child = nodes.len() - 1;
            if reached {
                return Ok(finish(&nodes, child));
            }
            frontier.push_back((child, depth + 1));
        }
    }
    Err(DerivationError::NotFound { depth_cap })
}
