use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::derivation::{DerivationEnv, DerivationError, GoalSpec, Outcome};
use crate::encoding::{FeatureVector, SymbolTable};
use crate::expr::Formula;
use crate::par::Execution;
use crate::rewrite::RuleSet;

use super::{select_action, ActionScorer, QTable, Rewards, SelectMode};

/// A start formula paired with the goal an episode must reach.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub start: Formula,
    pub goal: GoalSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnConfig {
    pub episodes: usize,
    /// Exploration probability of the epsilon-greedy behavior policy.
    pub epsilon: f64,
    /// Episodes generated against one frozen copy of the table before their
    /// updates are applied. A batch of 1 is plain online Q-learning.
    pub batch: usize,
    pub seed: u64,
    pub step_cap: usize,
    pub exec: Execution,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        QLearnConfig {
            episodes: 1000,
            epsilon: 0.1,
            batch: 1,
            seed: 0,
            step_cap: crate::derivation::DEFAULT_STEP_CAP,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QLearnStats {
    pub episodes: usize,
    pub reached: usize,
    pub dead_ends: usize,
    pub capped: usize,
    pub updates: usize,
}

struct Transition {
    state: FeatureVector,
    action: usize,
    reward: f64,
    /// `None` for transitions into a terminal state.
    next: Option<FeatureVector>,
}

/// Everything an episode reads but does not own.
struct Shared<'a> {
    snapshot: &'a QTable,
    behavior: Option<&'a (dyn ActionScorer + Sync)>,
    rules: &'a RuleSet,
    table: &'a SymbolTable,
    rewards: Rewards,
    cfg: &'a QLearnConfig,
}

fn run_episode(sh: &Shared<'_>, task: &Task, episode: usize) -> Result<(Vec<Transition>, Outcome), DerivationError> {
    let (snapshot, behavior, cfg) = (sh.snapshot, sh.behavior, sh.cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(episode as u64);
    let mut env = DerivationEnv::new(task.start.clone(), task.goal.clone(), sh.rules, sh.table)?
        .with_step_cap(cfg.step_cap)
        .with_rewards(sh.rewards);
    let everything = vec![true; sh.rules.len()];
    let mut transitions = Vec::new();
    while !env.done() {
        let state = env.state().clone();
        let values = match behavior {
            Some(b) if !snapshot.contains(&state) => b.scores(&state),
            _ => snapshot.values(&state),
        };
        let action = select_action(&values, &everything, SelectMode::Epsilon(cfg.epsilon), &mut rng)?;
        let result = env.step(action)?;
        let terminal = matches!(env.outcome(), Some(Outcome::Reached | Outcome::DeadEnd));
        transitions.push(Transition {
            state,
            action,
            reward: result.reward,
            next: (!terminal).then_some(result.state),
        });
    }
    Ok((transitions, env.outcome().expect("episode finished")))
}

/// Epsilon-greedy Q-learning over `tasks`, cycling through them in order.
///
/// Episode `i` draws from its own random stream, so a run depends only on the
/// seed and the batch size, never on the execution mode. When `behavior` is
/// given it scores states the table has not seen yet.
pub fn q_learn(
    qt: &mut QTable,
    tasks: &[Task],
    rules: &RuleSet,
    table: &SymbolTable,
    rewards: Rewards,
    cfg: &QLearnConfig,
    behavior: Option<&(dyn ActionScorer + Sync)>,
) -> Result<QLearnStats, DerivationError> {
    if tasks.is_empty() || cfg.episodes == 0 {
        return Ok(QLearnStats::default());
    }
    let batch = cfg.batch.max(1);
    let mut stats = QLearnStats::default();
    let mut done = 0;
    while done < cfg.episodes {
        let n = batch.min(cfg.episodes - done);
        let snapshot = qt.clone();
        let shared = Shared {
            snapshot: &snapshot,
            behavior,
            rules,
            table,
            rewards,
            cfg,
        };
        let episodes = cfg.exec.map_range(n, |k| {
            let idx = done + k;
            run_episode(&shared, &tasks[idx % tasks.len()], idx)
        });
        for episode in episodes {
            let (transitions, outcome) = episode?;
            for t in &transitions {
                qt.q_update(&t.state, t.action, t.reward, t.next.as_ref())?;
            }
            stats.updates += transitions.len();
            match outcome {
                Outcome::Reached => stats.reached += 1,
                Outcome::DeadEnd => stats.dead_ends += 1,
                Outcome::CapExceeded => stats.capped += 1,
            }
        }
        stats.episodes += n;
        done += n;
    }
    Ok(stats)
}
