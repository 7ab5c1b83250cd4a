//! Learning layer: tabular Q-learning over encoded formula states and a
//! supervised policy network over the same features.

mod policy;
mod qlearn;
mod qtable;

use rand::Rng;
use thiserror::Error;

use crate::encoding::FeatureVector;

pub use policy::{Gradient, PolicyModel, TraceSample, TrainingSet, DEFAULT_HIDDEN};
pub use qlearn::{q_learn, QLearnConfig, QLearnStats, Task};
pub use qtable::QTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("no applicable action")]
    NoApplicableAction,
    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("state has {got} features, model expects {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Reward schedule for the derivation environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rewards {
    pub goal: f64,
    pub invalid: f64,
    pub step: f64,
    pub dead_end: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            goal: 1.0,
            invalid: -1.0,
            step: -0.01,
            dead_end: -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectMode {
    Greedy,
    /// Uniform over allowed actions with this probability, greedy otherwise.
    Epsilon(f64),
    /// Draw from the scores renormalized over allowed actions.
    Sample,
}

/// Anything that scores every action for a state: Q-values or probabilities.
pub trait ActionScorer {
    fn scores(&self, state: &FeatureVector) -> Vec<f64>;
}

impl ActionScorer for QTable {
    fn scores(&self, state: &FeatureVector) -> Vec<f64> {
        self.values(state)
    }
}

impl ActionScorer for PolicyModel {
    fn scores(&self, state: &FeatureVector) -> Vec<f64> {
        self.forward(state)
    }
}

/// Q-values where the table has seen the state, policy probabilities elsewhere.
pub struct Hybrid<'a> {
    pub qtable: &'a QTable,
    pub policy: &'a PolicyModel,
}

impl ActionScorer for Hybrid<'_> {
    fn scores(&self, state: &FeatureVector) -> Vec<f64> {
        if self.qtable.contains(state) {
            self.qtable.values(state)
        } else {
            self.policy.forward(state)
        }
    }
}

fn argmax_masked(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Picks an action among those allowed by `mask`. Greedy ties go to the
/// lowest index.
pub fn select_action<R: Rng + ?Sized>(
    values: &[f64],
    mask: &[bool],
    mode: SelectMode,
    rng: &mut R,
) -> Result<usize, RlError> {
    let allowed: Vec<usize> = (0..values.len()).filter(|&i| mask.get(i).copied().unwrap_or(false)).collect();
    if allowed.is_empty() {
        return Err(RlError::NoApplicableAction);
    }
    let pick = match mode {
        SelectMode::Greedy => argmax_masked(values, mask),
        SelectMode::Epsilon(p) => {
            if rng.random::<f64>() < p {
                Some(allowed[rng.random_range(0..allowed.len())])
            } else {
                argmax_masked(values, mask)
            }
        }
        SelectMode::Sample => {
            let total: f64 = allowed.iter().map(|&i| values[i].max(0.0)).sum();
            if total <= 0.0 || !total.is_finite() {
                Some(allowed[rng.random_range(0..allowed.len())])
            } else {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = *allowed.last().expect("non-empty");
                for &i in &allowed {
                    let w = values[i].max(0.0);
                    if u < w {
                        chosen = i;
                        break;
                    }
                    u -= w;
                }
                Some(chosen)
            }
        }
    };
    pick.ok_or(RlError::NoApplicableAction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_picks_max_and_breaks_ties_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[0.1, 0.9, 0.3], &[true; 3], SelectMode::Greedy, &mut rng), Ok(1));
        assert_eq!(select_action(&[0.9, 0.9], &[true; 2], SelectMode::Greedy, &mut rng), Ok(0));
        assert_eq!(
            select_action(&[0.1, 0.9, 0.3], &[true, false, true], SelectMode::Greedy, &mut rng),
            Ok(2)
        );
    }

    #[test]
    fn empty_mask_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [SelectMode::Greedy, SelectMode::Epsilon(0.5), SelectMode::Sample] {
            assert_eq!(
                select_action(&[1.0, 2.0], &[false, false], mode, &mut rng),
                Err(RlError::NoApplicableAction)
            );
        }
    }

    #[test]
    fn masked_argmax_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.random_range(1..12);
            // coarse values so ties actually occur
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            if !mask.iter().any(|&m| m) {
                mask[rng.random_range(0..n)] = true;
            }
            let mut expected = None;
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                if mask[i] && values[i] > best {
                    best = values[i];
                    expected = Some(i);
                }
            }
            let got = select_action(&values, &mask, SelectMode::Greedy, &mut rng).unwrap();
            assert_eq!(Some(got), expected);
        }
    }

    #[test]
    fn exploration_stays_inside_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mask = [false, true, false, true];
        let mut hits = [0usize; 4];
        for _ in 0..2000 {
            let a = select_action(&[5.0, 0.0, 9.0, 1.0], &mask, SelectMode::Epsilon(1.0), &mut rng).unwrap();
            hits[a] += 1;
        }
        assert_eq!(hits[0] + hits[2], 0);
        assert!(hits[1] > 800 && hits[3] > 800);
    }

    #[test]
    fn sampling_follows_renormalized_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let probs = [0.5, 0.1, 0.3, 0.1];
        let mask = [false, true, true, false];
        let mut hits = [0usize; 4];
        let n = 20_000;
        for _ in 0..n {
            hits[select_action(&probs, &mask, SelectMode::Sample, &mut rng).unwrap()] += 1;
        }
        let frac = hits[2] as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
        assert_eq!(hits[0] + hits[3], 0);
    }
}
