//! Policy network: encoded formula in, distribution over rules out.
//!
//! One tanh hidden layer followed by a softmax. Trained by full-batch gradient
//! descent on the mean cross-entropy against one-hot expert actions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::FeatureVector;
use crate::par::Execution;

use super::RlError;

pub const DEFAULT_HIDDEN: usize = 64;

const INIT_RANGE: f64 = 0.1;
const CHUNK: usize = 16;
const MIN_STEP: f64 = 1e-12;

/// One derivation step as a supervised example: the encoded formula and the
/// index of the rule the expert applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceSample {
    pub state: FeatureVector,
    pub action: usize,
}

/// Samples with duplicates folded into weights. The weighted mean loss equals
/// the plain mean over the original samples.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    rows: Vec<(FeatureVector, usize, f64)>,
    total: f64,
}

impl TrainingSet {
    pub fn from_samples(samples: &[TraceSample], n_actions: usize) -> Result<TrainingSet, RlError> {
        if samples.is_empty() {
            return Err(RlError::EmptyDataset);
        }
        let mut counts: BTreeMap<(&FeatureVector, usize), f64> = BTreeMap::new();
        for s in samples {
            if s.action >= n_actions {
                return Err(RlError::ActionOutOfRange {
                    action: s.action,
                    n_actions,
                });
            }
            *counts.entry((&s.state, s.action)).or_default() += 1.0;
        }
        let rows = counts
            .into_iter()
            .map(|((state, action), w)| (state.clone(), action, w))
            .collect();
        Ok(TrainingSet {
            rows,
            total: samples.len() as f64,
        })
    }

    /// Number of distinct (state, action) pairs.
    pub fn distinct(&self) -> usize {
        self.rows.len()
    }

    pub fn sample_count(&self) -> usize {
        self.total as usize
    }
}

/// Flat gradient in the same layout as [`PolicyModel::parameters`].
pub type Gradient = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    l_max: usize,
    hidden: usize,
    n_actions: usize,
    input_scale: f64,
    seed: u64,
    rules: String,
    /// hidden × l_max, row-major
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// n_actions × hidden, row-major
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl PolicyModel {
    /// Weights drawn uniformly from [−0.1, 0.1] with a seeded generator.
    pub fn new(l_max: usize, hidden: usize, n_actions: usize, input_scale: f64, seed: u64) -> PolicyModel {
        let mut model = PolicyModel::zeros(l_max, hidden, n_actions, input_scale);
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<f64> = (0..model.param_count())
            .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        model.set_parameters(&params);
        model
    }

    pub fn zeros(l_max: usize, hidden: usize, n_actions: usize, input_scale: f64) -> PolicyModel {
        PolicyModel {
            l_max,
            hidden,
            n_actions,
            input_scale,
            seed: 0,
            rules: String::new(),
            w1: vec![0.0; hidden * l_max],
            b1: vec![0.0; hidden],
            w2: vec![0.0; n_actions * hidden],
            b2: vec![0.0; n_actions],
        }
    }

    /// Records which rule set the action indices refer to.
    pub fn with_rules_fingerprint(mut self, fingerprint: impl Into<String>) -> PolicyModel {
        self.rules = fingerprint.into();
        self
    }

    pub fn rules_fingerprint(&self) -> &str {
        &self.rules
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count");
        let (w1, rest) = params.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    fn input(&self, state: &FeatureVector) -> Vec<f64> {
        assert_eq!(state.len(), self.l_max, "state length does not match model input");
        state.values().iter().map(|&v| v as f64 * self.input_scale).collect()
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.l_max..(j + 1) * self.l_max];
                let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.b1[j];
                z.tanh()
            })
            .collect()
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_actions)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>() + self.b2[k]
            })
            .collect()
    }

    /// Action probabilities for `state`.
    pub fn forward(&self, state: &FeatureVector) -> Vec<f64> {
        let h = self.hidden_layer(&self.input(state));
        softmax(&self.logits(&h))
    }

    pub fn predict(&self, state: &FeatureVector) -> usize {
        let p = self.forward(state);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }

    /// Fraction of samples whose expert action is the model's top choice.
    pub fn accuracy(&self, samples: &[TraceSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples.iter().filter(|s| self.predict(&s.state) == s.action).count();
        hits as f64 / samples.len() as f64
    }

    /// Adds `weight · ∇CE` for one example into `grad`; returns `weight · CE`.
    fn accumulate(&self, state: &FeatureVector, action: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let x = self.input(state);
        let h = self.hidden_layer(&x);
        let z = self.logits(&h);
        let lse = log_sum_exp(&z);
        let loss = lse - z[action];

        let (g_w1, rest) = grad.split_at_mut(self.w1.len());
        let (g_b1, rest) = rest.split_at_mut(self.b1.len());
        let (g_w2, g_b2) = rest.split_at_mut(self.w2.len());

        let mut dh = vec![0.0; self.hidden];
        for k in 0..self.n_actions {
            let p = (z[k] - lse).exp();
            let dz = weight * (p - if k == action { 1.0 } else { 0.0 });
            g_b2[k] += dz;
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            let g_row = &mut g_w2[k * self.hidden..(k + 1) * self.hidden];
            for j in 0..self.hidden {
                g_row[j] += dz * h[j];
                dh[j] += dz * row[j];
            }
        }
        for j in 0..self.hidden {
            let dz1 = dh[j] * (1.0 - h[j] * h[j]);
            g_b1[j] += dz1;
            let g_row = &mut g_w1[j * self.l_max..(j + 1) * self.l_max];
            for (g, xi) in g_row.iter_mut().zip(&x) {
                *g += dz1 * xi;
            }
        }
        weight * loss
    }

    /// Mean cross-entropy over `data` and its gradient. Partial sums are taken
    /// over fixed chunks and combined in chunk order, so the result does not
    /// depend on the execution mode.
    pub fn loss_and_gradient(&self, data: &TrainingSet, exec: Execution) -> (f64, Gradient) {
        let chunks: Vec<&[(FeatureVector, usize, f64)]> = data.rows.chunks(CHUNK).collect();
        let partials = exec.map(&chunks, |_, chunk| {
            let mut grad = vec![0.0; self.param_count()];
            let loss: f64 = chunk
                .iter()
                .map(|(s, a, w)| self.accumulate(s, *a, *w, &mut grad))
                .sum();
            (loss, grad)
        });
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (l, g) in partials {
            loss += l;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        let scale = 1.0 / data.total;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    pub fn loss(&self, data: &TrainingSet, exec: Execution) -> f64 {
        let chunks: Vec<&[(FeatureVector, usize, f64)]> = data.rows.chunks(CHUNK).collect();
        let partials = exec.map(&chunks, |_, chunk| {
            chunk
                .iter()
                .map(|(s, a, w)| {
                    let z = self.logits(&self.hidden_layer(&self.input(s)));
                    w * (log_sum_exp(&z) - z[*a])
                })
                .sum::<f64>()
        });
        partials.into_iter().sum::<f64>() / data.total
    }

    /// Full-batch gradient descent, `θ ← θ − ε·∇L`. A step that would raise
    /// the loss is retried with ε halved, so the returned curve (loss before
    /// the first epoch, then after each epoch) never increases.
    pub fn train(
        &mut self,
        data: &TrainingSet,
        epochs: usize,
        step: f64,
        exec: Execution,
    ) -> Result<Vec<f64>, RlError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(RlError::Hyperparameter(format!("step size {step}")));
        }
        if let Some((_, a, _)) = data.rows.iter().find(|(_, a, _)| *a >= self.n_actions) {
            return Err(RlError::ActionOutOfRange {
                action: *a,
                n_actions: self.n_actions,
            });
        }
        let (mut loss, mut grad) = self.loss_and_gradient(data, exec);
        let mut curve = Vec::with_capacity(epochs + 1);
        curve.push(loss);
        let mut params = self.parameters();
        for _ in 0..epochs {
            let mut lr = step;
            let mut trial = self.clone();
            loop {
                let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
                trial.set_parameters(&candidate);
                let (trial_loss, trial_grad) = trial.loss_and_gradient(data, exec);
                if trial_loss <= loss {
                    params = candidate;
                    loss = trial_loss;
                    grad = trial_grad;
                    break;
                }
                lr *= 0.5;
                if lr < MIN_STEP {
                    break;
                }
            }
            self.set_parameters(&params);
            curve.push(loss);
        }
        Ok(curve)
    }

    /// Checkpoint text: a header then one weight per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("autoderive-policy 1\n");
        out.push_str(&format!("l_max={}\n", self.l_max));
        out.push_str(&format!("actions={}\n", self.n_actions));
        out.push_str(&format!("hidden={}\n", self.hidden));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("rules={}\n", self.rules));
        out.push_str(&format!("input_scale={}\n", self.input_scale));
        out.push_str(&format!("weights={}\n", self.param_count()));
        for w in self.parameters() {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PolicyModel, RlError> {
        let bad = |m: &str| RlError::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("autoderive-policy 1") {
            return Err(bad("not a policy checkpoint"));
        }
        let mut header = BTreeMap::new();
        for line in lines.by_ref() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad("malformed header"))?;
            header.insert(k.to_string(), v.to_string());
            if k == "weights" {
                break;
            }
        }
        let field = |k: &str| header.get(k).ok_or_else(|| RlError::Checkpoint(format!("missing {k}")));
        let num = |k: &str| -> Result<usize, RlError> {
            field(k)?.parse().map_err(|_| RlError::Checkpoint(format!("bad {k}")))
        };
        let mut model = PolicyModel::zeros(
            num("l_max")?,
            num("hidden")?,
            num("actions")?,
            field("input_scale")?.parse().map_err(|_| bad("bad input_scale"))?,
        );
        model.seed = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        model.rules = field("rules")?.clone();
        if num("weights")? != model.param_count() {
            return Err(bad("weight count does not match the layer sizes"));
        }
        let params = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad weight"))?;
        if params.len() != model.param_count() {
            return Err(bad("truncated weight list"));
        }
        model.set_parameters(&params);
        Ok(model)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}
