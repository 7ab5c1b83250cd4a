use std::collections::BTreeMap;

use crate::encoding::FeatureVector;

use super::RlError;

/// State-action values keyed by the exact feature vector. Unseen states read
/// as all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: BTreeMap<FeatureVector, Vec<f64>>,
    n_actions: usize,
    gamma: f64,
    alpha: f64,
}

impl QTable {
    /// `gamma` must lie in [0, 1) and `alpha` in (0, 1].
    pub fn new(n_actions: usize, gamma: f64, alpha: f64) -> Result<QTable, RlError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(RlError::Hyperparameter(format!("gamma={gamma} outside [0,1)")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RlError::Hyperparameter(format!("alpha={alpha} outside (0,1]")));
        }
        Ok(QTable {
            entries: BTreeMap::new(),
            n_actions,
            gamma,
            alpha,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, state: &FeatureVector) -> bool {
        self.entries.contains_key(state)
    }

    pub fn values(&self, state: &FeatureVector) -> Vec<f64> {
        self.entries
            .get(state)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn get(&self, state: &FeatureVector, action: usize) -> f64 {
        self.entries.get(state).map_or(0.0, |v| v[action])
    }

    pub fn max_value(&self, state: &FeatureVector) -> f64 {
        self.entries
            .get(state)
            .map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn states(&self) -> impl Iterator<Item = (&FeatureVector, &[f64])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// One backup: `Q(s,a) ← (1−α)·Q(s,a) + α·(r + γ·max_a' Q(s',a'))`.
    /// `next = None` marks a terminal transition, whose successor value is 0.
    /// Returns the new `Q(s,a)`.
    pub fn q_update(
        &mut self,
        state: &FeatureVector,
        action: usize,
        reward: f64,
        next: Option<&FeatureVector>,
    ) -> Result<f64, RlError> {
        if action >= self.n_actions {
            return Err(RlError::ActionOutOfRange {
                action,
                n_actions: self.n_actions,
            });
        }
        let future = next.map_or(0.0, |s| self.max_value(s));
        let target = reward + self.gamma * future;
        let alpha = self.alpha;
        let n = self.n_actions;
        let row = self.entries.entry(state.clone()).or_insert_with(|| vec![0.0; n]);
        row[action] = (1.0 - alpha) * row[action] + alpha * target;
        Ok(row[action])
    }

    /// `state : values` per line after a parameter header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# qtable actions={} gamma={} alpha={}\n",
            self.n_actions, self.gamma, self.alpha
        );
        for (state, values) in &self.entries {
            let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{state} : {}\n", vals.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QTable, RlError> {
        let bad = |m: String| RlError::Checkpoint(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty q-table file".into()))?;
        let mut params = BTreeMap::new();
        for field in header
            .strip_prefix("# qtable")
            .ok_or_else(|| bad(format!("bad header `{header}`")))?
            .split_whitespace()
        {
            let (k, v) = field.split_once('=').ok_or_else(|| bad(format!("bad field `{field}`")))?;
            params.insert(k, v);
        }
        let get = |k: &str| params.get(k).ok_or_else(|| bad(format!("header lacks {k}")));
        let n_actions: usize = get("actions")?.parse().map_err(|_| bad("actions".into()))?;
        let gamma: f64 = get("gamma")?.parse().map_err(|_| bad("gamma".into()))?;
        let alpha: f64 = get("alpha")?.parse().map_err(|_| bad("alpha".into()))?;
        let mut table = QTable::new(n_actions, gamma, alpha)?;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (state, values) = line.split_once(':').ok_or_else(|| bad(format!("bad row `{line}`")))?;
            let state: FeatureVector = state.parse().map_err(|e| bad(format!("{e}")))?;
            let values = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad(format!("bad values in `{line}`")))?;
            if values.len() != n_actions {
                return Err(bad(format!("row has {} values, expected {n_actions}", values.len())));
            }
            table.entries.insert(state, values);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[u32]) -> FeatureVector {
        FeatureVector::from_values(v.to_vec())
    }

    #[test]
    fn literal_backups() {
        let mut q = QTable::new(2, 0.9, 1.0).unwrap();
        let (s0, s1, goal) = (fv(&[1, 0]), fv(&[2, 0]), fv(&[3, 0]));
        assert_eq!(q.q_update(&s1, 0, 1.0, Some(&goal)).unwrap(), 1.0);
        let v = q.q_update(&s0, 1, 0.0, Some(&s1)).unwrap();
        assert!((v - 0.9).abs() < 1e-15);
        assert!(!q.contains(&goal));
    }

    #[test]
    fn terminal_backup_ignores_successor() {
        let mut q = QTable::new(1, 0.5, 1.0).unwrap();
        assert_eq!(q.q_update(&fv(&[1]), 0, -1.0, None).unwrap(), -1.0);
    }

    #[test]
    fn learning_rate_blends() {
        let mut q = QTable::new(1, 0.0, 0.5).unwrap();
        let s = fv(&[4]);
        q.q_update(&s, 0, 1.0, None).unwrap();
        assert_eq!(q.get(&s, 0), 0.5);
        q.q_update(&s, 0, 1.0, None).unwrap();
        assert_eq!(q.get(&s, 0), 0.75);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(QTable::new(2, 1.0, 0.5).is_err());
        assert!(QTable::new(2, 0.9, 0.0).is_err());
        let mut q = QTable::new(2, 0.9, 0.5).unwrap();
        assert!(matches!(q.q_update(&fv(&[0]), 2, 0.0, None), Err(RlError::ActionOutOfRange { .. })));
    }

    #[test]
    fn text_round_trip() {
        let mut q = QTable::new(3, 0.9, 0.5).unwrap();
        q.q_update(&fv(&[4, 1, 0]), 2, 0.37, None).unwrap();
        q.q_update(&fv(&[4, 3, 0]), 0, -1.0 / 3.0, Some(&fv(&[4, 1, 0]))).unwrap();
        let text = q.to_text();
        assert!(text.lines().nth(1).unwrap().contains(" : "));
        assert_eq!(QTable::from_text(&text).unwrap(), q);
    }
}
