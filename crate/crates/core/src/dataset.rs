//! Seeded corpus of first-order linear ODE derivations.
//!
//! Instances have the shape `dy/dx + P·y = Q`. Two subfamilies are solvable
//! by the packaged rules: the separable one (constant `P`, constant or zero
//! `Q`) and direct integration (`P = 0`, `Q` one of `a·x`, `a·x^n`, `e^x`,
//! `sin x`). Every instance is labeled by the breadth-first oracle.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::derivation::{bfs_oracle, DerivationError, DerivationTrace, GoalSpec};
use crate::encoding::{EncodingError, SymbolTable};
use crate::expr::build::*;
use crate::expr::{self, ExprError, Formula};
use crate::par::Execution;
use crate::rewrite::RuleSet;
use crate::rl::TraceSample;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid generator setting: {0}")]
    Config(String),
    #[error("rules never used by any trace: {0:?}")]
    Coverage(Vec<String>),
    #[error("corpus file {file}: {message}")]
    Format { file: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// A coefficient: integer literal, named constant, or product of names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coef {
    Int(u32),
    Named(String),
    Product(Vec<String>),
}

impl Coef {
    pub fn to_formula(&self) -> Formula {
        match self {
            Coef::Int(n) => num(&n.to_string()),
            Coef::Named(name) => sym(name),
            Coef::Product(names) => names
                .iter()
                .rev()
                .map(|n| sym(n))
                .reduce(|acc, f| times(f, acc))
                .expect("non-empty product"),
        }
    }
}

/// Members of the coefficient-function family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilyMember {
    Zero,
    Const(Coef),
    /// `a·x`
    Linear(Coef),
    /// `a·x^n`, `2 ≤ n`
    Monomial(Coef, u32),
    ExpX,
    SinX,
}

impl FamilyMember {
    pub fn to_formula(&self, x: &Formula) -> Formula {
        match self {
            FamilyMember::Zero => num("0"),
            FamilyMember::Const(c) => c.to_formula(),
            FamilyMember::Linear(c) => times(c.to_formula(), x.clone()),
            FamilyMember::Monomial(c, n) => times(c.to_formula(), power(x.clone(), num(&n.to_string()))),
            FamilyMember::ExpX => exp(x.clone()),
            FamilyMember::SinX => sin(x.clone()),
        }
    }
}

/// How `dy/dx` is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notation {
    /// `DerivRatio(y, x)`
    Ratio,
    /// `Divide(Der(y), Der(x))`
    Quotient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdeInstance {
    pub y: String,
    pub x: String,
    pub p: FamilyMember,
    pub q: FamilyMember,
    pub notation: Notation,
    pub form: Formula,
}

impl OdeInstance {
    pub fn new(y: &str, x: &str, p: FamilyMember, q: FamilyMember, notation: Notation) -> OdeInstance {
        let (ys, xs) = (sym(y), sym(x));
        let d = match notation {
            Notation::Ratio => deriv_ratio(ys.clone(), xs.clone()),
            Notation::Quotient => divide(der(ys.clone()), der(xs.clone())),
        };
        let lhs = match &p {
            FamilyMember::Zero => d,
            p => plus(d, times(p.to_formula(&xs), ys)),
        };
        let form = equal(lhs, q.to_formula(&xs));
        OdeInstance {
            y: y.into(),
            x: x.into(),
            p,
            q,
            notation,
            form,
        }
    }

    pub fn goal(&self) -> GoalSpec {
        GoalSpec::Solved { var: self.y.clone() }
    }
}

/// `dN/dt + λN = γΣφ`.
pub fn pm149() -> OdeInstance {
    OdeInstance::new(
        "N",
        "t",
        FamilyMember::Const(Coef::Named("lambda".into())),
        FamilyMember::Const(Coef::Product(vec!["gamma".into(), "Sigma".into(), "phi".into()])),
        Notation::Ratio,
    )
}

/// `dN/dt = γΣφ − λN`, the equation as usually written.
pub fn pm149_rearranged() -> Formula {
    equal(
        deriv_ratio(sym("N"), sym("t")),
        minus(times(sym("gamma"), times(sym("Sigma"), sym("phi"))), times(sym("lambda"), sym("N"))),
    )
}

/// `∫ 1/(γΣφ − λN) dN = t`.
pub fn pm149_milestone() -> Formula {
    equal(
        integral(
            divide(
                num("1"),
                minus(times(sym("gamma"), times(sym("Sigma"), sym("phi"))), times(sym("lambda"), sym("N"))),
            ),
            sym("N"),
        ),
        sym("t"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub count: usize,
    pub max_degree: u32,
    /// Integer coefficients are drawn from `1..=coef_max`.
    pub coef_max: u32,
    pub seed: u64,
    pub separable_fraction: f64,
    pub quotient_fraction: f64,
    /// Only `dy/dx + a·y = b` with constant coefficients.
    pub constants_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            count: 500,
            max_degree: 4,
            coef_max: 5,
            seed: 0,
            separable_fraction: 0.6,
            quotient_fraction: 0.25,
            constants_only: false,
        }
    }
}

const VARIABLES: [(&str, &str); 4] = [("y", "x"), ("N", "t"), ("u", "s"), ("c", "t")];
const CONSTANT_NAMES: [&str; 6] = ["a", "b", "k", "lambda", "mu", "gamma"];
const PRODUCT_NAMES: [&str; 4] = ["gamma", "Sigma", "phi", "sigma"];

fn draw_coef<R: Rng>(rng: &mut R, coef_max: u32) -> Coef {
    match rng.random_range(0..10) {
        0..=4 => Coef::Int(rng.random_range(1..=coef_max)),
        5..=8 => Coef::Named(CONSTANT_NAMES[rng.random_range(0..CONSTANT_NAMES.len())].into()),
        _ => {
            let k = rng.random_range(2..=3);
            Coef::Product(PRODUCT_NAMES[..k].iter().map(|s| s.to_string()).collect())
        }
    }
}

fn draw_instance(cfg: &GenConfig, index: usize) -> OdeInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let (y, x) = VARIABLES[rng.random_range(0..VARIABLES.len())];
    let notation = if rng.random_bool(cfg.quotient_fraction) {
        Notation::Quotient
    } else {
        Notation::Ratio
    };
    if cfg.constants_only || rng.random_bool(cfg.separable_fraction) {
        let p = FamilyMember::Const(draw_coef(&mut rng, cfg.coef_max));
        let q = if !cfg.constants_only && rng.random_bool(0.1) {
            FamilyMember::Zero
        } else {
            FamilyMember::Const(draw_coef(&mut rng, cfg.coef_max))
        };
        return OdeInstance::new(y, x, p, q, notation);
    }
    let shapes = 3 + usize::from(cfg.max_degree >= 2);
    let q = match rng.random_range(0..shapes) {
        0 => FamilyMember::Linear(draw_coef(&mut rng, cfg.coef_max)),
        1 => FamilyMember::ExpX,
        2 => FamilyMember::SinX,
        _ => FamilyMember::Monomial(draw_coef(&mut rng, cfg.coef_max), rng.random_range(2..=cfg.max_degree)),
    };
    OdeInstance::new(y, x, FamilyMember::Zero, q, notation)
}

/// Draws `cfg.count` instances. Instance `i` depends only on the seed and `i`.
pub fn gen_instances(cfg: &GenConfig) -> Result<Vec<OdeInstance>, DatasetError> {
    if cfg.count == 0 {
        return Err(DatasetError::Config("count must be at least 1".into()));
    }
    if cfg.max_degree > 4 {
        return Err(DatasetError::Config(format!("max_degree {} exceeds 4", cfg.max_degree)));
    }
    if cfg.coef_max == 0 {
        return Err(DatasetError::Config("coef_max must be at least 1".into()));
    }
    for (name, v) in [("separable_fraction", cfg.separable_fraction), ("quotient_fraction", cfg.quotient_fraction)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(DatasetError::Config(format!("{name}={v} outside [0,1]")));
        }
    }
    Ok((0..cfg.count).map(|i| draw_instance(cfg, i)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub depth_cap: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub exec: Execution,
    /// Fail unless every rule appears in some trace.
    pub require_coverage: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            depth_cap: 12,
            test_fraction: 0.2,
            seed: 0,
            exec: Execution::default(),
            require_coverage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    /// Position in the generated instance list.
    pub index: usize,
    pub instance: Formula,
    pub trace: DerivationTrace,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub entries: Vec<CorpusEntry>,
    /// Indices of instances the oracle could not solve.
    pub dropped: Vec<usize>,
}

/// Labels every instance with a shortest derivation and assigns splits.
pub fn gen_traces(instances: &[OdeInstance], rules: &RuleSet, cfg: &TraceConfig) -> Result<Corpus, DatasetError> {
    if !(0.0..=1.0).contains(&cfg.test_fraction) {
        return Err(DatasetError::Config(format!("test_fraction={} outside [0,1]", cfg.test_fraction)));
    }
    let found = cfg
        .exec
        .map(instances, |_, inst| bfs_oracle(&inst.form, &inst.goal(), rules, cfg.depth_cap));
    let mut entries = Vec::new();
    let mut dropped = Vec::new();
    for (index, (inst, result)) in instances.iter().zip(found).enumerate() {
        match result {
            Ok(trace) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(index as u64);
                let split = if rng.random_bool(cfg.test_fraction) {
                    Split::Test
                } else {
                    Split::Train
                };
                entries.push(CorpusEntry {
                    index,
                    instance: inst.form.clone(),
                    trace,
                    split,
                });
            }
            Err(DerivationError::NotFound { .. }) => {
                log::warn!("instance {index} has no derivation within {} steps: {}", cfg.depth_cap, inst.form);
                dropped.push(index);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let corpus = Corpus {
        seed: cfg.seed,
        entries,
        dropped,
    };
    if cfg.require_coverage {
        let gaps = corpus.coverage_gaps(rules);
        if !gaps.is_empty() {
            return Err(DatasetError::Coverage(gaps));
        }
    }
    Ok(corpus)
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One sample per derivation step of every trace in `split`.
    pub fn samples(&self, split: Split, rules: &RuleSet, table: &SymbolTable) -> Result<Vec<TraceSample>, DatasetError> {
        let mut out = Vec::new();
        for entry in self.entries.iter().filter(|e| e.split == split) {
            for step in &entry.trace.steps {
                let action = rules.index_of(&step.rule).ok_or_else(|| DatasetError::Format {
                    file: format!("trace {}", entry.index),
                    message: format!("rule `{}` is not in the rule set", step.rule),
                })?;
                out.push(TraceSample {
                    state: table.encode(&step.before)?,
                    action,
                });
            }
        }
        Ok(out)
    }

    /// Rule ids that no trace uses.
    pub fn coverage_gaps(&self, rules: &RuleSet) -> Vec<String> {
        let used: BTreeSet<&str> = self
            .entries
            .iter()
            .flat_map(|e| e.trace.steps.iter().map(|s| s.rule.as_str()))
            .collect();
        rules
            .rules()
            .iter()
            .map(|r| r.id())
            .filter(|id| !used.contains(id))
            .map(str::to_string)
            .collect()
    }

    /// Writes `instances.txt`, `traces/NNNNN.trace`, `split.txt` and `seed.txt`.
    pub fn write_dir(&self, dir: &FsPath) -> Result<(), DatasetError> {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces)?;
        let mut instances = String::new();
        let mut split = String::new();
        for e in &self.entries {
            instances.push_str(&format!("{}\t{}\n", e.index, e.instance));
            split.push_str(&format!("{}\t{}\n", e.index, e.split));
            fs::write(traces.join(format!("{:05}.trace", e.index)), e.trace.to_text())?;
        }
        fs::write(dir.join("instances.txt"), instances)?;
        fs::write(dir.join("split.txt"), split)?;
        let dropped: Vec<String> = self.dropped.iter().map(usize::to_string).collect();
        fs::write(dir.join("seed.txt"), format!("{}\ndropped={}\n", self.seed, dropped.join(",")))?;
        Ok(())
    }

    pub fn read_dir(dir: &FsPath) -> Result<Corpus, DatasetError> {
        let bad = |file: &str, message: String| DatasetError::Format {
            file: file.into(),
            message,
        };
        let seed_text = fs::read_to_string(dir.join("seed.txt"))?;
        let mut seed_lines = seed_text.lines();
        let seed = seed_lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| bad("seed.txt", "missing seed".into()))?;
        let dropped = match seed_lines.next().and_then(|l| l.strip_prefix("dropped=")) {
            Some("") | None => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| s.parse().map_err(|_| bad("seed.txt", format!("bad index `{s}`"))))
                .collect::<Result<_, _>>()?,
        };

        let split_text = fs::read_to_string(dir.join("split.txt"))?;
        let mut splits = std::collections::BTreeMap::new();
        for line in split_text.lines().filter(|l| !l.is_empty()) {
            let (idx, s) = line
                .split_once('\t')
                .ok_or_else(|| bad("split.txt", format!("bad line `{line}`")))?;
            let idx: usize = idx.parse().map_err(|_| bad("split.txt", format!("bad index `{idx}`")))?;
            let s = match s {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(bad("split.txt", format!("unknown split `{other}`"))),
            };
            splits.insert(idx, s);
        }

        let inst_text = fs::read_to_string(dir.join("instances.txt"))?;
        let mut entries = Vec::new();
        for line in inst_text.lines().filter(|l| !l.is_empty()) {
            let (idx, form) = line
                .split_once('\t')
                .ok_or_else(|| bad("instances.txt", format!("bad line `{line}`")))?;
            let index: usize = idx.parse().map_err(|_| bad("instances.txt", format!("bad index `{idx}`")))?;
            let name = format!("traces/{index:05}.trace");
            let trace = DerivationTrace::from_text(&fs::read_to_string(dir.join(&name))?)?;
            entries.push(CorpusEntry {
                index,
                instance: expr::parse(form)?,
                trace,
                split: *splits
                    .get(&index)
                    .ok_or_else(|| bad("split.txt", format!("no split for instance {index}")))?,
            });
        }
        Ok(Corpus { seed, entries, dropped })
    }
}
