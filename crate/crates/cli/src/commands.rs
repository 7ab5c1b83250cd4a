use std::fmt;
use std::fs;
use std::path::Path as FsPath;

use anyhow::{anyhow, Context};
use autoderive::dataset::{gen_instances, gen_traces, Corpus, GenConfig, Split, TraceConfig};
use autoderive::derivation::{bfs_oracle, rollout, DerivationEnv, GoalSpec, Outcome, RolloutMode};
use autoderive::encoding::{distance, SymbolTable};
use autoderive::expr::{self, Formula, Path};
use autoderive::par::Execution;
use autoderive::pattern::{find_all, PatternVarSet};
use autoderive::rewrite::{apply_rule_at, apply_rule_first, ode_rules, RuleSet};
use autoderive::rl::{
    q_learn, ActionScorer, Hybrid, PolicyModel, QLearnConfig, QTable, Rewards, SelectMode, Task, TrainingSet,
    DEFAULT_HIDDEN,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Cli, Command, FormulaArg, Global, GoalArg, Learner, Selection};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Domain(e) => write!(f, "{e:#}"),
            CliError::Internal(e) => write!(f, "internal: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read(path: &FsPath) -> Result<String> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn write(path: &FsPath, text: &str) -> Result<()> {
    Ok(fs::write(path, text).with_context(|| format!("writing {}", path.display()))?)
}

fn parse_formula(text: &str) -> Result<Formula> {
    Ok(expr::parse(text.trim()).context("parsing formula")?)
}

fn load_formula(arg: &FormulaArg) -> Result<Formula> {
    match (&arg.formula, &arg.file) {
        (Some(text), _) => parse_formula(text),
        (None, Some(path)) => parse_formula(&read(path)?),
        (None, None) => Err(usage("give --formula or --file")),
    }
}

fn load_goal(arg: &GoalArg) -> Result<GoalSpec> {
    if let Some(p) = &arg.goal_pattern {
        return Ok(GoalSpec::parse_pattern(p)?);
    }
    if let Some(e) = &arg.goal_exact {
        return Ok(GoalSpec::Exact(parse_formula(e)?));
    }
    if let Some(v) = &arg.goal_solved {
        return Ok(format!("solved:{v}").parse::<GoalSpec>()?);
    }
    Err(usage("give one of --goal-pattern, --goal-exact, --goal-solved"))
}

/// Shared state every command derives from the global flags.
struct Setup {
    rules: RuleSet,
    table: SymbolTable,
    exec: Execution,
}

impl Setup {
    fn new(g: &Global) -> Result<Setup> {
        let rules = match &g.rule_file {
            Some(path) => RuleSet::from_text(&read(path)?)?,
            None => ode_rules(),
        };
        let mut table = match &g.table {
            Some(path) => SymbolTable::from_text(&read(path)?)?,
            None => SymbolTable::default(),
        };
        if let Some(l) = g.l_max {
            table = table.with_l_max(l);
        }
        let exec = if g.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        Ok(Setup { rules, table, exec })
    }

    fn load_policy(&self, path: &FsPath) -> Result<PolicyModel> {
        let model = PolicyModel::from_text(&read(path)?)?;
        if model.rules_fingerprint() != self.rules.fingerprint() {
            return Err(anyhow!(
                "checkpoint {} was trained on rules {} but the loaded rules are {}",
                path.display(),
                model.rules_fingerprint(),
                self.rules.fingerprint()
            )
            .into());
        }
        if model.l_max() != self.table.l_max() {
            return Err(anyhow!("checkpoint expects L_max={}, table has {}", model.l_max(), self.table.l_max()).into());
        }
        Ok(model)
    }

    fn load_qtable(&self, path: &FsPath) -> Result<QTable> {
        let qt = QTable::from_text(&read(path)?)?;
        if qt.n_actions() != self.rules.len() {
            return Err(anyhow!("q-table has {} actions, rule set has {}", qt.n_actions(), self.rules.len()).into());
        }
        Ok(qt)
    }
}

/// Prints `# key=value` lines to stderr.
struct Echo<'a> {
    quiet: bool,
    lines: Vec<(&'a str, String)>,
}

impl<'a> Echo<'a> {
    fn new(g: &Global, setup: &Setup, command: &'a str) -> Echo<'a> {
        let mut e = Echo {
            quiet: g.quiet,
            lines: Vec::new(),
        };
        e.set("command", command);
        e.set(
            "rule_file",
            g.rule_file.as_ref().map_or("<packaged ode rules>".into(), |p| p.display().to_string()),
        );
        e.set("rules_fingerprint", setup.rules.fingerprint());
        e.set("l_max", setup.table.l_max());
        e.set("seed", g.seed);
        e.set("step_cap", g.step_cap);
        e.set("execution", if setup.exec.is_parallel() { "parallel" } else { "sequential" });
        e
    }

    fn set(&mut self, key: &'a str, value: impl ToString) {
        self.lines.push((key, value.to_string()));
    }

    fn emit(&self) {
        if !self.quiet {
            for (k, v) in &self.lines {
                eprintln!("# {k}={v}");
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let setup = Setup::new(g)?;
    match &cli.command {
        Command::Parse(input) => {
            println!("{}", load_formula(input)?);
        }
        Command::Encode(input) => {
            let f = load_formula(input)?;
            Echo::new(g, &setup, "encode").emit();
            println!("{}", setup.table.encode(&f)?);
        }
        Command::Dist { a, b } => {
            let fa = parse_formula(&read(a)?)?;
            let fb = parse_formula(&read(b)?)?;
            Echo::new(g, &setup, "dist").emit();
            println!("{}", distance(&setup.table.encode(&fa)?, &setup.table.encode(&fb)?)?);
        }
        Command::Match { input, template, vars } => {
            let f = load_formula(input)?;
            let (t, wild) = expr::parse_with_wildcards(template).context("parsing template")?;
            let vars: PatternVarSet = vars.iter().cloned().chain(wild).collect();
            for m in find_all(&f, &t, &vars) {
                println!("{}\t{}", m.site, m.binding);
            }
        }
        Command::Apply { input, rule, site } => {
            let f = load_formula(input)?;
            let r = setup
                .rules
                .by_id(rule)
                .ok_or_else(|| anyhow!("unknown rule `{rule}`"))?;
            let out = match site {
                Some(s) => {
                    let site: Path = s.parse().map_err(|e| usage(format!("bad --site: {e}")))?;
                    apply_rule_at(&f, r, &site)?
                }
                None => apply_rule_first(&f, r)?.0,
            };
            println!("{out}");
        }
        Command::Derive {
            start,
            formula,
            goal,
            policy,
            qtable,
            bfs,
            depth_cap,
            mode,
            epsilon,
            unmasked,
            out,
        } => {
            let start = match (start, formula) {
                (Some(path), _) => parse_formula(&read(path)?)?,
                (None, Some(text)) => parse_formula(text)?,
                (None, None) => return Err(usage("give --start or --formula")),
            };
            let goal = load_goal(goal)?;
            let mut echo = Echo::new(g, &setup, "derive");
            echo.set("goal", &goal);
            let trace = if *bfs {
                echo.set("driver", "bfs");
                echo.set("depth_cap", depth_cap);
                echo.emit();
                bfs_oracle(&start, &goal, &setup.rules, *depth_cap)?
            } else {
                let policy = policy.as_deref().map(|p| setup.load_policy(p)).transpose()?;
                let qt = qtable.as_deref().map(|p| setup.load_qtable(p)).transpose()?;
                let hybrid;
                let scorer: &dyn ActionScorer = match (&qt, &policy) {
                    (Some(q), Some(p)) => {
                        hybrid = Hybrid { qtable: q, policy: p };
                        &hybrid
                    }
                    (Some(q), None) => q,
                    (None, Some(p)) => p,
                    (None, None) => return Err(usage("give --policy, --qtable or --bfs")),
                };
                let select = match mode {
                    Selection::Greedy => SelectMode::Greedy,
                    Selection::Epsilon => SelectMode::Epsilon(*epsilon),
                    Selection::Sample => SelectMode::Sample,
                };
                echo.set("driver", if policy.is_some() && qt.is_some() { "hybrid" } else if qt.is_some() { "qtable" } else { "policy" });
                echo.set("mode", format!("{mode:?}").to_lowercase());
                echo.set("masked", !unmasked);
                echo.emit();
                let env = DerivationEnv::new(start, goal, &setup.rules, &setup.table)?.with_step_cap(g.step_cap);
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                let mode = RolloutMode {
                    select,
                    masked: !unmasked,
                };
                rollout(env, scorer, mode, &mut rng)?
            };
            trace
                .replay(&setup.rules)
                .map_err(|e| CliError::Internal(anyhow!("emitted trace does not replay: {e}")))?;
            match out {
                Some(path) => write(path, &trace.to_text())?,
                None => print!("{}", trace.to_text()),
            }
            eprintln!("outcome={} steps={}", trace.outcome, trace.len());
        }
        Command::Gen {
            count,
            max_degree,
            coef_max,
            separable_fraction,
            quotient_fraction,
            constants_only,
            depth_cap,
            test_fraction,
            allow_gaps,
            out,
        } => {
            let gen = GenConfig {
                count: *count,
                max_degree: *max_degree,
                coef_max: *coef_max,
                seed: g.seed,
                separable_fraction: *separable_fraction,
                quotient_fraction: *quotient_fraction,
                constants_only: *constants_only,
            };
            let tc = TraceConfig {
                depth_cap: *depth_cap,
                test_fraction: *test_fraction,
                seed: g.seed,
                exec: setup.exec,
                require_coverage: !allow_gaps,
            };
            let mut echo = Echo::new(g, &setup, "gen");
            echo.set("gen", format!("{gen:?}"));
            echo.set("traces", format!("{tc:?}"));
            echo.emit();
            let corpus = gen_traces(&gen_instances(&gen)?, &setup.rules, &tc)?;
            corpus.write_dir(out)?;
            let train = corpus.entries.iter().filter(|e| e.split == Split::Train).count();
            println!(
                "instances={} kept={} dropped={} train={} test={}",
                count,
                corpus.len(),
                corpus.dropped.len(),
                train,
                corpus.len() - train
            );
        }
        Command::Train {
            corpus,
            learner,
            epochs,
            step,
            hidden,
            gamma,
            alpha,
            epsilon,
            episodes,
            batch,
            policy,
            out,
        } => {
            let corpus = Corpus::read_dir(corpus)?;
            let mut echo = Echo::new(g, &setup, "train");
            echo.set("learner", format!("{learner:?}").to_lowercase());
            match learner {
                Learner::Supervised => {
                    echo.set("epochs", epochs);
                    echo.set("step", step);
                    echo.set("hidden", hidden);
                    echo.emit();
                    let samples = corpus.samples(Split::Train, &setup.rules, &setup.table)?;
                    let data = TrainingSet::from_samples(&samples, setup.rules.len())?;
                    let hidden = if *hidden == 0 { DEFAULT_HIDDEN } else { *hidden };
                    let scale = 1.0 / f64::from(setup.table.max_code().max(1));
                    let mut model = PolicyModel::new(setup.table.l_max(), hidden, setup.rules.len(), scale, g.seed)
                        .with_rules_fingerprint(setup.rules.fingerprint());
                    let curve = model.train(&data, *epochs, *step, setup.exec)?;
                    write(out, &model.to_text())?;
                    let last = curve.last().copied().unwrap_or(f64::NAN);
                    println!(
                        "samples={} distinct={} loss_first={:.6} loss_last={:.6} train_accuracy={:.4}",
                        data.sample_count(),
                        data.distinct(),
                        curve[0],
                        last,
                        model.accuracy(&samples)
                    );
                }
                Learner::Q | Learner::Hybrid => {
                    echo.set("gamma", gamma);
                    echo.set("alpha", alpha);
                    echo.set("epsilon", epsilon);
                    echo.set("episodes", episodes);
                    echo.set("batch", batch);
                    let guide = match (learner, policy) {
                        (Learner::Hybrid, Some(p)) => Some(setup.load_policy(p)?),
                        (Learner::Hybrid, None) => return Err(usage("the hybrid learner needs --policy")),
                        _ => None,
                    };
                    echo.emit();
                    let tasks: Vec<Task> = corpus
                        .entries
                        .iter()
                        .filter(|e| e.split == Split::Train)
                        .map(|e| Task {
                            start: e.instance.clone(),
                            goal: e.trace.goal.clone(),
                        })
                        .collect();
                    let mut qt = QTable::new(setup.rules.len(), *gamma, *alpha)?;
                    let cfg = QLearnConfig {
                        episodes: *episodes,
                        epsilon: *epsilon,
                        batch: *batch,
                        seed: g.seed,
                        step_cap: g.step_cap,
                        exec: setup.exec,
                    };
                    let behavior = guide.as_ref().map(|p| p as &(dyn ActionScorer + Sync));
                    let stats = q_learn(&mut qt, &tasks, &setup.rules, &setup.table, Rewards::default(), &cfg, behavior)?;
                    write(out, &qt.to_text())?;
                    println!(
                        "episodes={} reached={} dead_ends={} capped={} states={}",
                        stats.episodes,
                        stats.reached,
                        stats.dead_ends,
                        stats.capped,
                        qt.len()
                    );
                }
            }
        }
        Command::Eval { corpus, policy, qtable } => {
            let corpus = Corpus::read_dir(corpus)?;
            let policy = policy.as_deref().map(|p| setup.load_policy(p)).transpose()?;
            let qt = qtable.as_deref().map(|p| setup.load_qtable(p)).transpose()?;
            let hybrid;
            let scorer: &dyn ActionScorer = match (&qt, &policy) {
                (Some(q), Some(p)) => {
                    hybrid = Hybrid { qtable: q, policy: p };
                    &hybrid
                }
                (Some(q), None) => q,
                (None, Some(p)) => p,
                (None, None) => return Err(usage("give --policy and/or --qtable")),
            };
            Echo::new(g, &setup, "eval").emit();
            let test = corpus.samples(Split::Test, &setup.rules, &setup.table)?;
            let top1 = test
                .iter()
                .filter(|s| {
                    let scores = scorer.scores(&s.state);
                    let mut rng = ChaCha8Rng::seed_from_u64(0);
                    autoderive::rl::select_action(&scores, &vec![true; scores.len()], SelectMode::Greedy, &mut rng)
                        .is_ok_and(|a| a == s.action)
                })
                .count();
            let (mut total, mut reached, mut optimal) = (0, 0, 0);
            for entry in corpus.entries.iter().filter(|e| e.split == Split::Test) {
                total += 1;
                let env = DerivationEnv::new(entry.instance.clone(), entry.trace.goal.clone(), &setup.rules, &setup.table)?
                    .with_step_cap(g.step_cap);
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                let trace = rollout(env, scorer, RolloutMode::default(), &mut rng)?;
                if trace.outcome == Outcome::Reached {
                    reached += 1;
                    optimal += usize::from(trace.len() == entry.trace.len());
                }
            }
            let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
            println!(
                "test_samples={} top1_accuracy={:.4} test_instances={} reached={:.4} optimal_length={:.4}",
                test.len(),
                frac(top1, test.len()),
                total,
                frac(reached, total),
                frac(optimal, reached)
            );
        }
    }
    Ok(())
}
