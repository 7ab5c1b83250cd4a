mod common;

use std::collections::VecDeque;

use autoderive::dataset::{gen_instances, gen_traces, pm149_milestone, pm149_rearranged, GenConfig, Split, TraceConfig};
use autoderive::derivation::{bfs_oracle, rollout, DerivationEnv, GoalSpec, Outcome, RolloutMode};
use autoderive::encoding::SymbolTable;
use autoderive::expr::build::*;
use autoderive::expr::Formula;
use autoderive::par::Execution;
use autoderive::rewrite::{apply_rule_first, ode_rules, textbook_rules, RuleSet};
use autoderive::rl::{PolicyModel, TrainingSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn kinetic_energy_worked_example() {
    let rules = textbook_rules();
    let table = SymbolTable::default();
    let start = equal(
        plus(divide(times(sym("m"), power(sym("v"), num("2"))), num("2")), sym("E")),
        sym("Q"),
    );
    let expected = [
        ("move_term", equal(divide(times(sym("m"), power(sym("v"), num("2"))), num("2")), minus(sym("Q"), sym("E")))),
        (
            "quotient_isolate",
            equal(power(sym("v"), num("2")), divide(times(num("2"), minus(sym("Q"), sym("E"))), sym("m"))),
        ),
        ("sqrt_inv", equal(sym("v"), sqrt(divide(times(num("2"), minus(sym("Q"), sym("E"))), sym("m"))))),
    ];
    let goal = GoalSpec::Exact(expected[2].1.clone());
    let mut env = DerivationEnv::new(start, goal, &rules, &table).unwrap();
    for (i, (id, tree)) in expected.iter().enumerate() {
        let r = env.step(rules.index_of(id).unwrap()).unwrap();
        assert_eq!(env.current(), tree);
        assert_eq!(env.current().to_string(), tree.to_string());
        assert_eq!(r.done, i == 2);
    }
    assert_eq!(env.outcome(), Some(Outcome::Reached));
}

/// Length of the shortest rule sequence reaching `goal`, trying every
/// sequence up to `cap` steps without any pruning.
fn exhaustive_shortest(start: &Formula, goal: &GoalSpec, rules: &RuleSet, cap: usize) -> Option<usize> {
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    let mut best = None;
    while let Some((f, d)) = queue.pop_front() {
        if goal.is_satisfied(&f) {
            best = Some(best.map_or(d, |b: usize| b.min(d)));
            continue;
        }
        if d == cap {
            continue;
        }
        for rule in rules.rules() {
            if let Ok((g, _)) = apply_rule_first(&f, rule) {
                queue.push_back((g, d + 1));
            }
        }
    }
    best
}

#[test]
fn oracle_is_optimal_on_shallow_instances() {
    let rules = ode_rules();
    let instances = gen_instances(&GenConfig { count: 40, seed: 9, ..Default::default() }).unwrap();
    let mut checked = 0;
    for inst in &instances {
        let goal = inst.goal();
        let bfs = bfs_oracle(&inst.form, &goal, &rules, 12).unwrap();
        let brute = exhaustive_shortest(&inst.form, &goal, &rules, 3);
        if bfs.len() <= 3 {
            assert_eq!(brute, Some(bfs.len()), "{}", inst.form);
            checked += 1;
        } else {
            assert_eq!(brute, None, "{}", inst.form);
        }
    }
    assert!(checked >= 5);

    let textbook = textbook_rules();
    let start = equal(plus(divide(times(sym("m"), power(sym("v"), num("2"))), num("2")), sym("E")), sym("Q"));
    let goal = GoalSpec::Solved { var: "v".into() };
    let bfs = bfs_oracle(&start, &goal, &textbook, 6).unwrap();
    assert_eq!(exhaustive_shortest(&start, &goal, &textbook, 3), Some(bfs.len()));
}

fn trained_policy(seed: u64) -> (PolicyModel, autoderive::dataset::Corpus) {
    let rules = ode_rules();
    let table = SymbolTable::default();
    let instances = gen_instances(&GenConfig { count: 500, seed, ..Default::default() }).unwrap();
    let corpus = gen_traces(&instances, &rules, &TraceConfig { seed, ..Default::default() }).unwrap();
    let train = corpus.samples(Split::Train, &rules, &table).unwrap();
    let data = TrainingSet::from_samples(&train, rules.len()).unwrap();
    let mut model = PolicyModel::new(64, 64, rules.len(), 1.0 / f64::from(table.max_code()), seed);
    model.train(&data, 1000, 2.0, Execution::default()).unwrap();
    (model, corpus)
}

#[test]
fn greedy_rollouts_are_never_shorter_than_the_oracle() {
    let rules = ode_rules();
    let table = SymbolTable::default();
    let (model, _) = trained_policy(1);
    let instances = gen_instances(&GenConfig { count: 50, seed: 99, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut solved, mut equal_len) = (0, 0);
    for inst in &instances {
        let bfs = bfs_oracle(&inst.form, &inst.goal(), &rules, 12).unwrap();
        let env = DerivationEnv::new(inst.form.clone(), inst.goal(), &rules, &table).unwrap();
        let trace = rollout(env, &model, RolloutMode::default(), &mut rng).unwrap();
        trace.replay(&rules).unwrap();
        if trace.outcome == Outcome::Reached {
            solved += 1;
            assert!(trace.len() >= bfs.len());
            equal_len += usize::from(trace.len() == bfs.len());
        }
    }
    assert!(solved > 0);
    assert!(equal_len as f64 >= 0.8 * solved as f64, "{equal_len} of {solved}");
}

#[test]
fn trained_policy_passes_through_the_separated_integral() {
    let rules = ode_rules();
    let table = SymbolTable::default();
    let (model, _) = trained_policy(2);
    let env = DerivationEnv::new(pm149_rearranged(), GoalSpec::Solved { var: "N".into() }, &rules, &table)
        .unwrap()
        .with_step_cap(20);
    let trace = rollout(env, &model, RolloutMode::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(trace.outcome, Outcome::Reached);
    let at = trace.formulas().position(|f| f == &pm149_milestone()).expect("milestone on the path");
    // the step before the milestone still carries ∫ 1 dt on the right
    assert_eq!(trace.steps[at - 1].rule, "int_one");
    assert!(at <= 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The mask predicts exactly which actions change the state.
    #[test]
    fn mask_is_sound(
        pick in any::<prop::sample::Index>(),
        fill in prop::collection::vec(common::formula(3), 1..4),
        noise in common::formula(4),
        use_rule in any::<bool>(),
    ) {
        let rules = textbook_rules();
        let table = SymbolTable::canonical(1024);
        let start = if use_rule {
            let rule = pick.get(rules.rules());
            common::instance_of(rule.lhs(), rule.vars(), &fill)
        } else {
            noise
        };
        let env = DerivationEnv::new(start, GoalSpec::Exact(sym("unreachable")), &rules, &table).unwrap();
        let mask = env.mask();
        if env.done() {
            prop_assert!(mask.iter().all(|&m| !m));
            return Ok(());
        }
        for (a, &ok) in mask.iter().enumerate() {
            let mut e = env.clone();
            let r = e.step(a).unwrap();
            prop_assert_eq!(r.applied.is_some(), ok);
            if !ok {
                prop_assert_eq!(&r.state, env.state());
            }
        }
    }
}
