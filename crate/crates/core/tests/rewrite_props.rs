mod common;

use autoderive::expr::{Formula, NodeKind, Path};
use autoderive::pattern::{find_first, PatternVarSet};
use autoderive::random::{random_formula, random_template};
use autoderive::rewrite::{apply_rule_at, apply_rule_first, ode_rules, textbook_rules, Rule, RuleSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A right-hand side that mentions every variable in `vars`, so the rule can
/// be inverted.
fn covering_rhs<R: Rng>(rng: &mut R, vars: &PatternVarSet) -> Formula {
    let mut leaves: Vec<Formula> = vars.iter().map(|v| Formula::try_sym(v).unwrap()).collect();
    leaves.push(random_formula(rng, 2));
    let kinds = [NodeKind::Plus, NodeKind::Times];
    let kind = kinds[rng.random_range(0..kinds.len())].clone();
    if rng.random_bool(0.5) {
        leaves.reverse();
    }
    Formula::new(kind, leaves).unwrap()
}

fn invertible(rule: &Rule) -> bool {
    let vars = rule.vars();
    vars.occurring_in(rule.lhs()) == vars.occurring_in(rule.rhs())
}

#[test]
fn five_hundred_invertible_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut done = 0;
    let mut attempts = 0;
    while done < 500 {
        attempts += 1;
        assert!(attempts < 50_000, "could not build enough stable cases");
        let f = random_formula(&mut rng, 5);
        let paths = f.paths();
        let site = paths[rng.random_range(0..paths.len())].clone();
        let (lhs, vars) = random_template(&mut rng, f.subtree_at(&site).unwrap());
        if vars.is_empty() {
            continue;
        }
        let rhs = covering_rhs(&mut rng, &vars);
        let rule = Rule::new("fwd", lhs, rhs, vars).unwrap();
        let inverse = rule.inverse("back").unwrap();
        assert!(invertible(&rule));

        // forward at the chosen site always inverts at the same site
        let g = apply_rule_at(&f, &rule, &site).unwrap();
        assert_eq!(apply_rule_at(&g, &inverse, &site).unwrap(), f);

        // first-match application inverts whenever both sites coincide
        let (g, first) = apply_rule_first(&f, &rule).unwrap();
        if inverse.find_site(&g).as_ref() != Some(&first) {
            continue;
        }
        let (back, back_site) = apply_rule_first(&g, &inverse).unwrap();
        assert_eq!(back_site, first);
        assert_eq!(back.to_string(), f.to_string());
        done += 1;
    }
}

#[test]
fn packaged_invertible_rules_round_trip_on_their_own_lhs() {
    for rules in [ode_rules(), textbook_rules()] {
        for rule in rules.rules().iter().filter(|r| invertible(r)) {
            let inverse = rule.inverse("inv").unwrap();
            let (g, site) = apply_rule_first(rule.lhs(), rule).unwrap();
            assert!(site.is_root());
            assert_eq!(&apply_rule_at(&g, &inverse, &site).unwrap(), rule.lhs(), "{}", rule.id());
        }
    }
}

#[test]
fn rule_files_round_trip() {
    for rules in [ode_rules(), textbook_rules()] {
        let back = RuleSet::from_text(&rules.to_text()).unwrap();
        assert_eq!(back, rules);
        assert_eq!(back.fingerprint(), rules.fingerprint());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Rewriting changes nothing outside the match site, and the result at
    /// the site is the instantiated right-hand side.
    #[test]
    fn rewriting_is_local(f in common::formula(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = f.paths();
        let site = paths[rng.random_range(0..paths.len())].clone();
        let (lhs, vars) = random_template(&mut rng, f.subtree_at(&site).unwrap());
        prop_assume!(!vars.is_empty());
        let rhs = covering_rhs(&mut rng, &vars);
        let rule = Rule::new("r", lhs.clone(), rhs.clone(), vars.clone()).unwrap();
        let g = apply_rule_at(&f, &rule, &site).unwrap();
        let binding = autoderive::pattern::match_here(f.subtree_at(&site).unwrap(), &lhs, &vars).unwrap();
        prop_assert_eq!(g.subtree_at(&site).unwrap(), &binding.substitute(&rhs));
        for p in paths.iter().filter(|p| !site.is_prefix_of(p) && !p.is_prefix_of(&site)) {
            prop_assert_eq!(g.subtree_at(p).unwrap(), f.subtree_at(p).unwrap());
        }
    }

    /// Variable names in the rule never leak into the result: symbols of the
    /// rewritten formula that share a pattern variable's name come from the
    /// formula itself.
    #[test]
    fn pattern_variables_do_not_leak(f in common::formula(4)) {
        let rule = Rule::new(
            "wrap",
            Formula::try_sym("v_hidden").unwrap(),
            Formula::new(NodeKind::Sqrt, vec![Formula::try_sym("v_hidden").unwrap()]).unwrap(),
            ["v_hidden"].into_iter().collect(),
        ).unwrap();
        let (g, site) = apply_rule_first(&f, &rule).unwrap();
        prop_assert_eq!(site, Path::root());
        prop_assert!(!g.contains_sym("v_hidden"));
        prop_assert_eq!(g.children(), std::slice::from_ref(&f));
    }

    #[test]
    fn first_match_site_is_the_pre_order_first(f in common::formula(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = random_formula(&mut rng, 2);
        let (t, vars) = random_template(&mut rng, &source);
        let rule = Rule::new("r", t.clone(), Formula::try_sym("done").unwrap(), vars.clone()).unwrap();
        match apply_rule_first(&f, &rule) {
            Ok((_, site)) => prop_assert_eq!(Some(site), find_first(&f, &t, &vars).map(|m| m.site)),
            Err(_) => prop_assert!(find_first(&f, &t, &vars).is_none()),
        }
    }
}
