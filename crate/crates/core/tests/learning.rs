mod common;

use common::checks::{check_odds_form, enabling_independent, random_model};

use proptest::prelude::*;
use tbil::diagram::InfluenceDiagram;
use tbil::learn::{BeliefState, LearnError, LikelihoodModel, Mode, Observation};
use tbil::policy::{optimal_policy, Policy};
use tbil::rational::to_f64;

fn robot_model(mode: Mode) -> (InfluenceDiagram, Policy, LikelihoodModel) {
    let s = tbil::fixtures::robot();
    let d = common::robot();
    let p = optimal_policy(&d).unwrap();
    let m = LikelihoodModel::from_scenario(&s, &d, mode).unwrap();
    (d, p, m)
}

#[test]
fn odds_form_equals_direct_bayes_on_robot() {
    let (d, p, m) = robot_model(Mode::Exact);
    // Resists at .2, .3, .4 and Breaks at .3, .4; .5 leads to the long path.
    assert_eq!(check_odds_form(&d, &p, &m), 5);
}

#[test]
fn odds_form_equals_direct_bayes_on_corpus() {
    let checked: usize = (0..200).filter_map(random_model).map(|(d, p, m)| check_odds_form(&d, &p, &m)).sum();
    assert!(checked > 20, "only {checked} observations checked");
}

#[test]
fn aggregate_matches_hundred_box_argument() {
    let (d, p, m) = robot_model(Mode::Aggregate);
    // Of 100 boxes, 50 light ones are all stacked and resist; of 50 heavy
    // ones the 2/3 read as .3 or .4 are stacked and resist with
    // probability .4 on a fragile table and .6 on a sturdy one.
    let light = 50.0;
    let heavy = 50.0 * 2.0 / 3.0;
    let fragile = (light + heavy * 0.4) / (light + heavy);
    let sturdy = (light + heavy * 0.6) / (light + heavy);
    let resists = d.outcome_index(m.observed, "Resists").unwrap();
    let l = m.likelihood_ratio(&d, &p, &Observation { outcome: resists, context: None }).unwrap();
    assert!((to_f64(&l) - fragile / sturdy).abs() < 1e-9);
}

#[test]
fn expected_log_ratio_drifts_toward_truth_in_exact_mode() {
    let (d, p, m) = robot_model(Mode::Exact);
    let h = m.hypothesis;
    assert!(m.average_likelihood_ratio(&d, &p, h).unwrap() >= 1.0);
    assert!(m.average_likelihood_ratio(&d, &p, 1 - h).unwrap() <= 1.0);
    let mut checked = 0;
    for (d, p, m) in (0..200).filter_map(random_model).filter(|(d, p, m)| enabling_independent(d, p, m)) {
        let (Ok(up), Ok(down)) = (m.average_likelihood_ratio(&d, &p, m.hypothesis), m.average_likelihood_ratio(&d, &p, 1 - m.hypothesis))
        else {
            continue;
        };
        assert!(up >= 1.0 - 1e-12 && down <= 1.0 + 1e-12, "{up} {down}");
        checked += 1;
    }
    assert!(checked > 10, "only {checked} diagrams checked");
}

#[test]
fn robot_sturdy_average_multiplier() {
    let (d, p, m) = robot_model(Mode::Aggregate);
    let sturdy = d.outcome_index(m.latent, "Sturdy").unwrap();
    assert!((m.average_likelihood_ratio(&d, &p, sturdy).unwrap() - 0.9812).abs() < 5e-4);
}

#[test]
fn impossible_observation_is_reported() {
    let (d, p, m) = robot_model(Mode::Exact);
    let breaks = d.outcome_index(m.observed, "Breaks").unwrap();
    let measure = d.outcome_index(d.node_id("MeasureDensity").unwrap(), "Measure").unwrap();
    let md = d.outcome_index(d.node_id("MeasuredDensity").unwrap(), ".2").unwrap();
    let obs = Observation { outcome: breaks, context: Some(vec![measure, md]) };
    assert_eq!(m.likelihood_ratio(&d, &p, &obs), Err(LearnError::Impossible));
}

proptest! {
    #[test]
    fn updates_commute(ls in proptest::collection::vec(0.05f64..20.0, 1..40), seed in any::<u64>()) {
        let b = BeliefState::from_odds("H", "N", 4.0).unwrap();
        let forward = ls.iter().fold(b.clone(), |acc, &l| acc.update(l).unwrap());
        let mut shuffled = ls.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed as usize).wrapping_add(i * 7919) % n;
            shuffled.swap(i, j);
        }
        let other = shuffled.iter().fold(b, |acc, &l| acc.update(l).unwrap());
        prop_assert!((forward.log_odds - other.log_odds).abs() < 1e-9);
        prop_assert_eq!(forward.updates, other.updates);
    }

    #[test]
    fn probabilities_are_complementary(log_odds in -700.0f64..700.0) {
        let b = BeliefState { hypothesis: "H".into(), alternative: "N".into(), log_odds, updates: 0 };
        let p = b.probability();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + b.probability_alternative() - 1.0).abs() < 1e-12);
    }
}
