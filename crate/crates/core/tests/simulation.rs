use std::collections::BTreeMap;
use tbil::diagram::joint_distribution;
use tbil::learn::Mode;
use tbil::rational::to_f64;
use tbil::sim::{SimConfig, Simulator};

fn sim(stages: usize, truth: &str, frozen: bool) -> Simulator {
    let config = SimConfig { stages, mode: Mode::Aggregate, truth: Some(truth.into()), frozen };
    Simulator::from_scenario(&tbil::fixtures::robot(), config, None).unwrap()
}

/// (measured density, action, outcome) frequencies under the initial
/// policy match the diagram's joint within three standard errors.
#[test]
fn sampled_frequencies_match_the_joint() {
    const N: usize = 100_000;
    let s = sim(N, "Sturdy", true);
    let (trace, _) = s.run(11).unwrap();
    let mut seen: BTreeMap<(Option<String>, String, String), usize> = BTreeMap::new();
    for r in &trace {
        *seen.entry((r.measured_density.clone(), r.action.clone(), r.outcome.clone())).or_default() += 1;
    }

    let d = &s.diagram;
    let sturdy = d.outcome_index(s.model.latent, "Sturdy").unwrap();
    let worlds = joint_distribution(&d.with_point_mass(s.model.latent, sturdy).unwrap(), s.policy(s.region(&s.initial))).unwrap();
    let reading = d.instruments[0].reading;
    let (dec, enabling) = s.model.enabling;
    let mut expected: BTreeMap<(Option<String>, String, String), f64> = BTreeMap::new();
    for w in &worlds {
        let md = (w.values[d.instruments[0].decision] == d.instruments[0].measure_action)
            .then(|| d.nodes[reading].outcomes[w.values[reading]].clone());
        let action = d.nodes[dec].outcomes[w.values[dec]].clone();
        let outcome = if w.values[dec] == enabling { d.nodes[s.model.observed].outcomes[w.values[s.model.observed]].clone() } else { action.clone() };
        *expected.entry((md, action, outcome)).or_default() += to_f64(&w.prob);
    }
    expected.retain(|_, p| *p > 0.0);

    assert_eq!(seen.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>());
    for (k, p) in &expected {
        let freq = seen[k] as f64 / N as f64;
        let se = (p * (1.0 - p) / N as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "{k:?}: {freq} vs {p}");
    }
}

#[test]
fn mean_log_ratio_approaches_the_average_multiplier() {
    let s = sim(1000, "Sturdy", true);
    let seeds: Vec<u64> = (0..100).collect();
    let rep = s.replicate(&seeds).unwrap();
    let n: usize = rep.summaries.iter().map(|r| r.observations).sum();
    let total: f64 = rep.summaries.iter().map(|r| r.mean_log_likelihood_ratio.unwrap() * r.observations as f64).sum();
    let mean = total / n as f64;
    assert!((mean - 0.9812f64.ln()).abs() < 2e-3, "{mean}");
}

#[test]
fn sturdy_world_switches_and_fragile_world_mostly_does_not() {
    let seeds: Vec<u64> = (0..100).collect();
    let sturdy = sim(400, "Sturdy", false).replicate(&seeds).unwrap();
    assert!(sturdy.switched as f64 / sturdy.runs as f64 > 0.9, "{}", sturdy.switched);
    let median = sturdy.median_switch_stage.unwrap();
    assert!((80.0..200.0).contains(&median), "{median}");

    let fragile = sim(400, "Fragile", false).replicate(&seeds).unwrap();
    // Early unlucky runs of breakages can still cross the threshold.
    assert!((fragile.switched as f64) < 0.2 * fragile.runs as f64, "{}", fragile.switched);
}

#[test]
fn after_switching_the_agent_stops_measuring() {
    let s = sim(600, "Sturdy", false);
    let (trace, summary) = s.run(3).unwrap();
    let at = summary.switch_stage.expect("switches within 600 stages");
    let before = &trace[..at];
    assert!(before.iter().all(|r| r.measured_density.is_some()));
    for r in trace.iter().skip_while(|r| r.stage < at) {
        if r.posterior_fragile < 0.25 {
            assert_eq!(r.action, "Short-Path");
        }
    }
    assert!(trace.iter().skip(at + 1).any(|r| r.measured_density.is_none()));
}

#[test]
fn replay_reproduces_the_belief_path() {
    let s = sim(300, "Sturdy", false);
    let (trace, summary) = s.run(42).unwrap();
    let mut b = s.initial.clone();
    for r in &trace {
        if let Some(l) = r.likelihood_ratio {
            b = b.update(l).unwrap();
        }
        assert!((b.probability() - r.posterior_fragile).abs() < 1e-12);
    }
    assert!((b.log_odds - summary.final_log_odds).abs() < 1e-12);
    assert_eq!(s.run(42).unwrap().0, trace);
}
