use super::{brute_force_meu, random_diagram};
use std::collections::BTreeSet;
use tbil::diagram::{joint_distribution, marginal, reverse_arc, DiagramError, InfluenceDiagram, NodeKind};
use tbil::explain::{generalize, prove, stage_goal, ProofNode};
use tbil::knowledge::{resolve_atom, Scenario, Term, UTILITY_PREDICATE};
use tbil::learn::{BeliefState, LikelihoodModel, Mode, Observation};
use tbil::policy::{optimal_policy, Policy};
use tbil::rational::{to_f64, Prob};

pub fn chance_arcs(d: &InfluenceDiagram) -> Vec<(usize, usize)> {
    d.arcs().into_iter().filter(|&(a, b)| d.kind(a) == NodeKind::Chance && d.kind(b) == NodeKind::Chance).collect()
}

pub fn chance_marginal(d: &InfluenceDiagram, p: &Policy) -> Vec<(Vec<usize>, f64)> {
    let worlds = joint_distribution(d, p).unwrap();
    let nodes: Vec<usize> = (0..d.nodes.len()).filter(|&i| d.kind(i) != NodeKind::Value).collect();
    marginal(&worlds, &nodes).into_iter().map(|(k, v)| (k, to_f64(&v))).collect()
}

pub fn check_rollback(seed: u64) {
    let d = random_diagram(seed);
    let eu = to_f64(&optimal_policy(&d).unwrap().eu);
    let oracle = brute_force_meu(&d);
    assert!((eu - oracle).abs() < 1e-9, "seed {seed}: rollback {eu} vs brute force {oracle}");
}

/// Returns how many arcs were reversed.
pub fn check_reversal(seed: u64) -> usize {
    let d = random_diagram(seed);
    let p = optimal_policy(&d).unwrap();
    let before = chance_marginal(&d, &p);
    let mut reversed = 0;
    for (a, b) in chance_arcs(&d) {
        match reverse_arc(&d, a, b) {
            Ok(r) => {
                let after = chance_marginal(&r, &p);
                assert_eq!(before.len(), after.len(), "seed {seed}: arc {a}->{b}");
                for ((k1, v1), (k2, v2)) in before.iter().zip(&after) {
                    assert_eq!(k1, k2);
                    assert!((v1 - v2).abs() < 1e-9, "seed {seed}: arc {a}->{b} at {k1:?}: {v1} vs {v2}");
                }
                assert!(r.parents(a).contains(&b));
                assert!(!r.parents(b).contains(&a));
                reversed += 1;
            }
            Err(DiagramError::WouldCreateCycle { .. }) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    reversed
}

pub fn affine(d: &InfluenceDiagram, a: &Prob, b: &Prob) -> InfluenceDiagram {
    let mut t = d.clone();
    for v in &mut t.utility.values {
        *v = a * &*v + b;
    }
    t
}

/// P(H | observation) read directly off the enumerated joint.
pub fn direct_posterior(d: &InfluenceDiagram, p: &Policy, m: &LikelihoodModel, obs: &Observation) -> f64 {
    let worlds = joint_distribution(d, p).unwrap();
    let (dec, action) = m.enabling;
    let ctx = obs.context.as_ref().unwrap();
    let mut num = Prob::from_integer(0.into());
    let mut den = num.clone();
    for w in &worlds {
        let info: Vec<usize> = d.parents(dec).iter().map(|&q| w.values[q]).collect();
        if w.values[dec] != action || &info != ctx || w.values[m.observed] != obs.outcome {
            continue;
        }
        den += &w.prob;
        if w.values[m.latent] == m.hypothesis {
            num += &w.prob;
        }
    }
    to_f64(&(num / den))
}

pub fn prior(d: &InfluenceDiagram, m: &LikelihoodModel) -> BeliefState {
    BeliefState::from_probability("H", "N", to_f64(&d.cpt(m.latent).rows[0][m.hypothesis])).unwrap()
}

pub fn check_odds_form(d: &InfluenceDiagram, p: &Policy, m: &LikelihoodModel) -> usize {
    let ratios = match m.ratios(d, p) {
        Ok(r) => r,
        Err(_) => return 0,
    };
    let b = prior(d, m);
    for (obs, l) in &ratios {
        let odds_form = b.update(to_f64(l)).unwrap().probability();
        let direct = direct_posterior(d, p, m, obs);
        assert!((odds_form - direct).abs() < 1e-9, "{obs:?}: odds form {odds_form} vs direct {direct}");
    }
    ratios.len()
}

/// A binary root chance node upstream of some chance node, and a decision
/// to enable observing it.
pub fn random_model(seed: u64) -> Option<(InfluenceDiagram, Policy, LikelihoodModel)> {
    let d = random_diagram(seed);
    let dec = *d.decision_order.first()?;
    let latent = (0..d.nodes.len()).find(|&i| d.kind(i) == NodeKind::Chance && d.parents(i).is_empty() && d.nodes[i].outcomes.len() == 2 && d.prior_positive(i))?;
    let observed = (0..d.nodes.len()).find(|&i| d.kind(i) == NodeKind::Chance && d.ancestors(i).contains(&latent))?;
    let p = optimal_policy(&d).ok()?;
    let m = LikelihoodModel { latent, hypothesis: 0, observed, enabling: (dec, 0), mode: Mode::Exact };
    m.check(&d).ok()?;
    Some((d, p, m))
}

/// The exact-mode drift toward the truth is a divergence between two
/// distributions only when the enabling action is equally likely under both
/// latent values.
pub fn enabling_independent(d: &InfluenceDiagram, p: &Policy, m: &LikelihoodModel) -> bool {
    let total = |h: usize| {
        let worlds = joint_distribution(&d.with_point_mass(m.latent, h).unwrap(), p).unwrap();
        worlds.iter().filter(|w| w.values[m.enabling.0] == m.enabling.1).map(|w| w.prob.clone()).sum::<Prob>()
    };
    total(0) == total(1)
}

pub trait PriorPositive {
    fn prior_positive(&self, id: usize) -> bool;
}

impl PriorPositive for InfluenceDiagram {
    fn prior_positive(&self, id: usize) -> bool {
        self.cpt(id).rows[0].iter().all(|x| *x > Prob::from_integer(0.into()))
    }
}

pub fn ground_atoms(p: &ProofNode, out: &mut BTreeSet<String>) {
    if p.conclusion.args.iter().all(Term::is_ground) {
        out.insert(p.conclusion.to_string());
    }
    for c in &p.children {
        ground_atoms(c, out);
    }
}

/// Every ground atom of the example's proof is reproduced by substituting
/// the bindings into the generalized explanation.
pub fn check_subsumption(s: &Scenario) {
    let goal = stage_goal(s).unwrap();
    let p = prove(&goal, s).unwrap();
    let g = generalize(&p, s);
    let mut specific = BTreeSet::new();
    ground_atoms(&p, &mut specific);
    // Substitute the bindings into every generalized node that stems from the proof.
    let mut reproduced = BTreeSet::new();
    for n in &g.nodes {
        if n.instances.is_empty() {
            continue;
        }
        let a = resolve_atom(&n.atom, &g.bindings);
        for inst in &n.instances {
            if a.args.iter().all(Term::is_ground) && inst.args.iter().all(Term::is_ground) {
                assert_eq!(&a, inst, "node {}", n.name);
            }
        }
        if a.args.iter().all(Term::is_ground) {
            reproduced.insert(a.to_string());
        }
    }
    for atom in &specific {
        if atom.starts_with(UTILITY_PREDICATE) {
            continue;
        }
        assert!(reproduced.contains(atom), "{atom} not reproduced; have {reproduced:#?}");
    }
}

pub fn affine_keeps_argmax(d: &InfluenceDiagram, a: &Prob, b: &Prob) {
    let base = optimal_policy(d).unwrap();
    let t = optimal_policy(&affine(d, a, b)).unwrap();
    assert_eq!(base.rules, t.rules);
    assert_eq!(t.eu, a * &base.eu + b);
}
