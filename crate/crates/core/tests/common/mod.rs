#![allow(dead_code)]

pub mod checks;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbil::diagram::{DiagramBuilder, InfluenceDiagram, NodeId, NodeKind};
use tbil::rational::{ratio, to_f64, Prob};

pub fn robot() -> InfluenceDiagram {
    tbil::explain::explain(&tbil::fixtures::robot()).unwrap().diagram
}

fn random_prob(rng: &mut ChaCha8Rng) -> Prob {
    let den: i64 = rng.gen_range(1..=20);
    let num: i64 = rng.gen_range(0..=den);
    ratio(num, den)
}

fn binary_rows(rng: &mut ChaCha8Rng, parents: &[NodeId], arity: impl Fn(NodeId) -> usize) -> Vec<Vec<Prob>> {
    let rows: usize = parents.iter().map(|&p| arity(p)).product();
    (0..rows)
        .map(|_| {
            let p = random_prob(rng);
            vec![p.clone(), Prob::from_integer(BigInt::from(1)) - p]
        })
        .collect()
}

/// A random diagram with up to five binary chance nodes and up to two
/// binary decisions. The first decision sees at most one chance node; the
/// second remembers the first and its information, seeing at most three
/// nodes in all. Probabilities have denominators of at most 20.
pub fn random_diagram(seed: u64) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_chance = rng.gen_range(1..=5);
    let n_dec = rng.gen_range(0..=2);
    // Positions of the decisions among the chance nodes.
    let mut slots: Vec<usize> = (0..n_dec).map(|_| rng.gen_range(0..=n_chance)).collect();
    slots.sort_unstable();

    let mut b = DiagramBuilder::new();
    let mut kinds: Vec<NodeKind> = Vec::new();
    let mut chance: Vec<NodeId> = Vec::new();
    let mut decisions: Vec<NodeId> = Vec::new();
    let mut prev_info: Vec<NodeId> = Vec::new();
    let mut made = 0;
    let mut next_slot = 0;
    while made < n_chance || next_slot < slots.len() {
        if next_slot < slots.len() && slots[next_slot] == made {
            let info: Vec<NodeId> = if decisions.is_empty() {
                let mut info = Vec::new();
                if !chance.is_empty() && rng.gen_bool(0.7) {
                    info.push(chance[rng.gen_range(0..chance.len())]);
                }
                info
            } else {
                let mut info = prev_info.clone();
                info.push(decisions[0]);
                for &c in &chance {
                    if info.len() < 3 && !info.contains(&c) && rng.gen_bool(0.5) {
                        info.push(c);
                    }
                }
                info.sort_unstable();
                info
            };
            let id = b.decision(&format!("D{}", decisions.len() + 1), &["a0", "a1"], &info);
            kinds.push(NodeKind::Decision);
            decisions.push(id);
            prev_info = info;
            next_slot += 1;
            continue;
        }
        let earlier: Vec<NodeId> = (0..kinds.len()).collect();
        let mut parents: Vec<NodeId> = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            if earlier.is_empty() {
                break;
            }
            let p = earlier[rng.gen_range(0..earlier.len())];
            if !parents.contains(&p) {
                parents.push(p);
            }
        }
        let rows = binary_rows(&mut rng, &parents, |_| 2);
        let id = b.chance(&format!("C{}", chance.len() + 1), &["x0", "x1"], &parents, rows);
        kinds.push(NodeKind::Chance);
        chance.push(id);
        made += 1;
    }
    let all: Vec<NodeId> = (0..kinds.len()).collect();
    let mut vparents: Vec<NodeId> = Vec::new();
    for &d in &decisions {
        if rng.gen_bool(0.8) {
            vparents.push(d);
        }
    }
    while vparents.len() < 3.min(all.len()) {
        let p = all[rng.gen_range(0..all.len())];
        if !vparents.contains(&p) {
            vparents.push(p);
        }
        if rng.gen_bool(0.3) {
            break;
        }
    }
    let values = (0..(1usize << vparents.len())).map(|_| ratio(rng.gen_range(-20..=20), rng.gen_range(1..=4))).collect();
    b.value("U", &vparents, values);
    b.build().expect("generated diagrams are valid")
}

/// All deterministic policies as, per decision, a table from information
/// configuration to action.
fn all_policies(d: &InfluenceDiagram) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for &dec in &d.decision_order {
        let configs: usize = d.parents(dec).iter().map(|&p| d.arity(p)).product();
        let arity = d.arity(dec);
        let tables = arity.pow(configs as u32);
        let mut next = Vec::new();
        for partial in &out {
            for t in 0..tables {
                let mut table = Vec::with_capacity(configs);
                let mut x = t;
                for _ in 0..configs {
                    table.push(x % arity);
                    x /= arity;
                }
                let mut p = partial.clone();
                p.push(table);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Expected utility of a policy by summing over every chance assignment in
/// floating point, independent of the library's enumerator.
fn policy_eu(d: &InfluenceDiagram, tables: &[Vec<usize>]) -> f64 {
    let n = d.nodes.len();
    let chance: Vec<NodeId> = (0..n).filter(|&i| d.kind(i) == NodeKind::Chance).collect();
    let order = d.topological_order().unwrap();
    let combos: usize = chance.iter().map(|&c| d.arity(c)).product();
    let mut eu = 0.0;
    for mut code in 0..combos {
        let mut values = vec![0usize; n];
        for &c in &chance {
            values[c] = code % d.arity(c);
            code /= d.arity(c);
        }
        let mut p = 1.0;
        for &i in &order {
            match d.kind(i) {
                NodeKind::Chance => p *= to_f64(d.prob(i, values[i], &values)),
                NodeKind::Decision => {
                    let k = d.decision_order.iter().position(|&x| x == i).unwrap();
                    let idx = d.row_index(d.parents(i), &values);
                    values[i] = tables[k][idx];
                }
                NodeKind::Value => {}
            }
        }
        if p > 0.0 {
            eu += p * to_f64(d.utility_of(&values));
        }
    }
    eu
}

/// Maximum expected utility over all deterministic policies.
pub fn brute_force_meu(d: &InfluenceDiagram) -> f64 {
    all_policies(d).iter().map(|t| policy_eu(d, t)).fold(f64::NEG_INFINITY, f64::max)
}
