use super::{Cpt, DiagramError, InfluenceDiagram, NodeId, NodeKind};
use crate::rational::Prob;
use crate::knowledge::product;
use num_traits::Zero;

/// Reverses the chance arc `a -> b` by Bayes' theorem. Both nodes inherit
/// the union of their parents so the joint distribution is unchanged.
pub fn reverse_arc(d: &InfluenceDiagram, a: NodeId, b: NodeId) -> Result<InfluenceDiagram, DiagramError> {
    let names = || (d.name(a).to_string(), d.name(b).to_string());
    if d.kind(a) != NodeKind::Chance || d.kind(b) != NodeKind::Chance {
        let (from, to) = names();
        return Err(DiagramError::NotAChanceArc { from, to });
    }
    if !d.parents(b).contains(&a) {
        let (from, to) = names();
        return Err(DiagramError::NoSuchArc { from, to });
    }
    // Another directed path a -> ... -> b would close a cycle once b -> a exists.
    let indirect = d.parents(b).iter().any(|&p| p != a && d.ancestors(p).contains(&a));
    if indirect {
        let (from, to) = names();
        return Err(DiagramError::WouldCreateCycle { from, to });
    }

    let pa_a = d.parents(a).to_vec();
    let pa_b: Vec<NodeId> = d.parents(b).iter().copied().filter(|&p| p != a).collect();
    let mut union = pa_b.clone();
    for &p in &pa_a {
        if !union.contains(&p) {
            union.push(p);
        }
    }
    let mut new_a_parents = pa_a.clone();
    for &p in &pa_b {
        if !new_a_parents.contains(&p) {
            new_a_parents.push(p);
        }
    }
    new_a_parents.push(b);

    let n = d.nodes.len();
    let mut b_rows = vec![Vec::new(); d.row_count(&union)];
    let mut a_rows = vec![Vec::new(); d.row_count(&new_a_parents)];
    let spaces: Vec<Vec<usize>> = union.iter().map(|&p| (0..d.arity(p)).collect()).collect();
    for combo in product(&spaces) {
        let mut values = vec![0; n];
        for (&p, &v) in union.iter().zip(&combo) {
            values[p] = v;
        }
        let prior: Vec<Prob> = (0..d.arity(a)).map(|x| d.prob(a, x, &values).clone()).collect();
        // joint[x][y] = P(a=x | pa(a)) P(b=y | a=x, pa(b))
        let joint: Vec<Vec<Prob>> = (0..d.arity(a))
            .map(|x| {
                values[a] = x;
                (0..d.arity(b)).map(|y| &prior[x] * d.prob(b, y, &values)).collect()
            })
            .collect();
        let marginal_b: Vec<Prob> = (0..d.arity(b)).map(|y| joint.iter().map(|r| &r[y]).sum()).collect();
        b_rows[d.row_index(&union, &values)] = marginal_b.clone();
        for y in 0..d.arity(b) {
            values[b] = y;
            let row: Vec<Prob> = if marginal_b[y].is_zero() {
                prior.clone()
            } else {
                (0..d.arity(a)).map(|x| &joint[x][y] / &marginal_b[y]).collect()
            };
            a_rows[d.row_index(&new_a_parents, &values)] = row;
        }
    }

    let mut out = d.clone();
    out.cpts.insert(b, Cpt { parents: union, rows: b_rows });
    out.cpts.insert(a, Cpt { parents: new_a_parents, rows: a_rows });
    if out.topological_order().is_none() {
        let (from, to) = names();
        return Err(DiagramError::WouldCreateCycle { from, to });
    }
    Ok(out)
}
