//! Structural edits used by value-of-information analysis and belief
//! revision. Each returns a new diagram.

use super::{DiagramError, InfluenceDiagram, NodeId, NodeKind};
use crate::rational::Prob;
use num_traits::One;

impl InfluenceDiagram {
    /// Makes `v` known before every decision.
    pub fn observe_before_all(&self, v: NodeId) -> Result<InfluenceDiagram, DiagramError> {
        if self.kind(v) != NodeKind::Chance {
            return Err(DiagramError::WrongKind(self.name(v).to_string()));
        }
        let mut out = self.clone();
        for &dec in &self.decision_order {
            let info = out.info.entry(dec).or_default();
            if !info.contains(&v) {
                info.push(v);
            }
        }
        out.ensure_valid()?;
        Ok(out)
    }

    /// Restricts a decision to one action.
    pub fn force_decision(&self, dec: NodeId, action: usize) -> Result<InfluenceDiagram, DiagramError> {
        if self.kind(dec) != NodeKind::Decision || action >= self.arity(dec) {
            return Err(DiagramError::WrongKind(self.name(dec).to_string()));
        }
        let mut out = self.clone();
        out.forced.insert(dec, action);
        Ok(out)
    }

    /// Forces every instrument reading `target` to its skip action.
    pub fn without_instruments_on(&self, target: NodeId) -> InfluenceDiagram {
        let mut out = self.clone();
        for inst in &self.instruments {
            if inst.target == target {
                out.forced.insert(inst.decision, 1 - inst.measure_action);
            }
        }
        out
    }

    /// Replaces an instrument's measurement cost, adjusting the utility table.
    pub fn with_instrument_cost(&self, name: &str, cost: &Prob) -> Result<InfluenceDiagram, DiagramError> {
        let inst = self.instrument(name)?.clone();
        let mut out = self.clone();
        let slot = self.utility.parents.iter().position(|&p| p == inst.decision);
        let delta = &inst.cost - cost;
        if let Some(slot) = slot {
            let parents = self.utility.parents.clone();
            let radix: Vec<usize> = parents.iter().map(|&p| self.arity(p)).collect();
            for (i, v) in out.utility.values.iter_mut().enumerate() {
                let mut rest = i;
                let mut digit = 0;
                for (k, r) in radix.iter().enumerate().rev() {
                    if k == slot {
                        digit = rest % r;
                    }
                    rest /= r;
                }
                if digit == inst.measure_action {
                    *v += &delta;
                }
            }
        }
        for i in &mut out.instruments {
            if i.name == inst.name {
                i.cost = cost.clone();
            }
        }
        Ok(out)
    }

    /// Replaces the distribution of a root chance node.
    pub fn with_root_prior(&self, id: NodeId, probs: Vec<Prob>) -> Result<InfluenceDiagram, DiagramError> {
        if self.kind(id) != NodeKind::Chance || !self.parents(id).is_empty() || probs.len() != self.arity(id) {
            return Err(DiagramError::WrongKind(self.name(id).to_string()));
        }
        let mut out = self.clone();
        out.cpts.get_mut(&id).expect("chance node has a CPT").rows = vec![probs];
        out.ensure_valid()?;
        Ok(out)
    }

    /// Root prior with all mass on one outcome.
    pub fn with_point_mass(&self, id: NodeId, outcome: usize) -> Result<InfluenceDiagram, DiagramError> {
        let probs = (0..self.arity(id)).map(|o| if o == outcome { Prob::one() } else { Prob::from_integer(0.into()) }).collect();
        self.with_root_prior(id, probs)
    }
}
