use super::SimError;
use crate::diagram::InfluenceDiagram;
use crate::policy::{evaluate, optimal_policy, Policy};
use crate::rational::Prob;
use num_bigint::BigInt;
use num_traits::One;

/// Belief interval on which one policy is optimal.
#[derive(Debug, Clone)]
pub struct Region {
    /// Lowest and highest P(H) (within `RESOLUTION`) where `policy` is optimal.
    pub lo: f64,
    pub hi: f64,
    pub policy: Policy,
}

/// Bisection depth for region boundaries: boundaries are located to 2^-40.
const DEPTH: u32 = 40;
pub const RESOLUTION: f64 = 1.0 / (1u64 << DEPTH) as f64;

/// Splits the belief range (0, 1) of `latent = hypothesis` into the
/// intervals on which the optimal policy stays the same, ordered by belief.
/// Every expected utility is linear in the belief and the optimal value is
/// convex, so each policy is optimal on one interval.
pub fn partition(d: &InfluenceDiagram, latent: usize, hypothesis: usize) -> Result<Vec<Region>, SimError> {
    let scale = BigInt::from(1u64 << DEPTH);
    let at = |k: u64| -> Result<InfluenceDiagram, SimError> {
        let p = Prob::new(BigInt::from(k), scale.clone());
        let mut probs = vec![Prob::one() - &p; 2];
        probs[hypothesis] = p;
        Ok(d.with_root_prior(latent, probs)?)
    };
    let optimal_at = |policy: &Policy, k: u64| -> Result<bool, SimError> {
        let dk = at(k)?;
        Ok(evaluate(&dk, policy)? == optimal_policy(&dk)?.eu)
    };
    let top = (1u64 << DEPTH) - 1;
    let mut regions: Vec<Region> = Vec::new();
    let mut start = 1u64;
    loop {
        let policy = optimal_policy(&at(start)?)?;
        // Largest k in [start, top] at which `policy` is still optimal.
        let (mut good, mut bad) = (start, top + 1);
        if optimal_at(&policy, top)? {
            good = top;
        } else {
            while bad - good > 1 {
                let mid = good + (bad - good) / 2;
                if optimal_at(&policy, mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
        }
        let lo = start as f64 * RESOLUTION;
        let hi = good as f64 * RESOLUTION;
        match regions.last_mut() {
            Some(last) if last.policy.rules == policy.rules => last.hi = hi,
            _ => regions.push(Region { lo, hi, policy }),
        }
        if good >= top {
            break;
        }
        start = good + 1;
    }
    if let Some(first) = regions.first_mut() {
        first.lo = 0.0;
    }
    if let Some(last) = regions.last_mut() {
        last.hi = 1.0;
    }
    Ok(regions)
}

/// Index of the region containing belief `p`.
pub fn region_of(regions: &[Region], p: f64) -> usize {
    regions.iter().position(|r| p <= r.hi).unwrap_or(regions.len() - 1)
}
