//! Theory-based inductive learning: explain a training example with a domain
//! theory, generalize the explanation into an influence diagram, solve it for
//! a policy, and revise beliefs from repeated experience.

pub mod diagram;
pub mod explain;
pub mod fixtures;
pub mod knowledge;
pub mod learn;
pub mod policy;
pub mod rational;
pub mod sim;

pub use rational::Prob;
