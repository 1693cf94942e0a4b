//! Cumulative prospect theory values of Markov chains and Markov decision processes.
//!
//! The pipeline for an MDP with a weighted-reachability objective: collapse end
//! components into a stopping MDP, compute the polytope of achievable outcome
//! distributions with linear programs, maximize (or minimize) the CPT function
//! over it by branch and bound, and read a memoryless randomized strategy off the
//! occupation measure of the best point.

pub mod error;
pub mod graph;
pub mod mc;
pub mod mdp;
pub mod mean_payoff;
pub mod model;
pub mod numeric;
pub mod par;
pub mod prospect;

pub use error::Error;
