//! Shared fixtures for the benchmarks.

use rdfm_hdg::scenario::{builtin_example1, builtin_manufactured, Example1Variant};
use rdfm_hdg::{Discretization, Scenario};

/// Cross-shaped benchmark with `refine_steps` near-fracture refinements at degree `k`.
pub fn example1(variant: Example1Variant, k: usize, refine_steps: usize) -> Scenario {
    let mut s = builtin_example1(variant).with_degree(k);
    s.mesh.refine_steps = refine_steps;
    s
}

/// Fracture-free manufactured problem on an `n x n` grid.
pub fn manufactured(n: usize, k: usize) -> Scenario {
    builtin_manufactured(n, k)
}

pub fn discretize(s: &Scenario) -> Discretization {
    Discretization::from_scenario(s).expect("benchmark scenario is valid")
}
