//! Shared inputs for the benchmarks.

use treeharm_core::gen;
use treeharm_core::{HarmonicFunction, StepFunction, Tree, ValueSpace, Weights};

pub fn binary_tree(depth: usize) -> Tree {
    Tree::homogeneous(2, depth, Weights::Uniform).expect("valid tree")
}

/// A random harmonic `φ` stored to level `s` and a random target of level `level`.
pub fn extension_input(tree: &Tree, s: usize, level: usize, seed: u64) -> (HarmonicFunction, StepFunction) {
    let mut rng = gen::rng(seed);
    let phi = gen::random_harmonic(tree, ValueSpace::Scalar, s, &mut rng);
    let h = gen::random_step(&mut rng, tree, ValueSpace::Scalar, level);
    (phi, h)
}

/// Two random step functions at `level`.
pub fn step_pair(tree: &Tree, level: usize, seed: u64) -> (StepFunction, StepFunction) {
    let mut rng = gen::rng(seed);
    let a = gen::random_step(&mut rng, tree, ValueSpace::Scalar, level);
    let b = gen::random_step(&mut rng, tree, ValueSpace::Scalar, level);
    (a, b)
}
