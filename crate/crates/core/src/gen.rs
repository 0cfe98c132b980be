//! Seeded random trees, step functions and exactly harmonic functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harmonic::HarmonicFunction;
use crate::l0::StepFunction;
use crate::rational::{q, Q};
use crate::tree::{Tree, Vertex, Weights};
use crate::value::{Value, ValueSpace};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `b` positive weights with small denominators summing to 1.
pub fn random_weights(rng: &mut impl Rng, b: usize) -> Vec<Q> {
    let raw: Vec<i64> = (0..b).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|x| q(x, total)).collect()
}

/// Every vertex has `branching` children with one shared random weight vector.
pub fn random_homogeneous(rng: &mut impl Rng, branching: usize, depth: usize) -> Tree {
    let w = random_weights(rng, branching);
    Tree::homogeneous(branching, depth, Weights::Explicit(w)).expect("valid generated tree")
}

/// Branching drawn per vertex from `2..=max_branching`, weights per vertex.
/// The vertex count grows like `max_branching^depth`; keep both small.
pub fn random_tree(rng: &mut impl Rng, max_branching: usize, depth: usize) -> Tree {
    let mut children: Vec<Vec<Q>> = vec![];
    let mut level = 1u64;
    for _ in 0..depth {
        let mut next = 0u64;
        for _ in 0..level {
            let b = rng.random_range(2..=max_branching.max(2));
            children.push(random_weights(rng, b));
            next += b as u64;
        }
        level = next;
    }
    children.extend((0..level).map(|_| vec![]));
    Tree::from_bfs(children, None).expect("valid generated tree")
}

pub fn random_value(rng: &mut impl Rng, space: ValueSpace) -> Value {
    Value((0..space.dim()).map(|_| q(rng.random_range(-8..=8), rng.random_range(1..=4))).collect())
}

/// Random values on every level-`level` sector.
pub fn random_step(rng: &mut impl Rng, tree: &Tree, space: ValueSpace, level: usize) -> StepFunction {
    let values = (0..tree.level_size(level)).map(|_| random_value(rng, space)).collect();
    StepFunction::from_sector_values(tree, space, level, values).expect("level within tree")
}

/// An exactly harmonic function to `depth`: random root value, random values
/// for every child but the last, the last child solved from the mean-value
/// identity.
pub fn random_harmonic(tree: &Tree, space: ValueSpace, depth: usize, rng: &mut impl Rng) -> HarmonicFunction {
    let end = tree.level_range(depth).end;
    let mut values: Vec<Value> = Vec::with_capacity(end as usize);
    values.push(random_value(rng, space));
    for l in 0..depth {
        for x in tree.level_range(l) {
            let x = Vertex(x);
            let w = tree.child_weights(x);
            let mut rest = values[x.0 as usize].clone();
            let b = w.len();
            for wi in &w[..b - 1] {
                let y = random_value(rng, space);
                rest = rest.sub(&y.scale(wi));
                values.push(y);
            }
            values.push(rest.scale(&(Q::from_integer(1.into()) / &w[b - 1])));
        }
    }
    let interior = depth.checked_sub(1);
    HarmonicFunction::from_vertex_values(tree, space, depth, interior, |v| values[v.0 as usize].clone())
        .expect("depth within tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::check_harmonic;
    use crate::tree::validate;

    #[test]
    fn generated_objects_are_valid() {
        let mut r = rng(3);
        for _ in 0..10 {
            let t = random_tree(&mut r, 4, 4);
            assert!(validate(&t).is_empty());
            let f = random_harmonic(&t, ValueSpace::product(2).unwrap(), 4, &mut r);
            assert!(check_harmonic(&t, &f).is_empty());
            let t = random_homogeneous(&mut r, 3, 5);
            assert!(validate(&t).is_empty());
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let t = random_tree(&mut rng(8), 3, 3);
        assert!(t == random_tree(&mut rng(8), 3, 3));
        let a = random_harmonic(&t, ValueSpace::Scalar, 3, &mut rng(1));
        assert_eq!(a, random_harmonic(&t, ValueSpace::Scalar, 3, &mut rng(1)));
    }
}
