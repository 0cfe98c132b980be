//! Sector measures `p(B_x)` and the level partitions realizing `M_n`.

use std::collections::BTreeMap;
use std::ops::Range;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;
use crate::tree::{ShapeId, Tree, Vertex};

/// Product of the weights along the geodesic from the root to `x`.
pub fn sector_measure(tree: &Tree, x: Vertex) -> Result<Q> {
    tree.check_vertex(x)?;
    let mut p = Q::one();
    let mut v = x;
    while let Some(parent) = tree.parent(v) {
        p *= tree.weight(parent, v);
        v = parent;
    }
    Ok(p)
}

/// The level-`n` sectors with their measures, in breadth-first order.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorPartition {
    pub level: usize,
    pub sectors: Vec<(Vertex, Q)>,
}

impl SectorPartition {
    pub fn total(&self) -> Q {
        self.sectors.iter().map(|(_, p)| p).sum()
    }

    pub fn measure(&self, x: Vertex) -> Option<&Q> {
        let first = self.sectors.first()?.0 .0;
        self.sectors.get(x.0.checked_sub(first)? as usize).map(|(_, p)| p)
    }
}

pub fn level_partition(tree: &Tree, n: usize) -> Result<SectorPartition> {
    tree.check_level(n)?;
    let mut sectors = vec![(tree.root(), Q::one())];
    for _ in 0..n {
        let mut next = Vec::with_capacity(sectors.len() * 2);
        for (v, p) in &sectors {
            for (c, w) in tree.children(*v).zip(tree.child_weights(*v)) {
                next.push((c, p * w));
            }
        }
        sectors = next;
    }
    Ok(SectorPartition { level: n, sectors })
}

/// Maps each level-`fine` sector to its level-`coarse` ancestor sector.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementMap {
    pub coarse: usize,
    pub fine: usize,
    /// Each coarse sector with the (contiguous) ids of its fine descendants.
    pub fibers: Vec<(Vertex, Range<u64>)>,
}

impl RefinementMap {
    pub fn image(&self, tree: &Tree, y: Vertex) -> Vertex {
        tree.ancestor_at(y, self.coarse)
    }

    /// Pushes a fine partition forward onto the coarse level.
    pub fn push_forward(&self, fine: &SectorPartition) -> Result<SectorPartition> {
        if fine.level != self.fine {
            return Err(Error::LevelOutOfRange { level: fine.level, limit: self.fine });
        }
        let sectors = self
            .fibers
            .iter()
            .map(|(x, ys)| {
                let mass = ys.clone().map(|y| fine.measure(Vertex(y)).expect("fiber inside partition")).sum();
                (*x, mass)
            })
            .collect();
        Ok(SectorPartition { level: self.coarse, sectors })
    }
}

pub fn refinement_map(tree: &Tree, n: usize, m: usize) -> Result<RefinementMap> {
    tree.check_level(m)?;
    if n >= m {
        return Err(Error::LevelOutOfRange { level: n, limit: m.saturating_sub(1) });
    }
    let fibers = tree.level_range(n).map(|x| (Vertex(x), tree.descendants_at(Vertex(x), m))).collect();
    Ok(RefinementMap { coarse: n, fine: m, fibers })
}

/// All level-`n` vertices sharing one subtree shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeClass {
    pub shape: ShapeId,
    /// Total measure of the class's sectors.
    pub mass: Q,
    pub count: u64,
    /// Smallest vertex id in the class.
    pub first: Vertex,
}

/// Level-`n` vertices grouped by shape, without enumerating the level.
pub fn shape_classes(tree: &Tree, n: usize) -> Result<Vec<ShapeClass>> {
    tree.check_level(n)?;
    let mut classes = vec![ShapeClass { shape: tree.root_shape(), mass: Q::one(), count: 1, first: tree.root() }];
    for _ in 0..n {
        let mut next: BTreeMap<ShapeId, ShapeClass> = BTreeMap::new();
        for c in &classes {
            let shape = tree.shape(c.shape);
            for (i, (&s, w)) in shape.children.iter().zip(&shape.weights).enumerate() {
                let first = tree.child(c.first, i);
                let entry = next.entry(s).or_insert_with(|| ShapeClass { shape: s, mass: Q::zero(), count: 0, first });
                entry.mass += &c.mass * w;
                entry.count += c.count;
                entry.first = entry.first.min(first);
            }
        }
        classes = next.into_values().collect();
        classes.sort_by_key(|c| c.first);
    }
    Ok(classes)
}

/// Result of checking level totals and consistency through shape classes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureAudit {
    /// `(level, total measure)` for every level checked.
    pub totals: Vec<(usize, Q)>,
    pub failures: Vec<String>,
}

impl MeasureAudit {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Exact level sums and `P_{n+1}|M_n = P_n` for all levels, at cost
/// proportional to the number of shapes rather than vertices.
pub fn audit_measures(tree: &Tree) -> MeasureAudit {
    let mut totals = Vec::new();
    let mut failures = Vec::new();
    for n in 0..=tree.depth() {
        let classes = shape_classes(tree, n).expect("level within depth");
        let total: Q = classes.iter().map(|c| &c.mass).sum();
        if !total.is_one() {
            failures.push(format!("level {n}: sector measures sum to {total}"));
        }
        for c in &classes {
            if !c.mass.is_positive() {
                failures.push(format!("level {n}: non-positive mass at vertex {}", tree.label(c.first)));
            }
            let shape = tree.shape(c.shape);
            if n < tree.depth() {
                let pushed: Q = shape.weights.iter().map(|w| &c.mass * w).sum();
                if pushed != c.mass {
                    failures.push(format!(
                        "level {n}: children of vertex {} carry {pushed}, parent has {}",
                        tree.label(c.first),
                        c.mass
                    ));
                }
            }
        }
        totals.push((n, total));
    }
    MeasureAudit { totals, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::tree::Weights;

    fn t2(d: usize) -> Tree {
        Tree::homogeneous(2, d, Weights::Uniform).unwrap()
    }

    #[test]
    fn sector_measures() {
        let t = t2(3);
        assert_eq!(sector_measure(&t, t.root()).unwrap(), q(1, 1));
        for x in t.level_range(3) {
            assert_eq!(sector_measure(&t, Vertex(x)).unwrap(), q(1, 8));
        }
        let skew = Tree::homogeneous(2, 2, Weights::Explicit(vec![q(1, 4), q(3, 4)])).unwrap();
        // First child, then second child: 1/4 * 3/4.
        let x = skew.child(skew.child(skew.root(), 0), 1);
        assert_eq!(sector_measure(&skew, x).unwrap(), q(3, 16));
    }

    #[test]
    fn partitions() {
        let t = t2(3);
        let p0 = level_partition(&t, 0).unwrap();
        assert_eq!(p0.sectors, vec![(Vertex(0), q(1, 1))]);
        let p3 = level_partition(&t, 3).unwrap();
        assert_eq!(p3.sectors.len(), 8);
        assert!(p3.sectors.iter().all(|(_, p)| *p == q(1, 8)));
        assert_eq!(p3.total(), q(1, 1));
        assert!(level_partition(&t, 4).is_err());
    }

    #[test]
    fn refinement() {
        let t = t2(3);
        let r = refinement_map(&t, 0, 1).unwrap();
        assert_eq!(r.fibers, vec![(Vertex(0), 1..3)]);
        let r = refinement_map(&t, 1, 3).unwrap();
        assert!(r.fibers.iter().all(|(_, ys)| ys.end - ys.start == 4));
        for (x, ys) in &r.fibers {
            for y in ys.clone() {
                assert_eq!(r.image(&t, Vertex(y)), *x);
            }
        }
        assert!(refinement_map(&t, 2, 2).is_err());
        assert!(refinement_map(&t, 1, 4).is_err());
    }

    #[test]
    fn shape_classes_match_partition() {
        let t = Tree::homogeneous(3, 4, Weights::Explicit(vec![q(1, 6), q(1, 3), q(1, 2)])).unwrap();
        for n in 0..=4 {
            let classes = shape_classes(&t, n).unwrap();
            assert_eq!(classes.len(), 1);
            assert_eq!(classes[0].count, t.level_size(n));
            assert_eq!(classes[0].mass, level_partition(&t, n).unwrap().total());
        }
        assert!(audit_measures(&t).passed());
        let deep = Tree::homogeneous(2, 31, Weights::Uniform).unwrap();
        let audit = audit_measures(&deep);
        assert!(audit.passed());
        assert_eq!(audit.totals.len(), 32);
    }
}
