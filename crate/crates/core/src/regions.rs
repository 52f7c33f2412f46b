//! Convex region classifiers.
//!
//! A classifier maps a point of R^d to one of a family of non-overlapping
//! convex regions (or to [`RegionId::Nil`] outside all of them). The protocol
//! only ever talks to the [`Classifier`] trait; the shipped instance is the
//! nearest-source rule whose cells are Voronoi regions and whose `Nil` set is
//! empty.

use thiserror::Error;

use crate::wvector::WeightedVector;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("a source set needs at least two sources, got {0}")]
    TooFewSources(usize),
    #[error("sources {0} and {1} coincide")]
    DuplicateSource(usize, usize),
    #[error("source {0} has dimension {1}, expected {2}")]
    DimensionMismatch(usize, usize, usize),
}

/// Either the index of a source's cell or the complement of all regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionId {
    Source(usize),
    Nil,
}

impl RegionId {
    pub fn index(self) -> Option<usize> {
        match self {
            RegionId::Source(i) => Some(i),
            RegionId::Nil => None,
        }
    }
}

/// A family of non-overlapping convex regions over R^d.
pub trait Classifier {
    fn dim(&self) -> usize;
    /// The region containing `x`. Deterministic, including on boundaries.
    fn classify(&self, x: &[f64]) -> RegionId;
}

/// An ordered set of k ≥ 2 pairwise-distinct candidate vectors whose
/// induced classifier assigns each point to its L2-nearest source.
///
/// Boundary ties go to the smallest index, which makes the cells a total,
/// deterministic partition of R^d; every cell is convex and `Nil` is never
/// produced.
#[derive(Debug, Clone)]
pub struct SourceSet {
    sources: Vec<Vec<f64>>,
    dim: usize,
}

impl SourceSet {
    pub fn new(sources: Vec<Vec<f64>>) -> Result<Self, RegionError> {
        if sources.len() < 2 {
            return Err(RegionError::TooFewSources(sources.len()));
        }
        let dim = sources[0].len();
        for (i, s) in sources.iter().enumerate() {
            if s.len() != dim {
                return Err(RegionError::DimensionMismatch(i, s.len(), dim));
            }
        }
        for i in 0..sources.len() {
            for j in i + 1..sources.len() {
                if sources[i] == sources[j] {
                    return Err(RegionError::DuplicateSource(i, j));
                }
            }
        }
        Ok(SourceSet { sources, dim })
    }

    pub fn k(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[Vec<f64>] {
        &self.sources
    }

    pub fn source(&self, i: usize) -> &[f64] {
        &self.sources[i]
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Index of the source nearest to `x`, excluding index `skip`.
    /// Ties go to the smallest index.
    pub fn nearest_excluding(&self, x: &[f64], skip: usize) -> usize {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.sources.iter().enumerate() {
            if i == skip {
                continue;
            }
            let d = Self::dist2(x, s);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

impl Classifier for SourceSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn classify(&self, x: &[f64]) -> RegionId {
        debug_assert_eq!(x.len(), self.dim, "classify: dimension mismatch");
        let mut best = 0;
        let mut best_d = Self::dist2(x, &self.sources[0]);
        for (i, s) in self.sources.iter().enumerate().skip(1) {
            let d = Self::dist2(x, s);
            // strict improvement only: ties stay at the smaller index
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        RegionId::Source(best)
    }
}

/// True iff `x` and `y` fall in the same region, with zero-weight vectors
/// treated as compatible with everything. This mirrors the guard structure
/// of the stopping rule: a zero-weight term imposes no constraint.
pub fn same_region<C: Classifier>(classifier: &C, x: &WeightedVector, y: &WeightedVector) -> bool {
    if x.is_zero() || y.is_zero() {
        return true;
    }
    let vx = x.value().expect("nonzero weight");
    let vy = y.value().expect("nonzero weight");
    classifier.classify(&vx) == classifier.classify(&vy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_sources() -> SourceSet {
        SourceSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn classify_picks_strictly_nearer_source() {
        let c = two_sources();
        assert_eq!(c.classify(&[0.4, 0.0]), RegionId::Source(0));
    }

    #[test]
    fn classify_breaks_exact_ties_to_smallest_index() {
        let c = two_sources();
        assert_eq!(c.classify(&[0.5, 0.0]), RegionId::Source(0));
    }

    #[test]
    fn classify_matches_brute_force_argmin() {
        let c = SourceSet::new(vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let x = [2.0, 2.0];
        // independent exhaustive comparison over all source distances
        let mut best = 0;
        for i in 1..c.k() {
            let di: f64 = c
                .source(i)
                .iter()
                .zip(&x)
                .map(|(s, v)| (s - v) * (s - v))
                .sum();
            let db: f64 = c
                .source(best)
                .iter()
                .zip(&x)
                .map(|(s, v)| (s - v) * (s - v))
                .sum();
            if di < db {
                best = i;
            }
        }
        assert_eq!(best, 1);
        assert_eq!(c.classify(&x), RegionId::Source(best));
    }

    #[test]
    fn same_region_zero_weight_guard() {
        let c = two_sources();
        let zero = WeightedVector::zero(2);
        let any = WeightedVector::new(&[0.9, 0.0], 1.0);
        assert!(same_region(&c, &zero, &any));
        assert!(same_region(&c, &any, &zero));
    }

    #[test]
    fn same_region_compares_cells() {
        let c = two_sources();
        let a = WeightedVector::new(&[0.4, 0.0], 1.0);
        let b = WeightedVector::new(&[0.4, 0.0], 2.5);
        let far = WeightedVector::new(&[0.9, 0.0], 1.0);
        assert!(same_region(&c, &a, &b));
        assert!(!same_region(&c, &a, &far));
    }

    #[test]
    fn classify_ignores_weight_scale() {
        let c = two_sources();
        let x = WeightedVector::new(&[0.2, 0.4], 1.0);
        let y = x.scale(37.5);
        assert_eq!(
            c.classify(&x.value().unwrap()),
            c.classify(&y.value().unwrap())
        );
    }

    #[test]
    fn voronoi_cells_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = SourceSet::new(vec![
            vec![0.0, 0.0],
            vec![2.0, 0.5],
            vec![-1.0, 2.0],
            vec![0.5, -2.0],
        ])
        .unwrap();
        let mut pairs = 0;
        while pairs < 50 {
            let a = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let b = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let ra = c.classify(&a);
            if ra != c.classify(&b) {
                continue;
            }
            pairs += 1;
            for _ in 0..100 {
                let t: f64 = rng.gen_range(0.0..1.0);
                let p = [a[0] * (1.0 - t) + b[0] * t, a[1] * (1.0 - t) + b[1] * t];
                assert_eq!(c.classify(&p), ra, "cell not convex at t={t}");
            }
        }
    }

    #[test]
    fn never_returns_nil() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = SourceSet::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, -1.0]]).unwrap();
        for _ in 0..1000 {
            let x = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
            assert_ne!(c.classify(&x), RegionId::Nil);
        }
    }

    #[test]
    fn construction_validation() {
        assert_eq!(
            SourceSet::new(vec![vec![1.0]]).unwrap_err(),
            RegionError::TooFewSources(1)
        );
        assert_eq!(
            SourceSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap_err(),
            RegionError::DuplicateSource(0, 1)
        );
        assert_eq!(
            SourceSet::new(vec![vec![1.0, 0.0], vec![1.0]]).unwrap_err(),
            RegionError::DimensionMismatch(1, 1, 2)
        );
    }
}
