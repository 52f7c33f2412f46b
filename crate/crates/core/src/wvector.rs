//! Weighted vector arithmetic in moment form.
//!
//! A weighted vector is a pair ⟨value, weight⟩. Addition averages the values
//! proportionally to the weights and adds the weights; scaling by a constant
//! multiplies the weight and leaves the value untouched. Stored in *moment*
//! form (`moment = weight · value`) both operations become plain
//! componentwise linear maps, no division happens outside [`WeightedVector::value`],
//! and the zero element has the canonical representation
//! `(moment = 0̄, weight = 0)`.

use thiserror::Error;

/// Absolute threshold below which a weight is treated as zero.
pub const EPS_WEIGHT: f64 = 1e-12;

/// Threshold on the moment norm when deciding whether a zero-weight
/// difference is the genuine zero element or an ill-conditioned residue.
pub const EPS_MOMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WvError {
    /// The weights of a difference cancel but the moments do not, so the
    /// value part of the result is genuinely undefined.
    #[error("difference has near-zero weight but a nonzero moment; its value is undefined")]
    IllConditionedDifference,
    /// The value of a (near-)zero-weight vector is undefined.
    #[error("value of a near-zero-weight vector is undefined")]
    ZeroWeightValue,
}

/// A ⟨vector, weight⟩ pair stored as `(moment, weight)` with
/// `moment = weight · value`.
///
/// Externally constructed values carry non-negative weights; intermediate
/// ledger arithmetic may produce any real weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    moment: Vec<f64>,
    weight: f64,
}

impl WeightedVector {
    /// Builds a weighted vector from value form.
    pub fn new(value: &[f64], weight: f64) -> Self {
        WeightedVector {
            moment: value.iter().map(|v| v * weight).collect(),
            weight,
        }
    }

    /// Builds a weighted vector directly from moment form.
    pub fn from_moment(moment: Vec<f64>, weight: f64) -> Self {
        WeightedVector { moment, weight }
    }

    /// The canonical zero element of dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        WeightedVector {
            moment: vec![0.0; dim],
            weight: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    /// True iff the weight is within [`EPS_WEIGHT`] of zero.
    pub fn is_zero(&self) -> bool {
        self.weight.abs() <= EPS_WEIGHT
    }

    /// The value part, `moment / weight`.
    ///
    /// Errors with [`WvError::ZeroWeightValue`] when the weight is within
    /// [`EPS_WEIGHT`] of zero.
    pub fn value(&self) -> Result<Vec<f64>, WvError> {
        if self.is_zero() {
            return Err(WvError::ZeroWeightValue);
        }
        Ok(self.moment.iter().map(|m| m / self.weight).collect())
    }

    /// Weighted-average addition. In moment form both components add.
    ///
    /// Panics if the dimensions differ; that is a usage error.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.accumulate(other);
        out
    }

    /// In-place [`WeightedVector::add`]; used by folds and hot paths.
    pub fn accumulate(&mut self, other: &Self) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "weighted vector dimension mismatch"
        );
        for (m, o) in self.moment.iter_mut().zip(&other.moment) {
            *m += o;
        }
        self.weight += other.weight;
    }

    /// Scalar multiplication: the weight (and moment) scale by `c`, the value
    /// is unchanged whenever it is defined.
    pub fn scale(&self, c: f64) -> Self {
        WeightedVector {
            moment: self.moment.iter().map(|m| m * c).collect(),
            weight: self.weight * c,
        }
    }

    /// The additive inverse operation: `x.sub(y) = z` iff `x = y.add(z)`.
    ///
    /// When both the weight and moment differences vanish the canonical zero
    /// element is returned. When the weights cancel but the moments do not,
    /// the value part of the result is undefined and
    /// [`WvError::IllConditionedDifference`] is raised.
    pub fn sub(&self, other: &Self) -> Result<Self, WvError> {
        assert_eq!(
            self.dim(),
            other.dim(),
            "weighted vector dimension mismatch"
        );
        let weight = self.weight - other.weight;
        if weight.abs() <= EPS_WEIGHT {
            let norm2: f64 = self
                .moment
                .iter()
                .zip(&other.moment)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if norm2.sqrt() <= EPS_MOMENT {
                return Ok(WeightedVector::zero(self.dim()));
            }
            return Err(WvError::IllConditionedDifference);
        }
        Ok(self.diff(other))
    }

    /// Total moment-form difference, without the conditioning check of
    /// [`WeightedVector::sub`]. The result may carry a zero or negative
    /// weight and an undefined value part; ledger arithmetic relies on this.
    pub fn diff(&self, other: &Self) -> Self {
        assert_eq!(
            self.dim(),
            other.dim(),
            "weighted vector dimension mismatch"
        );
        WeightedVector {
            moment: self
                .moment
                .iter()
                .zip(&other.moment)
                .map(|(a, b)| a - b)
                .collect(),
            weight: self.weight - other.weight,
        }
    }

    /// Folds a collection with repeated addition. The empty fold is the zero
    /// element of dimension `dim`; moment form makes the result independent
    /// of ordering up to floating-point addition order.
    pub fn fold<'a, I>(dim: usize, xs: I) -> Self
    where
        I: IntoIterator<Item = &'a WeightedVector>,
    {
        let mut acc = WeightedVector::zero(dim);
        for x in xs {
            acc.accumulate(x);
        }
        acc
    }
}
