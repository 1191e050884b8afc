use std::ops::Index;

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A per-category probability distribution: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0 + SUM_TOLERANCE) {
            return Err(Error::InvalidProbability(format!("entry {v} outside [0,1]")));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbability(format!("entries sum to {s}")));
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(len: usize) -> Self {
        ProbVector(vec![1.0 / len as f64; len])
    }

    /// Normalize nonnegative scores by their sum, falling back to the uniform
    /// vector when the sum is below `floor`.
    pub fn normalized(scores: &[f64], floor: f64) -> Self {
        let total: f64 = scores.iter().sum();
        if !(total >= floor) || !total.is_finite() {
            return ProbVector::uniform(scores.len());
        }
        ProbVector(scores.iter().map(|s| s / total).collect())
    }

    /// Wraps values without validation; callers guarantee the invariant.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ProbVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
