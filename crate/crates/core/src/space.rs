//! Finite-dimensional real Hilbert-space kernel: vectors with the standard
//! inner product, and the closed ball that every other module samples from.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("vector entry at index {index} is not finite ({value})")]
    NonFiniteEntry { index: usize, value: f64 },
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("inner radius must satisfy 0 <= inner < radius, got inner={inner}, radius={radius}")]
    BadInnerRadius { inner: f64, radius: f64 },
}

/// A vector in R^d. All entries are finite; binary operations panic on
/// dimension mismatch (a programming error, not a recoverable condition).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self, SpaceError> {
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() {
                return Err(SpaceError::NonFiniteEntry { index, value });
            }
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize) -> f64) -> Self {
        Vector((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn check_dims(&self, other: &Vector, op: &str) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "dimension mismatch in {op}: {} vs {}",
            self.dim(),
            other.dim()
        );
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.check_dims(other, "add");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.check_dims(other, "sub");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| s * a).collect())
    }

    /// self + s * other
    pub fn add_scaled(&self, s: f64, other: &Vector) -> Vector {
        self.check_dims(other, "add_scaled");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &Vector) -> Vector {
        self.check_dims(other, "hadamard");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<f64>::deserialize(deserializer)?;
        Vector::new(entries).map_err(serde::de::Error::custom)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.0
    }
}

/// Standard Euclidean inner product. Panics on dimension mismatch.
pub fn inner(a: &Vector, b: &Vector) -> f64 {
    a.check_dims(b, "inner");
    a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &Vector) -> f64 {
    inner(a, a).sqrt()
}

/// Euclidean distance.
pub fn dist(a: &Vector, b: &Vector) -> f64 {
    norm(&a.sub(b))
}

/// Closed ball around the exact solution. `inner_radius` is the lower edge
/// of the annulus used by the balancing estimator; it plays no role in
/// membership tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallSpec {
    center: Vector,
    radius: f64,
    inner_radius: f64,
}

impl BallSpec {
    pub fn new(center: Vector, radius: f64) -> Result<Self, SpaceError> {
        Self::with_inner_radius(center, radius, 0.0)
    }

    pub fn with_inner_radius(
        center: Vector,
        radius: f64,
        inner_radius: f64,
    ) -> Result<Self, SpaceError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SpaceError::BadRadius(radius));
        }
        if !(inner_radius.is_finite() && (0.0..radius).contains(&inner_radius)) {
            return Err(SpaceError::BadInnerRadius {
                inner: inner_radius,
                radius,
            });
        }
        Ok(BallSpec {
            center,
            radius,
            inner_radius,
        })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Membership in the closed ball: `||x - center|| <= radius`.
    pub fn contains(&self, x: &Vector) -> bool {
        dist(x, &self.center) <= self.radius
    }

    /// Escape test: strict exceedance of the radius.
    pub fn strictly_outside(&self, x: &Vector) -> bool {
        dist(x, &self.center) > self.radius
    }
}
