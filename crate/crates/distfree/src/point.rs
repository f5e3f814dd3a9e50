//! Sample-space points: real scalars, real vectors, or (features, response)
//! pairs for regression-style data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Real(f64),
    Vector(Vec<f64>),
    /// Regression observation: feature vector plus a real response.
    Pair { x: Vec<f64>, y: f64 },
}

impl Point {
    pub fn real(v: f64) -> Self {
        Point::Real(v)
    }

    pub fn vector(coords: Vec<f64>) -> Self {
        Point::Vector(coords)
    }

    pub fn pair(x: Vec<f64>, y: f64) -> Self {
        Point::Pair { x, y }
    }

    pub fn as_real(&self) -> Result<f64> {
        match self {
            Point::Real(v) => Ok(*v),
            other => Err(Error::SpaceMismatch(format!(
                "expected a real scalar, got {}",
                other.space_name()
            ))),
        }
    }

    pub fn as_pair(&self) -> Result<(&[f64], f64)> {
        match self {
            Point::Pair { x, y } => Ok((x, *y)),
            other => Err(Error::SpaceMismatch(format!(
                "expected a (features, response) pair, got {}",
                other.space_name()
            ))),
        }
    }

    pub fn space_name(&self) -> &'static str {
        match self {
            Point::Real(_) => "real",
            Point::Vector(_) => "vector",
            Point::Pair { .. } => "pair",
        }
    }

    /// Runs `f` on the point's coordinates laid out flat. A scalar is a
    /// 1-vector; a pair is features followed by the response, so joint-space
    /// transforms (norm balls, densities) apply uniformly.
    pub fn with_flat<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        match self {
            Point::Real(v) => f(&[*v]),
            Point::Vector(coords) => f(coords),
            Point::Pair { x, y } => {
                let mut flat = Vec::with_capacity(x.len() + 1);
                flat.extend_from_slice(x);
                flat.push(*y);
                f(&flat)
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.with_flat(|c| c.to_vec())
    }

    pub fn flat_dim(&self) -> usize {
        match self {
            Point::Real(_) => 1,
            Point::Vector(coords) => coords.len(),
            Point::Pair { x, .. } => x.len() + 1,
        }
    }
}

/// Flattens a dataset, checking that all points share one dimension.
pub fn flatten_all(points: &[Point]) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::EmptySequence);
    }
    let dim = points[0].flat_dim();
    points
        .iter()
        .map(|p| {
            if p.flat_dim() != dim {
                Err(Error::SpaceMismatch(format!(
                    "mixed dimensions {} and {}",
                    dim,
                    p.flat_dim()
                )))
            } else {
                Ok(p.flat())
            }
        })
        .collect()
}

/// Extracts scalar values, erroring on vectors or pairs.
pub fn reals(points: &[Point]) -> Result<Vec<f64>> {
    points.iter().map(|p| p.as_real()).collect()
}
