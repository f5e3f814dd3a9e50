//! Principal-component projections and covariance whitening.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a direction counts as
/// numerically rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRule {
    Fixed(usize),
    /// Keep every component whose variance is at least 10% of the leading
    /// component's.
    Elbow,
}

/// A fitted projection: orthonormal component rows, the projected-data mean,
/// and per-component inverse standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub components: Vec<Vec<f64>>,
    pub proj_mean: Vec<f64>,
    pub inv_sd: Vec<f64>,
    pub k: usize,
}

pub(crate) fn column_means(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let mut means = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            means[d] += p[d];
        }
    }
    for m in &mut means {
        *m /= points.len() as f64;
    }
    means
}

/// Covariance matrix with the 1/n convention.
pub(crate) fn covariance(points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let dim = points[0].len();
    let means = column_means(points);
    let mut cov = DMatrix::zeros(dim, dim);
    for p in points {
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += (p[a] - means[a]) * (p[b] - means[b]);
            }
        }
    }
    cov / n as f64
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = m.nrows();
    let eigen = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eigen.eigenvectors.column(i).iter().cloned().collect())
        .collect();
    (values, vectors)
}

pub fn fit_projection(points: &[Vec<f64>], rule: KRule) -> Result<ProjectionModel> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "projection fit needs at least 2 points".into(),
        ));
    }
    let dim = points[0].len();
    let (values, vectors) = sorted_eigen(covariance(points));
    let lead = values[0].max(0.0);

    let k = match rule {
        KRule::Fixed(k) => {
            if k == 0 || k > dim {
                return Err(Error::InvalidParameter(format!(
                    "component count {k} outside 1..={dim}"
                )));
            }
            if values[k - 1] <= RANK_TOL * lead.max(1e-300) {
                return Err(Error::InvalidParameter(format!(
                    "rank-deficient input: component {k} carries no variance"
                )));
            }
            k
        }
        KRule::Elbow => {
            if lead <= 0.0 {
                return Err(Error::InvalidParameter(
                    "degenerate input: no variance in any direction".into(),
                ));
            }
            values
                .iter()
                .take_while(|&&v| v >= 0.1 * lead)
                .count()
                .max(1)
        }
    };

    let components: Vec<Vec<f64>> = vectors[..k].to_vec();
    let projected: Vec<Vec<f64>> = points
        .iter()
        .map(|p| components.iter().map(|c| dot(c, p)).collect())
        .collect();
    let proj_mean = column_means(&projected);
    let inv_sd: Vec<f64> = values[..k].iter().map(|&v| 1.0 / v.sqrt()).collect();

    Ok(ProjectionModel { components, proj_mean, inv_sd, k })
}

impl ProjectionModel {
    /// Norm of the standardized projection of `z - mean`.
    pub fn score(&self, z: &[f64]) -> f64 {
        assert_eq!(
            z.len(),
            self.components[0].len(),
            "projection query dimension mismatch"
        );
        let mut total = 0.0;
        for j in 0..self.k {
            let coord = (dot(&self.components[j], z) - self.proj_mean[j]) * self.inv_sd[j];
            total += coord * coord;
        }
        total.sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Whitening map for norm-ball scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Whitening {
    None,
    /// Inverse square root of the full covariance matrix, row-major.
    Full { inv_sqrt: Vec<Vec<f64>> },
    /// Per-coordinate inverse standard deviations.
    Diagonal { inv_sd: Vec<f64> },
}

impl Whitening {
    pub fn apply_norm(&self, centered: &[f64]) -> f64 {
        match self {
            Whitening::None => centered.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Whitening::Full { inv_sqrt } => inv_sqrt
                .iter()
                .map(|row| dot(row, centered))
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt(),
            Whitening::Diagonal { inv_sd } => centered
                .iter()
                .zip(inv_sd)
                .map(|(v, s)| v * s)
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Inverse square root of the sample covariance. Falls back to the diagonal
/// when the covariance is numerically singular; errors only when some
/// coordinate carries no variance at all.
pub fn fit_whitening(points: &[Vec<f64>], diagonal_only: bool) -> Result<Whitening> {
    let cov = covariance(points);
    let dim = cov.nrows();
    let full_ok = if diagonal_only {
        false
    } else {
        let (values, _) = sorted_eigen(cov.clone());
        values[dim - 1] > RANK_TOL * values[0].max(1e-300)
    };

    if full_ok {
        let (values, vectors) = sorted_eigen(cov);
        // U diag(1/sqrt(lambda)) U^T
        let mut inv_sqrt = vec![vec![0.0; dim]; dim];
        for (a, row) in inv_sqrt.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                *entry = (0..dim)
                    .map(|j| vectors[j][a] * vectors[j][b] / values[j].sqrt())
                    .sum();
            }
        }
        Ok(Whitening::Full { inv_sqrt })
    } else {
        let mut inv_sd = Vec::with_capacity(dim);
        for d in 0..dim {
            let var = cov[(d, d)];
            if var <= 0.0 {
                return Err(Error::DegenerateCoordinate(d));
            }
            inv_sd.push(1.0 / var.sqrt());
        }
        Ok(Whitening::Diagonal { inv_sd })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn line_data_keeps_one_component() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let model = fit_projection(&points, KRule::Elbow).unwrap();
        assert_eq!(model.k, 1);
        // displacement orthogonal to the line is invisible to the score
        let on_line = model.score(&[20.0, 20.0]);
        let off_line = model.score(&[20.0 + 3.0, 20.0 - 3.0]);
        assert!((on_line - off_line).abs() < 1e-9);
    }

    #[test]
    fn components_are_orthonormal() {
        let mut rng = Rng::new(44);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.normal()).collect())
            .collect();
        let model = fit_projection(&points, KRule::Fixed(3)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let d = dot(&model.components[a], &model.components[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficient_fixed_k_rejected() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(fit_projection(&points, KRule::Fixed(2)).is_err());
        assert!(fit_projection(&points, KRule::Fixed(1)).is_ok());
    }

    #[test]
    fn full_whitening_standardizes() {
        let mut rng = Rng::new(5);
        let points: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let a = rng.normal();
                let b = rng.normal();
                vec![2.0 * a, a + 0.5 * b]
            })
            .collect();
        let w = fit_whitening(&points, false).unwrap();
        assert!(matches!(w, Whitening::Full { .. }));
        // whitened squared norms of centered points average about the dimension
        let means = column_means(&points);
        let avg: f64 = points
            .iter()
            .map(|p| {
                let centered: Vec<f64> = p.iter().zip(&means).map(|(v, m)| v - m).collect();
                let norm = w.apply_norm(&centered);
                norm * norm
            })
            .sum::<f64>()
            / points.len() as f64;
        assert!((avg - 2.0).abs() < 0.05, "avg {avg}");
    }

    #[test]
    fn singular_covariance_falls_back_to_diagonal() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0 * i as f64]).collect();
        let w = fit_whitening(&points, false).unwrap();
        assert!(matches!(w, Whitening::Diagonal { .. }));
    }

    #[test]
    fn zero_variance_coordinate_errors() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 7.0]).collect();
        assert!(matches!(
            fit_whitening(&points, true),
            Err(Error::DegenerateCoordinate(1))
        ));
    }
}
