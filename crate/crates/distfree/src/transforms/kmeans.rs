//! Lloyd's k-means with seeded k-means++ or random initialization.
//!
//! The fit canonicalizes its input by sorting points lexicographically before
//! initialization, so the result is exactly permutation invariant given the
//! seed. Converged centers are themselves sorted lexicographically, fixing
//! the otherwise arbitrary center labeling deterministically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInit {
    PlusPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centers: Vec<Vec<f64>>,
    pub k: usize,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn init_centers(points: &[Vec<f64>], k: usize, init: KMeansInit, rng: &mut Rng) -> Vec<Vec<f64>> {
    match init {
        KMeansInit::Random => {
            let mut indices: Vec<usize> = (0..points.len()).collect();
            rng.shuffle(&mut indices);
            indices[..k].iter().map(|&i| points[i].clone()).collect()
        }
        KMeansInit::PlusPlus => {
            let mut centers = vec![points[rng.below(points.len())].clone()];
            while centers.len() < k {
                let weights: Vec<f64> =
                    points.iter().map(|p| nearest(&centers, p).1).collect();
                let idx = if weights.iter().sum::<f64>() > 0.0 {
                    rng.weighted(&weights)
                } else {
                    rng.below(points.len())
                };
                centers.push(points[idx].clone());
            }
            centers
        }
    }
}

pub fn fit_kmeans(
    points: &[Vec<f64>],
    k: usize,
    init: KMeansInit,
    iters: usize,
    seed: u64,
) -> Result<KMeansModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidParameter(format!(
            "k-means needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::SpaceMismatch("mixed dimensions in k-means input".into()));
    }

    let mut data: Vec<Vec<f64>> = points.to_vec();
    data.sort_by(|a, b| lex_cmp(a, b));

    let mut rng = Rng::new(seed);
    let mut centers = init_centers(&data, k, init, &mut rng);
    let mut assignment = vec![usize::MAX; data.len()];

    for _ in 0..iters {
        let mut changed = false;
        for (i, p) in data.iter().enumerate() {
            let (j, _) = nearest(&centers, p);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in data.iter().enumerate() {
            let j = assignment[i];
            counts[j] += 1;
            for d in 0..dim {
                sums[j][d] += p[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for d in 0..dim {
                    centers[j][d] = sums[j][d] / counts[j] as f64;
                }
            } else {
                // re-seed an emptied center at the point farthest from its
                // current center
                let far = data
                    .iter()
                    .enumerate()
                    .max_by(|(ia, a), (ib, b)| {
                        let da = sq_dist(a, &centers[assignment[*ia]]);
                        let db = sq_dist(b, &centers[assignment[*ib]]);
                        da.total_cmp(&db)
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centers[j] = data[far].clone();
            }
        }
    }

    centers.sort_by(|a, b| lex_cmp(a, b));
    let inertia = data.iter().map(|p| nearest(&centers, p).1).sum();
    Ok(KMeansModel { centers, k, inertia })
}

impl KMeansModel {
    /// Distance to the first (lexicographically smallest) center minus the
    /// distance to the nearest center; zero on the first center's cell.
    pub fn score(&self, z: &[f64]) -> f64 {
        let d1 = sq_dist(z, &self.centers[0]).sqrt();
        let dmin = nearest(&self.centers, z).1.sqrt();
        d1 - dmin
    }
}
