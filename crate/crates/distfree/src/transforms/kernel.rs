//! Kernel smoothing: density estimation, Nadaraya-Watson regression, and
//! conditional densities, with a per-coordinate plug-in bandwidth rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Kernel density at standardized distance `u`; integrates to one.
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (std::f64::consts::TAU).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySettings {
    pub kernel: Kernel,
    /// Half-width applied to every coordinate; `None` selects the plug-in
    /// rule 1.06 * sd * n^(-1/5) per coordinate.
    pub bandwidth: Option<f64>,
}

impl Default for DensitySettings {
    fn default() -> Self {
        Self { kernel: Kernel::Gaussian, bandwidth: None }
    }
}

impl DensitySettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// 1.06 * sd * n^(-1/5), with a unit fallback when the coordinate carries no
/// spread (single observation or constant data).
pub(crate) fn plugin_bandwidth(values: &[f64]) -> f64 {
    let sd = sample_sd(values);
    if sd > 0.0 && sd.is_finite() {
        1.06 * sd * (values.len() as f64).powf(-0.2)
    } else {
        1.0
    }
}

fn bandwidths_for(points: &[Vec<f64>], settings: &DensitySettings) -> Vec<f64> {
    let dim = points[0].len();
    match settings.bandwidth {
        Some(h) => vec![h; dim],
        None => (0..dim)
            .map(|d| {
                let coord: Vec<f64> = points.iter().map(|p| p[d]).collect();
                plugin_bandwidth(&coord)
            })
            .collect(),
    }
}

/// Product-kernel density estimator over the fitted support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub kernel: Kernel,
    pub bandwidths: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl DensityModel {
    pub fn fit(points: Vec<Vec<f64>>, settings: &DensitySettings) -> Result<Self> {
        settings.validate()?;
        if points.is_empty() {
            return Err(Error::EmptySequence);
        }
        let bandwidths = bandwidths_for(&points, settings);
        Ok(Self { kernel: settings.kernel, bandwidths, points })
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    /// Estimated density at `z`; nonnegative everywhere.
    pub fn density(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dim(), "density query dimension mismatch");
        let n = self.points.len() as f64;
        let mut total = 0.0;
        for p in &self.points {
            let mut prod = 1.0;
            for d in 0..z.len() {
                let h = self.bandwidths[d];
                prod *= self.kernel.eval((z[d] - p[d]) / h) / h;
            }
            total += prod;
        }
        total / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSettings {
    pub kernel: Kernel,
    pub bandwidth: Option<f64>,
}

impl Default for RegressionSettings {
    fn default() -> Self {
        Self { kernel: Kernel::Gaussian, bandwidth: None }
    }
}

/// Nadaraya-Watson estimator of E[Y | X = x].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kernel: Kernel,
    pub bandwidths: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    y_mean: f64,
}

impl RegressionModel {
    pub fn fit(xs: Vec<Vec<f64>>, ys: Vec<f64>, settings: &RegressionSettings) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParameter(
                "regression fit needs matching nonempty x and y sequences".into(),
            ));
        }
        if let Some(h) = settings.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        let density_settings = DensitySettings {
            kernel: settings.kernel,
            bandwidth: settings.bandwidth,
        };
        let bandwidths = bandwidths_for(&xs, &density_settings);
        let y_mean = mean(&ys);
        Ok(Self { kernel: settings.kernel, bandwidths, xs, ys, y_mean })
    }

    /// Kernel-weighted average of the responses; falls back to the global
    /// response mean when every weight underflows to zero.
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.bandwidths.len(), "prediction dimension mismatch");
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, &yi) in self.xs.iter().zip(&self.ys) {
            let mut w = 1.0;
            for d in 0..x.len() {
                w *= self.kernel.eval((x[d] - xi[d]) / self.bandwidths[d]);
            }
            num += w * yi;
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            self.y_mean
        }
    }
}

/// Smoothed conditional density of a real response given features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondDensityModel {
    pub kernel: Kernel,
    pub x_bandwidths: Vec<f64>,
    pub y_bandwidth: f64,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl CondDensityModel {
    pub fn fit(xs: Vec<Vec<f64>>, ys: Vec<f64>, settings: &RegressionSettings) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParameter(
                "conditional density fit needs matching nonempty x and y sequences".into(),
            ));
        }
        let density_settings = DensitySettings {
            kernel: settings.kernel,
            bandwidth: settings.bandwidth,
        };
        let x_bandwidths = bandwidths_for(&xs, &density_settings);
        let y_bandwidth = settings.bandwidth.unwrap_or_else(|| plugin_bandwidth(&ys));
        Ok(Self { kernel: settings.kernel, x_bandwidths, y_bandwidth, xs, ys })
    }

    /// Estimated p(y | x). With zero feature weight at `x` the estimate
    /// degenerates to the marginal smooth of the responses.
    pub fn cond_density(&self, x: &[f64], y: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, &yi) in self.xs.iter().zip(&self.ys) {
            let mut w = 1.0;
            for d in 0..x.len() {
                w *= self.kernel.eval((x[d] - xi[d]) / self.x_bandwidths[d]);
            }
            num += w * self.kernel.eval((y - yi) / self.y_bandwidth) / self.y_bandwidth;
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            let n = self.ys.len() as f64;
            self.ys
                .iter()
                .map(|&yi| self.kernel.eval((y - yi) / self.y_bandwidth) / self.y_bandwidth)
                .sum::<f64>()
                / n
        }
    }

    pub fn response_range(&self) -> (f64, f64) {
        let lo = self.ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Trapezoid quadrature weights for an ordered grid.
pub(crate) fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let g = grid.len();
    if g == 1 {
        return vec![1.0];
    }
    (0..g)
        .map(|i| {
            let left = if i == 0 { grid[0] } else { grid[i - 1] };
            let right = if i == g - 1 { grid[g - 1] } else { grid[i + 1] };
            (right - left) / 2.0
        })
        .collect()
}

/// Mass of the region where the density reaches `level`, as a fraction of
/// total mass: sum of `density * weight` over entries with density >= level,
/// normalized. Zero total mass scores 1 (no evidence against any level).
pub(crate) fn hpd_mass(densities: &[f64], weights: &[f64], level: f64) -> f64 {
    let total: f64 = densities.iter().zip(weights).map(|(d, w)| d * w).sum();
    if total <= 0.0 {
        return 1.0;
    }
    let above: f64 = densities
        .iter()
        .zip(weights)
        .filter(|(d, _)| **d >= level)
        .map(|(d, w)| d * w)
        .sum();
    (above / total).clamp(0.0, 1.0)
}

/// Scores a discrete class distribution the way the continuous highest-density
/// score does: each class scores the total probability of classes at least as
/// probable as itself, so likelier classes score lower.
pub fn hpd_classification_scores(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .map(|&p| probs.iter().filter(|&&q| q >= p).sum())
        .collect()
}
