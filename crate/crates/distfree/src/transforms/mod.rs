//! Fitted real-valued score transforms.
//!
//! A transform maps sample-space points to conformity scores (small =
//! conforming). Each carries a justification tag recording why scoring with
//! it preserves exchangeability:
//!
//! - [`Justification::PermutationInvariant`]: the fit reads its data as a
//!   multiset, so the transform may be fit on pooled data (full conformal,
//!   pooled rank tests).
//! - [`Justification::TrainingSplitOnly`]: the fit uses information (sample
//!   labels, joint structure) that is only safe when fit on a held-out
//!   training split.
//! - [`Justification::Unchecked`]: user-supplied; callers decide.
//!
//! Every fitted transform is immutable and freely shareable across threads.

pub mod kernel;
pub mod kmeans;
pub mod projection;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{flatten_all, reals, Point};

pub use kernel::{
    hpd_classification_scores, CondDensityModel, DensityModel, DensitySettings, Kernel,
    RegressionModel, RegressionSettings,
};
pub use kmeans::{fit_kmeans, KMeansInit, KMeansModel};
pub use projection::{fit_projection, fit_whitening, KRule, ProjectionModel, Whitening};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Justification {
    PermutationInvariant,
    TrainingSplitOnly,
    Unchecked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhitenMode {
    None,
    FullCovariance,
    Diagonal,
}

type UserFn = dyn Fn(&Point) -> f64 + Send + Sync;

#[derive(Clone)]
pub(crate) enum FittedKind {
    Identity,
    AbsDeviation { rule: Center, center: f64 },
    NormBall { mean: Vec<f64>, whitening: Whitening },
    PcaNormBall { model: ProjectionModel },
    DensityLevelset { model: DensityModel },
    RegressionResidual { model: RegressionModel },
    ConditionalDensityHpd { model: CondDensityModel, y_grid: Vec<f64> },
    KMeansScore { model: KMeansModel, seed: u64 },
    DensityRatio { numerator: DensityModel, denominator: DensityModel },
    ClassProbability { model: RegressionModel },
    User { f: Arc<UserFn> },
}

impl fmt::Debug for FittedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(kind_name_of(self))
    }
}

fn kind_name_of(kind: &FittedKind) -> &'static str {
    match kind {
        FittedKind::Identity => "identity",
        FittedKind::AbsDeviation { rule: Center::Mean, .. } => "abs-deviation-mean",
        FittedKind::AbsDeviation { rule: Center::Median, .. } => "abs-deviation-median",
        FittedKind::NormBall { whitening: Whitening::None, .. } => "norm-ball",
        FittedKind::NormBall { .. } => "whitened-norm-ball",
        FittedKind::PcaNormBall { .. } => "pca-norm-ball",
        FittedKind::DensityLevelset { .. } => "density-levelset",
        FittedKind::RegressionResidual { .. } => "regression-residual",
        FittedKind::ConditionalDensityHpd { .. } => "conditional-density-hpd",
        FittedKind::KMeansScore { .. } => "kmeans-cluster",
        FittedKind::DensityRatio { .. } => "density-ratio",
        FittedKind::ClassProbability { .. } => "class-probability",
        FittedKind::User { .. } => "user-defined",
    }
}

/// Evaluation outcome with bookkeeping flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub value: f64,
    /// Set when a response had to be clamped to the fitted grid hull.
    pub clamped: bool,
}

/// A fitted score transform.
#[derive(Debug, Clone)]
pub struct ScoreTransform {
    kind: FittedKind,
    justification: Justification,
}

impl ScoreTransform {
    pub fn justification(&self) -> Justification {
        self.justification
    }

    pub fn kind_name(&self) -> &'static str {
        kind_name_of(&self.kind)
    }

    /// Conformity score of `z`. Returns `f64::INFINITY` where a fitted
    /// density vanishes. Panics if `z` lives in a different sample space
    /// than the fit data.
    pub fn evaluate(&self, z: &Point) -> f64 {
        self.evaluate_recorded(z).value
    }

    pub fn evaluate_recorded(&self, z: &Point) -> EvalRecord {
        let mut clamped = false;
        let value = match &self.kind {
            FittedKind::Identity => z.with_flat(|c| {
                assert_eq!(c.len(), 1, "identity transform expects scalar points");
                c[0]
            }),
            FittedKind::AbsDeviation { center, .. } => z.with_flat(|c| {
                assert_eq!(c.len(), 1, "absolute-deviation transform expects scalar points");
                (c[0] - center).abs()
            }),
            FittedKind::NormBall { mean, whitening } => z.with_flat(|c| {
                assert_eq!(c.len(), mean.len(), "norm-ball dimension mismatch");
                let centered: Vec<f64> = c.iter().zip(mean).map(|(v, m)| v - m).collect();
                whitening.apply_norm(&centered)
            }),
            FittedKind::PcaNormBall { model } => z.with_flat(|c| model.score(c)),
            FittedKind::DensityLevelset { model } => z.with_flat(|c| {
                let p = model.density(c);
                if p > 0.0 {
                    1.0 / p
                } else {
                    f64::INFINITY
                }
            }),
            FittedKind::RegressionResidual { model } => {
                let (x, y) = z.as_pair().expect("regression residual expects pair points");
                (y - model.predict(x)).abs()
            }
            FittedKind::ConditionalDensityHpd { model, y_grid } => {
                let (x, y) = z.as_pair().expect("conditional-density score expects pair points");
                let lo = y_grid[0];
                let hi = y_grid[y_grid.len() - 1];
                let y_eff = if y < lo || y > hi {
                    clamped = true;
                    y.clamp(lo, hi)
                } else {
                    y
                };
                let densities: Vec<f64> =
                    y_grid.iter().map(|&g| model.cond_density(x, g)).collect();
                let weights = kernel::trapezoid_weights(y_grid);
                let level = model.cond_density(x, y_eff);
                kernel::hpd_mass(&densities, &weights, level)
            }
            FittedKind::KMeansScore { model, .. } => z.with_flat(|c| model.score(c)),
            FittedKind::DensityRatio { numerator, denominator } => z.with_flat(|c| {
                let px = numerator.density(c);
                let py = denominator.density(c);
                if py > 0.0 {
                    px / py
                } else if px > 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                }
            }),
            FittedKind::ClassProbability { model } => z.with_flat(|c| model.predict(c)),
            FittedKind::User { f } => f(z),
        };
        EvalRecord { value, clamped }
    }

    pub(crate) fn from_kind(kind: FittedKind, justification: Justification) -> Self {
        Self { kind, justification }
    }
}

/// The identity score on scalar points.
pub fn identity() -> ScoreTransform {
    ScoreTransform::from_kind(FittedKind::Identity, Justification::PermutationInvariant)
}

/// Wraps an arbitrary user function as a transform. Tagged
/// [`Justification::Unchecked`]: nothing is verified about its fit
/// discipline, so pooled-data procedures refuse it.
pub fn user_defined<F>(f: F) -> ScoreTransform
where
    F: Fn(&Point) -> f64 + Send + Sync + 'static,
{
    ScoreTransform::from_kind(FittedKind::User { f: Arc::new(f) }, Justification::Unchecked)
}

/// |z - c| with c the mean or median of the fit data.
pub fn fit_abs_deviation(data: &[f64], rule: Center) -> Result<ScoreTransform> {
    if data.is_empty() {
        return Err(Error::EmptySequence);
    }
    let center = match rule {
        Center::Mean => kernel::mean(data),
        Center::Median => {
            let mut sorted = data.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            }
        }
    };
    Ok(ScoreTransform::from_kind(
        FittedKind::AbsDeviation { rule, center },
        Justification::PermutationInvariant,
    ))
}

/// Distance from the fit-data mean, optionally whitened. A singular full
/// covariance falls back to its diagonal automatically.
pub fn fit_norm_ball(data: &[Point], whiten: WhitenMode) -> Result<ScoreTransform> {
    let flat = flatten_all(data)?;
    let mean = projection::column_means(&flat);
    let whitening = match whiten {
        WhitenMode::None => Whitening::None,
        WhitenMode::FullCovariance => fit_whitening(&flat, false)?,
        WhitenMode::Diagonal => fit_whitening(&flat, true)?,
    };
    Ok(ScoreTransform::from_kind(
        FittedKind::NormBall { mean, whitening },
        Justification::PermutationInvariant,
    ))
}

/// Standardized distance in the span of the leading principal components.
pub fn fit_pca_norm_ball(data: &[Point], rule: KRule) -> Result<ScoreTransform> {
    let flat = flatten_all(data)?;
    let model = fit_projection(&flat, rule)?;
    Ok(ScoreTransform::from_kind(
        FittedKind::PcaNormBall { model },
        Justification::PermutationInvariant,
    ))
}

/// Reciprocal of a kernel density estimate, so low-density points score high.
/// Thresholding this score yields density level sets.
pub fn fit_density_levelset(data: &[Point], settings: &DensitySettings) -> Result<ScoreTransform> {
    let flat = flatten_all(data)?;
    let model = DensityModel::fit(flat, settings)?;
    Ok(ScoreTransform::from_kind(
        FittedKind::DensityLevelset { model },
        Justification::PermutationInvariant,
    ))
}

fn split_pairs(pairs: &[Point]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (x, y) = p.as_pair()?;
        xs.push(x.to_vec());
        ys.push(y);
    }
    Ok((xs, ys))
}

/// |y - mu(x)| with mu a kernel regression mean of the fit pairs.
pub fn fit_regression_residual(
    pairs: &[Point],
    settings: &RegressionSettings,
) -> Result<ScoreTransform> {
    let (xs, ys) = split_pairs(pairs)?;
    let model = RegressionModel::fit(xs, ys, settings)?;
    Ok(ScoreTransform::from_kind(
        FittedKind::RegressionResidual { model },
        Justification::PermutationInvariant,
    ))
}

/// Number of grid points used when no response grid is supplied.
pub const DEFAULT_Y_GRID: usize = 128;
pub const MIN_Y_GRID: usize = 32;

/// Highest-density score for (features, response) pairs: the estimated
/// conditional probability mass of responses at least as dense as the
/// observed one. Values lie in [0, 1]; the conditional mode scores lowest.
pub fn fit_conditional_density_score(
    pairs: &[Point],
    y_grid: Option<&[f64]>,
    settings: &RegressionSettings,
) -> Result<ScoreTransform> {
    let (xs, ys) = split_pairs(pairs)?;
    let model = CondDensityModel::fit(xs, ys, settings)?;
    let grid: Vec<f64> = match y_grid {
        Some(g) => {
            if g.len() < MIN_Y_GRID {
                return Err(Error::InvalidParameter(format!(
                    "response grid needs at least {MIN_Y_GRID} points, got {}",
                    g.len()
                )));
            }
            let mut grid = g.to_vec();
            grid.sort_by(f64::total_cmp);
            grid
        }
        None => {
            let (lo, hi) = model.response_range();
            let h = model.y_bandwidth;
            let (lo, hi) = (lo - 3.0 * h, hi + 3.0 * h);
            (0..DEFAULT_Y_GRID)
                .map(|i| lo + (hi - lo) * i as f64 / (DEFAULT_Y_GRID - 1) as f64)
                .collect()
        }
    };
    Ok(ScoreTransform::from_kind(
        FittedKind::ConditionalDensityHpd { model, y_grid: grid },
        Justification::PermutationInvariant,
    ))
}

/// Cluster-revealing score: distance to the first center minus distance to
/// the nearest center. Always nonnegative; zero on the first center's cell.
pub fn fit_kmeans_score(
    data: &[Point],
    k: usize,
    init: KMeansInit,
    iters: usize,
    seed: u64,
) -> Result<ScoreTransform> {
    let flat = flatten_all(data)?;
    let model = fit_kmeans(&flat, k, init, iters, seed)?;
    Ok(ScoreTransform::from_kind(
        FittedKind::KMeansScore { model, seed },
        Justification::PermutationInvariant,
    ))
}

/// Ratio of the two samples' estimated densities. Uses the sample labels, so
/// it is only exchangeability-safe when fit on a held-out split.
pub fn fit_density_ratio(
    sample_x: &[Point],
    sample_y: &[Point],
    settings: &DensitySettings,
) -> Result<ScoreTransform> {
    let numerator = DensityModel::fit(flatten_all(sample_x)?, settings)?;
    let denominator = DensityModel::fit(flatten_all(sample_y)?, settings)?;
    if numerator.dim() != denominator.dim() {
        return Err(Error::SpaceMismatch(
            "density-ratio samples must share one space".into(),
        ));
    }
    Ok(ScoreTransform::from_kind(
        FittedKind::DensityRatio { numerator, denominator },
        Justification::TrainingSplitOnly,
    ))
}

/// Smoothed estimate of P(point came from the second sample). Label-aware,
/// so training-split only.
pub fn fit_class_probability(
    sample_x: &[Point],
    sample_y: &[Point],
    settings: &RegressionSettings,
) -> Result<ScoreTransform> {
    let mut xs = flatten_all(sample_x)?;
    let ys_x = vec![0.0; xs.len()];
    let mut xs_y = flatten_all(sample_y)?;
    if xs[0].len() != xs_y[0].len() {
        return Err(Error::SpaceMismatch(
            "class-probability samples must share one space".into(),
        ));
    }
    let mut labels = ys_x;
    labels.extend(std::iter::repeat(1.0).take(xs_y.len()));
    xs.append(&mut xs_y);
    let model = RegressionModel::fit(xs, labels, settings)?;
    Ok(ScoreTransform::from_kind(
        FittedKind::ClassProbability { model },
        Justification::TrainingSplitOnly,
    ))
}

type UserRecipeFn = dyn Fn(&[Point], u64) -> Result<ScoreTransform> + Send + Sync;
type UserLabeledFn = dyn Fn(&[Point], &[Point], u64) -> Result<ScoreTransform> + Send + Sync;

/// A refittable, label-blind transform family. Every built-in recipe reads
/// its fit data as a multiset, which is what pooled-data procedures require;
/// a [`TransformRecipe::User`] recipe promises nothing.
#[derive(Clone)]
pub enum TransformRecipe {
    Identity,
    AbsDeviation(Center),
    NormBall(WhitenMode),
    PcaNormBall(KRule),
    DensityLevelset(DensitySettings),
    RegressionResidual(RegressionSettings),
    ConditionalDensityHpd { settings: RegressionSettings, y_grid: Option<Vec<f64>> },
    KMeansScore { k: usize, init: KMeansInit, iters: usize },
    User(Arc<UserRecipeFn>),
}

impl fmt::Debug for TransformRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TransformRecipe::Identity => "identity",
            TransformRecipe::AbsDeviation(_) => "abs-deviation",
            TransformRecipe::NormBall(_) => "norm-ball",
            TransformRecipe::PcaNormBall(_) => "pca-norm-ball",
            TransformRecipe::DensityLevelset(_) => "density-levelset",
            TransformRecipe::RegressionResidual(_) => "regression-residual",
            TransformRecipe::ConditionalDensityHpd { .. } => "conditional-density-hpd",
            TransformRecipe::KMeansScore { .. } => "kmeans-cluster",
            TransformRecipe::User(_) => "user",
        };
        f.write_str(name)
    }
}

impl TransformRecipe {
    pub fn permutation_invariant(&self) -> bool {
        !matches!(self, TransformRecipe::User(_))
    }

    pub fn fit(&self, data: &[Point], seed: u64) -> Result<ScoreTransform> {
        match self {
            TransformRecipe::Identity => Ok(identity()),
            TransformRecipe::AbsDeviation(rule) => fit_abs_deviation(&reals(data)?, *rule),
            TransformRecipe::NormBall(mode) => fit_norm_ball(data, *mode),
            TransformRecipe::PcaNormBall(rule) => fit_pca_norm_ball(data, *rule),
            TransformRecipe::DensityLevelset(settings) => fit_density_levelset(data, settings),
            TransformRecipe::RegressionResidual(settings) => {
                fit_regression_residual(data, settings)
            }
            TransformRecipe::ConditionalDensityHpd { settings, y_grid } => {
                fit_conditional_density_score(data, y_grid.as_deref(), settings)
            }
            TransformRecipe::KMeansScore { k, init, iters } => {
                fit_kmeans_score(data, *k, *init, *iters, seed)
            }
            TransformRecipe::User(fit) => fit(data, seed),
        }
    }
}

/// A label-aware transform family for split two-sample procedures: the fit
/// sees the two training samples separately.
#[derive(Clone)]
pub enum LabeledRecipe {
    DensityRatio(DensitySettings),
    ClassProbability(RegressionSettings),
    User(Arc<UserLabeledFn>),
}

impl fmt::Debug for LabeledRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LabeledRecipe::DensityRatio(_) => "density-ratio",
            LabeledRecipe::ClassProbability(_) => "class-probability",
            LabeledRecipe::User(_) => "user",
        };
        f.write_str(name)
    }
}

impl LabeledRecipe {
    pub fn fit(&self, sample_x: &[Point], sample_y: &[Point], seed: u64) -> Result<ScoreTransform> {
        match self {
            LabeledRecipe::DensityRatio(settings) => {
                fit_density_ratio(sample_x, sample_y, settings)
            }
            LabeledRecipe::ClassProbability(settings) => {
                fit_class_probability(sample_x, sample_y, settings)
            }
            LabeledRecipe::User(fit) => fit(sample_x, sample_y, seed),
        }
    }
}

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum KindDoc {
    Identity,
    AbsDeviation { rule: Center, center: f64 },
    NormBall { mean: Vec<f64>, whitening: Whitening },
    PcaNormBall { model: ProjectionModel },
    DensityLevelset { model: DensityModel },
    RegressionResidual { model: RegressionModel },
    ConditionalDensityHpd { model: CondDensityModel, y_grid: Vec<f64> },
    KMeansScore { model: KMeansModel, seed: u64 },
    DensityRatio { numerator: DensityModel, denominator: DensityModel },
    ClassProbability { model: RegressionModel },
}

/// Versioned serialization document for fitted transforms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformDoc {
    pub schema_version: u32,
    justification: Justification,
    #[serde(flatten)]
    kind: KindDoc,
}

impl ScoreTransform {
    /// Serializable document; user-defined transforms cannot serialize.
    pub fn to_doc(&self) -> Result<TransformDoc> {
        let kind = match &self.kind {
            FittedKind::Identity => KindDoc::Identity,
            FittedKind::AbsDeviation { rule, center } => {
                KindDoc::AbsDeviation { rule: *rule, center: *center }
            }
            FittedKind::NormBall { mean, whitening } => {
                KindDoc::NormBall { mean: mean.clone(), whitening: whitening.clone() }
            }
            FittedKind::PcaNormBall { model } => KindDoc::PcaNormBall { model: model.clone() },
            FittedKind::DensityLevelset { model } => {
                KindDoc::DensityLevelset { model: model.clone() }
            }
            FittedKind::RegressionResidual { model } => {
                KindDoc::RegressionResidual { model: model.clone() }
            }
            FittedKind::ConditionalDensityHpd { model, y_grid } => {
                KindDoc::ConditionalDensityHpd { model: model.clone(), y_grid: y_grid.clone() }
            }
            FittedKind::KMeansScore { model, seed } => {
                KindDoc::KMeansScore { model: model.clone(), seed: *seed }
            }
            FittedKind::DensityRatio { numerator, denominator } => KindDoc::DensityRatio {
                numerator: numerator.clone(),
                denominator: denominator.clone(),
            },
            FittedKind::ClassProbability { model } => {
                KindDoc::ClassProbability { model: model.clone() }
            }
            FittedKind::User { .. } => return Err(Error::NotSerializable),
        };
        Ok(TransformDoc {
            schema_version: SCHEMA_VERSION,
            justification: self.justification,
            kind,
        })
    }

    pub fn from_doc(doc: &TransformDoc) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let kind = match &doc.kind {
            KindDoc::Identity => FittedKind::Identity,
            KindDoc::AbsDeviation { rule, center } => {
                FittedKind::AbsDeviation { rule: *rule, center: *center }
            }
            KindDoc::NormBall { mean, whitening } => {
                FittedKind::NormBall { mean: mean.clone(), whitening: whitening.clone() }
            }
            KindDoc::PcaNormBall { model } => FittedKind::PcaNormBall { model: model.clone() },
            KindDoc::DensityLevelset { model } => {
                FittedKind::DensityLevelset { model: model.clone() }
            }
            KindDoc::RegressionResidual { model } => {
                FittedKind::RegressionResidual { model: model.clone() }
            }
            KindDoc::ConditionalDensityHpd { model, y_grid } => {
                FittedKind::ConditionalDensityHpd { model: model.clone(), y_grid: y_grid.clone() }
            }
            KindDoc::KMeansScore { model, seed } => {
                FittedKind::KMeansScore { model: model.clone(), seed: *seed }
            }
            KindDoc::DensityRatio { numerator, denominator } => FittedKind::DensityRatio {
                numerator: numerator.clone(),
                denominator: denominator.clone(),
            },
            KindDoc::ClassProbability { model } => {
                FittedKind::ClassProbability { model: model.clone() }
            }
        };
        Ok(ScoreTransform { kind, justification: doc.justification })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: TransformDoc = serde_json::from_str(json)?;
        Self::from_doc(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn scalar_points(values: &[f64]) -> Vec<Point> {
        values.iter().map(|&v| Point::real(v)).collect()
    }

    #[test]
    fn abs_deviation_mean_examples() {
        let t = fit_abs_deviation(&[1.0, 2.0, 3.0], Center::Mean).unwrap();
        assert_eq!(t.evaluate(&Point::real(2.0)), 0.0);
        assert_eq!(t.evaluate(&Point::real(5.0)), 3.0);
        assert_eq!(t.justification(), Justification::PermutationInvariant);
    }

    #[test]
    fn abs_deviation_permutation_invariant() {
        let a = fit_abs_deviation(&[3.0, 1.0, 2.0], Center::Mean).unwrap();
        let b = fit_abs_deviation(&[1.0, 2.0, 3.0], Center::Mean).unwrap();
        for v in [-2.0, 0.0, 1.7, 9.0] {
            assert_eq!(a.evaluate(&Point::real(v)), b.evaluate(&Point::real(v)));
        }
    }

    #[test]
    fn abs_deviation_median_even_count() {
        let t = fit_abs_deviation(&[1.0, 2.0, 10.0, 11.0], Center::Median).unwrap();
        assert_eq!(t.evaluate(&Point::real(6.0)), 0.0);
    }

    #[test]
    fn norm_ball_centers_at_mean() {
        let data: Vec<Point> = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]
            .iter()
            .map(|c| Point::vector(c.to_vec()))
            .collect();
        let t = fit_norm_ball(&data, WhitenMode::None).unwrap();
        assert_eq!(t.evaluate(&Point::vector(vec![1.0, 1.0])), 0.0);
    }

    #[test]
    fn diagonal_whitening_hand_computed() {
        // coordinate variances (1, 4) under the 1/n convention
        let data: Vec<Point> = [[1.0, 2.0], [1.0, -2.0], [-1.0, 2.0], [-1.0, -2.0]]
            .iter()
            .map(|c| Point::vector(c.to_vec()))
            .collect();
        let t = fit_norm_ball(&data, WhitenMode::Diagonal).unwrap();
        let score = t.evaluate(&Point::vector(vec![1.0, 2.0]));
        assert!((score - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_ball_degenerate_coordinate_errors() {
        let data: Vec<Point> = (0..5)
            .map(|i| Point::vector(vec![i as f64, 3.0]))
            .collect();
        assert!(matches!(
            fit_norm_ball(&data, WhitenMode::Diagonal),
            Err(Error::DegenerateCoordinate(1))
        ));
    }

    #[test]
    fn pca_full_rank_matches_whitened_norm_ball() {
        let mut rng = Rng::new(123);
        let data: Vec<Point> = (0..20)
            .map(|_| {
                let a = rng.normal();
                let b = rng.normal();
                let c = rng.normal();
                Point::vector(vec![2.0 * a + b, b - c, 0.5 * c + a])
            })
            .collect();
        let pca = fit_pca_norm_ball(&data, KRule::Fixed(3)).unwrap();
        let ball = fit_norm_ball(&data, WhitenMode::FullCovariance).unwrap();
        for _ in 0..10 {
            let z = Point::vector(vec![rng.normal(), rng.normal(), rng.normal()]);
            assert!((pca.evaluate(&z) - ball.evaluate(&z)).abs() < 1e-9);
        }
    }

    #[test]
    fn density_levelset_prefers_modes() {
        let mut rng = Rng::new(77);
        let data: Vec<Point> = (0..400)
            .map(|i| {
                let c = if i % 2 == 0 { 3.0 } else { 7.0 };
                Point::real(c + rng.normal())
            })
            .collect();
        let t = fit_density_levelset(&data, &DensitySettings::default()).unwrap();
        assert!(t.evaluate(&Point::real(3.0)) < t.evaluate(&Point::real(5.0)));
    }

    #[test]
    fn density_levelset_single_point_peak() {
        let settings = DensitySettings { kernel: Kernel::Gaussian, bandwidth: Some(1.0) };
        let t = fit_density_levelset(&scalar_points(&[0.0]), &settings).unwrap();
        let expected = (std::f64::consts::TAU).sqrt();
        assert!((t.evaluate(&Point::real(0.0)) - expected).abs() < 1e-9);
    }

    #[test]
    fn density_levelset_monotone_in_density() {
        let data = scalar_points(&[0.0, 0.5, 1.0, 1.5, 4.0]);
        let t = fit_density_levelset(&data, &DensitySettings::default()).unwrap();
        // denser region scores lower
        assert!(t.evaluate(&Point::real(0.75)) < t.evaluate(&Point::real(4.0)));
    }

    #[test]
    fn epanechnikov_zero_density_scores_infinite() {
        let settings =
            DensitySettings { kernel: Kernel::Epanechnikov, bandwidth: Some(0.5) };
        let t = fit_density_levelset(&scalar_points(&[0.0]), &settings).unwrap();
        assert_eq!(t.evaluate(&Point::real(10.0)), f64::INFINITY);
    }

    #[test]
    fn regression_residual_constant_response() {
        let pairs: Vec<Point> = (0..6).map(|i| Point::pair(vec![i as f64], 5.0)).collect();
        let t = fit_regression_residual(&pairs, &RegressionSettings::default()).unwrap();
        for x in [0.0, 2.0, 5.0] {
            assert!(t.evaluate(&Point::pair(vec![x], 5.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_residual_wide_bandwidth_limit() {
        let pairs: Vec<Point> = (0..5)
            .map(|i| Point::pair(vec![i as f64], 2.0 * i as f64 + 1.0))
            .collect();
        let settings = RegressionSettings { kernel: Kernel::Gaussian, bandwidth: Some(1e6) };
        let t = fit_regression_residual(&pairs, &settings).unwrap();
        let ybar = 5.0;
        for (x, y) in [(0.0, 1.0), (4.0, 9.0)] {
            let want = (y - ybar).abs();
            assert!((t.evaluate(&Point::pair(vec![x], y)) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn conditional_density_mode_scores_lowest() {
        let mut rng = Rng::new(9);
        let pairs: Vec<Point> = (0..200)
            .map(|_| {
                let x = rng.uniform();
                let y = 2.0 * x + 0.1 * rng.normal();
                Point::pair(vec![x], y)
            })
            .collect();
        let t =
            fit_conditional_density_score(&pairs, None, &RegressionSettings::default()).unwrap();
        let at_mode = t.evaluate(&Point::pair(vec![0.5], 1.0));
        let off_mode = t.evaluate(&Point::pair(vec![0.5], 1.8));
        assert!(at_mode < off_mode);
        assert!((0.0..=1.0).contains(&at_mode));
        assert!((0.0..=1.0).contains(&off_mode));
    }

    #[test]
    fn conditional_density_clamps_out_of_grid_response() {
        let pairs: Vec<Point> = (0..40)
            .map(|i| Point::pair(vec![i as f64 / 40.0], (i % 5) as f64))
            .collect();
        let t =
            fit_conditional_density_score(&pairs, None, &RegressionSettings::default()).unwrap();
        let rec = t.evaluate_recorded(&Point::pair(vec![0.5], 1e6));
        assert!(rec.clamped);
        let rec_in = t.evaluate_recorded(&Point::pair(vec![0.5], 2.0));
        assert!(!rec_in.clamped);
    }

    #[test]
    fn conditional_density_rejects_small_grid() {
        let pairs: Vec<Point> = (0..10).map(|i| Point::pair(vec![i as f64], 0.0)).collect();
        let grid: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!(fit_conditional_density_score(
            &pairs,
            Some(&grid),
            &RegressionSettings::default()
        )
        .is_err());
    }

    #[test]
    fn kmeans_score_zero_at_first_center() {
        let mut data: Vec<Point> = (0..10).map(|i| Point::real(0.1 * i as f64)).collect();
        data.extend((0..10).map(|i| Point::real(10.0 + 0.1 * i as f64)));
        let t = fit_kmeans_score(&data, 2, KMeansInit::PlusPlus, 100, 5).unwrap();
        assert!(t.evaluate(&Point::real(0.45)) < 1e-9);
        assert!((t.evaluate(&Point::real(10.45)) - 10.0).abs() < 1.0);
    }

    #[test]
    fn density_ratio_separates_modes() {
        let mut rng = Rng::new(200);
        let xs: Vec<Point> = (0..200).map(|_| Point::real(rng.normal())).collect();
        let ys: Vec<Point> = (0..200).map(|_| Point::real(5.0 + rng.normal())).collect();
        let t = fit_density_ratio(&xs, &ys, &DensitySettings::default()).unwrap();
        assert!(t.evaluate(&Point::real(0.0)) > 1.0);
        assert!(t.evaluate(&Point::real(5.0)) < 1.0);
        assert_eq!(t.justification(), Justification::TrainingSplitOnly);
    }

    #[test]
    fn density_ratio_identical_samples_near_one() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64) / 10.0).collect();
        let pts = scalar_points(&values);
        let t = fit_density_ratio(&pts, &pts, &DensitySettings::default()).unwrap();
        for v in [1.0, 5.0, 9.0] {
            assert!((t.evaluate(&Point::real(v)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn class_probability_orders_samples() {
        let mut rng = Rng::new(321);
        let xs: Vec<Point> = (0..100).map(|_| Point::real(rng.normal())).collect();
        let ys: Vec<Point> = (0..100).map(|_| Point::real(4.0 + rng.normal())).collect();
        let t = fit_class_probability(&xs, &ys, &RegressionSettings::default()).unwrap();
        assert!(t.evaluate(&Point::real(0.0)) < 0.5);
        assert!(t.evaluate(&Point::real(4.0)) > 0.5);
    }

    #[test]
    fn nonnegative_scores() {
        let mut rng = Rng::new(55);
        let data: Vec<Point> = (0..30)
            .map(|_| Point::vector(vec![rng.normal(), rng.normal()]))
            .collect();
        let transforms = vec![
            fit_norm_ball(&data, WhitenMode::Diagonal).unwrap(),
            fit_pca_norm_ball(&data, KRule::Elbow).unwrap(),
            fit_kmeans_score(&data, 3, KMeansInit::PlusPlus, 50, 1).unwrap(),
        ];
        for t in &transforms {
            for _ in 0..20 {
                let z = Point::vector(vec![3.0 * rng.normal(), 3.0 * rng.normal()]);
                assert!(t.evaluate(&z) >= 0.0);
            }
        }
    }

    #[test]
    fn permutation_invariant_transforms_survive_refit_on_shuffles() {
        let mut rng = Rng::new(99);
        let vec_data: Vec<Point> = (0..25)
            .map(|_| Point::vector(vec![rng.normal(), 2.0 + rng.normal()]))
            .collect();
        let pair_data: Vec<Point> = (0..25)
            .map(|_| {
                let x = rng.uniform();
                Point::pair(vec![x], x + 0.3 * rng.normal())
            })
            .collect();
        let scalar_data: Vec<Point> = (0..25).map(|_| Point::real(rng.normal())).collect();

        let recipes: Vec<(TransformRecipe, &[Point])> = vec![
            (TransformRecipe::AbsDeviation(Center::Mean), &scalar_data),
            (TransformRecipe::AbsDeviation(Center::Median), &scalar_data),
            (TransformRecipe::NormBall(WhitenMode::FullCovariance), &vec_data),
            (TransformRecipe::PcaNormBall(KRule::Elbow), &vec_data),
            (TransformRecipe::DensityLevelset(DensitySettings::default()), &vec_data),
            (TransformRecipe::RegressionResidual(RegressionSettings::default()), &pair_data),
            (
                TransformRecipe::KMeansScore { k: 2, init: KMeansInit::PlusPlus, iters: 100 },
                &vec_data,
            ),
        ];

        for (recipe, data) in recipes {
            assert!(recipe.permutation_invariant());
            let base = recipe.fit(data, 7).unwrap();
            let probes: Vec<Point> = data.iter().take(5).cloned().collect();
            for perm_seed in 0..20u64 {
                let mut shuffled = data.to_vec();
                Rng::new(perm_seed).shuffle(&mut shuffled);
                let refit = recipe.fit(&shuffled, 7).unwrap();
                for p in &probes {
                    let a = base.evaluate(p);
                    let b = refit.evaluate(p);
                    assert!(
                        (a - b).abs() <= 1e-9,
                        "{recipe:?} drifted {a} vs {b} under permutation"
                    );
                }
            }
        }
    }

    #[test]
    fn serde_round_trip_preserves_evaluations() {
        let mut rng = Rng::new(4);
        let data: Vec<Point> = (0..20)
            .map(|_| Point::vector(vec![rng.normal(), rng.normal()]))
            .collect();
        for t in [
            fit_norm_ball(&data, WhitenMode::FullCovariance).unwrap(),
            fit_density_levelset(&data, &DensitySettings::default()).unwrap(),
            fit_kmeans_score(&data, 2, KMeansInit::PlusPlus, 50, 9).unwrap(),
        ] {
            let json = t.to_json().unwrap();
            assert!(json.contains("\"schema_version\": 1"));
            let back = ScoreTransform::from_json(&json).unwrap();
            for _ in 0..10 {
                let z = Point::vector(vec![rng.normal(), rng.normal()]);
                assert_eq!(t.evaluate(&z), back.evaluate(&z));
            }
        }
    }

    #[test]
    fn user_defined_does_not_serialize() {
        let t = user_defined(|p: &Point| p.flat()[0]);
        assert_eq!(t.justification(), Justification::Unchecked);
        assert!(matches!(t.to_json(), Err(Error::NotSerializable)));
    }
}
