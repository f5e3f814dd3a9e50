//! Jittered ranks of exchangeable sequences.
//!
//! Adding iid Uniform[-ξ, ξ] noise to a real sequence breaks ties almost
//! surely, and the resulting rank vector of an exchangeable sequence is
//! uniform over all n! permutations regardless of the underlying
//! distribution. Everything else in this crate (conformal thresholds, rank
//! test statistics, conformal p-values) reduces to that fact.
//!
//! All randomness comes from a seeded [`Rng`] stream; jitter variates are
//! drawn in input order, so identical (xi, seed, input) triples produce
//! bit-identical output on every platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Jitter magnitude and the seed of the stream that draws the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    /// Tie-breaking noise half-width; must be positive. The default 1e-8 is
    /// small relative to unit-scale spacings; see [`JitterConfig::effective_xi`]
    /// for how very large data scales are handled.
    pub xi: f64,
    pub seed: u64,
}

pub const DEFAULT_XI: f64 = 1e-8;

impl JitterConfig {
    pub fn new(seed: u64) -> Self {
        Self { xi: DEFAULT_XI, seed }
    }

    pub fn with_xi(seed: u64, xi: f64) -> Self {
        Self { xi, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "xi must be a positive real, got {}",
                self.xi
            )));
        }
        Ok(())
    }

    /// Jitter width actually applied to `values`. The noise must stay small
    /// relative to the spacings in the data, so when the interquartile range
    /// exceeds 1e4 the width is rescaled by it; otherwise `xi` is used as is.
    pub fn effective_xi(&self, values: &[f64]) -> f64 {
        let iqr = interquartile_range(values);
        if iqr > 1e4 {
            self.xi * iqr
        } else {
            self.xi
        }
    }
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

fn interquartile_range(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// A jittered copy of a real sequence, `values[i] + xi * U_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitteredScores {
    values: Vec<f64>,
    xi_used: f64,
}

impl JitteredScores {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The jitter half-width that was applied (after any rescaling).
    pub fn xi_used(&self) -> f64 {
        self.xi_used
    }
}

/// Draws one Uniform[-1,1) variate per value, in input order, from `rng`.
pub(crate) fn jitter_with(values: &[f64], xi: f64, rng: &mut Rng) -> Vec<f64> {
    values
        .iter()
        .map(|&v| v + xi * rng.uniform_symmetric())
        .collect()
}

/// Jitters `values` with a fresh stream seeded from `cfg`.
pub fn jitter(values: &[f64], cfg: &JitterConfig) -> Result<JitteredScores> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    let xi = cfg.effective_xi(values);
    let mut rng = Rng::new(cfg.seed);
    Ok(JitteredScores {
        values: jitter_with(values, xi, &mut rng),
        xi_used: xi,
    })
}

/// Ranks of a sequence: `ranks[i]` is the number of indices j with
/// `jittered[j] <= jittered[i]`, always a permutation of 1..=n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVector {
    ranks: Vec<usize>,
}

impl RankVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Ranks of already-jittered (almost surely distinct) values.
pub(crate) fn ranks_of(jittered: &[f64]) -> Vec<usize> {
    let n = jittered.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| jittered[a].total_cmp(&jittered[b]));
    let mut ranks = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

fn assert_permutation(ranks: &[usize]) {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        assert!(
            r >= 1 && r <= ranks.len() && !seen[r - 1],
            "rank vector is not a permutation of 1..=n"
        );
        seen[r - 1] = true;
    }
}

/// Jittered ranks of `values` under `cfg`.
pub fn ranks(values: &[f64], cfg: &JitterConfig) -> Result<RankVector> {
    let jittered = jitter(values, cfg)?;
    let ranks = ranks_of(jittered.values());
    assert_permutation(&ranks);
    Ok(RankVector { ranks })
}

/// Rank-based p-value for the last element: `rank(W_n; {W_1..W_n}) / n`.
///
/// When the sequence is exchangeable, `P(p <= t) = floor(n t) / n <= t`, so
/// the return value is a valid p-value for "the last element conforms".
pub fn rank_cdf_pvalue(values: &[f64], cfg: &JitterConfig) -> Result<f64> {
    let rv = ranks(values, cfg)?;
    let n = rv.len();
    Ok(rv.as_slice()[n - 1] as f64 / n as f64)
}

/// One input on which some permutation of the output could not be matched
/// by any permutation of the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationWitness {
    /// Output permutation (0-based) that could not be matched.
    pub output_perm: Vec<usize>,
    /// The sampled input vector.
    pub input: Vec<f64>,
}

/// Result of the exchangeability-preservation check for a transformation
/// G mapping n-vectors to m-vectors.
///
/// `holds = true` means: on every sampled input w and for every permutation
/// p1 of the output, some permutation p2 of the input satisfied
/// `p1 G(w) = G(p2 w)` within tolerance. This is sampled evidence for the
/// condition, not a proof; `holds = false` is a definite counterexample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationCheckReport {
    pub n: usize,
    pub m: usize,
    pub holds: bool,
    pub witness_failures: Vec<PermutationWitness>,
}

pub const PERMUTATION_TOLERANCE: f64 = 1e-9;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

fn apply_perm(perm: &[usize], values: &[f64]) -> Vec<f64> {
    perm.iter().map(|&i| values[i]).collect()
}

/// Searches, over `trials` random standard-normal inputs, whether every
/// permutation of G's output can be realized by permuting G's input.
///
/// Exhaustive over input permutations, so `n` is capped at 7.
pub fn check_permutation_condition<G>(
    g: G,
    n: usize,
    m: usize,
    trials: usize,
    cfg: &JitterConfig,
) -> Result<PermutationCheckReport>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if n > 7 {
        return Err(Error::PermutationSearchLimit(n));
    }
    if n == 0 || m == 0 || trials == 0 {
        return Err(Error::InvalidParameter(
            "n, m, and trials must all be at least 1".into(),
        ));
    }
    let in_perms = permutations(n);
    let out_perms = permutations(m);
    let mut rng = Rng::new(cfg.seed);
    let mut failures = Vec::new();

    for _ in 0..trials {
        let input: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let base = g(&input);
        assert_eq!(base.len(), m, "transformation output length != m");
        for p1 in &out_perms {
            let target = apply_perm(p1, &base);
            let matched = in_perms.iter().any(|p2| {
                let image = g(&apply_perm(p2, &input));
                target
                    .iter()
                    .zip(&image)
                    .all(|(a, b)| (a - b).abs() <= PERMUTATION_TOLERANCE)
            });
            if !matched {
                failures.push(PermutationWitness {
                    output_perm: p1.clone(),
                    input: input.clone(),
                });
            }
        }
    }

    Ok(PermutationCheckReport {
        n,
        m,
        holds: failures.is_empty(),
        witness_failures: failures,
    })
}
