//! Probability transforms, correlation and rank statistics, bootstrap
//! intervals, least-squares fits and calibration curves.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Smoothing constant for [`logit`].
pub const DEFAULT_LOGIT_ALPHA: f64 = 1e-6;

/// Resamples drawn when a caller does not choose.
pub const DEFAULT_RESAMPLES: usize = 1000;

/// A resample whose statistic is undefined is redrawn; at most this many
/// draws per requested resample are attempted.
pub const MAX_DRAW_INFLATION: usize = 10;

/// Paired observations, optionally labelled by `(stem_id, response)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    x: Vec<f64>,
    y: Vec<f64>,
    labels: Option<Vec<(String, String)>>,
}

impl PairedSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Argument(alloc::format!(
                "series lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Argument(
                "paired series needs at least 2 points".into(),
            ));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "paired series contains a non-finite value".into(),
            ));
        }
        Ok(PairedSeries { x, y, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<(String, String)>) -> Result<Self> {
        if labels.len() != self.x.len() {
            return Err(Error::Argument(
                "label count does not match series length".into(),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn labels(&self) -> Option<&[(String, String)]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Smoothed log-odds, `ln(p + alpha) - ln(1 - p + alpha)`.
///
/// Antisymmetric about one half: `logit(1 - p) == -logit(p)` bit for bit
/// whenever `1 - (1 - p) == p` in floating point.
pub fn logit(p: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(alloc::format!(
            "probability {p} outside [0, 1]"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(alloc::format!(
            "smoothing alpha {alpha} must be positive"
        )));
    }
    Ok(libm::log(p + alpha) - libm::log((1.0 - p) + alpha))
}

/// Luce's choice rule: divide each score by the total.
pub fn luce_renormalize(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Argument("no scores to renormalize".into()));
    }
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Domain(
            "scores must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

// offset by the first value so constant input is reproduced exactly
fn mean(v: &[f64]) -> f64 {
    let base = v[0];
    base + v.iter().map(|x| x - base).sum::<f64>() / v.len() as f64
}

fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation.
pub fn pearson(s: &PairedSeries) -> Result<f64> {
    pearson_slices(&s.x, &s.y)
}

/// Ascending ranks starting at 1, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1)..=j
        let shared = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of average-tie ranks.
pub fn spearman(s: &PairedSeries) -> Result<f64> {
    spearman_slices(&s.x, &s.y)
}

fn spearman_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson_slices(&rx, &ry).map_err(|_| Error::UndefinedCorrelation("all values tied"))
}

/// Descending ranks within one stem: 1 is the largest value, ties share the
/// average position, and zero scores fall behind every positive score.
pub fn within_stem_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Argument("no values to rank".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cannot rank non-finite values".into()));
    }
    let n = values.len() as f64;
    Ok(average_ranks(values)
        .into_iter()
        .map(|r| n + 1.0 - r)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Pearson,
    Spearman,
    Mean,
}

#[derive(Debug, Clone, Copy)]
pub enum BootstrapData<'a> {
    Paired(&'a PairedSeries),
    Values(&'a [f64]),
}

/// What a bootstrap draw samples with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleUnit {
    /// Individual `(stem, response)` observations.
    #[default]
    Pair,
    /// Whole stems, keeping each stem's observations together. Needs labels.
    Stem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    /// Extends the interval so it contains `point`.
    pub fn containing(self, point: f64) -> Interval {
        Interval {
            low: self.low.min(point),
            high: self.high.max(point),
        }
    }
}

impl Statistic {
    pub fn evaluate(self, data: BootstrapData<'_>) -> Result<f64> {
        match (self, data) {
            (Statistic::Pearson, BootstrapData::Paired(s)) => pearson(s),
            (Statistic::Spearman, BootstrapData::Paired(s)) => spearman(s),
            (Statistic::Mean, BootstrapData::Values(v)) if !v.is_empty() => Ok(mean(v)),
            (Statistic::Mean, BootstrapData::Values(_)) => {
                Err(Error::Argument("mean of no values".into()))
            }
            _ => Err(Error::Argument(
                "statistic does not apply to this data".into(),
            )),
        }
    }

    fn on_indices(
        self,
        data: BootstrapData<'_>,
        idx: &[usize],
        bx: &mut Vec<f64>,
        by: &mut Vec<f64>,
    ) -> Result<f64> {
        bx.clear();
        by.clear();
        match data {
            BootstrapData::Paired(s) => {
                bx.extend(idx.iter().map(|&i| s.x[i]));
                by.extend(idx.iter().map(|&i| s.y[i]));
                match self {
                    Statistic::Pearson => pearson_slices(bx, by),
                    Statistic::Spearman => spearman_slices(bx, by),
                    Statistic::Mean => Err(Error::Argument("mean needs plain values".into())),
                }
            }
            BootstrapData::Values(v) => {
                bx.extend(idx.iter().map(|&i| v[i]));
                match self {
                    Statistic::Mean => Ok(mean(bx)),
                    _ => Err(Error::Argument("correlation needs paired data".into())),
                }
            }
        }
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile bootstrap interval resampling individual observations.
pub fn bootstrap_ci(
    stat: Statistic,
    data: BootstrapData<'_>,
    n_resamples: usize,
    seed: u64,
) -> Result<Interval> {
    bootstrap_ci_with(stat, data, n_resamples, seed, ResampleUnit::Pair)
}

/// 95% percentile bootstrap interval.
///
/// Resample `i` draws from a ChaCha stream selected by `(seed, i)`, so the
/// interval does not depend on evaluation order. A resample on which the
/// statistic is undefined is redrawn from the same stream.
pub fn bootstrap_ci_with(
    stat: Statistic,
    data: BootstrapData<'_>,
    n_resamples: usize,
    seed: u64,
    unit: ResampleUnit,
) -> Result<Interval> {
    if n_resamples < 100 {
        return Err(Error::Argument(alloc::format!(
            "need at least 100 resamples, got {n_resamples}"
        )));
    }
    let n = match data {
        BootstrapData::Paired(s) => s.len(),
        BootstrapData::Values(v) => v.len(),
    };
    if n == 0 {
        return Err(Error::Argument("no data to resample".into()));
    }
    // Observation indices grouped into resampling blocks.
    let blocks: Vec<Vec<usize>> = match (unit, data) {
        (ResampleUnit::Pair, _) => (0..n).map(|i| alloc::vec![i]).collect(),
        (ResampleUnit::Stem, BootstrapData::Paired(s)) => {
            let labels = s
                .labels()
                .ok_or_else(|| Error::Argument("stem resampling needs labels".into()))?;
            let mut slot: alloc::collections::BTreeMap<&str, usize> =
                alloc::collections::BTreeMap::new();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for (i, (stem, _)) in labels.iter().enumerate() {
                let g = *slot.entry(stem.as_str()).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(i);
            }
            groups
        }
        (ResampleUnit::Stem, BootstrapData::Values(_)) => {
            return Err(Error::Argument(
                "stem resampling needs labelled pairs".into(),
            ))
        }
    };

    let max_draws = n_resamples * MAX_DRAW_INFLATION;
    let mut draws = 0usize;
    let mut stats = Vec::with_capacity(n_resamples);
    let mut idx = Vec::with_capacity(n);
    let (mut bx, mut by) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for r in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        loop {
            if draws == max_draws {
                return Err(Error::Bootstrap {
                    attempts: draws,
                    wanted: n_resamples,
                });
            }
            draws += 1;
            idx.clear();
            for _ in 0..blocks.len() {
                idx.extend_from_slice(&blocks[rng.random_range(0..blocks.len())]);
            }
            if let Ok(v) = stat.on_indices(data, &idx, &mut bx, &mut by) {
                stats.push(v);
                break;
            }
        }
    }
    stats.sort_by(f64::total_cmp);
    Ok(Interval {
        low: quantile_sorted(&stats, 0.025),
        high: quantile_sorted(&stats, 0.975),
    })
}

/// Ordinary least squares fit of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub t_slope: f64,
    pub df: usize,
}

pub fn ols_fit(s: &PairedSeries) -> Result<RegressionFit> {
    let n = s.len();
    if n < 3 {
        return Err(Error::Argument("regression needs at least 3 points".into()));
    }
    let mx = mean(&s.x);
    let my = mean(&s.y);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in s.x.iter().zip(&s.y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 =
        s.x.iter()
            .zip(&s.y)
            .map(|(a, b)| {
                let r = b - (intercept + slope * a);
                r * r
            })
            .sum();
    let df = n - 2;
    let sigma2 = sse / df as f64;
    let slope_se = libm::sqrt(sigma2 / sxx);
    let intercept_se = libm::sqrt(sigma2 * (1.0 / n as f64 + mx * mx / sxx));
    Ok(RegressionFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        t_slope: slope / slope_se,
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBin {
    pub bin_center: f64,
    pub mean_model_prob: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

pub fn calibration_curve(
    pairs: &PairedSeries,
    n_bins: usize,
    seed: u64,
) -> Result<CalibrationCurve> {
    calibration_curve_with(pairs, n_bins, DEFAULT_RESAMPLES, seed)
}

/// Mean model probability per equal-width cloze-probability bin on [0, 1],
/// with a bootstrap interval for each mean. Empty bins are omitted.
pub fn calibration_curve_with(
    pairs: &PairedSeries,
    n_bins: usize,
    n_resamples: usize,
    seed: u64,
) -> Result<CalibrationCurve> {
    if n_bins < 2 {
        return Err(Error::Argument("calibration needs at least 2 bins".into()));
    }
    if pairs.x.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Domain(
            "cloze probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut members: Vec<Vec<f64>> = alloc::vec![Vec::new(); n_bins];
    for (&x, &y) in pairs.x.iter().zip(&pairs.y) {
        let b = ((x * n_bins as f64) as usize).min(n_bins - 1);
        members[b].push(y);
    }
    let mut bins = Vec::new();
    for (b, ys) in members.iter().enumerate() {
        if ys.is_empty() {
            continue;
        }
        let m = mean(ys);
        let ci = bootstrap_ci(
            Statistic::Mean,
            BootstrapData::Values(ys),
            n_resamples,
            crate::seed::derive_index(seed, b as u64),
        )?
        .containing(m);
        bins.push(CalibrationBin {
            bin_center: (b as f64 + 0.5) / n_bins as f64,
            mean_model_prob: m,
            ci_low: ci.low,
            ci_high: ci.high,
            n: ys.len(),
        });
    }
    Ok(CalibrationCurve { bins })
}
