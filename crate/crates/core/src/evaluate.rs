//! Prediction harness: regress future page activity on the Impact ranking,
//! compare with the Popularity baseline across exponents, and repeat the
//! analysis for groups of users split by polarization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Popularity, RankResult, Sweep};
use crate::ingest::PageTargets;
use crate::model::{Category, InteractionRecord};
use crate::par::{self, Execution};
use crate::ranking::normalized_ranks;
use crate::stats::t_two_sided_p;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EvalError {
    #[error("cannot rank an empty set of values")]
    EmptyRanking,
    #[error("need at least 3 points for a fit, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate regressor: x is constant")]
    DegenerateRegressor,
    #[error("degenerate target: y is constant (SST = 0)")]
    DegenerateTarget,
    #[error("non-finite value for `{0}`")]
    NonFinite(String),
    #[error("no target for page `{0}`")]
    MissingTarget(String),
    #[error("invalid polarization threshold {0}")]
    BadThreshold(f64),
}

/// Normalized ranking: 1 for the highest value, `1/N` for the lowest, ties
/// broken by ascending id.
pub fn rank_transform(values: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    let ids: Vec<String> = values.keys().cloned().collect();
    let scores: Vec<f64> = values.values().copied().collect();
    let ranks = normalized_ranks(&ids, &scores);
    Ok(ids.into_iter().zip(ranks).collect())
}

/// Spearman rank correlation over the common keys, with average ranks for
/// ties.
pub fn spearman(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .filter_map(|(k, &x)| b.get(k).map(|&y| (x, y)))
        .collect();
    if pairs.len() < 2 {
        return Err(EvalError::TooFewPoints(pairs.len()));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(EvalError::NonFinite("spearman input".into()));
    }
    let rx = average_ranks(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ry = average_ranks(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(EvalError::DegenerateRegressor);
    }
    if syy == 0.0 {
        return Err(EvalError::DegenerateTarget);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// 1-based ascending ranks; tied values share the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub residual: f64,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual sum of squares over `n_points - 2`.
    pub mse: f64,
    pub t_statistic: f64,
    /// Two-sided, for the null hypothesis of zero slope.
    pub p_value: f64,
    pub residuals: BTreeMap<String, Residual>,
    pub n_points: usize,
}

/// Ordinary least squares of `y` on `x` over their common keys.
pub fn linear_fit(
    x: &BTreeMap<String, f64>,
    y: &BTreeMap<String, f64>,
    categories: &BTreeMap<String, Category>,
) -> Result<FitReport, EvalError> {
    let points: Vec<(&String, f64, f64)> = x
        .iter()
        .filter_map(|(k, &xv)| y.get(k).map(|&yv| (k, xv, yv)))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(EvalError::TooFewPoints(n));
    }
    for &(k, xv, yv) in &points {
        if !xv.is_finite() || !yv.is_finite() {
            return Err(EvalError::NonFinite(k.clone()));
        }
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.2).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.1 - x_mean).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.1 - x_mean) * (p.2 - y_mean)).sum();
    let sst: f64 = points.iter().map(|p| (p.2 - y_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(EvalError::DegenerateRegressor);
    }
    if sst == 0.0 {
        return Err(EvalError::DegenerateTarget);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let residuals: BTreeMap<String, Residual> = points
        .iter()
        .map(|&(k, xv, yv)| {
            let category = categories.get(k).copied().unwrap_or(Category::Unknown);
            let residual = yv - (intercept + slope * xv);
            (k.clone(), Residual { residual, category })
        })
        .collect();
    let ssr: f64 = residuals.values().map(|r| r.residual * r.residual).sum();
    let dof = nf - 2.0;
    let mse = ssr / dof;
    let r_squared = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let std_err = (mse / sxx).sqrt();
    let t_statistic = if std_err > 0.0 {
        slope / std_err
    } else if slope == 0.0 {
        0.0
    } else {
        slope.signum() * f64::INFINITY
    };
    let p_value = t_two_sided_p(t_statistic, dof);

    Ok(FitReport {
        slope,
        intercept,
        r_squared,
        mse,
        t_statistic,
        p_value,
        residuals,
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// log10(1 + posts published by the page)
    ActivityOf,
    /// log10(1 + comments received by the page)
    ActivityOn,
    /// log10(1 + distinct commenting users)
    NUsers,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [
        TargetKind::ActivityOf,
        TargetKind::ActivityOn,
        TargetKind::NUsers,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::ActivityOf => "activity_of",
            TargetKind::ActivityOn => "activity_on",
            TargetKind::NUsers => "n_users",
        }
    }

    pub fn value(self, t: &PageTargets) -> f64 {
        match self {
            TargetKind::ActivityOf => t.activity_of,
            TargetKind::ActivityOn => t.activity_on,
            TargetKind::NUsers => (1.0 + t.n_users as f64).log10(),
        }
    }
}

/// What the regressor is: the normalized Impact ranking, or the raw values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressOn {
    #[default]
    Rank,
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FitOutcome {
    Fit(FitReport),
    Skipped { reason: String },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&FitReport> {
        match self {
            FitOutcome::Fit(f) => Some(f),
            FitOutcome::Skipped { .. } => None,
        }
    }
}

impl From<Result<FitReport, EvalError>> for FitOutcome {
    fn from(r: Result<FitReport, EvalError>) -> Self {
        match r {
            Ok(f) => FitOutcome::Fit(f),
            Err(e) => FitOutcome::Skipped {
                reason: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub alpha: f64,
    pub regress_on: RegressOn,
    pub impact: BTreeMap<TargetKind, FitOutcome>,
    pub popularity: BTreeMap<TargetKind, FitOutcome>,
    /// Mean Impact rank per page category.
    pub category_mean_rank: BTreeMap<Category, f64>,
}

fn impact_regressor(rank: &RankResult, on: RegressOn) -> &BTreeMap<String, f64> {
    match on {
        RegressOn::Rank => &rank.impact_rank,
        RegressOn::Value => &rank.impact,
    }
}

fn popularity_regressor(pop: &Popularity, on: RegressOn) -> &BTreeMap<String, f64> {
    match on {
        RegressOn::Rank => &pop.rank,
        RegressOn::Value => &pop.values,
    }
}

fn target_map(
    pages: impl Iterator<Item = String>,
    targets: &BTreeMap<String, PageTargets>,
    kind: TargetKind,
) -> Result<BTreeMap<String, f64>, EvalError> {
    pages
        .map(|p| match targets.get(&p) {
            Some(t) => Ok((p, kind.value(t))),
            None => Err(EvalError::MissingTarget(p)),
        })
        .collect()
}

/// Fits every target kind against the Impact ranking and, with the same
/// pipeline, against the Popularity ranking.
pub fn predict_report(
    rank: &RankResult,
    popularity: &Popularity,
    targets: &BTreeMap<String, PageTargets>,
    categories: &BTreeMap<String, Category>,
    regress_on: RegressOn,
) -> Result<PredictReport, EvalError> {
    let x_impact = impact_regressor(rank, regress_on);
    let x_pop = popularity_regressor(popularity, regress_on);
    let mut impact = BTreeMap::new();
    let mut pop = BTreeMap::new();
    for kind in TargetKind::ALL {
        let y = target_map(rank.impact.keys().cloned(), targets, kind)?;
        impact.insert(kind, linear_fit(x_impact, &y, categories).into());
        pop.insert(kind, linear_fit(x_pop, &y, categories).into());
    }
    Ok(PredictReport {
        alpha: rank.alpha,
        regress_on,
        impact,
        popularity: pop,
        category_mean_rank: category_mean_rank(&rank.impact_rank, categories),
    })
}

pub fn category_mean_rank(
    ranks: &BTreeMap<String, f64>,
    categories: &BTreeMap<String, Category>,
) -> BTreeMap<Category, f64> {
    let mut acc: BTreeMap<Category, (f64, usize)> = BTreeMap::new();
    for (page, r) in ranks {
        let cat = categories.get(page).copied().unwrap_or(Category::Unknown);
        let e = acc.entry(cat).or_insert((0.0, 0));
        e.0 += r;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(c, (s, n))| (c, s / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub alpha: f64,
    pub mse_impact: f64,
    pub mse_popularity: f64,
    pub r_squared_impact: f64,
    pub r_squared_popularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedAlpha {
    pub alpha: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub kind: TargetKind,
    pub rows: Vec<MseRow>,
    pub excluded: Vec<ExcludedAlpha>,
}

impl MseCurve {
    /// Row with the smallest Impact MSE (first one on ties).
    pub fn best(&self) -> Option<&MseRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&MseRow>, row| match best {
                Some(b) if b.mse_impact <= row.mse_impact => Some(b),
                _ => Some(row),
            })
    }
}

/// Prediction MSE per exponent. Runs that failed or did not converge are
/// excluded from the curve and listed separately.
pub fn mse_curve(
    sweep: &Sweep,
    targets: &BTreeMap<String, PageTargets>,
    popularity: &Popularity,
    categories: &BTreeMap<String, Category>,
    kind: TargetKind,
    regress_on: RegressOn,
) -> Result<MseCurve, EvalError> {
    let y = target_map(popularity.rank.keys().cloned(), targets, kind)?;
    let pop_fit = linear_fit(popularity_regressor(popularity, regress_on), &y, categories)?;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for entry in &sweep.entries {
        let reason = match &entry.result {
            None => entry.error.clone().unwrap_or_else(|| "run failed".into()),
            Some(r) if !r.converged => format!("not converged after {} iterations", r.iterations),
            Some(r) => match linear_fit(impact_regressor(r, regress_on), &y, categories) {
                Ok(fit) => {
                    rows.push(MseRow {
                        alpha: entry.alpha,
                        mse_impact: fit.mse,
                        mse_popularity: pop_fit.mse,
                        r_squared_impact: fit.r_squared,
                        r_squared_popularity: pop_fit.r_squared,
                    });
                    continue;
                }
                Err(e) => e.to_string(),
            },
        };
        excluded.push(ExcludedAlpha {
            alpha: entry.alpha,
            reason,
        });
    }
    Ok(MseCurve {
        kind,
        rows,
        excluded,
    })
}

/// `0.1, 0.2, .., 1.0`.
pub fn default_thresholds() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationGroup {
    pub threshold: f64,
    /// page -> users whose share of comments on that page is >= threshold
    pub members: BTreeMap<String, BTreeSet<String>>,
}

/// Cumulative user groups per page: a lower threshold's group contains every
/// higher threshold's group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationGroups {
    pub groups: Vec<PolarizationGroup>,
}

impl PolarizationGroups {
    pub fn thresholds(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.threshold).collect()
    }
}

/// A user's polarization on a page is the fraction of the user's comments in
/// `window` left on that page.
pub fn polarization_groups(
    records: &[InteractionRecord],
    window: RangeInclusive<u32>,
    thresholds: &[f64],
) -> Result<PolarizationGroups, EvalError> {
    if let Some(&bad) = thresholds.iter().find(|t| !t.is_finite()) {
        return Err(EvalError::BadThreshold(bad));
    }
    let mut totals: HashMap<&str, u64> = HashMap::new();
    let mut per_pair: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(&r.month)) {
        *totals.entry(&r.user_id).or_default() += r.comments;
        *per_pair.entry((&r.page_id, &r.user_id)).or_default() += r.comments;
    }
    let ratios: Vec<(&str, &str, f64)> = per_pair
        .into_iter()
        .map(|((page, user), c)| (page, user, c as f64 / totals[user] as f64))
        .collect();
    let groups = thresholds
        .iter()
        .map(|&threshold| {
            let mut members: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for &(page, user, x) in &ratios {
                if x >= threshold {
                    members
                        .entry(page.to_string())
                        .or_default()
                        .insert(user.to_string());
                }
            }
            PolarizationGroup { threshold, members }
        })
        .collect();
    Ok(PolarizationGroups { groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationRow {
    pub threshold: f64,
    pub impact: FitOutcome,
    pub popularity: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    pub rows: Vec<PolarizationRow>,
}

impl PolarizationReport {
    pub fn skipped_thresholds(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.impact.fit().is_none())
            .map(|r| r.threshold)
            .collect()
    }
}

/// Per threshold, the target of a page is log10(1 + number of users of its
/// group that comment it in `test_window`), regressed on the Impact ranking
/// and on the Popularity baseline. Thresholds whose targets are all zero
/// are skipped.
#[allow(clippy::too_many_arguments)]
pub fn polarization_report(
    groups: &PolarizationGroups,
    rank: &RankResult,
    popularity: &Popularity,
    records: &[InteractionRecord],
    test_window: RangeInclusive<u32>,
    categories: &BTreeMap<String, Category>,
    regress_on: RegressOn,
    exec: Execution,
) -> PolarizationReport {
    let mut test_commenters: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for r in records.iter().filter(|r| test_window.contains(&r.month)) {
        test_commenters
            .entry(&r.page_id)
            .or_default()
            .insert(&r.user_id);
    }
    let x_impact = impact_regressor(rank, regress_on);
    let x_pop = popularity_regressor(popularity, regress_on);
    let rows = par::map(&groups.groups, exec, |group| {
        let y: BTreeMap<String, f64> = rank
            .impact
            .keys()
            .map(|page| {
                let count = match (group.members.get(page), test_commenters.get(page.as_str())) {
                    (Some(members), Some(active)) => members
                        .iter()
                        .filter(|u| active.contains(u.as_str()))
                        .count(),
                    _ => 0,
                };
                (page.clone(), (1.0 + count as f64).log10())
            })
            .collect();
        if y.values().all(|&v| v == 0.0) {
            let skipped = || FitOutcome::Skipped {
                reason: "all-zero targets".into(),
            };
            return PolarizationRow {
                threshold: group.threshold,
                impact: skipped(),
                popularity: skipped(),
            };
        }
        PolarizationRow {
            threshold: group.threshold,
            impact: linear_fit(x_impact, &y, categories).into(),
            popularity: linear_fit(x_pop, &y, categories).into(),
        }
    });
    PolarizationReport { rows }
}
