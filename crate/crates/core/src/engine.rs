//! The coupled Impact/Engagement iteration.
//!
//! Pages get an Impact and users an Engagement. One step of the map is
//!
//! ```text
//! I~[p] = sum_u M[u][p] / E[u]            I = I~ / mean(I~)
//! E~[u] = sum_p M[u][p] * (1 / I[p])^alpha E = E~ / mean(E~)
//! ```
//!
//! In the default sequential order the Engagement update already uses the
//! Impact computed in the same step; the Jacobi order uses the previous one.
//! Iteration stops once the ranking of pages is stable: from the per-page
//! growth rates we estimate how many more steps it would take for two
//! neighbouring pages to swap, and stop when that horizon exceeds a
//! threshold.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BiadjacencyMatrix, MatrixError, SparseMatrix};
use crate::par::{self, Execution};
use crate::ranking::{normalized_ranks, ranks_from_order};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix has all-zero rows or columns; prune it first")]
    NotPruned,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} must be strictly positive (found {value} at index {index})")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("non-finite {what} at iteration {iteration} (alpha = {alpha})")]
    NonFinite {
        what: &'static str,
        iteration: u64,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateOrder {
    /// Engagement is computed from the Impact of the same step.
    #[default]
    Sequential,
    /// Both updates use the previous step's values.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopRankConfig {
    pub alpha: f64,
    pub max_iterations: u64,
    pub t_threshold: f64,
    pub underflow_floor: f64,
    pub initial_value: f64,
    pub update_order: UpdateOrder,
    /// Iterations before the ranking-stability estimate is consulted. An
    /// exactly stationary state stops the run even during burn-in.
    pub burn_in: u64,
}

impl Default for PopRankConfig {
    fn default() -> Self {
        Self {
            alpha: -0.5,
            max_iterations: 1_000_000,
            t_threshold: 1e6,
            underflow_floor: 1e-300,
            initial_value: 1.0,
            update_order: UpdateOrder::Sequential,
            burn_in: 10,
        }
    }
}

impl PopRankConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: &str| Err(EngineError::InvalidConfig(msg.to_string()));
        if !self.alpha.is_finite() {
            return bad("alpha must be finite");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.t_threshold > 0.0) {
            return bad("T threshold must be positive");
        }
        if !(self.underflow_floor > 0.0) || !self.underflow_floor.is_finite() {
            return bad("underflow floor must be positive");
        }
        if !(self.initial_value > 0.0) || !self.initial_value.is_finite() {
            return bad("initial value must be positive");
        }
        Ok(())
    }
}

/// Converged (or last) Impact and Engagement with their normalized ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub alpha: f64,
    pub impact: BTreeMap<String, f64>,
    pub engagement: BTreeMap<String, f64>,
    pub impact_rank: BTreeMap<String, f64>,
    pub engagement_rank: BTreeMap<String, f64>,
    pub iterations: u64,
    pub converged: bool,
    /// Last estimate of the iterations until the next ranking change.
    /// `None` when no estimate was made.
    #[serde(with = "horizon")]
    pub final_t: Option<f64>,
    /// Some value hit the underflow floor; only the rankings are meaningful.
    pub underflow: bool,
}

/// Stores `+inf` as the string `"inf"` so JSON round-trips.
/// Serde adapter for an optional horizon: infinities are written as the
/// strings `"inf"` and `"-inf"`.
pub mod horizon {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(&Repr::Finite(*x)),
            Some(x) if *x > 0.0 => s.serialize_some(&Repr::Text("inf".into())),
            Some(_) => s.serialize_some(&Repr::Text("-inf".into())),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Finite(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => match t.as_str() {
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("bad horizon `{other}`"))),
            },
        }
    }
}

/// Snapshot handed to observers after every iteration.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: u64,
    pub impact: &'a [f64],
    pub engagement: &'a [f64],
    /// Means right after normalization, before any floor clamping.
    pub impact_mean: f64,
    pub engagement_mean: f64,
    /// Ranking-stability estimate, when one was computed this iteration.
    pub t: Option<f64>,
}

/// Row- and column-major views of the input, built once per run.
struct Operator<'a> {
    by_user: &'a SparseMatrix,
    by_page: SparseMatrix,
    /// `(1 / impact)^alpha` per page, refreshed on every engagement update.
    factor: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(m: &'a BiadjacencyMatrix) -> Self {
        Self {
            by_user: m.weights(),
            by_page: m.weights().transpose(),
            factor: vec![0.0; m.n_pages()],
        }
    }

    fn impact_from(&self, engagement: &[f64], out: &mut [f64]) {
        for (p, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (u, w) in self.by_page.row(p) {
                acc += w / engagement[u];
            }
            *slot = acc;
        }
    }

    fn engagement_from(&mut self, impact: &[f64], alpha: f64, out: &mut [f64]) {
        for (f, &i) in self.factor.iter_mut().zip(impact) {
            *f = (1.0 / i).powf(alpha);
        }
        for (u, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (p, w) in self.by_user.row(u) {
                acc += w * self.factor[p];
            }
            *slot = acc;
        }
    }
}

/// Divides by the arithmetic mean and returns the normalized mean.
fn normalize(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x /= mean;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_finite(
    v: &[f64],
    what: &'static str,
    iteration: u64,
    alpha: f64,
) -> Result<(), EngineError> {
    if v.iter().all(|x| x.is_finite()) && v.iter().any(|&x| x > 0.0) {
        Ok(())
    } else {
        Err(EngineError::NonFinite {
            what,
            iteration,
            alpha,
        })
    }
}

fn check_positive(v: &[f64], what: &'static str) -> Result<(), EngineError> {
    match v.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        Some(index) => Err(EngineError::NonPositive {
            what,
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

fn check_shape(
    m: &BiadjacencyMatrix,
    impact: &[f64],
    engagement: &[f64],
) -> Result<(), EngineError> {
    if impact.len() != m.n_pages() {
        return Err(EngineError::LengthMismatch {
            what: "impact",
            expected: m.n_pages(),
            got: impact.len(),
        });
    }
    if engagement.len() != m.n_users() {
        return Err(EngineError::LengthMismatch {
            what: "engagement",
            expected: m.n_users(),
            got: engagement.len(),
        });
    }
    Ok(())
}

/// One sequential-order step of the map from `(impact, engagement)`.
/// Both outputs have mean 1.
pub fn iterate_once(
    m: &BiadjacencyMatrix,
    impact: &[f64],
    engagement: &[f64],
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>), EngineError> {
    iterate_once_with(m, impact, engagement, alpha, UpdateOrder::Sequential)
}

pub fn iterate_once_with(
    m: &BiadjacencyMatrix,
    impact: &[f64],
    engagement: &[f64],
    alpha: f64,
    order: UpdateOrder,
) -> Result<(Vec<f64>, Vec<f64>), EngineError> {
    if !m.is_pruned() {
        return Err(EngineError::NotPruned);
    }
    check_shape(m, impact, engagement)?;
    check_positive(impact, "impact")?;
    check_positive(engagement, "engagement")?;
    let mut op = Operator::new(m);
    let mut new_impact = vec![0.0; impact.len()];
    let mut new_engagement = vec![0.0; engagement.len()];
    step(
        &mut op,
        impact,
        engagement,
        alpha,
        order,
        &mut new_impact,
        &mut new_engagement,
        1,
    )?;
    Ok((new_impact, new_engagement))
}

#[allow(clippy::too_many_arguments)]
fn step(
    op: &mut Operator<'_>,
    impact: &[f64],
    engagement: &[f64],
    alpha: f64,
    order: UpdateOrder,
    new_impact: &mut [f64],
    new_engagement: &mut [f64],
    iteration: u64,
) -> Result<(f64, f64), EngineError> {
    op.impact_from(engagement, new_impact);
    check_finite(new_impact, "impact", iteration, alpha)?;
    let impact_mean = normalize(new_impact);
    let source = match order {
        UpdateOrder::Sequential => &*new_impact,
        UpdateOrder::Jacobi => impact,
    };
    op.engagement_from(source, alpha, new_engagement);
    check_finite(new_engagement, "engagement", iteration, alpha)?;
    let engagement_mean = normalize(new_engagement);
    Ok((impact_mean, engagement_mean))
}

/// Estimated number of further iterations before two pages adjacent in the
/// current Impact ordering swap places.
///
/// With growth rates `g = ln(curr / prev)` and pages sorted by descending
/// current Impact, a pair `p` above `q` closes its gap when `g[q] > g[p]`,
/// after `ln(curr[p] / curr[q]) / (g[q] - g[p])` steps. The minimum over
/// adjacent pairs is returned, `+inf` when no pair is closing.
pub fn estimate_t(impact_prev: &[f64], impact_curr: &[f64]) -> Result<f64, EngineError> {
    if impact_prev.len() != impact_curr.len() {
        return Err(EngineError::LengthMismatch {
            what: "impact_curr",
            expected: impact_prev.len(),
            got: impact_curr.len(),
        });
    }
    check_positive(impact_prev, "previous impact")?;
    check_positive(impact_curr, "current impact")?;
    let growth: Vec<f64> = impact_prev
        .iter()
        .zip(impact_curr)
        .map(|(a, b)| (b / a).ln())
        .collect();
    let mut order: Vec<usize> = (0..impact_curr.len()).collect();
    order.sort_by(|&a, &b| {
        impact_curr[b]
            .partial_cmp(&impact_curr[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let t = order
        .windows(2)
        .filter_map(|pair| {
            let (upper, lower) = (pair[0], pair[1]);
            let closing = growth[lower] - growth[upper];
            (closing > 0.0).then(|| (impact_curr[upper] / impact_curr[lower]).ln() / closing)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(t)
}

pub fn run(m: &BiadjacencyMatrix, cfg: &PopRankConfig) -> Result<RankResult, EngineError> {
    run_from(m, cfg, None, |_| {})
}

/// Like [`run`], calling `observe` after every iteration.
pub fn run_observed(
    m: &BiadjacencyMatrix,
    cfg: &PopRankConfig,
    observe: impl FnMut(&IterationState<'_>),
) -> Result<RankResult, EngineError> {
    run_from(m, cfg, None, observe)
}

/// Runs from an explicit `(impact, engagement)` start instead of the uniform
/// `initial_value`.
pub fn run_from(
    m: &BiadjacencyMatrix,
    cfg: &PopRankConfig,
    start: Option<(&[f64], &[f64])>,
    mut observe: impl FnMut(&IterationState<'_>),
) -> Result<RankResult, EngineError> {
    cfg.validate()?;
    if m.is_empty() {
        return Err(MatrixError::Degenerate.into());
    }
    if !m.is_pruned() {
        return Err(EngineError::NotPruned);
    }
    let (n_users, n_pages) = (m.n_users(), m.n_pages());
    let (mut impact, mut engagement) = match start {
        Some((i0, e0)) => {
            check_shape(m, i0, e0)?;
            check_positive(i0, "initial impact")?;
            check_positive(e0, "initial engagement")?;
            (i0.to_vec(), e0.to_vec())
        }
        None => (
            vec![cfg.initial_value; n_pages],
            vec![cfg.initial_value; n_users],
        ),
    };

    let mut op = Operator::new(m);
    let floor = cfg.underflow_floor;
    let mut next_impact = vec![0.0; n_pages];
    let mut next_engagement = vec![0.0; n_users];
    let mut impact_floor = FloorTracker::new(&impact);
    let mut engagement_floor = FloorTracker::new(&engagement);
    let mut underflow = false;
    let mut converged = false;
    let mut final_t = None;
    let mut iterations = 0;

    for n in 1..=cfg.max_iterations {
        iterations = n;
        let (impact_mean, engagement_mean) = step(
            &mut op,
            &impact,
            &engagement,
            cfg.alpha,
            cfg.update_order,
            &mut next_impact,
            &mut next_engagement,
            n,
        )?;
        underflow |= impact_floor.clamp(&mut next_impact, floor, n);
        underflow |= engagement_floor.clamp(&mut next_engagement, floor, n);

        let stationary = next_impact == impact && next_engagement == engagement;
        let t = if stationary || n > cfg.burn_in {
            Some(if n_pages < 2 {
                f64::INFINITY
            } else {
                estimate_t(&impact, &next_impact)?
            })
        } else {
            None
        };
        std::mem::swap(&mut impact, &mut next_impact);
        std::mem::swap(&mut engagement, &mut next_engagement);
        observe(&IterationState {
            iteration: n,
            impact: &impact,
            engagement: &engagement,
            impact_mean,
            engagement_mean,
            t,
        });
        if t.is_some() {
            final_t = t;
        }
        if t.is_some_and(|t| t > cfg.t_threshold) {
            converged = true;
            break;
        }
    }

    let impact_rank = ranks_from_order(&impact_floor.order(m.pages(), &impact));
    let engagement_rank = ranks_from_order(&engagement_floor.order(m.users(), &engagement));
    let zip = |ids: &[String], v: &[f64]| -> BTreeMap<String, f64> {
        ids.iter().cloned().zip(v.iter().copied()).collect()
    };
    Ok(RankResult {
        alpha: cfg.alpha,
        impact: zip(m.pages(), &impact),
        engagement: zip(m.users(), &engagement),
        impact_rank: zip(m.pages(), &impact_rank),
        engagement_rank: zip(m.users(), &engagement_rank),
        iterations,
        converged,
        final_t,
        underflow,
    })
}

/// Remembers, for each entry, the last value it had above the floor and the
/// iteration at which it was first clamped. Entries at the floor are ordered
/// by how late they reached it, then by their last value above it.
struct FloorTracker {
    last_above: Vec<f64>,
    clamped_at: Vec<Option<u64>>,
}

impl FloorTracker {
    fn new(initial: &[f64]) -> Self {
        Self {
            last_above: initial.to_vec(),
            clamped_at: vec![None; initial.len()],
        }
    }

    fn clamp(&mut self, v: &mut [f64], floor: f64, iteration: u64) -> bool {
        let mut hit = false;
        for (i, x) in v.iter_mut().enumerate() {
            if *x < floor {
                *x = floor;
                hit = true;
                self.clamped_at[i].get_or_insert(iteration);
            } else if *x > floor {
                self.last_above[i] = *x;
                self.clamped_at[i] = None;
            }
        }
        hit
    }

    fn order(&self, ids: &[String], values: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .partial_cmp(&values[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| match (self.clamped_at[a], self.clamped_at[b]) {
                    (Some(ia), Some(ib)) => ib.cmp(&ia).then_with(|| {
                        self.last_above[b]
                            .partial_cmp(&self.last_above[a])
                            .unwrap_or(Ordering::Equal)
                    }),
                    _ => Ordering::Equal,
                })
                .then_with(|| ids[a].cmp(&ids[b]))
        });
        order
    }
}

/// Popularity baseline: column sums of the input and their normalized ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    pub values: BTreeMap<String, f64>,
    pub rank: BTreeMap<String, f64>,
}

pub fn popularity(m: &BiadjacencyMatrix) -> Popularity {
    let sums = m.weights().col_sums();
    let ranks = normalized_ranks(m.pages(), &sums);
    Popularity {
        values: m.pages().iter().cloned().zip(sums).collect(),
        rank: m.pages().iter().cloned().zip(ranks).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub alpha: f64,
    pub result: Option<RankResult>,
    pub error: Option<String>,
}

/// Results of independent runs over a grid of exponents, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub entries: Vec<SweepEntry>,
}

impl Sweep {
    pub fn get(&self, alpha: f64) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.alpha == alpha)
    }
}

pub fn sweep_alpha(m: &BiadjacencyMatrix, alphas: &[f64], cfg: &PopRankConfig) -> Sweep {
    sweep_alpha_with(m, alphas, cfg, Execution::Parallel)
}

/// Runs share only the immutable matrix, so both execution modes give
/// identical results.
pub fn sweep_alpha_with(
    m: &BiadjacencyMatrix,
    alphas: &[f64],
    cfg: &PopRankConfig,
    exec: Execution,
) -> Sweep {
    let entries = par::map(alphas, exec, |&alpha| {
        let cfg = PopRankConfig {
            alpha,
            ..cfg.clone()
        };
        match run(m, &cfg) {
            Ok(r) => SweepEntry {
                alpha,
                result: Some(r),
                error: None,
            },
            Err(e) => SweepEntry {
                alpha,
                result: None,
                error: Some(e.to_string()),
            },
        }
    });
    Sweep { entries }
}

/// Inclusive grid `start, start + step, ..` up to `end`.
pub fn alpha_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>, EngineError> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(EngineError::InvalidConfig(format!(
            "bad alpha grid {start}:{end}:{step}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}
