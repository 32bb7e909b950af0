//! Synthetic interaction data with a planted page quality, plus naive
//! reference implementations of the ranking map used as test oracles.
//!
//! Each page has a latent quality `q` and each user a latent propensity `e`,
//! both in (0, 1]. In month `m` user `u` leaves
//! `Poisson(base_rate * e_u * q_p * (1 + reinforcement)^k)` comments on page
//! `p`, where `k` counts the earlier months in which `u` commented `p`
//! (capped at `reinforcement_cap`). Pages publish `Poisson(posts_rate * q_p)`
//! posts per month.
//!
//! Randomness is drawn from one ChaCha stream in a fixed order: page
//! qualities, user propensities, page categories, then month by month the
//! comment counts (users outer, pages inner) followed by the post counts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Category, InteractionRecord, PageMeta};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
    #[error("oracle limited to 12x12 matrices, got {rows}x{cols}")]
    TooLarge { rows: usize, cols: usize },
}

/// How a latent value in (0, 1] is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LatentLaw {
    /// Evenly spaced over `(low, 1]` in index order.
    Spaced { low: f64 },
    /// Uniform on `[low, 1]`.
    Uniform { low: f64 },
    /// `U^exponent` with `U` uniform on (0, 1]: skewed towards 0.
    Power { exponent: f64 },
}

impl LatentLaw {
    fn validate(&self) -> Result<(), SynthError> {
        let ok = match *self {
            LatentLaw::Spaced { low } | LatentLaw::Uniform { low } => (0.0..1.0).contains(&low),
            LatentLaw::Power { exponent } => exponent > 0.0 && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(format!(
                "bad latent law {self:?}"
            )))
        }
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match *self {
            LatentLaw::Spaced { low } => (0..n)
                .map(|i| low + (1.0 - low) * (i + 1) as f64 / n as f64)
                .collect(),
            LatentLaw::Uniform { low } => (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    (low + (1.0 - low) * x).max(f64::MIN_POSITIVE)
                })
                .collect(),
            LatentLaw::Power { exponent } => (0..n)
                .map(|_| {
                    let x: f64 = 1.0 - rng.random::<f64>();
                    x.powf(exponent)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_pages: usize,
    pub n_months: u32,
    /// Index of the first generated month.
    pub first_month: u32,
    pub seed: u64,
    pub page_quality: LatentLaw,
    pub user_propensity: LatentLaw,
    /// Monthly comment intensity of a user with `e = 1` on a page with `q = 1`.
    pub base_rate: f64,
    pub reinforcement: f64,
    pub reinforcement_cap: u32,
    /// Monthly post intensity of a page with `q = 1`.
    pub posts_rate: f64,
    /// Fraction of pages labelled science; the rest are conspiracy.
    pub science_fraction: f64,
}

impl Default for SynthConfig {
    /// The reference instance: 50 pages, 500 users, 16 training plus 6 test
    /// months.
    fn default() -> Self {
        Self {
            n_users: 500,
            n_pages: 50,
            n_months: 22,
            first_month: 1,
            seed: 20180501,
            page_quality: LatentLaw::Spaced { low: 0.0 },
            user_propensity: LatentLaw::Power { exponent: 4.0 },
            base_rate: 0.7,
            reinforcement: 1.5,
            reinforcement_cap: 6,
            posts_rate: 30.0,
            science_fraction: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.n_users < 1 || self.n_pages < 1 || self.n_months < 1 {
            return bad("n_users, n_pages and n_months must be at least 1");
        }
        if self.first_month < 1 {
            return bad("months start at 1");
        }
        if !(self.base_rate > 0.0) || !self.base_rate.is_finite() {
            return bad("base_rate must be positive");
        }
        if !(self.reinforcement >= 0.0) || !self.reinforcement.is_finite() {
            return bad("reinforcement must be >= 0");
        }
        if !(self.posts_rate >= 0.0) || !self.posts_rate.is_finite() {
            return bad("posts_rate must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.science_fraction) {
            return bad("science_fraction must lie in [0, 1]");
        }
        self.page_quality.validate()?;
        self.user_propensity.validate()
    }

    pub fn last_month(&self) -> u32 {
        self.first_month + self.n_months - 1
    }

    pub fn user_id(i: usize) -> String {
        format!("u{i:05}")
    }

    pub fn page_id(j: usize) -> String {
        format!("p{j:04}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthData {
    pub records: Vec<InteractionRecord>,
    pub meta: Vec<PageMeta>,
    /// Planted page quality.
    pub quality: BTreeMap<String, f64>,
    /// Planted user propensity.
    pub propensity: BTreeMap<String, f64>,
}

fn poisson(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    // rate is positive and finite
    Poisson::new(rate).expect("valid Poisson rate").sample(rng) as u64
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let quality = cfg.page_quality.draw(cfg.n_pages, &mut rng);
    let propensity = cfg.user_propensity.draw(cfg.n_users, &mut rng);
    let categories: Vec<Category> = (0..cfg.n_pages)
        .map(|_| {
            if rng.random::<f64>() < cfg.science_fraction {
                Category::Science
            } else {
                Category::Conspiracy
            }
        })
        .collect();

    let users: Vec<String> = (0..cfg.n_users).map(SynthConfig::user_id).collect();
    let pages: Vec<String> = (0..cfg.n_pages).map(SynthConfig::page_id).collect();
    let mut history = vec![0u32; cfg.n_users * cfg.n_pages];
    let mut records = Vec::new();
    let mut posts: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); cfg.n_pages];
    let boost: Vec<f64> = (0..=cfg.reinforcement_cap)
        .map(|k| (1.0 + cfg.reinforcement).powi(k as i32))
        .collect();

    for month in cfg.first_month..=cfg.last_month() {
        let mut active = Vec::new();
        for (u, e) in propensity.iter().enumerate() {
            for (p, q) in quality.iter().enumerate() {
                let k = history[u * cfg.n_pages + p].min(cfg.reinforcement_cap);
                let c = poisson(cfg.base_rate * e * q * boost[k as usize], &mut rng);
                if c > 0 {
                    records.push(InteractionRecord {
                        user_id: users[u].clone(),
                        page_id: pages[p].clone(),
                        month,
                        comments: c,
                    });
                    active.push(u * cfg.n_pages + p);
                }
            }
        }
        for slot in active {
            history[slot] += 1;
        }
        for (p, q) in quality.iter().enumerate() {
            posts[p].insert(month, poisson(cfg.posts_rate * q, &mut rng));
        }
    }

    let meta = pages
        .iter()
        .zip(posts)
        .zip(&categories)
        .map(|((id, posts_per_month), &category)| PageMeta {
            page_id: id.clone(),
            posts_per_month,
            category,
        })
        .collect();
    Ok(SynthData {
        records,
        meta,
        quality: pages.iter().cloned().zip(quality).collect(),
        propensity: users.into_iter().zip(propensity).collect(),
    })
}

fn guard(m: &[Vec<f64>]) -> Result<(usize, usize), SynthError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows > 12 || cols > 12 {
        return Err(SynthError::TooLarge { rows, cols });
    }
    Ok((rows, cols))
}

/// Plain-loop reference of the ranking map on a dense users x pages matrix:
/// `n_steps` sequential-order steps from all-ones Impact and Engagement,
/// with mean normalization after each half step and no clamping.
pub fn oracle_iterate(
    m: &[Vec<f64>],
    alpha: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<f64>), SynthError> {
    let (rows, cols) = guard(m)?;
    let mut impact = vec![1.0; cols];
    let mut engagement = vec![1.0; rows];
    for _ in 0..n_steps {
        let mut new_impact = vec![0.0; cols];
        for p in 0..cols {
            for u in 0..rows {
                if m[u][p] != 0.0 {
                    new_impact[p] += m[u][p] / engagement[u];
                }
            }
        }
        let mean = new_impact.iter().sum::<f64>() / cols as f64;
        for x in &mut new_impact {
            *x /= mean;
        }
        impact = new_impact;

        let mut new_engagement = vec![0.0; rows];
        for u in 0..rows {
            for p in 0..cols {
                if m[u][p] != 0.0 {
                    new_engagement[u] += m[u][p] * (1.0 / impact[p]).powf(alpha);
                }
            }
        }
        let mean = new_engagement.iter().sum::<f64>() / rows as f64;
        for x in &mut new_engagement {
            *x /= mean;
        }
        engagement = new_engagement;
    }
    Ok((impact, engagement))
}

/// Textbook Fitness-Complexity iteration on a countries x products matrix,
/// both quantities updated from the previous step and mean-normalized.
/// Returns `(fitness, complexity)` after `n_steps`.
pub fn oracle_fitness_complexity(
    m: &[Vec<f64>],
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<f64>), SynthError> {
    let (rows, cols) = guard(m)?;
    let mut fitness = vec![1.0; rows];
    let mut complexity = vec![1.0; cols];
    for _ in 0..n_steps {
        let mut f = vec![0.0; rows];
        for (c, fc) in f.iter_mut().enumerate() {
            for p in 0..cols {
                *fc += m[c][p] * complexity[p];
            }
        }
        let mut q = vec![0.0; cols];
        for (p, qp) in q.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..rows {
                s += m[c][p] / fitness[c];
            }
            *qp = 1.0 / s;
        }
        let mf = f.iter().sum::<f64>() / rows as f64;
        let mq = q.iter().sum::<f64>() / cols as f64;
        fitness = f.into_iter().map(|x| x / mf).collect();
        complexity = q.into_iter().map(|x| x / mq).collect();
    }
    Ok((fitness, complexity))
}
