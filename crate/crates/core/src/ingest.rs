//! Reading interaction and page files, activity filters, and the
//! training/test split.
//!
//! Interactions file: `user_id,page_id,month,comments`.
//! Pages file: `page_id,month,posts,category`.
//! Both are plain comma-separated UTF-8 with a header line; lines starting
//! with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BiadjacencyMatrix, Category, InteractionRecord, MatrixError, MatrixKind, PageMeta, SparseMatrix,
};

pub const INTERACTIONS_HEADER: [&str; 4] = ["user_id", "page_id", "month", "comments"];
pub const PAGES_HEADER: [&str; 4] = ["page_id", "month", "posts", "category"];

#[derive(Error, Debug)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line} (record {record}): {message}")]
    Parse {
        line: u64,
        record: usize,
        message: String,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("page `{page}` has conflicting categories {first} and {second}")]
    ConflictingCategory {
        page: String,
        first: Category,
        second: Category,
    },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("no page/user survives the activity filters")]
    NoSurvivors,
    #[error("unknown page `{0}`")]
    UnknownPage(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Training and test month ranges (inclusive) and the page activity
/// threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub train_start: u32,
    pub train_end: u32,
    pub test_start: u32,
    pub test_end: u32,
    pub min_page_comments: u64,
}

impl WindowConfig {
    pub fn new(
        train: RangeInclusive<u32>,
        test: RangeInclusive<u32>,
        min_page_comments: u64,
    ) -> Result<Self, IngestError> {
        let cfg = Self {
            train_start: *train.start(),
            train_end: *train.end(),
            test_start: *test.start(),
            test_end: *test.end(),
            min_page_comments,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.train_start < 1 {
            return Err(IngestError::InvalidWindow("months start at 1".into()));
        }
        if !(self.train_start <= self.train_end
            && self.train_end < self.test_start
            && self.test_start <= self.test_end)
        {
            return Err(IngestError::InvalidWindow(format!(
                "need train_start <= train_end < test_start <= test_end, got {}:{} and {}:{}",
                self.train_start, self.train_end, self.test_start, self.test_end
            )));
        }
        Ok(())
    }

    pub fn train(&self) -> RangeInclusive<u32> {
        self.train_start..=self.train_end
    }

    pub fn test(&self) -> RangeInclusive<u32> {
        self.test_start..=self.test_end
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Yields `(line, record_index, fields)` for every data row after checking
/// the header.
fn read_rows<R: Read>(
    reader: R,
    header: &[&str; 4],
) -> Result<Vec<(u64, usize, csv::StringRecord)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, result) in rdr.records().enumerate() {
        let rec = result?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if !seen_header {
            let found: Vec<&str> = rec.iter().collect();
            if found != header {
                return Err(IngestError::Header {
                    expected: header.join(","),
                    found: found.join(","),
                });
            }
            seen_header = true;
            continue;
        }
        let record = rows.len() + 1;
        if rec.len() != 4 {
            return Err(IngestError::Parse {
                line,
                record,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        rows.push((line, record, rec));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    name: &str,
    line: u64,
    record: usize,
) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| IngestError::Parse {
        line,
        record,
        message: format!("bad {name} `{raw}`: {e}"),
    })
}

fn parse_count(raw: &str, name: &str, line: u64, record: usize) -> Result<u64, IngestError> {
    let v: i64 = parse_field(raw, name, line, record)?;
    u64::try_from(v).map_err(|_| IngestError::Parse {
        line,
        record,
        message: format!("negative {name} {v}"),
    })
}

fn parse_month(raw: &str, line: u64, record: usize) -> Result<u32, IngestError> {
    let m: u32 = parse_field(raw, "month", line, record)?;
    if m < 1 {
        return Err(IngestError::Parse {
            line,
            record,
            message: "month must be >= 1".into(),
        });
    }
    Ok(m)
}

pub fn load_interactions(path: &Path) -> Result<Vec<InteractionRecord>, IngestError> {
    parse_interactions(open(path)?)
}

/// Duplicate `(user, page, month)` rows are summed, keeping the position of
/// the first occurrence. Rows with zero comments are dropped.
pub fn parse_interactions<R: Read>(reader: R) -> Result<Vec<InteractionRecord>, IngestError> {
    let mut out: Vec<InteractionRecord> = Vec::new();
    let mut slot: HashMap<(String, String, u32), usize> = HashMap::new();
    for (line, record, row) in read_rows(reader, &INTERACTIONS_HEADER)? {
        let user = row[0].to_string();
        let page = row[1].to_string();
        if user.is_empty() || page.is_empty() {
            return Err(IngestError::Parse {
                line,
                record,
                message: "empty id".into(),
            });
        }
        let month = parse_month(&row[2], line, record)?;
        let comments = parse_count(&row[3], "comment count", line, record)?;
        if comments == 0 {
            continue;
        }
        match slot.get(&(user.clone(), page.clone(), month)) {
            Some(&i) => out[i].comments += comments,
            None => {
                slot.insert((user.clone(), page.clone(), month), out.len());
                out.push(InteractionRecord {
                    user_id: user,
                    page_id: page,
                    month,
                    comments,
                });
            }
        }
    }
    Ok(out)
}

pub fn load_pages(path: &Path) -> Result<Vec<PageMeta>, IngestError> {
    parse_pages(open(path)?)
}

/// One `PageMeta` per page in first-seen order; repeated months are summed.
pub fn parse_pages<R: Read>(reader: R) -> Result<Vec<PageMeta>, IngestError> {
    let mut out: Vec<PageMeta> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (line, record, row) in read_rows(reader, &PAGES_HEADER)? {
        let page = row[0].to_string();
        let month = parse_month(&row[1], line, record)?;
        let posts = parse_count(&row[2], "post count", line, record)?;
        let category: Category = row[3].parse().map_err(|message| IngestError::Parse {
            line,
            record,
            message,
        })?;
        let i = *slot.entry(page.clone()).or_insert_with(|| {
            out.push(PageMeta {
                page_id: page.clone(),
                posts_per_month: BTreeMap::new(),
                category,
            });
            out.len() - 1
        });
        let meta = &mut out[i];
        if meta.category != category {
            return Err(IngestError::ConflictingCategory {
                page,
                first: meta.category,
                second: category,
            });
        }
        *meta.posts_per_month.entry(month).or_insert(0) += posts;
    }
    Ok(out)
}

pub fn write_interactions<W: Write>(w: W, records: &[InteractionRecord]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(INTERACTIONS_HEADER)?;
    for r in records {
        wtr.write_record([
            r.user_id.as_str(),
            r.page_id.as_str(),
            &r.month.to_string(),
            &r.comments.to_string(),
        ])?;
    }
    wtr.flush()
}

pub fn write_pages<W: Write>(w: W, pages: &[PageMeta]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PAGES_HEADER)?;
    for p in pages {
        for (month, posts) in &p.posts_per_month {
            wtr.write_record([
                p.page_id.as_str(),
                &month.to_string(),
                &posts.to_string(),
                p.category.as_str(),
            ])?;
        }
    }
    wtr.flush()
}

/// Keeps the records of a uniform random sample of `n` users (all records
/// when there are at most `n` users). Users are drawn from the sorted set of
/// ids, so the sample depends only on the seed and the id set.
pub fn subsample_users(
    records: &[InteractionRecord],
    n: usize,
    seed: u64,
) -> Vec<InteractionRecord> {
    let users: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
    if users.len() <= n {
        return records.to_vec();
    }
    let mut users: Vec<&str> = users.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let keep: HashSet<&str> = users.into_iter().take(n).collect();
    records
        .iter()
        .filter(|r| keep.contains(r.user_id.as_str()))
        .cloned()
        .collect()
}

/// Assigns dense indices in first-seen order.
#[derive(Default)]
struct Interner {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), self.ids.len() - 1);
        self.ids.len() - 1
    }
}

fn build_matrix<'a>(
    records: impl Iterator<Item = &'a InteractionRecord>,
) -> Result<BiadjacencyMatrix, IngestError> {
    let mut users = Interner::default();
    let mut pages = Interner::default();
    let mut triplets = Vec::new();
    for r in records {
        let u = users.get_or_insert(&r.user_id);
        let p = pages.get_or_insert(&r.page_id);
        triplets.push((u, p, r.comments as f64));
    }
    let weights = SparseMatrix::from_triplets(users.ids.len(), pages.ids.len(), triplets)?;
    Ok(BiadjacencyMatrix::new(
        users.ids,
        pages.ids,
        MatrixKind::RawCounts,
        weights,
    )?)
}

/// One raw-count matrix per month of `months`, holding exactly the users and
/// pages active in that month. Months without records map to empty
/// matrices.
pub fn monthly_matrices(
    records: &[InteractionRecord],
    months: RangeInclusive<u32>,
) -> Result<BTreeMap<u32, BiadjacencyMatrix>, IngestError> {
    if months.is_empty() {
        return Err(IngestError::InvalidWindow("empty month range".into()));
    }
    months
        .map(|m| Ok((m, build_matrix(records.iter().filter(|r| r.month == m))?)))
        .collect()
}

/// Training matrix `V`.
///
/// 1. Pages must collect at least `min_page_comments` (and at least one)
///    comments in every training month.
/// 2. Users must comment one of those pages in every training month.
/// 3. Counts are summed over the window.
/// 4. Pages whose summed count falls below `min_page_comments`, and users
///    left without comments, are dropped until none remain.
pub fn aggregate_training(
    records: &[InteractionRecord],
    cfg: &WindowConfig,
) -> Result<BiadjacencyMatrix, IngestError> {
    cfg.validate()?;
    let window = cfg.train();
    let n_months = (cfg.train_end - cfg.train_start + 1) as usize;
    let train: Vec<&InteractionRecord> = records
        .iter()
        .filter(|r| window.contains(&r.month))
        .collect();
    let month_slot = |m: u32| (m - cfg.train_start) as usize;

    let mut page_monthly: HashMap<&str, Vec<u64>> = HashMap::new();
    for r in &train {
        page_monthly
            .entry(&r.page_id)
            .or_insert_with(|| vec![0; n_months])[month_slot(r.month)] += r.comments;
    }
    let threshold = cfg.min_page_comments.max(1);
    let pages: HashSet<&str> = page_monthly
        .iter()
        .filter(|(_, counts)| counts.iter().all(|&c| c >= threshold))
        .map(|(p, _)| *p)
        .collect();

    let mut user_months: HashMap<&str, Vec<bool>> = HashMap::new();
    for r in train.iter().filter(|r| pages.contains(r.page_id.as_str())) {
        user_months
            .entry(&r.user_id)
            .or_insert_with(|| vec![false; n_months])[month_slot(r.month)] = true;
    }
    let users: HashSet<&str> = user_months
        .iter()
        .filter(|(_, active)| active.iter().all(|&a| a))
        .map(|(u, _)| *u)
        .collect();

    let kept = train
        .iter()
        .copied()
        .filter(|r| pages.contains(r.page_id.as_str()) && users.contains(r.user_id.as_str()));
    let mut v = build_matrix(kept)?;

    loop {
        let w = v.weights();
        let col_sums = w.col_sums();
        let keep_pages: Vec<usize> = (0..v.n_pages())
            .filter(|&p| col_sums[p] >= cfg.min_page_comments as f64 && col_sums[p] > 0.0)
            .collect();
        let selected = v.select(&(0..v.n_users()).collect::<Vec<_>>(), &keep_pages);
        let keep_users: Vec<usize> = (0..selected.n_users())
            .filter(|&u| selected.weights().row_nnz(u) > 0)
            .collect();
        let next = selected.select(&keep_users, &(0..selected.n_pages()).collect::<Vec<_>>());
        if next.n_users() == v.n_users() && next.n_pages() == v.n_pages() {
            break;
        }
        v = next;
    }
    if v.is_empty() {
        return Err(IngestError::NoSurvivors);
    }
    Ok(v)
}

/// Prediction targets of a page over the test window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageTargets {
    /// log10(1 + posts published)
    pub activity_of: f64,
    /// log10(1 + comments received)
    pub activity_on: f64,
    /// distinct commenting users
    pub n_users: u64,
}

pub fn future_targets(
    records: &[InteractionRecord],
    pages: &[String],
    meta: &[PageMeta],
    cfg: &WindowConfig,
) -> Result<BTreeMap<String, PageTargets>, IngestError> {
    cfg.validate()?;
    let window = cfg.test();
    let meta_by_id: HashMap<&str, &PageMeta> =
        meta.iter().map(|m| (m.page_id.as_str(), m)).collect();
    let known: HashSet<&str> = records.iter().map(|r| r.page_id.as_str()).collect();
    let mut comments: HashMap<&str, u64> = HashMap::new();
    let mut commenters: HashMap<&str, HashSet<&str>> = HashMap::new();
    for r in records.iter().filter(|r| window.contains(&r.month)) {
        *comments.entry(&r.page_id).or_default() += r.comments;
        commenters.entry(&r.page_id).or_default().insert(&r.user_id);
    }
    pages
        .iter()
        .map(|p| {
            let m = meta_by_id.get(p.as_str());
            if m.is_none() && !known.contains(p.as_str()) {
                return Err(IngestError::UnknownPage(p.clone()));
            }
            let posts: u64 = m.map_or(0, |m| {
                m.posts_per_month
                    .range(window.clone())
                    .map(|(_, c)| c)
                    .sum()
            });
            let received = comments.get(p.as_str()).copied().unwrap_or(0);
            let n_users = commenters.get(p.as_str()).map_or(0, |s| s.len() as u64);
            Ok((
                p.clone(),
                PageTargets {
                    activity_of: (1.0 + posts as f64).log10(),
                    activity_on: (1.0 + received as f64).log10(),
                    n_users,
                },
            ))
        })
        .collect()
}

pub fn categories(meta: &[PageMeta]) -> BTreeMap<String, Category> {
    meta.iter()
        .map(|m| (m.page_id.clone(), m.category))
        .collect()
}
