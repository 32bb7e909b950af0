//! Impact and Engagement ranking for bipartite user/page interaction
//! networks.
//!
//! The pipeline: [`ingest`] builds a user x page comment-count matrix from
//! interaction records, [`rca`] binarizes it with the Balassa revealed
//! comparative advantage, [`engine`] iterates the coupled Impact/Engagement
//! map to a stable ranking, and [`evaluate`] regresses future page activity
//! on the Impact ranking. [`synth`] generates datasets with a planted page
//! quality for validation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod par;
pub mod ranking;
pub mod rca;
pub mod stats;
pub mod synth;

pub use engine::{
    estimate_t, iterate_once, popularity, run, sweep_alpha, PopRankConfig, RankResult, UpdateOrder,
};
pub use model::{
    prune_matrix, BiadjacencyMatrix, Category, InteractionRecord, MatrixKind, PageMeta,
};
pub use par::Execution;
