//! Helpers shared by the integration tests.
#![allow(dead_code)]

use poprank::ingest::WindowConfig;
use poprank::model::{prune_matrix, BiadjacencyMatrix, MatrixKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense 0/1 matrix with independent entries.
pub fn random_binary(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    density: f64,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random_bool(density) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Dense nonnegative integer matrix with no empty row or column.
pub fn random_counts(rng: &mut ChaCha8Rng, rows: usize, cols: usize, max: u32) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        rng.random_range(0..=max) as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    for (r, row) in m.iter_mut().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            row[r % cols] = 1.0;
        }
    }
    for c in 0..cols {
        if m.iter().all(|row| row[c] == 0.0) {
            m[c % rows][c] = 1.0;
        }
    }
    m
}

/// A pruned random binary matrix of at least 2x2, drawn until one appears.
pub fn random_pruned(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> BiadjacencyMatrix {
    loop {
        let rows = rng.random_range(2..=max_rows);
        let cols = rng.random_range(2..=max_cols);
        let density = rng.random_range(0.25..0.75);
        let dense = random_binary(rng, rows, cols, density);
        let m = BiadjacencyMatrix::from_dense_anonymous(MatrixKind::BinaryRca, &dense).unwrap();
        if let Ok((p, _)) = prune_matrix(&m) {
            if p.n_users() >= 2 && p.n_pages() >= 2 {
                return p;
            }
        }
    }
}

/// Normalized ranks (1 for the largest value, ties to the smaller id),
/// computed without the library's ranking helpers.
pub fn reference_ranks(ids: &[String], values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let n = ids.len() as f64;
    let mut ranks = vec![0.0; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = (ids.len() - pos) as f64 / n;
    }
    ranks
}

/// Training months 1..=16, test months 17..=22, at least 5 comments per month.
pub fn reference_window() -> WindowConfig {
    WindowConfig::new(1..=16, 17..=22, 5).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
