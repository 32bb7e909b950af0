//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use poprank::engine::{
    alpha_grid, estimate_t, popularity, run, run_from, run_observed, sweep_alpha, PopRankConfig,
};
use poprank::evaluate::{
    linear_fit, mse_curve, polarization_groups, polarization_report, predict_report, spearman,
    RegressOn, TargetKind,
};
use poprank::ingest::{aggregate_training, categories, future_targets};
use poprank::model::{prune_matrix, BiadjacencyMatrix, MatrixKind};
use poprank::par::Execution;
use poprank::rca::{binarize, rca_values};
use poprank::stats::t_two_sided_p;
use poprank::synth::{generate, oracle_fitness_complexity, oracle_iterate, SynthConfig, SynthData};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_counts, random_pruned, reference_ranks, reference_window, rel_diff};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Runs `body`, also failing it when it exceeds `limit`.
fn criterion(id: u32, name: &str, limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        check(false, format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = out.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / {:.0?}", l));
    println!(
        "criterion {id:>2} {name}: {} ({}; {:.2?}{budget})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed
    );
    pass
}

/// RCA from its definition, one entry at a time.
#[allow(clippy::needless_range_loop)]
fn rca_oracle(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (rows, cols) = (v.len(), v[0].len());
    let mut out = vec![vec![0.0; cols]; rows];
    for u in 0..rows {
        for p in 0..cols {
            let mut row = 0.0;
            for q in 0..cols {
                row += v[u][q];
            }
            let mut col = 0.0;
            let mut total = 0.0;
            for w in 0..rows {
                col += v[w][p];
                for q in 0..cols {
                    total += v[w][q];
                }
            }
            out[u][p] = (v[u][p] / row) / (col / total);
        }
    }
    out
}

fn c1_rca() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_mean) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let rows = rng.random_range(1..=10);
        let cols = rng.random_range(1..=10);
        let dense = random_counts(&mut rng, rows, cols, 20);
        let v = BiadjacencyMatrix::from_dense_anonymous(MatrixKind::RawCounts, &dense).unwrap();
        let got = rca_values(&v).unwrap().to_dense();
        let want = rca_oracle(&dense);
        let total: f64 = dense.iter().flatten().sum();
        for u in 0..rows {
            let mut weighted = 0.0;
            for p in 0..cols {
                worst = worst.max((got[u][p] - want[u][p]).abs());
                let share = dense.iter().map(|r| r[p]).sum::<f64>() / total;
                weighted += got[u][p] * share;
            }
            worst_mean = worst_mean.max((weighted - 1.0).abs());
        }
    }
    check(
        worst <= 1e-12 && worst_mean <= 1e-9,
        format!("max |RCA - oracle| = {worst:.1e}, max |weighted mean - 1| = {worst_mean:.1e}"),
    )
}

fn c2_fixed_point() -> Outcome {
    let (mut worst_value, mut worst_mean) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for rows in [1, 2, 5, 13, 20] {
        for cols in [1, 3, 8, 30] {
            let m = BiadjacencyMatrix::from_dense_anonymous(
                MatrixKind::BinaryRca,
                &vec![vec![1.0; cols]; rows],
            )
            .unwrap();
            for alpha in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0] {
                let r = run_observed(&m, &PopRankConfig::with_alpha(alpha), |s| {
                    for v in [s.impact, s.engagement] {
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        worst_mean = worst_mean.max((mean - 1.0).abs());
                    }
                })
                .unwrap();
                for x in r.impact.values().chain(r.engagement.values()) {
                    worst_value = worst_value.max((x - 1.0).abs());
                }
                if !r.converged {
                    return check(
                        false,
                        format!("{rows}x{cols} at alpha {alpha} did not converge"),
                    );
                }
                cases += 1;
            }
        }
    }
    check(
        worst_value <= 1e-9 && worst_mean <= 1e-12,
        format!("{cases} runs, max |x - 1| = {worst_value:.1e}, max |mean - 1| = {worst_mean:.1e}"),
    )
}

/// Counts page pairs ordered differently by Impact and by the inverse
/// complexity. Pairs whose values agree to 1e-12 relative in both are
/// floating-point ties (typically pages exchanged by a symmetry of the
/// matrix) and are counted separately instead.
fn order_agreement(
    m: &BiadjacencyMatrix,
    impact: &BTreeMap<String, f64>,
    inverse: &[f64],
    inverse_ranks: &[f64],
) -> (usize, usize) {
    let ids = m.pages();
    let (mut disagree, mut ties) = (0, 0);
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            let (ia, ib) = (impact[&ids[a]], impact[&ids[b]]);
            if rel_diff(ia, ib) <= 1e-12 && rel_diff(inverse[a], inverse[b]) <= 1e-12 {
                ties += 1;
                continue;
            }
            let by_impact = ia > ib || (ia == ib && ids[a] < ids[b]);
            if by_impact != (inverse_ranks[a] > inverse_ranks[b]) {
                disagree += 1;
            }
        }
    }
    (disagree, ties)
}

/// Compares the engine with the plain-loop oracle at the last iteration
/// before any value was clamped at the underflow floor (the final iteration
/// when nothing was clamped); past that point the unclamped oracle leaves
/// the representable range.
fn c3_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let (mut runs, mut clamped_runs, mut rank_mismatch) = (0, 0, 0);
    let (mut fc_mismatch, mut fc_checked, mut rounding_ties) = (0, 0, 0);
    for _ in 0..100 {
        let m = random_pruned(&mut rng, 12, 12);
        let dense = m.to_dense();
        for alpha in [-1.0, -0.5, 0.0, 1.0] {
            let cfg = PopRankConfig::with_alpha(alpha);
            let floor = cfg.underflow_floor;
            let mut first_clamped = None;
            let full = run_observed(&m, &cfg, |s| {
                if first_clamped.is_none()
                    && s.impact.iter().chain(s.engagement).any(|&x| x <= floor)
                {
                    first_clamped = Some(s.iteration);
                }
            })
            .unwrap();
            runs += 1;
            assert_eq!(full.underflow, first_clamped.is_some());
            let k = first_clamped.map_or(full.iterations, |c| c - 1);
            if k == 0 {
                clamped_runs += 1;
                continue;
            }
            let r = if k == full.iterations {
                full
            } else {
                clamped_runs += 1;
                run(
                    &m,
                    &PopRankConfig {
                        max_iterations: k,
                        ..cfg
                    },
                )
                .unwrap()
            };
            let (impact, engagement) = oracle_iterate(&dense, alpha, k as usize).unwrap();
            for (p, id) in m.pages().iter().enumerate() {
                worst = worst.max(rel_diff(r.impact[id], impact[p]));
            }
            for (u, id) in m.users().iter().enumerate() {
                worst = worst.max(rel_diff(r.engagement[id], engagement[u]));
            }
            let oracle_ranks = reference_ranks(m.pages(), &impact);
            if m.pages()
                .iter()
                .zip(&oracle_ranks)
                .any(|(id, rk)| r.impact_rank[id] != *rk)
            {
                rank_mismatch += 1;
            }
            if alpha == 1.0 {
                // complexity after 2k - 1 steps orders pages like Impact after k
                let (_, q) = oracle_fitness_complexity(&dense, 2 * k as usize - 1).unwrap();
                let inverse: Vec<f64> = q.iter().map(|x| 1.0 / x).collect();
                if inverse.iter().all(|x| x.is_finite() && *x > 0.0) {
                    fc_checked += 1;
                    let fc_ranks = reference_ranks(m.pages(), &inverse);
                    let (disagree, ties) = order_agreement(&m, &r.impact, &inverse, &fc_ranks);
                    fc_mismatch += disagree;
                    rounding_ties += ties;
                }
            }
        }
    }
    check(
        worst <= 1e-12 && rank_mismatch == 0 && fc_mismatch == 0 && fc_checked > 0,
        format!(
            "{runs} runs ({clamped_runs} compared before clamping), max relative deviation {worst:.1e}, \
             rank mismatches {rank_mismatch}, Fitness-Complexity mismatches {fc_mismatch} of {fc_checked} \
             ({rounding_ties} pairs tied to within 1e-12)"
        ),
    )
}

fn c4_initial_conditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = PopRankConfig::default();
    let mut disagreeing = 0;
    let mut matrices = 0;
    while matrices < 20 {
        let dense = common::random_binary(&mut rng, 10, 15, 0.4);
        let Ok((m, _)) = prune_matrix(
            &BiadjacencyMatrix::from_dense_anonymous(MatrixKind::BinaryRca, &dense).unwrap(),
        ) else {
            continue;
        };
        matrices += 1;
        let reference = run(&m, &cfg).unwrap();
        for _ in 0..10 {
            let i0: Vec<f64> = (0..m.n_pages())
                .map(|_| rng.random_range(0.01..100.0))
                .collect();
            let e0: Vec<f64> = (0..m.n_users())
                .map(|_| rng.random_range(0.01..100.0))
                .collect();
            let r = run_from(&m, &cfg, Some((&i0, &e0)), |_| {}).unwrap();
            if !r.converged
                || r.impact_rank != reference.impact_rank
                || r.engagement_rank != reference.engagement_rank
            {
                disagreeing += 1;
            }
        }
    }
    check(
        disagreeing == 0,
        format!(
            "{matrices} matrices x 10 starts, {disagreeing} rankings differ from the uniform start"
        ),
    )
}

fn c5_horizon() -> Outcome {
    // page a leads page b but grows more slowly
    let (a0, b0, ga, gb) = (4.0f64, 1.0f64, 0.1f64, 0.3f64);
    let prev = [a0, b0];
    let curr = [a0 * ga.exp(), b0 * gb.exp()];
    let expected = (curr[0] / curr[1]).ln() / (gb - ga);
    let got = estimate_t(&prev, &curr).unwrap();
    let toy_ok = (got - expected).abs() <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad_stops = 0;
    let mut runs = 0;
    for i in 0..40 {
        let m = random_pruned(&mut rng, 12, 12);
        let alpha = [-1.0, -0.5, 0.0, 1.0][i % 4];
        let cfg = PopRankConfig::with_alpha(alpha);
        let mut trace = Vec::new();
        let r = run_observed(&m, &cfg, |s| trace.push(s.t)).unwrap();
        let (last, before) = trace.split_last().unwrap();
        let early = before.iter().flatten().any(|&t| t > cfg.t_threshold);
        let stop_ok = r.converged && last.is_some_and(|t| t > cfg.t_threshold);
        if early || !stop_ok {
            bad_stops += 1;
        }
        runs += 1;
    }
    check(
        toy_ok && bad_stops == 0,
        format!("toy T = {got} (closed form {expected}); {bad_stops} of {runs} traces stop at the wrong iteration"),
    )
}

fn c6_regression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..60);
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0));
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| a + b * x + rng.random_range(-4.0..4.0))
            .collect();
        let key = |i: usize| format!("k{i:03}");
        let x: BTreeMap<String, f64> = xs.iter().enumerate().map(|(i, &v)| (key(i), v)).collect();
        let y: BTreeMap<String, f64> = ys.iter().enumerate().map(|(i, &v)| (key(i), v)).collect();
        let fit = linear_fit(&x, &y, &BTreeMap::new()).unwrap();

        // normal equations [n sx; sx sxx] [a; b] = [sy; sxy] by Cramer's rule
        let nf = n as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(u, v)| u * v).sum();
        let det = nf * sxx - sx * sx;
        let slope = (nf * sxy - sx * sy) / det;
        let intercept = (sy * sxx - sx * sxy) / det;
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(u, v)| (v - intercept - slope * u).powi(2))
            .sum();
        let ybar = sy / nf;
        let sst: f64 = ys.iter().map(|v| (v - ybar).powi(2)).sum();
        for (got, want) in [
            (fit.slope, slope),
            (fit.intercept, intercept),
            (fit.mse, ssr / (nf - 2.0)),
            (fit.r_squared, 1.0 - ssr / sst),
        ] {
            worst = worst.max((got - want).abs());
        }
    }

    let three = |v: [f64; 3]| -> BTreeMap<String, f64> {
        ["a", "b", "c"]
            .iter()
            .map(|k| k.to_string())
            .zip(v)
            .collect()
    };
    let fixture = linear_fit(
        &three([0.0, 0.0, 1.0]),
        &three([1.0, -1.0, 0.0]),
        &BTreeMap::new(),
    )
    .unwrap();
    let residuals: Vec<f64> = fixture.residuals.values().map(|r| r.residual).collect();
    let mse_ok = fixture.mse == 2.0 && residuals == [1.0, -1.0, 0.0];

    // reference values from scipy.stats.t.sf, two-sided
    let spots = [
        (0.5, 3.0, 0.651447964848151),
        (1.96, 10.0, 0.07843624024769974),
        (2.5, 28.0, 0.01855092306954575),
        (-3.2, 80.0, 0.001971092242343044),
        (6.0, 44.0, 3.3746852351866756e-07),
    ];
    let worst_p = spots
        .iter()
        .map(|&(t, df, p)| (t_two_sided_p(t, df) - p).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-10 && mse_ok && worst_p <= 1e-6,
        format!("max deviation from normal equations {worst:.1e}, three-point MSE {}, max p-value error {worst_p:.1e}", fixture.mse),
    )
}

/// The reference synthetic instance and its ranking inputs.
struct Reference {
    data: SynthData,
    m: BiadjacencyMatrix,
}

fn reference_instance(seed: u64) -> Reference {
    let data = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let v = aggregate_training(&data.records, &reference_window()).unwrap();
    let (m, _) = prune_matrix(&binarize(&rca_values(&v).unwrap(), 1.0).unwrap()).unwrap();
    Reference { data, m }
}

fn c7_recovery(reference: &Reference) -> Outcome {
    let Reference { data, m } = reference;
    let w = reference_window();
    let r = run(m, &PopRankConfig::default()).unwrap();
    let rho = spearman(&data.quality, &r.impact_rank).unwrap();
    let targets = future_targets(&data.records, m.pages(), &data.meta, &w).unwrap();
    let cats = categories(&data.meta);
    let report = predict_report(&r, &popularity(m), &targets, &cats, RegressOn::Rank).unwrap();
    let r2 = report.impact[&TargetKind::ActivityOf]
        .fit()
        .unwrap()
        .r_squared;

    let y: BTreeMap<String, f64> = targets
        .iter()
        .map(|(k, t)| (k.clone(), t.activity_of))
        .collect();
    let ids: Vec<&String> = r.impact_rank.keys().collect();
    let mut ranks: Vec<f64> = r.impact_rank.values().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut shuffled_r2 = 0.0;
    for _ in 0..100 {
        ranks.shuffle(&mut rng);
        let x: BTreeMap<String, f64> = ids
            .iter()
            .map(|k| (*k).clone())
            .zip(ranks.iter().copied())
            .collect();
        shuffled_r2 += linear_fit(&x, &y, &cats).unwrap().r_squared;
    }
    shuffled_r2 /= 100.0;
    check(
        rho > 0.9 && r2 > shuffled_r2,
        format!(
            "{}x{} matrix, Spearman {rho:.4}, R2 {r2:.4} vs shuffled mean {shuffled_r2:.4}",
            m.n_users(),
            m.n_pages()
        ),
    )
}

fn mse_shape(reference: &Reference) -> (bool, String) {
    let Reference { data, m } = reference;
    let targets =
        future_targets(&data.records, m.pages(), &data.meta, &reference_window()).unwrap();
    let alphas = alpha_grid(-2.0, 1.0, 0.25).unwrap();
    let sweep = sweep_alpha(m, &alphas, &PopRankConfig::default());
    let curve = mse_curve(
        &sweep,
        &targets,
        &popularity(m),
        &categories(&data.meta),
        TargetKind::ActivityOf,
        RegressOn::Rank,
    )
    .unwrap();
    let at = |a: f64| {
        curve
            .rows
            .iter()
            .find(|r| r.alpha == a)
            .map(|r| r.mse_impact)
    };
    let best = curve.best().map(|r| r.alpha);
    let (half, one) = (at(-0.5), at(1.0));
    let flat = curve
        .rows
        .windows(2)
        .all(|w| w[0].mse_popularity == w[1].mse_popularity);
    let ok = curve.excluded.is_empty()
        && best.is_some_and(|a| a <= 0.0)
        && matches!((half, one), (Some(h), Some(o)) if h < o)
        && flat;
    let detail = format!(
        "{} alphas, best alpha {:?}, MSE(-0.5) {:.5}, MSE(1) {:.5}, popularity flat: {flat}",
        curve.rows.len(),
        best,
        half.unwrap_or(f64::NAN),
        one.unwrap_or(f64::NAN)
    );
    (ok, detail)
}

fn c8_mse_shape(reference: &Reference) -> Outcome {
    let (ok, detail) = mse_shape(reference);
    for seed in 1..=3 {
        let (other, d) = mse_shape(&reference_instance(seed));
        println!(
            "    (informational) seed {seed}: shape {}; {d}",
            if other { "holds" } else { "differs" }
        );
    }
    check(ok, format!("reference seed: {detail}"))
}

fn c9_polarization(reference: &Reference) -> Outcome {
    let w = reference_window();
    let thresholds = poprank::evaluate::default_thresholds();
    let mut non_cumulative = 0;
    let mut datasets = 0;
    for seed in [SynthConfig::default().seed, 1, 2, 3] {
        let cfg = SynthConfig {
            seed,
            n_users: 120,
            n_pages: 12,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let groups = polarization_groups(&data.records, w.train(), &thresholds).unwrap();
        for pair in groups.groups.windows(2) {
            let (lo, hi) = (&pair[0], &pair[1]);
            for (page, users) in &hi.members {
                if !lo.members.get(page).is_some_and(|l| users.is_subset(l)) {
                    non_cumulative += 1;
                }
            }
        }
        datasets += 1;
    }

    let Reference { data, m } = reference;
    let r = run(m, &PopRankConfig::default()).unwrap();
    let groups = polarization_groups(&data.records, w.train(), &thresholds).unwrap();
    let report = polarization_report(
        &groups,
        &r,
        &popularity(m),
        &data.records,
        w.test(),
        &categories(&data.meta),
        RegressOn::Rank,
        Execution::Parallel,
    );
    let emitted = report.rows.len();
    let early_skips: Vec<f64> = report
        .skipped_thresholds()
        .into_iter()
        .filter(|&t| t < 0.9)
        .collect();
    let r2: Vec<String> = report
        .rows
        .iter()
        .map(|row| {
            row.impact
                .fit()
                .map_or("skip".into(), |f| format!("{:.2}", f.r_squared))
        })
        .collect();
    check(
        non_cumulative == 0 && emitted == 10 && early_skips.is_empty(),
        format!(
            "{datasets} datasets, {non_cumulative} cumulativity violations; R2 by threshold [{}]; skipped below 0.9: {early_skips:?}",
            r2.join(" ")
        ),
    )
}

fn poprank_cli(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_poprank"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let steps: [&[&str]; 6] = [
        &["synth", "--out", "synth"],
        &[
            "ingest",
            "--interactions",
            "synth/interactions.csv",
            "--pages",
            "synth/pages.csv",
            "--train",
            "1:16",
            "--test",
            "17:22",
            "--out",
            "data",
        ],
        &["rank", "--data", "data", "--alpha", "-0.5", "--out", "rank"],
        &[
            "sweep",
            "--data",
            "data",
            "--alphas",
            "-2:1:0.25",
            "--out",
            "sweep",
        ],
        &["predict", "--data", "data", "--out", "predict"],
        &["polarize", "--data", "data", "--out", "polarize"],
    ];
    let mut trees = Vec::new();
    for _ in 0..2 {
        for step in steps {
            if !poprank_cli(step, dir) {
                return check(false, format!("`poprank {}` failed", step.join(" ")));
            }
        }
        trees.push(snapshot(dir));
    }
    let differing: Vec<&String> = trees[0]
        .iter()
        .filter(|(k, v)| trees[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        differing.is_empty() && trees[0].len() == trees[1].len(),
        format!("{} files, differing: {differing:?}", trees[0].len()),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let seed = SynthConfig::default().seed;
    let passed = [
        criterion(1, "RCA oracle equivalence", Some(secs(1)), c1_rca),
        criterion(2, "fixed-point invariants", Some(secs(1)), c2_fixed_point),
        criterion(3, "oracle equivalence", Some(secs(10)), c3_oracle),
        criterion(
            4,
            "initial-condition independence",
            Some(secs(30)),
            c4_initial_conditions,
        ),
        criterion(5, "convergence horizon", None, c5_horizon),
        criterion(6, "regression correctness", None, c6_regression),
        criterion(7, "planted-structure recovery", Some(secs(60)), || {
            c7_recovery(&reference_instance(seed))
        }),
        criterion(8, "MSE-vs-exponent shape", None, || {
            c8_mse_shape(&reference_instance(seed))
        }),
        criterion(9, "polarization pipeline", None, || {
            c9_polarization(&reference_instance(seed))
        }),
        criterion(10, "CLI determinism", None, c10_determinism),
    ];
    let failed = passed.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        passed.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
