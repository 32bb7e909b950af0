use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use poprank::engine::{self, popularity, run, sweep_alpha, PopRankConfig, RankResult};
use poprank::evaluate::{
    mse_curve, polarization_groups, polarization_report, predict_report, FitOutcome,
    PolarizationReport, TargetKind,
};
use poprank::ingest::{
    aggregate_training, categories, future_targets, load_interactions, load_pages, subsample_users,
    write_interactions, write_pages, WindowConfig,
};
use poprank::model::{prune_matrix, BiadjacencyMatrix, PruneLog};
use poprank::par::Execution;
use poprank::rca::{binarize, rca_values};
use poprank::synth::{generate, SynthConfig};
use serde::Serialize;
use serde_json::json;

use crate::io::{self, InputFile, RunManifest, Targets};
use crate::{
    Command, EngineArgs, IngestArgs, MatrixMode, PolarizeArgs, PredictArgs, RankArgs, SweepArgs,
    SynthArgs,
};

/// A ranking stopped at the iteration cap. Outputs are still written.
#[derive(Debug, thiserror::Error)]
#[error("no convergence at alpha = {alpha} after {iterations} iterations (last T = {last_t})")]
pub struct NotConverged {
    alpha: f64,
    iterations: u64,
    last_t: String,
}

impl NotConverged {
    fn check(r: &RankResult) -> Result<()> {
        if r.converged {
            return Ok(());
        }
        Err(NotConverged {
            alpha: r.alpha,
            iterations: r.iterations,
            last_t: r.final_t.map_or("none".into(), |t| t.to_string()),
        }
        .into())
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Rank(a) => rank(a),
        Command::Sweep(a) => sweep(a),
        Command::Predict(a) => predict(a),
        Command::Polarize(a) => polarize(a),
        Command::Synth(a) => synth(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let window = WindowConfig::new(a.train.clone(), a.test.clone(), a.min_comments)?;
    let mut records = load_interactions(&a.interactions)?;
    let meta = load_pages(&a.pages)?;
    if let Some(n) = a.subsample {
        records = subsample_users(&records, n, a.seed);
    }
    let v = aggregate_training(&records, &window)?;
    let targets = future_targets(&records, v.pages(), &meta, &window)?;

    io::create_dir(&a.out)?;
    io::write_json(&a.out.join(io::MATRIX_FILE), &v)?;
    io::write_targets(&a.out.join(io::TARGETS_FILE), &targets, &categories(&meta))?;
    let mut manifest = RunManifest::new("ingest", &a.out);
    manifest.inputs = vec![
        InputFile::hash(&a.interactions)?,
        InputFile::hash(&a.pages)?,
    ];
    manifest.window = Some(window);
    manifest.parameters = json!({
        "subsample": a.subsample,
        "seed": a.subsample.map(|_| a.seed),
        "users": v.n_users(),
        "pages": v.n_pages(),
        "nonzeros": v.weights().nnz(),
    });
    manifest.write()?;
    eprintln!(
        "training matrix: {} users x {} pages",
        v.n_users(),
        v.n_pages()
    );
    Ok(())
}

/// Matrix and targets produced by `ingest`.
struct Dataset {
    raw: BiadjacencyMatrix,
    targets: Targets,
    ingest: RunManifest,
    inputs: Vec<InputFile>,
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let matrix_path = dir.join(io::MATRIX_FILE);
    let targets_path = dir.join(io::TARGETS_FILE);
    let raw: BiadjacencyMatrix = io::read_json(&matrix_path)?;
    let targets = io::read_targets(&targets_path)?;
    let ingest: RunManifest = io::read_json(&dir.join(io::INGEST_MANIFEST))?;
    let inputs = vec![
        InputFile::hash(&matrix_path)?,
        InputFile::hash(&targets_path)?,
    ];
    Ok(Dataset {
        raw,
        targets,
        ingest,
        inputs,
    })
}

/// The matrix the ranking runs on: binarized RCA or raw counts, pruned.
fn ranking_matrix(
    raw: &BiadjacencyMatrix,
    e: &EngineArgs,
) -> Result<(BiadjacencyMatrix, PruneLog)> {
    let m = match e.input_matrix {
        MatrixMode::Rca => binarize(&rca_values(raw)?, e.rca_threshold)?,
        MatrixMode::Raw => raw.clone(),
    };
    Ok(prune_matrix(&m)?)
}

fn engine_config(e: &EngineArgs, alpha: f64) -> PopRankConfig {
    PopRankConfig {
        alpha,
        max_iterations: e.max_iterations,
        update_order: e.update_order.into(),
        ..PopRankConfig::default()
    }
}

fn engine_manifest(
    command: &str,
    out: &Path,
    data: &Dataset,
    e: &EngineArgs,
    cfg: &PopRankConfig,
) -> RunManifest {
    let mut m = RunManifest::new(command, out).matrix_mode(e.input_matrix);
    m.inputs = data.inputs.clone();
    m.window = data.ingest.window.clone();
    m.poprank = Some(cfg.clone());
    m
}

fn prune_summary(m: &BiadjacencyMatrix, log: &PruneLog) -> serde_json::Value {
    json!({
        "users": m.n_users(),
        "pages": m.n_pages(),
        "nonzeros": m.weights().nnz(),
        "pruned_users": log.removed_users,
        "pruned_pages": log.removed_pages,
    })
}

fn write_scores(
    path: &Path,
    id_col: &str,
    score_col: &str,
    scores: &std::collections::BTreeMap<String, f64>,
    ranks: &std::collections::BTreeMap<String, f64>,
) -> Result<()> {
    let mut rows: Vec<(&String, f64, f64)> =
        scores.iter().map(|(k, &v)| (k, v, ranks[k])).collect();
    rows.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut w = io::csv_writer(path)?;
    w.write_record([id_col, score_col, &format!("{score_col}_rank")])?;
    for (id, v, r) in rows {
        w.write_record([id.as_str(), &io::num(v), &io::num(r)])?;
    }
    w.flush()?;
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let data = load_dataset(&a.engine.data)?;
    let (m, log) = ranking_matrix(&data.raw, &a.engine)?;
    let cfg = engine_config(&a.engine, a.alpha);
    let result = run(&m, &cfg)?;

    io::create_dir(&a.out)?;
    io::write_json(&a.out.join("rank.json"), &result)?;
    write_scores(
        &a.out.join("impact.csv"),
        "page_id",
        "impact",
        &result.impact,
        &result.impact_rank,
    )?;
    write_scores(
        &a.out.join("engagement.csv"),
        "user_id",
        "engagement",
        &result.engagement,
        &result.engagement_rank,
    )?;
    let mut manifest = engine_manifest("rank", &a.out, &data, &a.engine, &cfg);
    manifest.parameters = json!({ "matrix": prune_summary(&m, &log) });
    manifest.write()?;
    eprintln!(
        "alpha {}: {} iterations, converged: {}, underflow: {}",
        result.alpha, result.iterations, result.converged, result.underflow
    );
    NotConverged::check(&result)
}

#[derive(Serialize)]
struct RunSummary {
    alpha: f64,
    iterations: Option<u64>,
    converged: bool,
    #[serde(with = "engine::horizon")]
    final_t: Option<f64>,
    underflow: bool,
    error: Option<String>,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let data = load_dataset(&a.engine.data)?;
    let (m, log) = ranking_matrix(&data.raw, &a.engine)?;
    let cfg = engine_config(&a.engine, a.alphas.0[0]);
    let kind: TargetKind = a.target.into();
    let (targets, cats) = &data.targets;
    let pop = popularity(&m);
    let sweep = sweep_alpha(&m, &a.alphas.0, &cfg);
    let curve = mse_curve(&sweep, targets, &pop, cats, kind, a.regress_on.into())?;

    io::create_dir(&a.out)?;
    let mut w = io::csv_writer(&a.out.join("mse_curve.csv"))?;
    w.write_record(["alpha", "mse_impact", "mse_popularity"])?;
    for row in &curve.rows {
        w.write_record([
            io::num(row.alpha),
            io::num(row.mse_impact),
            io::num(row.mse_popularity),
        ])?;
    }
    w.flush()?;
    let runs: Vec<RunSummary> = sweep
        .entries
        .iter()
        .map(|e| RunSummary {
            alpha: e.alpha,
            iterations: e.result.as_ref().map(|r| r.iterations),
            converged: e.result.as_ref().is_some_and(|r| r.converged),
            final_t: e.result.as_ref().and_then(|r| r.final_t),
            underflow: e.result.as_ref().is_some_and(|r| r.underflow),
            error: e.error.clone(),
        })
        .collect();
    io::write_json(
        &a.out.join("sweep.json"),
        &json!({ "curve": curve, "best_alpha": curve.best().map(|r| r.alpha), "runs": runs }),
    )?;
    let mut manifest = engine_manifest("sweep", &a.out, &data, &a.engine, &cfg);
    manifest.regress_on = Some(a.regress_on.into());
    manifest.parameters = json!({
        "alphas": a.alphas.0,
        "target": kind,
        "matrix": prune_summary(&m, &log),
    });
    manifest.write()?;

    for ex in &curve.excluded {
        eprintln!("alpha {} excluded: {}", ex.alpha, ex.reason);
    }
    if curve.rows.is_empty() {
        bail!("no exponent produced a usable ranking");
    }
    if let Some(r) = sweep
        .entries
        .iter()
        .filter_map(|e| e.result.as_ref())
        .find(|r| !r.converged)
    {
        return NotConverged::check(r);
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let data = load_dataset(&a.engine.data)?;
    let (m, log) = ranking_matrix(&data.raw, &a.engine)?;
    let cfg = engine_config(&a.engine, a.alpha);
    let result = run(&m, &cfg)?;
    let pop = popularity(&m);
    let (targets, cats) = &data.targets;
    let kind: TargetKind = a.target.into();
    let report = predict_report(&result, &pop, targets, cats, a.regress_on.into())?;

    io::create_dir(&a.out)?;
    let fit = report.impact[&kind].fit();
    let mut pages: Vec<(&String, f64)> = result.impact_rank.iter().map(|(k, &r)| (k, r)).collect();
    pages.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut w = io::csv_writer(&a.out.join("scatter.csv"))?;
    w.write_record(["page_id", "impact_rank", "target", "category", "residual"])?;
    for (page, r) in pages {
        let target = targets
            .get(page)
            .with_context(|| format!("no target for page {page}"))?;
        let category = cats
            .get(page)
            .copied()
            .unwrap_or(poprank::model::Category::Unknown);
        let residual = fit
            .and_then(|f| f.residuals.get(page))
            .map_or(f64::NAN, |res| res.residual);
        w.write_record([
            page.as_str(),
            &io::num(r),
            &io::num(kind.value(target)),
            category.as_str(),
            &io::num(residual),
        ])?;
    }
    w.flush()?;
    io::write_json(&a.out.join("fit.json"), &report)?;
    let mut manifest = engine_manifest("predict", &a.out, &data, &a.engine, &cfg);
    manifest.regress_on = Some(a.regress_on.into());
    manifest.parameters = json!({ "target": kind, "matrix": prune_summary(&m, &log) });
    manifest.write()?;

    match (fit, report.popularity[&kind].fit()) {
        (Some(f), Some(p)) => eprintln!(
            "{}: impact R2 {:.4} (p = {:.3e}), popularity R2 {:.4}",
            kind.as_str(),
            f.r_squared,
            f.p_value,
            p.r_squared
        ),
        (Some(f), None) => eprintln!(
            "{}: impact R2 {:.4} (p = {:.3e})",
            kind.as_str(),
            f.r_squared,
            f.p_value
        ),
        (None, _) => eprintln!("{}: fit skipped", kind.as_str()),
    }
    NotConverged::check(&result)
}

fn polarize(a: PolarizeArgs) -> Result<()> {
    let data = load_dataset(&a.engine.data)?;
    let window = data
        .ingest
        .window
        .clone()
        .context("ingest manifest has no window")?;
    let recorded = data
        .ingest
        .inputs
        .first()
        .context("ingest manifest lists no inputs")?;
    let source = match &a.interactions {
        Some(p) => InputFile::hash(p)?,
        None => {
            let current = InputFile::hash(&recorded.path)?;
            if current.sha256 != recorded.sha256 {
                bail!("{} changed since it was ingested", recorded.path.display());
            }
            current
        }
    };
    let mut records = load_interactions(&source.path)?;
    if let Some(n) = data.ingest.parameters["subsample"].as_u64() {
        let seed = data.ingest.parameters["seed"].as_u64().unwrap_or(0);
        records = subsample_users(&records, n as usize, seed);
    }

    let (m, log) = ranking_matrix(&data.raw, &a.engine)?;
    let cfg = engine_config(&a.engine, a.alpha);
    let result = run(&m, &cfg)?;
    let pop = popularity(&m);
    let groups = polarization_groups(&records, window.train(), &a.thresholds)?;
    let (_, cats) = &data.targets;
    let report = polarization_report(
        &groups,
        &result,
        &pop,
        &records,
        window.test(),
        cats,
        a.regress_on.into(),
        Execution::Parallel,
    );

    io::create_dir(&a.out)?;
    write_polarization_csv(&a.out.join("polarization.csv"), &report)?;
    let sizes: Vec<_> = groups
        .groups
        .iter()
        .map(|g| {
            json!({
                "threshold": g.threshold,
                "pages": g.members.len(),
                "memberships": g.members.values().map(|s| s.len()).sum::<usize>(),
            })
        })
        .collect();
    io::write_json(
        &a.out.join("polarization.json"),
        &json!({ "groups": sizes, "report": report }),
    )?;
    let mut manifest = engine_manifest("polarize", &a.out, &data, &a.engine, &cfg);
    manifest.inputs.push(source);
    manifest.regress_on = Some(a.regress_on.into());
    manifest.parameters = json!({ "thresholds": a.thresholds, "matrix": prune_summary(&m, &log) });
    manifest.write()?;

    let skipped = report.skipped_thresholds();
    if !skipped.is_empty() {
        eprintln!("skipped thresholds: {skipped:?}");
    }
    NotConverged::check(&result)
}

fn write_polarization_csv(path: &Path, report: &PolarizationReport) -> Result<()> {
    let mse = |o: &FitOutcome| o.fit().map_or(f64::NAN, |f| f.mse);
    let mut w = io::csv_writer(path)?;
    w.write_record(["threshold", "r_squared", "mse_impact", "mse_popularity"])?;
    for row in &report.rows {
        let r2 = row.impact.fit().map_or(f64::NAN, |f| f.r_squared);
        w.write_record([
            io::num(row.threshold),
            io::num(r2),
            io::num(mse(&row.impact)),
            io::num(mse(&row.popularity)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.users {
        cfg.n_users = n;
    }
    if let Some(n) = a.pages {
        cfg.n_pages = n;
    }
    if let Some(n) = a.months {
        cfg.n_months = n;
    }
    if let Some(r) = a.reinforcement {
        cfg.reinforcement = r;
    }
    let data = generate(&cfg)?;

    io::create_dir(&a.out)?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = a.out.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("writing {}", path.display()))?,
        ))
    };
    write_interactions(create("interactions.csv")?, &data.records)?;
    write_pages(create("pages.csv")?, &data.meta)?;
    let mut w = io::csv_writer(&a.out.join("truth.csv"))?;
    w.write_record(["page_id", "quality"])?;
    for (page, q) in &data.quality {
        w.write_record([page.as_str(), &io::num(*q)])?;
    }
    w.flush()?;
    let mut manifest = RunManifest::new("synth", &a.out);
    manifest.parameters = serde_json::to_value(&cfg)?;
    manifest.write()?;
    eprintln!(
        "{} interaction records, months {}..={}",
        data.records.len(),
        cfg.first_month,
        cfg.last_month()
    );
    Ok(())
}
