use std::path::PathBuf;
use std::time::Instant;

use lfext_core::diagnostics::{self, default_grid, DiagnoseInputs, DiagnoseOptions, ModelSmoothness, DEFAULT_PAIR_BUDGET};
use lfext_core::experiments::synthetic::{generate, LabelLayout, SyntheticConfig};
use lfext_core::experiments::{
    default_local_grid, evaluate, refine_radii, tune_shared_radius, MetricKind, Metrics, RefineOutcome, TuneOptions,
    TuneOutcome,
};
use lfext_core::io;
use lfext_core::{
    estimate_accuracies, extend_with_report, posterior, predict as hard_labels, DevSet, EmbeddingSet, FitOptions,
    LabelModelParams, LabelVector, RadiusConfig, VoteMatrix,
};
use serde::Serialize;

use crate::settings::{require, Settings};
use crate::Failure;

type Res<T> = Result<T, Failure>;

fn embeddings(s: &Settings) -> Res<EmbeddingSet> {
    let emb = io::load_embeddings(require(&s.embeddings, "embeddings")?)?;
    Ok(emb.with_metric(s.distance.unwrap_or_default()))
}

fn votes(s: &Settings) -> Res<VoteMatrix> {
    Ok(io::load_votes(require(&s.votes, "votes")?)?)
}

fn dev_set(s: &Settings, n: usize) -> Res<Option<DevSet>> {
    let Some(path) = &s.dev_labels else { return Ok(None) };
    let labels = io::load_labels(path)?;
    if labels.len() > n {
        return Err(lfext_core::Error::InvalidInput(format!(
            "{} dev labels for {n} rows; dev labels cover a prefix of the rows",
            labels.len()
        ))
        .into());
    }
    Ok(Some(DevSet::prefix(&labels)))
}

fn prior(s: &Settings, dev: Option<&DevSet>) -> Res<f64> {
    match (s.prior, dev) {
        (Some(p), _) => Ok(p),
        (None, Some(d)) => Ok(d.positive_fraction()),
        (None, None) => Err(Failure::usage("class balance prior required (--prior or --dev-labels)")),
    }
}

fn fit_options(s: &Settings) -> FitOptions {
    FitOptions { flip: s.flip_source.clone().unwrap_or_default() }
}

fn widen(values: &[f64], m: usize, flag: &str) -> Res<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; m]),
        k if k == m => Ok(values.to_vec()),
        k => Err(Failure::usage(format!("--{flag} has {k} values for {m} sources"))),
    }
}

fn radius_config(s: &Settings, m: usize) -> Res<RadiusConfig> {
    let given = [s.radii.is_some(), s.similarity_thresholds.is_some(), s.radius_config.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Failure::usage("give exactly one of --radii, --similarity-thresholds, --radius-config"));
    }
    let weighting = s.weighting.unwrap_or_default();
    let config = if let Some(r) = &s.radii {
        let r = widen(r, m, "radii")?;
        if s.threshold_as_similarity {
            RadiusConfig::from_similarities(&r, weighting)
        } else {
            RadiusConfig::new(r, weighting)
        }
    } else if let Some(sim) = &s.similarity_thresholds {
        RadiusConfig::from_similarities(&widen(sim, m, "similarity-thresholds")?, weighting)
    } else {
        let mut c: RadiusConfig = io::load_json(require(&s.radius_config, "radius-config")?)?;
        if let Some(w) = s.weighting {
            c.weighting = w;
        }
        c
    };
    config.validate(m)?;
    Ok(config)
}

fn out_dir(s: &Settings) -> Res<PathBuf> {
    let dir = require(&s.out, "out")?.to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| lfext_core::Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn same_rows(emb: &EmbeddingSet, votes: &VoteMatrix) -> Res<()> {
    if emb.n() != votes.n() {
        return Err(lfext_core::Error::InvalidInput(format!(
            "embeddings have {} rows but votes have {}",
            emb.n(),
            votes.n()
        ))
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    rows: usize,
    metric: MetricKind,
    value: f64,
    metrics: Metrics,
}

fn score(pred: &[i8], gold: &[i8], kind: MetricKind) -> Res<EvalReport> {
    let metrics = evaluate(pred, gold)?;
    let pos = gold.iter().filter(|&&y| y == 1).count() as f64 / gold.len() as f64;
    let metric = kind.resolve(pos);
    Ok(EvalReport { rows: gold.len(), metric, value: metrics.get(metric), metrics })
}

pub fn extend(s: &Settings) -> Res<()> {
    let (emb, votes) = (embeddings(s)?, votes(s)?);
    same_rows(&emb, &votes)?;
    let config = radius_config(s, votes.m())?;
    let out = out_dir(s)?;
    let (ext, report) = extend_with_report(&emb, &votes, &config)?;
    io::save_votes(&out.join("extended_votes.csv"), &ext)?;
    io::save_json(&out.join("extension_report.json"), &report)?;
    Ok(())
}

pub fn fit(s: &Settings) -> Res<()> {
    let votes = votes(s)?;
    let dev = dev_set(s, votes.n())?;
    let p = prior(s, dev.as_ref())?;
    let out = out_dir(s)?;
    let params = estimate_accuracies(&votes, p, &fit_options(s))?;
    io::save_json(&out.join("params.json"), &params)?;
    Ok(())
}

pub fn predict(s: &Settings) -> Res<()> {
    let votes = votes(s)?;
    let params: LabelModelParams = io::load_json(require(&s.params, "params")?)?;
    let out = out_dir(s)?;
    let q = posterior(&params, &votes)?;
    io::save_posteriors(&out.join("posteriors.csv"), &q)?;
    io::save_labels(&out.join("predictions.csv"), &hard_labels(&q, params.prior))?;
    Ok(())
}

#[derive(Serialize)]
struct TuneReport {
    prior: f64,
    metric: MetricKind,
    grid: Vec<f64>,
    shared: TuneOutcome,
    refined: Option<RefineOutcome>,
}

pub fn tune(s: &Settings) -> Res<()> {
    let (emb, votes) = (embeddings(s)?, votes(s)?);
    same_rows(&emb, &votes)?;
    let Some(dev) = dev_set(s, votes.n())? else {
        return Err(Failure::usage("tune needs --dev-labels"));
    };
    let p = prior(s, Some(&dev))?;
    let out = out_dir(s)?;
    let grid = s.grid.clone().unwrap_or_else(default_grid);
    let kind = s.metric.unwrap_or_default();
    let opts = TuneOptions { weighting: s.weighting.unwrap_or_default(), prior: p, metric: kind, fit: fit_options(s) };
    let shared = tune_shared_radius(&emb, &votes, &dev, &grid, &opts)?;
    let passes = s.passes.unwrap_or(1);
    let refined = if passes > 0 && shared.radius > 0.0 {
        let local = vec![default_local_grid(shared.radius); votes.m()];
        Some(refine_radii(&emb, &votes, &dev, shared.radius, &local, passes, &opts)?)
    } else {
        None
    };
    let config = match &refined {
        Some(r) => r.config.clone(),
        None => {
            let radii = (0..votes.m()).map(|j| if votes.coverage(j) < 1.0 { shared.radius } else { 0.0 }).collect();
            RadiusConfig::new(radii, opts.weighting)
        }
    };
    io::save_json(&out.join("radius_config.json"), &config)?;
    let metric = kind.resolve(dev.positive_fraction());
    io::save_json(&out.join("tuning.json"), &TuneReport { prior: p, metric, grid, shared, refined })?;
    Ok(())
}

pub fn diagnose(s: &Settings) -> Res<()> {
    let (emb, votes) = (embeddings(s)?, votes(s)?);
    same_rows(&emb, &votes)?;
    let config = radius_config(s, votes.m())?;
    let dev = dev_set(s, votes.n())?;
    let model = match (&s.model_predictions, s.model_risk) {
        (Some(path), Some(risk)) => {
            Some(ModelSmoothness { predictions: io::load_labels(path)?.as_slice().to_vec(), risk })
        }
        (None, None) => None,
        _ => return Err(Failure::usage("--model-predictions and --model-risk go together")),
    };
    let p = prior(s, dev.as_ref())?;
    let extended = s.extended.as_deref().map(io::load_votes).transpose()?;
    let params: Option<LabelModelParams> = s.params.as_deref().map(io::load_json).transpose()?;
    let out = out_dir(s)?;
    let inputs = DiagnoseInputs {
        embeddings: &emb,
        votes: &votes,
        extended: extended.as_ref(),
        dev: dev.as_ref(),
        model: model.as_ref(),
        params: params.as_ref(),
        prior: p,
        config: &config,
    };
    let opts = DiagnoseOptions {
        grid: s.grid.clone().unwrap_or_else(default_grid),
        budget: s.budget.unwrap_or(DEFAULT_PAIR_BUDGET),
        seed: s.seed.unwrap_or(0),
        delta: s.delta.unwrap_or(0.05),
        fit: fit_options(s),
    };
    let report = diagnostics::diagnose(&inputs, &opts)?;
    io::save_json(&out.join("diagnostics.json"), &report)?;
    Ok(())
}

pub fn synth(s: &Settings) -> Res<()> {
    let n = s.n.unwrap_or(10_000);
    let layout = if s.random_labels { LabelLayout::Random } else { LabelLayout::Checkerboard { k: s.k.unwrap_or(10) } };
    let config = SyntheticConfig {
        n,
        layout,
        accuracies: s.accuracies.clone().unwrap_or_else(|| vec![0.89, 0.7, 0.7]),
        coverages: s.coverages.clone().unwrap_or_else(|| vec![0.1, 0.2, 0.2]),
        dev_size: s.dev_size.unwrap_or(n / 10),
        seed: s.seed.unwrap_or(0),
    };
    let out = out_dir(s)?;
    let task = generate(&config)?;
    io::save_embeddings(&out.join("embeddings.emb"), &task.embeddings)?;
    io::save_votes(&out.join("votes.csv"), &task.votes)?;
    io::save_labels(&out.join("labels.csv"), task.labels.as_slice())?;
    io::save_labels(&out.join("dev_labels.csv"), &task.labels.as_slice()[..config.dev_size])?;
    io::save_json(&out.join("task.json"), &config)?;
    Ok(())
}

pub fn eval(s: &Settings) -> Res<()> {
    let pred = io::load_labels(require(&s.predictions, "predictions")?)?;
    let gold = io::load_labels(require(&s.gold, "gold")?)?;
    let report = score(pred.as_slice(), gold.as_slice(), s.metric.unwrap_or_default())?;
    println!("{}", serde_json::to_string(&report).expect("metrics serialize"));
    if s.out.is_some() {
        io::save_json(&out_dir(s)?.join("metrics.json"), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    extend_seconds: f64,
    fit_seconds: f64,
    predict_seconds: f64,
    threads: usize,
}

pub fn pipeline(s: &Settings) -> Res<()> {
    let (emb, votes) = (embeddings(s)?, votes(s)?);
    same_rows(&emb, &votes)?;
    let dev = dev_set(s, votes.n())?;
    let p = prior(s, dev.as_ref())?;
    let config = radius_config(s, votes.m())?;
    let gold: Option<LabelVector> = s.gold.as_deref().map(io::load_labels).transpose()?;
    if let Some(g) = &gold {
        if g.len() != votes.n() {
            return Err(lfext_core::Error::InvalidInput(format!("{} gold labels for {} rows", g.len(), votes.n())).into());
        }
    }
    let out = out_dir(s)?;

    let t = Instant::now();
    let (ext, report) = extend_with_report(&emb, &votes, &config)?;
    let extend_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let params = estimate_accuracies(&ext, p, &fit_options(s))?;
    let fit_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let q = posterior(&params, &ext)?;
    let pred = hard_labels(&q, p);
    let predict_seconds = t.elapsed().as_secs_f64();

    io::save_votes(&out.join("extended_votes.csv"), &ext)?;
    io::save_json(&out.join("extension_report.json"), &report)?;
    io::save_json(&out.join("params.json"), &params)?;
    io::save_posteriors(&out.join("posteriors.csv"), &q)?;
    io::save_labels(&out.join("predictions.csv"), &pred)?;
    if let Some(g) = gold {
        // dev rows were used for the prior and stay out of the score
        let start = dev.as_ref().map_or(0, |d| d.len());
        if start >= votes.n() {
            return Err(Failure::usage("no rows left to evaluate after the dev prefix"));
        }
        let report = score(&pred[start..], &g.as_slice()[start..], s.metric.unwrap_or_default())?;
        io::save_json(&out.join("metrics.json"), &report)?;
    }
    let timing = Timing { extend_seconds, fit_seconds, predict_seconds, threads: rayon::current_num_threads() };
    io::save_json(&out.join("timing.json"), &timing)?;
    Ok(())
}
