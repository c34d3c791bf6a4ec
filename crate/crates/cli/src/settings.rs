use std::path::{Path, PathBuf};

use clap::Args;
use lfext_core::experiments::MetricKind;
use lfext_core::{DistanceMetric, Weighting};
use serde::Deserialize;

/// Every input a command may read. Values come from flags, then from the
/// `--config` JSON file (same names, snake_case); flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// JSON file with any of these settings; explicit flags override it
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// embeddings (.emb)
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// vote matrix CSV with entries in {-1, 0, 1}
    #[arg(long, global = true)]
    pub votes: Option<PathBuf>,
    /// gold labels for the first rows of the vote matrix
    #[arg(long, global = true)]
    pub dev_labels: Option<PathBuf>,
    /// gold labels used for evaluation
    #[arg(long, alias = "labels", global = true)]
    pub gold: Option<PathBuf>,
    /// label-model parameters JSON
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// hard predictions CSV to evaluate
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    /// already extended votes (diagnose)
    #[arg(long, global = true)]
    pub extended: Option<PathBuf>,
    /// hard predictions of a reference model, used when no dev labels exist
    #[arg(long, global = true)]
    pub model_predictions: Option<PathBuf>,
    /// risk of the reference model
    #[arg(long, global = true)]
    pub model_risk: Option<f64>,

    /// class balance Pr(Y = 1)
    #[arg(long, global = true)]
    pub prior: Option<f64>,
    /// per-source radii, comma separated (one value is used for every source)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, global = true)]
    pub radii: Option<Vec<f64>>,
    /// per-source similarity thresholds s, turned into radii 1 - s
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, global = true)]
    pub similarity_thresholds: Option<Vec<f64>>,
    /// read --radii values as similarity thresholds
    #[arg(long, global = true)]
    pub threshold_as_similarity: bool,
    /// radius config JSON as written by `tune`
    #[arg(long, global = true)]
    pub radius_config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub weighting: Option<Weighting>,
    #[arg(long, global = true)]
    pub distance: Option<DistanceMetric>,
    #[arg(long, global = true)]
    pub metric: Option<MetricKind>,
    /// invert the recovered sign of these sources
    #[arg(long, value_delimiter = ',', global = true)]
    pub flip_source: Option<Vec<usize>>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// failure probability of the estimation bound
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// candidate radii for tuning and diagnostics, comma separated
    #[arg(long, value_delimiter = ',', global = true)]
    pub grid: Option<Vec<f64>>,
    /// pair sample size for smoothness estimates
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// coordinate-descent passes after the shared radius search (0 skips)
    #[arg(long, global = true)]
    pub passes: Option<usize>,
    /// worker thread cap; outputs do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    // synth
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// checkerboard cells per side
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// spatially random labels instead of a checkerboard
    #[arg(long, global = true)]
    pub random_labels: bool,
    #[arg(long, value_delimiter = ',', global = true)]
    pub accuracies: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub coverages: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub dev_size: Option<usize>,
}

macro_rules! prefer {
    ($flags:ident, $file:ident; $($f:ident),*) => {
        Settings {
            config: $flags.config,
            threshold_as_similarity: $flags.threshold_as_similarity || $file.threshold_as_similarity,
            random_labels: $flags.random_labels || $file.random_labels,
            $($f: $flags.$f.or($file.$f),)*
        }
    };
}

impl Settings {
    pub fn merged(self, file: Settings) -> Settings {
        let flags = self;
        prefer!(flags, file; embeddings, votes, dev_labels, gold, params, predictions, extended,
            model_predictions, model_risk, prior, radii, similarity_thresholds, radius_config, weighting,
            distance, metric, flip_source, seed, delta, grid, budget, passes, threads, out, n, k,
            accuracies, coverages, dev_size)
    }
}

pub fn require<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, String> {
    v.as_deref().ok_or_else(|| format!("missing --{flag}"))
}
