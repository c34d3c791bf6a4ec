//! Synthetic tasks, radius sweeps and radius tuning.

pub mod metrics;
pub mod sweep;
pub mod synthetic;
pub mod tuning;

pub use metrics::{evaluate, MetricKind, Metrics};
pub use sweep::{fit_and_score, sweep_radius, SweepOptions, SweepPoint, SweepResult};
pub use synthetic::{generate, generate_checkerboard, LabelLayout, SyntheticConfig, SyntheticTask};
pub use tuning::{
    default_local_grid, refine_radii, theory_guided_radius, tune_shared_radius, RefineOutcome, TheoryGuided,
    TheoryOptions, TuneOptions, TuneOutcome,
};
