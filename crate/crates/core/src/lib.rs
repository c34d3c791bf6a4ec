//! Extending weak labeling functions to nearby points in an embedding space,
//! fitting a triplet-based label model on the extended votes, and estimating
//! the smoothness quantities that decide how far to extend.

pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod extension;
pub mod io;
pub mod label_model;
mod scan;
pub mod votes;

pub use embedding::{cosine_distance, euclidean_distance, DistanceMetric, EmbeddingSet};
pub use error::{Error, ErrorKind, Result};
pub use extension::{
    coverage, extend_votes, extend_with_report, min_overlap, neighbors_in_support, pairwise_overlap,
    ExtensionReport, ExtensionTable, NeighborSet, RadiusConfig, Weighting,
};
pub use label_model::{
    estimate_accuracies, majority_vote, posterior, predict, select_triplets, FitOptions, LabelModelParams,
    TripletAssignment,
};
pub use votes::{DevSet, LabelVector, VoteMatrix};
