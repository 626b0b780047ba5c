//! Controller-side analysis: flow features, KNN classification and
//! compilation of decision trees into match-action rule programs.

mod features;
mod knn;
mod prefix;
mod tree;

pub use features::{compose_features, FeatureVector, FEATURE_NAMES, N_FEATURES};
pub use knn::{knn_classify, knn_train, LabeledDataset, Normalizer};
pub use prefix::expand_range_to_prefixes;
pub use tree::{
    forest_classify, table_classify, tree_compile, CompiledTableProgram, DecisionTree, LpmRule, Node, Rule,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("tree compile error: {0}")]
    Compile(String),
    /// A compiled program failed to match: its rules do not cover the
    /// input space. Never masked by a default label.
    #[error("no rule matched {0:?}")]
    NoMatch(Vec<u32>),
    #[error("tree json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
