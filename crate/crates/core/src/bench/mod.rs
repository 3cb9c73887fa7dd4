//! Benchmark evaluation: prediction and ground-truth files, occupancy
//! matching, metrics, and the published reference tables.

pub mod io;
pub mod matching;
pub mod metrics;
pub mod report;
pub mod tables;

pub use io::{GroundTruth, Prediction, PredictionSet, TruthParticle};
pub use matching::{match_by_radius, match_predictions, Assignment, MatchReport, Outcome};
pub use metrics::{
    check_published_row, confusion_matrix, cumulative_f1, group_f1, order_by_weight, per_class, ClassScore, ConfusionMatrix,
    GroupScore, Metrics,
};
pub use report::{class_table, evaluate, localization_table, EvalConfig, Evaluation};
