//! Synthetic motif classification: data generation, the CNN, and scoring of
//! attributions against the planted motif positions.

mod data;
mod model;
mod score;

pub use data::{
    decode_one_hot, generate_dataset, generate_split, one_hot_constraint_groups, one_hot_encode, Dataset,
    DatasetSpec, Motif, MotifSpan, SequenceExample, Split, ALPHABET,
};
pub use model::{build_genomics_cnn, to_samples, CnnSpec, INPUT_NODE};
pub use score::{
    compare_methods, evaluate_example, motif_recovery_score, position_scores, span_coverage, summarize,
    Comparison, ComparisonRow, ExampleScores,
};
