//! Metrics for reasoning-trace quality and trace/output fidelity of
//! multimodal scene-understanding runs.
//!
//! Scores and aggregates are generic over the scalar type (`f32` or `f64`).
//! The aliases below fix the scalar to `f64`.

pub mod alignment;
pub mod contentfulness;
pub mod entities;
pub mod extraction;
pub mod fuzzy;
pub mod ingest;
pub mod judge;
pub mod model;
pub mod num;
pub mod pipeline;
pub mod reporting;
pub mod similarity;
pub mod stats;
pub mod tagger;
pub mod text;

pub use num::Scalar;

pub type ContentfulnessResult = contentfulness::ContentfulnessResult<f64>;
pub type CascadeConfig = alignment::CascadeConfig<f64>;
pub type AlignmentResult = alignment::AlignmentResult<f64>;
pub type EntityShift = entities::EntityShift<f64>;
pub type SimilarityScore = similarity::SimilarityScore<f64>;
pub type SimilarityMatrix = similarity::SimilarityMatrix<f64>;
pub type DeterminismReport = similarity::DeterminismReport<f64>;
pub type SceneMetrics = reporting::SceneMetrics<f64>;
pub type VariantReport = reporting::VariantReport<f64>;
pub type TokenBreakdown = reporting::TokenBreakdown<f64>;
pub type ScalingRow = reporting::ScalingRow<f64>;
pub type Evaluator<'a> = pipeline::Evaluator<'a, f64>;
