//! Similarity of a generated hypergraph to a ground truth.

mod ces;
mod hnmi;
mod pairwise;

pub use ces::{ces, ces_weighted, CesReport, CoverIndex, CoverTrace, EdgeCoverScore};
pub use hnmi::hnmi;
pub use pairwise::{pairwise_similarity_matrix, PairMeasure};
