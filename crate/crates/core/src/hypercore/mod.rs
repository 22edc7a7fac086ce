//! Hypergraph data model over an image collection and the similarity
//! primitives shared by every other module.

mod collection;
mod model;
mod similarity;

pub use collection::{EmbeddingMatrix, ImageEntry, ImageManifest, MetaValue, EMBEDDING_MAGIC};
pub(crate) use collection::{read_body, read_header, write_matrix};
pub use model::{
    harmonic_overlap, intersection_size, EdgeId, EdgeOrigin, EdgeStatus, Hyperedge, Hypergraph,
};
pub(crate) use model::normalize_members;
pub use similarity::{
    cosine, dot, edge_centroid, edge_dispersion, mean_of_rows, norm, sim_edges, sim_images,
};
pub(crate) use similarity::cosine_f32;
