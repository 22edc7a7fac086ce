//! Read-side analytics over a hypergraph: edge summaries, subclusters,
//! meta-edges, rankings, intersections, embedding queries and review
//! markers. Nothing here mutates the hypergraph except
//! [`consolidate_meta_edge`], which goes through the edit log.

mod meta;
mod query;
mod review;
mod subcluster;
mod summary;
mod table;

pub use meta::{consolidate_meta_edge, meta_edge_grouping};
pub use query::{query, QueryHit, QueryInput, QueryMode, QueryPage, QueryResult};
pub use review::{recency_bucket, review_markers, review_status, Recency, ReviewMarker, DAY_MS, FRESH_MS, HOUR_MS};
pub use subcluster::{subcluster_tree, Dendrogram, Merge, EXACT_SUBCLUSTER_CAP};
pub use summary::{six_image_summary, EdgeSummary, CONTRAST_SAMPLE_CAP};
pub use table::{
    edge_dispersions, edge_table, intersecting_edges_for_images, overlap_matrix, rank_edges_by_similarity, EdgeOverlap,
    EdgeRank, EdgeRow, OverlapMatrix,
};
