//! Hypergraph construction from embeddings, soft memberships and metadata.

mod fuzzy;
mod kmeans;
mod membership;
mod metadata;
mod threshold;

pub use fuzzy::{fcm_fit, fcm_fit_with, pcm_fit, pcm_fit_with, FcmParams};
pub use kmeans::{
    kmeans, kmeans_with, multi_granularity_kmeans, multi_granularity_kmeans_with, KMeansFit, DEFAULT_K_LIST,
    KMEANS_MAX_ITER, KMEANS_TOL,
};
pub use membership::{import_membership, MembershipSummary, SoftMembership, MEMBERSHIP_MAGIC};
pub use metadata::{metadata_edges, DEFAULT_BINS};
pub use threshold::{threshold_membership, ThresholdPolicy};
