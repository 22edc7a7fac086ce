//! Hypergraph construction shared by the CLI and background jobs.

use std::path::PathBuf;

use hyperlens_core::construct::{
    fcm_fit_with, import_membership, metadata_edges, multi_granularity_kmeans_with, pcm_fit_with,
    threshold_membership, FcmParams, SoftMembership, ThresholdPolicy, DEFAULT_BINS, DEFAULT_K_LIST,
};
use hyperlens_core::hypercore::{EmbeddingMatrix, Hypergraph, ImageManifest};
use hyperlens_core::progress::Progress;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fcm,
    Pcm,
    Mgk,
    ThresholdImport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructSpec {
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Soft-membership file for `threshold-import`.
    #[serde(default)]
    pub membership: Option<PathBuf>,
    #[serde(default = "default_min_edge_size")]
    pub min_edge_size: usize,
    /// Metadata fields to turn into extra edges.
    #[serde(default)]
    pub metadata_fields: Vec<String>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_f() -> f64 {
    2.0
}

fn default_t() -> f64 {
    0.5
}

fn default_k_list() -> Vec<usize> {
    DEFAULT_K_LIST.to_vec()
}

fn default_min_edge_size() -> usize {
    1
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl ConstructSpec {
    pub fn new(method: Method) -> Self {
        ConstructSpec {
            method,
            k: None,
            f: default_f(),
            t: default_t(),
            k_list: default_k_list(),
            seed: 0,
            membership: None,
            min_edge_size: 1,
            metadata_fields: Vec::new(),
            bins: DEFAULT_BINS,
        }
    }
}

pub struct Constructed {
    pub hypergraph: Hypergraph,
    /// Soft memberships when the method produced or imported them.
    pub membership: Option<SoftMembership>,
}

pub fn construct(
    spec: &ConstructSpec,
    emb: &EmbeddingMatrix,
    manifest: Option<&ImageManifest>,
    progress: &Progress,
) -> Result<Constructed> {
    let policy = ThresholdPolicy {
        t: spec.t,
        min_edge_size: spec.min_edge_size,
    };
    let need_k = || {
        spec.k
            .ok_or_else(|| ServiceError::BadRequest(format!("{:?} needs --k", spec.method)))
    };
    let (mut hypergraph, membership) = match spec.method {
        Method::Fcm | Method::Pcm => {
            let params = FcmParams::new(need_k()?, spec.f, spec.seed);
            let soft = if spec.method == Method::Fcm {
                fcm_fit_with(emb, &params, progress)?
            } else {
                pcm_fit_with(emb, &params, progress)?
            };
            (threshold_membership(&soft, &policy)?, Some(soft))
        }
        Method::Mgk => (multi_granularity_kmeans_with(emb, &spec.k_list, spec.seed, progress)?, None),
        Method::ThresholdImport => {
            let path = spec
                .membership
                .as_ref()
                .ok_or_else(|| ServiceError::BadRequest("threshold-import needs --membership".into()))?;
            let soft = import_membership(path, Some(emb.n()))?;
            (threshold_membership(&soft, &policy)?, Some(soft))
        }
    };
    if !spec.metadata_fields.is_empty() {
        let manifest =
            manifest.ok_or_else(|| ServiceError::BadRequest("metadata edges need a manifest".into()))?;
        for field in &spec.metadata_fields {
            let first = hypergraph.next_free_id();
            hypergraph.edges.extend(metadata_edges(manifest, field, spec.bins, first)?);
        }
        hypergraph.validate()?;
    }
    Ok(Constructed { hypergraph, membership })
}
