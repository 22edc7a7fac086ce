use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{
    edge_dispersion, intersection_size, EdgeId, EdgeOrigin, EdgeStatus, EmbeddingMatrix, Hypergraph,
};

use super::meta::{centroid_sim, unit_centroids};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRank {
    pub edge_id: EdgeId,
    /// `None` when a centroid is zero.
    pub sim: Option<f64>,
    pub intersection: usize,
}

fn rank_order(a: &EdgeRank, b: &EdgeRank) -> Ordering {
    let by_sim = match (a.sim, b.sim) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_sim
        .then(b.intersection.cmp(&a.intersection))
        .then(a.edge_id.cmp(&b.edge_id))
}

/// Every other edge by centroid similarity to `reference`, then by
/// intersection size, then by id.
pub fn rank_edges_by_similarity(h: &Hypergraph, emb: &EmbeddingMatrix, reference: EdgeId) -> Result<Vec<EdgeRank>> {
    let r = h.position(reference).ok_or_else(|| Error::not_found("edge", reference))?;
    let cents = unit_centroids(h, emb)?;
    let ref_members = &h.edges[r].members;
    let mut rows: Vec<EdgeRank> = (0..h.m())
        .into_par_iter()
        .filter(|&j| j != r)
        .map(|j| EdgeRank {
            edge_id: h.edges[j].id,
            sim: centroid_sim(h, &cents, r, j),
            intersection: intersection_size(ref_members, &h.edges[j].members),
        })
        .collect();
    rows.sort_by(rank_order);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeOverlap {
    pub edge_id: EdgeId,
    pub count: usize,
}

/// Edges containing any of `images`, with how many of them each contains.
pub fn intersecting_edges_for_images(h: &Hypergraph, images: &[usize]) -> Result<Vec<EdgeOverlap>> {
    let mut wanted = vec![false; h.n];
    for &i in images {
        *wanted.get_mut(i).ok_or_else(|| Error::not_found("image", i))? = true;
    }
    let mut out: Vec<EdgeOverlap> = h
        .edges
        .iter()
        .filter_map(|e| {
            let count = e.members.iter().filter(|&&v| wanted[v]).count();
            (count > 0).then_some(EdgeOverlap { edge_id: e.id, count })
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.edge_id.cmp(&b.edge_id)));
    Ok(out)
}

/// Dispersion of every edge, keyed by id.
pub fn edge_dispersions(h: &Hypergraph, emb: &EmbeddingMatrix) -> Result<HashMap<EdgeId, f64>> {
    h.edges
        .par_iter()
        .map(|e| Ok((e.id, edge_dispersion(e, emb)?)))
        .collect()
}

/// Pairwise intersection counts and harmonic overlaps of all edges, in edge
/// order, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub ids: Vec<EdgeId>,
    pub sizes: Vec<usize>,
    pub intersections: Vec<Vec<u32>>,
    pub harmonic: Vec<Vec<f32>>,
}

/// Counts co-memberships per image, so the cost is the sum of squared image
/// degrees rather than `m²` list merges.
pub fn overlap_matrix(h: &Hypergraph) -> OverlapMatrix {
    let m = h.m();
    let mut inter = vec![vec![0u32; m]; m];
    for edges in h.vertex_index() {
        for (x, &a) in edges.iter().enumerate() {
            for &b in &edges[x..] {
                inter[a][b] += 1;
                if a != b {
                    inter[b][a] += 1;
                }
            }
        }
    }
    let sizes: Vec<usize> = h.edges.iter().map(|e| e.len()).collect();
    let harmonic = inter
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter()
                .enumerate()
                .map(|(b, &t)| (2.0 * t as f64 / (sizes[a] + sizes[b]) as f64) as f32)
                .collect()
        })
        .collect();
    OverlapMatrix {
        ids: h.edges.iter().map(|e| e.id).collect(),
        sizes,
        intersections: inter,
        harmonic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub id: EdgeId,
    pub name: String,
    pub size: usize,
    pub status: EdgeStatus,
    pub origin: EdgeOrigin,
    pub dispersion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersection: Option<usize>,
}

/// Rows of the edge list. With a reference edge the rows carry similarity
/// and intersection columns and follow the similarity ranking, the
/// reference first; otherwise they keep edge order. `name_filter` keeps rows
/// whose name contains it, case-insensitively.
pub fn edge_table(
    h: &Hypergraph,
    emb: &EmbeddingMatrix,
    dispersions: &HashMap<EdgeId, f64>,
    reference: Option<EdgeId>,
    name_filter: Option<&str>,
) -> Result<Vec<EdgeRow>> {
    let needle = name_filter.map(str::to_lowercase).filter(|s| !s.is_empty());
    let keep = |name: &str| needle.as_ref().is_none_or(|n| name.to_lowercase().contains(n));
    let row = |pos: usize| {
        let e = &h.edges[pos];
        EdgeRow {
            id: e.id,
            name: e.name.clone(),
            size: e.len(),
            status: e.status,
            origin: e.origin,
            dispersion: dispersions.get(&e.id).copied(),
            sim: None,
            intersection: None,
        }
    };
    let ids = h.id_map();
    let rows = match reference {
        None => (0..h.m()).filter(|&p| keep(&h.edges[p].name)).map(row).collect(),
        Some(r) => {
            let rp = h.position(r).ok_or_else(|| Error::not_found("edge", r))?;
            let mut first = row(rp);
            first.sim = Some(1.0);
            first.intersection = Some(h.edges[rp].len());
            let mut out = vec![first];
            for rank in rank_edges_by_similarity(h, emb, r)? {
                let mut x = row(ids[&rank.edge_id]);
                x.sim = rank.sim;
                x.intersection = Some(rank.intersection);
                out.push(x);
            }
            out.retain(|x| keep(&x.name));
            out
        }
    };
    Ok(rows)
}
