//! Node positions for the spatial hypergraph view.

mod links;
mod overlap;
mod projector;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EmbeddingMatrix, Hyperedge, Hypergraph};
use crate::progress::Progress;
use crate::rng;

pub use links::{shared_image_links, Link, Selection};
pub use overlap::{node_radius, overlapping_pairs, remove_overlaps, OverlapOutcome, OverlapParams, OVERLAP_EPS};
pub use projector::{project, project_with, ProjectorParams, PROJECTOR_TAG};

/// Largest distance of an image node from its edge node's center.
pub const IMAGE_DISK_RADIUS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub seed: u64,
    pub r_min: f64,
    pub radius_scale: f64,
    pub overlap: OverlapParams,
    pub projector: ProjectorParams,
    /// Projector for image nodes inside an edge node. Fewer epochs than the
    /// edge projection: there is one run per edge and the PCA start already
    /// fixes the coarse arrangement.
    #[serde(default = "default_image_projector")]
    pub image_projector: ProjectorParams,
    /// Also lay out image nodes inside every edge node.
    pub images: bool,
}

fn default_image_projector() -> ProjectorParams {
    ProjectorParams {
        n_epochs: 100,
        ..ProjectorParams::default()
    }
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            seed: 0,
            r_min: 8.0,
            radius_scale: 2.0,
            overlap: OverlapParams::default(),
            projector: ProjectorParams::default(),
            image_projector: default_image_projector(),
            images: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode {
    #[serde(rename = "id")]
    pub edge_id: EdgeId,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    /// Metadata edges are stacked on the right boundary instead of projected.
    #[serde(default)]
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageNode {
    #[serde(rename = "id")]
    pub image_id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    #[serde(rename = "edges")]
    pub edge_nodes: Vec<EdgeNode>,
    #[serde(rename = "images")]
    pub image_nodes: BTreeMap<EdgeId, Vec<ImageNode>>,
    pub seed: u64,
    pub projector_tag: String,
    #[serde(default)]
    pub residual_overlaps: usize,
}

fn check_dims(h: &Hypergraph, emb: &EmbeddingMatrix) -> Result<()> {
    if emb.n() != h.n {
        return Err(Error::Dimension(format!(
            "embedding matrix has {} rows but the hypergraph has {} vertices",
            emb.n(),
            h.n
        )));
    }
    Ok(())
}

fn rows_f64(ids: &[usize], emb: &EmbeddingMatrix) -> Array2<f64> {
    Array2::from_shape_fn((ids.len(), emb.d()), |(r, c)| emb.row(ids[r])[c] as f64)
}

/// Raw 2D positions of the non-metadata edges, projected from their centroids.
pub fn project_edges_2d(
    h: &Hypergraph,
    emb: &EmbeddingMatrix,
    seed: u64,
    params: &ProjectorParams,
) -> Result<Vec<(EdgeId, [f64; 2])>> {
    project_edges_2d_with(h, emb, seed, params, &Progress::new())
}

fn project_edges_2d_with(
    h: &Hypergraph,
    emb: &EmbeddingMatrix,
    seed: u64,
    params: &ProjectorParams,
    progress: &Progress,
) -> Result<Vec<(EdgeId, [f64; 2])>> {
    check_dims(h, emb)?;
    let edges: Vec<&Hyperedge> = h.edges.iter().filter(|e| e.origin != EdgeOrigin::Metadata).collect();
    let mut centroids = Array2::zeros((edges.len(), emb.d()));
    for (r, e) in edges.iter().enumerate() {
        let c = crate::hypercore::edge_centroid(e, emb)?;
        centroids.row_mut(r).assign(&ndarray::Array1::from(c));
    }
    let xy = projector::project_with(centroids.view(), seed, params, progress);
    Ok(edges.iter().map(|e| e.id).zip(xy).collect())
}

/// Positions of an edge's members inside the unit disk, in member order.
/// Centered on their mean and scaled so the farthest sits at radius 0.9.
pub fn project_images_within_edge(
    edge: &Hyperedge,
    emb: &EmbeddingMatrix,
    seed: u64,
    params: &ProjectorParams,
) -> Result<Vec<ImageNode>> {
    if edge.is_empty() {
        return Err(Error::Validation(format!("edge {} is empty", edge.id)));
    }
    for &v in &edge.members {
        emb.try_row(v)?;
    }
    let node = |image_id: usize, p: [f64; 2]| ImageNode { image_id, x: p[0], y: p[1] };
    match edge.len() {
        1 => return Ok(vec![node(edge.members[0], [0.0, 0.0])]),
        2 => {
            let theta = rng::seeded(seed).random::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            let r = IMAGE_DISK_RADIUS;
            return Ok(vec![
                node(edge.members[0], [r * c, r * s]),
                node(edge.members[1], [-r * c, -r * s]),
            ]);
        }
        _ => {}
    }
    let mut xy = projector::project(rows_f64(&edge.members, emb).view(), seed, params);
    let len = xy.len() as f64;
    let cx = xy.iter().map(|p| p[0]).sum::<f64>() / len;
    let cy = xy.iter().map(|p| p[1]).sum::<f64>() / len;
    let far = xy.iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).fold(0.0, f64::max);
    let scale = if far > 1e-12 { IMAGE_DISK_RADIUS / far } else { 0.0 };
    for p in &mut xy {
        // rounding can land a hair past the boundary
        *p = [(p[0] - cx) * scale, (p[1] - cy) * scale];
        let r = p[0].hypot(p[1]);
        if r > IMAGE_DISK_RADIUS {
            p[0] *= IMAGE_DISK_RADIUS / r;
            p[1] *= IMAGE_DISK_RADIUS / r;
        }
    }
    Ok(edge.members.iter().zip(xy).map(|(&v, p)| node(v, p)).collect())
}

fn nearest_neighbor_distances(pts: &[[f64; 2]]) -> Vec<f64> {
    (0..pts.len())
        .map(|i| {
            (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Rescales raw projector output so that the median nearest-neighbor gap
/// roughly fits two average nodes side by side.
fn to_viewport(raw: &[[f64; 2]], radii: &[f64], margin: f64) -> Vec<[f64; 2]> {
    if raw.len() < 2 {
        return raw.to_vec();
    }
    let mut nn: Vec<f64> = nearest_neighbor_distances(raw).into_iter().filter(|d| *d > 1e-12).collect();
    if nn.is_empty() {
        return raw.to_vec();
    }
    nn.sort_by(f64::total_cmp);
    let median = nn[nn.len() / 2];
    let mean_r = radii.iter().sum::<f64>() / radii.len() as f64;
    let scale = (2.0 * mean_r + margin) / median;
    raw.iter().map(|p| [p[0] * scale, p[1] * scale]).collect()
}

pub fn layout_hypergraph(h: &Hypergraph, emb: &EmbeddingMatrix, params: &LayoutParams) -> Result<LayoutResult> {
    layout_hypergraph_with(h, emb, params, None, &Progress::new())
}

/// Full layout: projection of edge centroids, sizing, overlap removal,
/// metadata edges pinned to the right boundary, and image nodes per edge.
///
/// Image nodes are copied from `previous` for edges whose member list is
/// unchanged, when it was computed with the same seed. The caller must only
/// pass a layout built from the same embeddings and parameters.
pub fn layout_hypergraph_with(
    h: &Hypergraph,
    emb: &EmbeddingMatrix,
    params: &LayoutParams,
    previous: Option<&LayoutResult>,
    progress: &Progress,
) -> Result<LayoutResult> {
    check_dims(h, emb)?;
    let radius = |e: &Hyperedge| node_radius(e.len(), params.r_min, params.radius_scale);
    let projected = project_edges_2d_with(h, emb, params.seed, &params.projector, progress)?;
    if progress.is_cancelled() {
        return Err(Error::Cancelled);
    }
    let free: Vec<&Hyperedge> = projected.iter().map(|(id, _)| h.edge(*id).expect("projected edge")).collect();
    let radii: Vec<f64> = free.iter().map(|e| radius(e)).collect();
    let raw: Vec<[f64; 2]> = projected.iter().map(|p| p.1).collect();
    let start = to_viewport(&raw, &radii, params.overlap.margin);
    let ids: Vec<u64> = free.iter().map(|e| e.id.0).collect();
    let overlap_params = OverlapParams {
        seed: params.seed,
        ..params.overlap.clone()
    };
    let outcome = remove_overlaps(&start, &radii, &ids, &overlap_params);

    let mut edge_nodes: Vec<EdgeNode> = free
        .iter()
        .zip(&outcome.positions)
        .zip(&radii)
        .map(|((e, p), &r)| EdgeNode {
            edge_id: e.id,
            x: p[0],
            y: p[1],
            radius: r,
            pinned: false,
        })
        .collect();

    let meta: Vec<&Hyperedge> = h.edges.iter().filter(|e| e.origin == EdgeOrigin::Metadata).collect();
    if !meta.is_empty() {
        let right = edge_nodes.iter().map(|n| n.x + n.radius).fold(f64::NEG_INFINITY, f64::max);
        let top = edge_nodes.iter().map(|n| n.y - n.radius).fold(f64::INFINITY, f64::min);
        let (right, top) = if right.is_finite() { (right, top) } else { (0.0, 0.0) };
        let max_r = meta.iter().map(|e| radius(e)).fold(0.0, f64::max);
        let x = right + params.overlap.margin + max_r;
        let mut y = top;
        for e in meta {
            let r = radius(e);
            edge_nodes.push(EdgeNode {
                edge_id: e.id,
                x,
                y: y + r,
                radius: r,
                pinned: true,
            });
            y += 2.0 * r + params.overlap.margin;
        }
    }

    let mut image_nodes = BTreeMap::new();
    if params.images {
        let per_edge: Vec<(EdgeId, Vec<ImageNode>)> = h
            .edges
            .par_iter()
            .map(|e| {
                if let Some(nodes) = reusable_images(previous, params.seed, e) {
                    return Ok((e.id, nodes));
                }
                let seed = rng::derive(&[params.seed, e.id.0]);
                Ok((e.id, project_images_within_edge(e, emb, seed, &params.image_projector)?))
            })
            .collect::<Result<_>>()?;
        image_nodes.extend(per_edge);
    }
    if progress.is_cancelled() {
        return Err(Error::Cancelled);
    }
    Ok(LayoutResult {
        edge_nodes,
        image_nodes,
        seed: params.seed,
        projector_tag: PROJECTOR_TAG.to_string(),
        residual_overlaps: outcome.residual_overlaps,
    })
}

fn reusable_images(previous: Option<&LayoutResult>, seed: u64, e: &Hyperedge) -> Option<Vec<ImageNode>> {
    let prev = previous.filter(|p| p.seed == seed)?;
    let nodes = prev.image_nodes.get(&e.id)?;
    let same = nodes.len() == e.members.len() && nodes.iter().zip(&e.members).all(|(n, &m)| n.image_id == m);
    same.then(|| nodes.clone())
}

/// Fraction of each point's `k_in` nearest neighbors in `a` that are among
/// its `k_out` nearest neighbors in `b`, averaged over points.
pub fn neighbor_preservation(a: &[Vec<f64>], b: &[[f64; 2]], k_in: usize, k_out: usize) -> f64 {
    let n = a.len();
    assert_eq!(n, b.len());
    if n < 2 {
        return 1.0;
    }
    let ranked = |dist: &dyn Fn(usize, usize) -> f64, i: usize, k: usize| -> Vec<usize> {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&x, &y| dist(i, x).total_cmp(&dist(i, y)).then(x.cmp(&y)));
        others.truncate(k);
        others
    };
    let da = |i: usize, j: usize| a[i].iter().zip(&a[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let db = |i: usize, j: usize| (b[i][0] - b[j][0]).powi(2) + (b[i][1] - b[j][1]).powi(2);
    let total: f64 = (0..n)
        .map(|i| {
            let want = ranked(&da, i, k_in);
            let got = ranked(&db, i, k_out);
            want.iter().filter(|w| got.contains(w)).count() as f64 / want.len() as f64
        })
        .sum();
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::EdgeStatus;

    fn emb_from(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows, "test").unwrap()
    }

    #[test]
    fn single_edge_projects_to_origin() {
        let emb = emb_from(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let h = Hypergraph::from_member_lists(2, [vec![0, 1]]).unwrap();
        let p = project_edges_2d(&h, &emb, 3, &ProjectorParams::default()).unwrap();
        assert_eq!(p, vec![(EdgeId(0), [0.0, 0.0])]);
    }

    #[test]
    fn image_positions_in_disk() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 5) as f64 + 0.1, (i / 5) as f64 + 0.2, 1.0]).collect();
        let emb = emb_from(&rows);
        let single = Hyperedge::new(EdgeId(0), "a", [3], EdgeStatus::Original, EdgeOrigin::Model);
        let s = project_images_within_edge(&single, &emb, 0, &ProjectorParams::default()).unwrap();
        assert_eq!((s[0].x, s[0].y), (0.0, 0.0));
        let pair = Hyperedge::new(EdgeId(1), "b", [1, 4], EdgeStatus::Original, EdgeOrigin::Model);
        let p = project_images_within_edge(&pair, &emb, 5, &ProjectorParams::default()).unwrap();
        assert!((p[0].x.hypot(p[0].y) - 0.9).abs() < 1e-12);
        assert!((p[0].x + p[1].x).abs() < 1e-12 && (p[0].y + p[1].y).abs() < 1e-12);
        let all = Hyperedge::new(EdgeId(2), "c", 0..12, EdgeStatus::Original, EdgeOrigin::Model);
        let q = project_images_within_edge(&all, &emb, 5, &ProjectorParams::default()).unwrap();
        assert_eq!(q.len(), 12);
        let far = q.iter().map(|n| n.x.hypot(n.y)).fold(0.0, f64::max);
        assert!(far <= 0.9 + 1e-12 && far > 0.89);
    }

    #[test]
    fn metadata_edges_pinned_right() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i as f64).cos(), 0.5]).collect();
        let emb = emb_from(&rows);
        let mut h = Hypergraph::from_member_lists(20, (0..6).map(|j| (j * 3..j * 3 + 3).collect::<Vec<_>>())).unwrap();
        h.edges[2].origin = EdgeOrigin::Metadata;
        h.edges[4].origin = EdgeOrigin::Metadata;
        let out = layout_hypergraph(&h, &emb, &LayoutParams::default()).unwrap();
        assert_eq!(out.edge_nodes.len(), 6);
        let pinned: Vec<&EdgeNode> = out.edge_nodes.iter().filter(|n| n.pinned).collect();
        assert_eq!(pinned.len(), 2);
        let right_of_free = out.edge_nodes.iter().filter(|n| !n.pinned).map(|n| n.x + n.radius).fold(f64::MIN, f64::max);
        for p in &pinned {
            assert!(p.x - p.radius >= right_of_free);
        }
        assert!(pinned[0].y < pinned[1].y);
        let pos: Vec<[f64; 2]> = out.edge_nodes.iter().map(|n| [n.x, n.y]).collect();
        let radii: Vec<f64> = out.edge_nodes.iter().map(|n| n.radius).collect();
        assert!(overlapping_pairs(&pos, &radii).is_empty());
        assert_eq!(out.image_nodes.len(), 6);
        assert_eq!(out, layout_hypergraph(&h, &emb, &LayoutParams::default()).unwrap());
    }

    #[test]
    fn reused_image_nodes_match_a_fresh_layout() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos(), 0.1 * i as f64]).collect();
        let emb = emb_from(&rows);
        let mut h = Hypergraph::from_member_lists(40, (0..5).map(|j| (j * 8..j * 8 + 8).collect::<Vec<_>>())).unwrap();
        let params = LayoutParams { seed: 4, ..LayoutParams::default() };
        let before = layout_hypergraph(&h, &emb, &params).unwrap();
        h.edges[1].members.retain(|&v| v != 9);
        h.edges[3].members.push(0);
        let fresh = layout_hypergraph(&h, &emb, &params).unwrap();
        let reused = layout_hypergraph_with(&h, &emb, &params, Some(&before), &Progress::new()).unwrap();
        assert_eq!(reused, fresh);
        assert_eq!(fresh.image_nodes[&EdgeId(0)], before.image_nodes[&EdgeId(0)]);
        assert_ne!(fresh.image_nodes[&EdgeId(1)], before.image_nodes[&EdgeId(1)]);

        // A different seed is never reused.
        let other = LayoutParams { seed: 5, ..params };
        let reseeded = layout_hypergraph_with(&h, &emb, &other, Some(&before), &Progress::new()).unwrap();
        assert_eq!(reseeded, layout_hypergraph(&h, &emb, &other).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let emb = emb_from(&[vec![1.0]]);
        let h = Hypergraph::from_member_lists(2, [vec![0, 1]]).unwrap();
        assert!(matches!(layout_hypergraph(&h, &emb, &LayoutParams::default()), Err(Error::Dimension(_))));
    }

    #[test]
    fn json_shape() {
        let emb = emb_from(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let h = Hypergraph::from_member_lists(2, [vec![0, 1], vec![1]]).unwrap();
        let out = layout_hypergraph(&h, &emb, &LayoutParams::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&out).unwrap();
        assert!(v["edges"][0]["r"].is_number());
        assert!(v["images"]["1"][0]["id"].is_number());
    }
}
