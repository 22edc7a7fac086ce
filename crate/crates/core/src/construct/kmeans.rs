use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus, EmbeddingMatrix, Hyperedge, Hypergraph};
use crate::progress::Progress;
use crate::rng;

use super::fuzzy::{farthest_point_seeds, sq_dist_f32};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-4;

/// Default granularities for the multi-granularity constructor.
pub const DEFAULT_K_LIST: [usize; 3] = [16, 64, 256];

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn nearest_center(x: &[f32], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist_f32(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

pub fn kmeans(emb: &EmbeddingMatrix, k: usize, seed: u64) -> Result<KMeansFit> {
    kmeans_with(emb, k, seed, &Progress::new())
}

/// Lloyd's algorithm from farthest-point seeds, stopping when no center
/// moves more than `KMEANS_TOL` or after `KMEANS_MAX_ITER` rounds. A cluster
/// that empties keeps its previous center.
pub fn kmeans_with(emb: &EmbeddingMatrix, k: usize, seed: u64, progress: &Progress) -> Result<KMeansFit> {
    if k == 0 || k > emb.n() {
        return Err(Error::Parameter(format!("k = {k} must be in 1..={}", emb.n())));
    }
    let d = emb.d();
    let mut centers = farthest_point_seeds(emb, k, seed);
    let mut labels: Vec<usize> = (0..emb.n()).into_par_iter().map(|i| nearest_center(emb.row(i), &centers)).collect();
    let mut iterations = 0;
    for iter in 0..KMEANS_MAX_ITER {
        if progress.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(emb.row(i)) {
                *s += x as f64;
            }
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let c: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            let moved: f64 = c.iter().zip(&centers[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            shift = shift.max(moved);
            centers[j] = c;
        }
        labels = (0..emb.n()).into_par_iter().map(|i| nearest_center(emb.row(i), &centers)).collect();
        iterations = iter + 1;
        progress.set_iteration(iterations as u64, shift);
        if shift < KMEANS_TOL {
            break;
        }
    }
    Ok(KMeansFit {
        labels,
        centers,
        iterations,
    })
}

pub fn multi_granularity_kmeans(emb: &EmbeddingMatrix, k_list: &[usize], seed: u64) -> Result<Hypergraph> {
    multi_granularity_kmeans_with(emb, k_list, seed, &Progress::new())
}

/// One k-means run per granularity; every nonempty cluster of every run
/// becomes an edge named `k{K}-cluster-{j}`.
pub fn multi_granularity_kmeans_with(
    emb: &EmbeddingMatrix,
    k_list: &[usize],
    seed: u64,
    progress: &Progress,
) -> Result<Hypergraph> {
    if k_list.is_empty() {
        return Err(Error::Parameter("k list is empty".into()));
    }
    if let Some(bad) = k_list.iter().find(|&&k| k == 0 || k > emb.n()) {
        return Err(Error::Parameter(format!("k = {bad} must be in 1..={}", emb.n())));
    }
    progress.set_total(k_list.len() as u64);
    let mut edges = Vec::new();
    for (run, &k) in k_list.iter().enumerate() {
        let fit = kmeans_with(emb, k, rng::derive(&[seed, run as u64]), progress)?;
        let mut members = vec![Vec::new(); k];
        for (i, &l) in fit.labels.iter().enumerate() {
            members[l].push(i);
        }
        for (j, m) in members.into_iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let id = EdgeId(edges.len() as u64);
            edges.push(Hyperedge::new(id, format!("k{k}-cluster-{j}"), m, EdgeStatus::Original, EdgeOrigin::Model));
        }
        progress.advance();
    }
    Hypergraph::new(emb.n(), edges)
}
