//! Neighbor-embedding projection to 2D: a fuzzy k-nearest-neighbor graph is
//! laid out by stochastic attraction along graph edges and repulsion from
//! sampled non-neighbors, using the UMAP curve `1 / (1 + a·d^(2b))`.

use ndarray::{Array2, ArrayView2};
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::progress::Progress;
use crate::rng::{self, SeededRng};

pub const PROJECTOR_TAG: &str = "knn-umap-sgd/1";

// Curve parameters fitted for min_dist = 0.1, spread = 1.
const CURVE_A: f64 = 1.577;
const CURVE_B: f64 = 0.895;

/// `d2^CURVE_B` in single precision; the gradients are clipped and the
/// result only steers a 2D layout, so f64 accuracy buys nothing here.
fn pow_b(d2: f64) -> f64 {
    (d2 as f32).powf(CURVE_B as f32) as f64
}
const GRAD_CLIP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorParams {
    pub n_neighbors: usize,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    /// Above this many points, a seeded landmark subset is optimized and the
    /// rest are placed next to their nearest landmark.
    pub max_points: usize,
}

impl Default for ProjectorParams {
    fn default() -> Self {
        ProjectorParams {
            n_neighbors: 15,
            n_epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            max_points: 3000,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn by_distance(x: &(usize, f64), y: &(usize, f64)) -> std::cmp::Ordering {
    x.1.total_cmp(&y.1).then(x.0.cmp(&y.0))
}

/// The `k` smallest of `all`, sorted by distance then index.
fn nearest_k(mut all: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, by_distance);
        all.truncate(k);
    }
    all.sort_by(by_distance);
    all
}

/// Exact k nearest neighbors (excluding self), sorted by distance then index.
/// With a Gram matrix of the centered rows, candidates are preselected from
/// `g_ii + g_jj - 2 g_ij` and only those get an exact distance.
fn knn(data: ArrayView2<f64>, k: usize, gram: Option<&Array2<f64>>) -> Vec<Vec<(usize, f64)>> {
    let n = data.nrows();
    let exact = |i: usize, j: usize| {
        sq_dist(data.row(i).as_slice().expect("standard layout"), data.row(j).as_slice().expect("standard layout")).sqrt()
    };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let others = (0..n).filter(|&j| j != i);
            match gram {
                None => nearest_k(others.map(|j| (j, exact(i, j))).collect(), k),
                Some(g) => {
                    let approx = others.map(|j| (j, g[[i, i]] + g[[j, j]] - 2.0 * g[[i, j]])).collect();
                    let candidates = nearest_k(approx, (2 * k).max(k + 8));
                    nearest_k(candidates.into_iter().map(|(j, _)| (j, exact(i, j))).collect(), k)
                }
            }
        })
        .collect()
}

/// Symmetrized fuzzy membership graph as a list of directed weighted edges.
fn fuzzy_graph(neigh: &[Vec<(usize, f64)>]) -> Vec<(usize, usize, f64)> {
    let mut directed: Vec<(usize, usize, f64)> = Vec::new();
    for (i, row) in neigh.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let target = (row.len() as f64).log2().max(1e-3);
        let rho = row.iter().map(|x| x.1).find(|&d| d > 0.0).unwrap_or(0.0);
        let total = |sigma: f64| -> f64 {
            row.iter().map(|&(_, d)| (-(d - rho).max(0.0) / sigma).exp()).sum()
        };
        let (mut lo, mut hi, mut sigma) = (0.0, f64::INFINITY, 1.0);
        for _ in 0..64 {
            let s = total(sigma);
            if (s - target).abs() < 1e-5 {
                break;
            }
            if s > target {
                hi = sigma;
                sigma = (lo + hi) / 2.0;
            } else {
                lo = sigma;
                sigma = if hi.is_finite() { (lo + hi) / 2.0 } else { sigma * 2.0 };
            }
        }
        let mean_d = row.iter().map(|x| x.1).sum::<f64>() / row.len() as f64;
        sigma = sigma.max(1e-3 * mean_d).max(1e-12);
        for &(j, d) in row {
            directed.push((i, j, (-(d - rho).max(0.0) / sigma).exp()));
        }
    }
    // w = a + b - a·b over both directions
    let mut keyed: Vec<((usize, usize), f64)> = directed
        .into_iter()
        .map(|(i, j, w)| ((i.min(j), i.max(j)), w))
        .collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0));
    let mut out = Vec::new();
    let mut idx = 0;
    while idx < keyed.len() {
        let key = keyed[idx].0;
        let mut w = 0.0;
        while idx < keyed.len() && keyed[idx].0 == key {
            w = w + keyed[idx].1 - w * keyed[idx].1;
            idx += 1;
        }
        if w > 0.0 {
            out.push((key.0, key.1, w));
            out.push((key.1, key.0, w));
        }
    }
    out
}

/// Top-two principal component scores, scaled so the largest coordinate is 10.
/// Power iteration from a seeded start, on the Gram matrix when given and on
/// the covariance otherwise; a constant input yields small seeded noise so the optimizer
/// still has distinct starting points.
fn pca_init(centered: &Array2<f64>, gram: Option<&Array2<f64>>, rng: &mut SeededRng) -> Vec<[f64; 2]> {
    let n = centered.nrows();
    // Scores are C·v for covariance eigenvectors v, or σ·u for Gram eigenvectors u.
    let covariance;
    let m = match gram {
        Some(g) => g,
        None => {
            covariance = centered.t().dot(centered);
            &covariance
        }
    };
    let mut comps: Vec<ndarray::Array1<f64>> = Vec::new();
    let mut lambdas = Vec::new();
    for _ in 0..2 {
        let mut v = ndarray::Array1::from_shape_fn(m.nrows(), |_| rng.random::<f64>() - 0.5);
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut w = m.dot(&v);
            for c in &comps {
                let proj = w.dot(c);
                w.scaled_add(-proj, c);
            }
            let norm = w.dot(&w).sqrt();
            if norm < 1e-300 {
                lambda = 0.0;
                break;
            }
            lambda = norm;
            v = w / norm;
        }
        comps.push(v);
        lambdas.push(lambda);
    }
    let mut coords: Vec<[f64; 2]> = if gram.is_some() {
        let (s0, s1) = (lambdas[0].sqrt(), lambdas[1].sqrt());
        (0..n).map(|i| [comps[0][i] * s0, comps[1][i] * s1]).collect()
    } else {
        (0..n)
            .map(|i| {
                let r = centered.row(i);
                [r.dot(&comps[0]), r.dot(&comps[1])]
            })
            .collect()
    };
    let extent = coords.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if extent > 1e-12 { 10.0 / extent } else { 0.0 };
    for p in &mut coords {
        p[0] = p[0] * scale + 1e-4 * (rng.random::<f64>() - 0.5);
        p[1] = p[1] * scale + 1e-4 * (rng.random::<f64>() - 0.5);
    }
    coords
}

/// Neighbor lists and PCA start. With fewer rows than columns both work
/// from one `n × n` Gram matrix instead of `d`-dimensional products.
fn prepare(data: ArrayView2<f64>, k: usize, rng: &mut SeededRng) -> (Vec<Vec<(usize, f64)>>, Vec<[f64; 2]>) {
    let (n, d) = data.dim();
    let mean = data.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let centered = &data - &mean;
    let gram = (n < d).then(|| centered.dot(&centered.t()));
    let neigh = knn(data, k, gram.as_ref());
    let coords = pca_init(&centered, gram.as_ref(), rng);
    (neigh, coords)
}

fn optimize(
    coords: &mut [[f64; 2]],
    graph: &[(usize, usize, f64)],
    params: &ProjectorParams,
    rng: &mut SeededRng,
    progress: &Progress,
) {
    let n = coords.len();
    let n_epochs = params.n_epochs;
    let max_w = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    if max_w <= 0.0 || n_epochs == 0 {
        return;
    }
    let eps: Vec<f64> = graph
        .iter()
        .map(|e| {
            let r = max_w / e.2;
            if r > n_epochs as f64 {
                -1.0
            } else {
                r
            }
        })
        .collect();
    let neg_rate = params.negative_sample_rate as f64;
    let mut next_sample = eps.clone();
    let mut eps_neg: Vec<f64> = eps.iter().map(|e| e / neg_rate.max(1.0)).collect();
    if params.negative_sample_rate == 0 {
        eps_neg.iter_mut().for_each(|e| *e = f64::INFINITY);
    }
    let mut next_neg = eps_neg.clone();
    for epoch in 0..n_epochs {
        if progress.is_cancelled() {
            return;
        }
        let alpha = params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let ep = epoch as f64;
        for (e, &(i, j, _)) in graph.iter().enumerate() {
            if eps[e] < 0.0 || next_sample[e] > ep {
                continue;
            }
            let diff = [coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]];
            let d2 = diff[0] * diff[0] + diff[1] * diff[1];
            if d2 > 0.0 {
                let pb = pow_b(d2);
                let coeff = -2.0 * CURVE_A * CURVE_B * (pb / d2) / (CURVE_A * pb + 1.0);
                for t in 0..2 {
                    let g = (coeff * diff[t]).clamp(-GRAD_CLIP, GRAD_CLIP) * alpha;
                    coords[i][t] += g;
                    coords[j][t] -= g;
                }
            }
            next_sample[e] += eps[e];
            let n_neg = ((ep - next_neg[e]) / eps_neg[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let diff = [coords[i][0] - coords[k][0], coords[i][1] - coords[k][1]];
                let d2 = diff[0] * diff[0] + diff[1] * diff[1];
                let coeff = if d2 > 0.0 { 2.0 * CURVE_B / ((0.001 + d2) * (CURVE_A * pow_b(d2) + 1.0)) } else { 0.0 };
                for t in 0..2 {
                    let g = if d2 > 0.0 { (coeff * diff[t]).clamp(-GRAD_CLIP, GRAD_CLIP) } else { GRAD_CLIP };
                    coords[i][t] += g * alpha;
                }
            }
            next_neg[e] += n_neg as f64 * eps_neg[e];
        }
        progress.set_iteration(epoch as u64 + 1, alpha);
    }
}

/// Projects the rows of `data` to 2D, deterministically per `seed`.
/// One row maps to the origin; two rows map to opposite points on a seeded
/// diameter (or both to the origin when identical).
pub fn project(data: ArrayView2<f64>, seed: u64, params: &ProjectorParams) -> Vec<[f64; 2]> {
    project_with(data, seed, params, &Progress::new())
}

pub fn project_with(data: ArrayView2<f64>, seed: u64, params: &ProjectorParams, progress: &Progress) -> Vec<[f64; 2]> {
    let n = data.nrows();
    let mut rng = rng::seeded(seed);
    match n {
        0 => return Vec::new(),
        1 => return vec![[0.0, 0.0]],
        2 => {
            if sq_dist(&data.row(0).to_vec(), &data.row(1).to_vec()) == 0.0 {
                return vec![[0.0, 0.0]; 2];
            }
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            return vec![[c, s], [-c, -s]];
        }
        _ => {}
    }
    let data = data.as_standard_layout();
    if n > params.max_points {
        return project_landmarks(data.view(), &mut rng, params, progress);
    }
    let k = params.n_neighbors.clamp(1, n - 1);
    let (neigh, mut coords) = prepare(data.view(), k, &mut rng);
    let graph = fuzzy_graph(&neigh);
    optimize(&mut coords, &graph, params, &mut rng, progress);
    coords
}

fn project_landmarks(
    data: ArrayView2<f64>,
    rng: &mut SeededRng,
    params: &ProjectorParams,
    progress: &Progress,
) -> Vec<[f64; 2]> {
    let n = data.nrows();
    let mut landmarks = rand::seq::index::sample(rng, n, params.max_points).into_vec();
    landmarks.sort_unstable();
    let sub: Array2<f64> = data.select(ndarray::Axis(0), &landmarks);
    let k = params.n_neighbors.clamp(1, landmarks.len() - 1);
    let (neigh, mut lm_coords) = prepare(sub.view(), k, rng);
    let graph = fuzzy_graph(&neigh);
    optimize(&mut lm_coords, &graph, params, rng, progress);
    let nearest: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = data.row(i).to_vec();
            (0..landmarks.len())
                .min_by(|&x, &y| {
                    sq_dist(&a, sub.row(x).as_slice().expect("owned"))
                        .total_cmp(&sq_dist(&a, sub.row(y).as_slice().expect("owned")))
                })
                .expect("landmarks nonempty")
        })
        .collect();
    nearest
        .into_iter()
        .map(|l| {
            let p = lm_coords[l];
            [p[0] + 0.05 * (rng.random::<f64>() - 0.5), p[1] + 0.05 * (rng.random::<f64>() - 0.5)]
        })
        .collect()
}
