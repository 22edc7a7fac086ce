//! Fuzzy and possibilistic c-means on squared Euclidean distances.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::EmbeddingMatrix;
use crate::progress::Progress;
use crate::rng;

use super::membership::SoftMembership;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmParams {
    pub k: usize,
    /// Fuzzifier, strictly greater than 1.
    pub f: f64,
    /// Convergence threshold on the largest membership change.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl FcmParams {
    pub fn new(k: usize, f: f64, seed: u64) -> Self {
        FcmParams {
            k,
            f,
            tol: 1e-5,
            max_iter: 300,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Parameter(format!("need k >= 2 clusters, got {}", self.k)));
        }
        if self.k > n {
            return Err(Error::Parameter(format!("k = {} exceeds the {n} images", self.k)));
        }
        if !(self.f > 1.0) || !self.f.is_finite() {
            return Err(Error::Parameter(format!("fuzzifier must be > 1, got {}", self.f)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Parameter("max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn sq_dist_f32(x: &[f32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, &b)| (a as f64 - b) * (a as f64 - b)).sum()
}

/// Greedy farthest-point seeding: a seeded random first center, then
/// repeatedly the point farthest from every chosen center (lowest index on
/// ties). Identical points therefore never seed two centers unless all
/// remaining points coincide with a center.
pub(crate) fn farthest_point_seeds(emb: &EmbeddingMatrix, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = emb.n();
    let first = rng::seeded(seed).random_range(0..n);
    let mut centers = vec![emb.row_f64(first)];
    let mut nearest: Vec<f64> = (0..n).into_par_iter().map(|i| sq_dist_f32(emb.row(i), &centers[0])).collect();
    while centers.len() < k {
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        let c = emb.row_f64(next);
        nearest
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = d.min(sq_dist_f32(emb.row(i), &c)));
        centers.push(c);
    }
    centers
}

fn distances(emb: &EmbeddingMatrix, centers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..emb.n())
        .into_par_iter()
        .map(|i| centers.iter().map(|c| sq_dist_f32(emb.row(i), c)).collect())
        .collect()
}

/// FCM memberships for one row of squared distances, computed as a softmax
/// of `-ln(d)/(f-1)` so tiny fuzzifiers do not overflow. Zero distances
/// share the row equally.
fn fcm_row(d: &[f64], f: f64) -> Vec<f64> {
    let zeros = d.iter().filter(|&&x| x <= 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return d.iter().map(|&x| if x <= 0.0 { share } else { 0.0 }).collect();
    }
    let e = 1.0 / (f - 1.0);
    let logits: Vec<f64> = d.iter().map(|&x| -e * x.ln()).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `v_j = Σ_i w_ij x_i / Σ_i w_ij`; a column with zero weight keeps its center.
fn weighted_centers(emb: &EmbeddingMatrix, weights: &[Vec<f64>], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = old.len();
    let d = emb.d();
    let (sums, totals) = (0..emb.n())
        .into_par_iter()
        .fold(
            || (vec![vec![0.0; d]; k], vec![0.0; k]),
            |(mut sums, mut totals), i| {
                let x = emb.row(i);
                for j in 0..k {
                    let w = weights[i][j];
                    if w == 0.0 {
                        continue;
                    }
                    totals[j] += w;
                    for (s, &v) in sums[j].iter_mut().zip(x) {
                        *s += w * v as f64;
                    }
                }
                (sums, totals)
            },
        )
        .reduce(
            || (vec![vec![0.0; d]; k], vec![0.0; k]),
            |(mut sa, mut ta), (sb, tb)| {
                for j in 0..k {
                    ta[j] += tb[j];
                    for (a, b) in sa[j].iter_mut().zip(&sb[j]) {
                        *a += b;
                    }
                }
                (sa, ta)
            },
        );
    sums.into_iter()
        .zip(totals)
        .zip(old)
        .map(|((s, t), o)| if t > 0.0 { s.into_iter().map(|v| v / t).collect() } else { o.clone() })
        .collect()
}

fn max_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn to_soft(u: &[Vec<f64>], k: usize, tag: String) -> Result<SoftMembership> {
    let data: Vec<f32> = u.iter().flat_map(|r| r.iter().map(|&x| x.clamp(0.0, 1.0) as f32)).collect();
    SoftMembership::new(u.len(), k, data, tag)
}

struct FcmState {
    u: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

fn fcm_iterate(emb: &EmbeddingMatrix, params: &FcmParams, progress: &Progress) -> Result<FcmState> {
    params.validate(emb.n())?;
    let mut centers = farthest_point_seeds(emb, params.k, params.seed);
    let mut u: Vec<Vec<f64>> = distances(emb, &centers).iter().map(|d| fcm_row(d, params.f)).collect();
    for iter in 0..params.max_iter {
        if progress.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let w: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|x| x.powf(params.f)).collect()).collect();
        centers = weighted_centers(emb, &w, &centers);
        let next: Vec<Vec<f64>> = distances(emb, &centers)
            .par_iter()
            .map(|d| fcm_row(d, params.f))
            .collect();
        let delta = max_change(&u, &next);
        u = next;
        progress.set_iteration(iter as u64 + 1, delta);
        if delta < params.tol {
            break;
        }
    }
    Ok(FcmState { u, centers })
}

pub fn fcm_fit(emb: &EmbeddingMatrix, params: &FcmParams) -> Result<SoftMembership> {
    fcm_fit_with(emb, params, &Progress::new())
}

/// Fuzzy c-means. Rows of the result sum to one.
pub fn fcm_fit_with(emb: &EmbeddingMatrix, params: &FcmParams, progress: &Progress) -> Result<SoftMembership> {
    let state = fcm_iterate(emb, params, progress)?;
    to_soft(&state.u, params.k, format!("fcm(k={},f={})", params.k, params.f))
}

pub fn pcm_fit(emb: &EmbeddingMatrix, params: &FcmParams) -> Result<SoftMembership> {
    pcm_fit_with(emb, params, &Progress::new())
}

/// Possibilistic c-means started from an FCM solution. Each cluster's scale
/// `η_j` is the FCM-weighted mean squared distance to its center; the
/// typicality is `1 / (1 + (d/η)^(1/(f-1)))`. Rows need not sum to one.
pub fn pcm_fit_with(emb: &EmbeddingMatrix, params: &FcmParams, progress: &Progress) -> Result<SoftMembership> {
    let FcmState { u, mut centers } = fcm_iterate(emb, params, progress)?;
    let k = params.k;
    let e = 1.0 / (params.f - 1.0);
    let d0 = distances(emb, &centers);
    let eta: Vec<f64> = (0..k)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..emb.n() {
                let w = u[i][j].powf(params.f);
                num += w * d0[i][j];
                den += w;
            }
            let eta = if den > 0.0 { num / den } else { 0.0 };
            eta.max(1e-12)
        })
        .collect();
    let typicality = |d: &[f64]| -> Vec<f64> {
        d.iter()
            .zip(&eta)
            .map(|(&x, &h)| {
                if x <= 0.0 {
                    1.0
                } else {
                    // 1/(1+r^e) written as a logistic in log space
                    let z = e * (x / h).ln();
                    1.0 / (1.0 + z.exp())
                }
            })
            .collect()
    };
    let mut t: Vec<Vec<f64>> = d0.iter().map(|d| typicality(d)).collect();
    for iter in 0..params.max_iter {
        if progress.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let w: Vec<Vec<f64>> = t.iter().map(|r| r.iter().map(|x| x.powf(params.f)).collect()).collect();
        centers = weighted_centers(emb, &w, &centers);
        let next: Vec<Vec<f64>> = distances(emb, &centers).par_iter().map(|d| typicality(d)).collect();
        let delta = max_change(&t, &next);
        t = next;
        progress.set_iteration(iter as u64 + 1, delta);
        if delta < params.tol {
            break;
        }
    }
    to_soft(&t, k, format!("pcm(k={},f={})", params.k, params.f))
}
