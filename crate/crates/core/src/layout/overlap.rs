use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Tolerance of the non-overlap check.
pub const OVERLAP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    /// Extra gap left between two nodes that were pushed apart.
    pub margin: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for OverlapParams {
    fn default() -> Self {
        OverlapParams {
            margin: 1.0,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapOutcome {
    pub positions: Vec<[f64; 2]>,
    pub iterations: usize,
    /// Whether the first pass failed and a pass with a larger margin ran.
    pub retried: bool,
    /// Pairs still overlapping after the retry; zero on success.
    pub residual_overlaps: usize,
}

/// `r_min + scale·sqrt(size)`, so node area grows linearly with size.
pub fn node_radius(size: usize, r_min: f64, scale: f64) -> f64 {
    r_min + scale * (size as f64).sqrt()
}

/// Candidate pairs whose x-extents could touch, via a sort-and-sweep on x.
fn candidate_pairs(pos: &[[f64; 2]], radii: &[f64], pad: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..pos.len()).collect();
    order.sort_by(|&a, &b| pos[a][0].total_cmp(&pos[b][0]).then(a.cmp(&b)));
    let max_r = radii.iter().copied().fold(0.0, f64::max);
    let mut pairs = Vec::new();
    for (oi, &a) in order.iter().enumerate() {
        for &b in &order[oi + 1..] {
            if pos[b][0] - pos[a][0] > 2.0 * max_r + pad {
                break;
            }
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Pairs with `dist < r_a + r_b - eps`.
pub fn overlapping_pairs(pos: &[[f64; 2]], radii: &[f64]) -> Vec<(usize, usize)> {
    candidate_pairs(pos, radii, 0.0)
        .into_iter()
        .filter(|&(a, b)| {
            let d = (pos[a][0] - pos[b][0]).hypot(pos[a][1] - pos[b][1]);
            d < radii[a] + radii[b] - OVERLAP_EPS
        })
        .collect()
}

fn coincident_direction(seed: u64, ida: u64, idb: u64) -> [f64; 2] {
    let theta = rng::seeded(rng::derive(&[seed, ida, idb])).random::<f64>() * std::f64::consts::TAU;
    let (s, c) = theta.sin_cos();
    [c, s]
}

fn separate(pos: &mut [[f64; 2]], radii: &[f64], ids: &[u64], margin: f64, max_iter: usize, seed: u64) -> (usize, bool) {
    for iter in 0..max_iter {
        let pairs = overlapping_pairs(pos, radii);
        if pairs.is_empty() {
            return (iter, true);
        }
        for (a, b) in pairs {
            let dx = pos[b][0] - pos[a][0];
            let dy = pos[b][1] - pos[a][1];
            let d = dx.hypot(dy);
            let want = radii[a] + radii[b];
            if d >= want - OVERLAP_EPS {
                continue;
            }
            let dir = if d > 1e-12 {
                [dx / d, dy / d]
            } else {
                // oriented from the smaller id towards the larger
                let u = coincident_direction(seed, ids[a].min(ids[b]), ids[a].max(ids[b]));
                if ids[a] <= ids[b] {
                    u
                } else {
                    [-u[0], -u[1]]
                }
            };
            let half = (want + margin - d) / 2.0;
            for t in 0..2 {
                pos[a][t] -= dir[t] * half;
                pos[b][t] += dir[t] * half;
            }
        }
    }
    (max_iter, overlapping_pairs(pos, radii).is_empty())
}

/// Pushes every overlapping pair apart along its center line, each node by
/// half the penetration plus half the margin, until no pair overlaps. After
/// `max_iter` sweeps it restarts once from the input with a doubled margin.
/// `ids` give coincident nodes a seeded, order-independent push direction.
pub fn remove_overlaps(positions: &[[f64; 2]], radii: &[f64], ids: &[u64], params: &OverlapParams) -> OverlapOutcome {
    assert_eq!(positions.len(), radii.len());
    assert_eq!(positions.len(), ids.len());
    let mut pos = positions.to_vec();
    let (iterations, ok) = separate(&mut pos, radii, ids, params.margin, params.max_iter, params.seed);
    if ok {
        return OverlapOutcome {
            positions: pos,
            iterations,
            retried: false,
            residual_overlaps: 0,
        };
    }
    let mut pos = positions.to_vec();
    let margin = 2.0 * params.margin.max(0.5);
    let (more, _) = separate(&mut pos, radii, ids, margin, params.max_iter, params.seed);
    let residual = overlapping_pairs(&pos, radii).len();
    if residual > 0 {
        log::warn!("overlap removal left {residual} overlapping pairs");
    }
    OverlapOutcome {
        positions: pos,
        iterations: iterations + more,
        retried: true,
        residual_overlaps: residual,
    }
}
