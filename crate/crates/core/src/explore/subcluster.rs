use std::collections::BTreeMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EmbeddingMatrix, Hyperedge};
use crate::rng;

/// Edges larger than this are clustered on a seeded sample; the remaining
/// members hang off their nearest sampled member.
pub const EXACT_SUBCLUSTER_CAP: usize = 4000;

/// One agglomeration step. Leaves are `0..n` (positions in `leaves`),
/// merge `i` creates cluster `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    /// Image ids, in edge member order.
    pub leaves: Vec<usize>,
    /// Sorted by height.
    pub merges: Vec<Merge>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let r = ra.min(rb);
        self.0[ra.max(rb)] = r;
        r
    }
}

impl Dendrogram {
    pub fn max_height(&self) -> f64 {
        self.merges.iter().map(|m| m.height).fold(0.0, f64::max)
    }

    /// Groups formed by every merge strictly below `theta`, ordered by their
    /// smallest image id.
    pub fn cut(&self, theta: f64) -> Vec<Vec<usize>> {
        let n = self.leaves.len();
        let mut dsu = Dsu::new(n);
        // Representative leaf of each internal cluster.
        let mut rep: Vec<usize> = (0..n).collect();
        for m in &self.merges {
            let r = if m.height < theta {
                dsu.union(rep[m.a], rep[m.b])
            } else {
                rep[m.a].min(rep[m.b])
            };
            rep.push(r);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for leaf in 0..n {
            groups.entry(dsu.find(leaf)).or_default().push(self.leaves[leaf]);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        for g in &mut out {
            g.sort_unstable();
        }
        out.sort_by_key(|g| g[0]);
        out
    }
}

fn unit_rows(ids: &[usize], emb: &EmbeddingMatrix) -> Vec<Vec<f32>> {
    ids.iter()
        .map(|&i| {
            let r = emb.row(i);
            let n = r.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt() as f32;
            r.iter().map(|&x| x / n).collect()
        })
        .collect()
}

fn cos_dist(a: &[f32], b: &[f32]) -> f32 {
    let s: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - s).max(0.0)
}

/// Index of pair `(i, j)`, `i < j`, in a condensed upper-triangular matrix.
fn tri(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Average-linkage merges over cosine distance via nearest-neighbor chains.
/// Returned merges reference point slots and are unsorted.
fn nn_chain_average(unit: &[Vec<f32>]) -> Vec<(usize, usize, f64)> {
    let n = unit.len();
    if n < 2 {
        return Vec::new();
    }
    let mut dist: Vec<f32> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ui = &unit[i];
            unit[i + 1..].iter().map(move |uj| cos_dist(ui, uj))
        })
        .collect();
    let d = |dist: &Vec<f32>, i: usize, j: usize| if i < j { dist[tri(n, i, j)] } else { dist[tri(n, j, i)] };
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("active cluster"));
        }
        loop {
            let top = *chain.last().expect("nonempty chain");
            let prev = chain.len().checked_sub(2).map(|p| chain[p]);
            let mut best = prev;
            let mut best_d = prev.map_or(f32::INFINITY, |p| d(&dist, top, p));
            for c in 0..n {
                if c != top && active[c] {
                    let dc = d(&dist, top, c);
                    if dc < best_d {
                        best_d = dc;
                        best = Some(c);
                    }
                }
            }
            let nn = best.expect("another active cluster");
            if Some(nn) == prev {
                chain.pop();
                chain.pop();
                let (a, b) = (top.min(nn), top.max(nn));
                merges.push((a, b, best_d as f64));
                let (na, nb) = (size[a] as f32, size[b] as f32);
                for k in 0..n {
                    if active[k] && k != a && k != b {
                        let v = (na * d(&dist, a, k) + nb * d(&dist, b, k)) / (na + nb);
                        let idx = if a < k { tri(n, a, k) } else { tri(n, k, a) };
                        dist[idx] = v;
                    }
                }
                active[b] = false;
                size[a] += size[b];
                break;
            }
            chain.push(nn);
        }
    }
    merges
}

/// Hierarchical clustering of an edge's members on cosine distance with
/// average linkage.
pub fn subcluster_tree(edge: &Hyperedge, emb: &EmbeddingMatrix, seed: u64) -> Result<Dendrogram> {
    if edge.is_empty() {
        return Err(Error::Validation(format!("edge {} is empty", edge.id)));
    }
    if let Some(&bad) = edge.members.iter().find(|&&i| i >= emb.n()) {
        return Err(Error::IndexOutOfRange {
            what: "embedding rows",
            index: bad,
            len: emb.n(),
        });
    }
    let n = edge.len();
    let sampled: Vec<usize> = if n > EXACT_SUBCLUSTER_CAP {
        let mut r = rng::seeded(rng::derive(&[seed, edge.id.0]));
        let mut s = index::sample(&mut r, n, EXACT_SUBCLUSTER_CAP).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };
    let sample_ids: Vec<usize> = sampled.iter().map(|&p| edge.members[p]).collect();
    let unit = unit_rows(&sample_ids, emb);
    let mut raw: Vec<(usize, usize, f64)> = nn_chain_average(&unit)
        .into_iter()
        .map(|(a, b, h)| (sampled[a], sampled[b], h))
        .collect();
    if sampled.len() < n {
        let mut in_sample = vec![false; n];
        sampled.iter().for_each(|&p| in_sample[p] = true);
        let attach: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&p| !in_sample[p])
            .map(|p| {
                let u = &unit_rows(&[edge.members[p]], emb)[0];
                let (s, dist) = unit
                    .iter()
                    .enumerate()
                    .map(|(s, us)| (s, cos_dist(u, us)))
                    .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                    .expect("nonempty sample");
                (sampled[s], p, dist as f64)
            })
            .collect();
        raw.extend(attach);
    }
    raw.sort_by(|x, y| x.2.total_cmp(&y.2));

    // Relabel slot pairs into cluster ids.
    let mut dsu = Dsu::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(raw.len());
    for (a, b, height) in raw {
        let (ra, rb) = (dsu.find(a), dsu.find(b));
        let (la, lb) = (label[ra], label[rb]);
        let s = size[ra] + size[rb];
        let r = dsu.union(ra, rb);
        label[r] = n + merges.len();
        size[r] = s;
        merges.push(Merge {
            a: la.min(lb),
            b: la.max(lb),
            height,
            size: s,
        });
    }
    Ok(Dendrogram {
        leaves: edge.members.clone(),
        merges,
    })
}
