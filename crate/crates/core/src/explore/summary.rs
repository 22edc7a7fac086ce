use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{cosine_f32, edge_centroid, norm, EdgeId, EmbeddingMatrix, Hyperedge};
use crate::rng;

/// Above this many candidates the contrast pair is searched on a seeded sample.
pub const CONTRAST_SAMPLE_CAP: usize = 500;

/// Digest of an edge: images closest to the centroid, the one farthest from
/// it, and the most mutually dissimilar pair. Roles never repeat an image,
/// so small edges fill fewer slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub edge_id: EdgeId,
    pub top3: Vec<usize>,
    pub outlier: Option<usize>,
    pub contrast_pair: Vec<usize>,
}

impl EdgeSummary {
    /// All images in display order.
    pub fn images(&self) -> Vec<usize> {
        let mut v = self.top3.clone();
        v.extend(self.outlier);
        v.extend(&self.contrast_pair);
        v
    }
}

/// Cosine of every member to the edge centroid, in member order. A zero
/// centroid makes every similarity 0 so ties fall back to ids.
pub(crate) fn centroid_similarities(edge: &Hyperedge, emb: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let c = edge_centroid(edge, emb)?;
    if norm(&c) == 0.0 {
        return Ok(vec![0.0; edge.len()]);
    }
    let c32: Vec<f32> = c.iter().map(|&x| x as f32).collect();
    Ok(edge.members.par_iter().map(|&i| cosine_f32(emb.row(i), &c32)).collect())
}

pub fn six_image_summary(edge: &Hyperedge, emb: &EmbeddingMatrix, seed: u64) -> Result<EdgeSummary> {
    if edge.is_empty() {
        return Err(Error::Validation(format!("edge {} is empty", edge.id)));
    }
    let sims = centroid_similarities(edge, emb)?;
    // Members are sorted, so a stable sort keeps lower ids first on ties.
    let mut order: Vec<usize> = (0..edge.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
    let top3: Vec<usize> = order.iter().take(3).map(|&p| edge.members[p]).collect();

    let rest: Vec<usize> = order.iter().skip(3).copied().collect();
    let outlier_pos = rest
        .iter()
        .copied()
        .min_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)));
    let outlier = outlier_pos.map(|p| edge.members[p]);

    let mut remaining: Vec<usize> = rest
        .iter()
        .filter(|&&p| Some(p) != outlier_pos)
        .map(|&p| edge.members[p])
        .collect();
    remaining.sort_unstable();
    let contrast_pair = match remaining.len() {
        0 | 1 => remaining,
        _ => {
            if remaining.len() > CONTRAST_SAMPLE_CAP {
                let mut r = rng::seeded(rng::derive(&[seed, edge.id.0]));
                let mut picked: Vec<usize> = index::sample(&mut r, remaining.len(), CONTRAST_SAMPLE_CAP)
                    .into_iter()
                    .map(|p| remaining[p])
                    .collect();
                picked.sort_unstable();
                remaining = picked;
            }
            let (a, b) = most_dissimilar_pair(&remaining, emb);
            vec![a, b]
        }
    };
    Ok(EdgeSummary {
        edge_id: edge.id,
        top3,
        outlier,
        contrast_pair,
    })
}

/// Pair with the lowest cosine; ties go to the lexicographically smallest pair.
fn most_dissimilar_pair(ids: &[usize], emb: &EmbeddingMatrix) -> (usize, usize) {
    let unit: Vec<Vec<f32>> = ids
        .iter()
        .map(|&i| {
            let r = emb.row(i);
            let n = r.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt() as f32;
            r.iter().map(|&x| x / n).collect()
        })
        .collect();
    let best = (0..ids.len())
        .into_par_iter()
        .filter_map(|a| {
            ((a + 1)..ids.len())
                .map(|b| {
                    let s: f64 = unit[a].iter().zip(&unit[b]).map(|(&x, &y)| x as f64 * y as f64).sum();
                    (s, a, b)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))))
        .expect("at least two ids");
    (ids[best.1], ids[best.2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::{EdgeOrigin, EdgeStatus};

    fn edge(members: Vec<usize>) -> Hyperedge {
        Hyperedge::new(EdgeId(0), "e", members, EdgeStatus::Original, EdgeOrigin::Model)
    }

    #[test]
    fn small_edges_list_each_member_once() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64 * 0.3, (i % 2) as f64]).collect();
        let emb = EmbeddingMatrix::from_rows(&rows, "t").unwrap();
        for size in 1..=6 {
            let s = six_image_summary(&edge((0..size).collect()), &emb, 0).unwrap();
            let mut all = s.images();
            assert_eq!(all.len(), size);
            all.sort();
            assert_eq!(all, (0..size).collect::<Vec<_>>());
        }
    }

    #[test]
    fn identical_vectors_pick_lowest_ids() {
        let emb = EmbeddingMatrix::from_rows(&vec![vec![1.0, 2.0]; 9], "t").unwrap();
        let s = six_image_summary(&edge((0..9).collect()), &emb, 0).unwrap();
        assert_eq!(s.top3, vec![0, 1, 2]);
        assert_eq!(s.outlier, Some(3));
        assert_eq!(s.contrast_pair, vec![4, 5]);
    }

    #[test]
    fn planted_outlier() {
        let mut rows = vec![vec![1.0, 0.0]; 5];
        rows.insert(2, vec![0.0, 1.0]);
        let emb = EmbeddingMatrix::from_rows(&rows, "t").unwrap();
        let s = six_image_summary(&edge((0..6).collect()), &emb, 0).unwrap();
        assert_eq!(s.outlier, Some(2));
        assert_eq!(s.top3, vec![0, 1, 3]);
        assert!(!s.contrast_pair.contains(&2));
    }

    #[test]
    fn contrast_pair_is_argmin() {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.1, 0.0],
            vec![1.0, 0.0, 0.1],
            vec![1.0, 0.1, 0.1],
            vec![0.2, 1.0, 0.0],
            vec![0.2, 0.0, 1.0],
            vec![1.0, 0.05, 0.05],
            vec![0.3, 1.0, 0.1],
        ];
        let emb = EmbeddingMatrix::from_rows(&rows, "t").unwrap();
        let s = six_image_summary(&edge((0..8).collect()), &emb, 0).unwrap();
        let mut pool: Vec<usize> = (0..8).filter(|i| !s.top3.contains(i) && Some(*i) != s.outlier).collect();
        pool.sort();
        let mut best = (f64::INFINITY, 0, 0);
        for (x, &a) in pool.iter().enumerate() {
            for &b in &pool[x + 1..] {
                let v = crate::hypercore::sim_images(a, b, &emb).unwrap();
                if v < best.0 - 1e-12 {
                    best = (v, a, b);
                }
            }
        }
        assert_eq!(s.contrast_pair, vec![best.1, best.2]);
    }

    #[test]
    fn large_edge_is_seeded() {
        let rows: Vec<Vec<f64>> = (0..800).map(|i| vec![1.0, (i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let emb = EmbeddingMatrix::from_rows(&rows, "t").unwrap();
        let e = edge((0..800).collect());
        let a = six_image_summary(&e, &emb, 3).unwrap();
        assert_eq!(a, six_image_summary(&e, &emb, 3).unwrap());
        let mut ids = a.images();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 6);
    }
}
