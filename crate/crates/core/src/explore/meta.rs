use rayon::prelude::*;

use crate::edits::{EditLog, EditRequest, Transaction};
use crate::error::{Error, Result};
use crate::hypercore::{edge_centroid, norm, EdgeId, EmbeddingMatrix, Hypergraph};

/// Unit centroids in edge order; `None` where the centroid vanishes.
pub(crate) fn unit_centroids(h: &Hypergraph, emb: &EmbeddingMatrix) -> Result<Vec<Option<Vec<f64>>>> {
    h.edges
        .par_iter()
        .map(|e| {
            let c = edge_centroid(e, emb)?;
            let n = norm(&c);
            Ok((n > 0.0).then(|| c.iter().map(|x| x / n).collect()))
        })
        .collect()
}

/// Edge-to-edge similarity from precomputed unit centroids, matching
/// `sim_edges`: identical member sets score exactly 1.
pub(crate) fn centroid_sim(h: &Hypergraph, cents: &[Option<Vec<f64>>], a: usize, b: usize) -> Option<f64> {
    let (ca, cb) = (cents[a].as_ref()?, cents[b].as_ref()?);
    if h.edges[a].members == h.edges[b].members {
        return Some(1.0);
    }
    Some(ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0))
}

/// Connected components of the graph linking edges whose centroid similarity
/// is at least `theta`. Groups are listed by first edge position, members in
/// edge order. Edges with an undefined centroid stay alone.
pub fn meta_edge_grouping(h: &Hypergraph, emb: &EmbeddingMatrix, theta: f64) -> Result<Vec<Vec<EdgeId>>> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(Error::Parameter(format!("theta {theta} outside [-1,1]")));
    }
    let m = h.m();
    let cents = unit_centroids(h, emb)?;
    let links: Vec<(usize, usize)> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| {
            let cents = &cents;
            ((a + 1)..m).filter_map(move |b| match centroid_sim(h, cents, a, b) {
                Some(s) if s >= theta => Some((a, b)),
                _ => None,
            })
        })
        .collect();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut groups: Vec<Vec<EdgeId>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for i in 0..m {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(h.edges[i].id);
    }
    Ok(groups)
}

/// Replaces a meta-edge's constituents by one merged edge through the edit log.
pub fn consolidate_meta_edge<'a>(
    log: &'a mut EditLog,
    ids: &[EdgeId],
    name: Option<String>,
    expected_revision: Option<u64>,
    now_ms: i64,
) -> Result<&'a Transaction> {
    log.apply(
        &EditRequest::Merge {
            ids: ids.to_vec(),
            name,
        },
        expected_revision,
        now_ms,
    )
}
