//! CoverEdge Similarity.
//!
//! Each ground-truth edge is covered greedily by generated edges. The first
//! pick maximizes the candidate score `c = T² / |g|` where `T` is the
//! intersection with the ground-truth edge; later picks maximize the number
//! of newly covered members and contribute `c / (|e| · k)` at step `k`.
//! The per-edge score is clamped to 1, averaged over ground-truth edges, and
//! multiplied by the fraction of generated edges used anywhere.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, Hypergraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCoverScore {
    pub gt_edge_id: EdgeId,
    /// Clamped per-edge score.
    pub score: f64,
    /// Unclamped sum of the greedy terms.
    pub raw_score: f64,
    pub selected_generated_edges: Vec<EdgeId>,
    pub covered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesReport {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub ces: f64,
    /// Whether `s` is the size-weighted average.
    pub weighted: bool,
    pub per_edge: Vec<EdgeCoverScore>,
    pub used_count: usize,
    pub generated_count: usize,
}

/// Greedy selection for one ground-truth edge, by generated-edge position.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverTrace {
    pub selected: Vec<usize>,
    pub raw_score: f64,
    pub covered: usize,
}

/// Generated edges indexed by vertex for fast intersection counting.
pub struct CoverIndex<'a> {
    gen: Vec<&'a [usize]>,
    by_vertex: Vec<Vec<u32>>,
}

impl<'a> CoverIndex<'a> {
    pub fn new(n: usize, gen: Vec<&'a [usize]>) -> Self {
        let mut by_vertex = vec![Vec::new(); n];
        for (j, g) in gen.iter().enumerate() {
            for &v in g.iter() {
                by_vertex[v].push(j as u32);
            }
        }
        CoverIndex { gen, by_vertex }
    }

    /// Runs the greedy cover of one ground-truth edge (sorted, nonempty).
    ///
    /// `occurrence` only matters for exact ties on the first pick: the
    /// `occurrence`-th tied candidate (modulo the tie count) is chosen, so the
    /// r-th copy of a repeated ground-truth edge pairs with the r-th copy of an
    /// equally good generated edge. Pass 0 for the plain lowest-index rule.
    pub fn cover(&self, target: &[usize], occurrence: usize) -> CoverTrace {
        let size = target.len();
        // For each candidate, the target-local positions it covers.
        let mut hits: HashMap<u32, Vec<u32>> = HashMap::new();
        for (local, &v) in target.iter().enumerate() {
            for &j in &self.by_vertex[v] {
                hits.entry(j).or_default().push(local as u32);
            }
        }
        if hits.is_empty() {
            return CoverTrace {
                selected: Vec::new(),
                raw_score: 0.0,
                covered: 0,
            };
        }
        let mut cands: Vec<(u32, Vec<u32>)> = hits.into_iter().collect();
        cands.sort_unstable_by_key(|(j, _)| *j);

        let gen_len = |j: u32| self.gen[j as usize].len() as u128;
        // c_a vs c_b compared exactly: T_a² |g_b| vs T_b² |g_a|.
        let cmp_c = |a: &(u32, Vec<u32>), b: &(u32, Vec<u32>)| -> Ordering {
            let (ta, tb) = (a.1.len() as u128, b.1.len() as u128);
            (ta * ta * gen_len(b.0)).cmp(&(tb * tb * gen_len(a.0)))
        };
        let c_of = |cand: &(u32, Vec<u32>)| -> f64 {
            let t = cand.1.len() as f64;
            t * t / self.gen[cand.0 as usize].len() as f64
        };

        // First pick: max c, then smaller |g|, then lower index.
        let first_key = |a: &(u32, Vec<u32>), b: &(u32, Vec<u32>)| -> Ordering {
            cmp_c(a, b).then_with(|| gen_len(b.0).cmp(&gen_len(a.0)))
        };
        let mut best = 0;
        for idx in 1..cands.len() {
            if first_key(&cands[idx], &cands[best]) == Ordering::Greater {
                best = idx;
            }
        }
        if occurrence > 0 {
            let tied: Vec<usize> = (0..cands.len())
                .filter(|&idx| first_key(&cands[idx], &cands[best]) == Ordering::Equal)
                .collect();
            best = tied[occurrence % tied.len()];
        }

        let mut covered = vec![false; size];
        let mut covered_count = 0;
        let mut used = vec![false; cands.len()];
        let mut selected = vec![cands[best].0 as usize];
        let mut raw = c_of(&cands[best]) / size as f64;
        used[best] = true;
        for &p in &cands[best].1 {
            covered[p as usize] = true;
            covered_count += 1;
        }

        let mut step = 1usize;
        while covered_count < size {
            // Max newly covered, then higher c, then lower index.
            let mut pick: Option<(usize, usize)> = None;
            for (idx, cand) in cands.iter().enumerate() {
                if used[idx] {
                    continue;
                }
                let fresh = cand.1.iter().filter(|&&p| !covered[p as usize]).count();
                if fresh == 0 {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some((bi, bf)) => match fresh.cmp(&bf) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => cmp_c(cand, &cands[bi]) == Ordering::Greater,
                    },
                };
                if better {
                    pick = Some((idx, fresh));
                }
            }
            let Some((idx, fresh)) = pick else { break };
            step += 1;
            used[idx] = true;
            selected.push(cands[idx].0 as usize);
            raw += c_of(&cands[idx]) / (size as f64 * step as f64);
            for &p in &cands[idx].1 {
                covered[p as usize] = true;
            }
            covered_count += fresh;
        }
        CoverTrace {
            selected,
            raw_score: raw,
            covered: covered_count,
        }
    }
}

fn check_inputs(gt: &Hypergraph, gen: &Hypergraph) -> Result<()> {
    if gt.n != gen.n {
        return Err(Error::Dimension(format!(
            "ground truth has {} vertices, generated hypergraph has {}",
            gt.n, gen.n
        )));
    }
    if gt.edges.is_empty() {
        return Err(Error::Validation("ground truth has no edges".into()));
    }
    if gen.edges.is_empty() {
        return Err(Error::Validation("generated hypergraph has no edges".into()));
    }
    gt.validate()?;
    gen.validate()
}

/// For each ground-truth edge, how many earlier edges have identical members.
fn occurrence_ranks(gt: &Hypergraph) -> Vec<usize> {
    let mut seen: HashMap<&[usize], usize> = HashMap::new();
    gt.edges
        .iter()
        .map(|e| {
            let c = seen.entry(e.members.as_slice()).or_insert(0);
            let r = *c;
            *c += 1;
            r
        })
        .collect()
}

fn score_edges(gt: &Hypergraph, gen: &Hypergraph) -> Result<(Vec<EdgeCoverScore>, usize)> {
    check_inputs(gt, gen)?;
    let index = CoverIndex::new(gen.n, gen.edges.iter().map(|g| g.members.as_slice()).collect());
    let occ = occurrence_ranks(gt);
    let traces: Vec<CoverTrace> = gt
        .edges
        .par_iter()
        .zip(occ.par_iter())
        .map(|(e, &o)| index.cover(&e.members, o))
        .collect();
    let used: BTreeSet<usize> = traces.iter().flat_map(|t| t.selected.iter().copied()).collect();
    let per_edge = gt
        .edges
        .iter()
        .zip(traces)
        .map(|(e, t)| EdgeCoverScore {
            gt_edge_id: e.id,
            score: t.raw_score.min(1.0),
            raw_score: t.raw_score,
            selected_generated_edges: t.selected.iter().map(|&j| gen.edges[j].id).collect(),
            covered_fraction: t.covered as f64 / e.len() as f64,
        })
        .collect();
    Ok((per_edge, used.len()))
}

fn report(per_edge: Vec<EdgeCoverScore>, s: f64, used: usize, m: usize, weighted: bool) -> CesReport {
    let r = used as f64 / m as f64;
    CesReport {
        s,
        r,
        ces: r * s,
        weighted,
        per_edge,
        used_count: used,
        generated_count: m,
    }
}

/// CoverEdge Similarity of `gen` against ground truth `gt`.
pub fn ces(gt: &Hypergraph, gen: &Hypergraph) -> Result<CesReport> {
    let (per_edge, used) = score_edges(gt, gen)?;
    let s = per_edge.iter().map(|p| p.score).sum::<f64>() / per_edge.len() as f64;
    Ok(report(per_edge, s, used, gen.m(), false))
}

/// CES with ground-truth edges weighted by their size.
pub fn ces_weighted(gt: &Hypergraph, gen: &Hypergraph) -> Result<CesReport> {
    let (per_edge, used) = score_edges(gt, gen)?;
    let total: usize = gt.edges.iter().map(|e| e.len()).sum();
    let s = gt
        .edges
        .iter()
        .zip(&per_edge)
        .map(|(e, p)| e.len() as f64 * p.score)
        .sum::<f64>()
        / total as f64;
    Ok(report(per_edge, s, used, gen.m(), true))
}
