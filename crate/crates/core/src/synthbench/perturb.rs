use rand::seq::{index, SliceRandom};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::hypercore::{normalize_members, Hyperedge, Hypergraph};
use crate::rng;

use super::generators::uniform_subset;

/// `⌊fraction · m⌋`, tolerant of values like `0.29 · 100 = 28.999…`.
pub(crate) fn fraction_count(fraction: f64, m: usize) -> usize {
    ((fraction * m as f64) + 1e-9).floor().min(m as f64) as usize
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Parameter(format!("fraction {fraction} outside [0,1]")));
    }
    Ok(())
}

/// Chooses `⌊fraction · |eligible|⌋` positions out of `eligible`.
fn choose(eligible: &[usize], fraction: f64, rng: &mut rng::SeededRng) -> Vec<usize> {
    let count = fraction_count(fraction, eligible.len());
    let mut picked: Vec<usize> = index::sample(rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Replaces a fraction of the edges listed in `eligible` (positions) by
/// uniform random edges of the same size.
pub fn perturb_replace_among(h: &Hypergraph, eligible: &[usize], fraction: f64, seed: u64) -> Result<Hypergraph> {
    check_fraction(fraction)?;
    let mut rng = rng::seeded(seed);
    let mut out = h.clone();
    for pos in choose(eligible, fraction, &mut rng) {
        let size = out.edges[pos].len();
        out.edges[pos].members = uniform_subset(&mut rng, h.n, size);
    }
    Ok(out)
}

/// Replaces `⌊fraction · m⌋` uniformly chosen edges by uniform random edges of
/// the same cardinality.
pub fn perturb_replace(h: &Hypergraph, fraction: f64, seed: u64) -> Result<Hypergraph> {
    let all: Vec<usize> = (0..h.m()).collect();
    perturb_replace_among(h, &all, fraction, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewireOutcome {
    pub graph: Hypergraph,
    /// Selected edges that span every vertex and so cannot be rewired.
    pub skipped: usize,
}

/// In `⌊fraction · m⌋` chosen edges, swaps one random member for a random
/// vertex outside the edge.
pub fn perturb_rewire(h: &Hypergraph, fraction: f64, seed: u64) -> Result<RewireOutcome> {
    check_fraction(fraction)?;
    let mut rng = rng::seeded(seed);
    let all: Vec<usize> = (0..h.m()).collect();
    let mut out = h.clone();
    let mut skipped = 0;
    for pos in choose(&all, fraction, &mut rng) {
        let edge = &mut out.edges[pos];
        if edge.len() >= h.n {
            skipped += 1;
            continue;
        }
        let drop = rng.random_range(0..edge.len());
        // uniform over the n - |e| outsiders
        let mut slot = rng.random_range(0..h.n - edge.len());
        let mut replacement = 0;
        for v in 0..h.n {
            if edge.contains(v) {
                continue;
            }
            if slot == 0 {
                replacement = v;
                break;
            }
            slot -= 1;
        }
        edge.members.remove(drop);
        edge.members = normalize_members(edge.members.iter().copied().chain([replacement]));
    }
    if skipped > 0 {
        log::warn!("rewire skipped {skipped} edges that contain every vertex");
    }
    Ok(RewireOutcome { graph: out, skipped })
}

/// Keeps every edge and, for each edge with at least `r` members, appends
/// `r` disjoint parts of a shuffled copy whose sizes differ by at most one.
/// `r = 1` returns the input unchanged.
pub fn perturb_oversegment(h: &Hypergraph, r: usize, seed: u64) -> Result<Hypergraph> {
    if r == 0 {
        return Err(Error::Parameter("oversegmentation factor must be >= 1".into()));
    }
    let mut out = h.clone();
    if r == 1 {
        return Ok(out);
    }
    let mut rng = rng::seeded(seed);
    let mut next = h.next_free_id().0;
    for parent in &h.edges {
        let c = parent.len();
        if c < r {
            continue;
        }
        let mut shuffled = parent.members.clone();
        shuffled.shuffle(&mut rng);
        for part in 0..r {
            let (lo, hi) = (part * c / r, (part + 1) * c / r);
            out.edges.push(Hyperedge::new(
                crate::hypercore::EdgeId(next),
                format!("{}/part-{part}", parent.name),
                shuffled[lo..hi].iter().copied(),
                parent.status,
                parent.origin,
            ));
            next += 1;
        }
    }
    Ok(out)
}
