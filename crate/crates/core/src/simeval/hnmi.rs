//! Overlapping normalized mutual information between two covers, with
//! the max-entropy normalizer.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;

fn h(w: usize, n: f64) -> f64 {
    if w == 0 {
        return 0.0;
    }
    let p = w as f64 / n;
    -p * p.log2()
}

/// Entropy of one edge viewed as a binary vertex indicator.
fn edge_entropy(size: usize, n: usize) -> f64 {
    let nf = n as f64;
    h(size, nf) + h(n - size, nf)
}

/// `H(x | y)` for one edge pair, falling back to `H(x)` when the pair fails
/// the agreement constraint `h(d) + h(a) >= h(b) + h(c)`.
fn conditional(size_x: usize, size_y: usize, d: usize, n: usize) -> f64 {
    let nf = n as f64;
    let a = n + d - size_x - size_y;
    let b = size_y - d;
    let c = size_x - d;
    let (ha, hb, hc, hd) = (h(a, nf), h(b, nf), h(c, nf), h(d, nf));
    if hd + ha >= hb + hc {
        (ha + hb + hc + hd) - (h(b + d, nf) + h(a + c, nf))
    } else {
        edge_entropy(size_x, n)
    }
}

/// `H(X|Y) = Σ_i min_j H(x_i | y_j)`.
fn cover_conditional(x: &Hypergraph, y: &Hypergraph) -> f64 {
    let n = x.n;
    let mut by_vertex: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (j, e) in y.edges.iter().enumerate() {
        for &v in &e.members {
            by_vertex[v].push(j as u32);
        }
    }
    x.edges
        .par_iter()
        .map(|xi| {
            let mut inter: HashMap<u32, usize> = HashMap::new();
            for &v in &xi.members {
                for &j in &by_vertex[v] {
                    *inter.entry(j).or_insert(0) += 1;
                }
            }
            let mut best = edge_entropy(xi.len(), n);
            for (j, yj) in y.edges.iter().enumerate() {
                let d = inter.get(&(j as u32)).copied().unwrap_or(0);
                best = best.min(conditional(xi.len(), yj.len(), d, n));
            }
            best
        })
        .sum()
}

fn cover_entropy(x: &Hypergraph) -> f64 {
    x.edges.iter().map(|e| edge_entropy(e.len(), x.n)).sum()
}

fn same_cover(x: &Hypergraph, y: &Hypergraph) -> bool {
    let mut a: Vec<&[usize]> = x.edges.iter().map(|e| e.members.as_slice()).collect();
    let mut b: Vec<&[usize]> = y.edges.iter().map(|e| e.members.as_slice()).collect();
    a.sort();
    b.sort();
    a == b
}

/// Hypergraph NMI in `[0, 1]`. Symmetric in its arguments.
///
/// When both covers carry zero entropy (every edge equals the full vertex
/// set) the value is 1 for identical covers and 0 otherwise.
pub fn hnmi(x: &Hypergraph, y: &Hypergraph) -> Result<f64> {
    if x.n != y.n {
        return Err(Error::Dimension(format!(
            "covers have {} and {} vertices",
            x.n, y.n
        )));
    }
    if x.edges.is_empty() || y.edges.is_empty() {
        return Err(Error::Validation("hNMI needs at least one edge in each cover".into()));
    }
    x.validate()?;
    y.validate()?;
    let (hx, hy) = (cover_entropy(x), cover_entropy(y));
    let norm = hx.max(hy);
    if norm == 0.0 {
        return Ok(if same_cover(x, y) { 1.0 } else { 0.0 });
    }
    let hx_y = cover_conditional(x, y);
    let hy_x = cover_conditional(y, x);
    let mutual = 0.5 * ((hx - hx_y) + (hy - hy_x));
    Ok((mutual / norm).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hg(n: usize, lists: &[&[usize]]) -> Hypergraph {
        Hypergraph::from_member_lists(n, lists.iter().map(|l| l.to_vec())).unwrap()
    }

    #[test]
    fn identity() {
        let x = hg(8, &[&[0, 1, 2], &[2, 3], &[5, 6, 7]]);
        assert!((hnmi(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_of_edges_is_irrelevant() {
        let x = hg(8, &[&[0, 1, 2], &[2, 3], &[5, 6, 7]]);
        let y = hg(8, &[&[5, 6, 7], &[0, 1, 2], &[2, 3]]);
        assert!((hnmi(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let x = hg(10, &[&[0, 1, 2, 3], &[4, 5]]);
        let y = hg(10, &[&[0, 1, 2], &[3, 4, 5, 6], &[9]]);
        let a = hnmi(&x, &y).unwrap();
        let b = hnmi(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn degenerate_full_edges() {
        let x = hg(3, &[&[0, 1, 2]]);
        let y = hg(3, &[&[0, 1, 2], &[0, 1, 2]]);
        assert_eq!(hnmi(&x, &x).unwrap(), 1.0);
        assert_eq!(hnmi(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let x = hg(3, &[&[0]]);
        assert!(matches!(hnmi(&x, &hg(4, &[&[0]])), Err(Error::Dimension(_))));
        assert!(hnmi(&x, &Hypergraph::empty(3)).is_err());
    }
}
