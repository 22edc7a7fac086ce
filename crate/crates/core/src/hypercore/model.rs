use std::collections::{BTreeSet, HashMap};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable hyperedge identifier. Never reused within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Original,
    Modified,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Model,
    Metadata,
    User,
}

/// A named group of images. `members` is kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: EdgeId,
    pub name: String,
    pub members: Vec<usize>,
    pub status: EdgeStatus,
    pub origin: EdgeOrigin,
}

impl Hyperedge {
    pub fn new(
        id: EdgeId,
        name: impl Into<String>,
        members: impl IntoIterator<Item = usize>,
        status: EdgeStatus,
        origin: EdgeOrigin,
    ) -> Self {
        Hyperedge {
            id,
            name: name.into(),
            members: normalize_members(members),
            status,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, image: usize) -> bool {
        self.members.binary_search(&image).is_ok()
    }
}

pub(crate) fn normalize_members(members: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = members.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Vertex set `0..n` plus an ordered list of hyperedges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub n: usize,
    pub edges: Vec<Hyperedge>,
}

impl Hypergraph {
    /// Builds and validates a hypergraph.
    pub fn new(n: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        let h = Hypergraph { n, edges };
        h.validate()?;
        Ok(h)
    }

    pub fn empty(n: usize) -> Self {
        Hypergraph { n, edges: Vec::new() }
    }

    /// Convenience constructor from plain member lists. Edge `j` gets id `j`,
    /// name `edge-j`, status original and origin model.
    pub fn from_member_lists<I, E>(n: usize, lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: IntoIterator<Item = usize>,
    {
        let edges = lists
            .into_iter()
            .enumerate()
            .map(|(j, m)| {
                Hyperedge::new(
                    EdgeId(j as u64),
                    format!("edge-{j}"),
                    m,
                    EdgeStatus::Original,
                    EdgeOrigin::Model,
                )
            })
            .collect();
        Hypergraph::new(n, edges)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if !seen.insert(e.id) {
                return Err(Error::Validation(format!("duplicate edge id {}", e.id)));
            }
            if e.members.is_empty() {
                return Err(Error::Validation(format!("edge {} is empty", e.id)));
            }
            if e.members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "edge {} members not sorted and unique",
                    e.id
                )));
            }
            if let Some(&last) = e.members.last() {
                if last >= self.n {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex set",
                        index: last,
                        len: self.n,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Hyperedge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> Option<&mut Hyperedge> {
        self.edges.iter_mut().find(|e| e.id == id)
    }

    pub fn position(&self, id: EdgeId) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn require(&self, id: EdgeId) -> Result<&Hyperedge> {
        self.edge(id).ok_or_else(|| Error::not_found("edge", id))
    }

    /// Smallest id strictly greater than every id in use.
    pub fn next_free_id(&self) -> EdgeId {
        EdgeId(self.edges.iter().map(|e| e.id.0 + 1).max().unwrap_or(0))
    }

    /// Binary incidence matrix, `n × m`, columns in edge order.
    pub fn incidence(&self) -> Array2<u8> {
        let mut h = Array2::zeros((self.n, self.edges.len()));
        for (j, e) in self.edges.iter().enumerate() {
            for &i in &e.members {
                h[[i, j]] = 1;
            }
        }
        h
    }

    /// Rebuilds edge member sets from an incidence matrix. Empty columns are
    /// rejected since hyperedges are nonempty.
    pub fn from_incidence(h: &Array2<u8>) -> Result<Self> {
        let (n, m) = h.dim();
        Hypergraph::from_member_lists(
            n,
            (0..m).map(|j| (0..n).filter(|&i| h[[i, j]] != 0).collect::<Vec<_>>()),
        )
    }

    /// For each vertex, the positions (not ids) of the edges containing it.
    pub fn vertex_index(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.n];
        for (j, e) in self.edges.iter().enumerate() {
            for &i in &e.members {
                idx[i].push(j);
            }
        }
        idx
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            for &i in &e.members {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Number of vertices not covered by any edge.
    pub fn uncovered_count(&self) -> usize {
        self.degrees().iter().filter(|&&d| d == 0).count()
    }

    pub fn id_map(&self) -> HashMap<EdgeId, usize> {
        self.edges.iter().enumerate().map(|(j, e)| (e.id, j)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut h: Hypergraph = serde_json::from_str(s)?;
        for e in &mut h.edges {
            e.members = normalize_members(std::mem::take(&mut e.members));
        }
        h.validate()?;
        Ok(h)
    }

    pub fn read_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Hypergraph::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Size of the intersection of two sorted member lists.
pub fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Harmonic mean of the two containment ratios, `2|A∩B| / (|A|+|B|)`.
pub fn harmonic_overlap(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = intersection_size(a, b);
    2.0 * inter as f64 / (a.len() + b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incidence_small() {
        let h = Hypergraph::from_member_lists(3, [vec![0, 1], vec![1, 2]]).unwrap();
        let inc = h.incidence();
        assert_eq!(inc, ndarray::arr2(&[[1, 0], [1, 1], [0, 1]]));
    }

    #[test]
    fn incidence_empty_and_full() {
        let h = Hypergraph::empty(4);
        assert_eq!(h.incidence().dim(), (4, 0));
        let full = Hypergraph::from_member_lists(4, [0..4]).unwrap();
        assert!(full.incidence().iter().all(|&x| x == 1));
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(intersection_size(&[1, 2, 3], &[3, 4]), 1);
        assert_eq!(intersection_size(&[1, 2, 3], &[1, 2, 3]), 3);
        assert_eq!(intersection_size(&[1, 2], &[3, 4]), 0);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_overlap(&[1, 2, 3, 4], &[3, 4, 5, 6]), 0.5);
        assert_eq!(harmonic_overlap(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(harmonic_overlap(&[1, 2], &[3]), 0.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            Hypergraph::from_member_lists(2, [vec![0, 2]]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            Hypergraph::from_member_lists(2, [Vec::<usize>::new()]),
            Err(Error::Validation(_))
        ));
        let e = Hyperedge::new(EdgeId(1), "a", [0], EdgeStatus::Original, EdgeOrigin::User);
        assert!(Hypergraph::new(2, vec![e.clone(), e]).is_err());
    }

    #[test]
    fn json_format() {
        let h = Hypergraph::from_member_lists(3, [vec![2, 0]]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&h.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["edges"][0]["members"], serde_json::json!([0, 2]));
        assert_eq!(v["edges"][0]["status"], "original");
        assert_eq!(v["edges"][0]["origin"], "model");
        assert_eq!(Hypergraph::from_json(&h.to_json().unwrap()).unwrap(), h);
    }
}
