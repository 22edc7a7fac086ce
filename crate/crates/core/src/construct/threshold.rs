use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus, Hyperedge, Hypergraph};

use super::membership::SoftMembership;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub t: f64,
    #[serde(default = "default_min_edge_size")]
    pub min_edge_size: usize,
}

fn default_min_edge_size() -> usize {
    1
}

impl ThresholdPolicy {
    pub fn new(t: f64) -> Self {
        ThresholdPolicy { t, min_edge_size: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::Parameter(format!("threshold {} outside (0,1]", self.t)));
        }
        if self.min_edge_size == 0 {
            return Err(Error::Parameter("min_edge_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Image `i` joins edge `j` when `degree[i][j] ≥ t`. Column `j` becomes the
/// edge with id `j` named `cluster-{j}`; columns with fewer than
/// `min_edge_size` members are dropped. Images may end up in no edge.
pub fn threshold_membership(soft: &SoftMembership, policy: &ThresholdPolicy) -> Result<Hypergraph> {
    policy.validate()?;
    let k = soft.k();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, row) in soft.rows().enumerate() {
        for (j, &u) in row.iter().enumerate() {
            if u as f64 >= policy.t {
                members[j].push(i);
            }
        }
    }
    let edges = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| m.len() >= policy.min_edge_size)
        .map(|(j, m)| Hyperedge {
            id: EdgeId(j as u64),
            name: format!("cluster-{j}"),
            members: m,
            status: EdgeStatus::Original,
            origin: EdgeOrigin::Model,
        })
        .collect();
    Ok(Hypergraph { n: soft.n(), edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soft(rows: &[Vec<f64>]) -> SoftMembership {
        SoftMembership::from_rows(rows, "t").unwrap()
    }

    #[test]
    fn direct_thresholding() {
        let h = threshold_membership(&soft(&[vec![0.6, 0.4], vec![0.5, 0.5]]), &ThresholdPolicy::new(0.5)).unwrap();
        assert_eq!(h.edges[0].members, vec![0, 1]);
        assert_eq!(h.edges[1].members, vec![1]);
        assert_eq!(h.edges[1].name, "cluster-1");
        h.validate().unwrap();
    }

    #[test]
    fn top_threshold_can_empty() {
        let h = threshold_membership(&soft(&[vec![0.6, 0.4], vec![0.7, 0.3]]), &ThresholdPolicy::new(1.0)).unwrap();
        assert_eq!(h.m(), 0);
        assert_eq!(h.uncovered_count(), 2);
    }

    #[test]
    fn overlapping_rows() {
        let s = soft(&[vec![0.45, 0.55], vec![0.9, 0.1], vec![0.42, 0.58]]);
        let h = threshold_membership(&s, &ThresholdPolicy::new(0.4)).unwrap();
        assert_eq!(h.edges[0].members, vec![0, 1, 2]);
        assert_eq!(h.edges[1].members, vec![0, 2]);
    }

    #[test]
    fn min_size_and_bad_policy() {
        let s = soft(&[vec![0.9, 0.1], vec![0.8, 0.2]]);
        let h = threshold_membership(&s, &ThresholdPolicy { t: 0.5, min_edge_size: 2 }).unwrap();
        assert_eq!(h.m(), 1);
        assert!(threshold_membership(&s, &ThresholdPolicy::new(0.0)).is_err());
        assert!(threshold_membership(&s, &ThresholdPolicy::new(1.5)).is_err());
    }
}
