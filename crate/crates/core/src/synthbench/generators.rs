use rand::seq::index;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus, Hyperedge, Hypergraph};
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenModel {
    /// Uniform random k-subsets.
    Er,
    /// Rank-weighted preferential attachment.
    Sf,
    /// Ring lattice with random rewiring.
    Ws,
}

impl GenModel {
    pub const ALL: [GenModel; 3] = [GenModel::Er, GenModel::Sf, GenModel::Ws];

    pub fn name(self) -> &'static str {
        match self {
            GenModel::Er => "er",
            GenModel::Sf => "sf",
            GenModel::Ws => "ws",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub model: GenModel,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Rewiring probability, only read by the lattice model.
    pub p_rw: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(model: GenModel, n: usize, m: usize, k: usize, seed: u64) -> Self {
        GenSpec {
            model,
            n,
            m,
            k,
            p_rw: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::Parameter(format!(
                "edge cardinality {} must be in 1..={}",
                self.k, self.n
            )));
        }
        if self.m == 0 {
            return Err(Error::Parameter("need at least one hyperedge".into()));
        }
        if !(0.0..=1.0).contains(&self.p_rw) {
            return Err(Error::Parameter(format!("rewire probability {} outside [0,1]", self.p_rw)));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Hypergraph> {
        match self.model {
            GenModel::Er => gen_er(self),
            GenModel::Sf => gen_sf(self),
            GenModel::Ws => gen_ws(self),
        }
    }
}

pub(crate) fn synthetic_edge(j: usize, members: Vec<usize>) -> Hyperedge {
    Hyperedge::new(
        EdgeId(j as u64),
        format!("edge-{j}"),
        members,
        EdgeStatus::Original,
        EdgeOrigin::Model,
    )
}

pub(crate) fn uniform_subset(rng: &mut SeededRng, n: usize, k: usize) -> Vec<usize> {
    let mut v = index::sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// `m` independent uniform `k`-subsets of `0..n` (duplicates possible).
pub fn gen_er(spec: &GenSpec) -> Result<Hypergraph> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let edges = (0..spec.m)
        .map(|j| synthetic_edge(j, uniform_subset(&mut rng, spec.n, spec.k)))
        .collect();
    Ok(Hypergraph { n: spec.n, edges })
}

/// Edges are added one at a time; each draws `k` distinct vertices with
/// probability proportional to `1 / rank`, where vertices are ranked by
/// current degree (descending) with ties broken by vertex index.
pub fn gen_sf(spec: &GenSpec) -> Result<Hypergraph> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let n = spec.n;
    let mut degree = vec![0usize; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut edges = Vec::with_capacity(spec.m);
    for j in 0..spec.m {
        order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
        let mut weights: Vec<f64> = (0..n).map(|r| 1.0 / (r + 1) as f64).collect();
        let mut members = Vec::with_capacity(spec.k);
        for _ in 0..spec.k {
            let total: f64 = weights.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (r, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                if target < w {
                    pick = r;
                    break;
                }
                target -= w;
                pick = r;
            }
            weights[pick] = 0.0;
            members.push(order[pick]);
        }
        for &v in &members {
            degree[v] += 1;
        }
        edges.push(synthetic_edge(j, members));
    }
    Ok(Hypergraph { n, edges })
}

/// Ring lattice of `m` edges of `k` consecutive vertices, edge `j` starting at
/// `⌊j·n/m⌋`, each independently replaced by a uniform subset with
/// probability `p_rw`.
pub fn gen_ws(spec: &GenSpec) -> Result<Hypergraph> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let (n, m, k) = (spec.n, spec.m, spec.k);
    let edges = (0..m)
        .map(|j| {
            let members = if rng.random::<f64>() < spec.p_rw {
                uniform_subset(&mut rng, n, k)
            } else {
                let start = j * n / m;
                (0..k).map(|o| (start + o) % n).collect()
            };
            synthetic_edge(j, members)
        })
        .collect();
    Ok(Hypergraph { n, edges })
}

/// Half the edges have 100 members and the other half 10, all uniform.
/// With odd `m` the extra edge is small.
pub fn gen_imbalanced(n: usize, m: usize, seed: u64) -> Result<Hypergraph> {
    if n < 100 {
        return Err(Error::Parameter(format!("imbalanced generator needs n >= 100, got {n}")));
    }
    if m == 0 {
        return Err(Error::Parameter("need at least one hyperedge".into()));
    }
    let mut rng = rng::seeded(seed);
    let large = m / 2;
    let edges = (0..m)
        .map(|j| {
            let k = if j < large { 100 } else { 10 };
            synthetic_edge(j, uniform_subset(&mut rng, n, k))
        })
        .collect();
    Ok(Hypergraph { n, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_only_one_subset() {
        let h = gen_er(&GenSpec::new(GenModel::Er, 4, 3, 4, 1)).unwrap();
        assert_eq!(h.m(), 3);
        assert!(h.edges.iter().all(|e| e.members == vec![0, 1, 2, 3]));
    }

    #[test]
    fn generators_are_deterministic() {
        for model in GenModel::ALL {
            let spec = GenSpec::new(model, 99, 50, 4, 42);
            let a = spec.generate().unwrap();
            let b = spec.generate().unwrap();
            assert_eq!(a, b);
            assert_eq!(a.m(), 50);
            assert!(a.edges.iter().all(|e| e.len() == 4));
            let other = GenSpec { seed: 43, ..spec }.generate().unwrap();
            if model != GenModel::Ws {
                assert_ne!(a, other);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_er(&GenSpec::new(GenModel::Er, 3, 2, 4, 0)).is_err());
        assert!(gen_sf(&GenSpec::new(GenModel::Sf, 3, 0, 2, 0)).is_err());
        let mut s = GenSpec::new(GenModel::Ws, 10, 2, 2, 0);
        s.p_rw = 1.5;
        assert!(gen_ws(&s).is_err());
        assert!(gen_imbalanced(99, 10, 0).is_err());
    }

    #[test]
    fn ws_without_rewiring_is_a_lattice() {
        let mut spec = GenSpec::new(GenModel::Ws, 20, 10, 3, 5);
        spec.p_rw = 0.0;
        let h = gen_ws(&spec).unwrap();
        for (j, e) in h.edges.iter().enumerate() {
            let start = j * 20 / 10;
            let mut expect: Vec<usize> = (0..3).map(|o| (start + o) % 20).collect();
            expect.sort();
            assert_eq!(e.members, expect);
        }
        // wrap-around edge
        let mut spec = GenSpec::new(GenModel::Ws, 5, 5, 3, 0);
        spec.p_rw = 0.0;
        assert_eq!(gen_ws(&spec).unwrap().edges[4].members, vec![0, 1, 4]);
    }

    #[test]
    fn imbalanced_sizes() {
        let h = gen_imbalanced(300, 10, 3).unwrap();
        assert_eq!(h.edges.iter().filter(|e| e.len() == 100).count(), 5);
        assert_eq!(h.edges.iter().filter(|e| e.len() == 10).count(), 5);
        assert_eq!(h, gen_imbalanced(300, 10, 3).unwrap());
    }

    #[test]
    fn sf_first_edge_follows_rank_weights() {
        // All degrees are zero, so ranks follow vertex index: vertex 0 has the
        // largest weight and should appear far more often than vertex n-1.
        let (mut first, mut last) = (0, 0);
        for seed in 0..2000 {
            let h = gen_sf(&GenSpec::new(GenModel::Sf, 20, 1, 2, seed)).unwrap();
            first += h.edges[0].contains(0) as usize;
            last += h.edges[0].contains(19) as usize;
        }
        assert!(first > 3 * last, "first={first} last={last}");
    }
}
