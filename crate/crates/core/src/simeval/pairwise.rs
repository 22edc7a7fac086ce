use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;

use super::{ces, hnmi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMeasure {
    /// Mean of CES in both directions.
    CesSym,
    Hnmi,
}

impl PairMeasure {
    pub fn name(self) -> &'static str {
        match self {
            PairMeasure::CesSym => "ces_sym",
            PairMeasure::Hnmi => "hnmi",
        }
    }

    pub fn eval(self, a: &Hypergraph, b: &Hypergraph) -> Result<f64> {
        match self {
            PairMeasure::CesSym => Ok(0.5 * (ces(a, b)?.ces + ces(b, a)?.ces)),
            PairMeasure::Hnmi => hnmi(a, b),
        }
    }
}

/// Symmetric similarity matrix over a list of hypergraphs sharing `n`.
pub fn pairwise_similarity_matrix(graphs: &[Hypergraph], measure: PairMeasure) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = graphs.first() {
        if let Some(bad) = graphs.iter().position(|g| g.n != first.n) {
            return Err(Error::Dimension(format!(
                "graph {bad} has {} vertices, graph 0 has {}",
                graphs[bad].n, first.n
            )));
        }
    }
    let k = graphs.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| measure.eval(&graphs[i], &graphs[j]))
        .collect::<Result<_>>()?;
    let mut m = vec![vec![0.0; k]; k];
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[i][j] = v;
        m[j][i] = v;
    }
    Ok(m)
}
