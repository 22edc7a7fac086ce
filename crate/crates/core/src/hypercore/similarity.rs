use crate::error::{Error, Result};

use super::collection::EmbeddingMatrix;
use super::model::Hyperedge;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of two vectors; `None` when either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        return None;
    }
    Some((dot(a, b) / denom).clamp(-1.0, 1.0))
}

pub(crate) fn cosine_f32(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

/// Mean of the given embedding rows.
pub fn mean_of_rows(ids: &[usize], emb: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::Validation("cannot average an empty set of rows".into()));
    }
    let mut acc = vec![0f64; emb.d()];
    for &i in ids {
        for (a, &x) in acc.iter_mut().zip(emb.try_row(i)?) {
            *a += x as f64;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

/// Arithmetic mean of the member embeddings.
pub fn edge_centroid(edge: &Hyperedge, emb: &EmbeddingMatrix) -> Result<Vec<f64>> {
    mean_of_rows(&edge.members, emb)
}

/// Cosine similarity of two images.
pub fn sim_images(i: usize, j: usize, emb: &EmbeddingMatrix) -> Result<f64> {
    let (a, b) = (emb.try_row(i)?, emb.try_row(j)?);
    if i == j {
        return Ok(1.0);
    }
    Ok(cosine_f32(a, b))
}

/// Cosine similarity between two hyperedge centroids.
pub fn sim_edges(a: &Hyperedge, b: &Hyperedge, emb: &EmbeddingMatrix) -> Result<f64> {
    let ca = edge_centroid(a, emb)?;
    if a.members == b.members {
        return if norm(&ca) == 0.0 {
            Err(Error::UndefinedSimilarity(format!("edge {} has a zero centroid", a.id)))
        } else {
            Ok(1.0)
        };
    }
    let cb = edge_centroid(b, emb)?;
    cosine(&ca, &cb).ok_or_else(|| {
        Error::UndefinedSimilarity(format!("edge {} or {} has a zero centroid", a.id, b.id))
    })
}

/// Population standard deviation of member-to-centroid cosine similarities.
pub fn edge_dispersion(edge: &Hyperedge, emb: &EmbeddingMatrix) -> Result<f64> {
    if edge.len() <= 1 {
        edge_centroid(edge, emb)?;
        return Ok(0.0);
    }
    let c = edge_centroid(edge, emb)?;
    let cn = norm(&c);
    if cn == 0.0 {
        // Members cancel out exactly; similarity to the centroid is undefined for all.
        return Ok(0.0);
    }
    let sims: Vec<f64> = edge
        .members
        .iter()
        .map(|&i| {
            let row = emb.row(i);
            let (mut ab, mut aa) = (0f64, 0f64);
            for (&x, &y) in row.iter().zip(&c) {
                ab += x as f64 * y;
                aa += (x as f64) * (x as f64);
            }
            ab / (aa.sqrt() * cn)
        })
        .collect();
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let var = sims.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sims.len() as f64;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus};

    fn edge(members: &[usize]) -> Hyperedge {
        Hyperedge::new(EdgeId(0), "e", members.iter().copied(), EdgeStatus::Original, EdgeOrigin::Model)
    }

    fn emb(rows: &[[f64; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows, "t").unwrap()
    }

    #[test]
    fn centroid_examples() {
        let e = emb(&[[1.0, 0.0], [0.0, 1.0], [0.3, 0.3]]);
        assert_eq!(edge_centroid(&edge(&[0]), &e).unwrap(), vec![1.0, 0.0]);
        assert_eq!(edge_centroid(&edge(&[0, 1]), &e).unwrap(), vec![0.5, 0.5]);
        let same = emb(&[[0.25, 2.0]; 4]);
        assert_eq!(edge_centroid(&edge(&[0, 1, 2, 3]), &same).unwrap(), vec![0.25, 2.0]);
        assert!(matches!(
            edge_centroid(&edge(&[7]), &e),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn image_similarity_examples() {
        let e = emb(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(sim_images(0, 3, &e).unwrap(), 1.0);
        assert_eq!(sim_images(0, 1, &e).unwrap(), 0.0);
        assert_eq!(sim_images(0, 2, &e).unwrap(), -1.0);
    }

    #[test]
    fn edge_similarity_examples() {
        let e = emb(&[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]);
        let a = edge(&[0, 2]);
        assert!((sim_edges(&a, &a, &e).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sim_edges(&edge(&[0]), &edge(&[1]), &e).unwrap(), 0.0);
        assert!(
            (sim_edges(&edge(&[1]), &edge(&[2]), &e).unwrap() - sim_images(1, 2, &e).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn zero_centroid_is_an_error() {
        let e = emb(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            sim_edges(&edge(&[0, 1]), &edge(&[2]), &e),
            Err(Error::UndefinedSimilarity(_))
        ));
    }

    #[test]
    fn dispersion_examples() {
        let e = emb(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(edge_dispersion(&edge(&[1]), &e).unwrap(), 0.0);
        assert_eq!(edge_dispersion(&edge(&[0, 2, 3]), &e).unwrap(), 0.0);
        assert!(edge_dispersion(&edge(&[0, 1]), &e).unwrap().abs() < 1e-12);
        // three at (1,0), one at (0,1): sims to centroid differ, positive spread
        assert!(edge_dispersion(&edge(&[0, 1, 2, 3]), &e).unwrap() > 0.1);
    }
}
