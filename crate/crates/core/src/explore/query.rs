use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{mean_of_rows, norm, EdgeId, EmbeddingMatrix, Hypergraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Images,
    Edge,
    Roi,
    Clipboard,
    Text,
}

/// What to search with. Image and edge queries resolve against the primary
/// embeddings; external vectors come from the embedding sidecar and live in
/// the query space when one is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QueryInput {
    Images { images: Vec<usize> },
    Edge { edge: EdgeId },
    Roi { vector: Vec<f64> },
    Clipboard { vector: Vec<f64> },
    Text { vector: Vec<f64> },
}

impl QueryInput {
    pub fn mode(&self) -> QueryMode {
        match self {
            QueryInput::Images { .. } => QueryMode::Images,
            QueryInput::Edge { .. } => QueryMode::Edge,
            QueryInput::Roi { .. } => QueryMode::Roi,
            QueryInput::Clipboard { .. } => QueryMode::Clipboard,
            QueryInput::Text { .. } => QueryMode::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub image_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_tag: QueryMode,
    pub ranked: Vec<QueryHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPage {
    pub query_tag: QueryMode,
    /// Hits left after filtering.
    pub total: usize,
    pub items: Vec<QueryHit>,
    pub next_cursor: Option<usize>,
}

impl QueryResult {
    /// Slice of the ranking starting at `cursor`, after dropping images
    /// rejected by `keep`.
    pub fn page(&self, cursor: usize, limit: usize, keep: impl Fn(usize) -> bool) -> QueryPage {
        let kept: Vec<&QueryHit> = self.ranked.iter().filter(|h| keep(h.image_id)).collect();
        let end = cursor.saturating_add(limit).min(kept.len());
        let items: Vec<QueryHit> = kept.get(cursor..end).unwrap_or(&[]).iter().map(|h| **h).collect();
        QueryPage {
            query_tag: self.query_tag,
            total: kept.len(),
            items,
            next_cursor: (end < kept.len()).then_some(end),
        }
    }
}

/// Ranks every image by cosine to the query vector. Ties put query members
/// first, then lower ids; a member identical to the query scores exactly 1.
pub fn query(
    input: &QueryInput,
    h: &Hypergraph,
    primary: &EmbeddingMatrix,
    query_space: Option<&EmbeddingMatrix>,
) -> Result<QueryResult> {
    let (space, q, members): (&EmbeddingMatrix, Vec<f64>, Vec<usize>) = match input {
        QueryInput::Images { images } => {
            if images.is_empty() {
                return Err(Error::Validation("image query needs at least one image".into()));
            }
            if let Some(&bad) = images.iter().find(|&&i| i >= primary.n()) {
                return Err(Error::not_found("image", bad));
            }
            let mut m = images.clone();
            m.sort_unstable();
            m.dedup();
            (primary, mean_of_rows(&m, primary)?, m)
        }
        QueryInput::Edge { edge } => {
            let e = h.require(*edge)?;
            (primary, mean_of_rows(&e.members, primary)?, e.members.clone())
        }
        QueryInput::Roi { vector } | QueryInput::Clipboard { vector } | QueryInput::Text { vector } => {
            let space = query_space.unwrap_or(primary);
            if vector.len() != space.d() {
                return Err(Error::QuerySpace {
                    expected: space.d(),
                    got: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("query vector has non-finite entries".into()));
            }
            (space, vector.clone(), Vec::new())
        }
    };
    let qn = norm(&q);
    if qn == 0.0 {
        return Err(Error::UndefinedSimilarity("query vector has zero norm".into()));
    }
    let q: Vec<f64> = q.iter().map(|x| x / qn).collect();
    let mut is_member = vec![false; space.n()];
    members.iter().for_each(|&i| is_member[i] = true);
    let single = (members.len() == 1).then(|| members[0]);

    let mut ranked: Vec<QueryHit> = (0..space.n())
        .into_par_iter()
        .map(|i| {
            let score = if Some(i) == single {
                1.0
            } else {
                let r = space.row(i);
                let (mut dot, mut rr) = (0.0f64, 0.0f64);
                for (&x, &y) in r.iter().zip(&q) {
                    let x = x as f64;
                    dot += x * y;
                    rr += x * x;
                }
                (dot / rr.sqrt()).clamp(-1.0, 1.0)
            };
            QueryHit { image_id: i, score }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(is_member[b.image_id].cmp(&is_member[a.image_id]))
            .then(a.image_id.cmp(&b.image_id))
    });
    Ok(QueryResult {
        query_tag: input.mode(),
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Hypergraph, EmbeddingMatrix) {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, (i as f64 * 0.9).sin(), (i as f64 * 0.4).cos()]).collect();
        let h = Hypergraph::from_member_lists(20, [vec![3, 4]]).unwrap();
        (h, EmbeddingMatrix::from_rows(&rows, "t").unwrap())
    }

    #[test]
    fn single_image_ranks_itself_first() {
        let (h, emb) = fixture();
        for i in 0..20 {
            let r = query(&QueryInput::Images { images: vec![i] }, &h, &emb, None).unwrap();
            assert_eq!(r.ranked[0], QueryHit { image_id: i, score: 1.0 });
            let mut ids: Vec<usize> = r.ranked.iter().map(|x| x.image_id).collect();
            ids.sort();
            assert_eq!(ids, (0..20).collect::<Vec<_>>());
            assert!(r.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }

    #[test]
    fn edge_of_identical_vectors_on_top() {
        let mut rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 0.0]).collect();
        rows[7] = vec![0.0, 0.0, 1.0];
        rows[2] = vec![0.0, 0.0, 1.0];
        let emb = EmbeddingMatrix::from_rows(&rows, "t").unwrap();
        let h = Hypergraph::from_member_lists(10, [vec![2, 7]]).unwrap();
        let r = query(&QueryInput::Edge { edge: EdgeId(0) }, &h, &emb, None).unwrap();
        assert_eq!(r.query_tag, QueryMode::Edge);
        let top: Vec<usize> = r.ranked[..2].iter().map(|x| x.image_id).collect();
        assert_eq!(top, vec![2, 7]);
    }

    #[test]
    fn external_vectors_use_query_space() {
        let (h, emb) = fixture();
        let qs = EmbeddingMatrix::from_rows(&(0..20).map(|i| vec![i as f64 + 1.0, 1.0]).collect::<Vec<_>>(), "clip").unwrap();
        let r = query(&QueryInput::Text { vector: vec![6.0, 1.0] }, &h, &emb, Some(&qs)).unwrap();
        assert_eq!(r.ranked[0].image_id, 5);
        let err = query(&QueryInput::Text { vector: vec![1.0, 0.0, 0.0] }, &h, &emb, Some(&qs)).unwrap_err();
        assert!(matches!(err, Error::QuerySpace { expected: 2, got: 3 }));
        let v = emb.row_f64(11);
        assert_eq!(query(&QueryInput::Roi { vector: v }, &h, &emb, None).unwrap().ranked[0].image_id, 11);
    }

    #[test]
    fn unknown_refs() {
        let (h, emb) = fixture();
        assert!(matches!(query(&QueryInput::Images { images: vec![20] }, &h, &emb, None), Err(Error::NotFound { .. })));
        assert!(matches!(query(&QueryInput::Edge { edge: EdgeId(5) }, &h, &emb, None), Err(Error::NotFound { .. })));
    }

    #[test]
    fn paging_filters_first() {
        let (h, emb) = fixture();
        let r = query(&QueryInput::Images { images: vec![0] }, &h, &emb, None).unwrap();
        let p = r.page(0, 5, |i| i % 2 == 1);
        assert_eq!(p.total, 10);
        assert_eq!(p.items.len(), 5);
        assert!(p.items.iter().all(|x| x.image_id % 2 == 1));
        assert_eq!(p.next_cursor, Some(5));
        let last = r.page(5, 5, |i| i % 2 == 1);
        assert_eq!(last.next_cursor, None);
        assert!(r.page(50, 5, |_| true).items.is_empty());
    }
}
