use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeStatus, Hypergraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewMarker {
    InLastSelectedEdge,
    InModifiedEdge,
    Unreviewed,
}

impl ReviewMarker {
    pub fn is_reviewed(self) -> bool {
        self != ReviewMarker::Unreviewed
    }
}

/// Marker for each image: membership in the last selected edge wins over
/// membership in an edited (modified or new) edge.
pub fn review_status(h: &Hypergraph, images: &[usize], last_selected: Option<EdgeId>) -> Result<Vec<ReviewMarker>> {
    let markers = review_markers(h, last_selected);
    images
        .iter()
        .map(|&i| markers.get(i).copied().ok_or_else(|| Error::not_found("image", i)))
        .collect()
}

/// Marker for every image of the collection.
pub fn review_markers(h: &Hypergraph, last_selected: Option<EdgeId>) -> Vec<ReviewMarker> {
    let mut out = vec![ReviewMarker::Unreviewed; h.n];
    for e in h.edges.iter().filter(|e| e.status != EdgeStatus::Original) {
        for &v in &e.members {
            out[v] = ReviewMarker::InModifiedEdge;
        }
    }
    if let Some(e) = last_selected.and_then(|id| h.edge(id)) {
        for &v in &e.members {
            out[v] = ReviewMarker::InLastSelectedEdge;
        }
    }
    out
}

pub const FRESH_MS: i64 = 5 * 60 * 1000;
pub const HOUR_MS: i64 = 60 * 60 * 1000;
pub const DAY_MS: i64 = 24 * HOUR_MS;

/// How long ago an edge was last visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recency {
    Fresh,
    WithinHour,
    WithinDay,
    Older,
    Never,
}

/// Buckets are half-open: exactly one hour ago is `WithinDay`. Visits in the
/// future (clock skew) count as fresh.
pub fn recency_bucket(last_visit_ms: Option<i64>, now_ms: i64) -> Recency {
    let Some(t) = last_visit_ms else {
        return Recency::Never;
    };
    match now_ms.saturating_sub(t) {
        age if age < FRESH_MS => Recency::Fresh,
        age if age < HOUR_MS => Recency::WithinHour,
        age if age < DAY_MS => Recency::WithinDay,
        _ => Recency::Older,
    }
}
