use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{intersection_size, EdgeId, Hypergraph};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    #[serde(default)]
    pub edges: Vec<EdgeId>,
    #[serde(default)]
    pub images: Vec<usize>,
}

/// Serialized as `[edge_a, image, edge_b]` with `edge_a < edge_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link(pub EdgeId, pub usize, pub EdgeId);

/// Links between node copies of the same image in different edges.
///
/// For selected edges the scope is the selection plus every edge that
/// intersects a selected edge, and every image shared by two scoped edges is
/// linked between them. A selected image is linked across all edges that
/// contain it.
pub fn shared_image_links(h: &Hypergraph, selection: &Selection) -> Result<Vec<Link>> {
    let positions: Vec<usize> = selection
        .edges
        .iter()
        .map(|&id| h.position(id).ok_or_else(|| Error::not_found("edge", id)))
        .collect::<Result<_>>()?;
    for &img in &selection.images {
        if img >= h.n {
            return Err(Error::not_found("image", img));
        }
    }
    let mut links = BTreeSet::new();
    let mut add_pairs = |image: usize, holders: &[EdgeId]| {
        for (x, &a) in holders.iter().enumerate() {
            for &b in &holders[x + 1..] {
                links.insert(Link(a.min(b), image, a.max(b)));
            }
        }
    };

    if !positions.is_empty() {
        let mut scope: BTreeSet<usize> = positions.iter().copied().collect();
        for (q, e) in h.edges.iter().enumerate() {
            if positions.iter().any(|&p| intersection_size(&h.edges[p].members, &e.members) > 0) {
                scope.insert(q);
            }
        }
        let mut holders: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
        for &q in &scope {
            for &v in &h.edges[q].members {
                holders.entry(v).or_default().push(h.edges[q].id);
            }
        }
        for (v, ids) in holders {
            add_pairs(v, &ids);
        }
    }
    if !selection.images.is_empty() {
        let index = h.vertex_index();
        for &img in &selection.images {
            let ids: Vec<EdgeId> = index[img].iter().map(|&q| h.edges[q].id).collect();
            add_pairs(img, &ids);
        }
    }
    Ok(links.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_membership_has_no_links() {
        let h = Hypergraph::from_member_lists(4, [vec![0, 1], vec![2, 3]]).unwrap();
        let sel = Selection { edges: vec![EdgeId(0)], images: vec![0] };
        assert!(shared_image_links(&h, &sel).unwrap().is_empty());
    }

    #[test]
    fn image_in_three_edges() {
        let h = Hypergraph::from_member_lists(3, [vec![0], vec![0, 1], vec![0, 2]]).unwrap();
        let sel = Selection { edges: vec![], images: vec![0] };
        let links = shared_image_links(&h, &sel).unwrap();
        assert_eq!(
            links,
            vec![
                Link(EdgeId(0), 0, EdgeId(1)),
                Link(EdgeId(0), 0, EdgeId(2)),
                Link(EdgeId(1), 0, EdgeId(2)),
            ]
        );
    }

    #[test]
    fn scope_limited_to_selected_and_intersecting() {
        // A={0,1,2} meets B={2,3} and C={1,4}; D={3,5} meets B only, E={5,6} meets D.
        let h = Hypergraph::from_member_lists(7, [vec![0, 1, 2], vec![2, 3], vec![1, 4], vec![3, 5], vec![5, 6]])
            .unwrap();
        let sel = Selection { edges: vec![EdgeId(0)], images: vec![] };
        let links = shared_image_links(&h, &sel).unwrap();
        assert_eq!(links, vec![Link(EdgeId(0), 1, EdgeId(2)), Link(EdgeId(0), 2, EdgeId(1))]);
        for l in &links {
            assert!(l.0 .0 <= 2 && l.2 .0 <= 2);
        }
    }

    #[test]
    fn unknown_ids() {
        let h = Hypergraph::from_member_lists(2, [vec![0]]).unwrap();
        let bad_edge = Selection { edges: vec![EdgeId(9)], images: vec![] };
        assert!(matches!(shared_image_links(&h, &bad_edge), Err(Error::NotFound { .. })));
        let bad_image = Selection { edges: vec![], images: vec![2] };
        assert!(shared_image_links(&h, &bad_image).is_err());
    }
}
