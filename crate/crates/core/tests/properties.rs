use std::collections::BTreeSet;

use hyperlens_core::edits::{replay, EditLog, EditRequest};
use hyperlens_core::explore::{meta_edge_grouping, query, subcluster_tree, QueryInput};
use hyperlens_core::hypercore::{EdgeId, EmbeddingMatrix, Hypergraph};
use hyperlens_core::simeval::{ces, ces_weighted, hnmi};
use proptest::prelude::*;

fn cover(n: usize, max_m: usize) -> impl Strategy<Value = Hypergraph> {
    prop::collection::vec(prop::collection::btree_set(0..n, 1..=n), 1..=max_m)
        .prop_map(move |lists| Hypergraph::from_member_lists(n, lists.into_iter().map(|s| s.into_iter().collect::<Vec<_>>())).unwrap())
}

fn pair(max_n: usize, max_m: usize) -> impl Strategy<Value = (Hypergraph, Hypergraph)> {
    (2..=max_n).prop_flat_map(move |n| (cover(n, max_m), cover(n, max_m)))
}

fn embeddings(n: usize, d: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    prop::collection::vec(-1.0f32..1.0, n * d).prop_map(move |data| EmbeddingMatrix::new(n, d, data, "p").unwrap())
}

#[derive(Debug, Clone)]
enum Op {
    Create(Vec<usize>),
    Delete(usize),
    Rename(usize),
    Add(usize, Vec<usize>),
    Remove(usize, Vec<usize>),
    Merge(usize, usize),
    Split(usize, Vec<usize>),
    Undo,
    Redo,
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    let imgs = prop::collection::vec(0..n, 1..4);
    prop_oneof![
        imgs.clone().prop_map(Op::Create),
        any::<usize>().prop_map(Op::Delete),
        any::<usize>().prop_map(Op::Rename),
        (any::<usize>(), imgs.clone()).prop_map(|(e, i)| Op::Add(e, i)),
        (any::<usize>(), imgs.clone()).prop_map(|(e, i)| Op::Remove(e, i)),
        (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Merge(a, b)),
        (any::<usize>(), imgs).prop_map(|(e, i)| Op::Split(e, i)),
        Just(Op::Undo),
        Just(Op::Redo),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ces_bounded_and_identity((x, y) in pair(12, 6)) {
        for r in [ces(&x, &y).unwrap(), ces_weighted(&x, &y).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&r.ces));
            prop_assert!((0.0..=1.0).contains(&r.s) && (0.0..=1.0).contains(&r.r));
        }
        prop_assert_eq!(ces(&x, &x).unwrap().ces, 1.0);
    }

    #[test]
    fn hnmi_bounded_symmetric((x, y) in pair(12, 6)) {
        let a = hnmi(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - hnmi(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(hnmi(&x, &x).unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn hypergraph_json_round_trip(h in (1..20usize).prop_flat_map(|n| cover(n, 8))) {
        prop_assert_eq!(Hypergraph::from_json(&h.to_json().unwrap()).unwrap(), h);
    }

    #[test]
    fn embedding_file_round_trip(emb in (1..10usize, 1..6usize).prop_flat_map(|(n, d)| embeddings(n, d))) {
        let mut bytes = Vec::new();
        emb.write_to(&mut bytes).unwrap();
        let back = EmbeddingMatrix::read_from(bytes.as_slice(), emb.model_tag.clone()).unwrap();
        prop_assert_eq!(back, emb);
    }

    #[test]
    fn edit_log_replays_and_unwinds(
        h in cover(10, 5),
        ops in prop::collection::vec(op(10), 1..60),
    ) {
        let mut log = EditLog::new(h.clone());
        let pick = |log: &EditLog, i: usize| -> EdgeId {
            let edges = &log.live().edges;
            if edges.is_empty() { EdgeId(999) } else { edges[i % edges.len()].id }
        };
        for (t, o) in ops.into_iter().enumerate() {
            let now = t as i64;
            let req = match o {
                Op::Undo => { let _ = log.undo(None, now); continue; }
                Op::Redo => { let _ = log.redo(None, now); continue; }
                Op::Create(m) => EditRequest::CreateEdge { name: "c".into(), members: m },
                Op::Delete(i) => EditRequest::DeleteEdge { id: pick(&log, i) },
                Op::Rename(i) => EditRequest::Rename { id: pick(&log, i), name: format!("n{t}") },
                Op::Add(i, m) => EditRequest::AddImages { id: pick(&log, i), images: m },
                Op::Remove(i, m) => EditRequest::RemoveImages { id: pick(&log, i), images: m },
                Op::Merge(a, b) => EditRequest::Merge { ids: vec![pick(&log, a), pick(&log, b)], name: None },
                Op::Split(i, m) => EditRequest::Split { id: pick(&log, i), images: m, name: None },
            };
            let before = log.clone();
            if log.apply(&req, None, now).is_err() {
                prop_assert_eq!(&log, &before);
            }
        }
        prop_assert_eq!(&replay(log.initial(), log.transactions()).unwrap(), log.live());
        log.verify().unwrap();
        let ids: Vec<EdgeId> = log.live().edges.iter().map(|e| e.id).collect();
        prop_assert!(ids.iter().all(|id| *id < log.next_id()));
        while log.can_undo() {
            log.undo(None, 0).unwrap();
        }
        prop_assert_eq!(log.live(), &h);
    }

    #[test]
    fn meta_grouping_partitions_edges(
        (h, emb) in (3..12usize).prop_flat_map(|n| (cover(n, 8), embeddings(n, 3))),
        theta in -1.0f64..=1.0,
    ) {
        let groups = meta_edge_grouping(&h, &emb, theta).unwrap();
        let flat: Vec<EdgeId> = groups.iter().flatten().copied().collect();
        let unique: BTreeSet<EdgeId> = flat.iter().copied().collect();
        prop_assert_eq!(flat.len(), h.m());
        prop_assert_eq!(unique.len(), h.m());
    }

    #[test]
    fn subcluster_cuts_nest(
        emb in (2..40usize).prop_flat_map(|n| embeddings(n, 4)),
        a in 0.0f64..2.0,
        b in 0.0f64..2.0,
    ) {
        let n = emb.n();
        let h = Hypergraph::from_member_lists(n, vec![(0..n).collect::<Vec<_>>()]).unwrap();
        let tree = subcluster_tree(&h.edges[0], &emb, 0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let fine = tree.cut(lo);
        let coarse = tree.cut(hi);
        let total: usize = fine.iter().map(|g| g.len()).sum();
        prop_assert_eq!(total, n);
        prop_assert!(fine.len() >= coarse.len());
        for g in &fine {
            prop_assert!(coarse.iter().any(|c| g.iter().all(|x| c.contains(x))));
        }
    }

    #[test]
    fn query_ranks_every_image(
        (h, emb) in (2..30usize).prop_flat_map(|n| (cover(n, 4), embeddings(n, 5))),
        pick in any::<usize>(),
    ) {
        let img = pick % emb.n();
        let r = query(&QueryInput::Images { images: vec![img] }, &h, &emb, None).unwrap();
        let mut ids: Vec<usize> = r.ranked.iter().map(|x| x.image_id).collect();
        prop_assert_eq!(ids[0], img);
        prop_assert!(r.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..emb.n()).collect::<Vec<_>>());
    }
}
