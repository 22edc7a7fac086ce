mod oracle;

use hyperlens_core::hypercore::{EmbeddingMatrix, Hypergraph};
use hyperlens_core::layout::{layout_hypergraph, LayoutParams, LayoutResult};
use rand::RngExt;

fn circles(l: &LayoutResult) -> Vec<(f64, f64, f64)> {
    l.edge_nodes.iter().map(|n| (n.x, n.y, n.radius)).collect()
}

/// `m` edges of 1 to 30 random images each over `n` random embeddings.
fn random_graph(seed: u64, n: usize, m: usize) -> (Hypergraph, EmbeddingMatrix) {
    let mut rng = hyperlens_core::rng::seeded(seed);
    let d = 16;
    let data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let emb = EmbeddingMatrix::new(n, d, data, "r").unwrap();
    let lists: Vec<Vec<usize>> = (0..m)
        .map(|_| (0..rng.random_range(1..30)).map(|_| rng.random_range(0..n)).collect())
        .collect();
    (Hypergraph::from_member_lists(n, lists).unwrap(), emb)
}

#[test]
fn random_layouts_have_no_overlaps() {
    for seed in 0..10 {
        let (h, emb) = random_graph(seed, 500, 100);
        let params = LayoutParams { seed, images: false, ..LayoutParams::default() };
        let l = layout_hypergraph(&h, &emb, &params).unwrap();
        assert_eq!(l.residual_overlaps, 0);
        assert_eq!(oracle::overlapping_circles(&circles(&l)), 0, "seed {seed}");
    }
}

#[test]
fn same_seed_same_coordinates() {
    let (h, emb) = random_graph(3, 300, 40);
    let params = LayoutParams { seed: 5, ..LayoutParams::default() };
    let a = layout_hypergraph(&h, &emb, &params).unwrap();
    let b = layout_hypergraph(&h, &emb, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
