#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use hyperlens_core::edits::EditRequest;
use hyperlens_core::hypercore::{EdgeId, EmbeddingMatrix, Hypergraph, ImageManifest, MetaValue};
use hyperlens_service::api::{self, AppState, ServeConfig};
use hyperlens_service::session::{Session, Sources};
use rand::RngExt;
use tower::ServiceExt;

/// `clusters` groups of `per` images in `d` dimensions, with one edge per
/// group plus a few edges straddling neighboring groups.
pub fn collection(clusters: usize, per: usize, d: usize, seed: u64) -> (ImageManifest, EmbeddingMatrix, Hypergraph) {
    let mut rng = hyperlens_core::rng::seeded(seed);
    let n = clusters * per;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..clusters {
        let center: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        for _ in 0..per {
            data.extend(center.iter().map(|x| x + rng.random_range(-0.1f32..0.1)));
        }
    }
    let emb = EmbeddingMatrix::new(n, d, data, "fixture").unwrap();
    let mut manifest = ImageManifest::from_paths((0..n).map(|i| format!("img/{i}.png")));
    for (i, img) in manifest.images.iter_mut().enumerate() {
        img.metadata.insert("camera".into(), Some(MetaValue::Text(format!("cam{}", i % 3))));
        img.metadata.insert("hour".into(), Some(MetaValue::Number((i % 24) as f64)));
    }
    let mut lists: Vec<Vec<usize>> = (0..clusters).map(|c| (c * per..(c + 1) * per).collect()).collect();
    for c in 0..clusters.saturating_sub(1) {
        lists.push((c * per + per / 2..(c + 1) * per + per / 2).collect());
    }
    let h = Hypergraph::from_member_lists(n, lists).unwrap();
    (manifest, emb, h)
}

/// Writes the collection (including tiny PNG files) under `dir`.
pub fn write_collection(dir: &Path, manifest: &ImageManifest, emb: &EmbeddingMatrix) -> Sources {
    std::fs::create_dir_all(dir.join("img")).unwrap();
    let mut manifest = manifest.clone();
    for (i, img) in manifest.images.iter_mut().enumerate() {
        let path = dir.join(&img.path);
        image::RgbImage::from_pixel(40, 20, image::Rgb([(i % 256) as u8, 80, 160])).save(&path).unwrap();
        img.path = path;
    }
    let sources = Sources {
        manifest: dir.join("manifest.json"),
        embeddings: dir.join("emb.hgemb"),
        query_embeddings: None,
    };
    manifest.write_json(&sources.manifest).unwrap();
    emb.write_file(&sources.embeddings).unwrap();
    sources
}

pub fn session_on_disk(dir: &Path, clusters: usize, per: usize) -> Session {
    let (manifest, emb, h) = collection(clusters, per, 8, 1);
    let sources = write_collection(dir, &manifest, &emb);
    Session::create(sources, h).unwrap()
}

/// A manually advanced clock, in milliseconds.
#[derive(Clone, Default)]
pub struct TestClock(pub Arc<AtomicI64>);

impl TestClock {
    pub fn set(&self, ms: i64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

pub fn app(dir: &Path, session: Session, clock: &TestClock) -> (Arc<AppState>, Router) {
    let c = clock.0.clone();
    let config = ServeConfig {
        session_path: Some(dir.join("s.hgsess")),
        thumb_dir: dir.join("thumbs"),
        clock: Arc::new(move || c.load(Ordering::SeqCst)),
        ..ServeConfig::default()
    };
    let state = AppState::new(session, config);
    let router = api::router(state.clone());
    (state, router)
}

pub async fn call(router: &Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn json(router: &Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, serde_json::Value) {
    let (status, bytes) = call(router, method, uri, body).await;
    let v = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    (status, v)
}

pub enum Step {
    Edit(EditRequest),
    Undo,
    Redo,
}

/// A random edit, undo or redo against `live`. About a fifth of the edits
/// are invalid on purpose (unknown ids, no-op changes).
pub fn random_step(rng: &mut impl RngExt, live: &Hypergraph) -> Step {
    let n = live.n;
    let pick = |rng: &mut dyn FnMut(usize) -> usize| -> EdgeId {
        if live.edges.is_empty() {
            EdgeId(9_999)
        } else {
            live.edges[rng(live.edges.len())].id
        }
    };
    let mut r = |k: usize| rng.random_range(0..k);
    match r(100) {
        0..=14 => Step::Undo,
        15..=22 => Step::Redo,
        23..=32 => Step::Edit(EditRequest::CreateEdge {
            name: format!("c{}", r(1000)),
            members: (0..1 + r(6)).map(|_| r(n)).collect(),
        }),
        33..=39 => Step::Edit(EditRequest::DeleteEdge { id: pick(&mut r) }),
        40..=49 => Step::Edit(EditRequest::Rename {
            id: pick(&mut r),
            name: format!("r{}", r(5)),
        }),
        50..=64 => Step::Edit(EditRequest::AddImages {
            id: pick(&mut r),
            images: (0..1 + r(5)).map(|_| r(n)).collect(),
        }),
        65..=79 => {
            let id = pick(&mut r);
            let images = match live.edge(id) {
                Some(e) if r(2) == 0 => e.members.iter().copied().filter(|_| r(3) == 0).collect(),
                _ => (0..1 + r(4)).map(|_| r(n)).collect(),
            };
            Step::Edit(EditRequest::RemoveImages { id, images })
        }
        80..=89 => Step::Edit(EditRequest::Merge {
            ids: (0..2 + r(2)).map(|_| pick(&mut r)).collect(),
            name: None,
        }),
        _ => {
            let id = pick(&mut r);
            let images = match live.edge(id) {
                Some(e) => e.members.iter().copied().filter(|_| r(2) == 0).collect(),
                None => vec![0],
            };
            Step::Edit(EditRequest::Split { id, images, name: None })
        }
    }
}
