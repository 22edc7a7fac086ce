//! HTTP API. Every route lives under `/api`; bodies are JSON unless noted.
//!
//! Reads work on an `Arc` snapshot of the live hypergraph taken under a short
//! lock. Mutations hold the session lock for the whole edit so they are
//! applied and announced on the change feed strictly in revision order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use hyperlens_core::construct::{metadata_edges, DEFAULT_BINS};
use hyperlens_core::edits::{EditRequest, ImportedEdge, Transaction};
use hyperlens_core::explore::{
    edge_table, intersecting_edges_for_images, meta_edge_grouping, overlap_matrix, query, review_markers,
    six_image_summary, subcluster_tree, Dendrogram, EdgeRow, EdgeSummary, QueryInput, Recency, ReviewMarker,
};
use hyperlens_core::hypercore::{EdgeId, EmbeddingMatrix, Hyperedge, Hypergraph, ImageManifest};
use hyperlens_core::layout::{layout_hypergraph_with, shared_image_links, LayoutParams, LayoutResult, Link, Selection};
use hyperlens_core::progress::Progress;
use hyperlens_core::synthbench::{run_perturbation_bench_with, run_roc_bench_with, BenchConfig, PerturbKind, RocConfig};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, OnceCell};

use crate::build::{construct, ConstructSpec};
use crate::error::ServiceError;
use crate::history::{ViewKind, ViewState};
use crate::jobs::JobRegistry;
use crate::session::{ChangeEvent, Session};
use crate::thumbs::{content_type, ThumbCache, DEFAULT_THUMB_PX};

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    })
}

pub struct ServeConfig {
    pub session_path: Option<PathBuf>,
    pub thumb_dir: PathBuf,
    pub clock: Clock,
    /// Base layout parameters; the seed comes from each request.
    pub layout: LayoutParams,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            session_path: None,
            thumb_dir: std::env::temp_dir().join("hyperlens-thumbs"),
            clock: system_clock(),
            layout: LayoutParams::default(),
        }
    }
}

type LayoutCell = Arc<OnceCell<Arc<LayoutResult>>>;

pub struct AppState {
    session: Mutex<Session>,
    session_path: Option<PathBuf>,
    events: broadcast::Sender<ChangeEvent>,
    layouts: Mutex<HashMap<(u64, u64), LayoutCell>>,
    /// Newest finished layout per seed, a source of reusable image nodes.
    last_layouts: Mutex<HashMap<u64, Arc<LayoutResult>>>,
    trees: Mutex<HashMap<EdgeId, (Vec<usize>, Arc<Dendrogram>)>>,
    jobs: JobRegistry,
    thumbs: ThumbCache,
    clock: Clock,
    layout_params: LayoutParams,
}

const EVENT_CAPACITY: usize = 4096;
/// Seeds whose newest layout is kept for image-node reuse.
const LAST_LAYOUT_SEEDS: usize = 8;

impl AppState {
    pub fn new(session: Session, config: ServeConfig) -> Arc<AppState> {
        Arc::new(AppState {
            session: Mutex::new(session),
            session_path: config.session_path,
            events: broadcast::channel(EVENT_CAPACITY).0,
            layouts: Mutex::new(HashMap::new()),
            last_layouts: Mutex::new(HashMap::new()),
            trees: Mutex::new(HashMap::new()),
            jobs: JobRegistry::default(),
            thumbs: ThumbCache::new(config.thumb_dir),
            clock: config.clock,
            layout_params: config.layout,
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ChangeEvent> {
        self.events.subscribe()
    }

    /// Runs `f` with the session locked.
    pub fn with_session<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        f(&self.session.lock())
    }

    /// Saves to the configured session path, if any.
    pub fn save(&self) -> Result<Option<PathBuf>, ServiceError> {
        match &self.session_path {
            Some(p) => {
                self.session.lock().save(p)?;
                Ok(Some(p.clone()))
            }
            None => Ok(None),
        }
    }

    fn snapshot(&self) -> Snapshot {
        let s = self.session.lock();
        Snapshot {
            revision: s.revision(),
            live: s.live().clone(),
            emb: s.embeddings().clone(),
            query_space: s.query_space().cloned(),
            manifest: s.manifest().clone(),
            dispersion: s.dispersion().clone(),
            last_selected: s.last_selected(),
            visits: s.visits().clone(),
        }
    }

    fn now(&self) -> i64 {
        (self.clock)()
    }

    fn mutate(
        &self,
        f: impl FnOnce(&mut Session, i64) -> Result<ChangeEvent, ServiceError>,
    ) -> Result<Json<ChangeEvent>, ApiError> {
        let now = self.now();
        let mut s = self.session.lock();
        let ev = f(&mut s, now)?;
        // No receivers is fine.
        let _ = self.events.send(ev.clone());
        Ok(Json(ev))
    }

    fn layout_cell(&self, revision: u64, seed: u64) -> LayoutCell {
        let mut map = self.layouts.lock();
        map.retain(|(rev, _), _| *rev >= revision);
        map.entry((revision, seed)).or_default().clone()
    }

    fn previous_layout(&self, seed: u64) -> Option<Arc<LayoutResult>> {
        self.last_layouts.lock().get(&seed).cloned()
    }

    fn remember_layout(&self, layout: &Arc<LayoutResult>) {
        let mut map = self.last_layouts.lock();
        if map.len() >= LAST_LAYOUT_SEEDS && !map.contains_key(&layout.seed) {
            map.clear();
        }
        map.insert(layout.seed, layout.clone());
    }
}

struct Snapshot {
    revision: u64,
    live: Arc<Hypergraph>,
    emb: Arc<EmbeddingMatrix>,
    query_space: Option<Arc<EmbeddingMatrix>>,
    manifest: Arc<ImageManifest>,
    dispersion: Arc<HashMap<EdgeId, f64>>,
    last_selected: Option<EdgeId>,
    visits: BTreeMap<EdgeId, i64>,
}

impl Snapshot {
    fn recency(&self, id: EdgeId, now: i64) -> Recency {
        hyperlens_core::explore::recency_bucket(self.visits.get(&id).copied(), now)
    }
}

pub struct ApiError(ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl ApiError {
    fn status(&self) -> (StatusCode, &'static str) {
        use hyperlens_core::Error as C;
        match &self.0 {
            ServiceError::Core(c) => match c {
                C::NotFound { .. } => (StatusCode::NOT_FOUND, "not_found"),
                C::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
                C::Cancelled => (StatusCode::CONFLICT, "cancelled"),
                C::NothingToDo(_) => (StatusCode::UNPROCESSABLE_ENTITY, "nothing_to_do"),
                C::QuerySpace { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "query_space"),
                C::IndexOutOfRange { .. }
                | C::Dimension(_)
                | C::Validation(_)
                | C::Parameter(_)
                | C::UndefinedSimilarity(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
                C::Format(_) | C::Io(_) | C::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            },
            ServiceError::BadRequest(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            ServiceError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status();
        let mut body = serde_json::json!({ "error": code, "message": self.0.to_string() });
        if let ServiceError::Core(hyperlens_core::Error::Conflict { current, .. }) = &self.0 {
            body["current_revision"] = (*current).into();
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e.to_string()))))?
        .map_err(ApiError)
}

/// Parses an optional JSON body; an empty body yields the default.
fn optional_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::BadRequest(e.to_string())))
}

fn parse_id_list(s: Option<&str>) -> ApiResult<Vec<u64>> {
    s.unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| ApiError(ServiceError::BadRequest(format!("bad id {t:?}")))))
        .collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(session_info))
        .route("/api/session/save", post(save_session))
        .route("/api/edges", get(list_edges).post(create_edge))
        .route("/api/edges/merge", post(merge_edges))
        .route("/api/edges/{id}", get(get_edge).patch(rename_edge).delete(delete_edge))
        .route("/api/edges/{id}/images", post(edge_images))
        .route("/api/edges/{id}/split", post(split_edge))
        .route("/api/edges/{id}/visit", post(visit_edge))
        .route("/api/edits", get(list_edits))
        .route("/api/edits/undo", post(undo))
        .route("/api/edits/redo", post(redo))
        .route("/api/query", post(run_query))
        .route("/api/layout", get(get_layout))
        .route("/api/matrix", get(get_matrix))
        .route("/api/summary/{edge}", get(get_summary))
        .route("/api/subclusters/{edge}", get(get_subclusters))
        .route("/api/meta-edges", get(get_meta_edges))
        .route("/api/meta-edges/consolidate", post(merge_edges))
        .route("/api/images/intersecting", post(intersecting))
        .route("/api/images/review", post(review))
        .route("/api/images/{id}", get(get_image))
        .route("/api/images/{id}/thumb", get(get_thumb))
        .route("/api/images/{id}/full", get(get_full))
        .route("/api/metadata/fields", get(metadata_fields))
        .route("/api/metadata/edges", post(add_metadata_edges))
        .route("/api/history", get(get_history))
        .route("/api/history/push", post(history_push))
        .route("/api/history/back", post(history_back))
        .route("/api/history/forward", post(history_forward))
        .route("/api/events", get(events))
        .route("/api/jobs", get(list_jobs).post(start_job))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/cancel", post(cancel_job))
        .with_state(state)
}

type St = State<Arc<AppState>>;

#[derive(Serialize)]
struct SessionInfo {
    revision: u64,
    n: usize,
    m: usize,
    d: usize,
    query_d: Option<usize>,
    model_tag: String,
    can_undo: bool,
    can_redo: bool,
    last_selected: Option<EdgeId>,
}

async fn session_info(State(st): St) -> Json<SessionInfo> {
    st.with_session(|s| {
        Json(SessionInfo {
            revision: s.revision(),
            n: s.live().n,
            m: s.live().m(),
            d: s.embeddings().d(),
            query_d: s.query_space().map(|q| q.d()),
            model_tag: s.embeddings().model_tag.clone(),
            can_undo: s.log().can_undo(),
            can_redo: s.log().can_redo(),
            last_selected: s.last_selected(),
        })
    })
}

#[derive(Default, Deserialize)]
struct SaveBody {
    path: Option<PathBuf>,
}

async fn save_session(State(st): St, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let body: SaveBody = optional_body(&body)?;
    let path = body
        .path
        .or_else(|| st.session_path.clone())
        .ok_or_else(|| ServiceError::BadRequest("no session path configured".into()))?;
    let st2 = st.clone();
    let p = path.clone();
    let revision = blocking(move || {
        let s = st2.session.lock();
        s.save(&p)?;
        Ok(s.revision())
    })
    .await?;
    Ok(Json(serde_json::json!({ "path": path, "revision": revision })))
}

#[derive(Deserialize)]
struct EdgeListQuery {
    reference: Option<u64>,
    filter: Option<String>,
}

#[derive(Serialize)]
struct EdgeListRow {
    #[serde(flatten)]
    row: EdgeRow,
    recency: Recency,
}

async fn list_edges(State(st): St, Query(q): Query<EdgeListQuery>) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    let now = st.now();
    let (revision, rows) = blocking(move || {
        let rows = edge_table(
            &snap.live,
            &snap.emb,
            &snap.dispersion,
            q.reference.map(EdgeId),
            q.filter.as_deref(),
        )?;
        let rows: Vec<EdgeListRow> = rows
            .into_iter()
            .map(|row| EdgeListRow {
                recency: snap.recency(row.id, now),
                row,
            })
            .collect();
        Ok((snap.revision, rows))
    })
    .await?;
    Ok(Json(serde_json::json!({ "revision": revision, "rows": rows })))
}

#[derive(Serialize)]
struct EdgeDetail {
    revision: u64,
    edge: Hyperedge,
    summary: EdgeSummary,
    dispersion: Option<f64>,
    recency: Recency,
}

async fn get_edge(State(st): St, Path(id): Path<u64>) -> ApiResult<Json<EdgeDetail>> {
    let snap = st.snapshot();
    let now = st.now();
    let seed = st.layout_params.seed;
    blocking(move || {
        let edge = snap.live.require(EdgeId(id))?.clone();
        let summary = six_image_summary(&edge, &snap.emb, seed)?;
        Ok(Json(EdgeDetail {
            revision: snap.revision,
            dispersion: snap.dispersion.get(&edge.id).copied(),
            recency: snap.recency(edge.id, now),
            edge,
            summary,
        }))
    })
    .await
}

#[derive(Deserialize)]
struct CreateBody {
    name: String,
    members: Vec<usize>,
    expected_revision: Option<u64>,
}

async fn create_edge(State(st): St, Json(b): Json<CreateBody>) -> ApiResult<Json<ChangeEvent>> {
    let req = EditRequest::CreateEdge {
        name: b.name,
        members: b.members,
    };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

#[derive(Deserialize)]
struct RenameBody {
    name: String,
    expected_revision: Option<u64>,
}

async fn rename_edge(State(st): St, Path(id): Path<u64>, Json(b): Json<RenameBody>) -> ApiResult<Json<ChangeEvent>> {
    let req = EditRequest::Rename {
        id: EdgeId(id),
        name: b.name,
    };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

#[derive(Default, Deserialize)]
struct RevisionArg {
    expected_revision: Option<u64>,
}

async fn delete_edge(State(st): St, Path(id): Path<u64>, Query(q): Query<RevisionArg>) -> ApiResult<Json<ChangeEvent>> {
    let req = EditRequest::DeleteEdge { id: EdgeId(id) };
    st.mutate(|s, now| s.apply(&req, q.expected_revision, now))
}

#[derive(Deserialize)]
struct ImagesBody {
    #[serde(default)]
    add: Vec<usize>,
    #[serde(default)]
    remove: Vec<usize>,
    expected_revision: Option<u64>,
}

async fn edge_images(State(st): St, Path(id): Path<u64>, Json(b): Json<ImagesBody>) -> ApiResult<Json<ChangeEvent>> {
    let id = EdgeId(id);
    let req = match (b.add.is_empty(), b.remove.is_empty()) {
        (false, true) => EditRequest::AddImages { id, images: b.add },
        (true, false) => EditRequest::RemoveImages { id, images: b.remove },
        _ => return Err(ServiceError::BadRequest("give exactly one of add or remove".into()).into()),
    };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

#[derive(Deserialize)]
struct MergeBody {
    ids: Vec<EdgeId>,
    name: Option<String>,
    expected_revision: Option<u64>,
}

async fn merge_edges(State(st): St, Json(b): Json<MergeBody>) -> ApiResult<Json<ChangeEvent>> {
    let req = EditRequest::Merge {
        ids: b.ids,
        name: b.name,
    };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

#[derive(Deserialize)]
struct SplitBody {
    images: Vec<usize>,
    name: Option<String>,
    expected_revision: Option<u64>,
}

async fn split_edge(State(st): St, Path(id): Path<u64>, Json(b): Json<SplitBody>) -> ApiResult<Json<ChangeEvent>> {
    let req = EditRequest::Split {
        id: EdgeId(id),
        images: b.images,
        name: b.name,
    };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

#[derive(Deserialize)]
struct VisitBody {
    #[serde(default = "yes")]
    select: bool,
}

impl Default for VisitBody {
    fn default() -> Self {
        VisitBody { select: true }
    }
}

fn yes() -> bool {
    true
}

async fn visit_edge(State(st): St, Path(id): Path<u64>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let b: VisitBody = optional_body(&body)?;
    let now = st.now();
    st.session.lock().visit_edge(EdgeId(id), now, b.select)?;
    Ok(Json(serde_json::json!({ "id": id, "visited_ms": now, "recency": Recency::Fresh })))
}

#[derive(Deserialize)]
struct EditsQuery {
    #[serde(default)]
    since: u64,
}

#[derive(Serialize)]
struct EditsView {
    revision: u64,
    can_undo: bool,
    can_redo: bool,
    transactions: Vec<Transaction>,
}

async fn list_edits(State(st): St, Query(q): Query<EditsQuery>) -> Json<EditsView> {
    st.with_session(|s| {
        let log = s.log();
        Json(EditsView {
            revision: log.revision(),
            can_undo: log.can_undo(),
            can_redo: log.can_redo(),
            transactions: log.transactions().iter().filter(|t| t.revision > q.since).cloned().collect(),
        })
    })
}

async fn undo(State(st): St, body: Bytes) -> ApiResult<Json<ChangeEvent>> {
    let b: RevisionArg = optional_body(&body)?;
    st.mutate(|s, now| s.undo(b.expected_revision, now))
}

async fn redo(State(st): St, body: Bytes) -> ApiResult<Json<ChangeEvent>> {
    let b: RevisionArg = optional_body(&body)?;
    st.mutate(|s, now| s.redo(b.expected_revision, now))
}

#[derive(Deserialize)]
struct QueryBody {
    #[serde(flatten)]
    input: QueryInput,
    #[serde(default)]
    cursor: usize,
    #[serde(default = "default_limit")]
    limit: usize,
    /// Drop images that carry a review marker before paging.
    #[serde(default)]
    hide_reviewed: bool,
}

fn default_limit() -> usize {
    200
}

async fn run_query(State(st): St, Json(b): Json<QueryBody>) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    blocking(move || {
        let result = query(&b.input, &snap.live, &snap.emb, snap.query_space.as_deref())?;
        let page = if b.hide_reviewed {
            let markers = review_markers(&snap.live, snap.last_selected);
            result.page(b.cursor, b.limit, |i| !markers[i].is_reviewed())
        } else {
            result.page(b.cursor, b.limit, |_| true)
        };
        let mut v = serde_json::to_value(page).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        v["revision"] = snap.revision.into();
        Ok(Json(v))
    })
    .await
}

#[derive(Deserialize)]
struct LayoutQuery {
    seed: Option<u64>,
    /// Comma-separated selected edge ids, for links.
    edges: Option<String>,
    /// Comma-separated selected image ids, for links.
    images: Option<String>,
}

#[derive(Serialize)]
struct LayoutPayload {
    revision: u64,
    #[serde(flatten)]
    layout: Arc<LayoutResult>,
    links: Vec<Link>,
    recency: BTreeMap<EdgeId, Recency>,
}

async fn cached_layout(st: &Arc<AppState>, snap: &Snapshot, seed: u64) -> ApiResult<Arc<LayoutResult>> {
    let cell = st.layout_cell(snap.revision, seed);
    let (live, emb) = (snap.live.clone(), snap.emb.clone());
    let params = LayoutParams {
        seed,
        ..st.layout_params.clone()
    };
    let st2 = st.clone();
    cell.get_or_try_init(|| async move {
        blocking(move || {
            let previous = st2.previous_layout(seed);
            let layout = Arc::new(layout_hypergraph_with(&live, &emb, &params, previous.as_deref(), &Progress::new())?);
            st2.remember_layout(&layout);
            Ok(layout)
        })
        .await
    })
    .await
    .cloned()
}

async fn get_layout(State(st): St, Query(q): Query<LayoutQuery>) -> ApiResult<Json<LayoutPayload>> {
    let snap = st.snapshot();
    let now = st.now();
    let seed = q.seed.unwrap_or(st.layout_params.seed);
    let layout = cached_layout(&st, &snap, seed).await?;
    let selection = Selection {
        edges: parse_id_list(q.edges.as_deref())?.into_iter().map(EdgeId).collect(),
        images: parse_id_list(q.images.as_deref())?.into_iter().map(|i| i as usize).collect(),
    };
    let links = if selection.edges.is_empty() && selection.images.is_empty() {
        Vec::new()
    } else {
        shared_image_links(&snap.live, &selection)?
    };
    let recency = snap.live.edges.iter().map(|e| (e.id, snap.recency(e.id, now))).collect();
    Ok(Json(LayoutPayload {
        revision: snap.revision,
        layout,
        links,
        recency,
    }))
}

async fn get_matrix(State(st): St) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    blocking(move || {
        let mut v = serde_json::to_value(overlap_matrix(&snap.live)).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        v["revision"] = snap.revision.into();
        Ok(Json(v))
    })
    .await
}

async fn get_summary(State(st): St, Path(edge): Path<u64>) -> ApiResult<Json<EdgeSummary>> {
    let snap = st.snapshot();
    let seed = st.layout_params.seed;
    blocking(move || Ok(Json(six_image_summary(snap.live.require(EdgeId(edge))?, &snap.emb, seed)?))).await
}

#[derive(Deserialize)]
struct SubclusterQuery {
    theta: Option<f64>,
    #[serde(default)]
    tree: bool,
}

async fn get_subclusters(
    State(st): St,
    Path(edge): Path<u64>,
    Query(q): Query<SubclusterQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    let seed = st.layout_params.seed;
    let st2 = st.clone();
    blocking(move || {
        let e = snap.live.require(EdgeId(edge))?;
        let cached = st2
            .trees
            .lock()
            .get(&e.id)
            .filter(|(members, _)| *members == e.members)
            .map(|(_, t)| t.clone());
        let tree = match cached {
            Some(t) => t,
            None => {
                let t = Arc::new(subcluster_tree(e, &snap.emb, seed)?);
                st2.trees.lock().insert(e.id, (e.members.clone(), t.clone()));
                t
            }
        };
        let theta = q.theta.unwrap_or(0.0);
        let mut v = serde_json::json!({
            "edge_id": e.id,
            "theta": theta,
            "max_height": tree.max_height(),
            "groups": tree.cut(theta),
        });
        if q.tree {
            v["tree"] = serde_json::to_value(&*tree).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        }
        Ok(Json(v))
    })
    .await
}

#[derive(Deserialize)]
struct ThetaQuery {
    theta: f64,
}

async fn get_meta_edges(State(st): St, Query(q): Query<ThetaQuery>) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    blocking(move || {
        let groups = meta_edge_grouping(&snap.live, &snap.emb, q.theta)?;
        Ok(Json(serde_json::json!({ "revision": snap.revision, "theta": q.theta, "groups": groups })))
    })
    .await
}

#[derive(Deserialize)]
struct ImageListBody {
    images: Vec<usize>,
}

async fn intersecting(State(st): St, Json(b): Json<ImageListBody>) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    let overlaps = intersecting_edges_for_images(&snap.live, &b.images)?;
    Ok(Json(serde_json::json!({ "revision": snap.revision, "edges": overlaps })))
}

async fn review(State(st): St, Json(b): Json<ImageListBody>) -> ApiResult<Json<Vec<ReviewMarker>>> {
    let snap = st.snapshot();
    Ok(Json(hyperlens_core::explore::review_status(&snap.live, &b.images, snap.last_selected)?))
}

async fn get_image(State(st): St, Path(id): Path<usize>) -> ApiResult<Json<serde_json::Value>> {
    let snap = st.snapshot();
    let entry = snap.manifest.images.get(id).ok_or_else(|| hyperlens_core::Error::NotFound {
        what: "image",
        id: id.to_string(),
    })?;
    let edges: Vec<EdgeId> = snap.live.edges.iter().filter(|e| e.contains(id)).map(|e| e.id).collect();
    let marker = review_markers(&snap.live, snap.last_selected)[id];
    Ok(Json(serde_json::json!({
        "id": id,
        "path": entry.path,
        "metadata": entry.metadata,
        "edges": edges,
        "review": marker,
    })))
}

fn image_path(st: &AppState, id: usize) -> ApiResult<PathBuf> {
    st.with_session(|s| s.manifest().images.get(id).map(|e| e.path.clone()))
        .ok_or_else(|| ApiError::from(hyperlens_core::Error::NotFound { what: "image", id: id.to_string() }))
}

#[derive(Deserialize)]
struct ThumbQuery {
    px: Option<u32>,
}

async fn get_thumb(State(st): St, Path(id): Path<usize>, Query(q): Query<ThumbQuery>) -> ApiResult<Response> {
    let path = image_path(&st, id)?;
    let thumbs = st.thumbs.clone();
    let px = q.px.unwrap_or(DEFAULT_THUMB_PX);
    let bytes = blocking(move || thumbs.thumbnail(&path, px)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn get_full(State(st): St, Path(id): Path<usize>) -> ApiResult<Response> {
    let path = image_path(&st, id)?;
    let bytes = tokio::fs::read(&path).await?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

#[derive(Serialize)]
struct FieldInfo {
    field: String,
    valid_count: usize,
    unique_count: usize,
    numeric: bool,
}

async fn metadata_fields(State(st): St) -> Json<Vec<FieldInfo>> {
    let manifest = st.with_session(|s| s.manifest().clone());
    let fields = manifest
        .field_names()
        .into_iter()
        .map(|field| {
            let values: Vec<_> = manifest.images.iter().filter_map(|img| img.field(&field)).collect();
            let unique: BTreeSet<String> = values.iter().map(|v| v.as_key()).collect();
            FieldInfo {
                valid_count: values.len(),
                unique_count: unique.len(),
                numeric: !values.is_empty()
                    && values.iter().all(|v| matches!(v, hyperlens_core::hypercore::MetaValue::Number(_))),
                field,
            }
        })
        .collect();
    Json(fields)
}

#[derive(Deserialize)]
struct MetadataBody {
    field: String,
    #[serde(default = "default_bins")]
    bins: usize,
    expected_revision: Option<u64>,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

async fn add_metadata_edges(State(st): St, Json(b): Json<MetadataBody>) -> ApiResult<Json<ChangeEvent>> {
    let manifest = st.with_session(|s| s.manifest().clone());
    let edges = metadata_edges(&manifest, &b.field, b.bins, EdgeId(0))?
        .into_iter()
        .map(|e| ImportedEdge {
            name: e.name,
            members: e.members,
            origin: e.origin,
        })
        .collect();
    let req = EditRequest::Import { edges };
    st.mutate(|s, now| s.apply(&req, b.expected_revision, now))
}

async fn get_history(State(st): St) -> Json<serde_json::Value> {
    st.with_session(|s| {
        let h = s.history();
        Json(serde_json::json!({ "entries": h.entries(), "cursor": h.cursor() }))
    })
}

#[derive(Deserialize)]
struct PushBody {
    view: ViewKind,
    #[serde(default)]
    params: serde_json::Value,
}

async fn history_push(State(st): St, Json(b): Json<PushBody>) -> Json<serde_json::Value> {
    let now = st.now();
    let mut s = st.session.lock();
    let h = s.history_mut();
    h.push(ViewState {
        view: b.view,
        params: b.params,
        timestamp_ms: now,
    });
    Json(serde_json::json!({ "cursor": h.cursor(), "current": h.current() }))
}

async fn history_back(State(st): St) -> ApiResult<Json<ViewState>> {
    let mut s = st.session.lock();
    let state = s.history_mut().back().cloned();
    state.map(Json).ok_or_else(|| hyperlens_core::Error::NothingToDo("go back").into())
}

async fn history_forward(State(st): St) -> ApiResult<Json<ViewState>> {
    let mut s = st.session.lock();
    let state = s.history_mut().forward().cloned();
    state.map(Json).ok_or_else(|| hyperlens_core::Error::NothingToDo("go forward").into())
}

async fn events(State(st): St) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = st.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        use broadcast::error::RecvError;
        let event = match rx.recv().await {
            Ok(ev) => Event::default()
                .event("change")
                .id(ev.revision.to_string())
                .json_data(&ev)
                .unwrap_or_else(|_| Event::default().event("resync")),
            // A slow subscriber missed events; it has to refetch.
            Err(RecvError::Lagged(n)) => Event::default().event("resync").data(n.to_string()),
            Err(RecvError::Closed) => return None,
        };
        Some((Ok(event), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JobSpec {
    Layout {
        #[serde(default)]
        seed: u64,
    },
    Bench {
        perturbation: PerturbKind,
        reps: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    Roc {
        per_model: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    Construct(ConstructSpec),
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value, ServiceError> {
    serde_json::to_value(v).map_err(|e| ServiceError::Corrupt(e.to_string()))
}

async fn start_job(State(st): St, Json(spec): Json<JobSpec>) -> (StatusCode, Json<serde_json::Value>) {
    let job = match spec {
        JobSpec::Layout { seed } => {
            let snap = st.snapshot();
            let cell = st.layout_cell(snap.revision, seed);
            let params = LayoutParams {
                seed,
                ..st.layout_params.clone()
            };
            let st2 = st.clone();
            st.jobs.spawn("layout", move |p| {
                let previous = st2.previous_layout(seed);
                let layout = Arc::new(layout_hypergraph_with(&snap.live, &snap.emb, &params, previous.as_deref(), p)?);
                st2.remember_layout(&layout);
                let _ = cell.set(layout.clone());
                Ok(serde_json::json!({ "revision": snap.revision, "seed": seed, "edges": layout.edge_nodes.len() }))
            })
        }
        JobSpec::Bench {
            perturbation,
            reps,
            seed,
        } => st.jobs.spawn("bench", move |p| {
            let mut cfg = BenchConfig::defaults(perturbation);
            cfg.seed = seed;
            if let Some(r) = reps {
                cfg.reps = r;
            }
            let result = run_perturbation_bench_with(&cfg, p)?;
            Ok(serde_json::json!({ "complete": result.complete, "means": to_json(&result.level_means())? }))
        }),
        JobSpec::Roc { per_model, seed } => st.jobs.spawn("roc", move |p| {
            let mut cfg = RocConfig {
                seed,
                ..RocConfig::default()
            };
            if let Some(k) = per_model {
                cfg.per_model = k;
            }
            let r = run_roc_bench_with(&cfg, p)?;
            let aucs: Vec<_> = r
                .measures
                .iter()
                .map(|m| serde_json::json!({ "measure": m.measure.name(), "auc": m.auc, "null_auc": m.null_auc }))
                .collect();
            Ok(serde_json::json!({ "measures": aucs }))
        }),
        JobSpec::Construct(spec) => {
            let snap = st.snapshot();
            st.jobs.spawn("construct", move |p| {
                let out = construct(&spec, &snap.emb, Some(&snap.manifest), p)?;
                to_json(&out.hypergraph)
            })
        }
    };
    (StatusCode::ACCEPTED, Json(serde_json::json!({ "id": job.id, "kind": job.kind })))
}

async fn list_jobs(State(st): St) -> Json<serde_json::Value> {
    Json(serde_json::json!(st.jobs.list()))
}

fn find_job(st: &AppState, id: u64) -> ApiResult<Arc<crate::jobs::Job>> {
    st.jobs
        .get(id)
        .ok_or_else(|| hyperlens_core::Error::NotFound { what: "job", id: id.to_string() }.into())
}

async fn get_job(State(st): St, Path(id): Path<u64>) -> ApiResult<Json<crate::jobs::JobView>> {
    Ok(Json(find_job(&st, id)?.view()))
}

async fn cancel_job(State(st): St, Path(id): Path<u64>) -> ApiResult<Json<crate::jobs::JobView>> {
    let job = find_job(&st, id)?;
    job.progress.cancel();
    Ok(Json(job.view()))
}
