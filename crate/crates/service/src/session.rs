//! Session state and the `HGSESS1` session file.
//!
//! A session file is the line `HGSESS1` followed by one JSON document
//! holding a format version, references to the manifest and embedding
//! files, the edit log (which embeds the initial and live hypergraphs),
//! edge visit times, the last selected edge and the view history.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hyperlens_core::edits::{EditLog, EditRequest, Transaction, TxKind};
use hyperlens_core::explore::{edge_dispersions, recency_bucket, Recency};
use hyperlens_core::hypercore::{edge_dispersion, EdgeId, EmbeddingMatrix, Hypergraph, ImageManifest};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::history::ViewHistory;

pub const SESSION_MAGIC: &str = "HGSESS1";
pub const SESSION_VERSION: u64 = 1;

/// Where the collection lives on disk. Relative paths in a session file are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sources {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_embeddings: Option<PathBuf>,
}

/// Persisted part of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub version: u64,
    pub sources: Sources,
    pub edit_log: EditLog,
    #[serde(default)]
    pub visits: BTreeMap<EdgeId, i64>,
    #[serde(default)]
    pub last_selected: Option<EdgeId>,
    #[serde(default)]
    pub history: ViewHistory,
}

/// Notification sent to change-feed subscribers after every mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub revision: u64,
    pub kind: TxKind,
    pub changed: Vec<EdgeId>,
}

impl From<&Transaction> for ChangeEvent {
    fn from(tx: &Transaction) -> Self {
        ChangeEvent {
            revision: tx.revision,
            kind: tx.kind,
            changed: tx.changed_edges(),
        }
    }
}

pub struct Session {
    doc: SessionDoc,
    manifest: Arc<ImageManifest>,
    embeddings: Arc<EmbeddingMatrix>,
    query_space: Option<Arc<EmbeddingMatrix>>,
    live: Arc<Hypergraph>,
    dispersion: Arc<HashMap<EdgeId, f64>>,
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_matrices(
    sources: &Sources,
    base: Option<&Path>,
) -> Result<(ImageManifest, EmbeddingMatrix, Option<EmbeddingMatrix>)> {
    let resolve = |p: &Path| match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    };
    let manifest = ImageManifest::read_json(resolve(&sources.manifest))?;
    let embeddings = EmbeddingMatrix::read_file(resolve(&sources.embeddings), manifest.model_tag.as_deref())?;
    let query = sources
        .query_embeddings
        .as_deref()
        .map(|p| EmbeddingMatrix::read_file(resolve(p), None))
        .transpose()?;
    Ok((manifest, embeddings, query))
}

impl Session {
    /// Starts a session on a freshly constructed hypergraph.
    pub fn create(sources: Sources, hypergraph: Hypergraph) -> Result<Session> {
        let sources = Sources {
            manifest: absolute(&sources.manifest),
            embeddings: absolute(&sources.embeddings),
            query_embeddings: sources.query_embeddings.as_deref().map(absolute),
        };
        let (manifest, embeddings, query) = load_matrices(&sources, None)?;
        Session::from_parts(sources, manifest, embeddings, query, hypergraph)
    }

    /// Builds a session from in-memory parts; `sources` is only recorded.
    pub fn from_parts(
        sources: Sources,
        manifest: ImageManifest,
        embeddings: EmbeddingMatrix,
        query_space: Option<EmbeddingMatrix>,
        hypergraph: Hypergraph,
    ) -> Result<Session> {
        let doc = SessionDoc {
            version: SESSION_VERSION,
            sources,
            edit_log: EditLog::new(hypergraph),
            visits: BTreeMap::new(),
            last_selected: None,
            history: ViewHistory::default(),
        };
        Session::assemble(doc, manifest, embeddings, query_space)
    }

    fn assemble(
        doc: SessionDoc,
        manifest: ImageManifest,
        embeddings: EmbeddingMatrix,
        query_space: Option<EmbeddingMatrix>,
    ) -> Result<Session> {
        manifest.validate()?;
        embeddings.check_manifest(&manifest)?;
        if let Some(q) = &query_space {
            if q.n() != embeddings.n() {
                return Err(hyperlens_core::Error::Dimension(format!(
                    "query-space embeddings have {} rows, primary has {}",
                    q.n(),
                    embeddings.n()
                ))
                .into());
            }
        }
        let live = doc.edit_log.live().clone();
        live.validate()?;
        if live.n != embeddings.n() {
            return Err(hyperlens_core::Error::Dimension(format!(
                "hypergraph has {} vertices, collection has {} images",
                live.n,
                embeddings.n()
            ))
            .into());
        }
        let dispersion = edge_dispersions(&live, &embeddings)?;
        Ok(Session {
            doc,
            manifest: Arc::new(manifest),
            embeddings: Arc::new(embeddings),
            query_space: query_space.map(Arc::new),
            live: Arc::new(live),
            dispersion: Arc::new(dispersion),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Session> {
        let path = path.as_ref();
        let doc = read_session_doc(path)?;
        let (manifest, embeddings, query) = load_matrices(&doc.sources, path.parent())?;
        Session::assemble(doc, manifest, embeddings, query)
    }

    /// Writes the session atomically (temporary file, then rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("hgsess.tmp");
        {
            let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "{SESSION_MAGIC}")?;
            serde_json::to_writer(&mut w, &self.doc).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn doc(&self) -> &SessionDoc {
        &self.doc
    }

    pub fn manifest(&self) -> &Arc<ImageManifest> {
        &self.manifest
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingMatrix> {
        &self.embeddings
    }

    pub fn query_space(&self) -> Option<&Arc<EmbeddingMatrix>> {
        self.query_space.as_ref()
    }

    pub fn live(&self) -> &Arc<Hypergraph> {
        &self.live
    }

    pub fn dispersion(&self) -> &Arc<HashMap<EdgeId, f64>> {
        &self.dispersion
    }

    pub fn log(&self) -> &EditLog {
        &self.doc.edit_log
    }

    pub fn revision(&self) -> u64 {
        self.doc.edit_log.revision()
    }

    pub fn last_selected(&self) -> Option<EdgeId> {
        self.doc.last_selected
    }

    pub fn visits(&self) -> &BTreeMap<EdgeId, i64> {
        &self.doc.visits
    }

    pub fn history(&self) -> &ViewHistory {
        &self.doc.history
    }

    pub fn history_mut(&mut self) -> &mut ViewHistory {
        &mut self.doc.history
    }

    fn refresh(&mut self, event: &ChangeEvent) -> Result<()> {
        let live = self.doc.edit_log.live().clone();
        let disp = Arc::make_mut(&mut self.dispersion);
        for id in &event.changed {
            match live.edge(*id) {
                Some(e) => {
                    disp.insert(*id, edge_dispersion(e, &self.embeddings)?);
                }
                None => {
                    disp.remove(id);
                }
            }
        }
        self.live = Arc::new(live);
        Ok(())
    }

    pub fn apply(&mut self, req: &EditRequest, expected_revision: Option<u64>, now_ms: i64) -> Result<ChangeEvent> {
        let event = ChangeEvent::from(self.doc.edit_log.apply(req, expected_revision, now_ms)?);
        self.refresh(&event)?;
        Ok(event)
    }

    pub fn undo(&mut self, expected_revision: Option<u64>, now_ms: i64) -> Result<ChangeEvent> {
        let event = ChangeEvent::from(self.doc.edit_log.undo(expected_revision, now_ms)?);
        self.refresh(&event)?;
        Ok(event)
    }

    pub fn redo(&mut self, expected_revision: Option<u64>, now_ms: i64) -> Result<ChangeEvent> {
        let event = ChangeEvent::from(self.doc.edit_log.redo(expected_revision, now_ms)?);
        self.refresh(&event)?;
        Ok(event)
    }

    /// Records a visit; with `select` the edge also becomes the last
    /// selected one used for review markers.
    pub fn visit_edge(&mut self, id: EdgeId, now_ms: i64, select: bool) -> Result<()> {
        self.live.require(id)?;
        self.doc.visits.insert(id, now_ms);
        if select {
            self.doc.last_selected = Some(id);
        }
        Ok(())
    }

    pub fn recency(&self, id: EdgeId, now_ms: i64) -> Recency {
        recency_bucket(self.doc.visits.get(&id).copied(), now_ms)
    }
}

/// Parses a session file without touching the files it references.
pub fn read_session_doc(path: &Path) -> Result<SessionDoc> {
    let text = fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    if first.trim_end() != SESSION_MAGIC {
        return Err(ServiceError::NotSession(format!(
            "{} does not start with {SESSION_MAGIC}",
            path.display()
        )));
    }
    let located = |e: serde_json::Error| {
        ServiceError::Corrupt(format!("{} at line {}, column {}", e, e.line() + 1, e.column()))
    };
    let value: serde_json::Value = serde_json::from_str(rest).map_err(located)?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ServiceError::Corrupt("missing or invalid version field".into()))?;
    if version > SESSION_VERSION {
        return Err(ServiceError::FutureVersion {
            found: version,
            supported: SESSION_VERSION,
        });
    }
    let doc: SessionDoc = serde_json::from_str(rest).map_err(located)?;
    doc.edit_log.verify()?;
    if !doc.history.is_consistent() {
        return Err(ServiceError::Corrupt("view history cursor out of range".into()));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperlens_core::hypercore::EdgeStatus;

    fn session() -> Session {
        let emb = EmbeddingMatrix::from_rows(&(0..6).map(|i| vec![1.0, i as f64]).collect::<Vec<_>>(), "t").unwrap();
        let manifest = ImageManifest::from_paths((0..6).map(|i| format!("{i}.png")));
        let h = Hypergraph::from_member_lists(6, [vec![0, 1, 2], vec![2, 3], vec![4, 5]]).unwrap();
        let sources = Sources {
            manifest: "m.json".into(),
            embeddings: "e.hgemb".into(),
            query_embeddings: None,
        };
        Session::from_parts(sources, manifest, emb, None, h).unwrap()
    }

    #[test]
    fn dispersion_follows_edits() {
        let mut s = session();
        let ev = s
            .apply(&EditRequest::AddImages { id: EdgeId(1), images: vec![5] }, Some(0), 10)
            .unwrap();
        assert_eq!(ev.revision, 1);
        assert_eq!(ev.changed, vec![EdgeId(1)]);
        let e = s.live().edge(EdgeId(1)).unwrap();
        assert_eq!(e.status, EdgeStatus::Modified);
        assert_eq!(s.dispersion()[&EdgeId(1)], edge_dispersion(e, s.embeddings()).unwrap());
        s.apply(&EditRequest::DeleteEdge { id: EdgeId(0) }, None, 11).unwrap();
        assert!(!s.dispersion().contains_key(&EdgeId(0)));
    }

    #[test]
    fn visits() {
        let mut s = session();
        assert_eq!(s.recency(EdgeId(0), 0), Recency::Never);
        s.visit_edge(EdgeId(0), 1000, true).unwrap();
        assert_eq!(s.recency(EdgeId(0), 1000), Recency::Fresh);
        assert_eq!(s.last_selected(), Some(EdgeId(0)));
        assert!(s.visit_edge(EdgeId(7), 0, false).is_err());
    }
}
