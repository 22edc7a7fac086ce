//! Revisioned edit log over a hypergraph.
//!
//! Every user request becomes a transaction of primitive operations, each of
//! which carries enough data to be inverted exactly. The log is append-only:
//! undo and redo append the inverse transaction rather than dropping
//! entries, so replaying the log from the initial hypergraph always yields
//! the live one.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus, Hyperedge, Hypergraph};

/// Primitive, invertible change to a hypergraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    CreateEdge {
        edge: Hyperedge,
        position: usize,
    },
    DeleteEdge {
        edge: Hyperedge,
        position: usize,
    },
    Rename {
        id: EdgeId,
        from: String,
        to: String,
        status_from: EdgeStatus,
        status_to: EdgeStatus,
    },
    AddImages {
        id: EdgeId,
        images: Vec<usize>,
        status_from: EdgeStatus,
        status_to: EdgeStatus,
    },
    RemoveImages {
        id: EdgeId,
        images: Vec<usize>,
        status_from: EdgeStatus,
        status_to: EdgeStatus,
    },
}

fn mismatch(what: &str) -> Error {
    Error::Validation(format!("edit does not match the hypergraph: {what}"))
}

impl EditOp {
    pub fn inverse(&self) -> EditOp {
        match self.clone() {
            EditOp::CreateEdge { edge, position } => EditOp::DeleteEdge { edge, position },
            EditOp::DeleteEdge { edge, position } => EditOp::CreateEdge { edge, position },
            EditOp::Rename {
                id,
                from,
                to,
                status_from,
                status_to,
            } => EditOp::Rename {
                id,
                from: to,
                to: from,
                status_from: status_to,
                status_to: status_from,
            },
            EditOp::AddImages {
                id,
                images,
                status_from,
                status_to,
            } => EditOp::RemoveImages {
                id,
                images,
                status_from: status_to,
                status_to: status_from,
            },
            EditOp::RemoveImages {
                id,
                images,
                status_from,
                status_to,
            } => EditOp::AddImages {
                id,
                images,
                status_from: status_to,
                status_to: status_from,
            },
        }
    }

    pub fn edge_id(&self) -> EdgeId {
        match self {
            EditOp::CreateEdge { edge, .. } | EditOp::DeleteEdge { edge, .. } => edge.id,
            EditOp::Rename { id, .. } | EditOp::AddImages { id, .. } | EditOp::RemoveImages { id, .. } => *id,
        }
    }

    /// Applies the operation, checking that the hypergraph is in the state
    /// the operation was recorded against. Edges may be transiently empty
    /// inside a transaction.
    pub fn apply(&self, h: &mut Hypergraph) -> Result<()> {
        match self {
            EditOp::CreateEdge { edge, position } => {
                if h.position(edge.id).is_some() {
                    return Err(mismatch("edge id already present"));
                }
                if *position > h.m() || edge.members.iter().any(|&v| v >= h.n) {
                    return Err(mismatch("create position or members out of range"));
                }
                h.edges.insert(*position, edge.clone());
            }
            EditOp::DeleteEdge { edge, position } => {
                if h.edges.get(*position) != Some(edge) {
                    return Err(mismatch("deleted edge differs from the recorded one"));
                }
                h.edges.remove(*position);
            }
            EditOp::Rename {
                id,
                from,
                to,
                status_from,
                status_to,
            } => {
                let e = h.edge_mut(*id).ok_or_else(|| Error::not_found("edge", id))?;
                if &e.name != from || &e.status != status_from {
                    return Err(mismatch("rename source"));
                }
                e.name = to.clone();
                e.status = *status_to;
            }
            EditOp::AddImages {
                id,
                images,
                status_from,
                status_to,
            } => {
                let n = h.n;
                let e = h.edge_mut(*id).ok_or_else(|| Error::not_found("edge", id))?;
                if &e.status != status_from || images.iter().any(|&v| v >= n || e.contains(v)) {
                    return Err(mismatch("added images"));
                }
                let mut merged: Vec<usize> = e.members.iter().chain(images).copied().collect();
                merged.sort_unstable();
                e.members = merged;
                e.status = *status_to;
            }
            EditOp::RemoveImages {
                id,
                images,
                status_from,
                status_to,
            } => {
                let e = h.edge_mut(*id).ok_or_else(|| Error::not_found("edge", id))?;
                if &e.status != status_from || images.iter().any(|&v| !e.contains(v)) {
                    return Err(mismatch("removed images"));
                }
                let drop: BTreeSet<usize> = images.iter().copied().collect();
                e.members.retain(|v| !drop.contains(v));
                e.status = *status_to;
            }
        }
        Ok(())
    }
}

/// A request as issued by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditRequest {
    CreateEdge {
        name: String,
        members: Vec<usize>,
    },
    DeleteEdge {
        id: EdgeId,
    },
    Rename {
        id: EdgeId,
        name: String,
    },
    AddImages {
        id: EdgeId,
        images: Vec<usize>,
    },
    RemoveImages {
        id: EdgeId,
        images: Vec<usize>,
    },
    /// Replaces the listed edges by their union.
    Merge {
        ids: Vec<EdgeId>,
        #[serde(default)]
        name: Option<String>,
    },
    /// Moves `images` out of edge `id` into a new edge.
    Split {
        id: EdgeId,
        images: Vec<usize>,
        #[serde(default)]
        name: Option<String>,
    },
    /// Appends externally derived edges (e.g. from metadata) with fresh ids.
    /// They keep status original since no one has edited them yet.
    Import {
        edges: Vec<ImportedEdge>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportedEdge {
    pub name: String,
    pub members: Vec<usize>,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    CreateEdge,
    DeleteEdge,
    Rename,
    AddImages,
    RemoveImages,
    Merge,
    Split,
    Import,
    Undo,
    Redo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    /// Revision reached after applying this transaction.
    pub revision: u64,
    pub kind: TxKind,
    pub ops: Vec<EditOp>,
    pub timestamp_ms: i64,
    /// For undo/redo: the revision of the transaction being inverted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverts: Option<u64>,
}

impl Transaction {
    /// Edge ids touched by this transaction, deduplicated, in first-touch order.
    pub fn changed_edges(&self) -> Vec<EdgeId> {
        let mut seen = BTreeSet::new();
        self.ops
            .iter()
            .map(EditOp::edge_id)
            .filter(|id| seen.insert(*id))
            .collect()
    }
}

fn edited_status(s: EdgeStatus) -> EdgeStatus {
    match s {
        EdgeStatus::New => EdgeStatus::New,
        _ => EdgeStatus::Modified,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLog {
    initial: Hypergraph,
    live: Hypergraph,
    revision: u64,
    log: Vec<Transaction>,
    /// Indices into `log` of transactions that can be undone, oldest first.
    undo_stack: Vec<usize>,
    /// Indices into `log` of undo transactions that can be redone.
    redo_stack: Vec<usize>,
    next_id: u64,
}

impl EditLog {
    pub fn new(initial: Hypergraph) -> Self {
        let next_id = initial.next_free_id().0;
        EditLog {
            live: initial.clone(),
            initial,
            revision: 0,
            log: Vec::new(),
            undo_stack: Vec::new(),
            redo_stack: Vec::new(),
            next_id,
        }
    }

    pub fn live(&self) -> &Hypergraph {
        &self.live
    }

    pub fn initial(&self) -> &Hypergraph {
        &self.initial
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.log
    }

    pub fn next_id(&self) -> EdgeId {
        EdgeId(self.next_id)
    }

    pub fn can_undo(&self) -> bool {
        !self.undo_stack.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.redo_stack.is_empty()
    }

    fn check_revision(&self, expected: Option<u64>) -> Result<()> {
        match expected {
            Some(e) if e != self.revision => Err(Error::Conflict {
                expected: e,
                current: self.revision,
            }),
            _ => Ok(()),
        }
    }

    fn alloc_id(&mut self) -> EdgeId {
        self.next_id += 1;
        EdgeId(self.next_id - 1)
    }

    fn commit(&mut self, kind: TxKind, ops: Vec<EditOp>, now_ms: i64, inverts: Option<u64>) -> Result<&Transaction> {
        let mut next = self.live.clone();
        for op in &ops {
            op.apply(&mut next)?;
        }
        next.validate()?;
        self.live = next;
        self.revision += 1;
        self.log.push(Transaction {
            revision: self.revision,
            kind,
            ops,
            timestamp_ms: now_ms,
            inverts,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    fn check_images(&self, images: &[usize]) -> Result<Vec<usize>> {
        let set: BTreeSet<usize> = images.iter().copied().collect();
        if let Some(&bad) = set.iter().find(|&&v| v >= self.live.n) {
            return Err(Error::not_found("image", bad));
        }
        Ok(set.into_iter().collect())
    }

    /// Removal ops for `images` from the edge at `pos`, followed by deletion
    /// of the edge if nothing is left.
    fn removal_ops(&self, pos: usize, images: Vec<usize>) -> Vec<EditOp> {
        let edge = &self.live.edges[pos];
        let status_to = edited_status(edge.status);
        let mut ops = vec![EditOp::RemoveImages {
            id: edge.id,
            images: images.clone(),
            status_from: edge.status,
            status_to,
        }];
        if images.len() == edge.len() {
            let mut emptied = edge.clone();
            emptied.members.clear();
            emptied.status = status_to;
            ops.push(EditOp::DeleteEdge { edge: emptied, position: pos });
        }
        ops
    }

    fn plan(&mut self, req: &EditRequest) -> Result<(TxKind, Vec<EditOp>)> {
        let h = &self.live;
        let locate = |id: EdgeId| h.position(id).ok_or_else(|| Error::not_found("edge", id));
        Ok(match req {
            EditRequest::CreateEdge { name, members } => {
                let members = self.check_images(members)?;
                if members.is_empty() {
                    return Err(Error::Validation("a new edge needs at least one image".into()));
                }
                let position = self.live.m();
                let id = self.alloc_id();
                let edge = Hyperedge::new(id, name.clone(), members, EdgeStatus::New, EdgeOrigin::User);
                (TxKind::CreateEdge, vec![EditOp::CreateEdge { edge, position }])
            }
            EditRequest::DeleteEdge { id } => {
                let position = locate(*id)?;
                let edge = h.edges[position].clone();
                (TxKind::DeleteEdge, vec![EditOp::DeleteEdge { edge, position }])
            }
            EditRequest::Rename { id, name } => {
                let e = &h.edges[locate(*id)?];
                if &e.name == name {
                    return Err(Error::NothingToDo("rename"));
                }
                let op = EditOp::Rename {
                    id: *id,
                    from: e.name.clone(),
                    to: name.clone(),
                    status_from: e.status,
                    status_to: edited_status(e.status),
                };
                (TxKind::Rename, vec![op])
            }
            EditRequest::AddImages { id, images } => {
                let pos = locate(*id)?;
                let images: Vec<usize> = self
                    .check_images(images)?
                    .into_iter()
                    .filter(|&v| !self.live.edges[pos].contains(v))
                    .collect();
                if images.is_empty() {
                    return Err(Error::NothingToDo("add"));
                }
                let e = &self.live.edges[pos];
                let op = EditOp::AddImages {
                    id: *id,
                    images,
                    status_from: e.status,
                    status_to: edited_status(e.status),
                };
                (TxKind::AddImages, vec![op])
            }
            EditRequest::RemoveImages { id, images } => {
                let pos = locate(*id)?;
                let images: Vec<usize> = self
                    .check_images(images)?
                    .into_iter()
                    .filter(|&v| self.live.edges[pos].contains(v))
                    .collect();
                if images.is_empty() {
                    return Err(Error::NothingToDo("remove"));
                }
                (TxKind::RemoveImages, self.removal_ops(pos, images))
            }
            EditRequest::Merge { ids, name } => {
                let distinct: BTreeSet<EdgeId> = ids.iter().copied().collect();
                if distinct.len() < 2 {
                    return Err(Error::Validation("merge needs at least two distinct edges".into()));
                }
                let mut positions: Vec<usize> = distinct.iter().map(|&id| locate(id)).collect::<Result<_>>()?;
                positions.sort_unstable();
                let sources: Vec<Hyperedge> = positions.iter().map(|&p| h.edges[p].clone()).collect();
                let origin = if sources.iter().all(|e| e.origin == sources[0].origin) {
                    sources[0].origin
                } else {
                    EdgeOrigin::User
                };
                let name = name.clone().unwrap_or_else(|| {
                    sources.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(" + ")
                });
                let members: Vec<usize> = sources.iter().flat_map(|e| e.members.iter().copied()).collect();
                let mut ops: Vec<EditOp> = positions
                    .iter()
                    .zip(&sources)
                    .rev()
                    .map(|(&position, e)| EditOp::DeleteEdge { edge: e.clone(), position })
                    .collect();
                let id = self.alloc_id();
                ops.push(EditOp::CreateEdge {
                    edge: Hyperedge::new(id, name, members, EdgeStatus::Modified, origin),
                    position: positions[0],
                });
                (TxKind::Merge, ops)
            }
            EditRequest::Split { id, images, name } => {
                let pos = locate(*id)?;
                let images: Vec<usize> = self
                    .check_images(images)?
                    .into_iter()
                    .filter(|&v| self.live.edges[pos].contains(v))
                    .collect();
                if images.is_empty() {
                    return Err(Error::NothingToDo("split"));
                }
                let source = self.live.edges[pos].clone();
                let new_id = self.alloc_id();
                let name = name.clone().unwrap_or_else(|| format!("{} (split)", source.name));
                let mut ops = vec![EditOp::CreateEdge {
                    edge: Hyperedge::new(new_id, name, images.clone(), EdgeStatus::New, EdgeOrigin::User),
                    position: pos + 1,
                }];
                ops.extend(self.removal_ops(pos, images));
                (TxKind::Split, ops)
            }
            EditRequest::Import { edges } => {
                if edges.is_empty() {
                    return Err(Error::NothingToDo("import"));
                }
                let mut ops = Vec::with_capacity(edges.len());
                let start = self.live.m();
                for (k, e) in edges.iter().enumerate() {
                    let members = self.check_images(&e.members)?;
                    if members.is_empty() {
                        return Err(Error::Validation(format!("imported edge {:?} is empty", e.name)));
                    }
                    let id = self.alloc_id();
                    ops.push(EditOp::CreateEdge {
                        edge: Hyperedge::new(id, e.name.clone(), members, EdgeStatus::Original, e.origin),
                        position: start + k,
                    });
                }
                (TxKind::Import, ops)
            }
        })
    }

    /// Applies a request. With `expected_revision` set, a stale revision is
    /// rejected with [`Error::Conflict`] and nothing changes.
    pub fn apply(&mut self, req: &EditRequest, expected_revision: Option<u64>, now_ms: i64) -> Result<&Transaction> {
        self.check_revision(expected_revision)?;
        let saved_next = self.next_id;
        let (kind, ops) = match self.plan(req) {
            Ok(p) => p,
            Err(e) => {
                self.next_id = saved_next;
                return Err(e);
            }
        };
        if let Err(e) = self.commit(kind, ops, now_ms, None) {
            self.next_id = saved_next;
            return Err(e);
        }
        self.undo_stack.push(self.log.len() - 1);
        self.redo_stack.clear();
        Ok(self.log.last().expect("committed"))
    }

    fn inverse_ops(tx: &Transaction) -> Vec<EditOp> {
        tx.ops.iter().rev().map(EditOp::inverse).collect()
    }

    /// Inverts the most recent transaction not yet undone.
    pub fn undo(&mut self, expected_revision: Option<u64>, now_ms: i64) -> Result<&Transaction> {
        self.check_revision(expected_revision)?;
        let &idx = self.undo_stack.last().ok_or(Error::NothingToDo("undo"))?;
        let target = &self.log[idx];
        let (ops, inverts) = (Self::inverse_ops(target), target.revision);
        self.commit(TxKind::Undo, ops, now_ms, Some(inverts))?;
        self.undo_stack.pop();
        self.redo_stack.push(self.log.len() - 1);
        Ok(self.log.last().expect("committed"))
    }

    /// Inverts the most recent undo.
    pub fn redo(&mut self, expected_revision: Option<u64>, now_ms: i64) -> Result<&Transaction> {
        self.check_revision(expected_revision)?;
        let &idx = self.redo_stack.last().ok_or(Error::NothingToDo("redo"))?;
        let target = &self.log[idx];
        let (ops, inverts) = (Self::inverse_ops(target), target.revision);
        self.commit(TxKind::Redo, ops, now_ms, Some(inverts))?;
        self.redo_stack.pop();
        self.undo_stack.push(self.log.len() - 1);
        Ok(self.log.last().expect("committed"))
    }

    /// Re-applies every logged transaction to the initial hypergraph.
    pub fn replay(&self) -> Result<Hypergraph> {
        replay(&self.initial, &self.log)
    }

    /// Checks internal consistency; used after deserializing.
    pub fn verify(&self) -> Result<()> {
        let replayed = self.replay()?;
        if replayed != self.live {
            return Err(Error::Validation("edit log replay does not reproduce the live hypergraph".into()));
        }
        if self.log.last().map_or(0, |t| t.revision) != self.revision {
            return Err(Error::Validation("revision counter does not match the log".into()));
        }
        if self.undo_stack.iter().chain(&self.redo_stack).any(|&i| i >= self.log.len()) {
            return Err(Error::Validation("undo/redo stack points past the log".into()));
        }
        if self.next_id < self.live.next_free_id().0 {
            return Err(Error::Validation("next edge id would collide with a live edge".into()));
        }
        Ok(())
    }
}

pub fn replay(initial: &Hypergraph, log: &[Transaction]) -> Result<Hypergraph> {
    let mut h = initial.clone();
    for tx in log {
        for op in &tx.ops {
            op.apply(&mut h)?;
        }
    }
    Ok(h)
}
