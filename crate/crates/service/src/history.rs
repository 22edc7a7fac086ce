use serde::{Deserialize, Serialize};

pub const HISTORY_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    List,
    Grid,
    Spatial,
    Matrix,
}

/// A navigable view: which view and whatever the client needs to restore it
/// (selection, camera, query echo).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewState {
    pub view: ViewKind,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub timestamp_ms: i64,
}

/// Back/forward stack. Pushing after going back drops the forward part;
/// beyond `depth` entries the oldest is evicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewHistory {
    entries: Vec<ViewState>,
    cursor: Option<usize>,
    depth: usize,
}

impl Default for ViewHistory {
    fn default() -> Self {
        ViewHistory::with_depth(HISTORY_DEPTH)
    }
}

impl ViewHistory {
    pub fn with_depth(depth: usize) -> Self {
        ViewHistory {
            entries: Vec::new(),
            cursor: None,
            depth: depth.max(1),
        }
    }

    pub fn entries(&self) -> &[ViewState] {
        &self.entries
    }

    pub fn cursor(&self) -> Option<usize> {
        self.cursor
    }

    pub fn current(&self) -> Option<&ViewState> {
        self.cursor.map(|c| &self.entries[c])
    }

    pub fn push(&mut self, state: ViewState) {
        if let Some(c) = self.cursor {
            self.entries.truncate(c + 1);
        }
        self.entries.push(state);
        if self.entries.len() > self.depth {
            self.entries.remove(0);
        }
        self.cursor = Some(self.entries.len() - 1);
    }

    pub fn back(&mut self) -> Option<&ViewState> {
        match self.cursor {
            Some(c) if c > 0 => {
                self.cursor = Some(c - 1);
                self.current()
            }
            _ => None,
        }
    }

    pub fn forward(&mut self) -> Option<&ViewState> {
        match self.cursor {
            Some(c) if c + 1 < self.entries.len() => {
                self.cursor = Some(c + 1);
                self.current()
            }
            _ => None,
        }
    }

    pub(crate) fn is_consistent(&self) -> bool {
        match self.cursor {
            None => self.entries.is_empty(),
            Some(c) => c < self.entries.len() && self.entries.len() <= self.depth,
        }
    }
}
