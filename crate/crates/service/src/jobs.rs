//! Background jobs with progress polling and cancellation.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use hyperlens_core::progress::{Progress, ProgressSnapshot};
use parking_lot::Mutex;
use serde::Serialize;

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done { result: serde_json::Value },
    Failed { error: String },
    Cancelled,
}

pub struct Job {
    pub id: u64,
    pub kind: String,
    pub progress: Progress,
    state: Mutex<JobState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobView {
    pub id: u64,
    pub kind: String,
    pub progress: ProgressSnapshot,
    #[serde(flatten)]
    pub state: JobState,
}

impl Job {
    pub fn view(&self) -> JobView {
        JobView {
            id: self.id,
            kind: self.kind.clone(),
            progress: self.progress.snapshot(),
            state: self.state.lock().clone(),
        }
    }
}

#[derive(Default)]
pub struct JobRegistry {
    next: AtomicU64,
    jobs: Mutex<BTreeMap<u64, Arc<Job>>>,
}

impl JobRegistry {
    /// Runs `work` on the blocking pool; its outcome becomes the job state.
    pub fn spawn<F>(&self, kind: &str, work: F) -> Arc<Job>
    where
        F: FnOnce(&Progress) -> Result<serde_json::Value> + Send + 'static,
    {
        let job = Arc::new(Job {
            id: self.next.fetch_add(1, Ordering::Relaxed) + 1,
            kind: kind.to_string(),
            progress: Progress::new(),
            state: Mutex::new(JobState::Running),
        });
        self.jobs.lock().insert(job.id, job.clone());
        let worker = job.clone();
        tokio::task::spawn_blocking(move || {
            let outcome = work(&worker.progress);
            *worker.state.lock() = match outcome {
                Ok(result) => JobState::Done { result },
                Err(ServiceError::Core(hyperlens_core::Error::Cancelled)) => JobState::Cancelled,
                Err(_) if worker.progress.is_cancelled() => JobState::Cancelled,
                Err(e) => JobState::Failed { error: e.to_string() },
            };
        });
        job
    }

    pub fn get(&self, id: u64) -> Option<Arc<Job>> {
        self.jobs.lock().get(&id).cloned()
    }

    pub fn list(&self) -> Vec<JobView> {
        self.jobs.lock().values().map(|j| j.view()).collect()
    }
}
