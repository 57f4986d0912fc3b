//! Dataset sessions, background jobs and their on-disk layout.
//!
//! Each dataset lives in `<storage>/datasets/<id>/` with `content.txt`,
//! `meta.json`, `session.json` (all version snapshots plus the sample) and
//! cached `profile-<version>.json` files. Tables go to `<storage>/tables/`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex as StdMutex};

use serde::{Deserialize, Serialize};
use textprof_core::ingest::{HeuristicProvider, LanguageModelProvider, ParsingProvider, Sample, SampleSet};
use textprof_core::profile::{Pipeline, PipelineConfig, Profile};
use textprof_core::wrangle::{WrangledTable, Workspace};
use textprof_core::RawDataset;
use tokio::sync::{Mutex, RwLock};

use crate::error::{ApiError, ApiResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderChoice {
    Heuristic,
    Llm,
}

impl ProviderChoice {
    pub fn build(self) -> Box<dyn ParsingProvider> {
        match self {
            ProviderChoice::Heuristic => Box::new(HeuristicProvider::new()),
            ProviderChoice::Llm => Box::new(LanguageModelProvider::from_env()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub storage: PathBuf,
    pub pipeline: PipelineConfig,
    pub provider: ProviderChoice,
    /// Web UI origin allowed by CORS; any origin when absent.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    pub fn new(storage: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            storage: storage.into(),
            pipeline: PipelineConfig::default(),
            provider: ProviderChoice::Heuristic,
            cors_origin: None,
        }
    }

    /// Reads `TEXTPROF_PROVIDER` (heuristic or llm) and `TEXTPROF_CORS_ORIGIN`.
    pub fn from_env(storage: impl Into<PathBuf>) -> Self {
        let mut c = Self::new(storage);
        if std::env::var("TEXTPROF_PROVIDER").is_ok_and(|v| v.eq_ignore_ascii_case("llm")) {
            c.provider = ProviderChoice::Llm;
        }
        c.cors_origin = std::env::var("TEXTPROF_CORS_ORIGIN").ok().filter(|v| !v.is_empty());
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobStatus {
    pub job_id: String,
    pub dataset_id: String,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Meta {
    pub id: String,
    pub provider: ProviderChoice,
    pub seed: u64,
}

/// Everything known about a profiled dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub workspace: Workspace,
    pub samples: Vec<Sample>,
    pub sample: SampleSet,
}

pub struct Dataset {
    pub meta: Meta,
    pub dir: PathBuf,
    pub job: StdMutex<JobStatus>,
    /// Single writer: mutations take this with `try_lock` and fail with 409.
    pub session: Arc<Mutex<Option<Session>>>,
    /// Profiles by version, filled lazily.
    pub profiles: StdMutex<HashMap<u64, Arc<Profile>>>,
}

impl Dataset {
    pub fn job(&self) -> JobStatus {
        self.job.lock().expect("job lock").clone()
    }

    fn set_job(&self, state: JobState, error: Option<String>) {
        let mut j = self.job.lock().expect("job lock");
        j.state = state;
        j.error = error;
    }

    pub fn config(&self, base: &PipelineConfig) -> PipelineConfig {
        PipelineConfig { seed: self.meta.seed, ..base.clone() }
    }

    pub fn content(&self) -> std::io::Result<String> {
        std::fs::read_to_string(self.dir.join("content.txt"))
    }

    pub fn save_session(&self, s: &Session) -> std::io::Result<()> {
        write_atomic(&self.dir.join("session.json"), &serde_json::to_vec(s)?)
    }

    pub fn cache_profile(&self, version: u64, p: Arc<Profile>) -> std::io::Result<()> {
        write_atomic(&self.dir.join(format!("profile-{version}.json")), p.to_json().as_bytes())?;
        self.profiles.lock().expect("profile lock").insert(version, p);
        Ok(())
    }

    pub fn cached_profile(&self, version: u64) -> Option<Arc<Profile>> {
        if let Some(p) = self.profiles.lock().expect("profile lock").get(&version) {
            return Some(p.clone());
        }
        let text = std::fs::read_to_string(self.dir.join(format!("profile-{version}.json"))).ok()?;
        let p = Arc::new(Profile::from_json(&text).ok()?);
        self.profiles.lock().expect("profile lock").insert(version, p.clone());
        Some(p)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

#[derive(Clone, Debug)]
pub struct CachedResponse {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

pub struct AppState {
    pub config: ServiceConfig,
    pub datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    pub tables: StdMutex<HashMap<String, WrangledTable>>,
    pub idempotency: StdMutex<HashMap<String, CachedResponse>>,
    next_id: AtomicU64,
}

impl AppState {
    /// Opens the storage directory and reloads every dataset in it. Datasets
    /// whose profiling never finished are profiled again.
    pub async fn open(config: ServiceConfig) -> std::io::Result<Arc<AppState>> {
        std::fs::create_dir_all(config.storage.join("datasets"))?;
        std::fs::create_dir_all(config.storage.join("tables"))?;
        let state = Arc::new(AppState {
            config,
            datasets: RwLock::new(HashMap::new()),
            tables: StdMutex::new(HashMap::new()),
            idempotency: StdMutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        });
        let mut max_id = 0;
        let mut pending = Vec::new();
        for entry in std::fs::read_dir(state.config.storage.join("datasets"))? {
            let dir = entry?.path();
            let Ok(meta) = std::fs::read(dir.join("meta.json")).and_then(|b| Ok(serde_json::from_slice::<Meta>(&b)?))
            else {
                continue;
            };
            max_id = max_id.max(numeric_suffix(&meta.id));
            let session: Option<Session> =
                std::fs::read(dir.join("session.json")).ok().and_then(|b| serde_json::from_slice(&b).ok());
            let state_now = if session.is_some() { JobState::Done } else { JobState::Queued };
            let ds = Arc::new(Dataset {
                job: StdMutex::new(JobStatus { job_id: format!("job-{}", meta.id), dataset_id: meta.id.clone(), state: state_now, error: None }),
                session: Arc::new(Mutex::new(session)),
                profiles: StdMutex::new(HashMap::new()),
                meta,
                dir,
            });
            if state_now == JobState::Queued {
                pending.push(ds.clone());
            }
            state.datasets.write().await.insert(ds.meta.id.clone(), ds);
        }
        for entry in std::fs::read_dir(state.config.storage.join("tables"))? {
            let path = entry?.path();
            if let (Some(id), Ok(bytes)) = (path.file_stem().and_then(|s| s.to_str()), std::fs::read(&path)) {
                if let Ok(t) = serde_json::from_slice::<WrangledTable>(&bytes) {
                    max_id = max_id.max(numeric_suffix(id));
                    state.tables.lock().expect("tables lock").insert(id.to_string(), t);
                }
            }
        }
        state.next_id.store(max_id + 1, Ordering::SeqCst);
        for ds in pending {
            spawn_profile_job(state.clone(), ds);
        }
        Ok(state)
    }

    pub fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.next_id.fetch_add(1, Ordering::SeqCst))
    }

    pub async fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        self.datasets.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("dataset {id}")))
    }

    /// Stores a new dataset and starts profiling it in the background.
    pub async fn create_dataset(self: &Arc<Self>, content: String, provider: ProviderChoice, seed: u64) -> ApiResult<Arc<Dataset>> {
        let id = self.fresh_id("ds");
        let dir = self.config.storage.join("datasets").join(&id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("content.txt"), &content)?;
        let meta = Meta { id: id.clone(), provider, seed };
        std::fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta).map_err(ApiError::internal)?)?;
        let ds = Arc::new(Dataset {
            job: StdMutex::new(JobStatus { job_id: format!("job-{id}"), dataset_id: id.clone(), state: JobState::Queued, error: None }),
            session: Arc::new(Mutex::new(None)),
            profiles: StdMutex::new(HashMap::new()),
            meta,
            dir,
        });
        self.datasets.write().await.insert(id, ds.clone());
        spawn_profile_job(self.clone(), ds.clone());
        Ok(ds)
    }

    pub fn save_table(&self, id: &str, t: &WrangledTable) -> std::io::Result<()> {
        write_atomic(&self.config.storage.join("tables").join(format!("{id}.json")), &serde_json::to_vec(t)?)?;
        self.tables.lock().expect("tables lock").insert(id.to_string(), t.clone());
        Ok(())
    }
}

fn numeric_suffix(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

/// Profiles the dataset from scratch; holds the session lock while running
/// so that mutations in the meantime get 409.
pub fn spawn_profile_job(state: Arc<AppState>, ds: Arc<Dataset>) {
    tokio::spawn(async move {
        let guard = ds.session.clone().lock_owned().await;
        ds.set_job(JobState::Running, None);
        let base = state.config.pipeline.clone();
        let worker = ds.clone();
        let result = tokio::task::spawn_blocking(move || -> Result<(Session, Option<Profile>), String> {
            let content = worker.content().map_err(|e| e.to_string())?;
            let provider = worker.meta.provider.build();
            let config = worker.config(&base);
            let pipeline = Pipeline::new(config.clone(), provider.as_ref());
            let run = pipeline.run(&RawDataset::new(worker.meta.id.clone(), content)).map_err(|e| e.to_string())?;
            let workspace = Workspace::new(run.parsed, run.sample_fields, config.dbscan);
            Ok((Session { workspace, samples: run.samples, sample: run.sample }, Some(run.profile)))
        })
        .await;
        finish_job(&ds, guard, result.unwrap_or_else(|e| Err(e.to_string())));
    });
}

pub fn finish_job(
    ds: &Dataset,
    mut guard: tokio::sync::OwnedMutexGuard<Option<Session>>,
    result: Result<(Session, Option<Profile>), String>,
) {
    match result {
        Ok((session, profile)) => {
            let version = session.workspace.version();
            let saved = ds.save_session(&session).and_then(|_| match profile {
                Some(p) => ds.cache_profile(version, Arc::new(p)),
                None => Ok(()),
            });
            *guard = Some(session);
            match saved {
                Ok(()) => ds.set_job(JobState::Done, None),
                Err(e) => ds.set_job(JobState::Failed, Some(e.to_string())),
            }
        }
        Err(e) => ds.set_job(JobState::Failed, Some(e)),
    }
}
