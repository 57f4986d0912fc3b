use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use textprof_core::ingest::{Sample, SampleSet};
use textprof_core::profile::{Pipeline, Profile};
use textprof_core::wrangle::{CellSelector, RecordEdit, WrangleOp};
use textprof_core::{ClusterId, ColumnIndex, Span};
use tokio::sync::OwnedMutexGuard;

use crate::error::{ApiError, ApiResult};
use crate::state::{finish_job, AppState, Dataset, JobState, ProviderChoice, Session};

type AppRef = State<Arc<AppState>>;

pub async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Deserialize)]
pub struct CreateQuery {
    provider: Option<ProviderChoice>,
    seed: Option<u64>,
}

/// Body is the raw text of the dataset.
pub async fn create_dataset(State(st): AppRef, Query(q): Query<CreateQuery>, body: Bytes) -> ApiResult<Response> {
    let content = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("dataset must be UTF-8 text"))?;
    let provider = q.provider.unwrap_or(st.config.provider);
    let seed = q.seed.unwrap_or(st.config.pipeline.seed);
    let ds = st.create_dataset(content, provider, seed).await?;
    let job = ds.job();
    Ok((StatusCode::ACCEPTED, Json(json!({"datasetId": ds.meta.id, "jobId": job.job_id}))).into_response())
}

pub async fn list_datasets(State(st): AppRef) -> Json<Value> {
    let map = st.datasets.read().await;
    let mut ids: Vec<&String> = map.keys().collect();
    ids.sort();
    Json(json!({"datasets": ids}))
}

pub async fn get_job(State(st): AppRef, Path(job_id): Path<String>) -> ApiResult<Json<Value>> {
    let id = job_id.strip_prefix("job-").ok_or_else(|| ApiError::not_found(format!("job {job_id}")))?;
    let ds = st.dataset(id).await.map_err(|_| ApiError::not_found(format!("job {job_id}")))?;
    Ok(Json(serde_json::to_value(ds.job()).map_err(ApiError::internal)?))
}

fn busy_or_pending(ds: &Dataset) -> ApiError {
    match ds.job().state {
        JobState::Failed => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, ds.job().error.unwrap_or_default()),
        _ => ApiError::busy(),
    }
}

/// Exclusive access for a mutation; 409 while another one or a job runs.
fn write_lock(ds: &Dataset) -> ApiResult<OwnedMutexGuard<Option<Session>>> {
    let guard = ds.session.clone().try_lock_owned().map_err(|_| ApiError::busy())?;
    if guard.is_none() {
        return Err(busy_or_pending(ds));
    }
    Ok(guard)
}

/// Runs `f` on the session off the async runtime and persists the result
/// when it succeeds.
async fn mutate<T: Send + 'static>(
    ds: Arc<Dataset>,
    f: impl FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let mut guard = write_lock(&ds)?;
    tokio::task::spawn_blocking(move || {
        let session = guard.as_mut().expect("checked by write_lock");
        let out = f(session)?;
        ds.save_session(session)?;
        Ok(out)
    })
    .await
    .map_err(ApiError::internal)?
}

/// Shared read of the session; waits for a running mutation.
async fn read<T>(ds: &Dataset, f: impl FnOnce(&Session) -> ApiResult<T>) -> ApiResult<T> {
    if matches!(ds.job().state, JobState::Queued | JobState::Running) {
        return Err(ApiError::busy());
    }
    let guard = ds.session.lock().await;
    match guard.as_ref() {
        Some(s) => f(s),
        None => Err(busy_or_pending(ds)),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DatasetInfo {
    dataset_id: String,
    provider: ProviderChoice,
    seed: u64,
    job: crate::state::JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    version: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    versions: Option<Vec<u64>>,
    can_undo: bool,
    can_redo: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_count: Option<usize>,
}

pub async fn get_dataset(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    let job = ds.job();
    let mut info = DatasetInfo {
        dataset_id: ds.meta.id.clone(),
        provider: ds.meta.provider,
        seed: ds.meta.seed,
        job,
        version: None,
        versions: None,
        can_undo: false,
        can_redo: false,
        record_count: None,
    };
    if let Ok(guard) = ds.session.try_lock() {
        if let Some(s) = guard.as_ref() {
            let ws = &s.workspace;
            info.version = Some(ws.version());
            info.versions = Some(ws.versions().collect());
            info.can_undo = ws.can_undo();
            info.can_redo = ws.can_redo();
            info.record_count = Some(ws.current().parsed.records.len());
        }
    }
    Ok(Json(serde_json::to_value(info).map_err(ApiError::internal)?))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleBody {
    #[serde(default)]
    pub samples: Vec<Sample>,
    pub sample: SampleSet,
}

pub async fn get_sample(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<SampleBody>> {
    let ds = st.dataset(&id).await?;
    read(&ds, |s| Ok(Json(SampleBody { samples: s.samples.clone(), sample: s.sample.clone() }))).await
}

/// Replaces the sample records and re-parses the current text with them in
/// the background. The new parse becomes an undoable version.
pub async fn put_sample(State(st): AppRef, Path(id): Path<String>, Json(mut set): Json<SampleSet>) -> ApiResult<Response> {
    let ds = st.dataset(&id).await?;
    let guard = write_lock(&ds)?;
    set.user_edited = true;
    ds.job.lock().expect("job lock").state = JobState::Running;
    let base = st.config.pipeline.clone();
    let worker = ds.clone();
    tokio::spawn(async move {
        let job_ds = worker.clone();
        let res = tokio::task::spawn_blocking(move || {
            let result = (|| -> Result<(Session, Option<Profile>), String> {
                let session = guard.as_ref().expect("checked by write_lock");
                let provider = worker.meta.provider.build();
                let pipeline = Pipeline::new(worker.config(&base), provider.as_ref());
                let ws = &session.workspace;
                let overrides = ws.current().overrides.clone();
                let run = pipeline
                    .run_with_sample(ws.dataset(), session.samples.clone(), set, &overrides)
                    .map_err(|e| e.to_string())?;
                let mut next = session.clone();
                next.workspace.reparse(run.parsed, run.sample_fields).map_err(|e| e.to_string())?;
                next.sample = run.sample;
                // the run profile carries the old version id; profile lazily instead
                Ok((next, None))
            })();
            // on failure the old session stays in place
            (guard, result)
        })
        .await;
        match res {
            Ok((guard, result)) => finish_job(&job_ds, guard, result),
            Err(e) => {
                let mut j = job_ds.job.lock().expect("job lock");
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            }
        }
    });
    let job = ds.job();
    Ok((StatusCode::ACCEPTED, Json(json!({"datasetId": ds.meta.id, "jobId": job.job_id}))).into_response())
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    version: Option<u64>,
}

/// 202 with the job status while profiling runs; profiles of versions
/// produced by wrangling are computed on first request.
pub async fn get_profile(State(st): AppRef, Path(id): Path<String>, Query(q): Query<VersionQuery>) -> ApiResult<Response> {
    let ds = st.dataset(&id).await?;
    let job = ds.job();
    match job.state {
        JobState::Queued | JobState::Running => return Ok((StatusCode::ACCEPTED, Json(job)).into_response()),
        JobState::Failed if ds.session.lock().await.is_none() => return Err(busy_or_pending(&ds)),
        _ => {}
    }
    let (version, parsed, overrides) = read(&ds, |s| {
        let ws = &s.workspace;
        let v = q.version.unwrap_or(ws.version());
        let snap = ws.snapshot(v)?;
        Ok((v, snap.parsed.clone(), snap.overrides.clone()))
    })
    .await?;
    if let Some(p) = ds.cached_profile(version) {
        return Ok(json_text(p.to_json()));
    }
    let base = st.config.pipeline.clone();
    let worker = ds.clone();
    let profile = tokio::task::spawn_blocking(move || {
        let provider = worker.meta.provider.build();
        Pipeline::new(worker.config(&base), provider.as_ref()).profile_parsed(&parsed, &overrides)
    })
    .await
    .map_err(ApiError::internal)??;
    let profile = Arc::new(profile);
    ds.cache_profile(version, profile.clone())?;
    Ok(json_text(profile.to_json()))
}

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(Debug, Deserialize)]
pub struct RangeQuery {
    from: Option<usize>,
    to: Option<usize>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RecordView {
    record_id: usize,
    span: Span,
    cluster: ClusterId,
    fields: Vec<String>,
    columns: Vec<ColumnIndex>,
}

pub async fn get_records(State(st): AppRef, Path(id): Path<String>, Query(q): Query<RangeQuery>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    read(&ds, |s| {
        let a = s.workspace.analysis();
        let n = a.parsed.records.len();
        let from = q.from.unwrap_or(0).min(n);
        let to = q.to.unwrap_or(n).clamp(from, n);
        let data = &a.parsed.dataset;
        let records: Vec<RecordView> = (from..to)
            .map(|i| {
                let r = &a.parsed.records[i];
                RecordView {
                    record_id: i,
                    span: r.span,
                    cluster: a.record_clusters.get(i).copied().unwrap_or(r.cluster),
                    fields: r.field_texts(data).into_iter().map(str::to_string).collect(),
                    columns: r.fields.iter().map(|f| f.column).collect(),
                }
            })
            .collect();
        Ok(Json(json!({"version": s.workspace.version(), "total": n, "from": from, "to": to, "records": records})))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OpQuery {
    #[serde(default)]
    dry_run: bool,
}

pub async fn post_op(
    State(st): AppRef,
    Path(id): Path<String>,
    Query(q): Query<OpQuery>,
    Json(op): Json<WrangleOp>,
) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    if q.dry_run {
        let guard = write_lock(&ds)?;
        let preview = tokio::task::spawn_blocking(move || guard.as_ref().expect("checked").workspace.preview(&op))
            .await
            .map_err(ApiError::internal)??;
        return Ok(Json(json!({"dryRun": true, "preview": preview})));
    }
    mutate(ds, move |s| {
        let (version, preview) = s.workspace.apply(&op)?;
        Ok(Json(json!({"version": version, "preview": preview})))
    })
    .await
}

pub async fn undo(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    mutate(ds, |s| Ok(Json(json!({"version": s.workspace.undo()?})))).await
}

pub async fn redo(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    mutate(ds, |s| Ok(Json(json!({"version": s.workspace.redo()?})))).await
}

pub async fn stage_edit(State(st): AppRef, Path(id): Path<String>, Json(edit): Json<RecordEdit>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    mutate(ds, move |s| {
        s.workspace.stage_edit(edit.record, edit.fields)?;
        let staged: &BTreeMap<usize, Vec<String>> = s.workspace.staged();
        Ok(Json(json!({"staged": staged})))
    })
    .await
}

pub async fn apply_changes(State(st): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    let base = st.config.pipeline.clone();
    let worker = ds.clone();
    mutate(ds, move |s| {
        let provider = worker.meta.provider.build();
        let pipeline = Pipeline::new(worker.config(&base), provider.as_ref());
        let version = s.workspace.apply_changes(&pipeline)?;
        Ok(Json(json!({"version": version})))
    })
    .await
}

pub async fn subfields(State(st): AppRef, Path(id): Path<String>, Json(target): Json<CellSelector>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    read(&ds, |s| {
        let subs = s.workspace.subfield_clusters(&target)?;
        Ok(Json(serde_json::to_value(subs).map_err(ApiError::internal)?))
    })
    .await
}

pub async fn highlight(State(st): AppRef, Path(id): Path<String>, Json(target): Json<CellSelector>) -> ApiResult<Json<Value>> {
    let ds = st.dataset(&id).await?;
    read(&ds, |s| Ok(Json(json!({"records": s.workspace.highlight(&target)?})))).await
}

#[derive(Debug, Deserialize)]
pub struct TableBody {
    columns: Vec<usize>,
}

pub async fn create_table(State(st): AppRef, Path(id): Path<String>, Json(body): Json<TableBody>) -> ApiResult<Response> {
    let ds = st.dataset(&id).await?;
    let table = read(&ds, |s| Ok(s.workspace.build_table(&body.columns)?)).await?;
    let table_id = st.fresh_id("tbl");
    st.save_table(&table_id, &table)?;
    Ok((StatusCode::CREATED, Json(json!({"tableId": table_id, "table": table}))).into_response())
}

#[derive(Debug, Deserialize)]
pub struct FormatQuery {
    format: Option<String>,
}

pub async fn get_table(State(st): AppRef, Path(id): Path<String>, Query(q): Query<FormatQuery>) -> ApiResult<Response> {
    let table = st.tables.lock().expect("tables lock").get(&id).cloned();
    let table = table.ok_or_else(|| ApiError::not_found(format!("table {id}")))?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(json_text(table.to_json())),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], table.to_csv()).into_response()),
        other => Err(ApiError::bad_request(format!("unknown format {other}"))),
    }
}

pub async fn export(State(st): AppRef, Path(id): Path<String>, Query(q): Query<VersionQuery>) -> ApiResult<Response> {
    let ds = st.dataset(&id).await?;
    let text = read(&ds, |s| {
        let ws = &s.workspace;
        Ok(ws.export(q.version.unwrap_or(ws.version()))?.to_string())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}
