//! HTTP API over the profiling pipeline and the wrangling workspace.
//!
//! Datasets are uploaded as raw text and profiled in a background job.
//! Mutations of one dataset are serialized: a second concurrent mutation
//! gets 409. POST and PUT requests carrying an `Idempotency-Key` header are
//! answered from a cache when repeated.

pub mod error;
mod routes;
pub mod state;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{HeaderValue, Method};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{Any, CorsLayer};

pub use error::{ApiError, ApiResult};
pub use routes::SampleBody;
pub use state::{AppState, JobState, JobStatus, ProviderChoice, ServiceConfig};

const MAX_BODY: usize = 256 * 1024 * 1024;
const IDEMPOTENCY_HEADER: &str = "idempotency-key";

pub fn router(state: Arc<AppState>) -> Router {
    let cors = match &state.config.cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => CorsLayer::new().allow_origin(Any),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods([Method::GET, Method::POST, Method::PUT])
    .allow_headers(Any);

    Router::new()
        .route("/health", get(routes::health))
        .route("/datasets", post(routes::create_dataset).get(routes::list_datasets))
        .route("/datasets/{id}", get(routes::get_dataset))
        .route("/datasets/{id}/sample", get(routes::get_sample).put(routes::put_sample))
        .route("/datasets/{id}/profile", get(routes::get_profile))
        .route("/datasets/{id}/records", get(routes::get_records))
        .route("/datasets/{id}/ops", post(routes::post_op))
        .route("/datasets/{id}/undo", post(routes::undo))
        .route("/datasets/{id}/redo", post(routes::redo))
        .route("/datasets/{id}/edits", post(routes::stage_edit))
        .route("/datasets/{id}/apply-changes", post(routes::apply_changes))
        .route("/datasets/{id}/subfields", post(routes::subfields))
        .route("/datasets/{id}/highlight", post(routes::highlight))
        .route("/datasets/{id}/tables", post(routes::create_table))
        .route("/datasets/{id}/export", get(routes::export))
        .route("/jobs/{id}", get(routes::get_job))
        .route("/tables/{id}", get(routes::get_table))
        .layer(middleware::from_fn_with_state(state.clone(), idempotency))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .layer(cors)
        .with_state(state)
}

/// Replays the stored response of a POST or PUT whose idempotency key was
/// seen before for the same method and path. Only non-5xx responses are kept.
async fn idempotency(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let key = match (req.method(), req.headers().get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok())) {
        (&Method::POST | &Method::PUT, Some(k)) => format!("{} {} {k}", req.method(), req.uri()),
        _ => return next.run(req).await,
    };
    if let Some(hit) = st.idempotency.lock().expect("idempotency lock").get(&key).cloned() {
        let mut resp = Response::new(Body::from(hit.body));
        *resp.status_mut() = axum::http::StatusCode::from_u16(hit.status).unwrap_or_default();
        if let Some(ct) = hit.content_type.and_then(|c| HeaderValue::from_str(&c).ok()) {
            resp.headers_mut().insert(axum::http::header::CONTENT_TYPE, ct);
        }
        return resp;
    }
    let resp = next.run(req).await;
    let (parts, body) = resp.into_parts();
    let Ok(bytes) = to_bytes(body, MAX_BODY).await else {
        return ApiError::internal("response body too large").into_response();
    };
    if !parts.status.is_server_error() {
        let content_type =
            parts.headers.get(axum::http::header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).map(str::to_string);
        st.idempotency.lock().expect("idempotency lock").insert(
            key,
            state::CachedResponse { status: parts.status.as_u16(), content_type, body: bytes.to_vec() },
        );
    }
    Response::from_parts(parts, Body::from(bytes))
}

/// Opens the storage and serves until the process is stopped.
pub async fn serve(addr: &str, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::open(config).await?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("textprof listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
