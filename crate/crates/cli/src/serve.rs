use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use dubcorpus_core::corpus::{ManifestSide, PairManifestEntry};
use dubcorpus_core::eval::{self, EvalError, Rating, RatingStore, Score};
use dubcorpus_core::pipeline::Stage;
use dubcorpus_core::{PairKind, SegmentLabel};

struct AppState {
    export_dir: PathBuf,
    entries: BTreeMap<String, PairManifestEntry>,
    queue: Vec<String>,
    labels: HashMap<String, SegmentLabel>,
    store: Mutex<RatingStore>,
}

#[derive(Serialize)]
struct AudioUrls {
    left: String,
    right: String,
}

#[derive(Serialize)]
struct NextPair<'a> {
    pair_id: &'a str,
    kind: PairKind,
    score: f64,
    left: &'a ManifestSide,
    right: &'a ManifestSide,
    audio: AudioUrls,
    remaining: usize,
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Deserialize)]
struct RatingBody {
    pair_id: String,
    annotator: String,
    score: Score,
}

type Shared = Arc<AppState>;

fn error(status: StatusCode, msg: impl ToString) -> Response {
    (
        status,
        Json(serde_json::json!({ "error": msg.to_string() })),
    )
        .into_response()
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, RatingStore> {
    state.store.lock().unwrap_or_else(|p| p.into_inner())
}

async fn next_pair(State(state): State<Shared>, Query(q): Query<NextQuery>) -> Response {
    if q.annotator.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, EvalError::EmptyAnnotator);
    }
    let pending: Vec<&String> = {
        let store = lock(&state);
        state
            .queue
            .iter()
            .filter(|id| !store.has_rated(id, &q.annotator))
            .collect()
    };
    let Some(id) = pending.first() else {
        return StatusCode::NO_CONTENT.into_response();
    };
    let e = &state.entries[*id];
    Json(NextPair {
        pair_id: &e.pair_id,
        kind: e.kind,
        score: e.score,
        left: &e.left,
        right: &e.right,
        audio: AudioUrls {
            left: format!("/api/pairs/{id}/audio/left"),
            right: format!("/api/pairs/{id}/audio/right"),
        },
        remaining: pending.len(),
    })
    .into_response()
}

async fn pair_audio(
    State(state): State<Shared>,
    UrlPath((id, side)): UrlPath<(String, String)>,
) -> Response {
    let Some(e) = state.entries.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown pair {id}"));
    };
    let rel = match side.as_str() {
        "left" => &e.left.audio,
        "right" => &e.right.audio,
        _ => {
            return error(
                StatusCode::NOT_FOUND,
                format!("side must be left or right, got '{side}'"),
            )
        }
    };
    match tokio::fs::read(state.export_dir.join(rel)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn post_rating(State(state): State<Shared>, Json(body): Json<RatingBody>) -> Response {
    let rating = Rating::now(body.pair_id, body.annotator, body.score);
    let result = lock(&state).record(rating.clone());
    match result {
        Ok(()) => (StatusCode::CREATED, Json(rating)).into_response(),
        Err(e @ EvalError::UnknownPair(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e @ EvalError::EmptyAnnotator) => error(StatusCode::BAD_REQUEST, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn report(State(state): State<Shared>) -> Response {
    let snapshot = lock(&state).ratings();
    Json(eval::agreement_report(&snapshot, &state.labels)).into_response()
}

fn router(state: Shared, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/pairs/next", get(next_pair))
        .route("/api/pairs/:id/audio/:side", get(pair_audio))
        .route("/api/ratings", post(post_rating))
        .route("/api/report", get(report))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the sampled pairs (or every exported pair when no sample exists).
pub fn run(out_dir: &Path, addr: &str, ui_dir: Option<&Path>) -> Result<()> {
    let entries = crate::manifest(out_dir)?;
    let sample_path = out_dir.join(crate::SAMPLE_FILE);
    let queue: Vec<String> = match std::fs::read_to_string(&sample_path) {
        Ok(text) => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            entries.iter().map(|e| e.pair_id.clone()).collect()
        }
        Err(e) => return Err(e).with_context(|| format!("reading {}", sample_path.display())),
    };
    if let Some(unknown) = queue
        .iter()
        .find(|id| !entries.iter().any(|e| &e.pair_id == *id))
    {
        anyhow::bail!("{} lists unknown pair {unknown}", sample_path.display());
    }
    let store = crate::open_store(out_dir, &entries)?;
    let state = Arc::new(AppState {
        export_dir: out_dir.join(Stage::Export.name()),
        labels: crate::labels(&entries),
        entries: entries
            .into_iter()
            .map(|e| (e.pair_id.clone(), e))
            .collect(),
        queue,
        store: Mutex::new(store),
    });
    let app = router(state, ui_dir);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok(())
    })
}
