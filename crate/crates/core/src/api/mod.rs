//! HTTP front door.
//!
//! Handlers are thin: parse, call the store or the patina engine, publish an
//! [`EventNotice`] for every successful mutation, serialize. Bodies are the
//! canonical domain JSON.

pub mod events;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::StreamExt;
use serde::{Deserialize, Serialize};

pub use events::{EventHub, EventKind, EventNotice};

use crate::analytics::{compute_stats, DEFAULT_GRID, DEFAULT_TOP_K};
use crate::domain::{BoardId, CommentCategory, CommentDraft, CommentId, ReplyDraft};
use crate::patina::{build_patina, parse_request, render_svg, PatinaError, PatinaStyleConfig, SvgOptions};
use crate::store::{image_mime, BoardStore, SortOrder, StoreError};

pub struct AppState {
    pub store: BoardStore,
    pub events: Arc<EventHub>,
    pub style: PatinaStyleConfig,
}

impl AppState {
    pub fn new(store: BoardStore) -> Self {
        Self { store, events: Arc::new(EventHub::new()), style: PatinaStyleConfig::default() }
    }
}

type SharedState = Arc<AppState>;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code, message: self.message };
        (self.status, Json(serde_json::json!({ "error": body }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Validation(_) | StoreError::InvalidImage(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::Corrupt { .. } | StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<PatinaError> for ApiError {
    fn from(e: PatinaError) -> Self {
        let status = match e {
            PatinaError::UnknownEncoding(_) | PatinaError::UnknownCategoryFilter(_) => StatusCode::BAD_REQUEST,
            PatinaError::EmptyCorpus | PatinaError::InvalidStyle(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    state: &SharedState,
    work: impl FnOnce(&AppState) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let state = state.clone();
    tokio::task::spawn_blocking(move || work(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("malformed_json", e.to_string()))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/boards", post(create_board).get(list_boards))
        .route("/api/boards/{id}", get(get_board))
        .route("/api/boards/{id}/image", get(get_image))
        .route("/api/boards/{id}/comments", post(create_comment).get(list_comments))
        .route("/api/boards/{id}/patina", get(get_patina))
        .route("/api/boards/{id}/events", get(get_events))
        .route("/api/boards/{id}/stats", get(get_stats))
        .route("/api/comments/{cid}/replies", post(create_reply))
        .route("/api/comments/{cid}/like", post(like_comment))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct BoardSummary {
    id: BoardId,
    title: String,
    image_ref: crate::domain::ImageRef,
    image_width_px: u32,
    image_height_px: u32,
    created_at: chrono::DateTime<chrono::Utc>,
    comment_count: usize,
    reply_count: usize,
}

impl From<&crate::domain::Board> for BoardSummary {
    fn from(b: &crate::domain::Board) -> Self {
        Self {
            id: b.id.clone(),
            title: b.title.clone(),
            image_ref: b.image_ref.clone(),
            image_width_px: b.image_width_px,
            image_height_px: b.image_height_px,
            created_at: b.created_at,
            comment_count: b.comments.len(),
            reply_count: b.total_replies(),
        }
    }
}

async fn create_board(State(state): State<SharedState>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut title = String::new();
    let mut image = None;
    while let Some(field) =
        multipart.next_field().await.map_err(|e| ApiError::bad_request("malformed_multipart", e.to_string()))?
    {
        match field.name() {
            Some("title") => {
                title = field.text().await.map_err(|e| ApiError::bad_request("malformed_multipart", e.to_string()))?
            }
            Some("image") => {
                image =
                    Some(field.bytes().await.map_err(|e| ApiError::bad_request("malformed_multipart", e.to_string()))?)
            }
            _ => {}
        }
    }
    let image = image.ok_or_else(|| ApiError::bad_request("missing_image", "multipart field `image` is required"))?;
    let board = blocking(&state, move |s| Ok(s.store.put_board(&title, &image)?)).await?;
    Ok((StatusCode::CREATED, Json(board)).into_response())
}

async fn list_boards(State(state): State<SharedState>) -> Json<Vec<crate::store::IndexEntry>> {
    Json(state.store.list_boards())
}

async fn get_board(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<BoardSummary>> {
    let board = state.store.get_board(&BoardId::new(id))?;
    Ok(Json(BoardSummary::from(&board)))
}

async fn get_image(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(&state, move |s| Ok(s.store.image_bytes(&BoardId::new(id))?)).await?;
    Ok(([(header::CONTENT_TYPE, image_mime(&bytes))], bytes).into_response())
}

async fn create_comment(State(state): State<SharedState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let board_id = BoardId::new(id);
    // 404 wins over body errors
    state.store.get_board(&board_id)?;
    let draft: CommentDraft = parse_json(&body)?;
    let comment = blocking(&state, move |s| {
        let comment = s.store.append_comment(&board_id, draft)?;
        s.events.publish(&board_id, EventKind::CommentAdded, comment.id.clone());
        Ok(comment)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(comment)).into_response())
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    sort: Option<String>,
    category: Option<String>,
}

async fn list_comments(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<ListQuery>,
) -> ApiResult<Json<Vec<crate::domain::AnchoredComment>>> {
    let sort = match q.sort.as_deref() {
        Some(s) if !s.is_empty() => s.parse::<SortOrder>().map_err(|e| ApiError::bad_request("unknown_sort", e))?,
        _ => SortOrder::default(),
    };
    let category = match q.category.as_deref() {
        Some(c) if !c.is_empty() => {
            Some(c.parse::<CommentCategory>().map_err(|e| ApiError::bad_request("unknown_category", e.to_string()))?)
        }
        _ => None,
    };
    Ok(Json(state.store.list_comments(&BoardId::new(id), sort, category)?))
}

async fn create_reply(State(state): State<SharedState>, Path(cid): Path<String>, body: Bytes) -> ApiResult<Response> {
    let comment_id = CommentId::new(cid);
    let board_id = state.store.owner_of(&comment_id)?;
    let draft: ReplyDraft = parse_json(&body)?;
    let comment = blocking(&state, move |s| {
        let comment = s.store.append_reply(&board_id, &comment_id, draft)?;
        let reply = comment.replies.last().expect("reply appended");
        s.events.publish(&board_id, EventKind::ReplyAdded, reply.id.clone());
        Ok(comment)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(comment)).into_response())
}

async fn like_comment(
    State(state): State<SharedState>,
    Path(cid): Path<String>,
) -> ApiResult<Json<crate::domain::AnchoredComment>> {
    let comment_id = CommentId::new(cid);
    let board_id = state.store.owner_of(&comment_id)?;
    let comment = blocking(&state, move |s| {
        let comment = s.store.increment_like(&board_id, &comment_id)?;
        s.events.publish(&board_id, EventKind::LikeAdded, comment.id.clone());
        Ok(comment)
    })
    .await?;
    Ok(Json(comment))
}

#[derive(Debug, Deserialize)]
struct PatinaQuery {
    encoding: Option<String>,
    category: Option<String>,
    format: Option<String>,
    image: Option<String>,
}

fn accepts(headers: &HeaderMap, mime: &str) -> bool {
    headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .any(|v| v.split(',').any(|part| part.trim().starts_with(mime)))
}

async fn get_patina(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<PatinaQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let board = state.store.get_board(&BoardId::new(id))?;
    let (encoding, category) = parse_request(q.encoding.as_deref(), q.category.as_deref())?;
    let spec = build_patina(&board, encoding, &state.style, category)?;
    let want_svg = match q.format.as_deref() {
        Some("svg") => true,
        Some("json") => false,
        Some(other) => {
            return Err(ApiError::bad_request(
                "unknown_format",
                format!("unknown format {other:?}; expected json or svg"),
            ))
        }
        None => accepts(&headers, "image/svg+xml"),
    };
    if !want_svg {
        return Ok(Json(spec).into_response());
    }
    let options = match q.image.as_deref() {
        Some("inline") => {
            let bytes = state.store.image_bytes(&board.id)?;
            let mime = image_mime(&bytes);
            SvgOptions::inline(bytes, mime)
        }
        _ => SvgOptions::api_href(&board),
    };
    let svg = render_svg(&spec, &board, &options);
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    since: Option<u64>,
}

async fn get_events(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let board_id = BoardId::new(id);
    state.store.get_board(&board_id)?;
    let last_event_id =
        headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse::<u64>().ok());
    let since = q.since.into_iter().chain(last_event_id).max().unwrap_or(0);

    if !accepts(&headers, "text/event-stream") {
        // polling fallback
        return Ok(Json(state.events.since(&board_id, since)).into_response());
    }
    let stream = events::notice_stream(state.events.clone(), board_id, since)
        .map(|notice| Event::default().id(notice.sequence.to_string()).event(notice.kind.label()).json_data(&notice));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response())
}

async fn get_stats(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> ApiResult<Json<crate::analytics::BoardStats>> {
    let board = state.store.get_board(&BoardId::new(id))?;
    Ok(Json(compute_stats(&board, DEFAULT_GRID, DEFAULT_TOP_K)))
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
}

/// Opens the store and serves until the process is stopped.
pub async fn serve(config: ServeConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let store = BoardStore::open(&config.data_dir)?;
    let app = router(Arc::new(AppState::new(store)));
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
