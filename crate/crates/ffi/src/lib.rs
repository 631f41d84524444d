//! C ABI over `patina-core`.
//!
//! Every call returns a [`PatinaStatus`]. Results come back as NUL-terminated
//! UTF-8 strings (JSON or SVG) through an out-pointer and must be released
//! with [`patina_string_free`]. On failure the out-pointer is left untouched
//! and [`patina_last_error_message`] describes the error for the calling
//! thread.
//!
//! A [`PatinaStore`] handle may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use patina_core::analytics::{compute_stats, DEFAULT_GRID, DEFAULT_TOP_K};
use patina_core::domain::{BoardId, CommentCategory, CommentDraft, CommentId, ReplyDraft};
use patina_core::ingest::{import_into_store, parse_thread, IngestError};
use patina_core::patina::{build_patina, parse_request, render_svg, PatinaError, SvgOptions};
use patina_core::store::{image_mime, BoardStore, SortOrder, StoreError};
use patina_core::PatinaStyleConfig;

/// Result code of every `patina_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatinaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Unknown encoding, category or sort name.
    InvalidArgument = 3,
    NotFound = 4,
    /// Domain rule violated: bad anchor, no anchors, reply to a reply.
    Validation = 5,
    InvalidImage = 6,
    Conflict = 7,
    /// Input JSON could not be parsed.
    Malformed = 8,
    Io = 9,
    Internal = 10,
}

/// Opaque store handle.
pub struct PatinaStore {
    inner: BoardStore,
}

struct Failure {
    status: PatinaStatus,
    message: String,
}

impl Failure {
    fn new(status: PatinaStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => PatinaStatus::NotFound,
            StoreError::Validation(_) => PatinaStatus::Validation,
            StoreError::InvalidImage(_) => PatinaStatus::InvalidImage,
            StoreError::Conflict(_) => PatinaStatus::Conflict,
            StoreError::Corrupt { .. } | StoreError::Io(_) => PatinaStatus::Io,
        };
        Self::new(status, format!("{}: {e}", e.code()))
    }
}

impl From<PatinaError> for Failure {
    fn from(e: PatinaError) -> Self {
        let status = match e {
            PatinaError::UnknownEncoding(_) | PatinaError::UnknownCategoryFilter(_) => PatinaStatus::InvalidArgument,
            PatinaError::EmptyCorpus | PatinaError::InvalidStyle(_) => PatinaStatus::Internal,
        };
        Self::new(status, format!("{}: {e}", e.code()))
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Self::new(PatinaStatus::Malformed, format!("malformed_input: {e}"))
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PatinaStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PatinaStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal: panic inside patina");
            PatinaStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(PatinaStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(PatinaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn store_arg<'a>(p: *const PatinaStore) -> Result<&'a BoardStore, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| Failure::new(PatinaStatus::NullArgument, "store is null"))
}

unsafe fn emit(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(PatinaStatus::NullArgument, "out is null"));
    }
    let c = CString::new(text).map_err(|_| Failure::new(PatinaStatus::Internal, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn emit_json<T: serde::Serialize + ?Sized>(out: *mut *mut c_char, value: &T) -> Result<(), Failure> {
    emit(out, serde_json::to_string(value).map_err(|e| Failure::new(PatinaStatus::Internal, e.to_string()))?)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::new(PatinaStatus::Malformed, format!("malformed_json: {e}")))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `patina_*` call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn patina_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a `patina_*` out-pointer and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn patina_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn patina_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opens (creating if needed) the store rooted at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn patina_store_open(path: *const c_char, out: *mut *mut PatinaStore) -> PatinaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::new(PatinaStatus::NullArgument, "out is null"));
        }
        let inner = BoardStore::open(path)?;
        *out = Box::into_raw(Box::new(PatinaStore { inner }));
        Ok(())
    })
}

/// Closes a store. NULL is ignored.
///
/// # Safety
/// `store` must come from [`patina_store_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn patina_store_free(store: *mut PatinaStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Creates a board from image bytes; writes the board JSON to `out_json`.
///
/// # Safety
/// Pointers must be valid; `image` must hold `image_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn patina_board_create(
    store: *const PatinaStore,
    title: *const c_char,
    image: *const u8,
    image_len: usize,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let title = str_arg(title, "title")?;
        if image.is_null() {
            return Err(Failure::new(PatinaStatus::NullArgument, "image is null"));
        }
        let bytes = std::slice::from_raw_parts(image, image_len);
        emit_json(out_json, &store.put_board(title, bytes)?)
    })
}

/// Full board document as JSON.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_board_get(
    store: *const PatinaStore,
    board_id: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board = store.get_board(&BoardId::new(str_arg(board_id, "board_id")?))?;
        emit_json(out_json, &board)
    })
}

/// Adds a comment from a JSON draft (`{"text", "author", "category", "anchors": [...]}`).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_comment_create(
    store: *const PatinaStore,
    board_id: *const c_char,
    draft_json: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board_id = BoardId::new(str_arg(board_id, "board_id")?);
        let draft: CommentDraft = parse_json(str_arg(draft_json, "draft_json")?)?;
        emit_json(out_json, &store.append_comment(&board_id, draft)?)
    })
}

/// Replies to a top-level comment; writes the updated parent comment.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_reply_create(
    store: *const PatinaStore,
    comment_id: *const c_char,
    draft_json: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let comment_id = CommentId::new(str_arg(comment_id, "comment_id")?);
        let draft: ReplyDraft = parse_json(str_arg(draft_json, "draft_json")?)?;
        let board_id = store.owner_of(&comment_id)?;
        emit_json(out_json, &store.append_reply(&board_id, &comment_id, draft)?)
    })
}

/// Adds one like; writes the updated comment.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_comment_like(
    store: *const PatinaStore,
    comment_id: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let comment_id = CommentId::new(str_arg(comment_id, "comment_id")?);
        let board_id = store.owner_of(&comment_id)?;
        emit_json(out_json, &store.increment_like(&board_id, &comment_id)?)
    })
}

/// Ordered comments as a JSON array. `sort` and `category` may be NULL.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_comments_list(
    store: *const PatinaStore,
    board_id: *const c_char,
    sort: *const c_char,
    category: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board_id = BoardId::new(str_arg(board_id, "board_id")?);
        let sort = match opt_str_arg(sort, "sort")? {
            Some(s) => {
                s.parse::<SortOrder>().map_err(|e| Failure::new(PatinaStatus::InvalidArgument, e.to_string()))?
            }
            None => SortOrder::default(),
        };
        let category = opt_str_arg(category, "category")?
            .map(|c| c.parse::<CommentCategory>())
            .transpose()
            .map_err(|e| Failure::new(PatinaStatus::InvalidArgument, e.to_string()))?;
        emit_json(out_json, &store.list_comments(&board_id, sort, category)?)
    })
}

/// RenderSpec JSON for `encoding` (NULL means activity). `category` may be NULL.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_render_spec(
    store: *const PatinaStore,
    board_id: *const c_char,
    encoding: *const c_char,
    category: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board = store.get_board(&BoardId::new(str_arg(board_id, "board_id")?))?;
        let (encoding, category) =
            parse_request(opt_str_arg(encoding, "encoding")?, opt_str_arg(category, "category")?)?;
        emit_json(out_json, &build_patina(&board, encoding, &PatinaStyleConfig::default(), category)?)
    })
}

/// SVG document. With `inline_image` the image is embedded, otherwise it is
/// referenced by its HTTP API path.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_render_svg(
    store: *const PatinaStore,
    board_id: *const c_char,
    encoding: *const c_char,
    category: *const c_char,
    inline_image: bool,
    out_svg: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board = store.get_board(&BoardId::new(str_arg(board_id, "board_id")?))?;
        let (encoding, category) =
            parse_request(opt_str_arg(encoding, "encoding")?, opt_str_arg(category, "category")?)?;
        let spec = build_patina(&board, encoding, &PatinaStyleConfig::default(), category)?;
        let options = if inline_image {
            let bytes = store.image_bytes(&board.id)?;
            let mime = image_mime(&bytes);
            SvgOptions::inline(bytes, mime)
        } else {
            SvgOptions::api_href(&board)
        };
        emit(out_svg, render_svg(&spec, &board, &options))
    })
}

/// Board statistics JSON on the default 64x64 grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_board_stats(
    store: *const PatinaStore,
    board_id: *const c_char,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board = store.get_board(&BoardId::new(str_arg(board_id, "board_id")?))?;
        emit_json(out_json, &compute_stats(&board, DEFAULT_GRID, DEFAULT_TOP_K))
    })
}

/// Imports a thread (JSON array of records); writes the import report.
/// A negative `top_level_limit` means no limit.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn patina_import_thread(
    store: *const PatinaStore,
    board_id: *const c_char,
    thread_json: *const c_char,
    top_level_limit: i64,
    out_json: *mut *mut c_char,
) -> PatinaStatus {
    guard(|| {
        let store = store_arg(store)?;
        let board_id = BoardId::new(str_arg(board_id, "board_id")?);
        let records = parse_thread(str_arg(thread_json, "thread_json")?.as_bytes())?;
        let limit = usize::try_from(top_level_limit).ok();
        emit_json(out_json, &import_into_store(store, &board_id, &records, limit)?)
    })
}
