//! File-backed board persistence.
//!
//! Layout under the root directory:
//!
//! ```text
//! <root>/index.json          board registry
//! <root>/boards/<id>.json    one canonical board document per board
//! <root>/blobs/<sha256>      image bytes, content addressed
//! ```
//!
//! Every document write goes to a temporary sibling, is fsynced, and is then
//! renamed over the target, so a crash leaves either the old or the new
//! document and never a torn one. Mutations are applied to a copy of the
//! board and only swapped into memory after the rename succeeded.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    create_comment, AnchoredComment, Board, BoardId, CommentCategory, CommentDraft, CommentId, DomainError, ImageRef,
    ReplyDraft,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error(transparent)]
    Validation(#[from] DomainError),
    #[error("{0} already exists")]
    Conflict(String),
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NotFound(_) => "not_found",
            Self::InvalidImage(_) => "invalid_image",
            Self::Validation(e) => e.code(),
            Self::Conflict(_) => "conflict",
            Self::Corrupt { .. } => "corrupt",
            Self::Io(_) => "io_failure",
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    #[default]
    NewestFirst,
    Popularity,
    Responses,
}

impl std::str::FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "newest_first" | "newest" | "date" => Ok(Self::NewestFirst),
            "popularity" => Ok(Self::Popularity),
            "responses" => Ok(Self::Responses),
            other => Err(format!("unknown sort order {other:?}; expected newest_first, popularity or responses")),
        }
    }
}

/// Orders comments for the list view. Ties always go to the newer comment;
/// comments with identical timestamps fall back to later insertion first.
pub fn sort_comments(
    comments: &[AnchoredComment],
    sort: SortOrder,
    category_filter: Option<CommentCategory>,
) -> Vec<AnchoredComment> {
    let mut indexed: Vec<(usize, &AnchoredComment)> =
        comments.iter().enumerate().filter(|(_, c)| category_filter.is_none_or(|f| c.category == Some(f))).collect();
    let newest = |(ia, a): &(usize, &AnchoredComment), (ib, b): &(usize, &AnchoredComment)| {
        b.created_at.cmp(&a.created_at).then(ib.cmp(ia))
    };
    match sort {
        SortOrder::NewestFirst => indexed.sort_by(newest),
        SortOrder::Popularity => indexed.sort_by(|a, b| b.1.likes.cmp(&a.1.likes).then_with(|| newest(a, b))),
        SortOrder::Responses => {
            indexed.sort_by(|a, b| b.1.reply_count().cmp(&a.1.reply_count()).then_with(|| newest(a, b)))
        }
    }
    indexed.into_iter().map(|(_, c)| c.clone()).collect()
}

/// Source of "now" for server-assigned timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Points at which a test can make the next document write fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// The temporary file is fully written, the rename never happens.
    BeforeRename,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: BoardId,
    pub title: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    boards: Vec<IndexEntry>,
}

pub struct BoardStore {
    root: PathBuf,
    clock: Box<dyn Clock>,
    boards: RwLock<HashMap<BoardId, Arc<Mutex<Board>>>>,
    /// Comment and reply id to owning board.
    owners: RwLock<HashMap<CommentId, BoardId>>,
    index: Mutex<Index>,
    fault: Mutex<Option<FaultPoint>>,
}

impl std::fmt::Debug for BoardStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoardStore").field("root", &self.root).finish_non_exhaustive()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decodes just enough of the image to learn its dimensions.
pub fn image_dimensions(bytes: &[u8]) -> Result<(u32, u32)> {
    if bytes.is_empty() {
        return Err(StoreError::InvalidImage("empty image".into()));
    }
    let reader = image::ImageReader::new(io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| StoreError::InvalidImage(e.to_string()))?;
    if reader.format().is_none() {
        return Err(StoreError::InvalidImage("unrecognized image format".into()));
    }
    let (w, h) = reader.into_dimensions().map_err(|e| StoreError::InvalidImage(e.to_string()))?;
    if w == 0 || h == 0 {
        return Err(StoreError::InvalidImage(format!("degenerate dimensions {w}x{h}")));
    }
    Ok((w, h))
}

/// MIME type guessed from the image header.
pub fn image_mime(bytes: &[u8]) -> &'static str {
    image::guess_format(bytes).map(|f| f.to_mime_type()).unwrap_or("application/octet-stream")
}

fn write_atomic(path: &Path, bytes: &[u8], fault: Option<FaultPoint>) -> io::Result<()> {
    let dir = path.parent().expect("document paths have a parent");
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("doc");
    let tmp = dir.join(format!(".{file_name}.tmp-{}", uuid::Uuid::new_v4().simple()));
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    if fault == Some(FaultPoint::BeforeRename) {
        return Err(io::Error::other("injected fault before rename"));
    }
    fs::rename(&tmp, path)?;
    // Persist the directory entry too. Not every platform can open a directory.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

impl BoardStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        Self::open_with_clock(root, Box::new(SystemClock))
    }

    pub fn open_with_clock(root: impl Into<PathBuf>, clock: Box<dyn Clock>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("boards"))?;
        fs::create_dir_all(root.join("blobs"))?;

        let index_path = root.join("index.json");
        let index: Index = match fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Corrupt { path: index_path.clone(), message: e.to_string() })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Index::default(),
            Err(e) => return Err(e.into()),
        };

        // Leftover temporaries from an interrupted write are never authoritative.
        for dir in [root.clone(), root.join("boards"), root.join("blobs")] {
            for entry in fs::read_dir(&dir)? {
                let entry = entry?;
                let name = entry.file_name();
                if name.to_string_lossy().contains(".tmp-") {
                    let _ = fs::remove_file(entry.path());
                }
            }
        }

        let mut boards = HashMap::new();
        let mut owners = HashMap::new();
        for entry in &index.boards {
            let path = root.join("boards").join(format!("{}.json", entry.id));
            let bytes = fs::read(&path)?;
            let board: Board = serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Corrupt { path: path.clone(), message: e.to_string() })?;
            board.validate().map_err(|e| StoreError::Corrupt { path: path.clone(), message: e.to_string() })?;
            for c in &board.comments {
                owners.insert(c.id.clone(), board.id.clone());
                for r in &c.replies {
                    owners.insert(r.id.clone(), board.id.clone());
                }
            }
            boards.insert(board.id.clone(), Arc::new(Mutex::new(board)));
        }

        Ok(Self {
            root,
            clock,
            boards: RwLock::new(boards),
            owners: RwLock::new(owners),
            index: Mutex::new(index),
            fault: Mutex::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Makes the next document write fail at `point`. One-shot.
    pub fn inject_fault(&self, point: FaultPoint) {
        *self.fault.lock().expect("fault lock") = Some(point);
    }

    fn take_fault(&self) -> Option<FaultPoint> {
        self.fault.lock().expect("fault lock").take()
    }

    fn board_path(&self, id: &BoardId) -> PathBuf {
        self.root.join("boards").join(format!("{id}.json"))
    }

    pub fn blob_path(&self, image_ref: &ImageRef) -> PathBuf {
        self.root.join("blobs").join(image_ref.as_str())
    }

    fn persist_board(&self, board: &Board) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(board).expect("board serializes");
        write_atomic(&self.board_path(&board.id), &bytes, self.take_fault())?;
        Ok(())
    }

    fn store_blob(&self, bytes: &[u8]) -> Result<ImageRef> {
        let image_ref = ImageRef::from_digest(sha256_hex(bytes));
        let path = self.blob_path(&image_ref);
        if !path.exists() {
            write_atomic(&path, bytes, None)?;
        }
        Ok(image_ref)
    }

    fn register(&self, board: Board) -> Result<Board> {
        let mut index = self.index.lock().expect("index lock");
        if index.boards.iter().any(|e| e.id == board.id) {
            return Err(StoreError::Conflict(format!("board {}", board.id)));
        }
        self.persist_board(&board)?;
        let mut next = Index { boards: index.boards.clone() };
        next.boards.push(IndexEntry { id: board.id.clone(), title: board.title.clone(), created_at: board.created_at });
        let bytes = serde_json::to_vec_pretty(&next).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &bytes, None)?;
        *index = next;

        let mut owners = self.owners.write().expect("owners lock");
        for c in &board.comments {
            owners.insert(c.id.clone(), board.id.clone());
            for r in &c.replies {
                owners.insert(r.id.clone(), board.id.clone());
            }
        }
        self.boards.write().expect("boards lock").insert(board.id.clone(), Arc::new(Mutex::new(board.clone())));
        Ok(board)
    }

    /// Creates a board around an uploaded image.
    pub fn put_board(&self, title: &str, image: &[u8]) -> Result<Board> {
        let (width, height) = image_dimensions(image)?;
        let image_ref = self.store_blob(image)?;
        let board = Board::new(title, image_ref, width, height, self.now())?;
        self.register(board)
    }

    /// Inserts an existing board document as-is, e.g. one produced by export.
    /// The image blob must already be present or be supplied.
    pub fn insert_board(&self, board: Board, image: Option<&[u8]>) -> Result<Board> {
        board.validate()?;
        if let Some(bytes) = image {
            let digest = sha256_hex(bytes);
            if digest != board.image_ref.as_str() {
                return Err(StoreError::InvalidImage(format!(
                    "image digest {digest} does not match board image_ref {}",
                    board.image_ref
                )));
            }
            image_dimensions(bytes)?;
            self.store_blob(bytes)?;
        } else if !self.blob_path(&board.image_ref).exists() {
            return Err(StoreError::NotFound(format!("image blob {}", board.image_ref)));
        }
        self.register(board)
    }

    pub fn list_boards(&self) -> Vec<IndexEntry> {
        self.index.lock().expect("index lock").boards.clone()
    }

    fn handle(&self, id: &BoardId) -> Result<Arc<Mutex<Board>>> {
        self.boards
            .read()
            .expect("boards lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("board {id}")))
    }

    pub fn get_board(&self, id: &BoardId) -> Result<Board> {
        Ok(self.handle(id)?.lock().expect("board lock").clone())
    }

    pub fn image_bytes(&self, id: &BoardId) -> Result<Vec<u8>> {
        let board = self.get_board(id)?;
        fs::read(self.blob_path(&board.image_ref)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(format!("image blob {}", board.image_ref)),
            _ => e.into(),
        })
    }

    /// Board owning a comment or reply id.
    pub fn owner_of(&self, id: &CommentId) -> Result<BoardId> {
        self.owners
            .read()
            .expect("owners lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("comment {id}")))
    }

    /// Runs `mutate` on a copy of the board, persists the copy, then
    /// publishes it. The board lock is held throughout, which serializes
    /// writers per board.
    pub fn mutate<T>(&self, id: &BoardId, mutate: impl FnOnce(&mut Board) -> Result<T>) -> Result<T> {
        let handle = self.handle(id)?;
        let mut guard = handle.lock().expect("board lock");
        let mut next = guard.clone();
        let out = mutate(&mut next)?;
        next.validate()?;
        self.persist_board(&next)?;
        let mut owners = self.owners.write().expect("owners lock");
        for c in &next.comments {
            owners.entry(c.id.clone()).or_insert_with(|| next.id.clone());
            for r in &c.replies {
                owners.entry(r.id.clone()).or_insert_with(|| next.id.clone());
            }
        }
        *guard = next;
        Ok(out)
    }

    pub fn append_comment(&self, board_id: &BoardId, draft: CommentDraft) -> Result<AnchoredComment> {
        let comment = create_comment(draft, self.now())?;
        self.mutate(board_id, |b| Ok(b.push_comment(comment)?.clone()))
    }

    /// Appends a reply and returns the updated parent comment.
    pub fn append_reply(
        &self,
        board_id: &BoardId,
        comment_id: &CommentId,
        draft: ReplyDraft,
    ) -> Result<AnchoredComment> {
        let now = self.now();
        self.mutate(board_id, |b| match b.add_reply(comment_id, draft, now) {
            Ok(c) => Ok(c.clone()),
            Err(DomainError::CommentNotFound(id)) => Err(StoreError::NotFound(format!("comment {id}"))),
            Err(e) => Err(e.into()),
        })
    }

    pub fn increment_like(&self, board_id: &BoardId, comment_id: &CommentId) -> Result<AnchoredComment> {
        self.mutate(board_id, |b| match b.increment_like(comment_id) {
            Ok(c) => Ok(c.clone()),
            Err(DomainError::CommentNotFound(id)) => Err(StoreError::NotFound(format!("comment {id}"))),
            Err(e) => Err(e.into()),
        })
    }

    pub fn list_comments(
        &self,
        board_id: &BoardId,
        sort: SortOrder,
        category_filter: Option<CommentCategory>,
    ) -> Result<Vec<AnchoredComment>> {
        let handle = self.handle(board_id)?;
        let board = handle.lock().expect("board lock");
        Ok(sort_comments(&board.comments, sort, category_filter))
    }
}
