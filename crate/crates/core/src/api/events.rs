//! Per-board event log with resumable sequence cursors.
//!
//! Each board has an append-only list of notices numbered 1, 2, 3, ...
//! Readers replay from any cursor and then wait on a watch channel for the
//! next sequence number; no reader ever blocks a writer or another reader.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use crate::domain::{BoardId, CommentId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    CommentAdded,
    ReplyAdded,
    LikeAdded,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::CommentAdded => "comment_added",
            Self::ReplyAdded => "reply_added",
            Self::LikeAdded => "like_added",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventNotice {
    pub board_id: BoardId,
    pub sequence: u64,
    pub kind: EventKind,
    pub entity_id: CommentId,
}

struct BoardLog {
    notices: Mutex<Vec<EventNotice>>,
    latest: watch::Sender<u64>,
}

impl BoardLog {
    fn new() -> Self {
        Self { notices: Mutex::new(Vec::new()), latest: watch::channel(0).0 }
    }
}

#[derive(Default)]
pub struct EventHub {
    logs: RwLock<HashMap<BoardId, Arc<BoardLog>>>,
}

impl EventHub {
    pub fn new() -> Self {
        Self::default()
    }

    fn log(&self, board: &BoardId) -> Arc<BoardLog> {
        if let Some(log) = self.logs.read().expect("logs lock").get(board) {
            return log.clone();
        }
        self.logs.write().expect("logs lock").entry(board.clone()).or_insert_with(|| Arc::new(BoardLog::new())).clone()
    }

    /// Appends a notice and wakes subscribers. Returns the assigned notice.
    pub fn publish(&self, board: &BoardId, kind: EventKind, entity_id: CommentId) -> EventNotice {
        let log = self.log(board);
        let notice = {
            let mut notices = log.notices.lock().expect("notices lock");
            let notice = EventNotice { board_id: board.clone(), sequence: notices.len() as u64 + 1, kind, entity_id };
            notices.push(notice.clone());
            notice
        };
        log.latest.send_replace(notice.sequence);
        notice
    }

    /// All notices with `sequence > since`, in order.
    pub fn since(&self, board: &BoardId, since: u64) -> Vec<EventNotice> {
        let log = self.log(board);
        let notices = log.notices.lock().expect("notices lock");
        let start = usize::try_from(since).unwrap_or(usize::MAX).min(notices.len());
        notices[start..].to_vec()
    }

    pub fn latest(&self, board: &BoardId) -> u64 {
        *self.log(board).latest.borrow()
    }

    pub fn subscribe(&self, board: &BoardId) -> watch::Receiver<u64> {
        self.log(board).latest.subscribe()
    }
}

/// Endless stream of notices after `since`: the backlog first, then live
/// notices as they are published.
pub fn notice_stream(
    hub: Arc<EventHub>,
    board: BoardId,
    since: u64,
) -> impl futures::Stream<Item = EventNotice> + Send + 'static {
    let rx = hub.subscribe(&board);
    futures::stream::unfold(
        (hub, board, since, rx, std::collections::VecDeque::new()),
        |(hub, board, mut cursor, mut rx, mut pending)| async move {
            loop {
                if let Some(next) = pending.pop_front() {
                    return Some((next, (hub, board, cursor, rx, pending)));
                }
                rx.borrow_and_update();
                let fresh = hub.since(&board, cursor);
                if let Some(last) = fresh.last() {
                    cursor = last.sequence;
                    pending.extend(fresh);
                    continue;
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    )
}
