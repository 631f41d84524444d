//! Import of exported discussion threads (Reddit-style) onto a board.
//!
//! Records carry their anchors; the rectangles come from a manual mapping
//! step done before import, either inline or through an anchor side-file.
//! Every input record ends up either imported or listed in the
//! [`ImportReport`] exclusions with a reason.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::domain::{validate_anchor, AnchorRect, AnchoredComment, Board, BoardId, CommentCategory, CommentId, Reply};
use crate::store::{BoardStore, StoreError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed input at line {line}, column {column}: {message}")]
    MalformedInput { line: usize, column: usize, message: String },
}

impl From<serde_json::Error> for IngestError {
    fn from(e: serde_json::Error) -> Self {
        Self::MalformedInput { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// Accepts RFC 3339 strings or Unix epoch seconds (integer or fractional,
/// as the Reddit API emits them).
fn deserialize_timestamp<'de, D: Deserializer<'de>>(deserializer: D) -> Result<DateTime<Utc>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Epoch(f64),
    }
    match Raw::deserialize(deserializer)? {
        Raw::Text(s) => {
            DateTime::parse_from_rfc3339(&s).map(|t| t.with_timezone(&Utc)).map_err(serde::de::Error::custom)
        }
        Raw::Epoch(secs) => {
            let whole = secs.floor();
            let nanos = ((secs - whole) * 1e9).round() as u32;
            DateTime::from_timestamp(whole as i64, nanos.min(999_999_999))
                .ok_or_else(|| serde::de::Error::custom(format!("timestamp {secs} out of range")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRecord {
    pub external_id: String,
    #[serde(default)]
    pub parent_external_id: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub score: i64,
    #[serde(deserialize_with = "deserialize_timestamp")]
    pub created_utc: DateTime<Utc>,
    #[serde(default)]
    pub category: Option<CommentCategory>,
    #[serde(default)]
    pub anchors: Option<Vec<AnchorRect>>,
}

impl ExternalRecord {
    pub fn is_reply(&self) -> bool {
        self.parent_external_id.is_some()
    }
}

/// Parses a thread file: a JSON array of [`ExternalRecord`] in file order.
pub fn parse_thread(bytes: &[u8]) -> Result<Vec<ExternalRecord>, IngestError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Anchor side-file: `{"<external_id>": [[x, y, w, h], ...], ...}`.
pub type AnchorSideFile = HashMap<String, Vec<[f64; 4]>>;

pub fn parse_anchor_side_file(bytes: &[u8]) -> Result<AnchorSideFile, IngestError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Replaces record anchors with side-file entries where present.
pub fn apply_side_file(records: &mut [ExternalRecord], side: &AnchorSideFile) {
    for record in records {
        if let Some(rects) = side.get(&record.external_id) {
            record.anchors = Some(rects.iter().map(|[x, y, w, h]| AnchorRect::new(*x, *y, *w, *h)).collect());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    NoAnchorAssignment,
    InvalidAnchor,
    NestedReply,
    Limit,
    Orphaned,
    DanglingParent,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub external_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported_top_level: usize,
    pub imported_replies: usize,
    /// In input order.
    pub excluded: Vec<Exclusion>,
    pub truncated_at_limit: bool,
}

impl ImportReport {
    pub fn records_consumed(&self) -> usize {
        self.imported_top_level + self.imported_replies + self.excluded.len()
    }

    pub fn count(&self, reason: ExclusionReason) -> usize {
        self.excluded.iter().filter(|e| e.reason == reason).count()
    }
}

/// Imports `records` onto `board` in place.
///
/// Top-level records are taken in file order until `top_level_limit`
/// comments have been imported. Upvote scores become likes (negative scores
/// clamp to zero). Replies attach to their imported parent; anything deeper
/// than one level is dropped.
pub fn import_thread(board: &mut Board, records: &[ExternalRecord], top_level_limit: Option<usize>) -> ImportReport {
    let mut existing: HashSet<&str> = HashSet::new();
    for c in &board.comments {
        existing.extend(c.external_id.as_deref());
        existing.extend(c.replies.iter().filter_map(|r| r.external_id.as_deref()));
    }
    let existing: HashSet<String> = existing.into_iter().map(str::to_owned).collect();

    let by_id: HashMap<&str, &ExternalRecord> = records.iter().map(|r| (r.external_id.as_str(), r)).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let first_occurrence: Vec<bool> = records.iter().map(|r| seen.insert(r.external_id.as_str())).collect();
    let mut outcome: Vec<Option<ExclusionReason>> = vec![None; records.len()];
    let mut report = ImportReport::default();

    // Parents imported by an earlier run can still receive new replies.
    let mut imported_parents: HashMap<String, usize> =
        board.comments.iter().enumerate().filter_map(|(idx, c)| c.external_id.clone().map(|id| (id, idx))).collect();
    // top-level comments first so replies can resolve parents regardless of order
    for (i, record) in records.iter().enumerate() {
        if record.is_reply() {
            continue;
        }
        let reason = if !first_occurrence[i] || existing.contains(&record.external_id) {
            Some(ExclusionReason::Duplicate)
        } else {
            match record.anchors.as_deref() {
                None | Some([]) => Some(ExclusionReason::NoAnchorAssignment),
                Some(anchors) if anchors.iter().any(|a| validate_anchor(a).is_err()) => {
                    Some(ExclusionReason::InvalidAnchor)
                }
                Some(_) if top_level_limit.is_some_and(|limit| report.imported_top_level >= limit) => {
                    report.truncated_at_limit = true;
                    Some(ExclusionReason::Limit)
                }
                Some(_) => None,
            }
        };
        if let Some(reason) = reason {
            outcome[i] = Some(reason);
            continue;
        }
        board.comments.push(AnchoredComment {
            id: CommentId::generate(),
            author: record.author.clone(),
            text: record.text.clone(),
            category: record.category,
            anchors: record.anchors.clone().unwrap_or_default(),
            likes: record.score.max(0) as u64,
            replies: Vec::new(),
            created_at: record.created_utc,
            external_id: Some(record.external_id.clone()),
            anchor_target: None,
        });
        imported_parents.insert(record.external_id.clone(), board.comments.len() - 1);
        report.imported_top_level += 1;
    }

    for (i, record) in records.iter().enumerate() {
        let Some(parent_id) = record.parent_external_id.as_deref() else { continue };
        let reason = if !first_occurrence[i] || existing.contains(&record.external_id) {
            Some(ExclusionReason::Duplicate)
        } else {
            match by_id.get(parent_id) {
                None => Some(ExclusionReason::DanglingParent),
                Some(parent) if parent.is_reply() => Some(ExclusionReason::NestedReply),
                Some(_) => match imported_parents.get(parent_id) {
                    None => Some(ExclusionReason::Orphaned),
                    Some(&idx) => {
                        board.comments[idx].replies.push(Reply {
                            id: CommentId::generate(),
                            author: record.author.clone(),
                            text: record.text.clone(),
                            created_at: record.created_utc,
                            external_id: Some(record.external_id.clone()),
                        });
                        report.imported_replies += 1;
                        None
                    }
                },
            }
        };
        outcome[i] = reason;
    }

    report.excluded = records
        .iter()
        .zip(outcome)
        .filter_map(|(r, reason)| reason.map(|reason| Exclusion { external_id: r.external_id.clone(), reason }))
        .collect();
    report
}

/// Imports onto a stored board as one atomic board write.
pub fn import_into_store(
    store: &BoardStore,
    board_id: &BoardId,
    records: &[ExternalRecord],
    top_level_limit: Option<usize>,
) -> Result<ImportReport, StoreError> {
    store.mutate(board_id, |board| Ok(import_thread(board, records, top_level_limit)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ImageRef;

    fn board() -> Board {
        Board::new("b", ImageRef::from_digest("00"), 100, 100, DateTime::from_timestamp(0, 0).unwrap()).unwrap()
    }

    fn top(id: &str, anchored: bool, score: i64) -> ExternalRecord {
        ExternalRecord {
            external_id: id.into(),
            parent_external_id: None,
            author: Some("u".into()),
            text: Some(format!("comment {id}")),
            score,
            created_utc: DateTime::from_timestamp(1_600_000_000 + score, 0).unwrap(),
            category: Some(CommentCategory::Observations),
            anchors: anchored.then(|| vec![AnchorRect::new(0.1, 0.1, 0.2, 0.2)]),
        }
    }

    fn reply(id: &str, parent: &str) -> ExternalRecord {
        ExternalRecord { parent_external_id: Some(parent.into()), anchors: None, category: None, ..top(id, false, 0) }
    }

    #[test]
    fn parses_three_records_in_order() {
        let json = br#"[
            {"external_id": "a", "score": 3, "created_utc": 1600000000, "anchors": [{"x":0,"y":0,"w":0.5,"h":0.5}]},
            {"external_id": "b", "parent_external_id": "a", "created_utc": "2020-09-13T12:26:40Z"},
            {"external_id": "c", "score": -2, "created_utc": 1600000001.5, "category": "critique"}
        ]"#;
        let records = parse_thread(json).unwrap();
        let ids: Vec<_> = records.iter().map(|r| r.external_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(!records[0].is_reply());
        assert!(records[1].is_reply());
        assert_eq!(records[1].created_utc, DateTime::from_timestamp(1_600_000_000, 0).unwrap());
        assert_eq!(records[2].created_utc, DateTime::from_timestamp(1_600_000_001, 500_000_000).unwrap());
        assert_eq!(records[2].category, Some(CommentCategory::Critique));
    }

    #[test]
    fn missing_timestamp_is_malformed() {
        let json = b"[\n  {\"external_id\": \"a\", \"score\": 1}\n]";
        match parse_thread(json) {
            Err(IngestError::MalformedInput { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected MalformedInput, got {other:?}"),
        }
        assert!(parse_thread(b"{}").is_err());
    }

    #[test]
    fn scores_clamp_and_metadata_transfers() {
        let mut b = board();
        let report = import_thread(&mut b, &[top("a", true, -5), top("b", true, 7), reply("r", "b")], None);
        assert_eq!(report.imported_top_level, 2);
        assert_eq!(report.imported_replies, 1);
        assert_eq!(b.comments[0].likes, 0);
        assert_eq!(b.comments[1].likes, 7);
        assert_eq!(b.comments[1].created_at, DateTime::from_timestamp(1_600_000_007, 0).unwrap());
        assert_eq!(b.comments[1].category, Some(CommentCategory::Observations));
        assert_eq!(b.comments[1].replies[0].external_id.as_deref(), Some("r"));
        assert!(b.validate().is_ok());
    }

    #[test]
    fn exclusion_reasons() {
        let mut b = board();
        let records = vec![
            top("a", true, 1),
            top("noanchor", false, 1),
            reply("r1", "a"),
            reply("r2", "r1"),
            reply("r3", "noanchor"),
            reply("r4", "ghost"),
            top("a2", true, 2),
            top("over", true, 3),
            reply("r5", "over"),
        ];
        let report = import_thread(&mut b, &records, Some(2));
        assert_eq!(report.imported_top_level, 2);
        assert_eq!(report.imported_replies, 1);
        assert!(report.truncated_at_limit);
        let reasons: Vec<_> = report.excluded.iter().map(|e| (e.external_id.as_str(), e.reason)).collect();
        assert_eq!(
            reasons,
            [
                ("noanchor", ExclusionReason::NoAnchorAssignment),
                ("r2", ExclusionReason::NestedReply),
                ("r3", ExclusionReason::Orphaned),
                ("r4", ExclusionReason::DanglingParent),
                ("over", ExclusionReason::Limit),
                ("r5", ExclusionReason::Orphaned),
            ]
        );
        assert_eq!(report.records_consumed(), records.len());
    }

    #[test]
    fn invalid_anchor_excluded() {
        let mut b = board();
        let mut bad = top("bad", true, 0);
        bad.anchors = Some(vec![AnchorRect::new(0.9, 0.0, 0.5, 0.1)]);
        let report = import_thread(&mut b, &[bad], None);
        assert_eq!(report.count(ExclusionReason::InvalidAnchor), 1);
        assert!(b.comments.is_empty());
    }

    #[test]
    fn reimport_is_idempotent() {
        let mut b = board();
        let records = vec![top("a", true, 1), reply("r", "a"), top("x", false, 0)];
        let first = import_thread(&mut b, &records, None);
        assert_eq!(first.imported_top_level + first.imported_replies, 2);
        let snapshot = b.clone();
        let second = import_thread(&mut b, &records, None);
        assert_eq!(second.imported_top_level + second.imported_replies, 0);
        assert_eq!(second.count(ExclusionReason::Duplicate), 2);
        assert_eq!(second.count(ExclusionReason::NoAnchorAssignment), 1);
        assert_eq!(second.records_consumed(), 3);
        assert_eq!(b, snapshot);
    }

    #[test]
    fn later_import_attaches_to_earlier_parent() {
        let mut b = board();
        import_thread(&mut b, &[top("a", true, 1)], None);
        let report = import_thread(&mut b, &[top("a", true, 1), reply("r", "a")], None);
        assert_eq!(report.imported_replies, 1);
        assert_eq!(report.count(ExclusionReason::Duplicate), 1);
        assert_eq!(b.comments[0].replies.len(), 1);
    }

    #[test]
    fn duplicate_ids_within_one_file() {
        let mut b = board();
        let report = import_thread(&mut b, &[top("a", true, 1), top("a", true, 2)], None);
        assert_eq!(report.imported_top_level, 1);
        assert_eq!(report.count(ExclusionReason::Duplicate), 1);
    }

    #[test]
    fn side_file_supplies_anchors() {
        let mut records = vec![top("a", false, 1), top("b", false, 1)];
        let side = parse_anchor_side_file(br#"{"a": [[0.1, 0.2, 0.3, 0.4], [0.5, 0.5, 0.1, 0.1]]}"#).unwrap();
        apply_side_file(&mut records, &side);
        assert_eq!(records[0].anchors.as_ref().unwrap().len(), 2);
        assert_eq!(records[0].anchors.as_ref().unwrap()[0], AnchorRect::new(0.1, 0.2, 0.3, 0.4));
        assert!(records[1].anchors.is_none());
    }

    #[test]
    fn import_order_keeps_timestamps() {
        let mut b = board();
        let mut late = top("late", true, 50);
        late.created_utc = DateTime::from_timestamp(2_000_000_000, 0).unwrap();
        let early = top("early", true, 1);
        import_thread(&mut b, &[late.clone(), early.clone()], None);
        assert_eq!(b.comments[0].created_at, late.created_utc);
        assert_eq!(b.comments[1].created_at, early.created_utc);
    }
}
