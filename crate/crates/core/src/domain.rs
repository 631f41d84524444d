//! Core vocabulary: boards, anchors, comments, replies and categories.
//!
//! Everything here is a plain value type. Constructors validate; nothing
//! mutates behind the caller's back. The serde representation of these types
//! is the canonical JSON shared by the store, the HTTP API and the importer.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Displayed in place of a missing or blank author name.
pub const ANONYMOUS: &str = "anonymous";

/// Slack allowed on the right/bottom edge checks so that fractions produced
/// by pixel division are not rejected by rounding noise.
const EDGE_EPSILON: f64 = 1e-9;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            /// Fresh random identifier.
            pub fn generate() -> Self {
                Self(uuid::Uuid::new_v4().simple().to_string())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }
    };
}

id_newtype!(
    /// Identifier of a [`Board`].
    BoardId
);
id_newtype!(
    /// Identifier of an [`AnchoredComment`] or a [`Reply`]. Both share one
    /// namespace so a target id can be resolved unambiguously.
    CommentId
);

/// Hex SHA-256 digest of the board image bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageRef(String);

impl ImageRef {
    pub fn from_digest(hex_digest: impl Into<String>) -> Self {
        Self(hex_digest.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which anchor constraint a rejected rectangle violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsViolation {
    NotFinite,
    NegativeX,
    NegativeY,
    RightEdge,
    BottomEdge,
}

impl fmt::Display for BoundsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::NotFinite => "coordinates must be finite",
            Self::NegativeX => "x must be >= 0",
            Self::NegativeY => "y must be >= 0",
            Self::RightEdge => "x + w must be <= 1",
            Self::BottomEdge => "y + h must be <= 1",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AnchorError {
    #[error("anchor out of bounds: {0}")]
    OutOfBounds(BoundsViolation),
    #[error("anchor has zero area")]
    ZeroArea,
}

impl AnchorError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::OutOfBounds(_) => "out_of_bounds",
            Self::ZeroArea => "zero_area",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("a comment needs at least one anchor")]
    NoAnchors,
    #[error("anchor {index}: {source}")]
    InvalidAnchor {
        index: usize,
        #[source]
        source: AnchorError,
    },
    #[error("cannot reply to reply {0}; replies are one level deep")]
    ReplyToReply(CommentId),
    #[error("comment {0} not found")]
    CommentNotFound(CommentId),
    #[error("duplicate comment id {0}")]
    DuplicateCommentId(CommentId),
    #[error("image dimensions must be positive, got {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
}

impl DomainError {
    /// Stable machine-readable violation code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoAnchors => "no_anchors",
            Self::InvalidAnchor { source, .. } => source.code(),
            Self::ReplyToReply(_) => "reply_to_reply",
            Self::CommentNotFound(_) => "not_found",
            Self::DuplicateCommentId(_) => "duplicate_id",
            Self::InvalidDimensions { .. } => "invalid_dimensions",
        }
    }
}

/// Rectangle in image-relative coordinates: every component is a fraction of
/// the image width (x, w) or height (y, h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl AnchorRect {
    pub const FULL: AnchorRect = AnchorRect { x: 0.0, y: 0.0, w: 1.0, h: 1.0 };

    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Builds a validated rectangle.
    pub fn try_new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, AnchorError> {
        let rect = Self { x, y, w, h };
        validate_anchor(&rect)?;
        Ok(rect)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

/// Checks every [`AnchorRect`] invariant.
pub fn validate_anchor(rect: &AnchorRect) -> Result<(), AnchorError> {
    let AnchorRect { x, y, w, h } = *rect;
    if ![x, y, w, h].iter().all(|v| v.is_finite()) {
        return Err(AnchorError::OutOfBounds(BoundsViolation::NotFinite));
    }
    if w <= 0.0 || h <= 0.0 {
        return Err(AnchorError::ZeroArea);
    }
    if x < 0.0 {
        return Err(AnchorError::OutOfBounds(BoundsViolation::NegativeX));
    }
    if y < 0.0 {
        return Err(AnchorError::OutOfBounds(BoundsViolation::NegativeY));
    }
    if x + w > 1.0 + EDGE_EPSILON {
        return Err(AnchorError::OutOfBounds(BoundsViolation::RightEdge));
    }
    if y + h > 1.0 + EDGE_EPSILON {
        return Err(AnchorError::OutOfBounds(BoundsViolation::BottomEdge));
    }
    Ok(())
}

/// The eight comment categories offered by the comment form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommentCategory {
    Observations,
    Hypotheses,
    Questions,
    Critique,
    Context,
    PersonalStories,
    Opinions,
    Proposals,
}

impl CommentCategory {
    pub const ALL: [CommentCategory; 8] = [
        Self::Observations,
        Self::Hypotheses,
        Self::Questions,
        Self::Critique,
        Self::Context,
        Self::PersonalStories,
        Self::Opinions,
        Self::Proposals,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Observations => "observations",
            Self::Hypotheses => "hypotheses",
            Self::Questions => "questions",
            Self::Critique => "critique",
            Self::Context => "context",
            Self::PersonalStories => "personal_stories",
            Self::Opinions => "opinions",
            Self::Proposals => "proposals",
        }
    }
}

impl fmt::Display for CommentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category {0:?}; expected one of observations, hypotheses, questions, critique, context, personal_stories, opinions, proposals")]
pub struct UnknownCategory(pub String);

impl FromStr for CommentCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.label() == s).ok_or_else(|| UnknownCategory(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: CommentId,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    pub created_at: DateTime<Utc>,
    /// Source id for records brought in by the thread importer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
}

impl Reply {
    pub fn display_author(&self) -> &str {
        display_author(self.author.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredComment {
    pub id: CommentId,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub category: Option<CommentCategory>,
    pub anchors: Vec<AnchorRect>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub replies: Vec<Reply>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
    /// Manually coded anchor target (marks, labels, axes, blank space, ...).
    /// Never computed; carried through for export.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_target: Option<String>,
}

impl AnchoredComment {
    pub fn display_author(&self) -> &str {
        display_author(self.author.as_deref())
    }

    pub fn reply_count(&self) -> usize {
        self.replies.len()
    }

    /// Appends a reply stamped with `now` and returns it.
    pub fn add_reply(&mut self, draft: ReplyDraft, now: DateTime<Utc>) -> &Reply {
        self.replies.push(Reply {
            id: CommentId::generate(),
            author: draft.author,
            text: draft.text,
            created_at: now,
            external_id: None,
        });
        self.replies.last().expect("just pushed")
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        validate_anchors(&self.anchors)
    }
}

fn display_author(author: Option<&str>) -> &str {
    match author {
        Some(name) if !name.trim().is_empty() => name,
        _ => ANONYMOUS,
    }
}

fn validate_anchors(anchors: &[AnchorRect]) -> Result<(), DomainError> {
    if anchors.is_empty() {
        return Err(DomainError::NoAnchors);
    }
    for (index, rect) in anchors.iter().enumerate() {
        validate_anchor(rect).map_err(|source| DomainError::InvalidAnchor { index, source })?;
    }
    Ok(())
}

/// User-submitted comment before the service assigns id and timestamp.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommentDraft {
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub category: Option<CommentCategory>,
    #[serde(default)]
    pub anchors: Vec<AnchorRect>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplyDraft {
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
}

/// Validates a draft and turns it into a fresh comment created at `now`.
pub fn create_comment(draft: CommentDraft, now: DateTime<Utc>) -> Result<AnchoredComment, DomainError> {
    validate_anchors(&draft.anchors)?;
    Ok(AnchoredComment {
        id: CommentId::generate(),
        author: draft.author,
        text: draft.text,
        category: draft.category,
        anchors: draft.anchors,
        likes: 0,
        replies: Vec::new(),
        created_at: now,
        external_id: None,
        anchor_target: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub id: BoardId,
    pub title: String,
    pub image_ref: ImageRef,
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub comments: Vec<AnchoredComment>,
}

impl Board {
    pub fn new(
        title: impl Into<String>,
        image_ref: ImageRef,
        image_width_px: u32,
        image_height_px: u32,
        created_at: DateTime<Utc>,
    ) -> Result<Self, DomainError> {
        let board = Self {
            id: BoardId::generate(),
            title: title.into(),
            image_ref,
            image_width_px,
            image_height_px,
            created_at,
            comments: Vec::new(),
        };
        board.validate()?;
        Ok(board)
    }

    /// Checks all board and comment invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(DomainError::InvalidDimensions { width: self.image_width_px, height: self.image_height_px });
        }
        let mut seen = std::collections::HashSet::new();
        for comment in &self.comments {
            comment.validate()?;
            let ids = std::iter::once(&comment.id).chain(comment.replies.iter().map(|r| &r.id));
            for id in ids {
                if !seen.insert(id) {
                    return Err(DomainError::DuplicateCommentId(id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn comment(&self, id: &CommentId) -> Option<&AnchoredComment> {
        self.comments.iter().find(|c| &c.id == id)
    }

    fn comment_mut(&mut self, id: &CommentId) -> Option<&mut AnchoredComment> {
        self.comments.iter_mut().find(|c| &c.id == id)
    }

    pub fn contains_reply(&self, id: &CommentId) -> bool {
        self.comments.iter().any(|c| c.replies.iter().any(|r| &r.id == id))
    }

    /// Appends an already-validated comment.
    pub fn push_comment(&mut self, comment: AnchoredComment) -> Result<&AnchoredComment, DomainError> {
        comment.validate()?;
        if self.comment(&comment.id).is_some() || self.contains_reply(&comment.id) {
            return Err(DomainError::DuplicateCommentId(comment.id));
        }
        self.comments.push(comment);
        Ok(self.comments.last().expect("just pushed"))
    }

    /// Adds a reply to the top-level comment `target`.
    pub fn add_reply(
        &mut self,
        target: &CommentId,
        draft: ReplyDraft,
        now: DateTime<Utc>,
    ) -> Result<&AnchoredComment, DomainError> {
        if self.contains_reply(target) {
            return Err(DomainError::ReplyToReply(target.clone()));
        }
        let comment = self.comment_mut(target).ok_or_else(|| DomainError::CommentNotFound(target.clone()))?;
        comment.add_reply(draft, now);
        Ok(comment)
    }

    pub fn increment_like(&mut self, target: &CommentId) -> Result<&AnchoredComment, DomainError> {
        if self.contains_reply(target) {
            return Err(DomainError::ReplyToReply(target.clone()));
        }
        let comment = self.comment_mut(target).ok_or_else(|| DomainError::CommentNotFound(target.clone()))?;
        comment.likes += 1;
        Ok(comment)
    }

    pub fn total_anchors(&self) -> usize {
        self.comments.iter().map(|c| c.anchors.len()).sum()
    }

    pub fn total_replies(&self) -> usize {
        self.comments.iter().map(|c| c.replies.len()).sum()
    }
}
