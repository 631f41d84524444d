//! Anchored-comment discussion boards with overlay "patina" views.
//!
//! Comments are pinned to rectangles drawn on an uploaded chart image. The
//! [`patina`] engine aggregates those rectangles into overlay encodings, the
//! [`store`] persists boards on disk, [`api`] serves them over HTTP and
//! [`ingest`] brings in exported discussion threads.

pub mod analytics;
pub mod api;
pub mod cli;
pub mod domain;
pub mod ingest;
pub mod patina;
pub mod store;

pub use domain::{
    create_comment, validate_anchor, AnchorRect, AnchoredComment, Board, BoardId, CommentCategory, CommentDraft,
    CommentId, Reply, ReplyDraft,
};
pub use patina::{build_patina, render_svg, PatinaEncoding, PatinaStyleConfig, RenderSpec};
