//! Metadata-to-visual-variable mappings used by the individual encodings.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PatinaError, PatinaStyleConfig};
use crate::domain::{AnchorRect, AnchoredComment, Board, CommentId};

/// Anchor count at which the activity fill reaches its floor.
pub const ACTIVITY_FLOOR_ANCHORS: usize = 100;

/// Activity fill opacity for a board carrying `total_anchor_count` anchors.
///
/// Linear decay from `max_fill_opacity` at one anchor to `min_fill_opacity`
/// at [`ACTIVITY_FLOOR_ANCHORS`], clamped to that range.
pub fn activity_fill_opacity(total_anchor_count: usize, cfg: &PatinaStyleConfig) -> f64 {
    let n = total_anchor_count.max(1) as f64;
    let step = (cfg.max_fill_opacity - cfg.min_fill_opacity) / (ACTIVITY_FLOOR_ANCHORS - 1) as f64;
    (cfg.max_fill_opacity - (n - 1.0) * step).clamp(cfg.min_fill_opacity, cfg.max_fill_opacity)
}

/// Stroke width encoding `likes` relative to the board's like range.
pub fn popularity_stroke_width(likes: u64, min_likes: u64, max_likes: u64, cfg: &PatinaStyleConfig) -> f64 {
    if max_likes <= min_likes {
        return cfg.stroke_width_min_px;
    }
    let likes = likes.clamp(min_likes, max_likes);
    let t = (likes - min_likes) as f64 / (max_likes - min_likes) as f64;
    let width = cfg.stroke_width_min_px + (cfg.stroke_width_max_px - cfg.stroke_width_min_px) * t;
    width.clamp(cfg.stroke_width_min_px, cfg.stroke_width_max_px)
}

/// Jitter amplitude in pixels for a comment with `reply_count` replies.
pub fn jitter_amplitude(reply_count: usize, cfg: &PatinaStyleConfig) -> f64 {
    (reply_count as f64 * cfg.jitter_px_per_reply).min(cfg.jitter_max_px)
}

/// Stable per-comment animation phase seed: the first eight bytes of the
/// SHA-256 of the comment id.
pub fn phase_seed(id: &CommentId) -> u64 {
    let digest = Sha256::digest(id.as_str().as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn nanos(t: &DateTime<Utc>) -> i128 {
    i128::from(t.timestamp()) * 1_000_000_000 + i128::from(t.timestamp_subsec_nanos())
}

/// Segment index in `1..=k` for a timestamp inside `[t_min, t_max]`.
///
/// Bins are equal-width in time; `t_max` belongs to the last bin.
pub fn segment_of(t: &DateTime<Utc>, t_min: &DateTime<Utc>, t_max: &DateTime<Utc>, k: u32) -> u32 {
    let span = nanos(t_max) - nanos(t_min);
    if span <= 0 {
        return 1;
    }
    let offset = (nanos(t) - nanos(t_min)).clamp(0, span);
    let idx = offset * i128::from(k) / span;
    (idx as u32 + 1).min(k)
}

/// Assigns every comment to one of `k` creation-time segments.
pub fn temporal_segments<'a>(
    comments: impl IntoIterator<Item = &'a AnchoredComment>,
    k: u32,
) -> Result<BTreeMap<CommentId, u32>, PatinaError> {
    let comments: Vec<&AnchoredComment> = comments.into_iter().collect();
    if k == 0 {
        return Err(PatinaError::InvalidStyle("temporal segment count must be >= 1".into()));
    }
    let t_min = comments.iter().map(|c| c.created_at).min().ok_or(PatinaError::EmptyCorpus)?;
    let t_max = comments.iter().map(|c| c.created_at).max().ok_or(PatinaError::EmptyCorpus)?;
    Ok(comments.iter().map(|c| (c.id.clone(), segment_of(&c.created_at, &t_min, &t_max, k))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl PixelRect {
    pub fn from_anchor(rect: &AnchorRect, image_width: u32, image_height: u32) -> Self {
        let (iw, ih) = (f64::from(image_width), f64::from(image_height));
        Self { x: rect.x * iw, y: rect.y * ih, width: rect.w * iw, height: rect.h * ih }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

pub fn anchor_center_px(rect: &AnchorRect, board: &Board) -> PixelPoint {
    let (cx, cy) = rect.center();
    PixelPoint { x: cx * f64::from(board.image_width_px), y: cy * f64::from(board.image_height_px) }
}

/// Consecutive anchor-center pairs of a comment, in anchor-list order.
/// A comment with `m` anchors yields `m - 1` segments.
pub fn relation_segments(comment: &AnchoredComment, board: &Board) -> Vec<(PixelPoint, PixelPoint)> {
    comment
        .anchors
        .windows(2)
        .map(|pair| (anchor_center_px(&pair[0], board), anchor_center_px(&pair[1], board)))
        .collect()
}

/// Per-cell anchor coverage counts on a `width` x `height` grid laid over the
/// image. A cell counts an anchor when its center point lies in
/// `[x, x + w) x [y, y + h)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major counts.
    pub cells: Vec<u32>,
}

impl OverlapGrid {
    pub fn get(&self, col: usize, row: usize) -> u32 {
        self.cells[row * self.width + col]
    }

    pub fn max(&self) -> u32 {
        self.cells.iter().copied().max().unwrap_or(0)
    }
}

fn cell_center(index: usize, cells: usize) -> f64 {
    (index as f64 + 0.5) / cells as f64
}

fn covers(lo: f64, len: f64, c: f64) -> bool {
    lo <= c && c < lo + len
}

/// Cell index range `[start, end)` whose centers fall inside `[lo, lo + len)`.
///
/// Computed arithmetically, then nudged at both ends with the exact
/// center predicate so rounding never disagrees with [`covers`].
fn covered_range(lo: f64, len: f64, cells: usize) -> (usize, usize) {
    let n = cells as f64;
    let guess = |edge: f64| ((edge * n - 0.5).ceil().max(0.0) as usize).min(cells);
    let mut start = guess(lo);
    let mut end = guess(lo + len).max(start);
    while start > 0 && covers(lo, len, cell_center(start - 1, cells)) {
        start -= 1;
    }
    while start < end && !covers(lo, len, cell_center(start, cells)) {
        start += 1;
    }
    while end < cells && covers(lo, len, cell_center(end, cells)) {
        end += 1;
    }
    while end > start && !covers(lo, len, cell_center(end - 1, cells)) {
        end -= 1;
    }
    (start, end)
}

pub fn overlap_count_map<'a>(
    anchors: impl IntoIterator<Item = &'a AnchorRect>,
    grid_w: usize,
    grid_h: usize,
) -> OverlapGrid {
    let (grid_w, grid_h) = (grid_w.max(1), grid_h.max(1));
    let mut cells = vec![0u32; grid_w * grid_h];
    for rect in anchors {
        let (c0, c1) = covered_range(rect.x, rect.w, grid_w);
        let (r0, r1) = covered_range(rect.y, rect.h, grid_h);
        for row in r0..r1 {
            for cell in &mut cells[row * grid_w + c0..row * grid_w + c1] {
                *cell += 1;
            }
        }
    }
    OverlapGrid { width: grid_w, height: grid_h, cells }
}
