//! Corpus statistics for a single board.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Board, CommentCategory};
use crate::patina::overlap_count_map;

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hotspot {
    pub col: usize,
    pub row: usize,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardStats {
    pub total_comments: usize,
    pub total_replies: usize,
    pub total_anchors: usize,
    pub single_anchor_share: f64,
    pub median_anchor_width: f64,
    pub median_anchor_height: f64,
    pub category_histogram: BTreeMap<CommentCategory, usize>,
    pub uncategorized: usize,
    pub responses_by_category: BTreeMap<CommentCategory, usize>,
    pub uncategorized_responses: usize,
    pub comment_length_median_chars: usize,
    pub grid_size: usize,
    pub overlap_hotspots: Vec<Hotspot>,
}

/// Lower-middle median; `None` for an empty slice.
pub fn lower_median<T: Copy>(sorted: &[T]) -> Option<T> {
    if sorted.is_empty() {
        None
    } else {
        Some(sorted[(sorted.len() - 1) / 2])
    }
}

/// The `top_k` highest non-zero cells, ties in row-major order.
pub fn top_hotspots(grid: &crate::patina::OverlapGrid, top_k: usize) -> Vec<Hotspot> {
    let mut cells: Vec<Hotspot> = grid
        .cells
        .iter()
        .enumerate()
        .filter(|(_, &count)| count > 0)
        .map(|(i, &count)| Hotspot { col: i % grid.width, row: i / grid.width, count })
        .collect();
    cells.sort_by(|a, b| b.count.cmp(&a.count).then((a.row, a.col).cmp(&(b.row, b.col))));
    cells.truncate(top_k);
    cells
}

pub fn compute_stats(board: &Board, grid: usize, top_k: usize) -> BoardStats {
    let total_comments = board.comments.len();
    let total_anchors = board.total_anchors();
    let single = board.comments.iter().filter(|c| c.anchors.len() == 1).count();

    let anchors = board.comments.iter().flat_map(|c| c.anchors.iter());
    let mut widths: Vec<f64> = anchors.clone().map(|a| a.w).collect();
    let mut heights: Vec<f64> = anchors.clone().map(|a| a.h).collect();
    widths.sort_by(f64::total_cmp);
    heights.sort_by(f64::total_cmp);

    let mut category_histogram = BTreeMap::new();
    let mut responses_by_category = BTreeMap::new();
    let (mut uncategorized, mut uncategorized_responses) = (0, 0);
    for c in &board.comments {
        match c.category {
            Some(cat) => {
                *category_histogram.entry(cat).or_insert(0) += 1;
                *responses_by_category.entry(cat).or_insert(0) += c.reply_count();
            }
            None => {
                uncategorized += 1;
                uncategorized_responses += c.reply_count();
            }
        }
    }

    let mut lengths: Vec<usize> = board
        .comments
        .iter()
        .filter_map(|c| c.text.as_deref())
        .map(|t| t.trim().chars().count())
        .filter(|&n| n > 0)
        .collect();
    lengths.sort_unstable();

    let overlap = overlap_count_map(anchors, grid, grid);

    BoardStats {
        total_comments,
        total_replies: board.total_replies(),
        total_anchors,
        single_anchor_share: if total_comments == 0 { 0.0 } else { single as f64 / total_comments as f64 },
        median_anchor_width: lower_median(&widths).unwrap_or(0.0),
        median_anchor_height: lower_median(&heights).unwrap_or(0.0),
        category_histogram,
        uncategorized,
        responses_by_category,
        uncategorized_responses,
        comment_length_median_chars: lower_median(&lengths).unwrap_or(0),
        grid_size: grid.max(1),
        overlap_hotspots: top_hotspots(&overlap, top_k),
    }
}

/// Plain-text rendering for terminals.
pub fn format_table(stats: &BoardStats) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let rows: [(&str, String); 8] = [
        ("total_comments", stats.total_comments.to_string()),
        ("total_replies", stats.total_replies.to_string()),
        ("total_anchors", stats.total_anchors.to_string()),
        ("single_anchor_share", format!("{:.3}", stats.single_anchor_share)),
        ("median_anchor_width", format!("{:.3}", stats.median_anchor_width)),
        ("median_anchor_height", format!("{:.3}", stats.median_anchor_height)),
        ("comment_length_median_chars", stats.comment_length_median_chars.to_string()),
        ("uncategorized", stats.uncategorized.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<30}{v:>10}");
    }
    let _ = writeln!(out, "\n{:<30}{:>10}{:>10}", "category", "comments", "replies");
    for cat in CommentCategory::ALL {
        let n = stats.category_histogram.get(&cat).copied().unwrap_or(0);
        let r = stats.responses_by_category.get(&cat).copied().unwrap_or(0);
        let _ = writeln!(out, "{:<30}{n:>10}{r:>10}", cat.label());
    }
    let _ = writeln!(out, "\nhotspots ({0}x{0} grid)", stats.grid_size);
    for h in &stats.overlap_hotspots {
        let _ = writeln!(out, "  col {:>3} row {:>3}  count {}", h.col, h.row, h.count);
    }
    out
}
