//! Patina engine: turns a board's comments plus an encoding choice into a
//! device-independent [`RenderSpec`], and a `RenderSpec` into SVG.
//!
//! Everything here is pure. Equal inputs produce equal specs and
//! byte-identical SVG.

mod mapping;
pub mod svg;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnchoredComment, Board, CommentCategory, CommentId, UnknownCategory};

pub use mapping::{
    activity_fill_opacity, anchor_center_px, jitter_amplitude, overlap_count_map, phase_seed, popularity_stroke_width,
    relation_segments, segment_of, temporal_segments, OverlapGrid, PixelPoint, PixelRect, ACTIVITY_FLOOR_ANCHORS,
};
pub use svg::{render_svg, ImageSource, SvgOptions};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatinaError {
    #[error(
        "unknown encoding {0:?}; expected one of activity, category, popularity, responses, temporal, relations, none"
    )]
    UnknownEncoding(String),
    #[error(transparent)]
    UnknownCategoryFilter(#[from] UnknownCategory),
    #[error("cannot segment an empty corpus")]
    EmptyCorpus,
    #[error("invalid style configuration: {0}")]
    InvalidStyle(String),
}

impl PatinaError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownEncoding(_) => "unknown_encoding",
            Self::UnknownCategoryFilter(_) => "unknown_category",
            Self::EmptyCorpus => "empty_corpus",
            Self::InvalidStyle(_) => "invalid_style",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatinaEncoding {
    #[default]
    Activity,
    Category,
    Popularity,
    Responses,
    Temporal,
    Relations,
    None,
}

impl PatinaEncoding {
    pub const ALL: [PatinaEncoding; 7] = [
        Self::Activity,
        Self::Category,
        Self::Popularity,
        Self::Responses,
        Self::Temporal,
        Self::Relations,
        Self::None,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Activity => "activity",
            Self::Category => "category",
            Self::Popularity => "popularity",
            Self::Responses => "responses",
            Self::Temporal => "temporal",
            Self::Relations => "relations",
            Self::None => "none",
        }
    }
}

impl fmt::Display for PatinaEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PatinaEncoding {
    type Err = PatinaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.label() == s).ok_or_else(|| PatinaError::UnknownEncoding(s.to_owned()))
    }
}

/// 24-bit sRGB color, serialized as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Color(pub u8, pub u8, pub u8);

impl Color {
    pub const WHITE: Color = Color(0xFF, 0xFF, 0xFF);

    pub const fn hex(rgb: u32) -> Self {
        Color((rgb >> 16) as u8, (rgb >> 8) as u8, rgb as u8)
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

impl Serialize for Color {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let digits = s
            .strip_prefix('#')
            .filter(|d| d.len() == 6)
            .ok_or_else(|| serde::de::Error::custom(format!("expected #RRGGBB, got {s:?}")))?;
        u32::from_str_radix(digits, 16).map(Color::hex).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineDash {
    Solid,
    Dotted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineStyle {
    pub dash: LineDash,
    pub color: Color,
    pub width_px: f64,
    pub opacity: f64,
}

/// Fill hue per comment category, in [`CommentCategory::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPalette(pub [Color; 8]);

impl CategoryPalette {
    pub fn color(&self, category: CommentCategory) -> Color {
        let idx = CommentCategory::ALL.iter().position(|c| *c == category).expect("closed enum");
        self.0[idx]
    }
}

impl Default for CategoryPalette {
    fn default() -> Self {
        Self([
            Color::hex(0x1F77B4),
            Color::hex(0x9467BD),
            Color::hex(0x2CA02C),
            Color::hex(0xD62728),
            Color::hex(0x8C564B),
            Color::hex(0xE377C2),
            Color::hex(0xFF7F0E),
            Color::hex(0x17BECF),
        ])
    }
}

/// Every visual constant the encodings draw on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatinaStyleConfig {
    pub min_fill_opacity: f64,
    pub max_fill_opacity: f64,
    pub group_opacity: f64,
    pub chart_saturation: f64,
    pub stroke_width_min_px: f64,
    pub stroke_width_max_px: f64,
    pub temporal_segment_count: u32,
    pub base_color: Color,
    pub default_stroke_opacity: f64,
    pub popularity_fill_color: Color,
    pub popularity_fill_opacity: f64,
    pub jitter_px_per_reply: f64,
    pub jitter_max_px: f64,
    pub jitter_frequency_hz: f64,
    pub category_fill_opacity: f64,
    pub category_palette: CategoryPalette,
    pub uncategorized_color: Color,
    pub relation_line: LineStyle,
    pub temporal_cycle_seconds: f64,
    pub temporal_fade_seconds: f64,
}

impl Default for PatinaStyleConfig {
    fn default() -> Self {
        let base_color = Color::hex(0xD62020);
        Self {
            min_fill_opacity: 0.05,
            max_fill_opacity: 0.50,
            group_opacity: 0.50,
            chart_saturation: 0.30,
            stroke_width_min_px: 1.0,
            stroke_width_max_px: 10.0,
            temporal_segment_count: 10,
            base_color,
            default_stroke_opacity: 0.50,
            popularity_fill_color: Color::WHITE,
            popularity_fill_opacity: 0.05,
            jitter_px_per_reply: 1.0,
            jitter_max_px: 8.0,
            jitter_frequency_hz: 2.0,
            category_fill_opacity: 0.25,
            category_palette: CategoryPalette::default(),
            uncategorized_color: Color::hex(0x7F7F7F),
            relation_line: LineStyle { dash: LineDash::Dotted, color: base_color, width_px: 2.0, opacity: 0.50 },
            temporal_cycle_seconds: 2.0,
            temporal_fade_seconds: 0.5,
        }
    }
}

impl PatinaStyleConfig {
    pub fn validate(&self) -> Result<(), PatinaError> {
        let err = |msg: &str| Err(PatinaError::InvalidStyle(msg.to_owned()));
        if !(0.0 < self.min_fill_opacity
            && self.min_fill_opacity <= self.max_fill_opacity
            && self.max_fill_opacity <= self.group_opacity
            && self.group_opacity <= 1.0)
        {
            return err("require 0 < min_fill_opacity <= max_fill_opacity <= group_opacity <= 1");
        }
        if self.stroke_width_min_px.partial_cmp(&self.stroke_width_max_px).is_none_or(|o| o.is_gt()) {
            return err("require stroke_width_min_px <= stroke_width_max_px");
        }
        if self.temporal_segment_count < 1 {
            return err("require temporal_segment_count >= 1");
        }
        if !(0.0..=1.0).contains(&self.chart_saturation) {
            return err("chart_saturation must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Animation {
    Jitter {
        amplitude_px: f64,
        frequency_hz: f64,
        phase_seed: u64,
    },
    /// Fade in during cycle `segment_index`, hold for one cycle, then fade out.
    FadeSchedule {
        segment_index: u32,
        segment_count: u32,
        cycle_seconds: f64,
        fade_seconds: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectMark {
    pub rect_px: PixelRect,
    pub fill_color: Color,
    pub fill_opacity: f64,
    pub stroke_color: Color,
    pub stroke_opacity: f64,
    pub stroke_width_px: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub animation: Option<Animation>,
    pub comment_id: CommentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMark {
    pub from_px: PixelPoint,
    pub to_px: PixelPoint,
    pub style: LineStyle,
    pub comment_id: CommentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub key: String,
    pub value: String,
}

impl LegendEntry {
    fn new(key: impl Into<String>, value: impl ToString) -> Self {
        Self { key: key.into(), value: value.to_string() }
    }
}

/// Resolved overlay scene for one board and one encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub encoding: PatinaEncoding,
    pub image_width_px: u32,
    pub image_height_px: u32,
    /// Largest first, so smaller anchors paint on top.
    pub rect_marks: Vec<RectMark>,
    pub line_marks: Vec<LineMark>,
    pub group_opacity: f64,
    pub background_saturation: f64,
    pub legend: Vec<LegendEntry>,
}

impl RenderSpec {
    pub fn is_empty(&self) -> bool {
        self.rect_marks.is_empty() && self.line_marks.is_empty()
    }
}

/// Parses the string form of an encoding request, as received over HTTP or
/// the command line.
pub fn parse_request(
    encoding: Option<&str>,
    category: Option<&str>,
) -> Result<(PatinaEncoding, Option<CommentCategory>), PatinaError> {
    let encoding = match encoding {
        Some(e) if !e.is_empty() => e.parse()?,
        _ => PatinaEncoding::default(),
    };
    let category = match category {
        Some(c) if !c.is_empty() => Some(c.parse::<CommentCategory>()?),
        _ => None,
    };
    Ok((encoding, category))
}

struct MarkStyle {
    fill_color: Color,
    fill_opacity: f64,
    stroke_color: Color,
    stroke_opacity: f64,
    stroke_width_px: f64,
    animation: Option<Animation>,
}

/// Builds the overlay scene for `board` under `encoding`.
///
/// `category_filter` only applies to [`PatinaEncoding::Category`].
pub fn build_patina(
    board: &Board,
    encoding: PatinaEncoding,
    cfg: &PatinaStyleConfig,
    category_filter: Option<CommentCategory>,
) -> Result<RenderSpec, PatinaError> {
    cfg.validate()?;

    let comments: Vec<&AnchoredComment> = match (encoding, category_filter) {
        (PatinaEncoding::None, _) => Vec::new(),
        (PatinaEncoding::Category, Some(filter)) => {
            board.comments.iter().filter(|c| c.category == Some(filter)).collect()
        }
        _ => board.comments.iter().collect(),
    };

    let default_style = |_: &AnchoredComment| MarkStyle {
        fill_color: cfg.base_color,
        fill_opacity: cfg.min_fill_opacity,
        stroke_color: cfg.base_color,
        stroke_opacity: cfg.default_stroke_opacity,
        stroke_width_px: cfg.stroke_width_min_px,
        animation: None,
    };

    let mut legend = Vec::new();
    let style_of: Box<dyn Fn(&AnchoredComment) -> MarkStyle + '_> = match encoding {
        PatinaEncoding::None => Box::new(default_style),
        PatinaEncoding::Activity => {
            let total = board.total_anchors();
            let opacity = activity_fill_opacity(total, cfg);
            legend.push(LegendEntry::new("total_anchors", total));
            legend.push(LegendEntry::new("fill_opacity", opacity));
            Box::new(move |c| MarkStyle { fill_opacity: opacity, ..default_style(c) })
        }
        PatinaEncoding::Category => {
            for category in CommentCategory::ALL {
                if category_filter.is_none_or(|f| f == category) {
                    legend.push(LegendEntry::new(category.label(), cfg.category_palette.color(category)));
                }
            }
            if category_filter.is_none() {
                legend.push(LegendEntry::new("uncategorized", cfg.uncategorized_color));
            }
            Box::new(|c| {
                let hue = c.category.map_or(cfg.uncategorized_color, |cat| cfg.category_palette.color(cat));
                MarkStyle {
                    fill_color: hue,
                    fill_opacity: cfg.category_fill_opacity,
                    stroke_color: hue,
                    ..default_style(c)
                }
            })
        }
        PatinaEncoding::Popularity => {
            let min_likes = comments.iter().map(|c| c.likes).min().unwrap_or(0);
            let max_likes = comments.iter().map(|c| c.likes).max().unwrap_or(0);
            legend.push(LegendEntry::new("min_likes", format!("{min_likes} -> {}px", cfg.stroke_width_min_px)));
            legend.push(LegendEntry::new(
                "max_likes",
                format!("{max_likes} -> {}px", popularity_stroke_width(max_likes, min_likes, max_likes, cfg)),
            ));
            Box::new(move |c| MarkStyle {
                fill_color: cfg.popularity_fill_color,
                fill_opacity: cfg.popularity_fill_opacity,
                stroke_width_px: popularity_stroke_width(c.likes, min_likes, max_likes, cfg),
                ..default_style(c)
            })
        }
        PatinaEncoding::Responses => {
            legend.push(LegendEntry::new("jitter_px_per_reply", cfg.jitter_px_per_reply));
            legend.push(LegendEntry::new("jitter_max_px", cfg.jitter_max_px));
            Box::new(|c| {
                let amplitude = jitter_amplitude(c.reply_count(), cfg);
                let animation = (amplitude > 0.0).then(|| Animation::Jitter {
                    amplitude_px: amplitude,
                    frequency_hz: cfg.jitter_frequency_hz,
                    phase_seed: phase_seed(&c.id),
                });
                MarkStyle { animation, ..default_style(c) }
            })
        }
        PatinaEncoding::Temporal => {
            let segments = if comments.is_empty() {
                Default::default()
            } else {
                temporal_segments(comments.iter().copied(), cfg.temporal_segment_count)?
            };
            if let (Some(first), Some(last)) =
                (comments.iter().map(|c| c.created_at).min(), comments.iter().map(|c| c.created_at).max())
            {
                legend.push(LegendEntry::new("t_min", first.to_rfc3339()));
                legend.push(LegendEntry::new("t_max", last.to_rfc3339()));
            }
            legend.push(LegendEntry::new("segments", cfg.temporal_segment_count));
            Box::new(move |c| MarkStyle {
                animation: Some(Animation::FadeSchedule {
                    segment_index: segments[&c.id],
                    segment_count: cfg.temporal_segment_count,
                    cycle_seconds: cfg.temporal_cycle_seconds,
                    fade_seconds: cfg.temporal_fade_seconds,
                }),
                ..default_style(c)
            })
        }
        PatinaEncoding::Relations => {
            legend.push(LegendEntry::new("relation_line", "dotted"));
            Box::new(default_style)
        }
    };

    let mut rect_marks: Vec<(RectMark, chrono::DateTime<chrono::Utc>)> = Vec::new();
    for comment in &comments {
        let style = style_of(comment);
        for anchor in &comment.anchors {
            rect_marks.push((
                RectMark {
                    rect_px: PixelRect::from_anchor(anchor, board.image_width_px, board.image_height_px),
                    fill_color: style.fill_color,
                    fill_opacity: style.fill_opacity,
                    stroke_color: style.stroke_color,
                    stroke_opacity: style.stroke_opacity,
                    stroke_width_px: style.stroke_width_px,
                    animation: style.animation,
                    comment_id: comment.id.clone(),
                },
                comment.created_at,
            ));
        }
    }
    // Stable: equal area and timestamp keep board order.
    rect_marks.sort_by(|(a, ta), (b, tb)| b.rect_px.area().total_cmp(&a.rect_px.area()).then_with(|| ta.cmp(tb)));
    let rect_marks: Vec<RectMark> = rect_marks.into_iter().map(|(m, _)| m).collect();

    let line_marks = if encoding == PatinaEncoding::Relations {
        comments
            .iter()
            .flat_map(|c| {
                relation_segments(c, board).into_iter().map(|(from_px, to_px)| LineMark {
                    from_px,
                    to_px,
                    style: cfg.relation_line,
                    comment_id: c.id.clone(),
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    let overlay = encoding != PatinaEncoding::None && !rect_marks.is_empty();
    Ok(RenderSpec {
        encoding,
        image_width_px: board.image_width_px,
        image_height_px: board.image_height_px,
        rect_marks,
        line_marks,
        group_opacity: if encoding == PatinaEncoding::None { 0.0 } else { cfg.group_opacity },
        background_saturation: if overlay { cfg.chart_saturation } else { 1.0 },
        legend,
    })
}
