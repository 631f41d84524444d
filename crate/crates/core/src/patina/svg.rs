//! Static SVG export of a [`RenderSpec`].
//!
//! The output is a pure function of its inputs. Numbers are printed with a
//! fixed precision and attributes in a fixed order, so equal inputs always
//! give byte-identical documents. Animations are carried as `data-*`
//! attributes; a static viewer shows the resting state.

use std::fmt::Write as _;

use base64::Engine as _;

use super::{Animation, LineDash, RenderSpec};
use crate::domain::Board;

/// How the board image is embedded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageSource {
    /// Referenced by URL.
    Href(String),
    /// Inlined as a base64 `data:` URI.
    Inline { bytes: Vec<u8>, mime: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvgOptions {
    pub image: ImageSource,
}

impl SvgOptions {
    /// References the image through the HTTP API route.
    pub fn api_href(board: &Board) -> Self {
        Self { image: ImageSource::Href(format!("/api/boards/{}/image", board.id)) }
    }

    pub fn inline(bytes: Vec<u8>, mime: impl Into<String>) -> Self {
        Self { image: ImageSource::Inline { bytes, mime: mime.into() } }
    }
}

const DOTTED_DASHARRAY: &str = "2 4";

/// Formats a number with at most four decimals and no trailing zeros.
fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let mut s = format!("{v:.4}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

pub fn render_svg(spec: &RenderSpec, board: &Board, options: &SvgOptions) -> String {
    let (w, h) = (spec.image_width_px, spec.image_height_px);
    let mut out = String::with_capacity(256 + 256 * (spec.rect_marks.len() + spec.line_marks.len()));

    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" \
         version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" data-encoding=\"{}\">",
        spec.encoding
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&board.title));
    let _ = writeln!(
        out,
        "<defs><filter id=\"patina-saturation\"><feColorMatrix type=\"saturate\" values=\"{}\"/></filter></defs>",
        num(spec.background_saturation)
    );

    let href = match &options.image {
        ImageSource::Href(url) => escape(url),
        ImageSource::Inline { bytes, mime } => {
            format!("data:{};base64,{}", escape(mime), base64::engine::general_purpose::STANDARD.encode(bytes))
        }
    };
    let _ = writeln!(
        out,
        "<image x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" preserveAspectRatio=\"none\" \
         xlink:href=\"{href}\" filter=\"url(#patina-saturation)\"/>"
    );

    if !spec.is_empty() {
        let _ = writeln!(out, "<g id=\"patina\" opacity=\"{}\">", num(spec.group_opacity));
        for mark in &spec.rect_marks {
            let r = &mark.rect_px;
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" fill-opacity=\"{}\" \
                 stroke=\"{}\" stroke-opacity=\"{}\" stroke-width=\"{}\" data-comment-id=\"{}\"",
                num(r.x),
                num(r.y),
                num(r.width),
                num(r.height),
                mark.fill_color,
                num(mark.fill_opacity),
                mark.stroke_color,
                num(mark.stroke_opacity),
                num(mark.stroke_width_px),
                escape(mark.comment_id.as_str()),
            );
            match mark.animation {
                Some(Animation::Jitter { amplitude_px, frequency_hz, phase_seed }) => {
                    let _ = write!(
                        out,
                        " data-jitter-amplitude=\"{}\" data-jitter-frequency=\"{}\" data-jitter-phase-seed=\"{phase_seed}\"",
                        num(amplitude_px),
                        num(frequency_hz),
                    );
                }
                Some(Animation::FadeSchedule { segment_index, segment_count, cycle_seconds, fade_seconds }) => {
                    let _ = write!(
                        out,
                        " data-fade-segment=\"{segment_index}\" data-fade-segment-count=\"{segment_count}\" \
                         data-fade-cycle=\"{}\" data-fade-duration=\"{}\"",
                        num(cycle_seconds),
                        num(fade_seconds),
                    );
                }
                None => {}
            }
            out.push_str("/>\n");
        }
        for line in &spec.line_marks {
            let _ = write!(
                out,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-opacity=\"{}\" stroke-width=\"{}\"",
                num(line.from_px.x),
                num(line.from_px.y),
                num(line.to_px.x),
                num(line.to_px.y),
                line.style.color,
                num(line.style.opacity),
                num(line.style.width_px),
            );
            if line.style.dash == LineDash::Dotted {
                let _ = write!(out, " stroke-dasharray=\"{DOTTED_DASHARRAY}\" stroke-linecap=\"round\"");
            }
            let _ = writeln!(out, " data-comment-id=\"{}\"/>", escape(line.comment_id.as_str()));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
