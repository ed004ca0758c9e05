//! Brick-action code segments (BACS): the token program that places boxes on
//! a quantized layout grid.
//!
//! One relationship is ten tokens. The subject box is written in absolute grid
//! coordinates (`c xp yp w h`); the object box follows as `c`, its position,
//! then `w h`. In relative mode the object position is the signed corner
//! offset from the subject (`ixp`/`ixn`, `iyp`/`iyn`); in absolute mode it is
//! another `xp yp` pair. An optional `imgar` token in front carries the
//! quantized layout aspect ratio.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, SceneGraph, SemanticLayout};
use crate::num::{mean_half_up, round_half_up};
use crate::sf::NodeSequence;

pub const DEFAULT_GRID_MAX: u32 = 40;
pub const SEGMENT_LEN: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum BacsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("token {position} ({text:?}): {reason}")]
    Token {
        position: usize,
        text: String,
        reason: String,
    },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error("consistency error: {0}")]
    Consistency(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    C,
    Xp,
    Yp,
    Ixp,
    Ixn,
    Iyp,
    Iyn,
    W,
    H,
    ImgAr,
}

impl TokenKind {
    pub const ALL: [TokenKind; 10] = [
        TokenKind::C,
        TokenKind::Xp,
        TokenKind::Yp,
        TokenKind::Ixp,
        TokenKind::Ixn,
        TokenKind::Iyp,
        TokenKind::Iyn,
        TokenKind::W,
        TokenKind::H,
        TokenKind::ImgAr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::C => "c",
            TokenKind::Xp => "xp",
            TokenKind::Yp => "yp",
            TokenKind::Ixp => "ixp",
            TokenKind::Ixn => "ixn",
            TokenKind::Iyp => "iyp",
            TokenKind::Iyn => "iyn",
            TokenKind::W => "w",
            TokenKind::H => "h",
            TokenKind::ImgAr => "imgar",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single BACS word, written `kind_value` (`c_person`, `xp_12`, `ixn_3`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BacsToken {
    Class(String),
    Xp(u32),
    Yp(u32),
    Ixp(u32),
    Ixn(u32),
    Iyp(u32),
    Iyn(u32),
    W(u32),
    H(u32),
    ImgAr(u32),
}

impl BacsToken {
    pub fn kind(&self) -> TokenKind {
        match self {
            BacsToken::Class(_) => TokenKind::C,
            BacsToken::Xp(_) => TokenKind::Xp,
            BacsToken::Yp(_) => TokenKind::Yp,
            BacsToken::Ixp(_) => TokenKind::Ixp,
            BacsToken::Ixn(_) => TokenKind::Ixn,
            BacsToken::Iyp(_) => TokenKind::Iyp,
            BacsToken::Iyn(_) => TokenKind::Iyn,
            BacsToken::W(_) => TokenKind::W,
            BacsToken::H(_) => TokenKind::H,
            BacsToken::ImgAr(_) => TokenKind::ImgAr,
        }
    }

    fn value(&self) -> Option<u32> {
        match self {
            BacsToken::Class(_) => None,
            BacsToken::Xp(v)
            | BacsToken::Yp(v)
            | BacsToken::Ixp(v)
            | BacsToken::Ixn(v)
            | BacsToken::Iyp(v)
            | BacsToken::Iyn(v)
            | BacsToken::W(v)
            | BacsToken::H(v)
            | BacsToken::ImgAr(v) => Some(*v),
        }
    }

    /// Signed x offset (`ixp_3 -> 3`, `ixn_3 -> -3`).
    fn signed_dx(&self) -> Option<i64> {
        match self {
            BacsToken::Ixp(v) => Some(i64::from(*v)),
            BacsToken::Ixn(v) => Some(-i64::from(*v)),
            _ => None,
        }
    }

    fn signed_dy(&self) -> Option<i64> {
        match self {
            BacsToken::Iyp(v) => Some(i64::from(*v)),
            BacsToken::Iyn(v) => Some(-i64::from(*v)),
            _ => None,
        }
    }

    fn x_offset(dx: i64) -> BacsToken {
        if dx >= 0 {
            BacsToken::Ixp(dx as u32)
        } else {
            BacsToken::Ixn(dx.unsigned_abs() as u32)
        }
    }

    fn y_offset(dy: i64) -> BacsToken {
        if dy >= 0 {
            BacsToken::Iyp(dy as u32)
        } else {
            BacsToken::Iyn(dy.unsigned_abs() as u32)
        }
    }
}

impl fmt::Display for BacsToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BacsToken::Class(c) => write!(f, "c_{c}"),
            other => write!(f, "{}_{}", other.kind(), other.value().unwrap_or_default()),
        }
    }
}

impl FromStr for BacsToken {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once('_')
            .ok_or_else(|| "expected `kind_value`".to_string())?;
        if kind == "c" {
            if !crate::graph::is_valid_token(value) {
                return Err("invalid class token".into());
            }
            return Ok(BacsToken::Class(value.to_owned()));
        }
        let v: u32 = value
            .parse()
            .map_err(|_| format!("`{value}` is not a non-negative integer"))?;
        let token = match kind {
            "xp" => BacsToken::Xp(v),
            "yp" => BacsToken::Yp(v),
            "ixp" => BacsToken::Ixp(v),
            "ixn" => BacsToken::Ixn(v),
            "iyp" => BacsToken::Iyp(v),
            "iyn" => BacsToken::Iyn(v),
            "w" => BacsToken::W(v),
            "h" => BacsToken::H(v),
            "imgar" => BacsToken::ImgAr(v),
            other => return Err(format!("unknown token kind `{other}`")),
        };
        if matches!(token, BacsToken::Ixn(0) | BacsToken::Iyn(0)) {
            return Err("zero offsets are written with the positive kind".into());
        }
        Ok(token)
    }
}

/// Splits a `.bacs` line into tokens.
pub fn tokenize(line: &str) -> Result<Vec<BacsToken>, BacsError> {
    line.split_whitespace()
        .enumerate()
        .map(|(position, text)| {
            text.parse().map_err(|reason| BacsError::Token {
                position,
                text: text.to_owned(),
                reason,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionMode {
    #[default]
    Relative,
    Absolute,
}

impl FromStr for PositionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relative" => Ok(PositionMode::Relative),
            "absolute" => Ok(PositionMode::Absolute),
            other => Err(format!("unknown position mode `{other}` (relative|absolute)")),
        }
    }
}

impl fmt::Display for PositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PositionMode::Relative => "relative",
            PositionMode::Absolute => "absolute",
        })
    }
}

/// Uniform aspect-ratio quantizer; `bins` consecutive bins of width
/// `interval` starting at `minimum`, inputs clamped into range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArQuantizer {
    pub interval: f64,
    pub minimum: f64,
    pub bins: u32,
}

impl Default for ArQuantizer {
    fn default() -> Self {
        Self {
            interval: 0.05,
            minimum: 0.5,
            bins: 31,
        }
    }
}

impl ArQuantizer {
    pub fn validate(&self) -> Result<(), BacsError> {
        if !(self.interval > 0.0) || !self.interval.is_finite() {
            return Err(BacsError::Domain("aspect-ratio interval must be positive".into()));
        }
        if !self.minimum.is_finite() || self.bins == 0 {
            return Err(BacsError::Domain("aspect-ratio quantizer needs ≥ 1 bin".into()));
        }
        Ok(())
    }

    pub fn maximum(&self) -> f64 {
        self.minimum + self.interval * f64::from(self.bins - 1)
    }

    pub fn quantize(&self, ar: f64) -> Result<u32, BacsError> {
        if !(ar > 0.0) || !ar.is_finite() {
            return Err(BacsError::Domain(format!("aspect ratio {ar} is not positive")));
        }
        let clamped = ar.clamp(self.minimum, self.maximum());
        let index = round_half_up((clamped - self.minimum) / self.interval);
        Ok(index.clamp(0, i64::from(self.bins) - 1) as u32)
    }

    /// Bin center for `index` (clamped to the last bin).
    pub fn dequantize(&self, index: u32) -> f64 {
        self.minimum + self.interval * f64::from(index.min(self.bins - 1))
    }

    /// Grid dimensions `(grid_w, grid_h)` implied by an aspect-ratio bin.
    pub fn grid_dims(&self, index: u32, grid_max: u32) -> (u32, u32) {
        let ar = self.dequantize(index);
        if ar >= 1.0 {
            (grid_max, short_side(f64::from(grid_max) / ar, grid_max))
        } else {
            (short_side(f64::from(grid_max) * ar, grid_max), grid_max)
        }
    }
}

fn short_side(value: f64, grid_max: u32) -> u32 {
    round_half_up(value).clamp(1, i64::from(grid_max)) as u32
}

/// Layout-encoding settings shared by the encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub grid_max: u32,
    pub ar: ArQuantizer,
    pub mode: PositionMode,
    pub include_imgar: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            grid_max: DEFAULT_GRID_MAX,
            ar: ArQuantizer::default(),
            mode: PositionMode::Relative,
            include_imgar: false,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), BacsError> {
        if self.grid_max < 2 {
            return Err(BacsError::Domain("grid_max must be at least 2".into()));
        }
        self.ar.validate()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary {
            grid_max: self.grid_max,
            ar_bins: self.ar.bins,
        }
    }
}

/// Box on the quantized grid, in cells. `x`/`y` are the min corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl GridBox {
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Clamps raw coordinates into a `grid_w × grid_h` grid: corners into
    /// `[0, side-1]`, sizes into `[1, side]`.
    pub fn clamped(x: i64, y: i64, w: i64, h: i64, grid_w: u32, grid_h: u32) -> GridBox {
        let gw = i64::from(grid_w.max(1));
        let gh = i64::from(grid_h.max(1));
        GridBox {
            x: x.clamp(0, gw - 1) as u32,
            y: y.clamp(0, gh - 1) as u32,
            w: w.clamp(1, gw) as u32,
            h: h.clamp(1, gh) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassedBox {
    #[serde(rename = "class")]
    pub class_label: String,
    #[serde(rename = "box")]
    pub grid_box: GridBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedLayout {
    pub grid_w: u32,
    pub grid_h: u32,
    /// `None` when the layout was restored from a sequence without `imgar`.
    pub ar_index: Option<u32>,
    pub boxes: BTreeMap<NodeId, ClassedBox>,
}

impl QuantizedLayout {
    /// Restriction to the given nodes (unknown ids are ignored).
    pub fn restricted_to(&self, nodes: impl IntoIterator<Item = NodeId>) -> QuantizedLayout {
        let boxes = nodes
            .into_iter()
            .filter_map(|id| self.boxes.get(&id).map(|b| (id, b.clone())))
            .collect();
        QuantizedLayout {
            boxes,
            ..self.clone()
        }
    }
}

pub fn quantize_aspect_ratio(ar: f64, q: &ArQuantizer) -> Result<u32, BacsError> {
    q.quantize(ar)
}

/// Grid dimensions for an image: the long side gets `grid_max` cells and the
/// short side is scaled and rounded (at least one cell).
pub fn grid_dims_for_image(image_w: u32, image_h: u32, grid_max: u32) -> (u32, u32) {
    let (w, h, m) = (f64::from(image_w), f64::from(image_h), f64::from(grid_max));
    if image_w >= image_h {
        (grid_max, short_side(m * h / w, grid_max))
    } else {
        (short_side(m * w / h, grid_max), grid_max)
    }
}

/// Maps a pixel layout onto the grid, labelling each box with its node class.
pub fn quantize_layout(
    graph: &SceneGraph,
    layout: &SemanticLayout,
    grid_max: u32,
    q: &ArQuantizer,
) -> Result<QuantizedLayout, BacsError> {
    if grid_max == 0 {
        return Err(BacsError::Domain("grid_max must be ≥ 1".into()));
    }
    if layout.image_w == 0 || layout.image_h == 0 {
        return Err(BacsError::Domain("image dimensions must be positive".into()));
    }
    let (grid_w, grid_h) = grid_dims_for_image(layout.image_w, layout.image_h, grid_max);
    let ar_index = q.quantize(f64::from(layout.image_w) / f64::from(layout.image_h))?;
    let (iw, ih) = (f64::from(layout.image_w), f64::from(layout.image_h));
    let (gw, gh) = (f64::from(grid_w), f64::from(grid_h));
    let mut boxes = BTreeMap::new();
    for (&id, b) in &layout.boxes {
        let class_label = graph
            .class_of(id)
            .ok_or_else(|| BacsError::Consistency(format!("layout box {id} has no graph node")))?
            .to_owned();
        let grid_box = GridBox::clamped(
            round_half_up(b.x * gw / iw),
            round_half_up(b.y * gh / ih),
            round_half_up(b.w * gw / iw).max(1),
            round_half_up(b.h * gh / ih).max(1),
            grid_w,
            grid_h,
        );
        boxes.insert(id, ClassedBox { class_label, grid_box });
    }
    Ok(QuantizedLayout {
        grid_w,
        grid_h,
        ar_index: Some(ar_index),
        boxes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectPosition {
    /// Corner offset from the subject box.
    Relative { dx: i64, dy: i64 },
    Absolute { x: u32, y: u32 },
}

/// One decoded ten-token segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BacsSegment {
    pub subject: ClassedBox,
    pub object_class: String,
    pub object_position: ObjectPosition,
    pub object_w: u32,
    pub object_h: u32,
}

impl BacsSegment {
    fn push_tokens(&self, out: &mut Vec<BacsToken>) {
        let s = &self.subject.grid_box;
        out.push(BacsToken::Class(self.subject.class_label.clone()));
        out.push(BacsToken::Xp(s.x));
        out.push(BacsToken::Yp(s.y));
        out.push(BacsToken::W(s.w));
        out.push(BacsToken::H(s.h));
        out.push(BacsToken::Class(self.object_class.clone()));
        match self.object_position {
            ObjectPosition::Relative { dx, dy } => {
                out.push(BacsToken::x_offset(dx));
                out.push(BacsToken::y_offset(dy));
            }
            ObjectPosition::Absolute { x, y } => {
                out.push(BacsToken::Xp(x));
                out.push(BacsToken::Yp(y));
            }
        }
        out.push(BacsToken::W(self.object_w));
        out.push(BacsToken::H(self.object_h));
    }

    /// Builds a segment from ten tokens whose kinds already passed alignment.
    fn from_aligned(t: &[BacsToken]) -> BacsSegment {
        let v = |i: usize| t[i].value().expect("aligned numeric token");
        let class = |i: usize| match &t[i] {
            BacsToken::Class(c) => c.clone(),
            _ => unreachable!("aligned class token"),
        };
        let object_position = match (t[6].signed_dx(), t[7].signed_dy()) {
            (Some(dx), Some(dy)) => ObjectPosition::Relative { dx, dy },
            _ => ObjectPosition::Absolute { x: v(6), y: v(7) },
        };
        BacsSegment {
            subject: ClassedBox {
                class_label: class(0),
                grid_box: GridBox {
                    x: v(1),
                    y: v(2),
                    w: v(3),
                    h: v(4),
                },
            },
            object_class: class(5),
            object_position,
            object_w: v(8),
            object_h: v(9),
        }
    }

    /// Subject and object boxes, before clamping.
    fn raw_boxes(&self) -> ([i64; 4], [i64; 4]) {
        let s = &self.subject.grid_box;
        let subject = [s.x, s.y, s.w, s.h].map(i64::from);
        let (ox, oy) = match self.object_position {
            ObjectPosition::Relative { dx, dy } => (subject[0] + dx, subject[1] + dy),
            ObjectPosition::Absolute { x, y } => (i64::from(x), i64::from(y)),
        };
        let object = [ox, oy, i64::from(self.object_w), i64::from(self.object_h)];
        (subject, object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BacsSequence {
    pub imgar: Option<u32>,
    pub segments: Vec<BacsSegment>,
}

impl BacsSequence {
    pub fn to_tokens(&self) -> Vec<BacsToken> {
        let mut out = Vec::with_capacity(self.segments.len() * SEGMENT_LEN + 1);
        if let Some(ar) = self.imgar {
            out.push(BacsToken::ImgAr(ar));
        }
        for seg in &self.segments {
            seg.push_tokens(&mut out);
        }
        out
    }

    /// Builds a sequence from tokens after checking them against the segment
    /// pattern for `expected_k` relationships.
    pub fn from_tokens(
        tokens: &[BacsToken],
        expected_k: usize,
        mode: PositionMode,
        expect_imgar: bool,
    ) -> Result<BacsSequence, BacsError> {
        let bounds = verify_alignment(tokens, expected_k, mode, expect_imgar)?;
        let imgar = match tokens.first() {
            Some(BacsToken::ImgAr(v)) if expect_imgar => Some(*v),
            _ => None,
        };
        Ok(BacsSequence {
            imgar,
            segments: bounds
                .into_iter()
                .map(|r| BacsSegment::from_aligned(&tokens[r]))
                .collect(),
        })
    }

    pub fn parse(
        line: &str,
        expected_k: usize,
        mode: PositionMode,
        expect_imgar: bool,
    ) -> Result<BacsSequence, BacsError> {
        Self::from_tokens(&tokenize(line)?, expected_k, mode, expect_imgar)
    }
}

impl fmt::Display for BacsSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.to_tokens().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Range of token values the vocabulary admits for a given grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    pub grid_max: u32,
    pub ar_bins: u32,
}

impl Vocabulary {
    pub fn admits(&self, token: &BacsToken) -> bool {
        let m = self.grid_max;
        match *token {
            BacsToken::Class(_) => true,
            BacsToken::Xp(v) | BacsToken::Yp(v) | BacsToken::Ixp(v) | BacsToken::Iyp(v) => v < m,
            BacsToken::Ixn(v) | BacsToken::Iyn(v) => v >= 1 && v < m,
            BacsToken::W(v) | BacsToken::H(v) => v >= 1 && v <= m,
            BacsToken::ImgAr(v) => v < self.ar_bins,
        }
    }
}

/// Encodes a quantized layout following the order of `nodes`.
pub fn encode_bacs(
    ql: &QuantizedLayout,
    nodes: &NodeSequence,
    mode: PositionMode,
    include_imgar: bool,
) -> Result<BacsSequence, BacsError> {
    let lookup = |id: NodeId| {
        ql.boxes
            .get(&id)
            .ok_or_else(|| BacsError::Consistency(format!("node {id} has no box in the layout")))
    };
    let segments = nodes
        .pairs
        .iter()
        .map(|&(s, o)| {
            let subject = lookup(s)?.clone();
            let object = lookup(o)?;
            let ob = object.grid_box;
            let object_position = match mode {
                PositionMode::Relative => ObjectPosition::Relative {
                    dx: i64::from(ob.x) - i64::from(subject.grid_box.x),
                    dy: i64::from(ob.y) - i64::from(subject.grid_box.y),
                },
                PositionMode::Absolute => ObjectPosition::Absolute { x: ob.x, y: ob.y },
            };
            Ok(BacsSegment {
                subject,
                object_class: object.class_label.clone(),
                object_position,
                object_w: ob.w,
                object_h: ob.h,
            })
        })
        .collect::<Result<Vec<_>, BacsError>>()?;
    let imgar = if include_imgar {
        Some(ql.ar_index.ok_or_else(|| {
            BacsError::Consistency("layout has no aspect-ratio index to emit".into())
        })?)
    } else {
        None
    };
    Ok(BacsSequence { imgar, segments })
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("expected {expected} tokens, found {found}")]
    Length { expected: usize, found: usize },
    #[error("token {position} is `{found}`, expected one of {expected:?}")]
    Kind {
        position: usize,
        expected: Vec<TokenKind>,
        found: TokenKind,
    },
}

/// Kinds admitted at offset `i` within a segment.
pub fn segment_pattern(i: usize, mode: PositionMode) -> &'static [TokenKind] {
    use TokenKind::*;
    match (i, mode) {
        (0 | 5, _) => &[C],
        (1, _) | (6, PositionMode::Absolute) => &[Xp],
        (2, _) | (7, PositionMode::Absolute) => &[Yp],
        (3 | 8, _) => &[W],
        (4 | 9, _) => &[H],
        (6, PositionMode::Relative) => &[Ixp, Ixn],
        (7, PositionMode::Relative) => &[Iyp, Iyn],
        _ => unreachable!("segment offset out of range"),
    }
}

/// Kind-level alignment check; see [`verify_alignment`].
pub fn verify_kinds(
    kinds: &[TokenKind],
    expected_k: usize,
    mode: PositionMode,
    expect_imgar: bool,
) -> Result<Vec<Range<usize>>, AlignmentError> {
    let offset = usize::from(expect_imgar);
    let expected = SEGMENT_LEN * expected_k + offset;
    if kinds.len() != expected {
        return Err(AlignmentError::Length {
            expected,
            found: kinds.len(),
        });
    }
    if expect_imgar && kinds[0] != TokenKind::ImgAr {
        return Err(AlignmentError::Kind {
            position: 0,
            expected: vec![TokenKind::ImgAr],
            found: kinds[0],
        });
    }
    for (position, &found) in kinds.iter().enumerate().skip(offset) {
        let allowed = segment_pattern((position - offset) % SEGMENT_LEN, mode);
        if !allowed.contains(&found) {
            return Err(AlignmentError::Kind {
                position,
                expected: allowed.to_vec(),
                found,
            });
        }
    }
    Ok((0..expected_k)
        .map(|k| offset + k * SEGMENT_LEN..offset + (k + 1) * SEGMENT_LEN)
        .collect())
}

/// Checks token kinds position by position against the segment pattern and
/// returns the token range of each segment.
pub fn verify_alignment(
    tokens: &[BacsToken],
    expected_k: usize,
    mode: PositionMode,
    expect_imgar: bool,
) -> Result<Vec<Range<usize>>, AlignmentError> {
    let kinds: Vec<TokenKind> = tokens.iter().map(BacsToken::kind).collect();
    verify_kinds(&kinds, expected_k, mode, expect_imgar)
}

/// Merges boxes predicted for the same node. Equal classes average the boxes
/// (half-up); mixed classes pick the lower-median candidate by area.
pub fn merge_boxes(candidates: &[ClassedBox]) -> Result<ClassedBox, BacsError> {
    let first = candidates
        .first()
        .ok_or_else(|| BacsError::Domain("cannot merge an empty candidate list".into()))?;
    if candidates.iter().all(|c| c.class_label == first.class_label) {
        let n = candidates.len() as i64;
        let mean = |f: fn(&GridBox) -> u32| {
            let sum: i64 = candidates.iter().map(|c| i64::from(f(&c.grid_box))).sum();
            mean_half_up(sum, n) as u32
        };
        return Ok(ClassedBox {
            class_label: first.class_label.clone(),
            grid_box: GridBox {
                x: mean(|b| b.x),
                y: mean(|b| b.y),
                w: mean(|b| b.w),
                h: mean(|b| b.h),
            },
        });
    }
    let mut by_area: Vec<&ClassedBox> = candidates.iter().collect();
    by_area.sort_by_key(|c| c.grid_box.area());
    Ok(by_area[(by_area.len() - 1) / 2].clone())
}

/// Executes a sequence into a layout. Boxes are clamped to the vocabulary
/// range of a `grid_max` grid; boxes sharing a node id are merged.
pub fn execute_bacs(
    seq: &BacsSequence,
    nodes: &NodeSequence,
    grid_max: u32,
    q: &ArQuantizer,
) -> Result<QuantizedLayout, BacsError> {
    if nodes.len() != seq.segments.len() {
        return Err(BacsError::Consistency(format!(
            "{} node pairs for {} segments",
            nodes.len(),
            seq.segments.len()
        )));
    }
    if grid_max == 0 {
        return Err(BacsError::Domain("grid_max must be ≥ 1".into()));
    }
    let (grid_w, grid_h) = match seq.imgar {
        Some(i) => q.grid_dims(i, grid_max),
        None => (grid_max, grid_max),
    };
    let place = |class: &str, b: [i64; 4]| ClassedBox {
        class_label: class.to_owned(),
        grid_box: GridBox::clamped(b[0], b[1], b[2], b[3], grid_max, grid_max),
    };
    let mut groups: BTreeMap<NodeId, Vec<ClassedBox>> = BTreeMap::new();
    for (seg, &(s, o)) in seq.segments.iter().zip(&nodes.pairs) {
        let (subject, object) = seg.raw_boxes();
        groups
            .entry(s)
            .or_default()
            .push(place(&seg.subject.class_label, subject));
        groups
            .entry(o)
            .or_default()
            .push(place(&seg.object_class, object));
    }
    let boxes = groups
        .into_iter()
        .map(|(id, c)| Ok((id, merge_boxes(&c)?)))
        .collect::<Result<_, BacsError>>()?;
    Ok(QuantizedLayout {
        grid_w,
        grid_h,
        ar_index: seq.imgar,
        boxes,
    })
}
