//! Recursive character splitting.
//!
//! A text longer than `max_size` characters is cut at the highest level of the
//! separator hierarchy (paragraph, line, space, character) that occurs in it.
//! Consecutive segments are packed greedily into windows of at most
//! `max_size` characters; a segment that is too long on its own is split again
//! one level down. Paragraph and line windows keep their natural boundaries,
//! while forced splits at the space and character levels overlap by
//! `floor(max_size * overlap_fraction)` characters.
//!
//! All offsets and lengths are counted in Unicode scalar values.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{RecordDraft, RecordId, UserId};

pub const DEFAULT_MAX_SIZE: usize = 200;
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.25;

/// A level of the separator hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLevel {
    /// The input fit in a single chunk and was not split.
    WholeInput,
    /// Two consecutive newlines.
    Paragraph,
    /// One newline.
    Line,
    /// One space character.
    Space,
    /// Fixed-stride windows with no separator.
    Character,
}

impl SplitLevel {
    fn separator(self) -> &'static [char] {
        match self {
            SplitLevel::Paragraph => &['\n', '\n'],
            SplitLevel::Line => &['\n'],
            SplitLevel::Space => &[' '],
            SplitLevel::WholeInput | SplitLevel::Character => &[],
        }
    }

    /// Levels that cut through running text and therefore carry overlap.
    fn is_forced(self) -> bool {
        matches!(self, SplitLevel::Space | SplitLevel::Character)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChunkConfigError {
    #[error("max_size must be at least 2, got {0}")]
    MaxSizeTooSmall(usize),
    #[error("overlap_fraction must be in [0, 1), got {0}")]
    OverlapOutOfRange(f64),
    #[error("overlap of {overlap} characters leaves no stride at max_size {max_size}")]
    NoStride { overlap: usize, max_size: usize },
    #[error("separator hierarchy must be non-empty and end with the character level")]
    BadHierarchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkConfig {
    max_size: usize,
    overlap_fraction: f64,
    separator_hierarchy: Vec<SplitLevel>,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            max_size: DEFAULT_MAX_SIZE,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
            separator_hierarchy: vec![
                SplitLevel::Paragraph,
                SplitLevel::Line,
                SplitLevel::Space,
                SplitLevel::Character,
            ],
        }
    }
}

impl ChunkConfig {
    pub fn new(max_size: usize, overlap_fraction: f64) -> Result<Self, ChunkConfigError> {
        Self::with_hierarchy(
            max_size,
            overlap_fraction,
            ChunkConfig::default().separator_hierarchy,
        )
    }

    pub fn with_hierarchy(
        max_size: usize,
        overlap_fraction: f64,
        separator_hierarchy: Vec<SplitLevel>,
    ) -> Result<Self, ChunkConfigError> {
        let config = Self {
            max_size,
            overlap_fraction,
            separator_hierarchy,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ChunkConfigError> {
        if self.max_size < 2 {
            return Err(ChunkConfigError::MaxSizeTooSmall(self.max_size));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(ChunkConfigError::OverlapOutOfRange(self.overlap_fraction));
        }
        if self.overlap() >= self.max_size {
            return Err(ChunkConfigError::NoStride {
                overlap: self.overlap(),
                max_size: self.max_size,
            });
        }
        match self.separator_hierarchy.last() {
            Some(SplitLevel::Character)
                if !self.separator_hierarchy.contains(&SplitLevel::WholeInput) => {}
            _ => return Err(ChunkConfigError::BadHierarchy),
        }
        Ok(())
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    pub fn separator_hierarchy(&self) -> &[SplitLevel] {
        &self.separator_hierarchy
    }

    /// Overlap between forced windows, in characters.
    pub fn overlap(&self) -> usize {
        (self.max_size as f64 * self.overlap_fraction).floor() as usize
    }

    /// Distance between the starts of consecutive character-level windows.
    pub fn stride(&self) -> usize {
        self.max_size - self.overlap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub start_offset: usize,
    pub end_offset: usize,
    pub chunk_index: usize,
    pub split_level: SplitLevel,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end_offset - self.start_offset
    }

    pub fn is_empty(&self) -> bool {
        self.start_offset == self.end_offset
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
    level: SplitLevel,
}

struct Splitter<'a> {
    chars: &'a [char],
    config: &'a ChunkConfig,
    out: Vec<Span>,
}

impl<'a> Splitter<'a> {
    fn is_blank(&self, start: usize, end: usize) -> bool {
        self.chars[start..end].iter().all(|c| c.is_whitespace())
    }

    fn occurs(&self, start: usize, end: usize, sep: &[char]) -> bool {
        sep.is_empty() || self.chars[start..end].windows(sep.len()).any(|w| w == sep)
    }

    /// Cuts `[start, end)` after every non-overlapping occurrence of `sep`.
    fn segments(&self, start: usize, end: usize, sep: &[char]) -> Vec<(usize, usize)> {
        let mut segs = Vec::new();
        let mut seg_start = start;
        let mut i = start;
        while i + sep.len() <= end {
            if &self.chars[i..i + sep.len()] == sep {
                i += sep.len();
                segs.push((seg_start, i));
                seg_start = i;
            } else {
                i += 1;
            }
        }
        if seg_start < end {
            segs.push((seg_start, end));
        }
        segs
    }

    fn emit(&mut self, start: usize, end: usize, level: SplitLevel) {
        self.out.push(Span { start, end, level });
    }

    fn split_range(&mut self, start: usize, end: usize, from: usize) {
        let hierarchy = self.config.separator_hierarchy();
        let (idx, level) = hierarchy
            .iter()
            .copied()
            .enumerate()
            .skip(from)
            .find(|(_, level)| self.occurs(start, end, level.separator()))
            .unwrap_or((hierarchy.len() - 1, SplitLevel::Character));

        if level == SplitLevel::Character {
            self.fixed_windows(start, end);
        } else {
            self.pack(start, end, idx, level);
        }
    }

    fn fixed_windows(&mut self, start: usize, end: usize) {
        let max = self.config.max_size();
        let stride = self.config.stride();
        let mut pos = start;
        loop {
            let win_end = (pos + max).min(end);
            self.emit(pos, win_end, SplitLevel::Character);
            if win_end == end {
                break;
            }
            pos += stride;
        }
    }

    /// Start of the next window. Backs up into the previous chunk of this
    /// range when the level overlaps and the overlap still leaves room for
    /// the segment ending at `seg_end`.
    fn window_start(&self, fresh: usize, range_start: usize, seg_end: usize, level: SplitLevel) -> usize {
        let overlap = self.config.overlap();
        if !level.is_forced() || overlap == 0 || fresh == range_start {
            return fresh;
        }
        match self.out.last() {
            Some(prev)
                if prev.end == fresh
                    && prev.end - prev.start > overlap
                    && seg_end - (fresh - overlap) <= self.config.max_size() =>
            {
                fresh - overlap
            }
            _ => fresh,
        }
    }

    fn pack(&mut self, start: usize, end: usize, idx: usize, level: SplitLevel) {
        let max = self.config.max_size();
        let segs = self.segments(start, end, level.separator());
        // Everything before `fresh` is already covered by emitted chunks.
        let mut fresh = start;
        let mut window: Option<(usize, usize)> = None;

        for (seg_start, seg_end) in segs {
            if let Some((win_start, win_end)) = window.take() {
                if seg_end - win_start <= max {
                    window = Some((win_start, seg_end));
                    continue;
                }
                if self.is_blank(win_start, win_end) {
                    // Separator-only window: fold it into the next segment.
                    self.split_range(win_start, seg_end, idx + 1);
                    fresh = seg_end;
                    continue;
                }
                self.emit(win_start, win_end, level);
                fresh = win_end;
            }

            if seg_end - seg_start > max {
                self.split_range(seg_start, seg_end, idx + 1);
                fresh = seg_end;
                continue;
            }
            let win_start = self.window_start(fresh, start, seg_end, level);
            window = Some((win_start, seg_end));
        }

        if let Some((win_start, win_end)) = window {
            if self.is_blank(win_start, win_end) {
                if let Some(prev) = self.out.last_mut() {
                    if prev.end == win_start && win_end - prev.start <= max {
                        prev.end = win_end;
                        return;
                    }
                }
            }
            self.emit(win_start, win_end, level);
        }
    }
}

/// Splits `text` into ordered, possibly overlapping chunks.
pub fn split(text: &str, config: &ChunkConfig) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }

    let mut splitter = Splitter {
        chars: &chars,
        config,
        out: Vec::new(),
    };
    if chars.len() <= config.max_size() {
        splitter.emit(0, chars.len(), SplitLevel::WholeInput);
    } else {
        splitter.split_range(0, chars.len(), 0);
    }

    splitter
        .out
        .into_iter()
        .enumerate()
        .map(|(chunk_index, span)| Chunk {
            text: chars[span.start..span.end].iter().collect(),
            start_offset: span.start,
            end_offset: span.end,
            chunk_index,
            split_level: span.level,
        })
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("user id must not be empty")]
    EmptyUserId,
    #[error("source id must not be empty")]
    EmptySourceId,
}

/// Turns the chunks of one source into record drafts awaiting a vector.
///
/// Record ids are `"{source_id}#{chunk_index}"`, so they are unique as long as
/// source ids are.
pub fn make_records(
    chunks: &[Chunk],
    user_id: &str,
    source_id: &str,
    timestamp: DateTime<Utc>,
) -> Result<Vec<RecordDraft>, RecordError> {
    if user_id.is_empty() {
        return Err(RecordError::EmptyUserId);
    }
    if source_id.is_empty() {
        return Err(RecordError::EmptySourceId);
    }
    Ok(chunks
        .iter()
        .map(|chunk| RecordDraft {
            record_id: RecordId::new(format!("{source_id}#{}", chunk.chunk_index)),
            user_id: UserId::new(user_id),
            text: chunk.text.clone(),
            timestamp,
            source_id: source_id.to_string(),
            chunk_index: chunk.chunk_index,
        })
        .collect())
}
