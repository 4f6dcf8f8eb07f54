//! SRT ingestion and dialogue cleaning.
//!
//! A parsed [`SubtitleSegment`] is one timed dialogue turn. After
//! [`clean_segments`], the position of a segment in the returned list is its
//! instance number for everything downstream.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleSegment {
    /// 1-based index as written in the file.
    pub index: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Text lines joined by a single space.
    pub raw_text: String,
    /// Dialogue after cleaning. Equal to `raw_text` until [`clean_segments`] runs.
    pub clean_text: String,
    /// Original text lines, kept for line-level cleaning rules.
    pub lines: Vec<String>,
}

impl SubtitleSegment {
    pub fn new(index: usize, start_ms: u64, end_ms: u64, lines: Vec<String>) -> Self {
        let raw_text = lines.join(" ");
        Self {
            index,
            start_ms,
            end_ms,
            clean_text: raw_text.clone(),
            raw_text,
            lines,
        }
    }
}

/// Parses an SRT byte stream. An empty stream yields an empty list.
pub fn parse_srt(bytes: &[u8]) -> Result<Vec<SubtitleSegment>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Srt {
        block: 0,
        message: format!("input is not valid UTF-8: {e}"),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }

    let mut segments = Vec::with_capacity(blocks.len());
    for (b, block) in blocks.iter().enumerate() {
        let block_no = b + 1;
        let err = |message: String| Error::Srt {
            block: block_no,
            message,
        };
        let index: usize = block[0]
            .trim()
            .parse()
            .map_err(|_| err(format!("expected numeric index line, found {:?}", block[0])))?;
        let timing = block
            .get(1)
            .ok_or_else(|| err("index line without a timing line".to_string()))?;
        let (start_ms, end_ms) = parse_timing_line(timing).map_err(err)?;
        if start_ms >= end_ms {
            return Err(err(format!("start {start_ms} ms is not before end {end_ms} ms")));
        }
        let lines = block[2..].iter().map(|l| l.trim().to_string()).collect();
        segments.push(SubtitleSegment::new(index, start_ms, end_ms, lines));
    }
    segments.sort_by_key(|s| s.start_ms);
    Ok(segments)
}

fn parse_timing_line(line: &str) -> std::result::Result<(u64, u64), String> {
    let (start, end) = line
        .split_once(" --> ")
        .ok_or_else(|| format!("malformed timing line {line:?}"))?;
    let start = parse_timestamp(start).ok_or_else(|| format!("malformed start time {start:?}"))?;
    let end = parse_timestamp(end).ok_or_else(|| format!("malformed end time {end:?}"))?;
    Ok((start, end))
}

/// Parses `HH:MM:SS,mmm`.
fn parse_timestamp(s: &str) -> Option<u64> {
    let b = s.as_bytes();
    if b.len() != 12 || b[2] != b':' || b[5] != b':' || b[8] != b',' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u64> {
        let part = &s[r];
        if part.bytes().all(|c| c.is_ascii_digit()) {
            part.parse().ok()
        } else {
            None
        }
    };
    let (h, m, sec, ms) = (num(0..2)?, num(3..5)?, num(6..8)?, num(9..12)?);
    if m >= 60 || sec >= 60 {
        return None;
    }
    Some(((h * 60 + m) * 60 + sec) * 1000 + ms)
}

pub fn format_timestamp(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, ms) = (rem / 1000, rem % 1000);
    format!("{h:02}:{m:02}:{s:02},{ms:03}")
}

/// Serializes segments in canonical SRT layout.
pub fn write_srt(segments: &[SubtitleSegment]) -> String {
    let mut out = String::new();
    for seg in segments {
        let _ = writeln!(out, "{}", seg.index);
        let _ = writeln!(
            out,
            "{} --> {}",
            format_timestamp(seg.start_ms),
            format_timestamp(seg.end_ms)
        );
        for line in &seg.lines {
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}

/// Deletes `[...]` spans. An unmatched `[` deletes to the end of the text.
fn strip_brackets(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        match rest[open..].find(']') {
            Some(close) => rest = &rest[open + close + 1..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes bracketed descriptions and dialogue dashes, drops segments that
/// end up empty or carry two dash-marked speakers. Original indices are kept.
pub fn clean_segments(segments: &[SubtitleSegment]) -> Vec<SubtitleSegment> {
    segments
        .iter()
        .filter_map(|seg| {
            let stripped = strip_brackets(&seg.lines.join("\n"));
            let mut dashed = 0;
            let mut parts = Vec::new();
            for line in stripped.lines() {
                let line = line.trim();
                let line = match line.strip_prefix('-') {
                    Some(rest) => {
                        dashed += 1;
                        rest.trim_start()
                    }
                    None => line,
                };
                if !line.is_empty() {
                    parts.push(line);
                }
            }
            if dashed >= 2 {
                return None;
            }
            let clean = collapse_whitespace(&parts.join(" "));
            if clean.is_empty() {
                return None;
            }
            let mut out = seg.clone();
            out.clean_text = clean;
            Some(out)
        })
        .collect()
}
