//! Line-indexed representation of a build log.
//!
//! Every other module works on [`Log`] values: the raw text of each line is
//! kept for rendering, while comparisons use the timestamp-stripped text and
//! its whitespace-delimited tokens.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Leading ISO-8601 timestamp followed by exactly one space, as emitted in
/// GitHub Actions job logs.
pub const DEFAULT_TIMESTAMP_PATTERN: &str =
    r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:?\d{2})? ";

fn default_timestamp_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(DEFAULT_TIMESTAMP_PATTERN).expect("valid timestamp pattern"))
}

/// Removes a leading `YYYY-MM-DDThh:mm:ss[.frac][Z|±hh:mm] ` prefix.
pub fn strip_timestamp(raw_line: &str) -> &str {
    TimestampStripper::Default.strip(raw_line)
}

/// Splits on runs of whitespace, dropping empty pieces.
pub fn tokenize(stripped_line: &str) -> Vec<String> {
    stripped_line.split_whitespace().map(str::to_owned).collect()
}

/// How leading timestamps are removed while loading a log.
#[derive(Debug, Clone, Default)]
pub enum TimestampStripper {
    /// The GitHub Actions ISO-8601 prefix.
    #[default]
    Default,
    /// A user-supplied pattern; only a match anchored at the line start is removed.
    Pattern(Regex),
    /// Keep lines untouched.
    Keep,
}

impl TimestampStripper {
    pub fn from_pattern(pattern: &str) -> Result<Self> {
        let anchored = if pattern.starts_with('^') {
            pattern.to_owned()
        } else {
            format!("^(?:{pattern})")
        };
        Regex::new(&anchored)
            .map(TimestampStripper::Pattern)
            .map_err(|e| Error::InvalidPattern(e.to_string()))
    }

    pub fn strip<'a>(&self, line: &'a str) -> &'a str {
        let re = match self {
            TimestampStripper::Default => default_timestamp_regex(),
            TimestampStripper::Pattern(re) => re,
            TimestampStripper::Keep => return line,
        };
        match re.find(line) {
            Some(m) if m.start() == 0 => &line[m.end()..],
            _ => line,
        }
    }
}

/// One physical log line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub index: usize,
    /// Original text without the `\n` terminator (a trailing `\r` is kept).
    pub raw: String,
    /// Text after timestamp and line-terminator removal.
    pub stripped: String,
    pub tokens: Vec<String>,
}

impl LogLine {
    pub fn new(index: usize, raw: impl Into<String>, stripper: &TimestampStripper) -> Self {
        let raw = raw.into();
        let logical = raw.strip_suffix('\r').unwrap_or(&raw);
        let stripped = stripper.strip(logical).to_owned();
        let tokens = tokenize(&stripped);
        LogLine {
            index,
            raw,
            stripped,
            tokens,
        }
    }
}

/// An ordered sequence of lines plus an origin label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Log {
    pub source: String,
    pub lines: Vec<LogLine>,
}

impl Log {
    /// Builds a log from in-memory text using the default timestamp stripper.
    pub fn from_text(source: impl Into<String>, text: &str) -> Self {
        Self::from_text_with(source, text, &TimestampStripper::Default)
    }

    pub fn from_text_with(source: impl Into<String>, text: &str, stripper: &TimestampStripper) -> Self {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let lines = if text.is_empty() {
            Vec::new()
        } else {
            body.split('\n')
                .enumerate()
                .map(|(i, raw)| LogLine::new(i, raw, stripper))
                .collect()
        };
        Log {
            source: source.into(),
            lines,
        }
    }

    /// Decodes bytes lossily; invalid UTF-8 becomes U+FFFD.
    pub fn from_bytes(source: impl Into<String>, bytes: &[u8], stripper: &TimestampStripper) -> Self {
        Self::from_text_with(source, &String::from_utf8_lossy(bytes), stripper)
    }

    pub fn from_lines<I, S>(source: impl Into<String>, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let stripper = TimestampStripper::Default;
        Log {
            source: source.into(),
            lines: lines
                .into_iter()
                .enumerate()
                .map(|(i, raw)| LogLine::new(i, raw, &stripper))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn line(&self, index: usize) -> &LogLine {
        &self.lines[index]
    }
}

/// Reads a log file; the path becomes the source label.
pub fn load_log(path: impl AsRef<Path>, stripper: &TimestampStripper) -> Result<Log> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(Log::from_bytes(path.display().to_string(), &bytes, stripper))
}
