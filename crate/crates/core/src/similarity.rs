//! Structural similarity between log lines.
//!
//! Two lines are comparable only when they have the same number of tokens and
//! share at least one identical token at the same position (a static part of
//! the originating log statement). Their similarity is then the mean of the
//! per-position token scores: 1 for identical tokens, 0.5 for tokens that
//! look like two values of the same dynamic field, 0 otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::LogLine;

pub const DEFAULT_LINE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TOKEN_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// Minimum line similarity for two lines to be paired as updated.
    pub line_threshold: f64,
    /// Minimum trigram similarity for two tokens of different lengths to count as similar.
    pub token_threshold: f64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams {
            line_threshold: DEFAULT_LINE_THRESHOLD,
            token_threshold: DEFAULT_TOKEN_THRESHOLD,
        }
    }
}

impl SimilarityParams {
    pub fn new(line_threshold: f64, token_threshold: f64) -> Result<Self> {
        check_unit("line_threshold", line_threshold)?;
        check_unit("token_threshold", token_threshold)?;
        Ok(SimilarityParams {
            line_threshold,
            token_threshold,
        })
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold { name, value })
    }
}

/// Distinct length-3 character windows; a token shorter than three
/// characters is its own single pseudo-trigram.
fn trigrams(token: &str) -> Vec<&str> {
    let bounds: Vec<usize> = token
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(token.len()))
        .collect();
    let chars = bounds.len() - 1;
    if chars < 3 {
        return vec![token];
    }
    let mut grams: Vec<&str> = (0..=chars - 3)
        .map(|i| &token[bounds[i]..bounds[i + 3]])
        .collect();
    grams.sort_unstable();
    grams.dedup();
    grams
}

/// Jaccard index of the two tokens' trigram sets.
pub fn trigram_similarity(a: &str, b: &str) -> f64 {
    let ta = trigrams(a);
    let tb = trigrams(b);
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(tb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = ta.len() + tb.len() - common;
    common as f64 / union as f64
}

/// Score of one token position: 1, 0.5 or 0.
pub fn token_similarity(u: &str, v: &str, params: &SimilarityParams) -> f64 {
    if u == v {
        1.0
    } else if u.chars().count() == v.chars().count() || trigram_similarity(u, v) >= params.token_threshold {
        0.5
    } else {
        0.0
    }
}

/// Per-position token scores, or `None` when the token counts differ.
pub fn token_similarities(u: &[String], v: &[String], params: &SimilarityParams) -> Option<Vec<f64>> {
    (u.len() == v.len()).then(|| {
        u.iter()
            .zip(v)
            .map(|(a, b)| token_similarity(a, b, params))
            .collect()
    })
}

/// Similarity of two token lists.
pub fn logsim_tokens(u: &[String], v: &[String], params: &SimilarityParams) -> f64 {
    if u.len() != v.len() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut anchored = false;
    for (a, b) in u.iter().zip(v) {
        let score = token_similarity(a, b, params);
        if score == 1.0 {
            anchored = true;
        }
        total += score;
    }
    if !anchored {
        return 0.0;
    }
    total / u.len() as f64
}

pub fn logsim(s: &LogLine, t: &LogLine, params: &SimilarityParams) -> f64 {
    logsim_tokens(&s.tokens, &t.tokens, params)
}

/// Similarity used when pairing lines: identical text scores 1 (this covers
/// blank lines), anything else goes through [`logsim`].
pub fn line_similarity(s: &LogLine, t: &LogLine, params: &SimilarityParams) -> f64 {
    if s.stripped == t.stripped {
        1.0
    } else {
        logsim(s, t, params)
    }
}

/// Positions whose tokens are not identical; every extra position counts as
/// changed when the token counts differ.
pub fn changed_token_positions(s: &LogLine, t: &LogLine) -> Vec<usize> {
    let common = s.tokens.len().min(t.tokens.len());
    let longest = s.tokens.len().max(t.tokens.len());
    (0..common)
        .filter(|&i| s.tokens[i] != t.tokens[i])
        .chain(common..longest)
        .collect()
}
