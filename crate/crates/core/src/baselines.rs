//! Comparison approaches that only flag failing-log lines.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::log::Log;
use crate::script::{ActionKind, EditScript};

pub const DEFAULT_KEYWORDS: [&str; 4] = ["fail", "error", "exception", "panic"];

/// Failing-log line indices, serialized as a sorted JSON array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlaggedLines {
    pub mod_indices: BTreeSet<usize>,
}

impl FlaggedLines {
    pub fn len(&self) -> usize {
        self.mod_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mod_indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mod_indices.contains(&index)
    }
}

impl FromIterator<usize> for FlaggedLines {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        FlaggedLines {
            mod_indices: iter.into_iter().collect(),
        }
    }
}

pub fn default_keywords() -> Vec<String> {
    DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect()
}

/// Lines whose stripped text contains any keyword, ignoring case.
pub fn keyword_search<S: AsRef<str>>(failing: &Log, keywords: &[S]) -> FlaggedLines {
    let needles: Vec<String> = keywords.iter().map(|k| k.as_ref().to_lowercase()).collect();
    failing
        .lines
        .iter()
        .filter(|line| {
            let hay = line.stripped.to_lowercase();
            needles.iter().any(|k| hay.contains(k.as_str()))
        })
        .map(|line| line.index)
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Event<'a> {
    Start,
    Line(&'a str),
    End,
}

fn bigrams(log: &Log) -> impl Iterator<Item = (Event<'_>, Event<'_>)> {
    let events: Vec<Event> = std::iter::once(Event::Start)
        .chain(log.lines.iter().map(|l| Event::Line(&l.stripped)))
        .chain(std::iter::once(Event::End))
        .collect();
    (0..events.len() - 1).map(move |i| (events[i], events[i + 1]))
}

/// Flags failing line j when the pair (line j-1 or START, line j) never
/// occurs in the passing log.
pub fn bigram_diff(passing: &Log, failing: &Log) -> FlaggedLines {
    let known: HashSet<(Event, Event)> = bigrams(passing).collect();
    bigrams(failing)
        .enumerate()
        .filter(|(_, pair)| matches!(pair.1, Event::Line(_)) && !known.contains(pair))
        .map(|(j, _)| j)
        .collect()
}

/// Modified-log indices of added actions.
pub fn diff_output_lines(script: &EditScript) -> FlaggedLines {
    script.mod_indices(ActionKind::Added).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::{cidiff, lcs_diff};
    use crate::similarity::SimilarityParams;
    use proptest::prelude::*;

    fn log(lines: &[&str]) -> Log {
        Log::from_lines("t", lines.iter().copied())
    }

    fn set(ix: &[usize]) -> FlaggedLines {
        ix.iter().copied().collect()
    }

    #[test]
    fn keyword_examples() {
        let l = log(&["Error compiling project", "Build SUCCESS", "Tests FAILED: 3"]);
        assert_eq!(keyword_search(&l, &DEFAULT_KEYWORDS), set(&[0, 2]));
        assert_eq!(keyword_search(&l, &["success"]), set(&[1]));
    }

    #[test]
    fn keywords_ignore_timestamps() {
        let l = Log::from_text("t", "2024-01-01T00:00:00.0000000Z error here\n");
        assert_eq!(keyword_search(&l, &["2024"]), set(&[]));
        assert_eq!(keyword_search(&l, &default_keywords()), set(&[0]));
    }

    #[test]
    fn bigram_examples() {
        assert_eq!(bigram_diff(&log(&["a", "b"]), &log(&["a", "b"])), set(&[]));
        assert_eq!(bigram_diff(&log(&["a", "b"]), &log(&["a", "c"])), set(&[1]));
        assert_eq!(
            bigram_diff(&log(&["a", "b", "a", "b"]), &log(&["b", "a"])),
            set(&[0])
        );
        assert_eq!(bigram_diff(&log(&[]), &log(&["x"])), set(&[0]));
        assert_eq!(bigram_diff(&log(&["x"]), &log(&[])), set(&[]));
    }

    #[test]
    fn flagged_lines_json_is_a_list() {
        assert_eq!(serde_json::to_string(&set(&[9, 6])).unwrap(), "[6,9]");
        let back: FlaggedLines = serde_json::from_str("[3,1]").unwrap();
        assert_eq!(back, set(&[1, 3]));
    }

    #[test]
    fn output_lines_of_unchanged_script_are_empty() {
        let a = log(&["a", "b"]);
        assert!(diff_output_lines(&lcs_diff(&a, &a)).is_empty());
    }

    fn small_log() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop_oneof![
                Just("ok".to_string()),
                Just("Tests FAILED".to_string()),
                Just("step 1 took 2s".to_string()),
                Just("step 2 took 3s".to_string()),
                "[a-d]{1,3}",
            ],
            0..25,
        )
    }

    proptest! {
        #[test]
        fn keyword_search_is_monotone(lines in small_log(), extra in "[a-z]{1,3}") {
            let l = Log::from_lines("t", lines.iter().map(String::as_str));
            let base = keyword_search(&l, &["fail"]);
            let more = keyword_search(&l, &["fail".to_string(), extra]);
            prop_assert!(base.mod_indices.is_subset(&more.mod_indices));
        }

        #[test]
        fn bigram_of_identical_logs_is_empty(lines in small_log()) {
            let l = Log::from_lines("t", lines.iter().map(String::as_str));
            prop_assert!(bigram_diff(&l, &l).is_empty());
        }

        #[test]
        fn cidiff_output_within_lcs_output(a in small_log(), b in small_log()) {
            let ra = Log::from_lines("p", a.iter().map(String::as_str));
            let rb = Log::from_lines("f", b.iter().map(String::as_str));
            let ci = diff_output_lines(&cidiff(&ra, &rb, &SimilarityParams::default()));
            let lcs = diff_output_lines(&lcs_diff(&ra, &rb));
            prop_assert!(ci.mod_indices.is_subset(&lcs.mod_indices));
        }
    }
}
