//! Regression cases on disk: `<root>/<id>/pass.log`, `<root>/<id>/fail.log`
//! and an optional `<root>/<id>/annotations.json` array of failing-log
//! line indices.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::log::{load_log, Log, TimestampStripper};

pub const PASS_FILE: &str = "pass.log";
pub const FAIL_FILE: &str = "fail.log";
pub const ANNOTATIONS_FILE: &str = "annotations.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionCase {
    pub id: String,
    pub passing: Log,
    pub failing: Log,
    /// Relevant failing-log lines; every index is below `failing.len()`.
    pub annotations: Option<BTreeSet<usize>>,
}

/// Cases that loaded, plus the ones that were skipped and why.
#[derive(Debug, Default)]
pub struct Corpus {
    pub cases: Vec<RegressionCase>,
    pub skipped: Vec<Error>,
}

impl Corpus {
    pub fn annotated(&self) -> impl Iterator<Item = &RegressionCase> {
        self.cases.iter().filter(|c| c.annotations.is_some())
    }
}

pub fn load_case(dir: &Path, stripper: &TimestampStripper) -> Result<RegressionCase> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let malformed = |reason: String| Error::MalformedCase {
        case: id.clone(),
        reason,
    };
    for file in [PASS_FILE, FAIL_FILE] {
        if !dir.join(file).is_file() {
            return Err(malformed(format!("missing {file}")));
        }
    }
    let passing = load_log(dir.join(PASS_FILE), stripper)?;
    let failing = load_log(dir.join(FAIL_FILE), stripper)?;
    let ann_path = dir.join(ANNOTATIONS_FILE);
    let annotations = if ann_path.is_file() {
        let text = fs::read_to_string(&ann_path).map_err(|e| Error::io(ann_path.display().to_string(), e))?;
        let set: BTreeSet<usize> =
            serde_json::from_str(&text).map_err(|e| malformed(format!("{ANNOTATIONS_FILE}: {e}")))?;
        if let Some(&bad) = set.iter().find(|&&i| i >= failing.len()) {
            return Err(malformed(format!(
                "annotation {bad} out of range for {} failing lines",
                failing.len()
            )));
        }
        Some(set)
    } else {
        None
    };
    Ok(RegressionCase {
        id,
        passing,
        failing,
        annotations,
    })
}

/// Loads every case directory under `root`, sorted by id.
pub fn load_corpus(root: impl AsRef<Path>, stripper: &TimestampStripper) -> Result<Corpus> {
    let root = root.as_ref();
    let io = |e| Error::io(root.display().to_string(), e);
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    let mut corpus = Corpus::default();
    for dir in dirs {
        match load_case(&dir, stripper) {
            Ok(case) => corpus.cases.push(case),
            Err(e) => corpus.skipped.push(e),
        }
    }
    corpus.cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(corpus)
}

fn log_text(log: &Log) -> String {
    let mut out = String::with_capacity(log.lines.iter().map(|l| l.raw.len() + 1).sum());
    for line in &log.lines {
        out.push_str(&line.raw);
        out.push('\n');
    }
    out
}

/// Writes a case directory `<root>/<id>`; annotations are written when present.
pub fn write_case(root: impl AsRef<Path>, case: &RegressionCase) -> Result<()> {
    let dir = root.as_ref().join(&case.id);
    let io = |e| Error::io(dir.display().to_string(), e);
    fs::create_dir_all(&dir).map_err(io)?;
    fs::write(dir.join(PASS_FILE), log_text(&case.passing)).map_err(io)?;
    fs::write(dir.join(FAIL_FILE), log_text(&case.failing)).map_err(io)?;
    if let Some(ann) = &case.annotations {
        fs::write(dir.join(ANNOTATIONS_FILE), serde_json::to_string(ann)?).map_err(io)?;
    }
    Ok(())
}
