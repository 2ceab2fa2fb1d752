//! Edit scripts: the action list relating every line of two logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lcs::{lcs_lines_within, LcsPairing};
use crate::log::Log;
use crate::seeds::{initial_seeds, match_logs_within, Matching, SeedKind, SeedSet};
use crate::similarity::{changed_token_positions, SimilarityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    Unchanged,
    Updated,
    Added,
    Deleted,
    MovedUnchanged,
    MovedUpdated,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Unchanged,
        ActionKind::Updated,
        ActionKind::Added,
        ActionKind::Deleted,
        ActionKind::MovedUnchanged,
        ActionKind::MovedUpdated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Unchanged => "unchanged",
            ActionKind::Updated => "updated",
            ActionKind::Added => "added",
            ActionKind::Deleted => "deleted",
            ActionKind::MovedUnchanged => "moved-unchanged",
            ActionKind::MovedUpdated => "moved-updated",
        }
    }

    /// Marker used by the text rendering.
    pub fn marker(self) -> &'static str {
        match self {
            ActionKind::Unchanged => " ",
            ActionKind::Updated => "U",
            ActionKind::Added => "+",
            ActionKind::Deleted => "-",
            ActionKind::MovedUnchanged => "M",
            ActionKind::MovedUpdated => "MU",
        }
    }

    pub fn is_paired(self) -> bool {
        !matches!(self, ActionKind::Added | ActionKind::Deleted)
    }

    pub fn is_moved(self) -> bool {
        matches!(self, ActionKind::MovedUnchanged | ActionKind::MovedUpdated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(rename = "ref")]
    pub ref_index: Option<usize>,
    #[serde(rename = "mod")]
    pub mod_index: Option<usize>,
    /// Token positions that differ; only on updated and moved-updated actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_changed: Option<Vec<usize>>,
}

impl Action {
    pub fn added(mod_index: usize) -> Self {
        Action {
            kind: ActionKind::Added,
            ref_index: None,
            mod_index: Some(mod_index),
            tokens_changed: None,
        }
    }

    pub fn deleted(ref_index: usize) -> Self {
        Action {
            kind: ActionKind::Deleted,
            ref_index: Some(ref_index),
            mod_index: None,
            tokens_changed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cidiff,
    Lcs,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cidiff => "cidiff",
            Algorithm::Lcs => "lcs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSummary {
    pub source: String,
    pub line_count: usize,
}

impl LogSummary {
    fn of(log: &Log) -> Self {
        LogSummary {
            source: log.source.clone(),
            line_count: log.len(),
        }
    }
}

/// Every line of both logs appears in exactly one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditScript {
    pub algorithm: Algorithm,
    pub params: SimilarityParams,
    pub reference: LogSummary,
    pub modified: LogSummary,
    pub actions: Vec<Action>,
}

impl EditScript {
    /// Number of actions other than `unchanged`; paired actions count once.
    pub fn size(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| a.kind != ActionKind::Unchanged)
            .count()
    }

    pub fn added_count(&self) -> usize {
        self.count(ActionKind::Added)
    }

    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind == kind).count()
    }

    pub fn counts(&self) -> BTreeMap<ActionKind, usize> {
        let mut counts = BTreeMap::new();
        for a in &self.actions {
            *counts.entry(a.kind).or_insert(0) += 1;
        }
        counts
    }

    /// Modified-log indices of actions of the given kind, ascending.
    pub fn mod_indices(&self, kind: ActionKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .actions
            .iter()
            .filter(|a| a.kind == kind)
            .filter_map(|a| a.mod_index)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn ref_indices(&self, kind: ActionKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .actions
            .iter()
            .filter(|a| a.kind == kind)
            .filter_map(|a| a.ref_index)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the structural invariants of the format: index presence per
    /// kind, bounds, and exactly-once coverage of both logs.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut seen_ref = vec![false; self.reference.line_count];
        let mut seen_mod = vec![false; self.modified.line_count];
        for (i, a) in self.actions.iter().enumerate() {
            let (needs_ref, needs_mod) = match a.kind {
                ActionKind::Added => (false, true),
                ActionKind::Deleted => (true, false),
                _ => (true, true),
            };
            if a.ref_index.is_some() != needs_ref || a.mod_index.is_some() != needs_mod {
                return Err(format!("action {i}: wrong indices for {}", a.kind.as_str()));
            }
            let tokens_expected = matches!(a.kind, ActionKind::Updated | ActionKind::MovedUpdated);
            if a.tokens_changed.is_some() != tokens_expected {
                return Err(format!("action {i}: tokens_changed presence mismatch"));
            }
            for (index, seen, side) in [
                (a.ref_index, &mut seen_ref, "ref"),
                (a.mod_index, &mut seen_mod, "mod"),
            ] {
                if let Some(idx) = index {
                    match seen.get_mut(idx) {
                        None => return Err(format!("action {i}: {side} index {idx} out of range")),
                        Some(true) => return Err(format!("action {i}: {side} index {idx} repeated")),
                        Some(slot) => *slot = true,
                    }
                }
            }
        }
        if seen_ref.iter().chain(&seen_mod).all(|&s| s) {
            Ok(())
        } else {
            Err("some lines are not covered by any action".into())
        }
    }
}

/// Converts seeds into actions.
///
/// Paired and added actions follow the modified log; each deleted line is
/// placed right after the nearest preceding reference line paired by an
/// initial seed (or first, when there is none).
pub fn build_script(
    reference: &Log,
    modified: &Log,
    matching: &Matching,
    params: &SimilarityParams,
    algorithm: Algorithm,
) -> EditScript {
    let mut by_mod: Vec<Option<Action>> = vec![None; modified.len()];
    let mut ref_paired = vec![false; reference.len()];
    for (r, m, pair, seed_kind) in matching.pairs() {
        let kind = match (seed_kind, pair.is_identical()) {
            (SeedKind::Initial, true) => ActionKind::Unchanged,
            (SeedKind::Initial, false) => ActionKind::Updated,
            (SeedKind::Additional, true) => ActionKind::MovedUnchanged,
            (SeedKind::Additional, false) => ActionKind::MovedUpdated,
        };
        let tokens_changed =
            (!pair.is_identical()).then(|| changed_token_positions(reference.line(r), modified.line(m)));
        debug_assert!(by_mod[m].is_none() && !ref_paired[r], "seeds must be one-to-one");
        by_mod[m] = Some(Action {
            kind,
            ref_index: Some(r),
            mod_index: Some(m),
            tokens_changed,
        });
        ref_paired[r] = true;
    }

    // anchors for deletions: in-order pairs, sorted by reference index
    let mut in_order: Vec<(usize, usize)> = matching.initial.pairs().map(|(r, m, _)| (r, m)).collect();
    in_order.sort_unstable();
    let mut leading = Vec::new();
    let mut after_mod: Vec<Vec<usize>> = vec![Vec::new(); modified.len()];
    for r in (0..reference.len()).filter(|&r| !ref_paired[r]) {
        match in_order.partition_point(|&(pr, _)| pr < r) {
            0 => leading.push(r),
            i => after_mod[in_order[i - 1].1].push(r),
        }
    }

    let mut actions = Vec::with_capacity(reference.len() + modified.len());
    actions.extend(leading.into_iter().map(Action::deleted));
    for (m, slot) in by_mod.into_iter().enumerate() {
        actions.push(slot.unwrap_or_else(|| Action::added(m)));
        actions.extend(after_mod[m].iter().copied().map(Action::deleted));
    }

    EditScript {
        algorithm,
        params: *params,
        reference: LogSummary::of(reference),
        modified: LogSummary::of(modified),
        actions,
    }
}

/// Seed-and-extend diff with updated and moved lines.
pub fn cidiff(reference: &Log, modified: &Log, params: &SimilarityParams) -> EditScript {
    cidiff_within(reference, modified, params, None).expect("no deadline set")
}

pub fn cidiff_within(
    reference: &Log,
    modified: &Log,
    params: &SimilarityParams,
    deadline: Option<Instant>,
) -> Result<EditScript> {
    let matching = match_logs_within(reference, modified, params, deadline)?;
    Ok(build_script(
        reference,
        modified,
        &matching,
        params,
        Algorithm::Cidiff,
    ))
}

/// Classic LCS line diff: unchanged, added and deleted only.
pub fn lcs_diff(reference: &Log, modified: &Log) -> EditScript {
    lcs_diff_within(reference, modified, &SimilarityParams::default(), None).expect("no deadline set")
}

pub fn lcs_diff_within(
    reference: &Log,
    modified: &Log,
    params: &SimilarityParams,
    deadline: Option<Instant>,
) -> Result<EditScript> {
    let lcs = lcs_lines_within(reference, modified, deadline)?;
    Ok(lcs_script(reference, modified, &lcs, params))
}

pub(crate) fn lcs_script(
    reference: &Log,
    modified: &Log,
    lcs: &LcsPairing,
    params: &SimilarityParams,
) -> EditScript {
    let matching = Matching {
        initial: initial_seeds(lcs),
        additional: SeedSet::default(),
    };
    build_script(reference, modified, &matching, params, Algorithm::Lcs)
}

/// Line-by-line listing: marker, 1-based reference and modified line
/// numbers, then the text (reference text for deletions).
pub fn render_text(script: &EditScript, reference: &Log, modified: &Log) -> String {
    let mut out = String::new();
    let num = |i: Option<usize>| i.map(|i| (i + 1).to_string()).unwrap_or_default();
    for a in &script.actions {
        let text = match (a.kind, a.mod_index, a.ref_index) {
            (ActionKind::Deleted, _, Some(r)) => reference.line(r).raw.trim_end_matches('\r'),
            (_, Some(m), _) => modified.line(m).raw.trim_end_matches('\r'),
            _ => "",
        };
        let _ = writeln!(
            out,
            "{:<2} {:>6} {:>6}  {}",
            a.kind.marker(),
            num(a.ref_index),
            num(a.mod_index),
            text
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log(lines: &[&str]) -> Log {
        Log::from_lines("t", lines.iter().copied())
    }

    #[test]
    fn identical_logs_are_all_unchanged() {
        let a = log(&["a", "b"]);
        for s in [cidiff(&a, &a, &SimilarityParams::default()), lcs_diff(&a, &a)] {
            assert_eq!(s.size(), 0);
            assert_eq!(s.count(ActionKind::Unchanged), 2);
        }
    }

    #[test]
    fn empty_reference_adds_everything() {
        let s = cidiff(&log(&[]), &log(&["x", "y"]), &SimilarityParams::default());
        assert_eq!(s.mod_indices(ActionKind::Added), vec![0, 1]);
        assert_eq!(s.size(), 2);
        assert_eq!(s.added_count(), 2);
    }

    #[test]
    fn one_added_line() {
        let s = lcs_diff(&log(&["a"]), &log(&["a", "b"]));
        assert_eq!(s.actions.len(), 2);
        assert_eq!(s.actions[0].kind, ActionKind::Unchanged);
        assert_eq!(s.actions[1], Action::added(1));
    }

    #[test]
    fn deletions_follow_their_anchor() {
        let s = lcs_diff(&log(&["a", "gone", "b"]), &log(&["new", "a", "b"]));
        let kinds: Vec<_> = s.actions.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ActionKind::Added,
                ActionKind::Unchanged,
                ActionKind::Deleted,
                ActionKind::Unchanged
            ]
        );
        let lead = lcs_diff(&log(&["gone", "a"]), &log(&["a"]));
        assert_eq!(lead.actions[0], Action::deleted(0));
    }

    #[test]
    fn updated_lines_record_changed_tokens() {
        let a = log(&["start", "Total time: 5.170 s", "end"]);
        let b = log(&["start", "Total time: 5.361 s", "end"]);
        let s = cidiff(&a, &b, &SimilarityParams::default());
        let upd: Vec<_> = s
            .actions
            .iter()
            .filter(|a| a.kind == ActionKind::Updated)
            .collect();
        assert_eq!(upd.len(), 1);
        assert_eq!(upd[0].tokens_changed.as_deref(), Some(&[2][..]));
        assert_eq!(s.size(), 1);
    }

    #[test]
    fn json_shape() {
        let a = log(&["a", "b", "x 1", "moved"]);
        let b = log(&["moved", "a", "b", "x 2"]);
        let s = cidiff(&a, &b, &SimilarityParams::default());
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["algorithm", "params", "reference", "modified", "actions"] {
            assert!(keys.contains(&k.to_string()), "missing {k}");
        }
        assert_eq!(v["algorithm"], "cidiff");
        assert_eq!(v["params"]["line_threshold"], 0.5);
        assert_eq!(v["params"]["token_threshold"], 0.6);
        assert_eq!(v["modified"]["line_count"], 4);
        let kinds: Vec<_> = v["actions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a["kind"].clone())
            .collect();
        assert!(kinds.contains(&"moved-unchanged".into()));
        assert!(kinds.contains(&"updated".into()));
        let updated = v["actions"]
            .as_array()
            .unwrap()
            .iter()
            .find(|a| a["kind"] == "updated")
            .unwrap();
        assert_eq!(updated["tokens_changed"], serde_json::json!([1]));
        let unchanged = v["actions"]
            .as_array()
            .unwrap()
            .iter()
            .find(|a| a["kind"] == "unchanged")
            .unwrap();
        assert!(unchanged.get("tokens_changed").is_none());
        let back = EditScript::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(back.validate().is_ok());
    }

    #[test]
    fn validate_rejects_duplicates_and_gaps() {
        let mut s = lcs_diff(&log(&["a", "b"]), &log(&["a", "c"]));
        assert!(s.validate().is_ok());
        s.actions.push(Action::added(1));
        assert!(s.validate().is_err());
        s.actions.pop();
        s.actions.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn text_rendering_uses_markers() {
        let a = log(&["a", "gone"]);
        let b = log(&["a", "new"]);
        let s = lcs_diff(&a, &b);
        let text = render_text(&s, &a, &b);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "        1      1  a");
        assert!(lines.iter().any(|l| l.starts_with("+ ") && l.ends_with("new")));
        assert!(lines.iter().any(|l| l.starts_with("- ") && l.ends_with("gone")));
    }

    fn log_lines() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop_oneof![
                Just(String::new()),
                Just("Build ok".to_string()),
                "(Compiling|Running|Done) [a-c]{1,4}( [0-9]{1,3}s)?",
                "[a-c]{1,3}",
            ],
            0..30,
        )
    }

    proptest! {
        #[test]
        fn scripts_cover_both_logs_and_cidiff_dominates(a in log_lines(), b in log_lines(), ls in 0.0f64..=1.0) {
            let ra = Log::from_lines("p", a.iter().map(String::as_str));
            let rb = Log::from_lines("f", b.iter().map(String::as_str));
            let p = SimilarityParams { line_threshold: ls, token_threshold: 0.6 };
            let ci = cidiff(&ra, &rb, &p);
            let lcs = lcs_diff(&ra, &rb);
            prop_assert_eq!(ci.validate(), Ok(()));
            prop_assert_eq!(lcs.validate(), Ok(()));
            prop_assert!(ci.size() <= lcs.size());
            prop_assert!(ci.added_count() <= lcs.added_count());
            let ci_added: std::collections::BTreeSet<_> = ci.mod_indices(ActionKind::Added).into_iter().collect();
            let lcs_added: std::collections::BTreeSet<_> = lcs.mod_indices(ActionKind::Added).into_iter().collect();
            prop_assert!(ci_added.is_subset(&lcs_added));
            // unchanged pairs of the LCS diff stay unchanged
            prop_assert_eq!(ci.ref_indices(ActionKind::Unchanged), lcs.ref_indices(ActionKind::Unchanged));
            for kind in [ActionKind::Updated, ActionKind::MovedUpdated, ActionKind::MovedUnchanged] {
                prop_assert_eq!(lcs.count(kind), 0);
            }
        }
    }
}
