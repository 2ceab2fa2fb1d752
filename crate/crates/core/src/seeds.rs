//! Seed-and-extend line matching.
//!
//! A seed is a block of line pairs that are consecutive in both logs. The
//! matcher runs four steps:
//!
//! 1. runs of consecutive LCS pairs become the initial seeds;
//! 2. every seed grows up and down while the next pair of lines is similar
//!    enough and neither line belongs to another seed's anchor;
//! 3. overlaps introduced by step 2 are resolved greedily, largest seed
//!    first, and seeds that became adjacent are merged;
//! 4. identical lines left over, when they occur equally often in both
//!    logs, seed a second round of steps 2 and 3. These pairs are the moves.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::ops::Range;
use std::time::Instant;

use crate::error::Result;
use crate::lcs::{lcs_ids, LcsPairing, LineIds};
use crate::log::Log;
use crate::similarity::{line_similarity, SimilarityParams};

/// How a pair inside a seed was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Seeding pair of identical lines; never removed by overlap resolution.
    Anchor,
    /// Identical lines absorbed while extending.
    Identical,
    /// Similar but not identical lines absorbed while extending.
    Updated,
}

impl PairKind {
    pub fn is_identical(self) -> bool {
        !matches!(self, PairKind::Updated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedKind {
    Initial,
    Additional,
}

/// `len()` consecutive pairs starting at `(ref_start, mod_start)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub ref_start: usize,
    pub mod_start: usize,
    pub kind: SeedKind,
    pairs: Vec<PairKind>,
}

impl Seed {
    pub fn new(ref_start: usize, mod_start: usize, kind: SeedKind, pairs: Vec<PairKind>) -> Self {
        Seed {
            ref_start,
            mod_start,
            kind,
            pairs,
        }
    }

    /// A block of `len` anchor pairs.
    pub fn anchored(ref_start: usize, mod_start: usize, len: usize, kind: SeedKind) -> Self {
        Self::new(ref_start, mod_start, kind, vec![PairKind::Anchor; len])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn ref_range(&self) -> Range<usize> {
        self.ref_start..self.ref_start + self.len()
    }

    pub fn mod_range(&self) -> Range<usize> {
        self.mod_start..self.mod_start + self.len()
    }

    pub fn pair_kinds(&self) -> &[PairKind] {
        &self.pairs
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PairKind)> + '_ {
        self.pairs
            .iter()
            .enumerate()
            .map(move |(i, &kind)| (self.ref_start + i, self.mod_start + i, kind))
    }

    /// `(r, m, s)` triple.
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.ref_start, self.mod_start, self.len())
    }

    /// The end of one seed touches the beginning of the other in both logs.
    pub fn is_adjacent_to(&self, other: &Seed) -> bool {
        let (r1, m1, s1) = self.triple();
        let (r2, m2, s2) = other.triple();
        (r1 + s1 == r2 && m1 + s1 == m2) || (r2 + s2 == r1 && m2 + s2 == m1)
    }

    fn anchor_bounds(&self) -> Option<(usize, usize)> {
        let first = self.pairs.iter().position(|&k| k == PairKind::Anchor)?;
        let last = self.pairs.iter().rposition(|&k| k == PairKind::Anchor)?;
        Some((first, last))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet {
    pub seeds: Vec<Seed>,
}

impl SeedSet {
    pub fn new(seeds: Vec<Seed>) -> Self {
        SeedSet { seeds }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Seed> {
        self.seeds.iter()
    }

    pub fn pair_count(&self) -> usize {
        self.seeds.iter().map(Seed::len).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PairKind)> + '_ {
        self.seeds.iter().flat_map(Seed::pairs)
    }

    /// No reference or modified line is used twice.
    pub fn is_one_to_one(&self) -> bool {
        let mut refs = BTreeSet::new();
        let mut mods = BTreeSet::new();
        self.pairs().all(|(r, m, _)| refs.insert(r) && mods.insert(m))
    }

    fn sort(&mut self) {
        self.seeds.sort_by_key(|s| (s.ref_start, s.mod_start));
    }
}

impl<'a> IntoIterator for &'a SeedSet {
    type Item = &'a Seed;
    type IntoIter = std::slice::Iter<'a, Seed>;
    fn into_iter(self) -> Self::IntoIter {
        self.seeds.iter()
    }
}

/// Groups LCS pairs into maximal runs that are consecutive in both logs.
pub fn initial_seeds(lcs: &LcsPairing) -> SeedSet {
    runs_to_seeds(&lcs.pairs, SeedKind::Initial)
}

fn runs_to_seeds(sorted_pairs: &[(usize, usize)], kind: SeedKind) -> SeedSet {
    let mut seeds: Vec<Seed> = Vec::new();
    for &(r, m) in sorted_pairs {
        match seeds.last_mut() {
            Some(s) if s.ref_range().end == r && s.mod_range().end == m => s.pairs.push(PairKind::Anchor),
            _ => seeds.push(Seed::anchored(r, m, 1, kind)),
        }
    }
    SeedSet::new(seeds)
}

/// Lines that seeds may not grow into.
struct Blocked {
    reference: Vec<bool>,
    modified: Vec<bool>,
}

impl Blocked {
    fn new(reference: usize, modified: usize) -> Self {
        Blocked {
            reference: vec![false; reference],
            modified: vec![false; modified],
        }
    }

    fn add_anchors(&mut self, seeds: &SeedSet) {
        for (r, m, kind) in seeds.pairs() {
            if kind == PairKind::Anchor {
                self.reference[r] = true;
                self.modified[m] = true;
            }
        }
    }

    fn add_all(&mut self, seeds: &SeedSet) {
        for (r, m, _) in seeds.pairs() {
            self.reference[r] = true;
            self.modified[m] = true;
        }
    }
}

/// Grows every seed outward; anchor lines of any seed in the set stop the
/// growth. The result may contain overlapping seeds.
pub fn extend_seeds(seeds: &SeedSet, reference: &Log, modified: &Log, params: &SimilarityParams) -> SeedSet {
    let ids = LineIds::new(reference, modified);
    let mut blocked = Blocked::new(reference.len(), modified.len());
    blocked.add_anchors(seeds);
    extend_blocked(seeds, reference, modified, &ids, params, &blocked)
}

fn extend_blocked(
    seeds: &SeedSet,
    reference: &Log,
    modified: &Log,
    ids: &LineIds,
    params: &SimilarityParams,
    blocked: &Blocked,
) -> SeedSet {
    let classify = |r: usize, m: usize| -> Option<PairKind> {
        if blocked.reference[r] || blocked.modified[m] {
            return None;
        }
        if ids.reference[r] == ids.modified[m] {
            return Some(PairKind::Identical);
        }
        let sim = line_similarity(reference.line(r), modified.line(m), params);
        (sim >= params.line_threshold).then_some(PairKind::Updated)
    };

    let extended = seeds
        .iter()
        .map(|seed| {
            let mut above = Vec::new();
            let (mut r, mut m) = (seed.ref_start, seed.mod_start);
            while r > 0 && m > 0 {
                match classify(r - 1, m - 1) {
                    Some(kind) => above.push(kind),
                    None => break,
                }
                r -= 1;
                m -= 1;
            }
            let mut below = Vec::new();
            let (mut r_end, mut m_end) = (seed.ref_range().end, seed.mod_range().end);
            while r_end < reference.len() && m_end < modified.len() {
                match classify(r_end, m_end) {
                    Some(kind) => below.push(kind),
                    None => break,
                }
                r_end += 1;
                m_end += 1;
            }
            above.reverse();
            let mut pairs = above;
            pairs.extend_from_slice(&seed.pairs);
            pairs.extend(below);
            Seed::new(r, m, seed.kind, pairs)
        })
        .collect();
    SeedSet::new(extended)
}

/// Resolves overlaps largest seed first (ties: smaller reference start, then
/// smaller modified start), then merges adjacent seeds.
///
/// Only non-anchor pairs at a seed's ends are ever removed.
pub fn remove_overlaps(seeds: SeedSet) -> SeedSet {
    let mut state = seeds.seeds;
    let n = state.len();

    // extension lines -> seeds covering them
    let mut ref_cover: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut mod_cover: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, seed) in state.iter().enumerate() {
        for (r, m, kind) in seed.pairs() {
            if kind != PairKind::Anchor {
                ref_cover.entry(r).or_default().push(i);
                mod_cover.entry(m).or_default().push(i);
            }
        }
    }

    type Entry = (usize, Reverse<usize>, Reverse<usize>, Reverse<usize>);
    let entry =
        |i: usize, s: &Seed| -> Entry { (s.len(), Reverse(s.ref_start), Reverse(s.mod_start), Reverse(i)) };
    let mut heap: BinaryHeap<Entry> = state.iter().enumerate().map(|(i, s)| entry(i, s)).collect();
    let mut finalized = vec![false; n];
    let mut claimed_ref: HashMap<usize, usize> = HashMap::new();
    let mut claimed_mod: HashMap<usize, usize> = HashMap::new();

    while let Some(top) = heap.pop() {
        let i = top.3 .0;
        if finalized[i] || top != entry(i, &state[i]) {
            continue;
        }
        finalized[i] = true;
        let mut affected = BTreeSet::new();
        for (r, m, _) in state[i].pairs() {
            claimed_ref.insert(r, i);
            claimed_mod.insert(m, i);
            for j in ref_cover.get(&r).into_iter().chain(mod_cover.get(&m)).flatten() {
                if *j != i && !finalized[*j] {
                    affected.insert(*j);
                }
            }
        }
        for j in affected {
            let conflicts = |r: usize, m: usize| claimed_ref.contains_key(&r) || claimed_mod.contains_key(&m);
            trim_conflicts(&mut state[j], conflicts);
            heap.push(entry(j, &state[j]));
        }
    }

    let mut result = SeedSet::new(state.into_iter().filter(|s| !s.is_empty()).collect());
    merge_adjacent(&mut result);
    result
}

/// Drops conflicting pairs from the extension ends of `seed`, together with
/// everything beyond them.
fn trim_conflicts(seed: &mut Seed, conflicts: impl Fn(usize, usize) -> bool) {
    let (core_first, core_last) = match seed.anchor_bounds() {
        Some(bounds) => bounds,
        // no anchor: keep the pairs before the first conflict
        None => {
            let keep = (0..seed.len())
                .find(|&i| conflicts(seed.ref_start + i, seed.mod_start + i))
                .unwrap_or(seed.len());
            seed.pairs.truncate(keep);
            return;
        }
    };
    debug_assert!(
        (core_first..=core_last).all(|i| !conflicts(seed.ref_start + i, seed.mod_start + i)),
        "anchor pairs must never conflict"
    );
    let below = (core_last + 1..seed.len()).find(|&i| conflicts(seed.ref_start + i, seed.mod_start + i));
    if let Some(cut) = below {
        debug_assert!((cut..seed.len()).all(|i| conflicts(seed.ref_start + i, seed.mod_start + i)));
        seed.pairs.truncate(cut);
    }
    let above = (0..core_first)
        .rev()
        .find(|&i| conflicts(seed.ref_start + i, seed.mod_start + i));
    if let Some(cut) = above {
        debug_assert!((0..=cut).all(|i| conflicts(seed.ref_start + i, seed.mod_start + i)));
        seed.pairs.drain(..=cut);
        seed.ref_start += cut + 1;
        seed.mod_start += cut + 1;
    }
}

fn merge_adjacent(set: &mut SeedSet) {
    set.sort();
    let mut merged: Vec<Seed> = Vec::with_capacity(set.len());
    for seed in set.seeds.drain(..) {
        match merged.last_mut() {
            Some(prev) if prev.is_adjacent_to(&seed) => prev.pairs.extend(seed.pairs),
            _ => merged.push(seed),
        }
    }
    set.seeds = merged;
}

/// Seeds for moved lines: identical lines outside `taken` whose content
/// occurs equally often (outside `taken`) in both logs, paired in order of
/// appearance, then extended and de-overlapped like the initial seeds.
pub fn additional_seeds(
    reference: &Log,
    modified: &Log,
    taken: &SeedSet,
    params: &SimilarityParams,
) -> SeedSet {
    let ids = LineIds::new(reference, modified);
    additional_with_ids(reference, modified, &ids, taken, params)
}

fn additional_with_ids(
    reference: &Log,
    modified: &Log,
    ids: &LineIds,
    taken: &SeedSet,
    params: &SimilarityParams,
) -> SeedSet {
    let mut blocked = Blocked::new(reference.len(), modified.len());
    blocked.add_all(taken);

    let mut ref_occ: Vec<Vec<usize>> = vec![Vec::new(); ids.distinct];
    let mut mod_occ: Vec<Vec<usize>> = vec![Vec::new(); ids.distinct];
    for (r, &id) in ids.reference.iter().enumerate() {
        if !blocked.reference[r] {
            ref_occ[id as usize].push(r);
        }
    }
    for (m, &id) in ids.modified.iter().enumerate() {
        if !blocked.modified[m] {
            mod_occ[id as usize].push(m);
        }
    }
    let mut pairs: Vec<(usize, usize)> = ref_occ
        .iter()
        .zip(&mod_occ)
        .filter(|(a, b)| !a.is_empty() && a.len() == b.len())
        .flat_map(|(a, b)| a.iter().copied().zip(b.iter().copied()))
        .collect();
    pairs.sort_unstable();

    let seeds = runs_to_seeds(&pairs, SeedKind::Additional);
    blocked.add_anchors(&seeds);
    let extended = extend_blocked(&seeds, reference, modified, ids, params, &blocked);
    remove_overlaps(extended)
}

/// Output of the full matcher.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    /// Order-preserving seeds grown from the LCS.
    pub initial: SeedSet,
    /// Seeds whose pairs are moved lines.
    pub additional: SeedSet,
}

impl Matching {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PairKind, SeedKind)> + '_ {
        self.initial
            .pairs()
            .map(|(r, m, k)| (r, m, k, SeedKind::Initial))
            .chain(
                self.additional
                    .pairs()
                    .map(|(r, m, k)| (r, m, k, SeedKind::Additional)),
            )
    }
}

/// Runs the four matching steps.
pub fn match_logs(reference: &Log, modified: &Log, params: &SimilarityParams) -> Matching {
    match_logs_within(reference, modified, params, None).expect("no deadline set")
}

pub fn match_logs_within(
    reference: &Log,
    modified: &Log,
    params: &SimilarityParams,
    deadline: Option<Instant>,
) -> Result<Matching> {
    let ids = LineIds::new(reference, modified);
    let lcs = lcs_ids(&ids.reference, &ids.modified, deadline)?;
    Ok(match_with_lcs(reference, modified, &ids, &lcs, params))
}

/// Matching steps 1-4 from a precomputed LCS; lets callers reuse one LCS
/// across several threshold settings.
pub fn match_with_lcs(
    reference: &Log,
    modified: &Log,
    ids: &LineIds,
    lcs: &LcsPairing,
    params: &SimilarityParams,
) -> Matching {
    let seeds = initial_seeds(lcs);
    let mut blocked = Blocked::new(reference.len(), modified.len());
    blocked.add_anchors(&seeds);
    let extended = extend_blocked(&seeds, reference, modified, ids, params, &blocked);
    let initial = remove_overlaps(extended);
    let additional = additional_with_ids(reference, modified, ids, &initial, params);
    Matching { initial, additional }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcs::lcs_lines;

    fn log(lines: &[&str]) -> Log {
        Log::from_lines("t", lines.iter().copied())
    }

    fn triples(set: &SeedSet) -> Vec<(usize, usize, usize)> {
        set.iter().map(Seed::triple).collect()
    }

    #[test]
    fn identical_logs_give_one_seed() {
        let a = log(&["a", "b", "c"]);
        let seeds = initial_seeds(&lcs_lines(&a, &a));
        assert_eq!(triples(&seeds), vec![(0, 0, 3)]);
    }

    #[test]
    fn gap_in_lcs_splits_seeds() {
        let lcs = LcsPairing {
            pairs: vec![(0, 0), (2, 2)],
        };
        assert_eq!(triples(&initial_seeds(&lcs)), vec![(0, 0, 1), (2, 2, 1)]);
    }

    #[test]
    fn no_upward_extension_at_log_top() {
        let a = log(&["x 1", "y"]);
        let b = log(&["x 1", "z"]);
        let seeds = initial_seeds(&lcs_lines(&a, &b));
        let ext = extend_seeds(&seeds, &a, &b, &SimilarityParams::default());
        assert_eq!(triples(&ext), vec![(0, 0, 1)]);
    }

    #[test]
    fn neighbours_both_absorb_a_shared_similar_pair() {
        // the middle pair is similar and reachable from both seeds
        let a = log(&["top", "step took 1s", "bottom"]);
        let b = log(&["top", "step took 2s", "bottom"]);
        let seeds = initial_seeds(&lcs_lines(&a, &b));
        assert_eq!(triples(&seeds), vec![(0, 0, 1), (2, 2, 1)]);
        let ext = extend_seeds(&seeds, &a, &b, &SimilarityParams::default());
        assert_eq!(triples(&ext), vec![(0, 0, 2), (1, 1, 2)]);
        assert!(!ext.is_one_to_one());
        let resolved = remove_overlaps(ext);
        // one seed keeps the pair, then both merge into one block
        assert_eq!(triples(&resolved), vec![(0, 0, 3)]);
        assert_eq!(
            resolved.seeds[0].pair_kinds(),
            &[PairKind::Anchor, PairKind::Updated, PairKind::Anchor]
        );
    }

    #[test]
    fn disjoint_set_is_a_fixpoint() {
        let set = SeedSet::new(vec![
            Seed::anchored(0, 0, 2, SeedKind::Initial),
            Seed::anchored(5, 7, 1, SeedKind::Initial),
        ]);
        assert_eq!(remove_overlaps(set.clone()), set);
    }

    #[test]
    fn adjacent_seeds_merge() {
        let set = SeedSet::new(vec![
            Seed::anchored(2, 2, 2, SeedKind::Initial),
            Seed::anchored(0, 0, 2, SeedKind::Initial),
        ]);
        assert_eq!(triples(&remove_overlaps(set)), vec![(0, 0, 4)]);
        assert!(
            Seed::anchored(0, 0, 2, SeedKind::Initial).is_adjacent_to(&Seed::anchored(
                2,
                2,
                1,
                SeedKind::Initial
            ))
        );
        assert!(
            !Seed::anchored(0, 0, 2, SeedKind::Initial).is_adjacent_to(&Seed::anchored(
                2,
                3,
                1,
                SeedKind::Initial
            ))
        );
    }

    #[test]
    fn ties_go_to_the_earlier_seed() {
        // two equal-size seeds fighting over the same modified line
        let set = SeedSet::new(vec![
            Seed::new(4, 2, SeedKind::Initial, vec![PairKind::Updated, PairKind::Anchor]),
            Seed::new(0, 1, SeedKind::Initial, vec![PairKind::Anchor, PairKind::Updated]),
        ]);
        let out = remove_overlaps(set);
        assert_eq!(triples(&out), vec![(0, 1, 2), (5, 3, 1)]);
    }

    #[test]
    fn moved_line_becomes_additional_seed() {
        let a = log(&["a", "moved", "b", "c"]);
        let b = log(&["a", "b", "c", "moved"]);
        let m = match_logs(&a, &b, &SimilarityParams::default());
        assert_eq!(triples(&m.additional), vec![(1, 3, 1)]);
    }

    #[test]
    fn unequal_occurrence_counts_are_skipped() {
        let a = log(&["dup", "x", "dup"]);
        let b = log(&["y", "dup"]);
        let taken = SeedSet::default();
        let add = additional_seeds(&a, &b, &taken, &SimilarityParams::default());
        assert!(add.is_empty());
    }

    #[test]
    fn occurrences_pair_in_order() {
        let a = log(&["p", "q", "p"]);
        let b = log(&["p", "r", "p"]);
        let add = additional_seeds(&a, &b, &SeedSet::default(), &SimilarityParams::default());
        assert_eq!(triples(&add), vec![(0, 0, 1), (2, 2, 1)]);
    }

    #[test]
    fn disjoint_vocabularies_produce_no_seeds() {
        let a = log(&["alpha one", "beta two"]);
        let b = log(&["gamma three", "delta four"]);
        let m = match_logs(&a, &b, &SimilarityParams::default());
        assert!(m.initial.is_empty() && m.additional.is_empty());
        let e = match_logs(&log(&[]), &log(&[]), &SimilarityParams::default());
        assert!(e.initial.is_empty() && e.additional.is_empty());
    }

    #[test]
    fn blank_lines_do_not_extend_by_similarity() {
        let a = log(&["x", "", "y"]);
        let b = log(&["x", "  ", "z"]);
        // "" and "  " both strip to zero tokens but differ textually
        let m = match_logs(&a, &b, &SimilarityParams::default());
        assert_eq!(m.initial.pair_count(), 1);
    }
}
