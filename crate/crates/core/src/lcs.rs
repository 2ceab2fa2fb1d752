//! Longest common subsequence of two logs, compared line by line on their
//! timestamp-stripped text.
//!
//! Lines are interned to integer ids, then aligned with Myers' greedy O(ND)
//! algorithm. The forward trace is kept so the path can be recovered exactly
//! as the textbook algorithm finds it, which makes the choice among several
//! maximal subsequences stable. When the trace would outgrow
//! [`TRACE_BUDGET`], the problem is first split at a middle snake (the
//! linear-space variant) and each half is solved the same way.

use std::collections::HashMap;
use std::ops::{Index, IndexMut, Range};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::log::Log;

/// Maximum number of trace entries (`u32`) kept for one sub-problem.
pub const TRACE_BUDGET: usize = 1 << 25;

/// Matched `(reference, modified)` line indices, strictly increasing in both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LcsPairing {
    pub pairs: Vec<(usize, usize)>,
}

impl LcsPairing {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Dense ids for the distinct stripped lines of a log pair; equal ids mean
/// equal text.
#[derive(Debug, Clone)]
pub struct LineIds {
    pub reference: Vec<u32>,
    pub modified: Vec<u32>,
    pub distinct: usize,
}

impl LineIds {
    pub fn new(reference: &Log, modified: &Log) -> Self {
        let mut table: HashMap<&str, u32> = HashMap::new();
        let mut ids = [
            Vec::with_capacity(reference.len()),
            Vec::with_capacity(modified.len()),
        ];
        for (log, out) in [reference, modified].into_iter().zip(ids.iter_mut()) {
            for line in &log.lines {
                let next = table.len() as u32;
                out.push(*table.entry(line.stripped.as_str()).or_insert(next));
            }
        }
        let [reference, modified] = ids;
        LineIds {
            reference,
            modified,
            distinct: table.len(),
        }
    }
}

pub fn lcs_lines(reference: &Log, modified: &Log) -> LcsPairing {
    lcs_lines_within(reference, modified, None).expect("no deadline set")
}

pub fn lcs_lines_within(reference: &Log, modified: &Log, deadline: Option<Instant>) -> Result<LcsPairing> {
    let ids = LineIds::new(reference, modified);
    lcs_ids(&ids.reference, &ids.modified, deadline)
}

/// LCS over arbitrary comparable sequences.
pub fn lcs_ids<T: Eq>(a: &[T], b: &[T], deadline: Option<Instant>) -> Result<LcsPairing> {
    lcs_ids_with_budget(a, b, deadline, TRACE_BUDGET)
}

pub(crate) fn lcs_ids_with_budget<T: Eq>(
    a: &[T],
    b: &[T],
    deadline: Option<Instant>,
    budget: usize,
) -> Result<LcsPairing> {
    let mut myers = Myers::new(a, b, deadline, budget);
    myers.run()?;
    let mut pairs = myers.pairs;
    pairs.sort_unstable();
    Ok(LcsPairing { pairs })
}

/// Diagonal-indexed vector; `k` ranges over `-offset..=offset`.
struct Diagonals {
    offset: isize,
    v: Vec<usize>,
}

impl Diagonals {
    fn new(max_d: usize) -> Self {
        Diagonals {
            offset: max_d as isize,
            v: vec![0; 2 * max_d + 1],
        }
    }
}

impl Index<isize> for Diagonals {
    type Output = usize;
    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl IndexMut<isize> for Diagonals {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

struct Myers<'a, T> {
    a: &'a [T],
    b: &'a [T],
    forward: Diagonals,
    backward: Diagonals,
    deadline: Option<Instant>,
    budget: usize,
    pairs: Vec<(usize, usize)>,
}

impl<'a, T: Eq> Myers<'a, T> {
    fn new(a: &'a [T], b: &'a [T], deadline: Option<Instant>, budget: usize) -> Self {
        let max_d = a.len() + b.len() + 2;
        Myers {
            a,
            b,
            forward: Diagonals::new(max_d),
            backward: Diagonals::new(max_d),
            deadline,
            budget,
            pairs: Vec::new(),
        }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn run(&mut self) -> Result<()> {
        let mut work = vec![(0..self.a.len(), 0..self.b.len())];
        while let Some((mut old, mut new)) = work.pop() {
            if old.is_empty() || new.is_empty() {
                continue;
            }
            if self.forward_trace(old.clone(), new.clone())? {
                continue;
            }
            // Too large for a full trace: bisect.
            while !old.is_empty() && !new.is_empty() && self.a[old.start] == self.b[new.start] {
                self.pairs.push((old.start, new.start));
                old.start += 1;
                new.start += 1;
            }
            while !old.is_empty() && !new.is_empty() && self.a[old.end - 1] == self.b[new.end - 1] {
                self.pairs.push((old.end - 1, new.end - 1));
                old.end -= 1;
                new.end -= 1;
            }
            if old.is_empty() || new.is_empty() {
                continue;
            }
            let (x, y) = self.middle_snake(old.clone(), new.clone())?;
            work.push((x..old.end, y..new.end));
            work.push((old.start..x, new.start..y));
        }
        Ok(())
    }

    /// Greedy forward search keeping, for every `d`, the furthest x reached on
    /// each diagonal of matching parity. Returns `false` without emitting
    /// anything when the trace would exceed the budget.
    fn forward_trace(&mut self, old: Range<usize>, new: Range<usize>) -> Result<bool> {
        let n = old.len();
        let m = new.len();
        let v = &mut self.forward;
        // history[d][i] is the x endpoint on diagonal k = -d + 2i after step d
        let mut history: Vec<Vec<u32>> = Vec::new();
        let mut stored = 0usize;
        v[1] = 0;
        let mut found = None;
        'search: for d in 0..=(n + m) as isize {
            if d % 64 == 0 && self.deadline.is_some_and(|dl| Instant::now() >= dl) {
                return Err(Error::Timeout);
            }
            stored += d as usize + 1;
            if stored > self.budget {
                return Ok(false);
            }
            let mut row = Vec::with_capacity(d as usize + 1);
            for k in (-d..=d).step_by(2) {
                let mut x = if k == -d || (k != d && v[k - 1] < v[k + 1]) {
                    v[k + 1]
                } else {
                    v[k - 1] + 1
                };
                let mut y = (x as isize - k) as usize;
                while x < n && y < m && self.a[old.start + x] == self.b[new.start + y] {
                    x += 1;
                    y += 1;
                }
                v[k] = x;
                row.push(x as u32);
                if x >= n && y >= m {
                    history.push(row);
                    found = Some(d);
                    break 'search;
                }
            }
            history.push(row);
        }
        let depth = found.expect("greedy search always reaches the end");

        let at = |row: &[u32], d: isize, k: isize| row[((k + d) / 2) as usize] as usize;
        let (mut x, mut y) = (n, m);
        for d in (1..=depth).rev() {
            let prev = &history[d as usize - 1];
            let k = x as isize - y as isize;
            let prev_k = if k == -d || (k != d && at(prev, d - 1, k - 1) < at(prev, d - 1, k + 1)) {
                k + 1
            } else {
                k - 1
            };
            let prev_x = at(prev, d - 1, prev_k);
            let prev_y = (prev_x as isize - prev_k) as usize;
            while x > prev_x && y > prev_y {
                x -= 1;
                y -= 1;
                self.pairs.push((old.start + x, new.start + y));
            }
            x = prev_x;
            y = prev_y;
        }
        while x > 0 && y > 0 {
            x -= 1;
            y -= 1;
            self.pairs.push((old.start + x, new.start + y));
        }
        Ok(true)
    }

    /// Start point of the middle snake of an optimal path through the
    /// sub-grid. Both ranges are non-empty and share no common prefix or
    /// suffix element.
    fn middle_snake(&mut self, old: Range<usize>, new: Range<usize>) -> Result<(usize, usize)> {
        let n = old.len();
        let m = new.len();
        let delta = n as isize - m as isize;
        let odd = delta & 1 == 1;
        self.forward[1] = 0;
        self.backward[1] = 0;
        let d_max = (n + m).div_ceil(2) as isize + 1;
        for d in 0..d_max {
            if d % 64 == 0 && self.expired() {
                return Err(Error::Timeout);
            }
            for k in (-d..=d).rev().step_by(2) {
                let mut x = if k == -d || (k != d && self.forward[k - 1] < self.forward[k + 1]) {
                    self.forward[k + 1]
                } else {
                    self.forward[k - 1] + 1
                };
                let y = (x as isize - k) as usize;
                let (x0, y0) = (x, y);
                let mut yy = y;
                while x < n && yy < m && self.a[old.start + x] == self.b[new.start + yy] {
                    x += 1;
                    yy += 1;
                }
                self.forward[k] = x;
                if odd && (k - delta).abs() < d && self.forward[k] + self.backward[-(k - delta)] >= n {
                    return Ok((old.start + x0, new.start + y0));
                }
            }
            for k in (-d..=d).rev().step_by(2) {
                let mut x = if k == -d || (k != d && self.backward[k - 1] < self.backward[k + 1]) {
                    self.backward[k + 1]
                } else {
                    self.backward[k - 1] + 1
                };
                let mut y = (x as isize - k) as usize;
                while x < n && y < m && self.a[old.start + n - x - 1] == self.b[new.start + m - y - 1] {
                    x += 1;
                    y += 1;
                }
                self.backward[k] = x;
                if !odd && (k - delta).abs() <= d && self.backward[k] + self.forward[-(k - delta)] >= n {
                    return Ok((old.start + n - x, new.start + m - y));
                }
            }
        }
        unreachable!("an optimal path always exists within d_max")
    }
}

/// Quadratic dynamic-programming LCS length; used as an oracle.
pub fn lcs_length_dp<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::time::Duration;

    fn log(lines: &[&str]) -> Log {
        Log::from_lines("t", lines.iter().copied())
    }

    #[test]
    fn identical_sequences() {
        let a = log(&["a", "b", "c"]);
        assert_eq!(lcs_lines(&a, &a).pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn swapped_pair_keeps_one() {
        let p = lcs_lines(&log(&["a", "b"]), &log(&["b", "a"]));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn empty_side() {
        assert!(lcs_lines(&log(&[]), &log(&["x"])).is_empty());
        assert!(lcs_lines(&log(&["x"]), &log(&[])).is_empty());
        assert!(lcs_lines(&log(&[]), &log(&[])).is_empty());
    }

    #[test]
    fn compares_stripped_text() {
        let a = log(&["2023-01-01T00:00:00Z build", "x"]);
        let b = log(&["2024-05-05T11:11:11.5Z build", "y"]);
        assert_eq!(lcs_lines(&a, &b).pairs, vec![(0, 0)]);
    }

    #[test]
    fn canonical_trace_prefers_deleting_first() {
        // the first element of a transposition is the one reported as deleted
        let p = lcs_lines(&log(&["j", "w", "g", "l", "s"]), &log(&["j", "w", "l", "g", "s"]));
        assert_eq!(p.pairs, vec![(0, 0), (1, 1), (3, 2), (4, 4)]);
        let p = lcs_ids(&[1, 1], &[1], None).unwrap();
        assert_eq!(p.pairs, vec![(0, 0)]);
    }

    #[test]
    fn classic_myers_example() {
        let a: Vec<char> = "ABCABBA".chars().collect();
        let b: Vec<char> = "CBABAC".chars().collect();
        assert_eq!(lcs_ids(&a, &b, None).unwrap().len(), 4);
    }

    #[test]
    fn expired_deadline_times_out() {
        let a: Vec<u32> = (0..4000).collect();
        let b: Vec<u32> = (0..4000).rev().collect();
        let past = Instant::now() - Duration::from_secs(1);
        assert!(matches!(lcs_ids(&a, &b, Some(past)), Err(Error::Timeout)));
    }

    fn check_pairing(a: &[u8], b: &[u8], p: &LcsPairing) {
        for w in p.pairs.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &p.pairs {
            assert_eq!(a[i], b[j]);
        }
    }

    proptest! {
        #[test]
        fn matches_dp_oracle(
            a in proptest::collection::vec(0u8..5, 0..60),
            b in proptest::collection::vec(0u8..5, 0..60),
        ) {
            let p = lcs_ids(&a, &b, None).unwrap();
            check_pairing(&a, &b, &p);
            prop_assert_eq!(p.len(), lcs_length_dp(&a, &b));
        }

        #[test]
        fn bisection_fallback_is_optimal(
            a in proptest::collection::vec(0u8..4, 0..80),
            b in proptest::collection::vec(0u8..4, 0..80),
        ) {
            let p = lcs_ids_with_budget(&a, &b, None, 8).unwrap();
            check_pairing(&a, &b, &p);
            prop_assert_eq!(p.len(), lcs_length_dp(&a, &b));
        }

        #[test]
        fn deterministic(a in proptest::collection::vec(0u8..4, 0..40), b in proptest::collection::vec(0u8..4, 0..40)) {
            prop_assert_eq!(lcs_ids(&a, &b, None).unwrap(), lcs_ids(&a, &b, None).unwrap());
        }
    }
}
