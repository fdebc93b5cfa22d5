//! Placement optimizers over decomposed score functions: cyclic per-SBS best
//! response (anytime), greedy pair insertion, exhaustive search, and plain
//! top-S selection.
//!
//! All objectives in this crate decompose additively over files once the
//! other SBSs' rows are fixed, so the exact per-SBS best response is "take the
//! S best per-file marginals".

use std::ops::{Add, Sub};

use crate::env::CacheMatrix;
use crate::error::{Error, Result};

/// Additive, totally ordered score values.
///
/// `f64` covers the stationary objectives. [`OptimisticValue`] adds an
/// optimistic sentinel component that ranks above every finite value, used by
/// the adaptive learners for never-observed actions.
pub trait ScoreValue: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
}

impl ScoreValue for f64 {
    const ZERO: f64 = 0.0;
}

/// Score with a sentinel count ordered before the finite part.
///
/// Comparison is lexicographic: any value holding more sentinels outranks any
/// finite advantage, so a single unexplored action dominates arbitrarily good
/// explored ones without resorting to a magic constant.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OptimisticValue {
    pub sentinels: i64,
    pub finite: f64,
}

impl OptimisticValue {
    /// One optimistic sentinel (an unexplored action).
    pub const H: OptimisticValue = OptimisticValue {
        sentinels: 1,
        finite: 0.0,
    };

    pub const ZERO: OptimisticValue = OptimisticValue {
        sentinels: 0,
        finite: 0.0,
    };

    pub fn finite(v: f64) -> Self {
        OptimisticValue {
            sentinels: 0,
            finite: v,
        }
    }
}

impl Add for OptimisticValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        OptimisticValue {
            sentinels: self.sentinels + rhs.sentinels,
            finite: self.finite + rhs.finite,
        }
    }
}

impl Sub for OptimisticValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        OptimisticValue {
            sentinels: self.sentinels - rhs.sentinels,
            finite: self.finite - rhs.finite,
        }
    }
}

impl ScoreValue for OptimisticValue {
    const ZERO: OptimisticValue = OptimisticValue::ZERO;
}

/// A placement objective that decomposes per file given fixed rows.
pub trait ScoreFunction {
    type Value: ScoreValue;

    /// Score of a full placement.
    fn evaluate(&self, cache: &CacheMatrix) -> Self::Value;

    /// Gain of setting `a[m][f] = 1` versus `0` with everything else fixed.
    /// Called with `a[m][f]` currently zero.
    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> Self::Value;

    /// Score with SBS `m`'s row replaced by `row`, other rows unchanged.
    fn with_row(&self, cache: &CacheMatrix, m: usize, row: &[usize]) -> Self::Value {
        let mut alt = cache.clone();
        alt.set_row(m, row);
        self.evaluate(&alt)
    }
}

/// Selects the ids of the `s` largest values; ties break toward lower ids.
/// Returned ascending.
pub fn top_s_selection_by<V: ScoreValue>(values: &[V], s: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    ids.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("score values must be orderable")
            .then(a.cmp(&b))
    });
    ids.truncate(s);
    ids.sort_unstable();
    ids
}

/// `top_s_selection_by` for plain float values.
pub fn top_s_selection(values: &[f64], s: usize) -> Vec<usize> {
    top_s_selection_by(values, s)
}

/// Canonical per-SBS best response: the S best strictly-sorted per-file
/// marginals, dropping negative ones, ties toward lower file ids.
fn best_response<S: ScoreFunction>(score: &S, cache: &CacheMatrix, m: usize) -> Vec<usize> {
    let gains: Vec<S::Value> = (0..cache.num_files())
        .map(|f| score.flip_gain(cache, m, f))
        .collect();
    let mut row = top_s_selection_by(&gains, cache.cache_size());
    row.retain(|&f| gains[f] >= S::Value::ZERO);
    row
}

/// Cyclic best-response search from `initial`, one SBS at a time in id order,
/// until a full pass changes nothing or `max_rounds` passes elapse. The score
/// never decreases between steps.
pub fn coordinate_ascent<S: ScoreFunction>(
    score: &S,
    initial: CacheMatrix,
    max_rounds: usize,
) -> Result<CacheMatrix> {
    if !initial.is_budget_feasible() {
        return Err(Error::BudgetViolation);
    }
    let mut cache = initial;
    for _ in 0..max_rounds {
        let mut changed = false;
        for m in 0..cache.num_sbs() {
            let old = cache.row_files(m);
            cache.clear_row(m);
            let row = best_response(score, &cache, m);
            cache.set_row(m, &row);
            if row != old {
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(cache)
}

/// Greedy pair insertion: starting empty, repeatedly cache the (SBS, file)
/// pair with the largest marginal gain among SBSs with spare budget until
/// every cache is full. Ties break by (SBS id, file id).
pub fn greedy_placement<S: ScoreFunction>(
    score: &S,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
) -> CacheMatrix {
    let mut cache = CacheMatrix::empty(num_sbs, num_files, cache_size);
    let per_row = cache_size.min(num_files);
    for _ in 0..num_sbs * per_row {
        let mut best: Option<(S::Value, usize, usize)> = None;
        for m in 0..num_sbs {
            if cache.row_len(m) >= per_row {
                continue;
            }
            for f in 0..num_files {
                if cache.get(m, f) {
                    continue;
                }
                let gain = score.flip_gain(&cache, m, f);
                let better = match &best {
                    None => true,
                    Some((g, _, _)) => gain.partial_cmp(g).expect("orderable").is_gt(),
                };
                if better {
                    best = Some((gain, m, f));
                }
            }
        }
        match best {
            Some((_, m, f)) => cache.set(m, f, true),
            None => break,
        }
    }
    cache
}

/// Iterator over size-`k` subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        if k == 0 {
            self.done = true;
            return Some(out);
        }
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - (k - i) {
                self.current[i] += 1;
                for j in (i + 1)..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Exhaustive placement search. The number of candidate matrices,
/// `C(F, S)^M`, must not exceed `cap`. The first maximum in row-major
/// lexicographic enumeration order wins ties.
pub fn brute_force_placement<S: ScoreFunction>(
    score: &S,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    cap: u128,
) -> Result<CacheMatrix> {
    let per_row = binomial(num_files as u128, cache_size.min(num_files) as u128);
    let mut size: u128 = 1;
    for _ in 0..num_sbs {
        size = size.saturating_mul(per_row);
        if size > cap {
            return Err(Error::BruteForceCap { size, cap });
        }
    }

    let rows: Vec<Vec<usize>> =
        Combinations::new(num_files, cache_size.min(num_files)).collect();
    let mut odometer = vec![0usize; num_sbs];
    let mut best: Option<(S::Value, CacheMatrix)> = None;
    loop {
        let mut cache = CacheMatrix::empty(num_sbs, num_files, cache_size);
        for (m, &ri) in odometer.iter().enumerate() {
            cache.set_row(m, &rows[ri]);
        }
        let value = score.evaluate(&cache);
        let better = match &best {
            None => true,
            Some((v, _)) => value.partial_cmp(v).expect("orderable").is_gt(),
        };
        if better {
            best = Some((value, cache));
        }

        // advance odometer, last row fastest
        let mut pos = num_sbs;
        loop {
            if pos == 0 {
                return Ok(best.unwrap().1);
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < rows.len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}
