//! Request workloads: stationary per-user Zipf demand and non-stationary
//! rating-trace replay, plus the active file set used by the adaptive
//! learners.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{mix, stream_rng, tag};

/// Per-user request probabilities over the file library.
///
/// Row `u` is a Zipf law over that user's private popularity ranking: the
/// probability of the rank-r file is `r^-delta / sum_j j^-delta`.
#[derive(Debug, Clone)]
pub struct PreferenceMatrix {
    /// `[user][file]` request probability; each row sums to one.
    pub p: Vec<Vec<f64>>,
    /// `[user][file]` 1-based preference rank of the file for that user.
    pub rank_of: Vec<Vec<u32>>,
    /// Zipf exponent per user.
    pub exponents: Vec<f64>,
    /// `[user][file]` cumulative probabilities for inverse-CDF sampling.
    cdf: Vec<Vec<f64>>,
}

impl PreferenceMatrix {
    pub fn num_users(&self) -> usize {
        self.p.len()
    }

    pub fn num_files(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    fn sample_file(&self, user: usize, x: f64) -> usize {
        let cdf = &self.cdf[user];
        cdf.partition_point(|&c| c < x).min(cdf.len() - 1)
    }
}

/// How the per-user Zipf exponents are chosen.
#[derive(Debug, Clone)]
pub enum ZipfExponents {
    /// One exponent per user, in user order.
    Explicit(Vec<f64>),
    /// Each user draws uniformly from this set.
    DrawnFrom(Vec<f64>),
}

/// Standard exponent set used when the config does not pin one.
pub const DEFAULT_ZIPF_SET: [f64; 5] = [0.5, 0.7, 0.9, 1.1, 1.3];

/// Builds the preference matrix: a per-user uniformly random rank permutation
/// and a Zipf law over ranks.
pub fn zipf_preferences(
    num_users: usize,
    num_files: usize,
    exponents: &ZipfExponents,
    seed: u64,
) -> PreferenceMatrix {
    assert!(num_files >= 1);
    let deltas: Vec<f64> = match exponents {
        ZipfExponents::Explicit(d) => {
            assert_eq!(d.len(), num_users, "need one exponent per user");
            d.clone()
        }
        ZipfExponents::DrawnFrom(set) => {
            assert!(!set.is_empty());
            let mut rng = stream_rng(&[seed, tag::PREFERENCES, 0x5E7]);
            (0..num_users)
                .map(|_| set[rng.gen_range(0..set.len())])
                .collect()
        }
    };
    for &d in &deltas {
        assert!(d >= 0.0, "Zipf exponent must be non-negative");
    }

    let mut p = Vec::with_capacity(num_users);
    let mut rank_of = Vec::with_capacity(num_users);
    let mut cdf = Vec::with_capacity(num_users);
    for (user, &delta) in deltas.iter().enumerate() {
        let norm: f64 = (1..=num_files).map(|j| (j as f64).powf(-delta)).sum();

        let mut perm: Vec<usize> = (0..num_files).collect();
        let mut rng = stream_rng(&[seed, tag::PREFERENCES, user as u64]);
        perm.shuffle(&mut rng);
        // perm[r] = file holding rank r+1 for this user
        let mut ranks = vec![0u32; num_files];
        let mut probs = vec![0.0; num_files];
        for (r, &file) in perm.iter().enumerate() {
            ranks[file] = (r + 1) as u32;
            probs[file] = ((r + 1) as f64).powf(-delta) / norm;
        }
        let mut acc = 0.0;
        let row_cdf: Vec<f64> = probs
            .iter()
            .map(|&q| {
                acc += q;
                acc
            })
            .collect();
        p.push(probs);
        rank_of.push(ranks);
        cdf.push(row_cdf);
    }

    PreferenceMatrix {
        p,
        rank_of,
        exponents: deltas,
        cdf,
    }
}

/// The requests of one time slot: per user, a set of file ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestBatch {
    pub slot: usize,
    /// `[user]` -> ascending file ids requested this slot.
    pub requests: Vec<Vec<usize>>,
}

impl RequestBatch {
    pub fn num_requests(&self) -> usize {
        self.requests.iter().map(Vec::len).sum()
    }

    /// All distinct files requested this slot, ascending.
    pub fn files(&self) -> BTreeSet<usize> {
        self.requests.iter().flatten().copied().collect()
    }
}

/// Keyed source of stationary request draws.
///
/// Each (slot, user) pair owns an independent derived stream, so a batch is
/// fully determined by `(seed, slot, user)` regardless of evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct RequestStream {
    base: u64,
}

impl RequestStream {
    pub fn new(seed: u64) -> Self {
        RequestStream {
            base: mix(&[seed, tag::REQUESTS]),
        }
    }
}

/// Draws one request per user from its preference row.
pub fn sample_stationary_requests(
    prefs: &PreferenceMatrix,
    slot: usize,
    stream: &RequestStream,
) -> RequestBatch {
    let requests = (0..prefs.num_users())
        .map(|user| {
            let mut rng = stream_rng(&[stream.base, slot as u64, user as u64]);
            let x: f64 = rng.gen_range(0.0..1.0);
            vec![prefs.sample_file(user, x)]
        })
        .collect();
    RequestBatch {
        slot,
        requests,
    }
}

/// One rating/request event from a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub user_id: u64,
    pub file_id: u64,
    pub timestamp: i64,
}

/// Input format of a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    /// Decide per file: `::`-delimited when the first line contains `::`.
    #[default]
    Auto,
    /// `user::item::rating::timestamp`, one event per line.
    MovieLens,
    /// `user_id,file_id,timestamp` with an optional header row.
    Csv,
}

/// Result of slotting a trace.
#[derive(Debug, Clone)]
pub struct TraceData {
    pub batches: Vec<RequestBatch>,
    /// Distinct users after dense remapping.
    pub num_users: usize,
    /// File id space spanned by the trace (ids shifted to start at zero).
    pub num_files: usize,
    pub num_slots: usize,
    pub num_events: usize,
}

fn parse_line(
    line: &str,
    movielens: bool,
    path: &Path,
    line_no: usize,
) -> Result<Option<TraceEvent>> {
    let err = |message: String| Error::TraceParse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    if line.trim().is_empty() {
        return Ok(None);
    }
    if movielens {
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 `::`-delimited fields, got {}", fields.len())));
        }
        let user_id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad user id `{}`: {e}", fields[0])))?;
        let file_id = fields[1]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad item id `{}`: {e}", fields[1])))?;
        let timestamp = fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|e| err(format!("bad timestamp `{}`: {e}", fields[3])))?;
        Ok(Some(TraceEvent {
            user_id,
            file_id,
            timestamp,
        }))
    } else {
        if line_no == 1 && line.trim() == "user_id,file_id,timestamp" {
            return Ok(None);
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 comma-separated fields, got {}", fields.len())));
        }
        let user_id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad user id `{}`: {e}", fields[0])))?;
        let file_id = fields[1]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad file id `{}`: {e}", fields[1])))?;
        let timestamp = fields[2]
            .trim()
            .parse::<i64>()
            .map_err(|e| err(format!("bad timestamp `{}`: {e}", fields[2])))?;
        Ok(Some(TraceEvent {
            user_id,
            file_id,
            timestamp,
        }))
    }
}

/// Reads all events of a trace file.
pub fn parse_trace_events(path: &Path, format: TraceFormat) -> Result<Vec<TraceEvent>> {
    let file = File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut movielens = matches!(format, TraceFormat::MovieLens);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        if line_no == 1 && matches!(format, TraceFormat::Auto) {
            movielens = line.contains("::");
        }
        if let Some(event) = parse_line(&line, movielens, path, line_no)? {
            events.push(event);
        }
    }
    Ok(events)
}

/// Slots a trace into per-day (or per-`slot_length`) request batches.
///
/// Users are remapped to dense ids by ascending raw id; when `user_cap` is
/// set only the first `cap` users in that order are kept. File ids are
/// shifted so the smallest raw id becomes zero; the library size is the
/// spanned id range. Duplicate (user, file) events within one slot collapse
/// to a single request.
pub fn ingest_trace(
    path: &Path,
    slot_length_s: u64,
    user_cap: Option<usize>,
    format: TraceFormat,
) -> Result<TraceData> {
    assert!(slot_length_s > 0);
    let events = parse_trace_events(path, format)?;
    if events.is_empty() {
        return Err(Error::EmptyTrace {
            path: path.to_path_buf(),
        });
    }

    let mut user_ids: Vec<u64> = events.iter().map(|e| e.user_id).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    if let Some(cap) = user_cap {
        user_ids.truncate(cap);
    }
    let user_map: BTreeMap<u64, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(dense, &raw)| (raw, dense))
        .collect();

    let min_file = events.iter().map(|e| e.file_id).min().unwrap();
    let max_file = events.iter().map(|e| e.file_id).max().unwrap();
    let num_files = (max_file - min_file + 1) as usize;
    let t0 = events.iter().map(|e| e.timestamp).min().unwrap();

    let num_users = user_ids.len();
    let mut per_slot: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
    let mut num_events = 0usize;
    let mut max_slot = 0usize;
    for e in &events {
        let Some(&user) = user_map.get(&e.user_id) else {
            continue; // capped away
        };
        let slot = ((e.timestamp - t0) as u64 / slot_length_s) as usize;
        max_slot = max_slot.max(slot);
        per_slot
            .entry(slot)
            .or_default()
            .insert((user, (e.file_id - min_file) as usize));
        num_events += 1;
    }

    let num_slots = max_slot + 1;
    let mut batches = Vec::with_capacity(num_slots);
    for slot in 0..num_slots {
        let mut requests = vec![Vec::new(); num_users];
        if let Some(pairs) = per_slot.get(&slot) {
            for &(user, file) in pairs {
                requests[user].push(file);
            }
        }
        batches.push(RequestBatch { slot, requests });
    }

    Ok(TraceData {
        batches,
        num_users,
        num_files,
        num_slots,
        num_events,
    })
}

/// Files observed requested so far; never shrinks.
#[derive(Debug, Clone, Default)]
pub struct ActiveFileSet {
    files: BTreeSet<usize>,
}

impl ActiveFileSet {
    pub fn contains(&self, file: usize) -> bool {
        self.files.contains(&file)
    }

    /// Adds one file; true when it was not active before.
    pub fn insert(&mut self, file: usize) -> bool {
        self.files.insert(file)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.files.iter().copied()
    }
}

/// Folds a batch into the active set at end of slot; returns the files seen
/// for the first time, ascending.
pub fn update_active_files(active: &mut ActiveFileSet, batch: &RequestBatch) -> Vec<usize> {
    let mut new_files = Vec::new();
    for file in batch.files() {
        if active.files.insert(file) {
            new_files.push(file);
        }
    }
    new_files
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn zero_exponent_is_uniform() {
        let prefs = zipf_preferences(2, 4, &ZipfExponents::Explicit(vec![0.0, 0.0]), 1);
        for row in &prefs.p {
            for &q in row {
                assert!((q - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_exponent_two_files() {
        let prefs = zipf_preferences(1, 2, &ZipfExponents::Explicit(vec![1.0]), 7);
        let mut probs = prefs.p[0].clone();
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
        // Rank 1 carries the larger probability.
        let top = prefs.rank_of[0].iter().position(|&r| r == 1).unwrap();
        assert!((prefs.p[0][top] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let prefs = zipf_preferences(
            10,
            100,
            &ZipfExponents::DrawnFrom(DEFAULT_ZIPF_SET.to_vec()),
            42,
        );
        for row in &prefs.p {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        for &d in &prefs.exponents {
            assert!(DEFAULT_ZIPF_SET.contains(&d));
        }
    }

    #[test]
    fn degenerate_row_always_picks_rank_one() {
        // A single file: every draw must return it.
        let prefs = zipf_preferences(1, 1, &ZipfExponents::Explicit(vec![1.3]), 3);
        let stream = RequestStream::new(99);
        for slot in 0..50 {
            let batch = sample_stationary_requests(&prefs, slot, &stream);
            assert_eq!(batch.requests[0], vec![0]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let prefs = zipf_preferences(5, 20, &ZipfExponents::Explicit(vec![0.9; 5]), 11);
        let a = RequestStream::new(123);
        let b = RequestStream::new(123);
        let c = RequestStream::new(124);
        let mut diff = false;
        for slot in 0..20 {
            assert_eq!(
                sample_stationary_requests(&prefs, slot, &a),
                sample_stationary_requests(&prefs, slot, &b)
            );
            diff |= sample_stationary_requests(&prefs, slot, &a)
                != sample_stationary_requests(&prefs, slot, &c);
        }
        assert!(diff, "different seeds should change the workload");
    }

    #[test]
    fn empirical_frequencies_match_preferences() {
        let prefs = zipf_preferences(1, 20, &ZipfExponents::Explicit(vec![0.9]), 5);
        let stream = RequestStream::new(17);
        let n = 100_000usize;
        let mut counts = [0usize; 20];
        for slot in 0..n {
            let batch = sample_stationary_requests(&prefs, slot, &stream);
            counts[batch.requests[0][0]] += 1;
        }
        let mut within = 0;
        for (f, &count) in counts.iter().enumerate() {
            let p = prefs.p[0][f];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            if ((count as f64 / n as f64) - p).abs() <= 3.0 * sigma {
                within += 1;
            }
        }
        assert!(within >= 19, "only {within}/20 files within 3 sigma");
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn trace_one_user_two_files_one_day() {
        let f = write_temp("1::10::5::1000\n1::11::4::2000\n");
        let data = ingest_trace(f.path(), 86_400, None, TraceFormat::Auto).unwrap();
        assert_eq!(data.num_slots, 1);
        assert_eq!(data.batches[0].requests[0], vec![0, 1]);
        assert_eq!(data.num_users, 1);
        assert_eq!(data.num_files, 2);
    }

    #[test]
    fn duplicate_rating_collapses() {
        let f = write_temp("1::10::5::1000\n1::10::2::2000\n");
        let data = ingest_trace(f.path(), 86_400, None, TraceFormat::Auto).unwrap();
        assert_eq!(data.batches[0].num_requests(), 1);
    }

    #[test]
    fn slots_align_to_first_event() {
        let f = write_temp("1::10::5::1000\n2::11::5::90000\n");
        let data = ingest_trace(f.path(), 86_400, None, TraceFormat::Auto).unwrap();
        assert_eq!(data.num_slots, 2);
        assert_eq!(data.batches[0].requests[0], vec![0]);
        assert_eq!(data.batches[1].requests[1], vec![1]);
    }

    #[test]
    fn csv_format_with_header() {
        let f = write_temp("user_id,file_id,timestamp\n4,7,100\n9,7,100\n");
        let data = ingest_trace(f.path(), 86_400, None, TraceFormat::Auto).unwrap();
        assert_eq!(data.num_users, 2);
        assert_eq!(data.num_files, 1);
        assert_eq!(data.num_events, 2);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_temp("1::10::5::1000\n1::banana::5::2000\n");
        let err = ingest_trace(f.path(), 86_400, None, TraceFormat::Auto).unwrap_err();
        match err {
            Error::TraceParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_trace_is_rejected() {
        let f = write_temp("");
        let err = ingest_trace(f.path(), 86_400, None, TraceFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::EmptyTrace { .. }));
    }

    #[test]
    fn user_cap_keeps_lowest_ids() {
        let f = write_temp("5,1,100\n2,2,100\n9,3,100\n");
        let data = ingest_trace(f.path(), 86_400, Some(2), TraceFormat::Csv).unwrap();
        assert_eq!(data.num_users, 2);
        // users 2 and 5 survive; user 9's event is dropped
        assert_eq!(data.num_events, 2);
    }

    #[test]
    fn active_set_updates() {
        let mut active = ActiveFileSet::default();
        let empty = RequestBatch {
            slot: 0,
            requests: vec![vec![]],
        };
        assert!(update_active_files(&mut active, &empty).is_empty());
        assert!(active.is_empty());

        let first = RequestBatch {
            slot: 1,
            requests: vec![vec![3, 7]],
        };
        assert_eq!(update_active_files(&mut active, &first), vec![3, 7]);

        let again = RequestBatch {
            slot: 2,
            requests: vec![vec![7]],
        };
        assert!(update_active_files(&mut active, &again).is_empty());
        assert_eq!(active.len(), 2);
    }

    proptest! {
        #[test]
        fn active_set_is_union_of_batches(
            batches in proptest::collection::vec(
                proptest::collection::vec(proptest::collection::vec(0usize..30, 0..4), 1..4),
                0..8,
            )
        ) {
            let mut active = ActiveFileSet::default();
            let mut reference = BTreeSet::new();
            for (slot, reqs) in batches.into_iter().enumerate() {
                let batch = RequestBatch { slot, requests: reqs };
                let new_files = update_active_files(&mut active, &batch);
                for f in &new_files {
                    prop_assert!(!reference.contains(f));
                }
                reference.extend(batch.files());
                prop_assert_eq!(active.iter().collect::<Vec<_>>(),
                                reference.iter().copied().collect::<Vec<_>>());
            }
        }
    }
}
