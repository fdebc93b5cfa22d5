//! The environment step: serving requests from caches, computing slot delay
//! and per-SBS delay-reduction rewards, and assigning rewards to coordination
//! graph edges.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::demand::{PreferenceMatrix, RequestBatch};
use crate::optimizers::ScoreFunction;
use crate::topology::{CoordinationGraph, DelayModel, NeighborIndex};

/// Binary placement matrix with a per-row budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheMatrix {
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    bits: Vec<bool>,
}

impl CacheMatrix {
    pub fn empty(num_sbs: usize, num_files: usize, cache_size: usize) -> Self {
        CacheMatrix {
            num_sbs,
            num_files,
            cache_size,
            bits: vec![false; num_sbs * num_files],
        }
    }

    /// Budget-feasible placement with `cache_size` distinct uniform files per
    /// SBS (fewer when the library is smaller).
    pub fn random(
        num_sbs: usize,
        num_files: usize,
        cache_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut cache = CacheMatrix::empty(num_sbs, num_files, cache_size);
        let mut files: Vec<usize> = (0..num_files).collect();
        for m in 0..num_sbs {
            files.shuffle(rng);
            for &f in files.iter().take(cache_size.min(num_files)) {
                cache.set(m, f, true);
            }
        }
        cache
    }

    pub fn num_sbs(&self) -> usize {
        self.num_sbs
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    #[inline]
    pub fn get(&self, sbs: usize, file: usize) -> bool {
        self.bits[sbs * self.num_files + file]
    }

    #[inline]
    pub fn set(&mut self, sbs: usize, file: usize, cached: bool) {
        self.bits[sbs * self.num_files + file] = cached;
    }

    /// Files cached at `sbs`, ascending.
    pub fn row_files(&self, sbs: usize) -> Vec<usize> {
        (0..self.num_files).filter(|&f| self.get(sbs, f)).collect()
    }

    pub fn row_len(&self, sbs: usize) -> usize {
        (0..self.num_files).filter(|&f| self.get(sbs, f)).count()
    }

    pub fn clear_row(&mut self, sbs: usize) {
        for f in 0..self.num_files {
            self.set(sbs, f, false);
        }
    }

    pub fn set_row(&mut self, sbs: usize, files: &[usize]) {
        self.clear_row(sbs);
        for &f in files {
            self.set(sbs, f, true);
        }
    }

    pub fn is_budget_feasible(&self) -> bool {
        (0..self.num_sbs).all(|m| self.row_len(m) <= self.cache_size)
    }

    /// Nearest neighbor of `user` caching `file`, with its delay-list rank.
    pub fn server_for(
        &self,
        user: usize,
        file: usize,
        index: &NeighborIndex,
    ) -> Option<(usize, usize)> {
        index.neighbors_of_user[user]
            .iter()
            .position(|&m| self.get(m, file))
            .map(|pos| (index.neighbors_of_user[user][pos], pos))
    }
}

/// Who satisfied a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Server {
    Sbs(usize),
    Core,
}

/// Outcome of one request.
#[derive(Debug, Clone, Copy)]
pub struct RequestOutcome {
    pub user: usize,
    pub file: usize,
    pub server: Server,
    pub delay: f64,
    /// Delay reduction relative to core service; zero for core-served.
    pub reward: f64,
}

/// Everything observed when a slot's requests are served under one placement.
#[derive(Debug, Clone, Default)]
pub struct ServiceOutcome {
    /// Per-request records in (user, file) ascending order.
    pub per_request: Vec<RequestOutcome>,
    /// Sum of all individual delays this slot.
    pub slot_delay: f64,
    /// Sum of all delay-reduction rewards this slot.
    pub total_reward: f64,
    pub num_requests: usize,
    /// Reward earned by SBS `m` from caching file `f`, keyed `(m, f)`.
    pub sbs_file_reward: BTreeMap<(usize, usize), f64>,
}

/// Serves a batch: each request goes to the user's nearest neighbor SBS that
/// caches the file, or to the core network at the core delay.
pub fn serve_requests(
    cache: &CacheMatrix,
    batch: &RequestBatch,
    index: &NeighborIndex,
    delays: &DelayModel,
) -> ServiceOutcome {
    debug_assert!(cache.is_budget_feasible());
    let mut out = ServiceOutcome::default();
    for (user, files) in batch.requests.iter().enumerate() {
        for &file in files {
            let (server, delay, reward) = match cache.server_for(user, file, index) {
                Some((m, _)) => {
                    let d = delays.neighbor_delay(m, user);
                    (Server::Sbs(m), d, delays.core_delay - d)
                }
                None => (Server::Core, delays.core_delay, 0.0),
            };
            if let Server::Sbs(m) = server {
                *out.sbs_file_reward.entry((m, file)).or_insert(0.0) += reward;
            }
            out.slot_delay += delay;
            out.total_reward += reward;
            out.num_requests += 1;
            out.per_request.push(RequestOutcome {
                user,
                file,
                server,
                delay,
                reward,
            });
        }
    }
    out
}

/// Rewards accumulated on coordination graph edges.
///
/// Key `(m, n, f)`: the reward stored at serving SBS `m` for edge `(m, n)`
/// and file `f`. `m == n` is the self edge (joint action "both cache", which
/// collapses to "m caches"); `m != n` carries the joint action "m caches, n
/// does not".
pub type EdgeRewardTable = BTreeMap<(usize, usize, usize), f64>;

/// Splits each served request's reward across coordination graph edges: the
/// whole reward to the self edge when the server is the user's nearest
/// neighbor, otherwise equal shares to the edges toward each strictly closer
/// SBS.
pub fn assign_edge_rewards(
    outcome: &ServiceOutcome,
    index: &NeighborIndex,
    graph: &CoordinationGraph,
) -> EdgeRewardTable {
    let mut table = EdgeRewardTable::new();
    for req in &outcome.per_request {
        let Server::Sbs(m) = req.server else {
            continue;
        };
        let pos = index
            .position(req.user, m)
            .expect("server must be a neighbor of the user");
        if pos == 0 {
            *table.entry((m, m, req.file)).or_insert(0.0) += req.reward;
        } else {
            let closer = index.closer_set(req.user, m);
            let share = req.reward / closer.len() as f64;
            for &n in closer {
                debug_assert!(graph.has_edge(m, n));
                *table.entry((m, n, req.file)).or_insert(0.0) += share;
            }
        }
    }
    table
}

/// Expected per-slot reward of a placement under known preferences, assuming
/// one request per user per slot.
///
/// Returns the total along with the per-(SBS, file) decomposition.
pub fn expected_reward(
    cache: &CacheMatrix,
    prefs: &PreferenceMatrix,
    index: &NeighborIndex,
    delays: &DelayModel,
) -> (f64, BTreeMap<(usize, usize), f64>) {
    let mut per_pair = BTreeMap::new();
    let mut total = 0.0;
    for user in 0..prefs.num_users() {
        for file in 0..prefs.num_files() {
            if let Some((m, _)) = cache.server_for(user, file, index) {
                let r = prefs.p[user][file] * delays.reward(m, user);
                *per_pair.entry((m, file)).or_insert(0.0) += r;
                total += r;
            }
        }
    }
    (total, per_pair)
}

/// Expected-reward objective over placements, used by the oracles and by
/// regret accounting.
pub struct ExpectedRewardScore<'a> {
    pub prefs: &'a PreferenceMatrix,
    pub index: &'a NeighborIndex,
    pub delays: &'a DelayModel,
}

impl ScoreFunction for ExpectedRewardScore<'_> {
    type Value = f64;

    fn evaluate(&self, cache: &CacheMatrix) -> f64 {
        expected_reward(cache, self.prefs, self.index, self.delays).0
    }

    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> f64 {
        // Users of m gain only when no strictly closer SBS caches f; the gain
        // is the delay difference against their current server (or the core).
        let mut gain = 0.0;
        for &user in &self.index.neighbors_of_sbs[m] {
            let pos = self.index.position(user, m).unwrap();
            let ns = &self.index.neighbors_of_user[user];
            if ns[..pos].iter().any(|&n| cache.get(n, f)) {
                continue;
            }
            let current = ns[pos + 1..]
                .iter()
                .find(|&&n| cache.get(n, f))
                .map_or(self.delays.core_delay, |&n| self.delays.neighbor_delay(n, user));
            gain += self.prefs.p[user][f] * (current - self.delays.neighbor_delay(m, user));
        }
        gain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{
        sample_stationary_requests, zipf_preferences, RequestStream, ZipfExponents,
    };
    use crate::rng::stream_rng;
    use crate::topology::{
        build_coordination_graph, build_neighbor_index, compute_delay_model, Point, RadioParams,
        Topology,
    };

    /// Environment fixture with M SBSs in a row and U users scattered.
    struct World {
        topology: Topology,
        index: NeighborIndex,
        graph: CoordinationGraph,
        delays: DelayModel,
    }

    fn world(seed: u64, m: usize, u: usize, radius: f64) -> World {
        let mut rng = stream_rng(&[seed]);
        let topology = Topology::random(100.0, m, u, radius, &mut rng);
        let index = build_neighbor_index(&topology);
        let graph = build_coordination_graph(&index);
        let delays = match compute_delay_model(&topology, &index, RadioParams::default(), None) {
            Ok(d) => d,
            Err(_) => {
                // No in-range pair: pin an arbitrary core delay.
                compute_delay_model(&topology, &index, RadioParams::default(), Some(1.0)).unwrap()
            }
        };
        World {
            topology,
            index,
            graph,
            delays,
        }
    }

    /// Direct evaluation of the per-slot delay sum from its definition:
    /// nearest caching neighbor, else the core.
    fn brute_force_slot_delay(
        cache: &CacheMatrix,
        batch: &RequestBatch,
        w: &World,
    ) -> f64 {
        let mut total = 0.0;
        for (user, files) in batch.requests.iter().enumerate() {
            for &file in files {
                let ns = &w.index.neighbors_of_user[user];
                let mut served = None;
                for (j, &m) in ns.iter().enumerate() {
                    if cache.get(m, file) && ns[..j].iter().all(|&n| !cache.get(n, file)) {
                        served = Some(w.delays.neighbor_delay(m, user));
                        break;
                    }
                }
                total += served.unwrap_or(w.delays.core_delay);
            }
        }
        total
    }

    #[test]
    fn core_serves_uncached_requests() {
        let w = world(1, 1, 1, 60.0);
        let cache = CacheMatrix::empty(1, 4, 2);
        let batch = RequestBatch {
            slot: 0,
            requests: vec![vec![2]],
        };
        let out = serve_requests(&cache, &batch, &w.index, &w.delays);
        assert_eq!(out.per_request[0].server, Server::Core);
        assert_eq!(out.per_request[0].reward, 0.0);
        assert_eq!(out.slot_delay, w.delays.core_delay);
    }

    #[test]
    fn nearest_cacher_serves_and_earns() {
        // Two SBSs cover the user; both cache the file; nearest one serves.
        let topology = Topology::new(
            vec![Point { x: 10.0, y: 0.0 }, Point { x: 20.0, y: 0.0 }],
            vec![Point { x: 0.0, y: 0.0 }],
            50.0,
        );
        let index = build_neighbor_index(&topology);
        let delays =
            compute_delay_model(&topology, &index, RadioParams::default(), None).unwrap();
        let mut cache = CacheMatrix::empty(2, 3, 2);
        cache.set(0, 1, true);
        cache.set(1, 1, true);
        let batch = RequestBatch {
            slot: 0,
            requests: vec![vec![1]],
        };
        let out = serve_requests(&cache, &batch, &index, &delays);
        assert_eq!(out.per_request[0].server, Server::Sbs(0));
        let expected_reward = delays.core_delay - delays.neighbor_delay(0, 0);
        assert!((out.per_request[0].reward - expected_reward).abs() < 1e-12);
        assert_eq!(out.sbs_file_reward.len(), 1);
        assert!(out.sbs_file_reward.contains_key(&(0, 1)));
    }

    #[test]
    fn slot_delay_matches_definition_on_random_instances() {
        for seed in 0..50u64 {
            let w = world(seed, 3, 6, 45.0);
            let mut rng = stream_rng(&[seed, 77]);
            let cache = CacheMatrix::random(3, 5, 2, &mut rng);
            let prefs = zipf_preferences(6, 5, &ZipfExponents::Explicit(vec![0.9; 6]), seed);
            let batch = sample_stationary_requests(&prefs, 0, &RequestStream::new(seed));
            let out = serve_requests(&cache, &batch, &w.index, &w.delays);
            let expect = brute_force_slot_delay(&cache, &batch, &w);
            assert!((out.slot_delay - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }

    #[test]
    fn conservation_links_delay_and_reward() {
        for seed in 0..50u64 {
            let w = world(seed, 4, 8, 40.0);
            let mut rng = stream_rng(&[seed, 5]);
            let cache = CacheMatrix::random(4, 6, 2, &mut rng);
            let prefs = zipf_preferences(8, 6, &ZipfExponents::Explicit(vec![1.1; 8]), seed);
            let batch = sample_stationary_requests(&prefs, 3, &RequestStream::new(seed));
            let out = serve_requests(&cache, &batch, &w.index, &w.delays);
            let budget = out.num_requests as f64 * w.delays.core_delay;
            assert!((out.slot_delay + out.total_reward - budget).abs() <= 1e-9 * budget);
        }
    }

    #[test]
    fn self_edge_takes_full_reward_when_server_is_nearest() {
        let topology = Topology::new(
            vec![Point { x: 10.0, y: 0.0 }, Point { x: 20.0, y: 0.0 }],
            vec![Point { x: 0.0, y: 0.0 }],
            50.0,
        );
        let index = build_neighbor_index(&topology);
        let graph = build_coordination_graph(&index);
        let delays =
            compute_delay_model(&topology, &index, RadioParams::default(), None).unwrap();
        let mut cache = CacheMatrix::empty(2, 2, 1);
        cache.set(0, 0, true);
        let batch = RequestBatch {
            slot: 0,
            requests: vec![vec![0]],
        };
        let out = serve_requests(&cache, &batch, &index, &delays);
        let table = assign_edge_rewards(&out, &index, &graph);
        assert_eq!(table.len(), 1);
        let r = table[&(0, 0, 0)];
        assert!((r - out.total_reward).abs() < 1e-12);
    }

    #[test]
    fn third_nearest_server_splits_reward_between_two_edges() {
        let topology = Topology::new(
            vec![
                Point { x: 10.0, y: 0.0 },
                Point { x: 20.0, y: 0.0 },
                Point { x: 30.0, y: 0.0 },
            ],
            vec![Point { x: 0.0, y: 0.0 }],
            50.0,
        );
        let index = build_neighbor_index(&topology);
        let graph = build_coordination_graph(&index);
        let delays =
            compute_delay_model(&topology, &index, RadioParams::default(), None).unwrap();
        let mut cache = CacheMatrix::empty(3, 1, 1);
        cache.set(2, 0, true);
        let batch = RequestBatch {
            slot: 0,
            requests: vec![vec![0]],
        };
        let out = serve_requests(&cache, &batch, &index, &delays);
        let reward = out.per_request[0].reward;
        let table = assign_edge_rewards(&out, &index, &graph);
        assert_eq!(table.len(), 2);
        assert!((table[&(2, 0, 0)] - reward / 2.0).abs() < 1e-12);
        assert!((table[&(2, 1, 0)] - reward / 2.0).abs() < 1e-12);
    }

    #[test]
    fn edge_rewards_conserve_sbs_rewards() {
        for seed in 0..50u64 {
            let w = world(seed, 4, 10, 55.0);
            let mut rng = stream_rng(&[seed, 9]);
            let cache = CacheMatrix::random(4, 8, 3, &mut rng);
            let prefs = zipf_preferences(10, 8, &ZipfExponents::Explicit(vec![0.7; 10]), seed);
            let batch = sample_stationary_requests(&prefs, 1, &RequestStream::new(seed));
            let out = serve_requests(&cache, &batch, &w.index, &w.delays);
            let table = assign_edge_rewards(&out, &w.index, &w.graph);
            let edge_sum: f64 = table.values().sum();
            let sbs_sum: f64 = out.sbs_file_reward.values().sum();
            assert!((edge_sum - sbs_sum).abs() <= 1e-9 * sbs_sum.max(1e-12));
        }
    }

    #[test]
    fn caching_more_never_increases_delay() {
        for seed in 0..30u64 {
            let w = world(seed, 3, 8, 50.0);
            let mut rng = stream_rng(&[seed, 31]);
            let mut cache = CacheMatrix::random(3, 6, 2, &mut rng);
            let prefs = zipf_preferences(8, 6, &ZipfExponents::Explicit(vec![0.9; 8]), seed);
            let batch = sample_stationary_requests(&prefs, 2, &RequestStream::new(seed));
            let before = serve_requests(&cache, &batch, &w.index, &w.delays).slot_delay;
            // grow budget and add one more file to SBS 0
            let mut grown = CacheMatrix::empty(3, 6, 3);
            for m in 0..3 {
                for f in cache.row_files(m) {
                    grown.set(m, f, true);
                }
            }
            if let Some(extra) = (0..6).find(|&f| !cache.get(0, f)) {
                grown.set(0, extra, true);
            }
            let after = serve_requests(&grown, &batch, &w.index, &w.delays).slot_delay;
            assert!(after <= before + 1e-12);
            cache.clear_row(0);
        }
    }

    #[test]
    fn empty_cache_has_zero_expected_reward() {
        let w = world(3, 2, 5, 50.0);
        let prefs = zipf_preferences(5, 4, &ZipfExponents::Explicit(vec![0.9; 5]), 3);
        let cache = CacheMatrix::empty(2, 4, 2);
        let (total, pairs) = expected_reward(&cache, &prefs, &w.index, &w.delays);
        assert_eq!(total, 0.0);
        assert!(pairs.is_empty());
    }

    #[test]
    fn single_sbs_full_cache_closed_form() {
        let w = world(8, 1, 5, 80.0);
        let prefs = zipf_preferences(5, 4, &ZipfExponents::Explicit(vec![1.3; 5]), 8);
        let mut cache = CacheMatrix::empty(1, 4, 4);
        for f in 0..4 {
            cache.set(0, f, true);
        }
        let (total, _) = expected_reward(&cache, &prefs, &w.index, &w.delays);
        let mut expect = 0.0;
        for &user in &w.index.neighbors_of_sbs[0] {
            for f in 0..4 {
                expect += prefs.p[user][f] * w.delays.reward(0, user);
            }
        }
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_average_matches_expected_reward() {
        let w = world(12, 2, 4, 60.0);
        let prefs = zipf_preferences(4, 6, &ZipfExponents::Explicit(vec![0.9; 4]), 12);
        let mut rng = stream_rng(&[12, 55]);
        let cache = CacheMatrix::random(2, 6, 2, &mut rng);
        let (expect, _) = expected_reward(&cache, &prefs, &w.index, &w.delays);
        let stream = RequestStream::new(2024);
        let n = 100_000usize;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for slot in 0..n {
            let batch = sample_stationary_requests(&prefs, slot, &stream);
            let r = serve_requests(&cache, &batch, &w.index, &w.delays).total_reward;
            total += r;
            total_sq += r * r;
        }
        let mean = total / n as f64;
        let var = (total_sq / n as f64 - mean * mean).max(0.0);
        let sigma = (var / n as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sigma + 1e-12,
            "mean {mean} vs expected {expect} (sigma {sigma})"
        );
    }

    #[test]
    fn flip_gain_agrees_with_evaluate() {
        for seed in 0..20u64 {
            let w = world(seed, 3, 7, 55.0);
            let prefs = zipf_preferences(7, 5, &ZipfExponents::Explicit(vec![0.9; 7]), seed);
            let score = ExpectedRewardScore {
                prefs: &prefs,
                index: &w.index,
                delays: &w.delays,
            };
            let mut rng = stream_rng(&[seed, 3]);
            let mut cache = CacheMatrix::random(3, 5, 2, &mut rng);
            for m in 0..3 {
                for f in 0..5 {
                    if cache.get(m, f) {
                        continue;
                    }
                    let gain = score.flip_gain(&cache, m, f);
                    let base = score.evaluate(&cache);
                    cache.set(m, f, true);
                    let with = score.evaluate(&cache);
                    cache.set(m, f, false);
                    assert!(
                        (with - base - gain).abs() < 1e-12,
                        "gain mismatch at ({m},{f})"
                    );
                }
            }
            let _ = &w.topology;
        }
    }
}
