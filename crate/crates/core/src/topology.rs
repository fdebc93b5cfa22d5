//! Network geometry: SBS and user placement, neighbor relations, the
//! coordination graph, and the SNR-derived link delay model.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in the simulation plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Placement of SBSs and users together with the communication radius.
#[derive(Debug, Clone)]
pub struct Topology {
    pub sbs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// Maximum SBS-user distance over which a link can be established.
    pub comm_radius: f64,
}

impl Topology {
    pub fn new(sbs_positions: Vec<Point>, user_positions: Vec<Point>, comm_radius: f64) -> Self {
        assert!(!sbs_positions.is_empty(), "need at least one SBS");
        assert!(!user_positions.is_empty(), "need at least one user");
        assert!(comm_radius > 0.0, "communication radius must be positive");
        Topology {
            sbs_positions,
            user_positions,
            comm_radius,
        }
    }

    /// Uniform placement of `num_sbs` SBSs and `num_users` users in a
    /// `region` x `region` square.
    pub fn random(
        region: f64,
        num_sbs: usize,
        num_users: usize,
        comm_radius: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut draw = |n: usize| -> Vec<Point> {
            (0..n)
                .map(|_| Point {
                    x: rng.gen_range(0.0..region),
                    y: rng.gen_range(0.0..region),
                })
                .collect()
        };
        let sbs = draw(num_sbs);
        let users = draw(num_users);
        Topology::new(sbs, users, comm_radius)
    }

    pub fn num_sbs(&self) -> usize {
        self.sbs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn distance(&self, sbs: usize, user: usize) -> f64 {
        self.sbs_positions[sbs].distance(&self.user_positions[user])
    }

    /// CSV dump of SBS positions (`sbs_id,x,y`).
    pub fn sbs_positions_csv(&self) -> String {
        let mut out = String::from("sbs_id,x,y\n");
        for (i, p) in self.sbs_positions.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i, p.x, p.y);
        }
        out
    }

    /// CSV dump of user positions (`user_id,x,y`).
    pub fn user_positions_csv(&self) -> String {
        let mut out = String::from("user_id,x,y\n");
        for (i, p) in self.user_positions.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i, p.x, p.y);
        }
        out
    }
}

/// Bidirectional neighbor relations with per-user distance orderings.
///
/// For every user the neighbor SBSs are sorted by ascending distance, ties
/// broken by ascending SBS id, so "the j-th nearest SBS" is well defined and
/// stable under replay.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    /// Per user: neighbor SBS ids sorted by ascending distance (then id).
    pub neighbors_of_user: Vec<Vec<usize>>,
    /// Per SBS: neighbor user ids in ascending order.
    pub neighbors_of_sbs: Vec<Vec<usize>>,
    /// Dense `[user][sbs]` rank: 0-based position of `sbs` in that user's
    /// sorted neighbor list, `None` when out of range.
    rank: Vec<Vec<Option<u32>>>,
}

impl NeighborIndex {
    pub fn num_sbs(&self) -> usize {
        self.neighbors_of_sbs.len()
    }

    pub fn num_users(&self) -> usize {
        self.neighbors_of_user.len()
    }

    pub fn is_neighbor(&self, sbs: usize, user: usize) -> bool {
        self.rank[user][sbs].is_some()
    }

    /// 0-based position of `sbs` in `user`'s sorted neighbor list.
    pub fn position(&self, user: usize, sbs: usize) -> Option<usize> {
        self.rank[user][sbs].map(|r| r as usize)
    }

    /// SBSs strictly before `sbs` in `user`'s ordering (the closer set).
    /// Empty when `sbs` is the nearest neighbor or not a neighbor at all.
    pub fn closer_set(&self, user: usize, sbs: usize) -> &[usize] {
        match self.rank[user][sbs] {
            Some(r) => &self.neighbors_of_user[user][..r as usize],
            None => &[],
        }
    }
}

/// Builds the neighbor index from a topology.
pub fn build_neighbor_index(topology: &Topology) -> NeighborIndex {
    let m = topology.num_sbs();
    let u = topology.num_users();
    let mut neighbors_of_user = vec![Vec::new(); u];
    let mut neighbors_of_sbs = vec![Vec::new(); m];
    let mut rank = vec![vec![None; m]; u];

    for user in 0..u {
        let mut near: Vec<(f64, usize)> = (0..m)
            .filter_map(|sbs| {
                let d = topology.distance(sbs, user);
                (d <= topology.comm_radius).then_some((d, sbs))
            })
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (pos, (_, sbs)) in near.iter().enumerate() {
            rank[user][*sbs] = Some(pos as u32);
            neighbors_of_sbs[*sbs].push(user);
        }
        neighbors_of_user[user] = near.into_iter().map(|(_, sbs)| sbs).collect();
    }

    NeighborIndex {
        neighbors_of_user,
        neighbors_of_sbs,
        rank,
    }
}

/// Graph over SBSs with an edge wherever two coverage areas share a user,
/// plus a self edge at every vertex.
#[derive(Debug, Clone)]
pub struct CoordinationGraph {
    /// Unordered edges stored as `(min, max)`; self edges as `(m, m)`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Per SBS: graph neighbors excluding the SBS itself, ascending.
    pub gamma: Vec<Vec<usize>>,
}

impl CoordinationGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Cross edges `(m, n)` with `m < n`.
    pub fn cross_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied().filter(|(a, b)| a != b)
    }
}

/// Builds the coordination graph from neighbor relations.
pub fn build_coordination_graph(index: &NeighborIndex) -> CoordinationGraph {
    let m = index.num_sbs();
    let mut edges = BTreeSet::new();
    let mut gamma = vec![Vec::new(); m];
    for sbs in 0..m {
        edges.insert((sbs, sbs));
    }
    for user in 0..index.num_users() {
        let ns = &index.neighbors_of_user[user];
        for i in 0..ns.len() {
            for j in (i + 1)..ns.len() {
                let (a, b) = (ns[i].min(ns[j]), ns[i].max(ns[j]));
                edges.insert((a, b));
            }
        }
    }
    for &(a, b) in &edges {
        if a != b {
            gamma[a].push(b);
            gamma[b].push(a);
        }
    }
    for g in &mut gamma {
        g.sort_unstable();
        g.dedup();
    }
    CoordinationGraph { edges, gamma }
}

/// Physical-layer parameters of the SBS downlink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub power_w: f64,
    pub noise_w: f64,
    pub path_loss_exp: f64,
    pub bandwidth_hz: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            power_w: 1.0,
            noise_w: 1.0,
            path_loss_exp: 4.0,
            bandwidth_hz: 1.0e7,
        }
    }
}

/// Per-link transmission delays plus the core-network fallback delay.
///
/// Non-neighbor pairs hold an infinity sentinel that never enters arithmetic;
/// serving logic iterates neighbor lists instead.
#[derive(Debug, Clone)]
pub struct DelayModel {
    delay: Vec<Vec<f64>>,
    pub core_delay: f64,
    pub radio: RadioParams,
}

impl DelayModel {
    /// Link delay in seconds; `f64::INFINITY` for non-neighbor pairs.
    pub fn link_delay(&self, sbs: usize, user: usize) -> f64 {
        self.delay[sbs][user]
    }

    /// Link delay for a pair known to be in range.
    pub fn neighbor_delay(&self, sbs: usize, user: usize) -> f64 {
        let d = self.delay[sbs][user];
        debug_assert!(d.is_finite(), "pair ({sbs},{user}) is not a neighbor pair");
        d
    }

    /// Delay reduction when `user` is served by `sbs` instead of the core.
    pub fn reward(&self, sbs: usize, user: usize) -> f64 {
        self.core_delay - self.neighbor_delay(sbs, user)
    }
}

fn snr_delay(distance: f64, radio: &RadioParams) -> f64 {
    let snr = radio.power_w * distance.powf(-radio.path_loss_exp) / radio.noise_w;
    1.0 / (radio.bandwidth_hz * (1.0 + snr).log2())
}

/// Computes the delay model from the topology and radio parameters.
///
/// The core-network delay defaults to three times the worst in-range link
/// delay; `core_override` pins an absolute value instead. Without an override
/// a topology with no in-range pair at all is rejected.
pub fn compute_delay_model(
    topology: &Topology,
    index: &NeighborIndex,
    radio: RadioParams,
    core_override: Option<f64>,
) -> Result<DelayModel> {
    assert!(radio.bandwidth_hz > 0.0 && radio.power_w > 0.0 && radio.noise_w > 0.0);
    assert!(radio.path_loss_exp > 2.0, "path loss exponent must exceed 2");

    let m = topology.num_sbs();
    let u = topology.num_users();
    let mut delay = vec![vec![f64::INFINITY; u]; m];
    let mut max_link: Option<f64> = None;
    for (sbs, row) in delay.iter_mut().enumerate() {
        for &user in &index.neighbors_of_sbs[sbs] {
            let d = snr_delay(topology.distance(sbs, user), &radio);
            row[user] = d;
            max_link = Some(max_link.map_or(d, |m| m.max(d)));
        }
    }

    let core_delay = match (core_override, max_link) {
        (Some(d0), Some(max)) => {
            if d0 <= max {
                return Err(Error::config(
                    "radio.core_delay_s",
                    format!("core delay {d0} must exceed the worst link delay {max}"),
                ));
            }
            d0
        }
        (Some(d0), None) => d0,
        (None, Some(max)) => 3.0 * max,
        (None, None) => return Err(Error::DegenerateTopology),
    };

    Ok(DelayModel {
        delay,
        core_delay,
        radio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn single_pair(user_y: f64, radius: f64) -> Topology {
        Topology::new(
            vec![Point { x: 0.0, y: 0.0 }],
            vec![Point { x: 0.0, y: user_y }],
            radius,
        )
    }

    #[test]
    fn neighbor_within_radius() {
        let t = single_pair(10.0, 50.0);
        let idx = build_neighbor_index(&t);
        assert_eq!(idx.neighbors_of_user[0], vec![0]);
        assert_eq!(idx.neighbors_of_sbs[0], vec![0]);
        assert_eq!(idx.position(0, 0), Some(0));
    }

    #[test]
    fn neighbor_out_of_range() {
        let t = single_pair(10.0, 5.0);
        let idx = build_neighbor_index(&t);
        assert!(idx.neighbors_of_user[0].is_empty());
        assert!(idx.neighbors_of_sbs[0].is_empty());
        assert_eq!(idx.position(0, 0), None);
    }

    #[test]
    fn sorted_neighbors_and_closer_set() {
        // Three SBSs at distances 10, 20, 30; radius cuts the last one off.
        let t = Topology::new(
            vec![
                Point { x: 10.0, y: 0.0 },
                Point { x: 20.0, y: 0.0 },
                Point { x: 30.0, y: 0.0 },
            ],
            vec![Point { x: 0.0, y: 0.0 }],
            25.0,
        );
        let idx = build_neighbor_index(&t);
        assert_eq!(idx.neighbors_of_user[0], vec![0, 1]);
        assert_eq!(idx.closer_set(0, 1), &[0]);
        assert_eq!(idx.closer_set(0, 0), &[] as &[usize]);
    }

    #[test]
    fn distance_ties_break_by_id() {
        let t = Topology::new(
            vec![Point { x: 10.0, y: 0.0 }, Point { x: -10.0, y: 0.0 }],
            vec![Point { x: 0.0, y: 0.0 }],
            25.0,
        );
        let idx = build_neighbor_index(&t);
        assert_eq!(idx.neighbors_of_user[0], vec![0, 1]);
    }

    #[test]
    fn delay_matches_direct_formula() {
        let t = single_pair(10.0, 50.0);
        let idx = build_neighbor_index(&t);
        let model = compute_delay_model(&t, &idx, RadioParams::default(), None).unwrap();
        // SNR = 10^-4 at 10 m with unit power/noise and exponent 4.
        let expected = 1.0 / (1.0e7 * (1.0 + 1.0e-4f64).log2());
        let got = model.neighbor_delay(0, 0);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 6.931e-4).abs() < 1e-6);
        assert!((model.core_delay - 3.0 * expected).abs() < 1e-15);
    }

    #[test]
    fn non_neighbor_is_infinite() {
        let t = Topology::new(
            vec![Point { x: 0.0, y: 0.0 }, Point { x: 100.0, y: 0.0 }],
            vec![Point { x: 1.0, y: 0.0 }],
            10.0,
        );
        let idx = build_neighbor_index(&t);
        let model = compute_delay_model(&t, &idx, RadioParams::default(), None).unwrap();
        assert!(model.link_delay(1, 0).is_infinite());
        assert!(model.link_delay(0, 0).is_finite());
    }

    #[test]
    fn degenerate_topology_needs_explicit_core_delay() {
        let t = single_pair(10.0, 1.0);
        let idx = build_neighbor_index(&t);
        let err = compute_delay_model(&t, &idx, RadioParams::default(), None);
        assert!(matches!(err, Err(Error::DegenerateTopology)));
        let ok = compute_delay_model(&t, &idx, RadioParams::default(), Some(0.5)).unwrap();
        assert_eq!(ok.core_delay, 0.5);
    }

    #[test]
    fn core_override_below_max_link_is_rejected() {
        let t = single_pair(10.0, 50.0);
        let idx = build_neighbor_index(&t);
        let err = compute_delay_model(&t, &idx, RadioParams::default(), Some(1e-9));
        assert!(matches!(err, Err(Error::Config { .. })));
    }

    #[test]
    fn graph_edges_from_shared_users() {
        // SBSs 0 and 1 share the user, SBS 2 is isolated.
        let t = Topology::new(
            vec![
                Point { x: 0.0, y: 0.0 },
                Point { x: 10.0, y: 0.0 },
                Point { x: 90.0, y: 90.0 },
            ],
            vec![Point { x: 5.0, y: 0.0 }],
            20.0,
        );
        let idx = build_neighbor_index(&t);
        let g = build_coordination_graph(&idx);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(0, 0) && g.has_edge(1, 1) && g.has_edge(2, 2));
        assert!(!g.has_edge(0, 2) && !g.has_edge(1, 2));
        assert_eq!(g.gamma[0], vec![1]);
        assert_eq!(g.gamma[2], Vec::<usize>::new());
    }

    #[test]
    fn disjoint_coverage_gives_only_self_edges() {
        let t = Topology::new(
            vec![Point { x: 0.0, y: 0.0 }, Point { x: 100.0, y: 0.0 }],
            vec![Point { x: 1.0, y: 0.0 }, Point { x: 99.0, y: 0.0 }],
            10.0,
        );
        let idx = build_neighbor_index(&t);
        let g = build_coordination_graph(&idx);
        assert_eq!(g.edges.len(), 2);
        assert!(g.cross_edges().next().is_none());
    }

    fn arb_topology() -> impl Strategy<Value = Topology> {
        (1usize..6, 1usize..12, 10.0f64..80.0, any::<u64>()).prop_map(|(m, u, r, seed)| {
            let mut rng = stream_rng(&[seed]);
            Topology::random(100.0, m, u, r, &mut rng)
        })
    }

    proptest! {
        #[test]
        fn index_is_symmetric(t in arb_topology()) {
            let idx = build_neighbor_index(&t);
            for sbs in 0..t.num_sbs() {
                for user in 0..t.num_users() {
                    let in_range = t.distance(sbs, user) <= t.comm_radius;
                    prop_assert_eq!(idx.is_neighbor(sbs, user), in_range);
                    prop_assert_eq!(idx.neighbors_of_user[user].contains(&sbs), in_range);
                    prop_assert_eq!(idx.neighbors_of_sbs[sbs].contains(&user), in_range);
                }
            }
        }

        #[test]
        fn neighbor_delays_are_sorted(t in arb_topology()) {
            let idx = build_neighbor_index(&t);
            if let Ok(model) = compute_delay_model(&t, &idx, RadioParams::default(), None) {
                for user in 0..t.num_users() {
                    let ds: Vec<f64> = idx.neighbors_of_user[user]
                        .iter()
                        .map(|&s| model.neighbor_delay(s, user))
                        .collect();
                    for w in ds.windows(2) {
                        prop_assert!(w[0] <= w[1]);
                    }
                    for &d in &ds {
                        prop_assert!(d > 0.0 && d < model.core_delay);
                    }
                }
            }
        }

        #[test]
        fn graph_matches_brute_force_coverage(t in arb_topology()) {
            let idx = build_neighbor_index(&t);
            let g = build_coordination_graph(&idx);
            for a in 0..t.num_sbs() {
                for b in (a + 1)..t.num_sbs() {
                    let shared = (0..t.num_users()).any(|u| {
                        t.distance(a, u) <= t.comm_radius && t.distance(b, u) <= t.comm_radius
                    });
                    prop_assert_eq!(g.has_edge(a, b), shared);
                }
            }
        }

        #[test]
        fn growing_radius_is_monotone(t in arb_topology(), extra in 1.0f64..40.0) {
            let small = build_neighbor_index(&t);
            let mut wider = t.clone();
            wider.comm_radius += extra;
            let big = build_neighbor_index(&wider);
            for user in 0..t.num_users() {
                for &sbs in &small.neighbors_of_user[user] {
                    prop_assert!(big.neighbors_of_user[user].contains(&sbs));
                }
            }
            let gs = build_coordination_graph(&small);
            let gb = build_coordination_graph(&big);
            for &(a, b) in &gs.edges {
                prop_assert!(gb.has_edge(a, b));
            }
        }
    }
}
