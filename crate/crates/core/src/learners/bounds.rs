//! Reward upper bounds per key family, precomputed from the delay model and
//! neighbor relations. A key's bound is the reward it would earn if every
//! relevant user requested the file.

use std::collections::HashMap;

use crate::topology::{CoordinationGraph, DelayModel, NeighborIndex};

/// Distinct closer-set classes per SBS, for the user-perspective learner.
///
/// For SBS `m` and neighbor user `u`, the class is the set of SBSs strictly
/// closer to `u` than `m` (id-sorted). Users sharing a class share one key.
#[derive(Debug, Clone)]
pub struct VsetIndex {
    /// `[m]` -> distinct closer sets, each id-sorted; listing order is first
    /// appearance over users in id order.
    pub sets: Vec<Vec<Vec<usize>>>,
    /// `[m][user]` -> index into `sets[m]`, `None` when not a neighbor.
    pub of_user: Vec<Vec<Option<usize>>>,
}

impl VsetIndex {
    pub fn build(index: &NeighborIndex) -> Self {
        let m = index.num_sbs();
        let u = index.num_users();
        let mut sets = vec![Vec::new(); m];
        let mut of_user = vec![vec![None; u]; m];
        for sbs in 0..m {
            let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
            for &user in &index.neighbors_of_sbs[sbs] {
                let mut v = index.closer_set(user, sbs).to_vec();
                v.sort_unstable();
                let idx = *seen.entry(v.clone()).or_insert_with(|| {
                    sets[sbs].push(v);
                    sets[sbs].len() - 1
                });
                of_user[sbs][user] = Some(idx);
            }
        }
        VsetIndex { sets, of_user }
    }

    pub fn num_keys(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

/// `[m]`: bound when every neighbor user is served by `m`.
pub(super) fn distributed_bounds(index: &NeighborIndex, delays: &DelayModel) -> Vec<f64> {
    (0..index.num_sbs())
        .map(|sbs| {
            index.neighbors_of_sbs[sbs]
                .iter()
                .map(|&u| delays.reward(sbs, u))
                .sum()
        })
        .collect()
}

/// `[m][pattern]`: neighbor bits over `gamma[m]` (bit i set = i-th graph
/// neighbor caches); users blocked by a caching closer SBS drop out.
pub(super) fn agent_sbs_bounds(
    index: &NeighborIndex,
    delays: &DelayModel,
    gamma: &[Vec<usize>],
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(gamma.len());
    for (sbs, g) in gamma.iter().enumerate() {
        let npat = 1usize << g.len();
        let mut bounds = vec![0.0; npat];
        for (pat, bound) in bounds.iter_mut().enumerate() {
            let caching = |n: usize| -> bool {
                g.iter().position(|&x| x == n).is_some_and(|i| pat >> i & 1 == 1)
            };
            for &u in &index.neighbors_of_sbs[sbs] {
                if index.closer_set(u, sbs).iter().any(|&n| caching(n)) {
                    continue;
                }
                *bound += delays.reward(sbs, u);
            }
        }
        out.push(bounds);
    }
    out
}

/// `[m][vset]`: the users of that closer-set class.
pub(super) fn agent_user_bounds(
    index: &NeighborIndex,
    delays: &DelayModel,
    vsets: &VsetIndex,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(vsets.sets.len());
    for sbs in 0..index.num_sbs() {
        let mut bounds = vec![0.0; vsets.sets[sbs].len()];
        for &u in &index.neighbors_of_sbs[sbs] {
            bounds[vsets.of_user[sbs][u].unwrap()] += delays.reward(sbs, u);
        }
        out.push(bounds);
    }
    out
}

/// Self-edge bounds (`[m]`: users with `m` nearest) and directed cross-edge
/// bounds keyed `(m, n)`: users of `m` with `n` strictly closer, each share
/// divided by the closer-SBS count.
pub(super) fn edge_bounds(
    index: &NeighborIndex,
    delays: &DelayModel,
    graph: &CoordinationGraph,
) -> (Vec<f64>, HashMap<(usize, usize), f64>) {
    let m = index.num_sbs();
    let mut edge_self = vec![0.0; m];
    let mut edge_cross: HashMap<(usize, usize), f64> = HashMap::new();
    for (sbs, self_bound) in edge_self.iter_mut().enumerate() {
        for &u in &index.neighbors_of_sbs[sbs] {
            let pos = index.position(u, sbs).unwrap();
            if pos == 0 {
                *self_bound += delays.reward(sbs, u);
            } else {
                let share = delays.reward(sbs, u) / pos as f64;
                for &n in index.closer_set(u, sbs) {
                    *edge_cross.entry((sbs, n)).or_insert(0.0) += share;
                }
            }
        }
        for &n in &graph.gamma[sbs] {
            edge_cross.entry((sbs, n)).or_insert(0.0);
        }
    }
    (edge_self, edge_cross)
}

/// Precomputed per-key reward bounds for every decomposition.
#[derive(Debug, Clone)]
pub struct BoundTable {
    pub distributed: Vec<f64>,
    pub agent_sbs: Vec<Vec<f64>>,
    pub agent_user: Vec<Vec<f64>>,
    pub edge_self: Vec<f64>,
    pub edge_cross: HashMap<(usize, usize), f64>,
}

impl BoundTable {
    pub fn compute(
        index: &NeighborIndex,
        delays: &DelayModel,
        graph: &CoordinationGraph,
        vsets: &VsetIndex,
    ) -> Self {
        let (edge_self, edge_cross) = edge_bounds(index, delays, graph);
        BoundTable {
            distributed: distributed_bounds(index, delays),
            agent_sbs: agent_sbs_bounds(index, delays, &graph.gamma),
            agent_user: agent_user_bounds(index, delays, vsets),
            edge_self,
            edge_cross,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{
        build_coordination_graph, build_neighbor_index, compute_delay_model, Point, RadioParams,
        Topology,
    };

    fn line_world() -> (Topology, NeighborIndex, CoordinationGraph, DelayModel) {
        // User 0 sees SBS 0 then 1; user 1 sees only SBS 1 (23.3 m > radius
        // to SBS 0).
        let t = Topology::new(
            vec![Point { x: 10.0, y: 0.0 }, Point { x: 20.0, y: 0.0 }],
            vec![Point { x: 0.0, y: 0.0 }, Point { x: 20.0, y: 21.0 }],
            22.0,
        );
        let idx = build_neighbor_index(&t);
        let g = build_coordination_graph(&idx);
        let d = compute_delay_model(&t, &idx, RadioParams::default(), None).unwrap();
        (t, idx, g, d)
    }

    #[test]
    fn vset_classes_merge_users_with_equal_closer_sets() {
        let (_, idx, _, _) = line_world();
        let v = VsetIndex::build(&idx);
        // SBS 0: only user 0, nearest -> one empty class.
        assert_eq!(v.sets[0], vec![Vec::<usize>::new()]);
        // SBS 1: user 0 has closer {0}, user 1 has empty class.
        assert_eq!(v.sets[1].len(), 2);
        assert!(v.sets[1].contains(&vec![0]));
        assert!(v.sets[1].contains(&Vec::new()));
    }

    #[test]
    fn bounds_decompose_consistently() {
        let (_, idx, g, d) = line_world();
        let v = VsetIndex::build(&idx);
        let b = BoundTable::compute(&idx, &d, &g, &v);

        // Distributed bound: all neighbor users.
        let expect0 = d.reward(0, 0);
        let expect1 = d.reward(1, 0) + d.reward(1, 1);
        assert!((b.distributed[0] - expect0).abs() < 1e-12);
        assert!((b.distributed[1] - expect1).abs() < 1e-12);

        // The all-zeros neighbor pattern equals the distributed bound.
        assert!((b.agent_sbs[0][0] - expect0).abs() < 1e-12);
        assert!((b.agent_sbs[1][0] - expect1).abs() < 1e-12);
        // When SBS 0 caches, user 0 drops out of SBS 1's bound.
        assert!((b.agent_sbs[1][1] - d.reward(1, 1)).abs() < 1e-12);

        // Closer-set class bounds sum to the distributed bound.
        let sum1: f64 = b.agent_user[1].iter().sum();
        assert!((sum1 - expect1).abs() < 1e-12);

        // Edge bounds: self edge holds nearest users, cross edge the rest.
        assert!((b.edge_self[1] - d.reward(1, 1)).abs() < 1e-12);
        assert!((b.edge_cross[&(1, 0)] - d.reward(1, 0)).abs() < 1e-12);
        assert_eq!(b.edge_cross[&(0, 1)], 0.0);
    }
}
