//! Room clearance status and its propagation over the room graph.
//!
//! A room is unclear when it is unvisited, or when an unoccupied path over
//! the room graph connects it to an unclear room. The status is computed as
//! the fixed point of repeatedly spreading the unclear signal through the
//! adjacency matrix (with an identity term so an unoccupied unclear room
//! keeps its own status) and masking out occupied rooms:
//!
//! `u <- clip(((A + I) * u) ⊙ v, 0, 1)`
//!
//! where `v[i] = 1` marks rooms with no living agent in them. Occupied
//! seed rooms are dropped before iterating — an agent standing in a room
//! stops the signal from either surviving there or passing through.
//! The loop reaches its fixed point in at most `m` iterations.
//!
//! [`oracle_propagate_bfs`] computes the same set by plain breadth-first
//! search and exists as an independent cross-check; the two must agree on
//! every input.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::floorplan::{AdjacencyMatrix, FloorPlan, RoomId};

/// Per-room clearance snapshot after a step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClearanceState {
    /// 1 = unclear.
    pub unclear: Vec<u8>,
    /// 1 = no living agent present.
    pub unoccupied: Vec<u8>,
}

impl ClearanceState {
    pub fn all_clear(&self) -> bool {
        self.unclear.iter().all(|&u| u == 0)
    }

    pub fn unclear_count(&self) -> usize {
        self.unclear.iter().filter(|&&u| u == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClearanceError {
    #[error("dimension mismatch: matrix is {m}x{m}, u has {u_len}, v has {v_len}")]
    DimensionMismatch { m: usize, u_len: usize, v_len: usize },
}

/// Occupancy vector: `v[i] = 0` iff at least one living agent stands in
/// room `i`. Enemies and civilians do not count.
pub fn occupied_vector(m: usize, agent_rooms: impl Iterator<Item = RoomId>) -> Vec<u8> {
    let mut v = vec![1u8; m];
    for room in agent_rooms {
        v[room] = 0;
    }
    v
}

/// Fixed point of the unclear propagation, with the iteration count.
///
/// Returns the set of rooms reachable from any unoccupied seed room through
/// unoccupied rooms; occupied seeds are dropped. The count is the number of
/// propagation passes executed before the vector stopped changing, which is
/// at most `m`.
pub fn propagate_unclear_counted(
    adjacency: &AdjacencyMatrix,
    u_seed: &[u8],
    v: &[u8],
) -> Result<(Vec<u8>, usize), ClearanceError> {
    let m = adjacency.size();
    if u_seed.len() != m || v.len() != m {
        return Err(ClearanceError::DimensionMismatch { m, u_len: u_seed.len(), v_len: v.len() });
    }

    // Occupied rooms can neither hold nor relay the signal.
    let mut u: Vec<u8> = u_seed.iter().zip(v).map(|(&s, &vi)| s & vi).collect();
    let mut iterations = 0;
    loop {
        let mut next = vec![0u8; m];
        for i in 0..m {
            if v[i] == 0 {
                continue;
            }
            // ((A + I) * u)_i clipped to binary.
            let mut spread = u[i];
            if spread == 0 {
                for j in 0..m {
                    if adjacency.get(i, j) == 1 && u[j] == 1 {
                        spread = 1;
                        break;
                    }
                }
            }
            next[i] = spread;
        }
        iterations += 1;
        if next == u {
            break;
        }
        u = next;
        debug_assert!(iterations <= m, "propagation exceeded the m-iteration bound");
    }
    Ok((u, iterations))
}

/// See [`propagate_unclear_counted`].
pub fn propagate_unclear(
    adjacency: &AdjacencyMatrix,
    u_seed: &[u8],
    v: &[u8],
) -> Result<Vec<u8>, ClearanceError> {
    propagate_unclear_counted(adjacency, u_seed, v).map(|(u, _)| u)
}

/// Independent reference for [`propagate_unclear`]: breadth-first search
/// from the seed rooms, expanding only into rooms with `v = 1`. Seeds with
/// `v = 0` are dropped.
pub fn oracle_propagate_bfs(
    adjacency: &AdjacencyMatrix,
    u_seed: &[u8],
    v: &[u8],
) -> Result<Vec<u8>, ClearanceError> {
    let m = adjacency.size();
    if u_seed.len() != m || v.len() != m {
        return Err(ClearanceError::DimensionMismatch { m, u_len: u_seed.len(), v_len: v.len() });
    }
    let mut u = vec![0u8; m];
    let mut queue = Vec::new();
    for i in 0..m {
        if u_seed[i] == 1 && v[i] == 1 {
            u[i] = 1;
            queue.push(i);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let i = queue[head];
        head += 1;
        for j in adjacency.neighbors(i) {
            if v[j] == 1 && u[j] == 0 {
                u[j] = 1;
                queue.push(j);
            }
        }
    }
    Ok(u)
}

/// Recompute clearance after a step.
///
/// The seed keeps rooms that were unclear and are now unoccupied, and adds
/// every room holding a living enemy. After propagation, enemy rooms are
/// forced unclear even when an agent stands in them: such a contested room
/// is occupied (so it blocks propagation) but not clear. A room occupied by
/// a living agent with no enemy present is always clear.
///
/// At episode start pass `prev_unclear = all ones`: everything except the
/// rooms the agents stand in begins unclear.
pub fn recompute_clearance(
    plan: &FloorPlan,
    prev_unclear: &[u8],
    agent_rooms: impl Iterator<Item = RoomId>,
    enemy_rooms: impl Iterator<Item = RoomId>,
) -> ClearanceState {
    let m = plan.room_count();
    let v = occupied_vector(m, agent_rooms);
    let mut enemy_present = vec![0u8; m];
    for room in enemy_rooms {
        enemy_present[room] = 1;
    }
    let mut seed = vec![0u8; m];
    for i in 0..m {
        seed[i] = (prev_unclear[i] & v[i]) | enemy_present[i];
    }
    let mut unclear =
        propagate_unclear(&plan.adjacency, &seed, &v).expect("plan vectors are sized to m");
    for i in 0..m {
        unclear[i] |= enemy_present[i];
    }
    ClearanceState { unclear, unoccupied: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::parse_scenario;
    use alloc::vec;

    fn chain(m: usize) -> AdjacencyMatrix {
        let edges: Vec<(usize, usize)> = (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        AdjacencyMatrix::from_edges(m, &edges)
    }

    #[test]
    fn no_seed_stays_clear() {
        let a = chain(5);
        let u = propagate_unclear(&a, &[0; 5], &[1; 5]).unwrap();
        assert_eq!(u, vec![0; 5]);
    }

    #[test]
    fn full_occupation_clears_everything() {
        let a = chain(4);
        let u = propagate_unclear(&a, &[1; 4], &[0; 4]).unwrap();
        assert_eq!(u, vec![0; 4]);
    }

    #[test]
    fn unclear_floods_through_unoccupied_rooms() {
        // Vacating a room that still connects to an unclear one spreads the
        // status to every connected unoccupied room.
        let a = chain(4);
        // Room 3 unclear, agent only in room 0.
        let u = propagate_unclear(&a, &[0, 0, 0, 1], &[0, 1, 1, 1]).unwrap();
        assert_eq!(u, vec![0, 1, 1, 1]);
        // Same seed, but an agent in room 2 cuts the flood.
        let u = propagate_unclear(&a, &[0, 0, 0, 1], &[1, 1, 0, 1]).unwrap();
        assert_eq!(u, vec![0, 0, 0, 1]);
    }

    #[test]
    fn occupied_seed_is_dropped() {
        let a = chain(3);
        let u = propagate_unclear(&a, &[0, 1, 0], &[1, 0, 1]).unwrap();
        assert_eq!(u, vec![0, 0, 0]);
    }

    #[test]
    fn iteration_count_within_bound() {
        for m in 1..12 {
            let a = chain(m);
            let mut seed = vec![0u8; m];
            seed[m - 1] = 1;
            let (u, iters) = propagate_unclear_counted(&a, &seed, &vec![1; m]).unwrap();
            assert_eq!(u, vec![1; m]);
            assert!(iters <= m, "m={m} took {iters}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = chain(3);
        assert!(matches!(
            propagate_unclear(&a, &[1, 0], &[1, 1, 1]),
            Err(ClearanceError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn episode_start_clears_agent_room_only() {
        let text = "[map]\n#############\n#A..+...+...#\n#############\n";
        let s = parse_scenario(text).unwrap();
        let c = recompute_clearance(&s.plan, &[1, 1, 1], [0usize].into_iter(), [].into_iter());
        assert_eq!(c.unclear, vec![0, 1, 1]);
    }

    #[test]
    fn enemy_keeps_contested_room_unclear_without_leaking() {
        let text = "[map]\n#############\n#A..+..E+...#\n#############\n";
        let s = parse_scenario(text).unwrap();
        // Agent and enemy share room 1; rooms 0 and 2 were already clear.
        let c = recompute_clearance(&s.plan, &[0, 1, 0], [1usize].into_iter(), [1usize].into_iter());
        assert_eq!(c.unclear, vec![0, 1, 0]);
        assert_eq!(c.unoccupied, vec![1, 0, 1]);
    }

    #[test]
    fn matrix_and_bfs_agree_on_small_cases() {
        let a = AdjacencyMatrix::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]);
        for seed_bits in 0..32u32 {
            for v_bits in 0..32u32 {
                let seed: Vec<u8> = (0..5).map(|i| ((seed_bits >> i) & 1) as u8).collect();
                let v: Vec<u8> = (0..5).map(|i| ((v_bits >> i) & 1) as u8).collect();
                let lhs = propagate_unclear(&a, &seed, &v).unwrap();
                let rhs = oracle_propagate_bfs(&a, &seed, &v).unwrap();
                assert_eq!(lhs, rhs, "seed={seed:?} v={v:?}");
            }
        }
    }
}
