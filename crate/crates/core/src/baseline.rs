//! Flat joint-action baseline: the whole team is a single learner whose
//! action is the Cartesian product of per-agent primitive actions and
//! whose state is the global world key. Uses the same engine, reward, and
//! tabular update as the feudal stack — only the factorization differs.

use alloc::vec::Vec;

use crate::engine::{PrimitiveAction, WorldState};
use crate::floorplan::Scenario;

/// Mixed-radix bijection between per-agent action tuples and
/// `[0, k^n)`, agent 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    pub n_agents: usize,
    pub per_agent: Vec<PrimitiveAction>,
}

impl JointActionSpace {
    /// Movement-only maps get the four moves; anything with combat keeps
    /// the full primitive set.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let per_agent: Vec<PrimitiveAction> = if scenario.enemies.is_empty() {
            alloc::vec![
                PrimitiveAction::MoveNorth,
                PrimitiveAction::MoveSouth,
                PrimitiveAction::MoveEast,
                PrimitiveAction::MoveWest,
            ]
        } else {
            PrimitiveAction::ALL.to_vec()
        };
        JointActionSpace { n_agents: scenario.agent_spawns.len(), per_agent }
    }

    pub fn joint_count(&self) -> usize {
        self.per_agent.len().pow(self.n_agents as u32)
    }

    /// Encode one sub-action index per agent into a joint action id.
    pub fn encode(&self, per_agent_indices: &[usize]) -> usize {
        assert_eq!(per_agent_indices.len(), self.n_agents);
        let k = self.per_agent.len();
        let mut id = 0;
        for &a in per_agent_indices {
            assert!(a < k);
            id = id * k + a;
        }
        id
    }

    /// Decode a joint action id into one primitive action per agent.
    /// `None` when the id is out of range.
    pub fn decode(&self, joint: usize) -> Option<Vec<PrimitiveAction>> {
        if joint >= self.joint_count() {
            return None;
        }
        let k = self.per_agent.len();
        let mut rest = joint;
        let mut out = alloc::vec![PrimitiveAction::Wait; self.n_agents];
        for slot in (0..self.n_agents).rev() {
            out[slot] = self.per_agent[rest % k];
            rest /= k;
        }
        Some(out)
    }
}

/// Canonical global state key: living agents' cells sorted row-major
/// (agents are interchangeable), dead slots marked, then the unclear
/// vector. Any clearance change yields a different key.
pub fn joint_state_key(world: &WorldState) -> Vec<i32> {
    let mut cells: Vec<(i32, i32)> = world
        .agents
        .iter()
        .filter(|a| a.alive)
        .map(|a| (a.cell.y as i32, a.cell.x as i32))
        .collect();
    cells.sort_unstable();
    let mut key = Vec::with_capacity(2 * world.agents.len() + world.clearance.unclear.len());
    for (y, x) in &cells {
        key.push(*x);
        key.push(*y);
    }
    for _ in cells.len()..world.agents.len() {
        key.push(-1);
        key.push(-1);
    }
    key.extend(world.clearance.unclear.iter().map(|&u| u as i32));
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::reset;
    use crate::floorplan::parse_scenario;

    #[test]
    fn two_agents_four_moves_is_sixteen_actions() {
        let s = parse_scenario("[map]\n######\n#AA+.#\n######\n").unwrap();
        let space = JointActionSpace::for_scenario(&s);
        assert_eq!(space.joint_count(), 16);
    }

    #[test]
    fn three_agents_full_set_is_216_actions() {
        let s = parse_scenario("[map]\n########\n#AAA+.E#\n########\n").unwrap();
        let space = JointActionSpace::for_scenario(&s);
        assert_eq!(space.joint_count(), 216);
    }

    #[test]
    fn encode_decode_roundtrip_exhaustively() {
        for n in 1..=3usize {
            let space = JointActionSpace {
                n_agents: n,
                per_agent: PrimitiveAction::ALL.to_vec(),
            };
            for joint in 0..space.joint_count() {
                let actions = space.decode(joint).unwrap();
                let back: Vec<usize> = actions
                    .iter()
                    .map(|a| space.per_agent.iter().position(|p| p == a).unwrap())
                    .collect();
                assert_eq!(space.encode(&back), joint);
            }
            assert!(space.decode(space.joint_count()).is_none());
        }
    }

    #[test]
    fn key_is_permutation_invariant_and_tracks_clearance() {
        let s = parse_scenario("[map]\n#######\n#AA.+.#\n#######\n").unwrap();
        let w = reset(&s);
        let mut swapped = w.clone();
        swapped.agents[0].cell = w.agents[1].cell;
        swapped.agents[1].cell = w.agents[0].cell;
        assert_eq!(joint_state_key(&w), joint_state_key(&swapped));

        let mut cleared = w.clone();
        cleared.clearance.unclear[1] = 0;
        assert_ne!(joint_state_key(&w), joint_state_key(&cleared));
    }
}
