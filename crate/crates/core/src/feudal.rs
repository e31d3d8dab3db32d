//! The two-level command hierarchy: the order vocabulary and lifecycle,
//! commander and agent observation encodings, reward hiding, the
//! order-sync rule variant, and the scripted agent policy.
//!
//! Orders name a door of the agent's current room (or tell it to wait).
//! An order resolves exactly once: completed, failed by leaving through
//! the wrong door, or failed by running out of time. Agents are rewarded
//! purely by order outcome and never see the environment reward; the
//! commander sees only environment reward, accumulated between its
//! decisions.
//!
//! Under the order-sync ruleset a door order issued to an agent that is
//! not yet next to the door means "go to the door but not through it";
//! only an agent already by the door is sent through. This lets the
//! commander stage agents on both sides of a breach and commit them in
//! the same step.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{line_of_sight, PrimitiveAction, WorldState};
use crate::floorplan::{CellKind, Coord, DoorId, RoomId, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    ThroughDoor(DoorId),
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub kind: OrderKind,
    pub issued_at: u32,
    pub deadline: u32,
    /// Room the agent occupied when the order was issued.
    pub origin_room: RoomId,
    /// Whether a door order means passing through (vs. only reaching the
    /// door). Always true outside the order-sync ruleset.
    pub pass_through: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderOutcome {
    InProgress,
    Completed,
    FailedWrongDoor,
    FailedTimeout,
}

impl OrderOutcome {
    pub fn is_terminal(self) -> bool {
        self != OrderOutcome::InProgress
    }
}

/// Order reward: the only reward stream the agents ever see.
pub fn agent_reward(outcome: OrderOutcome) -> f64 {
    match outcome {
        OrderOutcome::Completed => 10.0,
        OrderOutcome::FailedWrongDoor => -10.0,
        OrderOutcome::InProgress | OrderOutcome::FailedTimeout => 0.0,
    }
}

/// Step budget for completing an order in `room`: generous relative to the
/// room size, never less than 20 steps.
pub fn order_budget(scenario: &Scenario, room: RoomId) -> u32 {
    let r = &scenario.plan.rooms[room];
    let half_perimeter = (r.bbox_width() + r.bbox_height()) as u32;
    (4 * half_perimeter).max(20)
}

/// Whether `cell` counts as "by the door": on the door cell or 4-adjacent
/// to it.
pub fn by_door(scenario: &Scenario, cell: Coord, door: DoorId) -> bool {
    let d = scenario.plan.doors[door].cell;
    cell == d || cell.is_adjacent4(d)
}

/// Validity mask over the commander's order slots for this agent:
/// `d_max` door slots followed by the always-valid wait slot. Slot `k` is
/// valid iff the agent's current room has a k-th door.
pub fn order_space(scenario: &Scenario, world: &WorldState, agent_id: usize) -> Vec<bool> {
    let d_max = scenario.dims.d_max;
    let mut mask = vec![false; d_max + 1];
    let room = &scenario.plan.rooms[world.agents[agent_id].room];
    for slot in 0..room.doors.len() {
        mask[slot] = true;
    }
    mask[d_max] = true;
    mask
}

/// The door named by an order slot of `room`, or `None` for the wait slot
/// and for slots past the room's door count.
pub fn order_slot_door(scenario: &Scenario, room: RoomId, slot: usize) -> Option<DoorId> {
    if slot >= scenario.dims.d_max {
        return None;
    }
    scenario.plan.rooms[room].doors.get(slot).copied()
}

/// Build the order an action slot denotes for this agent, right now.
/// Panics if the slot is invalid for the agent's room (callers mask first).
pub fn make_order(scenario: &Scenario, world: &WorldState, agent_id: usize, slot: usize) -> Order {
    let agent = &world.agents[agent_id];
    let issued_at = world.timestep;
    let deadline = issued_at + order_budget(scenario, agent.room);
    match order_slot_door(scenario, agent.room, slot) {
        Some(door) => {
            let pass_through = !scenario.order_sync || by_door(scenario, agent.cell, door);
            Order {
                kind: OrderKind::ThroughDoor(door),
                issued_at,
                deadline,
                origin_room: agent.room,
                pass_through,
            }
        }
        None => {
            assert_eq!(slot, scenario.dims.d_max, "invalid door slot {slot} for room {}", agent.room);
            Order {
                kind: OrderKind::Wait,
                issued_at,
                deadline,
                origin_room: agent.room,
                pass_through: true,
            }
        }
    }
}

fn enemy_in_room(world: &WorldState, room: RoomId) -> bool {
    world.enemies.iter().any(|e| e.alive && e.room == room)
}

/// Terminal outcome for a wait order when a re-issuance wave ends it: kept
/// watch successfully only if the room is free of living enemies.
pub fn wait_outcome(world: &WorldState, room: RoomId) -> OrderOutcome {
    if enemy_in_room(world, room) {
        OrderOutcome::FailedTimeout
    } else {
        OrderOutcome::Completed
    }
}

/// Evaluate an active order after a step.
///
/// Door orders complete when the agent crosses the named door into the far
/// room with no living enemy left behind in the origin room; crossing any
/// other door out of the origin fails the order. Under order-sync, an
/// order issued away from the door instead completes on reaching a cell by
/// the door. Deadlines resolve to a timeout (worth nothing, unlike a wrong
/// door). A dead agent's order also ends as a timeout.
pub fn order_status(scenario: &Scenario, world: &WorldState, agent_id: usize, order: &Order) -> OrderOutcome {
    let agent = &world.agents[agent_id];
    if !agent.alive {
        return OrderOutcome::FailedTimeout;
    }
    match order.kind {
        OrderKind::Wait => {
            if agent.room != order.origin_room {
                OrderOutcome::FailedWrongDoor
            } else if world.timestep >= order.deadline {
                wait_outcome(world, order.origin_room)
            } else {
                OrderOutcome::InProgress
            }
        }
        OrderKind::ThroughDoor(door) => {
            if let Some(cross) = agent.crossed.filter(|c| c.step == world.timestep) {
                if cross.from == order.origin_room {
                    if cross.door == door && order.pass_through {
                        if enemy_in_room(world, order.origin_room) {
                            // Passed the right door but left an enemy
                            // behind; not done yet.
                            OrderOutcome::InProgress
                        } else {
                            OrderOutcome::Completed
                        }
                    } else {
                        OrderOutcome::FailedWrongDoor
                    }
                } else if agent.room == order.origin_room {
                    // Returned to the origin; still working on it.
                    OrderOutcome::InProgress
                } else {
                    OrderOutcome::FailedWrongDoor
                }
            } else if !order.pass_through
                && agent.room == order.origin_room
                && by_door(scenario, agent.cell, door)
            {
                OrderOutcome::Completed
            } else if world.timestep >= order.deadline {
                OrderOutcome::FailedTimeout
            } else {
                OrderOutcome::InProgress
            }
        }
    }
}

/// Fixed-size numeric observation plus its canonical discrete key.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsVec {
    pub values: Vec<f64>,
    pub key: Vec<i32>,
}

pub fn agent_obs_len(scenario: &Scenario) -> usize {
    let d = scenario.dims;
    d.r_max * d.r_max + 2 + 3 * d.d_max + 3 * d.e_max + (d.d_max + 1)
}

pub fn commander_obs_len(scenario: &Scenario) -> usize {
    let m = scenario.plan.room_count();
    let d = scenario.dims.d_max;
    let n = scenario.agent_spawns.len();
    let sync = if scenario.order_sync { 2 * scenario.plan.doors.len() } else { 0 };
    2 * m + d + n * (m + d + 1) + sync
}

/// Commander action space: one slot per possible door plus wait.
pub fn commander_action_count(scenario: &Scenario) -> usize {
    scenario.dims.d_max + 1
}

/// Local, room-scoped agent view: the walkable footprint of the current
/// room anchored to its bounding box, the agent's position in it, door
/// slots, visible enemies in the room, and the current order. Everything
/// in it is integral, so the discrete key is the vector itself.
pub fn encode_agent_obs(scenario: &Scenario, world: &WorldState, agent_id: usize, order: &Order) -> ObsVec {
    let dims = scenario.dims;
    let plan = &scenario.plan;
    let agent = &world.agents[agent_id];
    let room = &plan.rooms[agent.room];
    let r = dims.r_max;
    let mut values = Vec::with_capacity(agent_obs_len(scenario));

    for gy in 0..r {
        for gx in 0..r {
            let cell = Coord::new(room.min.x + gx, room.min.y + gy);
            let walkable = gx < room.bbox_width()
                && gy < room.bbox_height()
                && plan.room_of(cell) == Some(agent.room);
            values.push(if walkable { 1.0 } else { 0.0 });
        }
    }

    let rel = |c: Coord| {
        (
            c.x as isize - room.min.x as isize,
            c.y as isize - room.min.y as isize,
        )
    };
    let (sx, sy) = rel(agent.cell);
    values.push(sx as f64);
    values.push(sy as f64);

    for slot in 0..dims.d_max {
        match room.doors.get(slot) {
            Some(&d) => {
                let (dx, dy) = rel(plan.doors[d].cell);
                values.push(dx as f64);
                values.push(dy as f64);
                values.push(1.0);
            }
            None => values.extend_from_slice(&[0.0, 0.0, 0.0]),
        }
    }

    let mut seen = 0;
    for e in world.enemies.iter().filter(|e| e.alive) {
        if seen == dims.e_max {
            break;
        }
        if e.room == agent.room && line_of_sight(&plan.grid, agent.cell, e.cell) {
            let (ex, ey) = rel(e.cell);
            values.push(ex as f64);
            values.push(ey as f64);
            values.push(1.0);
            seen += 1;
        }
    }
    for _ in seen..dims.e_max {
        values.extend_from_slice(&[0.0, 0.0, 0.0]);
    }

    let order_slot = match order.kind {
        OrderKind::ThroughDoor(d) => plan
            .door_slot(order.origin_room, d)
            .expect("order names a door of its origin room"),
        OrderKind::Wait => dims.d_max,
    };
    for slot in 0..=dims.d_max {
        values.push(if slot == order_slot { 1.0 } else { 0.0 });
    }

    debug_assert_eq!(values.len(), agent_obs_len(scenario));
    let key = values.iter().map(|&v| v as i32).collect();
    ObsVec { values, key }
}

/// Global commander view at a decision point: which rooms are clear, where
/// the acting agent is (room plus normalized in-room distances to each of
/// its doors), what everyone else is doing, and — under order-sync — which
/// doors have agents staged by them or already committed through them.
pub fn encode_commander_obs(
    scenario: &Scenario,
    world: &WorldState,
    orders: &[Option<Order>],
    acting: Option<usize>,
) -> ObsVec {
    let plan = &scenario.plan;
    let m = plan.room_count();
    let d_max = scenario.dims.d_max;
    let n = scenario.agent_spawns.len();
    let mut values = Vec::with_capacity(commander_obs_len(scenario));
    let mut key: Vec<i32> = Vec::new();

    for i in 0..m {
        let clear = world.clearance.unclear[i] == 0;
        values.push(if clear { 1.0 } else { 0.0 });
        key.push(clear as i32);
    }

    let acting_alive = acting.filter(|&id| world.agents[id].alive);
    match acting_alive {
        Some(id) => {
            let agent = &world.agents[id];
            let room = &plan.rooms[agent.room];
            for i in 0..m {
                values.push(if i == agent.room { 1.0 } else { 0.0 });
            }
            key.push(agent.room as i32);
            let norm = room.diameter.max(1) as f64;
            for slot in 0..d_max {
                match room.door_distance(&plan.grid, slot, agent.cell) {
                    Some(dist) => {
                        values.push(dist as f64 / norm);
                        key.push(dist as i32);
                    }
                    None => {
                        values.push(0.0);
                        key.push(-1);
                    }
                }
            }
        }
        None => {
            values.extend(core::iter::repeat(0.0).take(m + d_max));
            key.push(-1);
            key.extend(core::iter::repeat(-1).take(d_max));
        }
    }

    for j in 0..n {
        let agent = &world.agents[j];
        let skip = Some(j) == acting || !agent.alive;
        if skip {
            values.extend(core::iter::repeat(0.0).take(m + d_max + 1));
            key.push(-1);
            key.push(-1);
            continue;
        }
        for i in 0..m {
            values.push(if i == agent.room { 1.0 } else { 0.0 });
        }
        key.push(agent.room as i32);
        let slot = orders[j].as_ref().map(|o| match o.kind {
            OrderKind::ThroughDoor(d) => plan
                .door_slot(o.origin_room, d)
                .expect("order names a door of its origin room"),
            OrderKind::Wait => d_max,
        });
        for s in 0..=d_max {
            values.push(if slot == Some(s) { 1.0 } else { 0.0 });
        }
        key.push(slot.map_or(-1, |s| s as i32));
    }

    if scenario.order_sync {
        for door in &plan.doors {
            let waiting = world
                .living_agents()
                .any(|a| a.cell.is_adjacent4(door.cell));
            let ordered = (0..n).any(|j| {
                world.agents[j].alive
                    && matches!(orders[j], Some(Order { kind: OrderKind::ThroughDoor(d), .. }) if d == door.id)
            });
            values.push(if waiting { 1.0 } else { 0.0 });
            values.push(if ordered { 1.0 } else { 0.0 });
            key.push(waiting as i32);
            key.push(ordered as i32);
        }
    }

    debug_assert_eq!(values.len(), commander_obs_len(scenario));
    ObsVec { values, key }
}

/// Hand-written order-following policy: clear the current room of visible
/// enemies first, then walk the shortest in-room path to the ordered door
/// and through it (or stop beside it when the order only asks for that).
pub fn scripted_agent_policy(
    scenario: &Scenario,
    world: &WorldState,
    agent_id: usize,
    order: &Order,
) -> PrimitiveAction {
    let plan = &scenario.plan;
    let agent = &world.agents[agent_id];

    let enemy_visible = world
        .enemies
        .iter()
        .any(|e| e.alive && e.room == agent.room && line_of_sight(&plan.grid, agent.cell, e.cell));
    if enemy_visible {
        return PrimitiveAction::Shoot;
    }

    let door = match order.kind {
        OrderKind::Wait => return PrimitiveAction::Wait,
        OrderKind::ThroughDoor(d) => d,
    };

    let moves = [
        PrimitiveAction::MoveNorth,
        PrimitiveAction::MoveSouth,
        PrimitiveAction::MoveEast,
        PrimitiveAction::MoveWest,
    ];
    let step_to = |action: PrimitiveAction| -> Option<Coord> {
        let (dx, dy) = action.delta().unwrap();
        let x = agent.cell.x as isize + dx;
        let y = agent.cell.y as isize + dy;
        if x < 0 || y < 0 {
            return None;
        }
        Some(Coord::new(x as usize, y as usize))
    };

    if agent.cell == plan.doors[door].cell {
        // Step off the door into the far room.
        for action in moves {
            if let Some(next) = step_to(action) {
                if plan.grid.kind(next) == CellKind::Floor
                    && plan.room_of(next).is_some_and(|r| r != order.origin_room)
                    && !occupied(world, next)
                {
                    return action;
                }
            }
        }
        return PrimitiveAction::Wait;
    }

    if !order.pass_through && by_door(scenario, agent.cell, door) {
        // Staged by the door; hold until committed.
        return PrimitiveAction::Wait;
    }

    let room = &plan.rooms[order.origin_room];
    let slot = match plan.door_slot(order.origin_room, door) {
        Some(s) => s,
        None => return PrimitiveAction::Wait,
    };
    let here = match room.door_distance(&plan.grid, slot, agent.cell) {
        Some(d) => d,
        None => return PrimitiveAction::Wait,
    };
    for action in moves {
        if let Some(next) = step_to(action) {
            if room.door_distance(&plan.grid, slot, next) == Some(here.wrapping_sub(1))
                && !occupied(world, next)
            {
                return action;
            }
        }
    }
    PrimitiveAction::Wait
}

fn occupied(world: &WorldState, cell: Coord) -> bool {
    world.agents.iter().any(|a| a.alive && a.cell == cell)
        || world.enemies.iter().any(|e| e.alive && e.cell == cell)
        || world.civilians.iter().any(|c| c.alive && c.cell == cell)
}
