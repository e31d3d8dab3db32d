//! The physical simulation: primitive actions, movement, line-of-sight
//! combat, scripted enemies, civilians, per-step reward, and termination.
//!
//! Combat resolves simultaneously: every shot fired in a step — by agents
//! and enemies alike — picks its target from the snapshot taken at the
//! start of the step, and all damage lands together. Two agents firing at
//! a two-hit enemy therefore kill it in one exchange, while a lone agent
//! trading with the same enemy destroys it on the second exchange and dies
//! to the enemy's simultaneous return shot.
//!
//! Step resolution order: combat (agents and enemies), enemy movement,
//! agent movement, clearance recomputation, termination, reward.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::clearance::{recompute_clearance, ClearanceState};
use crate::floorplan::{CellKind, Coord, DoorId, EnemyBehavior, Grid, RewardConfig, RoomId, Scenario};

/// The six primitive actions available to an agent each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveAction {
    Wait,
    Shoot,
    MoveNorth,
    MoveSouth,
    MoveEast,
    MoveWest,
}

impl PrimitiveAction {
    pub const COUNT: usize = 6;
    pub const ALL: [PrimitiveAction; 6] = [
        PrimitiveAction::Wait,
        PrimitiveAction::Shoot,
        PrimitiveAction::MoveNorth,
        PrimitiveAction::MoveSouth,
        PrimitiveAction::MoveEast,
        PrimitiveAction::MoveWest,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<PrimitiveAction> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveAction::Wait => "wait",
            PrimitiveAction::Shoot => "shoot",
            PrimitiveAction::MoveNorth => "move_north",
            PrimitiveAction::MoveSouth => "move_south",
            PrimitiveAction::MoveEast => "move_east",
            PrimitiveAction::MoveWest => "move_west",
        }
    }

    pub fn from_name(name: &str) -> Option<PrimitiveAction> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Movement delta; north is up (decreasing y).
    pub fn delta(self) -> Option<(isize, isize)> {
        match self {
            PrimitiveAction::MoveNorth => Some((0, -1)),
            PrimitiveAction::MoveSouth => Some((0, 1)),
            PrimitiveAction::MoveEast => Some((1, 0)),
            PrimitiveAction::MoveWest => Some((-1, 0)),
            _ => None,
        }
    }
}

/// Record of a room transition: set when the agent steps off a door cell
/// onto the floor of a different room.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossing {
    pub door: DoorId,
    pub from: RoomId,
    /// Timestep on which the transition completed.
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: usize,
    pub cell: Coord,
    pub hp: u32,
    pub alive: bool,
    /// Room membership. While standing on a door cell the agent still
    /// counts in the room it came from; membership flips on the first
    /// floor cell of the next room.
    pub room: RoomId,
    pub crossed: Option<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnemyState {
    pub id: usize,
    pub cell: Coord,
    pub hp: u32,
    pub alive: bool,
    pub room: RoomId,
    /// Index of the current waypoint for routed behaviors.
    pub route_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CivilianState {
    pub cell: Coord,
    pub alive: bool,
    pub room: RoomId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneReason {
    None,
    Cleared,
    StepLimit,
    AllAgentsDead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    AgentDied(usize),
    EnemyDied(usize),
    CivilianDied,
    RoomCleared(RoomId),
    RoomUncleared(RoomId),
}

/// Full mutable simulation state for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub timestep: u32,
    pub agents: Vec<AgentState>,
    pub enemies: Vec<EnemyState>,
    pub civilians: Vec<CivilianState>,
    pub clearance: ClearanceState,
    pub done: bool,
    pub done_reason: DoneReason,
    /// Events emitted by the most recent step.
    pub step_events: Vec<Event>,
}

impl WorldState {
    pub fn living_agents(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.alive)
    }

    pub fn living_enemies(&self) -> impl Iterator<Item = &EnemyState> {
        self.enemies.iter().filter(|e| e.alive)
    }

    pub fn civilians_alive(&self) -> bool {
        self.civilians.iter().all(|c| c.alive)
    }

    fn cell_occupied(&self, cell: Coord) -> bool {
        self.agents.iter().any(|a| a.alive && a.cell == cell)
            || self.enemies.iter().any(|e| e.alive && e.cell == cell)
            || self.civilians.iter().any(|c| c.alive && c.cell == cell)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("env_step called on a finished episode")]
    EpisodeDone,
    #[error("expected {expected} actions (one per agent), got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub events: Vec<Event>,
}

/// Place every entity at its spawn with configured hit points and
/// initialize clearance: all rooms start unclear except those the agents
/// stand in. Fully deterministic.
pub fn reset(scenario: &Scenario) -> WorldState {
    let plan = &scenario.plan;
    let agents: Vec<AgentState> = scenario
        .agent_spawns
        .iter()
        .enumerate()
        .map(|(id, &cell)| AgentState {
            id,
            cell,
            hp: scenario.agent_hp,
            alive: true,
            room: plan.room_of(cell).expect("spawns are floor cells"),
            crossed: None,
        })
        .collect();
    let enemies: Vec<EnemyState> = scenario
        .enemies
        .iter()
        .enumerate()
        .map(|(id, spec)| EnemyState {
            id,
            cell: spec.spawn,
            hp: spec.hp,
            alive: true,
            room: plan.room_of(spec.spawn).expect("spawns are floor cells"),
            route_pos: 0,
        })
        .collect();
    let civilians: Vec<CivilianState> = scenario
        .civilians
        .iter()
        .map(|&cell| CivilianState {
            cell,
            alive: true,
            room: plan.room_of(cell).expect("civilians stand on floor cells"),
        })
        .collect();

    let prev = vec![1u8; plan.room_count()];
    let clearance = recompute_clearance(
        plan,
        &prev,
        agents.iter().filter(|a| a.alive).map(|a| a.room),
        enemies.iter().filter(|e| e.alive).map(|e| e.room),
    );

    // A plan whose rooms are all agent-occupied from the start is already
    // cleared; the done flag must agree with the zero unclear vector.
    let done = clearance.all_clear();
    WorldState {
        timestep: 0,
        agents,
        enemies,
        civilians,
        clearance,
        done,
        done_reason: if done { DoneReason::Cleared } else { DoneReason::None },
        step_events: Vec::new(),
    }
}

/// True iff the straight segment between the two cell centers crosses no
/// wall cell. Door cells do not block sight. The traversal is a supercover:
/// when the ray grazes a lattice corner, all four touching cells count.
pub fn line_of_sight(grid: &Grid, a: Coord, b: Coord) -> bool {
    supercover_visit(a, b, |c| grid.kind(c) != CellKind::Wall)
}

/// Visit every cell touched by the segment from the center of `a` to the
/// center of `b`, in order. Stops early (returning false) when the visitor
/// rejects a cell.
pub fn supercover_visit(a: Coord, b: Coord, mut keep: impl FnMut(Coord) -> bool) -> bool {
    let (ax, ay) = (a.x as i64, a.y as i64);
    let (bx, by) = (b.x as i64, b.y as i64);
    let dx = bx - ax;
    let dy = by - ay;
    let (sx, sy) = (dx.signum(), dy.signum());
    let (adx, ady) = (dx.abs(), dy.abs());

    let mut x = ax;
    let mut y = ay;
    if !keep(Coord::new(x as usize, y as usize)) {
        return false;
    }
    let mut ix = 0i64;
    let mut iy = 0i64;
    while ix < adx || iy < ady {
        // Compare the next vertical and horizontal boundary crossing times
        // (scaled by 2*adx*ady to stay in integers).
        let tx = if adx > 0 { (1 + 2 * ix) * ady } else { i64::MAX };
        let ty = if ady > 0 { (1 + 2 * iy) * adx } else { i64::MAX };
        if tx == ty {
            // Exact corner: the ray touches both side cells and the
            // diagonal cell.
            if !keep(Coord::new((x + sx) as usize, y as usize)) {
                return false;
            }
            if !keep(Coord::new(x as usize, (y + sy) as usize)) {
                return false;
            }
            x += sx;
            y += sy;
            ix += 1;
            iy += 1;
        } else if tx < ty {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        if !keep(Coord::new(x as usize, y as usize)) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Faction {
    Blue,
    Red,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotTarget {
    Agent(usize),
    Enemy(usize),
    Civilian(usize),
}

/// Pick the nearest visible living opposing entity for a shooter of the
/// given faction, ties broken by lowest id. `None` when nothing is visible.
pub fn select_shot_target(
    grid: &Grid,
    world: &WorldState,
    shooter_cell: Coord,
    faction: Faction,
) -> Option<ShotTarget> {
    let mut best: Option<(u64, usize)> = None;
    match faction {
        Faction::Blue => {
            for e in world.enemies.iter().filter(|e| e.alive) {
                if line_of_sight(grid, shooter_cell, e.cell) {
                    let key = (shooter_cell.dist_sq(e.cell), e.id);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
            }
            best.map(|(_, id)| ShotTarget::Enemy(id))
        }
        Faction::Red => {
            for a in world.agents.iter().filter(|a| a.alive) {
                if line_of_sight(grid, shooter_cell, a.cell) {
                    let key = (shooter_cell.dist_sq(a.cell), a.id);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
            }
            best.map(|(_, id)| ShotTarget::Agent(id))
        }
    }
}

/// Resolve a single shot immediately against the current world: the nearest
/// visible opponent loses one hit point. Returns the resulting events.
/// Inside [`env_step`] all shots of a step share one snapshot instead.
pub fn resolve_shot(
    scenario: &Scenario,
    world: &mut WorldState,
    shooter_cell: Coord,
    faction: Faction,
) -> Vec<Event> {
    let target = select_shot_target(&scenario.plan.grid, world, shooter_cell, faction);
    let mut events = Vec::new();
    if let Some(t) = target {
        apply_hit(world, t, &mut events);
    }
    events
}

fn apply_hit(world: &mut WorldState, target: ShotTarget, events: &mut Vec<Event>) {
    match target {
        ShotTarget::Agent(id) => {
            let a = &mut world.agents[id];
            if a.hp > 0 {
                a.hp -= 1;
                if a.hp == 0 && a.alive {
                    a.alive = false;
                    events.push(Event::AgentDied(id));
                }
            }
        }
        ShotTarget::Enemy(id) => {
            let e = &mut world.enemies[id];
            if e.hp > 0 {
                e.hp -= 1;
                if e.hp == 0 && e.alive {
                    e.alive = false;
                    events.push(Event::EnemyDied(id));
                }
            }
        }
        ShotTarget::Civilian(idx) => {
            let c = &mut world.civilians[idx];
            if c.alive {
                c.alive = false;
                events.push(Event::CivilianDied);
            }
        }
    }
}

enum EnemyDecision {
    Hold,
    Fire(ShotTarget),
    Advance,
}

/// Advance the world by one step.
///
/// `actions` holds one entry per agent slot; entries for dead agents are
/// ignored. Invalid moves (into walls or occupied cells) degrade to wait.
pub fn env_step(
    scenario: &Scenario,
    world: &mut WorldState,
    actions: &[PrimitiveAction],
) -> Result<StepResult, EngineError> {
    if world.done {
        return Err(EngineError::EpisodeDone);
    }
    if actions.len() != world.agents.len() {
        return Err(EngineError::ActionCountMismatch {
            expected: world.agents.len(),
            got: actions.len(),
        });
    }

    let plan = &scenario.plan;
    let grid = &plan.grid;
    world.timestep += 1;
    let mut events: Vec<Event> = Vec::new();

    // -- Combat: all targeting decisions read the start-of-step snapshot,
    // and every shot lands regardless of what else happens this step.
    let snapshot = world.clone();
    let mut shots: Vec<ShotTarget> = Vec::new();
    for agent in snapshot.agents.iter().filter(|a| a.alive) {
        if actions[agent.id] == PrimitiveAction::Shoot {
            if let Some(t) = select_shot_target(grid, &snapshot, agent.cell, Faction::Blue) {
                shots.push(t);
            }
        }
    }
    let mut enemy_decisions: Vec<EnemyDecision> = Vec::with_capacity(snapshot.enemies.len());
    for enemy in &snapshot.enemies {
        if !enemy.alive {
            enemy_decisions.push(EnemyDecision::Hold);
            continue;
        }
        let spec = &scenario.enemies[enemy.id];
        let decision = match &spec.behavior {
            EnemyBehavior::Stationary => stationary_decision(grid, &snapshot, enemy.cell),
            EnemyBehavior::Path(route) => {
                if enemy.route_pos + 1 < route.len() {
                    EnemyDecision::Advance
                } else {
                    stationary_decision(grid, &snapshot, enemy.cell)
                }
            }
            EnemyBehavior::PathThenFire(route) => {
                let victim = snapshot
                    .civilians
                    .iter()
                    .position(|c| c.alive && c.room == enemy.room);
                if let Some(idx) = victim {
                    EnemyDecision::Fire(ShotTarget::Civilian(idx))
                } else if enemy.route_pos + 1 < route.len() {
                    EnemyDecision::Advance
                } else {
                    stationary_decision(grid, &snapshot, enemy.cell)
                }
            }
        };
        enemy_decisions.push(decision);
    }
    for decision in &enemy_decisions {
        if let EnemyDecision::Fire(t) = decision {
            shots.push(*t);
        }
    }
    for target in shots {
        apply_hit(world, target, &mut events);
    }

    // -- Enemy movement: one cell along the route, in id order. A blocked
    // waypoint means the enemy holds and retries next step.
    for (id, decision) in enemy_decisions.iter().enumerate() {
        if !matches!(decision, EnemyDecision::Advance) || !world.enemies[id].alive {
            continue;
        }
        let route = scenario.enemies[id]
            .behavior
            .route()
            .expect("advance decisions only exist for routed enemies");
        let next = route[world.enemies[id].route_pos + 1];
        if !world.cell_occupied(next) {
            let enemy = &mut world.enemies[id];
            enemy.cell = next;
            enemy.route_pos += 1;
            if grid.kind(next) == CellKind::Floor {
                enemy.room = plan.room_of(next).unwrap();
            }
        }
    }

    // -- Agent movement, in id order against current occupancy. Swaps
    // deadlock into two waits; vacated cells may be taken by later ids.
    for id in 0..world.agents.len() {
        if !world.agents[id].alive {
            continue;
        }
        let Some((dx, dy)) = actions[id].delta() else { continue };
        let cur = world.agents[id].cell;
        let nx = cur.x as isize + dx;
        let ny = cur.y as isize + dy;
        if nx < 0 || ny < 0 {
            continue;
        }
        let next = Coord::new(nx as usize, ny as usize);
        if !grid.is_walkable(next) || world.cell_occupied(next) {
            continue;
        }
        let prev_cell = cur;
        let agent = &mut world.agents[id];
        agent.cell = next;
        if grid.kind(next) == CellKind::Floor {
            let new_room = plan.room_of(next).unwrap();
            if new_room != agent.room {
                let door = plan
                    .door_at(prev_cell)
                    .expect("room transitions pass through a door cell");
                agent.crossed = Some(Crossing { door, from: agent.room, step: world.timestep });
                agent.room = new_room;
            }
        }
    }

    // -- Clearance.
    let prev_unclear = world.clearance.unclear.clone();
    world.clearance = recompute_clearance(
        plan,
        &prev_unclear,
        world.agents.iter().filter(|a| a.alive).map(|a| a.room),
        world.enemies.iter().filter(|e| e.alive).map(|e| e.room),
    );
    for i in 0..plan.room_count() {
        match (prev_unclear[i], world.clearance.unclear[i]) {
            (1, 0) => events.push(Event::RoomCleared(i)),
            (0, 1) => events.push(Event::RoomUncleared(i)),
            _ => {}
        }
    }

    // -- Termination. Cleared takes precedence so that `done_reason ==
    // Cleared` holds exactly when the unclear vector is zero.
    if world.clearance.all_clear() {
        world.done = true;
        world.done_reason = DoneReason::Cleared;
    } else if world.agents.iter().all(|a| !a.alive) {
        world.done = true;
        world.done_reason = DoneReason::AllAgentsDead;
    } else if world.timestep >= scenario.step_limit {
        world.done = true;
        world.done_reason = DoneReason::StepLimit;
    }

    let reward = env_reward(scenario, world, &events);
    world.step_events = events.clone();
    Ok(StepResult { reward, events })
}

fn stationary_decision(grid: &Grid, snapshot: &WorldState, cell: Coord) -> EnemyDecision {
    match select_shot_target(grid, snapshot, cell, Faction::Red) {
        Some(t) => EnemyDecision::Fire(t),
        None => EnemyDecision::Hold,
    }
}

/// Environment reward for the step that produced `world` and `events`.
pub fn env_reward(scenario: &Scenario, world: &WorldState, events: &[Event]) -> f64 {
    let m = scenario.plan.room_count() as f64;
    let cleared = world.done_reason == DoneReason::Cleared;
    let clear_rooms = m - world.clearance.unclear_count() as f64;
    let shaping = -1.0 + clear_rooms / m;
    match scenario.reward {
        RewardConfig::Sparse => {
            if cleared {
                scenario.r_complete
            } else {
                0.0
            }
        }
        RewardConfig::Default => {
            if cleared {
                scenario.r_complete
            } else {
                shaping
            }
        }
        RewardConfig::DeathPenalty(p) => {
            let deaths = events.iter().filter(|e| matches!(e, Event::AgentDied(_))).count() as f64;
            let base = if cleared { scenario.r_complete } else { shaping };
            base - p * deaths
        }
        RewardConfig::Civilian => {
            if events.iter().any(|e| matches!(e, Event::CivilianDied)) {
                -scenario.r_complete
            } else if cleared && world.civilians_alive() {
                scenario.r_complete
            } else {
                shaping
            }
        }
    }
}
