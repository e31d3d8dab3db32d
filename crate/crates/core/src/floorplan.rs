//! Building floorplans: grid geometry, the room partition, doors, the
//! room-connectivity matrix, and the text scenario format.
//!
//! A floorplan is an ASCII grid whose walkable cells split into rooms
//! separated by walls and single-cell doors. Rooms and doors get stable,
//! deterministic ids (row-major order of their anchor cells) so that
//! discrete state keys are reproducible across runs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub type RoomId = usize;
pub type DoorId = usize;

/// Grid coordinate; `x` is the column, `y` the row, origin at the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    /// The four orthogonal neighbours, clipped to non-negative coordinates.
    pub fn neighbors4(self) -> impl Iterator<Item = Coord> {
        let deltas: [(isize, isize); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];
        deltas.into_iter().filter_map(move |(dx, dy)| {
            let x = self.x as isize + dx;
            let y = self.y as isize + dy;
            if x < 0 || y < 0 {
                None
            } else {
                Some(Coord::new(x as usize, y as usize))
            }
        })
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// Squared Euclidean distance between cell centers.
    pub fn dist_sq(self, other: Coord) -> u64 {
        let dx = self.x.abs_diff(other.x) as u64;
        let dy = self.y.abs_diff(other.y) as u64;
        dx * dx + dy * dy
    }

    pub fn is_adjacent4(self, other: Coord) -> bool {
        self.manhattan(other) == 1
    }
}

// Row-major ordering: by row first, then column. Room and door ids are
// derived from this order.
impl Ord for Coord {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Coord {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Wall,
    Floor,
    Door,
}

/// Rectangular cell grid with an all-wall outer border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
}

impl Grid {
    /// Build a grid from row-major cells, checking dimensions and the border.
    pub fn new(width: usize, height: usize, cells: Vec<CellKind>) -> Result<Self, ScenarioError> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(ScenarioError::EmptyMap);
        }
        let grid = Grid { width, height, cells };
        for y in 0..height {
            for x in 0..width {
                let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
                if border && grid.kind(Coord::new(x, y)) != CellKind::Wall {
                    return Err(ScenarioError::BorderNotWall { x, y });
                }
            }
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_bounds(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Cell kind at `c`. Out-of-bounds coordinates read as wall.
    pub fn kind(&self, c: Coord) -> CellKind {
        if !self.in_bounds(c) {
            return CellKind::Wall;
        }
        self.cells[c.y * self.width + c.x]
    }

    pub fn is_walkable(&self, c: Coord) -> bool {
        matches!(self.kind(c), CellKind::Floor | CellKind::Door)
    }

    pub fn index(&self, c: Coord) -> usize {
        c.y * self.width + c.x
    }
}

/// A maximal 4-connected region of floor cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Room {
    pub id: RoomId,
    /// Floor cells, sorted row-major.
    pub cells: Vec<Coord>,
    /// Ids of doors on this room's boundary, ascending.
    pub doors: Vec<DoorId>,
    /// Bounding box over floor cells, inclusive.
    pub min: Coord,
    pub max: Coord,
    /// Longest shortest-path between any two in-room cells (doors included).
    pub diameter: u32,
    /// Per door slot: grid-indexed distance field from the door cell through
    /// this room's floor. `u16::MAX` marks cells outside the room.
    dist_to_door: Vec<Vec<u16>>,
}

impl Room {
    pub fn bbox_width(&self) -> usize {
        self.max.x - self.min.x + 1
    }

    pub fn bbox_height(&self) -> usize {
        self.max.y - self.min.y + 1
    }

    /// In-room walking distance from `cell` to the slot-th door of this room.
    /// `None` when `cell` is not part of the room (or not adjacent to it).
    pub fn door_distance(&self, grid: &Grid, slot: usize, cell: Coord) -> Option<u32> {
        let field = self.dist_to_door.get(slot)?;
        let d = field[grid.index(cell)];
        if d == u16::MAX {
            None
        } else {
            Some(d as u32)
        }
    }
}

/// Single-cell opening connecting exactly two rooms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Door {
    pub id: DoorId,
    pub cell: Coord,
    /// The two connected rooms, ascending.
    pub rooms: [RoomId; 2],
}

impl Door {
    pub fn connects(&self, room: RoomId) -> bool {
        self.rooms[0] == room || self.rooms[1] == room
    }

    /// The room on the far side of the door, seen from `room`.
    pub fn other_side(&self, room: RoomId) -> Option<RoomId> {
        if self.rooms[0] == room {
            Some(self.rooms[1])
        } else if self.rooms[1] == room {
            Some(self.rooms[0])
        } else {
            None
        }
    }
}

/// Symmetric, zero-diagonal binary room-connectivity matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    m: usize,
    bits: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn zeros(m: usize) -> Self {
        AdjacencyMatrix { m, bits: vec![0; m * m] }
    }

    /// Entry (i, j) is 1 iff some door connects rooms i and j.
    pub fn from_doors(m: usize, doors: &[Door]) -> Self {
        let mut a = Self::zeros(m);
        for d in doors {
            a.set(d.rooms[0], d.rooms[1]);
        }
        a
    }

    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Self::zeros(m);
        for &(i, j) in edges {
            a.set(i, j);
        }
        a
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        if i != j {
            self.bits[i * self.m + j] = 1;
            self.bits[j * self.m + i] = 1;
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&j| self.get(i, j) == 1)
    }
}

/// Complete static building description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloorPlan {
    pub grid: Grid,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub adjacency: AdjacencyMatrix,
    /// Per grid cell: room id for floor cells, usize::MAX otherwise.
    room_index: Vec<usize>,
    /// Per grid cell: door id for door cells, usize::MAX otherwise.
    door_index: Vec<usize>,
}

impl FloorPlan {
    pub fn from_grid(grid: Grid) -> Result<Self, ScenarioError> {
        let (rooms, doors) = derive_rooms(&grid)?;
        let m = rooms.len();
        let adjacency = AdjacencyMatrix::from_doors(m, &doors);

        // Every room must be reachable; an unreachable room can never be
        // cleared, so the whole scenario would be unwinnable.
        let mut seen = vec![false; m];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(i) = queue.pop() {
            for j in adjacency.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        if let Some(room) = seen.iter().position(|&s| !s) {
            return Err(ScenarioError::Disconnected { room });
        }

        let mut room_index = vec![usize::MAX; grid.width * grid.height];
        for room in &rooms {
            for &c in &room.cells {
                room_index[grid.index(c)] = room.id;
            }
        }
        let mut door_index = vec![usize::MAX; grid.width * grid.height];
        for door in &doors {
            door_index[grid.index(door.cell)] = door.id;
        }

        Ok(FloorPlan { grid, rooms, doors, adjacency, room_index, door_index })
    }

    pub fn room_count(&self) -> usize {
        self.rooms.len()
    }

    /// Room owning a floor cell; door and wall cells have no room.
    pub fn room_of(&self, c: Coord) -> Option<RoomId> {
        if !self.grid.in_bounds(c) {
            return None;
        }
        match self.room_index[self.grid.index(c)] {
            usize::MAX => None,
            id => Some(id),
        }
    }

    pub fn door_at(&self, c: Coord) -> Option<DoorId> {
        if !self.grid.in_bounds(c) {
            return None;
        }
        match self.door_index[self.grid.index(c)] {
            usize::MAX => None,
            id => Some(id),
        }
    }

    /// The slot index of `door` within `room`'s door list.
    pub fn door_slot(&self, room: RoomId, door: DoorId) -> Option<usize> {
        self.rooms[room].doors.iter().position(|&d| d == door)
    }
}

/// Partition the floor cells into rooms and identify the doors between them.
///
/// Flood fill treats door cells as separators; each door cell must then be
/// 4-adjacent to floor cells of exactly two distinct rooms. Room ids follow
/// the row-major order of each region's smallest cell; door ids follow the
/// row-major order of the door cells. Both orderings are deterministic.
pub fn derive_rooms(grid: &Grid) -> Result<(Vec<Room>, Vec<Door>), ScenarioError> {
    let mut region = vec![usize::MAX; grid.width * grid.height];
    let mut rooms: Vec<Vec<Coord>> = Vec::new();

    for y in 0..grid.height {
        for x in 0..grid.width {
            let start = Coord::new(x, y);
            if grid.kind(start) != CellKind::Floor || region[grid.index(start)] != usize::MAX {
                continue;
            }
            // Row-major scan order guarantees `start` is the region's
            // smallest cell, so discovery order doubles as the id order.
            let id = rooms.len();
            let mut cells = Vec::new();
            let mut queue = vec![start];
            region[grid.index(start)] = id;
            while let Some(c) = queue.pop() {
                cells.push(c);
                for n in c.neighbors4() {
                    if grid.kind(n) == CellKind::Floor && region[grid.index(n)] == usize::MAX {
                        region[grid.index(n)] = id;
                        queue.push(n);
                    }
                }
            }
            cells.sort();
            rooms.push(cells);
        }
    }

    if rooms.is_empty() {
        return Err(ScenarioError::NoRooms);
    }

    let mut doors = Vec::new();
    for y in 0..grid.height {
        for x in 0..grid.width {
            let cell = Coord::new(x, y);
            if grid.kind(cell) != CellKind::Door {
                continue;
            }
            let mut touching: Vec<usize> = cell
                .neighbors4()
                .filter(|&n| grid.kind(n) == CellKind::Floor)
                .map(|n| region[grid.index(n)])
                .collect();
            touching.sort_unstable();
            touching.dedup();
            if touching.len() != 2 {
                return Err(ScenarioError::MalformedDoor { x, y, rooms: touching.len() });
            }
            doors.push(Door {
                id: doors.len(),
                cell,
                rooms: [touching[0], touching[1]],
            });
        }
    }

    let mut door_lists: Vec<Vec<DoorId>> = vec![Vec::new(); rooms.len()];
    for d in &doors {
        door_lists[d.rooms[0]].push(d.id);
        door_lists[d.rooms[1]].push(d.id);
    }

    let built: Vec<Room> = rooms
        .into_iter()
        .enumerate()
        .map(|(id, cells)| build_room(grid, id, cells, core::mem::take(&mut door_lists[id]), &doors))
        .collect();

    Ok((built, doors))
}

fn build_room(grid: &Grid, id: RoomId, cells: Vec<Coord>, doors_of_room: Vec<DoorId>, doors: &[Door]) -> Room {
    let min = Coord::new(
        cells.iter().map(|c| c.x).min().unwrap(),
        cells.iter().map(|c| c.y).min().unwrap(),
    );
    let max = Coord::new(
        cells.iter().map(|c| c.x).max().unwrap(),
        cells.iter().map(|c| c.y).max().unwrap(),
    );

    // Walkable node set for in-room paths: the room's floor plus its own
    // door cells. Doors attach through their floor neighbours only.
    let mut inside = vec![false; grid.width * grid.height];
    for &c in &cells {
        inside[grid.index(c)] = true;
    }
    for &d in &doors_of_room {
        inside[grid.index(doors[d].cell)] = true;
    }

    let bfs = |from: Coord| -> Vec<u16> {
        let mut dist = vec![u16::MAX; grid.width * grid.height];
        let mut queue: Vec<Coord> = vec![from];
        dist[grid.index(from)] = 0;
        let mut head = 0;
        while head < queue.len() {
            let c = queue[head];
            head += 1;
            let d = dist[grid.index(c)];
            // Door cells are endpoints, not corridors: expansion continues
            // only from floor cells.
            if grid.kind(c) == CellKind::Door && d > 0 {
                continue;
            }
            for n in c.neighbors4() {
                if grid.in_bounds(n) && inside[grid.index(n)] && dist[grid.index(n)] == u16::MAX {
                    dist[grid.index(n)] = d + 1;
                    queue.push(n);
                }
            }
        }
        dist
    };

    let dist_to_door: Vec<Vec<u16>> = doors_of_room.iter().map(|&d| bfs(doors[d].cell)).collect();

    let mut diameter = 0u32;
    for &c in &cells {
        let dist = bfs(c);
        for idx in 0..dist.len() {
            if dist[idx] != u16::MAX {
                diameter = diameter.max(dist[idx] as u32);
            }
        }
    }

    Room { id, cells, doors: doors_of_room, min, max, diameter, dist_to_door }
}

/// How an enemy behaves across the episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnemyBehavior {
    /// Holds position; fires at the nearest visible agent every step.
    Stationary,
    /// Walks the route one cell per step, then behaves as stationary.
    Path(Vec<Coord>),
    /// Walks the route; on entering a civilian's room it guns the civilian
    /// down, then behaves as stationary.
    PathThenFire(Vec<Coord>),
}

impl EnemyBehavior {
    pub fn route(&self) -> Option<&[Coord]> {
        match self {
            EnemyBehavior::Stationary => None,
            EnemyBehavior::Path(r) | EnemyBehavior::PathThenFire(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnemySpec {
    pub spawn: Coord,
    pub hp: u32,
    pub behavior: EnemyBehavior,
}

/// Which environment reward the commander receives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardConfig {
    /// The completion bonus on clearing, zero otherwise.
    Sparse,
    /// Completion bonus on clearing, else -1 + cleared/total.
    Default,
    /// `Default`, plus a penalty per agent killed that step.
    DeathPenalty(f64),
    /// Completion bonus only while every civilian lives; the bonus is lost
    /// (negated) on the step a civilian dies.
    Civilian,
}

/// Fixed encoding widths for a scenario, taken as maxima over its rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsDims {
    /// Side of the square room-grid patch (max bounding-box side).
    pub r_max: usize,
    /// Maximum number of doors in any single room.
    pub d_max: usize,
    /// Maximum number of enemies that can share a room (= total enemies).
    pub e_max: usize,
}

/// A floorplan plus initial conditions and rules for one episode setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plan: FloorPlan,
    pub agent_spawns: Vec<Coord>,
    pub enemies: Vec<EnemySpec>,
    pub civilians: Vec<Coord>,
    pub step_limit: u32,
    pub order_sync: bool,
    pub reward: RewardConfig,
    pub r_complete: f64,
    pub agent_hp: u32,
    pub enemy_hp: u32,
    pub dims: ObsDims,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        parse_scenario(text)
    }

    pub fn to_text(&self) -> String {
        serialize_scenario(self)
    }

    /// Re-check the placement invariants. The parser can only produce valid
    /// placements, but scenarios assembled in code go through here too.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.agent_spawns.is_empty() {
            return Err(ScenarioError::NoAgents);
        }
        if self.step_limit == 0 || self.agent_hp == 0 || self.enemy_hp == 0 {
            return Err(ScenarioError::BadValue {
                line: 0,
                key: "step_limit/agent_hp/enemy_hp".to_string(),
                value: "0".to_string(),
            });
        }
        let mut occupied: BTreeMap<Coord, ()> = BTreeMap::new();
        let mut place = |c: Coord| -> Result<(), ScenarioError> {
            if self.plan.grid.kind(c) != CellKind::Floor {
                return Err(ScenarioError::SpawnNotOnFloor { x: c.x, y: c.y });
            }
            if occupied.insert(c, ()).is_some() {
                return Err(ScenarioError::EntityOverlap { x: c.x, y: c.y });
            }
            Ok(())
        };
        for &c in &self.agent_spawns {
            place(c)?;
        }
        for e in &self.enemies {
            place(e.spawn)?;
        }
        for &c in &self.civilians {
            place(c)?;
        }
        for (index, e) in self.enemies.iter().enumerate() {
            if let Some(route) = e.behavior.route() {
                validate_route(&self.plan, index, e.spawn, route)?;
            }
        }
        Ok(())
    }
}

fn validate_route(plan: &FloorPlan, index: usize, spawn: Coord, route: &[Coord]) -> Result<(), ScenarioError> {
    if route.first() != Some(&spawn) {
        return Err(ScenarioError::EnemyPathWrongStart { index });
    }
    for (at, &c) in route.iter().enumerate() {
        if !plan.grid.is_walkable(c) {
            return Err(ScenarioError::EnemyPathNotWalkable { index, x: c.x, y: c.y });
        }
        if at > 0 && !route[at - 1].is_adjacent4(c) {
            return Err(ScenarioError::EnemyPathNotConnected { index, at });
        }
    }
    Ok(())
}

/// Errors from parsing or validating a scenario. Each failure mode is a
/// distinct variant so callers can match on it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("missing [map] section")]
    MissingMapSection,
    #[error("map row at line {line} has a different length from the first row")]
    RaggedRow { line: usize },
    #[error("map is empty")]
    EmptyMap,
    #[error("outer border must be wall, found other cell at ({x}, {y})")]
    BorderNotWall { x: usize, y: usize },
    #[error("map has no rooms")]
    NoRooms,
    #[error("door at ({x}, {y}) touches {rooms} room(s), expected exactly 2")]
    MalformedDoor { x: usize, y: usize, rooms: usize },
    #[error("room {room} is unreachable from room 0")]
    Disconnected { room: usize },
    #[error("spawn not on floor at ({x}, {y})")]
    SpawnNotOnFloor { x: usize, y: usize },
    #[error("two entities share the cell ({x}, {y})")]
    EntityOverlap { x: usize, y: usize },
    #[error("scenario places no agents")]
    NoAgents,
    #[error("enemy_path.{index} refers to a missing enemy")]
    EnemyPathIndexOutOfRange { index: usize },
    #[error("enemy_path.{index} must start at the enemy's spawn cell")]
    EnemyPathWrongStart { index: usize },
    #[error("enemy_path.{index} leaves walkable cells at ({x}, {y})")]
    EnemyPathNotWalkable { index: usize, x: usize, y: usize },
    #[error("enemy_path.{index} breaks 4-connectivity at waypoint {at}")]
    EnemyPathNotConnected { index: usize, at: usize },
    #[error("unknown key '{key}' at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate key '{key}' at line {line}")]
    DuplicateKey { line: usize, key: String },
    #[error("bad value '{value}' for key '{key}' at line {line}")]
    BadValue { line: usize, key: String, value: String },
}

/// Parse the line-oriented scenario text format.
///
/// The format has two sections. `[map]` holds equal-length ASCII rows:
/// `#` wall, `.` floor, `+` door, `A` agent spawn, `E` enemy spawn,
/// `C` civilian (the latter three are floor cells). `[meta]` holds
/// `key=value` lines; all keys are optional and default as documented in
/// the crate README. Enemy routes are given as `enemy_path.<k>=x,y;x,y;...`
/// where `k` indexes enemies in row-major spawn order and the first
/// waypoint must be the spawn cell.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Map,
        Meta,
    }

    let mut section = Section::Preamble;
    let mut rows: Vec<(usize, &str)> = Vec::new();
    let mut meta: Vec<(usize, &str)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        match section {
            Section::Preamble => {
                if line.trim().is_empty() {
                    continue;
                }
                if line.trim() == "[map]" {
                    section = Section::Map;
                } else {
                    return Err(ScenarioError::MissingMapSection);
                }
            }
            Section::Map => {
                if line.trim() == "[meta]" {
                    section = Section::Meta;
                } else if line.trim().is_empty() {
                    continue;
                } else {
                    rows.push((line_no, line));
                }
            }
            Section::Meta => {
                if line.trim().is_empty() {
                    continue;
                }
                meta.push((line_no, line.trim()));
            }
        }
    }

    if section == Section::Preamble || rows.is_empty() {
        return Err(if section == Section::Preamble {
            ScenarioError::MissingMapSection
        } else {
            ScenarioError::EmptyMap
        });
    }

    let width = rows[0].1.chars().count();
    let height = rows.len();
    let mut cells = Vec::with_capacity(width * height);
    let mut agent_spawns = Vec::new();
    let mut enemy_spawns = Vec::new();
    let mut civilians = Vec::new();

    for (y, &(line_no, row)) in rows.iter().enumerate() {
        let row_cells: Vec<char> = row.chars().collect();
        if row_cells.len() != width {
            return Err(ScenarioError::RaggedRow { line: line_no });
        }
        for (x, ch) in row_cells.into_iter().enumerate() {
            let kind = match ch {
                '#' => CellKind::Wall,
                '.' => CellKind::Floor,
                '+' => CellKind::Door,
                'A' => {
                    agent_spawns.push(Coord::new(x, y));
                    CellKind::Floor
                }
                'E' => {
                    enemy_spawns.push(Coord::new(x, y));
                    CellKind::Floor
                }
                'C' => {
                    civilians.push(Coord::new(x, y));
                    CellKind::Floor
                }
                other => {
                    return Err(ScenarioError::Syntax {
                        line: line_no,
                        col: x + 1,
                        msg: format!("unexpected map character '{other}'"),
                    })
                }
            };
            cells.push(kind);
        }
    }

    let grid = Grid::new(width, height, cells)?;
    let plan = FloorPlan::from_grid(grid)?;

    // Meta defaults.
    let mut step_limit: u32 = 500;
    let mut order_sync = false;
    let mut reward = RewardConfig::Default;
    let mut r_complete: f64 = 10.0;
    let mut agent_hp: u32 = 1;
    let mut enemy_hp: u32 = 1;
    let mut routes: BTreeMap<usize, Vec<Coord>> = BTreeMap::new();
    let mut seen: Vec<String> = Vec::new();

    for (line_no, line) in meta {
        let (key, value) = line.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line: line_no,
            col: 1,
            msg: "expected key=value".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ScenarioError::DuplicateKey { line: line_no, key: key.to_string() });
        }
        seen.push(key.to_string());
        let bad = |k: &str, v: &str| ScenarioError::BadValue {
            line: line_no,
            key: k.to_string(),
            value: v.to_string(),
        };
        match key {
            "step_limit" => step_limit = value.parse().map_err(|_| bad(key, value))?,
            "order_sync" => {
                order_sync = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(key, value)),
                }
            }
            "reward" => {
                reward = if value == "sparse" {
                    RewardConfig::Sparse
                } else if value == "default" {
                    RewardConfig::Default
                } else if value == "civilian" {
                    RewardConfig::Civilian
                } else if let Some(p) = value.strip_prefix("death_penalty:") {
                    RewardConfig::DeathPenalty(p.parse().map_err(|_| bad(key, value))?)
                } else {
                    return Err(bad(key, value));
                }
            }
            "r_complete" => r_complete = value.parse().map_err(|_| bad(key, value))?,
            "agent_hp" => agent_hp = value.parse().map_err(|_| bad(key, value))?,
            "enemy_hp" => enemy_hp = value.parse().map_err(|_| bad(key, value))?,
            _ => {
                if let Some(k) = key.strip_prefix("enemy_path.") {
                    let index: usize = k.parse().map_err(|_| bad(key, value))?;
                    let mut route = Vec::new();
                    for part in value.split(';') {
                        let (xs, ys) = part.split_once(',').ok_or_else(|| bad(key, value))?;
                        let x = xs.trim().parse().map_err(|_| bad(key, value))?;
                        let y = ys.trim().parse().map_err(|_| bad(key, value))?;
                        route.push(Coord::new(x, y));
                    }
                    routes.insert(index, route);
                } else {
                    return Err(ScenarioError::UnknownKey { line: line_no, key: key.to_string() });
                }
            }
        }
    }

    for &index in routes.keys() {
        if index >= enemy_spawns.len() {
            return Err(ScenarioError::EnemyPathIndexOutOfRange { index });
        }
    }

    let civilian_rooms: Vec<RoomId> = civilians.iter().filter_map(|&c| plan.room_of(c)).collect();
    let enemies: Vec<EnemySpec> = enemy_spawns
        .iter()
        .enumerate()
        .map(|(i, &spawn)| {
            let behavior = match routes.get(&i) {
                None => EnemyBehavior::Stationary,
                Some(route) => {
                    // A route that ends in a civilian's room is an attack
                    // run; any other route is a plain patrol.
                    let end_room = route.last().and_then(|&c| plan.room_of(c));
                    if end_room.is_some_and(|r| civilian_rooms.contains(&r)) {
                        EnemyBehavior::PathThenFire(route.clone())
                    } else {
                        EnemyBehavior::Path(route.clone())
                    }
                }
            };
            EnemySpec { spawn, hp: enemy_hp, behavior }
        })
        .collect();

    let dims = compute_dims(&plan, enemies.len());
    let scenario = Scenario {
        plan,
        agent_spawns,
        enemies,
        civilians,
        step_limit,
        order_sync,
        reward,
        r_complete,
        agent_hp,
        enemy_hp,
        dims,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn compute_dims(plan: &FloorPlan, enemy_count: usize) -> ObsDims {
    let r_max = plan
        .rooms
        .iter()
        .map(|r| r.bbox_width().max(r.bbox_height()))
        .max()
        .unwrap_or(1);
    let d_max = plan.rooms.iter().map(|r| r.doors.len()).max().unwrap_or(0);
    ObsDims { r_max, d_max, e_max: enemy_count }
}

/// Render a scenario back to its text form. `parse(serialize(s))` yields a
/// scenario equal to `s` field by field.
pub fn serialize_scenario(s: &Scenario) -> String {
    let grid = &s.plan.grid;
    let mut out = String::from("[map]\n");
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let c = Coord::new(x, y);
            let ch = if s.agent_spawns.contains(&c) {
                'A'
            } else if s.enemies.iter().any(|e| e.spawn == c) {
                'E'
            } else if s.civilians.contains(&c) {
                'C'
            } else {
                match grid.kind(c) {
                    CellKind::Wall => '#',
                    CellKind::Floor => '.',
                    CellKind::Door => '+',
                }
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out.push_str("[meta]\n");
    out.push_str(&format!("step_limit={}\n", s.step_limit));
    out.push_str(&format!("order_sync={}\n", s.order_sync));
    let reward = match s.reward {
        RewardConfig::Sparse => "sparse".to_string(),
        RewardConfig::Default => "default".to_string(),
        RewardConfig::DeathPenalty(p) => format!("death_penalty:{p}"),
        RewardConfig::Civilian => "civilian".to_string(),
    };
    out.push_str(&format!("reward={reward}\n"));
    out.push_str(&format!("r_complete={}\n", s.r_complete));
    out.push_str(&format!("agent_hp={}\n", s.agent_hp));
    out.push_str(&format!("enemy_hp={}\n", s.enemy_hp));
    for (i, e) in s.enemies.iter().enumerate() {
        if let Some(route) = e.behavior.route() {
            let body: Vec<String> = route.iter().map(|c| format!("{},{}", c.x, c.y)).collect();
            out.push_str(&format!("enemy_path.{}={}\n", i, body.join(";")));
        }
    }
    out
}
