//! Line-of-sight checked against a dense geometric oracle, and engine
//! invariants under random action sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomclear_core::engine::{
    env_step, line_of_sight, reset, supercover_visit, DoneReason, PrimitiveAction,
};
use roomclear_core::floorplan::{parse_scenario, CellKind, Coord, Grid};

/// Exact test: does the closed unit square of `cell` touch the segment
/// between the centers of `a` and `b`? Works in integers on coordinates
/// doubled so that centers are odd lattice points; the slab intervals are
/// intersected as exact rationals.
fn segment_touches_cell(a: Coord, b: Coord, cell: Coord) -> bool {
    let p0 = [2 * a.x as i64 + 1, 2 * a.y as i64 + 1];
    let p1 = [2 * b.x as i64 + 1, 2 * b.y as i64 + 1];
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    // Fractions num/den with den > 0; start with t in [0, 1].
    let mut lo = (0i64, 1i64);
    let mut hi = (1i64, 1i64);
    for axis in 0..2 {
        let min_b = 2 * (if axis == 0 { cell.x } else { cell.y }) as i64;
        let max_b = min_b + 2;
        if d[axis] == 0 {
            if p0[axis] < min_b || p0[axis] > max_b {
                return false;
            }
            continue;
        }
        let (mut t0, mut t1) = ((min_b - p0[axis], d[axis]), (max_b - p0[axis], d[axis]));
        if t0.1 < 0 {
            t0 = (-t0.0, -t0.1);
            t1 = (-t1.0, -t1.1);
        }
        if t0.0 * t1.1 > t1.0 * t0.1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        // lo = max(lo, t0), hi = min(hi, t1)
        if t0.0 * lo.1 > lo.0 * t0.1 {
            lo = t0;
        }
        if t1.0 * hi.1 < hi.0 * t1.1 {
            hi = t1;
        }
    }
    lo.0 * hi.1 <= hi.0 * lo.1
}

fn oracle_cells(a: Coord, b: Coord, bound: usize) -> Vec<Coord> {
    let mut out = Vec::new();
    for y in 0..bound {
        for x in 0..bound {
            let c = Coord::new(x, y);
            if segment_touches_cell(a, b, c) {
                out.push(c);
            }
        }
    }
    out
}

#[test]
fn supercover_enumerates_exactly_the_touched_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10C);
    let bound = 12;
    for _ in 0..2000 {
        let a = Coord::new(rng.gen_range(0..bound), rng.gen_range(0..bound));
        let b = Coord::new(rng.gen_range(0..bound), rng.gen_range(0..bound));
        let mut visited = Vec::new();
        supercover_visit(a, b, |c| {
            visited.push(c);
            true
        });
        visited.sort();
        visited.dedup();
        let mut expect = oracle_cells(a, b, bound);
        expect.sort();
        assert_eq!(visited, expect, "segment {a:?} -> {b:?}");
    }
}

#[test]
fn corner_grazing_diagonal_touches_all_four_cells() {
    let mut visited = Vec::new();
    supercover_visit(Coord::new(0, 0), Coord::new(1, 1), |c| {
        visited.push(c);
        true
    });
    visited.sort();
    visited.dedup();
    assert_eq!(
        visited,
        vec![Coord::new(0, 0), Coord::new(1, 0), Coord::new(0, 1), Coord::new(1, 1)]
    );
}

fn random_walled_grid(rng: &mut ChaCha8Rng) -> Grid {
    let width = rng.gen_range(5..14);
    let height = rng.gen_range(5..12);
    let mut cells = vec![CellKind::Floor; width * height];
    for y in 0..height {
        for x in 0..width {
            let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
            if border || rng.gen_bool(0.2) {
                cells[y * width + x] = CellKind::Wall;
            }
        }
    }
    Grid::new(width, height, cells).unwrap()
}

#[test]
fn line_of_sight_matches_dense_oracle_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    for _ in 0..300 {
        let grid = random_walled_grid(&mut rng);
        let floors: Vec<Coord> = (0..grid.width() * grid.height())
            .map(|i| Coord::new(i % grid.width(), i / grid.width()))
            .filter(|&c| grid.kind(c) == CellKind::Floor)
            .collect();
        if floors.len() < 2 {
            continue;
        }
        for _ in 0..20 {
            let a = floors[rng.gen_range(0..floors.len())];
            let b = floors[rng.gen_range(0..floors.len())];
            let fast = line_of_sight(&grid, a, b);
            let slow = !oracle_cells(a, b, grid.width().max(grid.height()))
                .iter()
                .any(|&c| grid.in_bounds(c) && grid.kind(c) == CellKind::Wall);
            assert_eq!(fast, slow, "LOS mismatch {a:?} -> {b:?}");
        }
    }
}

#[test]
fn adjacent_cells_always_see_each_other() {
    let s = parse_scenario("[map]\n#####\n#A..#\n#####\n").unwrap();
    assert!(line_of_sight(&s.plan.grid, Coord::new(1, 1), Coord::new(2, 1)));
}

const COMBAT_MAP: &str = "\
[map]
###############
#AA..+...+...E#
#....#...#....#
#.A..+.E.+....#
###############
[meta]
step_limit=60
agent_hp=2
enemy_hp=2
reward=death_penalty:5
";

#[test]
fn random_rollouts_preserve_engine_invariants() {
    let s = parse_scenario(COMBAT_MAP).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    for _ in 0..120 {
        let mut w = reset(&s);
        let mut hp_agents: Vec<u32> = w.agents.iter().map(|a| a.hp).collect();
        let mut hp_enemies: Vec<u32> = w.enemies.iter().map(|e| e.hp).collect();
        let mut alive_agents: Vec<bool> = w.agents.iter().map(|a| a.alive).collect();
        let mut alive_enemies: Vec<bool> = w.enemies.iter().map(|e| e.alive).collect();
        while !w.done {
            let actions: Vec<PrimitiveAction> = (0..w.agents.len())
                .map(|_| PrimitiveAction::from_index(rng.gen_range(0..PrimitiveAction::COUNT)).unwrap())
                .collect();
            env_step(&s, &mut w, &actions).unwrap();

            for (i, a) in w.agents.iter().enumerate() {
                assert!(a.hp <= hp_agents[i], "agent hp increased");
                assert!(alive_agents[i] || !a.alive, "agent resurrected");
                hp_agents[i] = a.hp;
                alive_agents[i] = a.alive;
                assert_eq!(a.alive, a.hp > 0);
                if a.alive {
                    assert!(s.plan.grid.is_walkable(a.cell));
                }
            }
            for (i, e) in w.enemies.iter().enumerate() {
                assert!(e.hp <= hp_enemies[i], "enemy hp increased");
                assert!(alive_enemies[i] || !e.alive, "enemy resurrected");
                hp_enemies[i] = e.hp;
                alive_enemies[i] = e.alive;
            }

            // No two living entities share a cell.
            let mut cells: Vec<Coord> = w
                .agents
                .iter()
                .filter(|a| a.alive)
                .map(|a| a.cell)
                .chain(w.enemies.iter().filter(|e| e.alive).map(|e| e.cell))
                .chain(w.civilians.iter().filter(|c| c.alive).map(|c| c.cell))
                .collect();
            let before = cells.len();
            cells.sort();
            cells.dedup();
            assert_eq!(before, cells.len(), "two living entities share a cell");

            assert!(w.timestep <= s.step_limit);
            assert_eq!(
                w.done_reason == DoneReason::Cleared,
                w.clearance.all_clear(),
                "cleared flag must mirror the zero unclear vector"
            );
        }
    }
}

#[test]
fn trajectories_are_seed_deterministic() {
    let s = parse_scenario(COMBAT_MAP).unwrap();
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = reset(&s);
        let mut log = Vec::new();
        while !w.done {
            let actions: Vec<PrimitiveAction> = (0..w.agents.len())
                .map(|_| PrimitiveAction::from_index(rng.gen_range(0..PrimitiveAction::COUNT)).unwrap())
                .collect();
            let r = env_step(&s, &mut w, &actions).unwrap();
            log.push((w.clone(), r.reward));
        }
        log
    };
    assert_eq!(run(11), run(11));
}
