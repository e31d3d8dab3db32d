//! Room derivation checked against an independent union-find partition of
//! the floor cells, over randomly generated valid plans, plus the
//! serialize/parse round trip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomclear_core::floorplan::{
    derive_rooms, parse_scenario, serialize_scenario, CellKind, Coord, Grid,
};

/// Random plan generator: an open interior carved by random full-length
/// wall lines, each pierced by one or two door holes. Not every sample is
/// a valid plan (door holes can end up malformed or rooms disconnected);
/// invalid ones are skipped, and the test demands a healthy valid count.
fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    let width = rng.gen_range(6..18);
    let height = rng.gen_range(5..14);
    let mut cells = vec![CellKind::Floor; width * height];
    let mut set = |x: usize, y: usize, k: CellKind, cells: &mut Vec<CellKind>| {
        cells[y * width + x] = k;
    };
    for y in 0..height {
        for x in 0..width {
            if x == 0 || y == 0 || x == width - 1 || y == height - 1 {
                set(x, y, CellKind::Wall, &mut cells);
            }
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        if rng.gen_bool(0.5) && width > 4 {
            let x = rng.gen_range(2..width - 2);
            for y in 1..height - 1 {
                set(x, y, CellKind::Wall, &mut cells);
            }
            for _ in 0..rng.gen_range(1..3) {
                let y = rng.gen_range(1..height - 1);
                set(x, y, CellKind::Door, &mut cells);
            }
        } else if height > 4 {
            let y = rng.gen_range(2..height - 2);
            for x in 1..width - 1 {
                set(x, y, CellKind::Wall, &mut cells);
            }
            for _ in 0..rng.gen_range(1..3) {
                let x = rng.gen_range(1..width - 1);
                set(x, y, CellKind::Door, &mut cells);
            }
        }
    }
    Grid::new(width, height, cells).unwrap()
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[test]
fn flood_fill_partition_matches_union_find_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF100D);
    let mut valid = 0;
    for _ in 0..400 {
        let grid = random_grid(&mut rng);
        let Ok((rooms, _doors)) = derive_rooms(&grid) else { continue };
        valid += 1;

        // Independent partition: union 4-adjacent floor pairs.
        let n = grid.width() * grid.height();
        let mut dsu = Dsu::new(n);
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                let c = Coord::new(x, y);
                if grid.kind(c) != CellKind::Floor {
                    continue;
                }
                for nb in c.neighbors4() {
                    if grid.in_bounds(nb) && grid.kind(nb) == CellKind::Floor {
                        dsu.union(grid.index(c), grid.index(nb));
                    }
                }
            }
        }

        // Same room id <=> same union-find root, checked both ways.
        let mut root_of_room = vec![usize::MAX; rooms.len()];
        for room in &rooms {
            for &cell in &room.cells {
                let root = dsu.find(grid.index(cell));
                if root_of_room[room.id] == usize::MAX {
                    root_of_room[room.id] = root;
                } else {
                    assert_eq!(root_of_room[room.id], root, "room {} split by oracle", room.id);
                }
            }
        }
        root_of_room.sort_unstable();
        root_of_room.dedup();
        assert_eq!(root_of_room.len(), rooms.len(), "distinct rooms share an oracle component");

        let floor_total: usize = (0..n)
            .filter(|&i| {
                grid.kind(Coord::new(i % grid.width(), i / grid.width())) == CellKind::Floor
            })
            .count();
        let in_rooms: usize = rooms.iter().map(|r| r.cells.len()).sum();
        assert_eq!(floor_total, in_rooms, "rooms must partition the floor");
    }
    assert!(valid >= 150, "generator produced too few valid plans ({valid}/400)");
}

#[test]
fn derivation_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let grid = random_grid(&mut rng);
        let a = derive_rooms(&grid);
        let b = derive_rooms(&grid);
        assert_eq!(a, b);
    }
}

#[test]
fn connected_plans_have_no_isolated_rows_in_adjacency() {
    let text = "\
[map]
#############
#A..+...+...#
#############
";
    let s = parse_scenario(text).unwrap();
    let a = &s.plan.adjacency;
    for i in 0..a.size() {
        assert!(a.neighbors(i).count() >= 1);
    }
}

#[test]
fn serialize_parse_round_trip_over_generated_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x505);
    let mut checked = 0;
    for _ in 0..200 {
        let grid = random_grid(&mut rng);
        // Render map text with an agent dropped on the first floor cell and
        // an enemy on the last.
        let mut floors = Vec::new();
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                if grid.kind(Coord::new(x, y)) == CellKind::Floor {
                    floors.push(Coord::new(x, y));
                }
            }
        }
        if floors.len() < 2 {
            continue;
        }
        let mut text = String::from("[map]\n");
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                let c = Coord::new(x, y);
                text.push(if c == floors[0] {
                    'A'
                } else if c == *floors.last().unwrap() {
                    'E'
                } else {
                    match grid.kind(c) {
                        CellKind::Wall => '#',
                        CellKind::Floor => '.',
                        CellKind::Door => '+',
                    }
                });
            }
            text.push('\n');
        }
        text.push_str("[meta]\nstep_limit=321\nreward=death_penalty:1.25\nenemy_hp=3\n");
        let Ok(s) = parse_scenario(&text) else { continue };
        checked += 1;
        let round = parse_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, round);
    }
    assert!(checked >= 100, "too few parseable samples ({checked}/200)");
}
