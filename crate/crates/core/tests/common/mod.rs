//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use gridplan_core::{CellCoord, GridMap, Tile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTAS: [(i32, i32); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn free(map: &GridMap, x: i32, y: i32) -> bool {
    x >= 0 && y >= 0 && map.is_free(CellCoord::new(x as u32, y as u32))
}

/// Moves re-derived from the rules rather than taken from `GridMap`:
/// orthogonal cost 1, diagonal cost 2, diagonals need both flanking cells free.
pub fn oracle_moves(map: &GridMap, c: CellCoord) -> Vec<(CellCoord, u64)> {
    let (x, y) = (c.x as i32, c.y as i32);
    DELTAS
        .iter()
        .filter(|&&(dx, dy)| free(map, x + dx, y + dy))
        .filter(|&&(dx, dy)| dx == 0 || dy == 0 || (free(map, x + dx, y) && free(map, x, y + dy)))
        .map(|&(dx, dy)| (CellCoord::new((x + dx) as u32, (y + dy) as u32), (dx.abs() + dy.abs()) as u64))
        .collect()
}

/// Plain Dijkstra; `None` when the goal is unreachable.
pub fn dijkstra(map: &GridMap, start: CellCoord, goal: CellCoord) -> Option<u64> {
    let w = map.width() as usize;
    let idx = |c: CellCoord| c.y as usize * w + c.x as usize;
    let mut dist = vec![u64::MAX; map.cell_count()];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0;
    heap.push(Reverse((0u64, start.y, start.x)));
    while let Some(Reverse((d, y, x))) = heap.pop() {
        let c = CellCoord::new(x, y);
        if c == goal {
            return Some(d);
        }
        if d > dist[idx(c)] {
            continue;
        }
        for (t, cost) in oracle_moves(map, c) {
            let nd = d + cost;
            if nd < dist[idx(t)] {
                dist[idx(t)] = nd;
                heap.push(Reverse((nd, t.y, t.x)));
            }
        }
    }
    None
}

/// Deviation count from the angle itself: steps at more than a right angle
/// from the start-to-goal direction.
pub fn mdt_by_angle(path: &[CellCoord], start: CellCoord, goal: CellCoord) -> usize {
    let vd = (goal.x as f64 - start.x as f64, goal.y as f64 - start.y as f64);
    let nd = vd.0.hypot(vd.1);
    path.windows(2)
        .filter(|w| {
            let vt = (w[1].x as f64 - w[0].x as f64, w[1].y as f64 - w[0].y as f64);
            let nt = vt.0.hypot(vt.1);
            if nd == 0.0 || nt == 0.0 {
                return false;
            }
            let cos = ((vd.0 * vt.0 + vd.1 * vt.1) / (nd * nt)).clamp(-1.0, 1.0);
            let angle = cos.acos();
            // exact right angles come out within float noise of pi/2
            angle > std::f64::consts::FRAC_PI_2 + 1e-9
        })
        .count()
}

/// Random `n x n` map with the given obstacle density and distinct free
/// endpoints; not necessarily solvable.
pub fn random_map(rng: &mut impl Rng, n: u32, density: f64) -> GridMap {
    loop {
        let cells: Vec<Tile> =
            (0..n * n).map(|_| if rng.gen_bool(density) { Tile::Obstacle } else { Tile::Free }).collect();
        let s = CellCoord::new(rng.gen_range(0..n), rng.gen_range(0..n));
        let g = CellCoord::new(rng.gen_range(0..n), rng.gen_range(0..n));
        if let Ok(m) = GridMap::new("random", n, n, cells, s, g) {
            return m;
        }
    }
}

/// `count` solvable `n x n` maps from a fixed seed.
pub fn solvable_maps(seed: u64, count: usize, n: u32) -> Vec<GridMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let density = rng.gen_range(0.1..0.35);
        let m = random_map(&mut rng, n, density);
        if dijkstra(&m, m.start(), m.goal()).is_some() {
            out.push(m);
        }
    }
    out
}

pub fn corridor() -> GridMap {
    GridMap::parse("corridor", "S...G\n").unwrap()
}
