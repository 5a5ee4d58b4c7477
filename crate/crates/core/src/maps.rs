//! Parametric reference layouts: Aisle, Canyon and Double Door.
//!
//! Each layout is a fixed 24x24 motif; other sizes resample it, so the 16
//! and 32 variants keep the same structure. The shipped `.map` assets are
//! exactly these generators' output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{CellCoord, GridMap, Tile};

pub const SIZES: [u32; 3] = [16, 24, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Aisle,
    Canyon,
    DoubleDoor,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Aisle, Layout::Canyon, Layout::DoubleDoor];

    pub fn slug(self) -> &'static str {
        match self {
            Layout::Aisle => "aisle",
            Layout::Canyon => "canyon",
            Layout::DoubleDoor => "double_door",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Layout::Aisle => "Aisle",
            Layout::Canyon => "Canyon",
            Layout::DoubleDoor => "Double Door",
        }
    }

    /// Catalogue name, e.g. `aisle_24`.
    pub fn map_name(self, size: u32) -> String {
        format!("{}_{}", self.slug(), size)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Layout {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Layout::ALL.into_iter().find(|l| l.slug() == norm || l.slug().replace('_', "") == norm).ok_or(())
    }
}

// 24x24 motifs, drawn with the same marks as the map file format.

const AISLE: &str = "\
........................\n\
........##..............\n\
....#...##..............\n\
....#...##..#...#.......\n\
....#...##......#.......\n\
........##......#.......\n\
........##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#....G..\n\
....#.......#...#.......\n\
.S..#.......#...#.......\n\
....#.......#...#.......\n\
....#...##..#...#.......\n\
....#...##..#...#.......\n\
....#...##......#.......\n\
....#...##......#.......\n\
........##..#...#.......\n\
........##..#...........\n\
....#.......#...........\n\
";

const CANYON: &str = "\
########################\n\
#.....................##\n\
#..G..................##\n\
#.....................##\n\
#....................###\n\
##..........#........###\n\
##..................####\n\
##...............#######\n\
######.....#.....#######\n\
############....########\n\
############....########\n\
############....########\n\
###########..........###\n\
######.........#.....###\n\
####...........#########\n\
###...........##########\n\
###..........###########\n\
###.....################\n\
###......###############\n\
##.......###############\n\
#........###############\n\
#.S......###############\n\
#....###################\n\
########################\n\
";

const DOUBLE_DOOR: &str = "\
.......#........#.......\n\
.......#........#......G\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.S.....#........#.......\n\
................#.......\n\
................#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#................\n\
.......#................\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
.......#........#.......\n\
";

/// Side length of the motifs.
pub const MOTIF_SIZE: u32 = 24;

impl Layout {
    fn motif(self) -> &'static str {
        match self {
            Layout::Aisle => AISLE,
            Layout::Canyon => CANYON,
            Layout::DoubleDoor => DOUBLE_DOOR,
        }
    }
}

/// Generate a layout at side length `n` (at least 8). Upscaling samples the
/// motif at cell centres; downscaling marks a cell blocked when any motif
/// cell under its footprint is, so thin walls survive.
pub fn generate(layout: Layout, n: u32) -> GridMap {
    assert!(n >= 8, "layouts need at least 8x8 cells");
    let motif = GridMap::parse(layout.map_name(MOTIF_SIZE), layout.motif()).expect("motifs parse");
    let name = layout.map_name(n);
    if n == MOTIF_SIZE {
        return motif.renamed(name);
    }
    let m = MOTIF_SIZE;
    let footprint = |v: u32| {
        if n > m {
            let c = ((2 * v + 1) * m / (2 * n)).min(m - 1);
            c..c + 1
        } else {
            v * m / n..((v + 1) * m).div_ceil(n).min(m)
        }
    };
    let dst = |v: u32| (v * n / m).min(n - 1);
    let mut cells: Vec<Tile> = (0..n * n)
        .map(|i| {
            let blocked = footprint(i / n)
                .flat_map(|y| footprint(i % n).map(move |x| CellCoord::new(x, y)))
                .any(|c| !motif.is_free(c));
            if blocked {
                Tile::Obstacle
            } else {
                Tile::Free
            }
        })
        .collect();
    let at = |c: CellCoord| CellCoord::new(dst(c.x), dst(c.y));
    let (s, g) = (at(motif.start()), at(motif.goal()));
    cells[(s.y * n + s.x) as usize] = Tile::Free;
    cells[(g.y * n + g.x) as usize] = Tile::Free;
    GridMap::new(name, n, n, cells, s, g).expect("scaled layouts are well formed")
}

/// Every layout at every reference size.
pub fn catalogue() -> Vec<GridMap> {
    SIZES.iter().flat_map(|&n| Layout::ALL.iter().map(move |&l| generate(l, n))).collect()
}
