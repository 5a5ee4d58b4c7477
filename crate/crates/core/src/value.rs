//! Learned environment value.
//!
//! A per-cell table `V(s)` trained online by one-step TD backups while the
//! search runs. The reward for a transition is the advisor's seeded reward
//! for the destination plus a discovery bonus proportional to how many grid
//! cells first come into view when the agent reaches it. The table feeds
//! back into the search as a subtractive correction on the Manhattan
//! heuristic, clamped so the result never exceeds plain Manhattan.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{manhattan, CellCoord, GridMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("value tables have different shapes")]
    ShapeMismatch,
    #[error("cell {0} appears more than once in the reward seed")]
    DuplicateCell(CellCoord),
    #[error("seed reward {reward} for {cell} lies outside [-1, 1]")]
    RewardOutOfRange { cell: CellCoord, reward: f64 },
    #[error("invalid value parameters: {0}")]
    InvalidParams(&'static str),
}

/// Learning and blending parameters for a [`ValueTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    /// TD step size, in (0, 1].
    pub alpha: f64,
    /// Discount, in [0, 1).
    pub gamma: f64,
    /// Weight of `V` in the heuristic; 0 turns the value layer off.
    pub lambda: f64,
    /// Chebyshev radius of the discovery window around a visited cell.
    pub reveal_radius: u32,
    /// Reward per newly revealed cell.
    pub beta: f64,
}

impl Default for ValueParams {
    fn default() -> Self {
        Self { alpha: 0.5, gamma: 0.9, lambda: 0.5, reveal_radius: 2, beta: 0.05 }
    }
}

impl ValueParams {
    pub fn validate(&self) -> Result<(), ValueError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ValueError::InvalidParams("alpha must lie in (0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(ValueError::InvalidParams("gamma must lie in [0, 1)"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ValueError::InvalidParams("lambda must be a finite non-negative number"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ValueError::InvalidParams("beta must be a finite non-negative number"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub cell: CellCoord,
    pub reward: f64,
}

/// Advisor-issued initial rewards for the coming stage. Serialises as the
/// bare JSON array `[{"cell":[x,y],"reward":r}, ...]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardSeed {
    pub entries: Vec<SeedEntry>,
}

impl RewardSeed {
    pub fn new(entries: Vec<SeedEntry>) -> Result<Self, ValueError> {
        let seed = Self { entries };
        seed.validate()?;
        Ok(seed)
    }

    pub fn single(cell: CellCoord, reward: f64) -> Result<Self, ValueError> {
        Self::new(vec![SeedEntry { cell, reward }])
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        for (i, e) in self.entries.iter().enumerate() {
            if !(-1.0..=1.0).contains(&e.reward) {
                return Err(ValueError::RewardOutOfRange { cell: e.cell, reward: e.reward });
            }
            if self.entries[..i].iter().any(|p| p.cell == e.cell) {
                return Err(ValueError::DuplicateCell(e.cell));
            }
        }
        Ok(())
    }

    /// Seeded reward for `cell`, zero when absent.
    pub fn reward_at(&self, cell: CellCoord) -> f64 {
        self.entries.iter().find(|e| e.cell == cell).map_or(0.0, |e| e.reward)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Cells that have come within the reveal radius of some visited state.
/// Bits only ever go from unseen to seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMask {
    width: u32,
    height: u32,
    seen: Vec<bool>,
    count: usize,
}

impl ObservationMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, seen: vec![false; width as usize * height as usize], count: 0 }
    }

    pub fn for_map(map: &GridMap) -> Self {
        Self::new(map.width(), map.height())
    }

    fn window(&self, center: CellCoord, radius: u32) -> impl Iterator<Item = usize> + '_ {
        let x0 = center.x.saturating_sub(radius);
        let y0 = center.y.saturating_sub(radius);
        let x1 = center.x.saturating_add(radius).min(self.width.saturating_sub(1));
        let y1 = center.y.saturating_add(radius).min(self.height.saturating_sub(1));
        let w = self.width as usize;
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| y as usize * w + x as usize))
    }

    /// How many cells [`reveal`](Self::reveal) would newly mark, without marking them.
    pub fn newly_revealed(&self, center: CellCoord, radius: u32) -> usize {
        if center.x >= self.width || center.y >= self.height {
            return 0;
        }
        self.window(center, radius).filter(|&i| !self.seen[i]).count()
    }

    /// Mark the Chebyshev window around `center` as seen; returns the number of new cells.
    pub fn reveal(&mut self, center: CellCoord, radius: u32) -> usize {
        if center.x >= self.width || center.y >= self.height {
            return 0;
        }
        let fresh: Vec<usize> = self.window(center, radius).filter(|&i| !self.seen[i]).collect();
        for &i in &fresh {
            self.seen[i] = true;
        }
        self.count += fresh.len();
        fresh.len()
    }

    pub fn is_seen(&self, c: CellCoord) -> bool {
        c.x < self.width && c.y < self.height && self.seen[c.y as usize * self.width as usize + c.x as usize]
    }

    pub fn seen_count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Tabular value function over the cells of one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    width: u32,
    height: u32,
    values: Vec<f64>,
    v_max: f64,
    params: ValueParams,
    seed: RewardSeed,
}

impl ValueTable {
    /// Zero table for `map`, clamped to `[0, manhattan(start, goal)]`.
    pub fn new(map: &GridMap, params: ValueParams) -> Result<Self, ValueError> {
        Self::with_bound(map.width(), map.height(), manhattan(map.start(), map.goal()) as f64, params)
    }

    pub fn with_bound(width: u32, height: u32, v_max: f64, params: ValueParams) -> Result<Self, ValueError> {
        params.validate()?;
        if !(v_max >= 0.0 && v_max.is_finite()) {
            return Err(ValueError::InvalidParams("value bound must be finite and non-negative"));
        }
        Ok(Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
            v_max,
            params,
            seed: RewardSeed::default(),
        })
    }

    pub fn params(&self) -> &ValueParams {
        &self.params
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn seed(&self) -> &RewardSeed {
        &self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn idx(&self, c: CellCoord) -> Option<usize> {
        (c.x < self.width && c.y < self.height).then(|| c.y as usize * self.width as usize + c.x as usize)
    }

    /// `V(s)`; zero outside the grid.
    pub fn get(&self, c: CellCoord) -> f64 {
        self.idx(c).map_or(0.0, |i| self.values[i])
    }

    /// Set `V(s)` directly, clamped into the table bounds.
    pub fn set(&mut self, c: CellCoord, v: f64) {
        let hi = self.v_max;
        if let Some(i) = self.idx(c) {
            self.values[i] = if v.is_finite() { v.clamp(0.0, hi) } else { 0.0 };
        }
    }

    /// `r + gamma * V(s')`.
    pub fn td_target(&self, s_next: CellCoord, r: f64) -> f64 {
        r + self.params.gamma * self.get(s_next)
    }

    /// One-step TD backup of `V(s)` towards `r + gamma * V(s')`. Only `V(s)` changes.
    pub fn td_update(&mut self, s: CellCoord, s_next: CellCoord, r: f64) -> Result<f64, ValueError> {
        if !r.is_finite() {
            return Err(ValueError::NonFiniteReward(r));
        }
        let target = self.td_target(s_next, r);
        let v = self.get(s);
        self.set(s, v + self.params.alpha * (target - v));
        Ok(self.get(s))
    }

    /// Store the advisor's seed for the coming stage; `V` itself is untouched.
    pub fn apply_reward_seed(&mut self, seed: RewardSeed) -> Result<(), ValueError> {
        seed.validate()?;
        self.seed = seed;
        Ok(())
    }

    /// Discovery-shaped reward for moving `s -> s_next`, given the mask before the move.
    pub fn pcat_reward(&self, s: CellCoord, s_next: CellCoord, mask_before: &ObservationMask) -> f64 {
        pcat_reward(s, s_next, mask_before, &self.seed, &self.params)
    }
}

/// `max(0, manhattan(s, goal) - lambda * V(s))`.
pub fn effective_heuristic(s: CellCoord, goal: CellCoord, value: &ValueTable) -> f64 {
    crate::search::blended_heuristic(s, goal, Some(value), value.params.lambda)
}

/// Seeded reward of `s_next` plus `beta` per cell newly revealed on arrival.
pub fn pcat_reward(
    s: CellCoord,
    s_next: CellCoord,
    mask_before: &ObservationMask,
    seed: &RewardSeed,
    params: &ValueParams,
) -> f64 {
    debug_assert!(s == s_next || s.is_adjacent8(s_next));
    let revealed = mask_before.newly_revealed(s_next, params.reveal_radius);
    seed.reward_at(s_next) + params.beta * revealed as f64
}

/// `1/2 * sum (target - current)^2` over all cells.
pub fn value_loss(target: &ValueTable, current: &ValueTable) -> Result<f64, ValueError> {
    if target.width != current.width || target.height != current.height {
        return Err(ValueError::ShapeMismatch);
    }
    let sq: f64 = target.values.iter().zip(&current.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * sq)
}
