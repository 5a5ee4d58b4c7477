//! Best-first grid search with an advisor-filtered frontier.
//!
//! [`SearchState`] is the incremental engine: every call to
//! [`SearchState::expand`] pops one node, closes it and produces the batch of
//! successors that would enter the open set. Those candidates stay pending
//! until [`SearchState::resolve`] is called with one verdict per candidate:
//! accepted cells are pushed onto the open set, declined ones are parked in
//! the deferred set. When the open set runs dry the deferred set is recycled
//! wholesale, so no verdict sequence can make a solvable instance fail.
//!
//! [`plan`] drives the engine to completion with an optional verdict callback.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{manhattan, CellCoord, GridError, GridMap};
use crate::value::ValueTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// `f = g + h`
    AStar,
    /// `f = h`
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub mode: SearchMode,
    /// Weight of the learned value in the heuristic; 0 leaves plain Manhattan.
    pub heuristic_weight: f64,
    /// Uniform multiplier applied to every move cost.
    pub cost_scale: u32,
}

impl CostModel {
    pub const fn astar() -> Self {
        Self { mode: SearchMode::AStar, heuristic_weight: 0.0, cost_scale: 1 }
    }

    pub const fn greedy() -> Self {
        Self { mode: SearchMode::Greedy, heuristic_weight: 0.0, cost_scale: 1 }
    }

    pub fn with_weight(mut self, lambda: f64) -> Self {
        self.heuristic_weight = lambda;
        self
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self::astar()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Decline,
}

/// A successor offered for admission to the open set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u32,
    pub cell: CellCoord,
    pub parent: CellCoord,
    pub g: f64,
    pub h: f64,
    pub f: f64,
}

/// An expansion after which the search switched to a non-adjacent frontier branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub cell: CellCoord,
    pub discovered_at_expansion: usize,
}

/// `Some(prev)` when two consecutive expansions are not 8-adjacent.
pub fn detect_jump(prev_expanded: CellCoord, cur_expanded: CellCoord, prev_index: usize) -> Option<KeyPoint> {
    (!prev_expanded.is_adjacent8(cur_expanded))
        .then_some(KeyPoint { cell: prev_expanded, discovered_at_expansion: prev_index })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("no path between the endpoints")]
    NoPath,
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(GridError),
    #[error("predecessor chain is broken or cyclic")]
    BrokenChain,
    #[error("{0} candidates are still waiting for verdicts")]
    PendingVerdicts(usize),
    #[error("verdict count {got} does not match {expected} pending candidates")]
    VerdictCount { expected: usize, got: usize },
    #[error("search already finished")]
    Finished,
}

/// Walk `parents` back from `goal` and return the start-to-goal sequence.
pub fn reconstruct_path(
    parents: &BTreeMap<CellCoord, CellCoord>,
    goal: CellCoord,
) -> Result<Vec<CellCoord>, SearchError> {
    walk_back(goal, parents.len(), |c| parents.get(&c).copied())
}

fn walk_back(
    goal: CellCoord,
    max_links: usize,
    mut parent_of: impl FnMut(CellCoord) -> Option<CellCoord>,
) -> Result<Vec<CellCoord>, SearchError> {
    let mut path = vec![goal];
    let mut cur = goal;
    while let Some(p) = parent_of(cur) {
        if path.len() > max_links {
            return Err(SearchError::BrokenChain);
        }
        path.push(p);
        cur = p;
    }
    path.reverse();
    Ok(path)
}

/// Final state of a search run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub path: Vec<CellCoord>,
    pub path_cost: u64,
    pub open_final: BTreeSet<CellCoord>,
    pub closed_final: BTreeSet<CellCoord>,
    pub deferred_final: BTreeSet<CellCoord>,
    pub expansions: Vec<CellCoord>,
    pub jump_points: Vec<KeyPoint>,
    pub verdict_log: Vec<(CellCoord, Verdict)>,
    /// Every cell that was ever in the open or closed set.
    pub accessed: BTreeSet<CellCoord>,
    /// How many times the deferred set was recycled into the open set.
    pub recycles: usize,
}

impl SearchOutcome {
    pub fn found(&self) -> bool {
        !self.path.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Unseen,
    Open,
    Closed,
    Deferred,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    status: Status,
    g: u64,
    parent: Option<usize>,
    /// Sequence number of the live heap entry for this node.
    seq: u64,
    /// Heuristic the node was proposed with; reused when deferred nodes are recycled.
    h: f64,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // BinaryHeap is a max-heap: reverse so the smallest (f, h, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.h.total_cmp(&self.h)).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Result of one [`SearchState::expand`] call.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// A node was closed; its candidates (possibly none) await verdicts.
    Expanded { cell: CellCoord, parent: Option<CellCoord>, candidates: Vec<Candidate> },
    /// The goal was popped and the path is final.
    GoalReached { cell: CellCoord, parent: Option<CellCoord> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Running,
    Found,
    Exhausted,
}

/// Incremental search between two cells of one map.
#[derive(Debug, Clone)]
pub struct SearchState {
    width: u32,
    start: CellCoord,
    goal: CellCoord,
    model: CostModel,
    nodes: Vec<Node>,
    heap: BinaryHeap<Entry>,
    next_seq: u64,
    pending: Vec<Candidate>,
    deferred: BTreeSet<usize>,
    accessed: Vec<bool>,
    expansions: Vec<CellCoord>,
    jump_points: Vec<KeyPoint>,
    verdict_log: Vec<(CellCoord, Verdict)>,
    recycles: usize,
    phase: Phase,
}

/// `max(0, manhattan(s, goal) - lambda * V(s))`; plain Manhattan when `lambda`
/// is zero or no table is supplied.
pub fn blended_heuristic(s: CellCoord, goal: CellCoord, value: Option<&ValueTable>, lambda: f64) -> f64 {
    let d = manhattan(s, goal) as f64;
    match value {
        Some(v) if lambda != 0.0 => {
            let h = d - lambda * v.get(s);
            if h > 0.0 {
                h
            } else {
                0.0
            }
        }
        _ => d,
    }
}

impl SearchState {
    pub fn new(map: &GridMap, start: CellCoord, goal: CellCoord, model: CostModel) -> Result<Self, SearchError> {
        map.check_free(start).map_err(SearchError::InvalidEndpoint)?;
        map.check_free(goal).map_err(SearchError::InvalidEndpoint)?;
        let n = map.cell_count();
        let mut state = Self {
            width: map.width(),
            start,
            goal,
            model,
            nodes: vec![Node { status: Status::Unseen, g: 0, parent: None, seq: 0, h: 0.0 }; n],
            heap: BinaryHeap::new(),
            next_seq: 0,
            pending: Vec::new(),
            deferred: BTreeSet::new(),
            accessed: vec![false; n],
            expansions: Vec::new(),
            jump_points: Vec::new(),
            verdict_log: Vec::new(),
            recycles: 0,
            phase: Phase::Running,
        };
        let s = state.idx(start);
        // start's heuristic is irrelevant to the order: it is alone in the heap
        state.open(s, 0, None, 0.0);
        Ok(state)
    }

    fn idx(&self, c: CellCoord) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    fn coord(&self, i: usize) -> CellCoord {
        let w = self.width as usize;
        CellCoord::new((i % w) as u32, (i / w) as u32)
    }

    fn priority(&self, g: u64, h: f64) -> f64 {
        match self.model.mode {
            SearchMode::AStar => g as f64 + h,
            SearchMode::Greedy => h,
        }
    }

    fn open(&mut self, i: usize, g: u64, parent: Option<usize>, h: f64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.deferred.remove(&i);
        self.nodes[i] = Node { status: Status::Open, g, parent, seq, h };
        self.accessed[i] = true;
        self.heap.push(Entry { f: self.priority(g, h), h, seq, idx: i });
    }

    pub fn start(&self) -> CellCoord {
        self.start
    }

    pub fn goal(&self) -> CellCoord {
        self.goal
    }

    pub fn model(&self) -> &CostModel {
        &self.model
    }

    pub fn pending(&self) -> &[Candidate] {
        &self.pending
    }

    pub fn is_finished(&self) -> bool {
        self.phase != Phase::Running
    }

    pub fn is_found(&self) -> bool {
        self.phase == Phase::Found
    }

    pub fn expansions(&self) -> &[CellCoord] {
        &self.expansions
    }

    pub fn jump_points(&self) -> &[KeyPoint] {
        &self.jump_points
    }

    /// Best known cost-to-come of a cell that has been generated.
    pub fn g_of(&self, c: CellCoord) -> Option<u64> {
        let n = self.nodes.get(self.idx(c))?;
        (n.status != Status::Unseen).then_some(n.g)
    }

    pub fn parent_of(&self, c: CellCoord) -> Option<CellCoord> {
        let n = self.nodes.get(self.idx(c))?;
        n.parent.map(|p| self.coord(p))
    }

    fn pop_open(&mut self) -> Option<usize> {
        loop {
            while let Some(e) = self.heap.pop() {
                let n = &self.nodes[e.idx];
                if n.status == Status::Open && n.seq == e.seq {
                    return Some(e.idx);
                }
            }
            if self.deferred.is_empty() {
                return None;
            }
            // Open is empty: bring every deferred node back so the search stays complete.
            self.recycles += 1;
            let parked: Vec<usize> = core::mem::take(&mut self.deferred).into_iter().collect();
            for i in parked {
                let n = self.nodes[i];
                self.open(i, n.g, n.parent, n.h);
            }
        }
    }

    /// Pop and close the best open node and stage its successors as candidates.
    pub fn expand(&mut self, map: &GridMap, value: Option<&ValueTable>) -> Result<Step, SearchError> {
        match self.phase {
            Phase::Found => return Err(SearchError::Finished),
            Phase::Exhausted => return Err(SearchError::NoPath),
            Phase::Running => {}
        }
        if !self.pending.is_empty() {
            return Err(SearchError::PendingVerdicts(self.pending.len()));
        }
        let Some(i) = self.pop_open() else {
            self.phase = Phase::Exhausted;
            return Err(SearchError::NoPath);
        };
        let cell = self.coord(i);
        self.nodes[i].status = Status::Closed;
        if let Some(&prev) = self.expansions.last() {
            if let Some(kp) = detect_jump(prev, cell, self.expansions.len() - 1) {
                self.jump_points.push(kp);
            }
        }
        self.expansions.push(cell);
        let parent = self.nodes[i].parent.map(|p| self.coord(p));
        if cell == self.goal {
            self.phase = Phase::Found;
            return Ok(Step::GoalReached { cell, parent });
        }

        let g = self.nodes[i].g;
        let scale = self.model.cost_scale as u64;
        let mut candidates = Vec::new();
        for (t, mv) in map.neighbors(cell) {
            let j = self.idx(t);
            let ng = g + mv.step_cost as u64 * scale;
            let node = self.nodes[j];
            let offer = match (self.model.mode, node.status) {
                (_, Status::Unseen) => true,
                (SearchMode::Greedy, _) => false,
                (SearchMode::AStar, _) => ng < node.g,
            };
            if !offer || candidates.iter().any(|c: &Candidate| c.cell == t) {
                continue;
            }
            let h = blended_heuristic(t, self.goal, value, self.model.heuristic_weight);
            candidates.push(Candidate {
                id: candidates.len() as u32 + 1,
                cell: t,
                parent: cell,
                g: ng as f64,
                h,
                f: self.priority(ng, h),
            });
        }
        self.pending = candidates.clone();
        Ok(Step::Expanded { cell, parent, candidates })
    }

    /// Apply one verdict per pending candidate, in candidate order.
    pub fn resolve(&mut self, verdicts: &[Verdict]) -> Result<(), SearchError> {
        if verdicts.len() != self.pending.len() {
            return Err(SearchError::VerdictCount { expected: self.pending.len(), got: verdicts.len() });
        }
        let pending = core::mem::take(&mut self.pending);
        for (c, v) in pending.iter().zip(verdicts) {
            let i = self.idx(c.cell);
            let p = self.idx(c.parent);
            let g = c.g as u64;
            match v {
                Verdict::Accept => self.open(i, g, Some(p), c.h),
                Verdict::Decline => {
                    self.nodes[i] = Node { status: Status::Deferred, g, parent: Some(p), seq: 0, h: c.h };
                    self.deferred.insert(i);
                }
            }
            self.verdict_log.push((c.cell, *v));
        }
        Ok(())
    }

    pub fn accept_all(&mut self) {
        let n = self.pending.len();
        // length always matches
        let _ = self.resolve(&vec![Verdict::Accept; n]);
    }

    /// Start-to-goal path, once the goal has been expanded.
    pub fn path(&self) -> Vec<CellCoord> {
        if self.phase != Phase::Found {
            return Vec::new();
        }
        walk_back(self.goal, self.nodes.len(), |c| self.parent_of(c)).unwrap_or_default()
    }

    pub fn outcome(&self) -> SearchOutcome {
        let mut out = SearchOutcome {
            expansions: self.expansions.clone(),
            jump_points: self.jump_points.clone(),
            verdict_log: self.verdict_log.clone(),
            recycles: self.recycles,
            ..Default::default()
        };
        for (i, n) in self.nodes.iter().enumerate() {
            let c = self.coord(i);
            match n.status {
                Status::Open => {
                    out.open_final.insert(c);
                }
                Status::Closed => {
                    out.closed_final.insert(c);
                }
                Status::Deferred => {
                    out.deferred_final.insert(c);
                }
                Status::Unseen => {}
            }
            if self.accessed[i] {
                out.accessed.insert(c);
            }
        }
        // pending candidates are neither open nor deferred yet
        out.path = self.path();
        out.path_cost = path_cost(&out.path) * self.model.cost_scale as u64;
        out
    }
}

/// Sum of Manhattan step costs along consecutive path cells.
pub fn path_cost(path: &[CellCoord]) -> u64 {
    path.windows(2).map(|w| manhattan(w[0], w[1]) as u64).sum()
}

/// Verdict callback for [`plan`].
pub type VerdictHook<'a> = &'a mut dyn FnMut(&[Candidate]) -> Vec<Verdict>;

/// Run a full search. `advisor_hook` receives every non-empty candidate batch
/// and returns verdicts in candidate order; missing verdicts count as accept.
pub fn plan(
    map: &GridMap,
    start: CellCoord,
    goal: CellCoord,
    cost_model: CostModel,
    value: Option<&ValueTable>,
    mut advisor_hook: Option<VerdictHook<'_>>,
) -> Result<SearchOutcome, SearchError> {
    let mut state = SearchState::new(map, start, goal, cost_model)?;
    loop {
        match state.expand(map, value)? {
            Step::GoalReached { .. } => return Ok(state.outcome()),
            Step::Expanded { candidates, .. } => {
                if candidates.is_empty() {
                    continue;
                }
                match advisor_hook.as_mut() {
                    Some(hook) => {
                        let mut verdicts = hook(&candidates);
                        verdicts.resize(candidates.len(), Verdict::Accept);
                        state.resolve(&verdicts)?;
                    }
                    None => state.accept_all(),
                }
            }
        }
    }
}
