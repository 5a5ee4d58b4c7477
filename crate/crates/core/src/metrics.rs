//! Path length, deviation count (MDT) and search complexity.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::CellCoord;
use crate::search::SearchOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    #[serde(rename = "astar")]
    AStar,
    Greedy,
    #[serde(rename = "llm-astar")]
    LlmAStar,
    LlmGreedy,
    Ppo,
}

impl PlannerKind {
    /// Column order of the result tables.
    pub const ALL: [PlannerKind; 5] =
        [PlannerKind::AStar, PlannerKind::Greedy, PlannerKind::LlmAStar, PlannerKind::LlmGreedy, PlannerKind::Ppo];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::AStar => "astar",
            PlannerKind::Greedy => "greedy",
            PlannerKind::LlmAStar => "llm-astar",
            PlannerKind::LlmGreedy => "llm-greedy",
            PlannerKind::Ppo => "ppo",
        }
    }

    /// Human-readable column title.
    pub fn title(self) -> &'static str {
        match self {
            PlannerKind::AStar => "A*",
            PlannerKind::Greedy => "Greedy",
            PlannerKind::LlmAStar => "LLM A*",
            PlannerKind::LlmGreedy => "LLM Greedy",
            PlannerKind::Ppo => "PPO",
        }
    }

    pub fn uses_advisor(self) -> bool {
        matches!(self, PlannerKind::LlmAStar | PlannerKind::LlmGreedy)
    }

    /// Planners whose complexity is `|open| + |closed|` rather than cells accessed.
    pub fn is_astar_family(self) -> bool {
        matches!(self, PlannerKind::AStar | PlannerKind::LlmAStar)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PlannerKind::ALL.into_iter().find(|p| p.as_str() == norm).ok_or(MetricsError::UnknownPlanner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("path steps {0} -> {1} are not adjacent")]
    DisconnectedPath(CellCoord, CellCoord),
    #[error("path is empty")]
    EmptyPath,
    #[error("unknown planner name")]
    UnknownPlanner,
}

/// Number of cells on a connected path.
pub fn path_length(path: &[CellCoord]) -> Result<usize, MetricsError> {
    if let Some(w) = path.windows(2).find(|w| !w[0].is_adjacent8(w[1])) {
        return Err(MetricsError::DisconnectedPath(w[0], w[1]));
    }
    Ok(path.len())
}

/// Count of steps pointing away from the start-to-goal direction, i.e.
/// steps whose angle with `goal - start` lies in (pi/2, pi]. Evaluated as a
/// strictly negative dot product; zero-length vectors never count.
pub fn mdt(path: &[CellCoord], start: CellCoord, goal: CellCoord) -> Result<usize, MetricsError> {
    if path.is_empty() {
        return Err(MetricsError::EmptyPath);
    }
    let vd = (goal.x as i64 - start.x as i64, goal.y as i64 - start.y as i64);
    Ok(path
        .windows(2)
        .filter(|w| {
            let vt = (w[1].x as i64 - w[0].x as i64, w[1].y as i64 - w[0].y as i64);
            vd.0 * vt.0 + vd.1 * vt.1 < 0
        })
        .count())
}

/// `|open| + |closed|` (plus recycled deferrals) for the A* family, distinct
/// cells accessed for greedy and RL planners.
pub fn search_complexity(outcome: &SearchOutcome, planner: PlannerKind) -> usize {
    if planner.is_astar_family() {
        let recycled_deferrals = outcome.deferred_final.intersection(&outcome.accessed).count();
        outcome.open_final.len() + outcome.closed_final.len() + recycled_deferrals
    } else {
        outcome.accessed.len()
    }
}

/// One table row: the three metrics averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub planner: PlannerKind,
    pub map_name: String,
    pub repeats: usize,
    /// `None` marks a failure row (no path, rollout diverged).
    pub path_length: Option<f64>,
    pub mdt: Option<f64>,
    pub complexity: Option<f64>,
    /// Repeats that failed.
    pub failures: usize,
}

/// Per-run metric triple before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub path_length: usize,
    pub mdt: usize,
    pub complexity: usize,
}

impl RunMetrics {
    pub fn from_outcome(
        outcome: &SearchOutcome,
        planner: PlannerKind,
        start: CellCoord,
        goal: CellCoord,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            path_length: path_length(&outcome.path)?,
            mdt: mdt(&outcome.path, start, goal)?,
            complexity: search_complexity(outcome, planner),
        })
    }
}

impl MetricsReport {
    /// Arithmetic mean over the successful runs; failures are counted separately.
    pub fn aggregate(planner: PlannerKind, map_name: impl Into<String>, runs: &[Option<RunMetrics>]) -> Self {
        let ok: alloc::vec::Vec<&RunMetrics> = runs.iter().flatten().collect();
        let failures = runs.len() - ok.len();
        let mean = |f: fn(&RunMetrics) -> usize| -> Option<f64> {
            (!ok.is_empty() && failures == 0).then(|| ok.iter().map(|r| f(r) as f64).sum::<f64>() / ok.len() as f64)
        };
        Self {
            planner,
            map_name: map_name.into(),
            repeats: runs.len(),
            path_length: mean(|r| r.path_length),
            mdt: mean(|r| r.mdt),
            complexity: mean(|r| r.complexity),
            failures,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failures > 0
    }
}
