//! JSON shapes exchanged with clients of the session service.

use gridplan_core::advisor::ChatMessage;
use gridplan_core::metrics::PlannerKind;
use gridplan_core::orchestrator::{CellClass, Phase, Snapshot, SnapshotMetrics};
use gridplan_core::search::{Candidate, Verdict};
use gridplan_core::CellCoord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("unknown cell code {0:?}")]
    BadCode(char),
    #[error("run length missing or zero before {0:?}")]
    BadCount(char),
    #[error("trailing digits without a cell code")]
    Trailing,
    #[error("decoded {got} cells, expected {want}")]
    WrongSize { got: usize, want: usize },
}

/// Run-length encode cell classes as `<count><code>` runs, e.g. `3.1#2o`.
pub fn encode_rle(cells: &[CellClass]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < cells.len() {
        let class = cells[i];
        let run = cells[i..].iter().take_while(|&&c| c == class).count();
        out.push_str(&run.to_string());
        out.push(class.code());
        i += run;
    }
    out
}

pub fn decode_rle(text: &str, expected: usize) -> Result<Vec<CellClass>, RleError> {
    let mut out = Vec::with_capacity(expected);
    let mut count: Option<usize> = None;
    for ch in text.chars() {
        if let Some(d) = ch.to_digit(10) {
            count = Some(count.unwrap_or(0).saturating_mul(10).saturating_add(d as usize));
            continue;
        }
        let class = CellClass::from_code(ch).ok_or(RleError::BadCode(ch))?;
        let n = count.take().filter(|&n| n > 0).ok_or(RleError::BadCount(ch))?;
        if out.len() + n > expected {
            return Err(RleError::WrongSize { got: out.len() + n, want: expected });
        }
        out.extend(std::iter::repeat(class).take(n));
    }
    if count.is_some() {
        return Err(RleError::Trailing);
    }
    if out.len() != expected {
        return Err(RleError::WrongSize { got: out.len(), want: expected });
    }
    Ok(out)
}

/// A verdict as clients send it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireVerdict {
    pub id: u32,
    pub accept: bool,
}

impl WireVerdict {
    pub fn to_core(self) -> (u32, Verdict) {
        (self.id, if self.accept { Verdict::Accept } else { Verdict::Decline })
    }

    pub fn from_core((id, v): (u32, Verdict)) -> Self {
        Self { id, accept: v == Verdict::Accept }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePending {
    pub candidates: Vec<Candidate>,
    pub suggested: Option<Vec<WireVerdict>>,
}

/// Snapshot projection sent over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSession {
    pub id: String,
    pub map_name: String,
    pub planner: PlannerKind,
    pub advisor: String,
    pub phase: Phase,
    pub stage_index: usize,
    /// Sequence number of the last event applied.
    pub seq: u64,
    pub width: u32,
    pub height: u32,
    /// Row-major cell classes, run-length encoded.
    pub grid: String,
    pub current: CellCoord,
    pub subgoal: CellCoord,
    /// Path cells in order; the index gives the colour gradient.
    pub path: Vec<CellCoord>,
    pub metrics: SnapshotMetrics,
    pub pending: Option<WirePending>,
    pub transcript_len: usize,
    pub transcript_tail: Vec<ChatMessage>,
    pub failure: Option<String>,
}

impl WireSession {
    pub fn decode_grid(&self) -> Result<Vec<CellClass>, RleError> {
        decode_rle(&self.grid, self.width as usize * self.height as usize)
    }
}

impl From<&Snapshot> for WireSession {
    fn from(s: &Snapshot) -> Self {
        Self {
            id: s.id.clone(),
            map_name: s.map_name.clone(),
            planner: s.planner,
            advisor: s.advisor.clone(),
            phase: s.phase,
            stage_index: s.stage_index,
            seq: s.seq,
            width: s.width,
            height: s.height,
            grid: encode_rle(&s.cells),
            current: s.current,
            subgoal: s.subgoal,
            path: s.path.iter().map(|(c, _)| *c).collect(),
            metrics: s.metrics.clone(),
            pending: s.pending.as_ref().map(|p| WirePending {
                candidates: p.candidates.clone(),
                suggested: p.suggested.as_ref().map(|v| v.iter().copied().map(WireVerdict::from_core).collect()),
            }),
            transcript_len: s.transcript_len,
            transcript_tail: s.transcript_tail.clone(),
            failure: s.failure.clone(),
        }
    }
}
