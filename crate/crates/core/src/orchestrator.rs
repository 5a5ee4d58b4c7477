//! Staged planning sessions.
//!
//! A session walks a small state machine:
//!
//! ```text
//! Init -> AwaitSeed -> Expanding <-> AwaitVerdict
//!                         |
//!                         v
//!                     StageDone -> AwaitSeed (next stage) | Done
//! any -> Failed
//! ```
//!
//! Each [`PlanningSession::step`] does exactly one unit of work and appends
//! one [`SessionEvent`] to the log. Advisor-guided planners split the run into
//! stages: the advisor names a sub-goal and a reward seed, a guided search
//! runs from the current cell to that sub-goal while the value table learns
//! from every expansion, and the next stage starts where the last one ended.
//! Plain planners run a single stage straight to the goal.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{
    build_init_prompt, render_candidates, render_stage_request, Advisor, AdvisorError, CandidateSet, ChatMessage,
    ScriptedOracle, StageContext,
};
use crate::grid::{CellCoord, GridMap};
use crate::metrics::{PlannerKind, RunMetrics};
use crate::search::{
    path_cost, Candidate, CostModel, KeyPoint, SearchError, SearchMode, SearchOutcome, SearchState, Step, Verdict,
};
use crate::value::{ObservationMask, RewardSeed, ValueError, ValueParams, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    AwaitSeed,
    Expanding,
    AwaitVerdict,
    StageDone,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("verdicts do not match pending candidate {0}")]
    UnknownCandidate(u32),
    #[error("incompatible configuration: {0}")]
    IncompatibleConfig(&'static str),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("replay diverged at event {0}")]
    ReplayDiverged(u64),
}

/// Who rules on candidates and picks sub-goals.
pub enum SessionAdvisor {
    None,
    Scripted(ScriptedOracle),
    /// Verdicts arrive through [`PlanningSession::submit_verdict`].
    Human,
    External(Box<dyn Advisor + Send>),
}

impl SessionAdvisor {
    pub fn label(&self) -> &str {
        match self {
            SessionAdvisor::None => "none",
            SessionAdvisor::Scripted(_) => "scripted",
            SessionAdvisor::Human => "human",
            SessionAdvisor::External(a) => a.name(),
        }
    }

    fn as_advisor(&mut self) -> Option<&mut dyn Advisor> {
        match self {
            SessionAdvisor::Scripted(o) => Some(o),
            SessionAdvisor::External(a) => Some(a.as_mut()),
            SessionAdvisor::None | SessionAdvisor::Human => None,
        }
    }
}

impl core::fmt::Debug for SessionAdvisor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub value: ValueParams,
    /// Apply advisor verdicts without pausing.
    pub autopilot: bool,
    /// After this many stages the goal itself becomes the sub-goal.
    pub max_stages: usize,
    /// Consecutive advisor errors tolerated before the session fails.
    pub advisor_retries: u32,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self { value: ValueParams::default(), autopilot: true, max_stages: 64, advisor_retries: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Expansion {
        stage: usize,
        cell: CellCoord,
        parent: Option<CellCoord>,
        candidates: Vec<Candidate>,
        verdicts: Vec<(u32, Verdict)>,
    },
    Proposal {
        stage: usize,
        cell: CellCoord,
        parent: Option<CellCoord>,
        candidates: Vec<Candidate>,
        suggested: Vec<(u32, Verdict)>,
    },
    VerdictNeeded {
        stage: usize,
        cell: CellCoord,
        parent: Option<CellCoord>,
        candidates: Vec<Candidate>,
    },
    VerdictApplied {
        verdicts: Vec<(u32, Verdict)>,
    },
    SubgoalChosen {
        stage: usize,
        from: CellCoord,
        subgoal: CellCoord,
        seed: RewardSeed,
    },
    StageComplete {
        stage: usize,
        subgoal: CellCoord,
        path: Vec<CellCoord>,
    },
    PathFound {
        path: Vec<CellCoord>,
        path_cost: u64,
        metrics: RunMetrics,
    },
    Failure {
        reason: String,
        fatal: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub from: CellCoord,
    pub subgoal: CellCoord,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingProposal {
    pub candidates: Vec<Candidate>,
    /// The advisor's own verdicts, absent for a human advisor.
    pub suggested: Option<Vec<(u32, Verdict)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Free,
    Obstacle,
    Open,
    Closed,
    Deferred,
    Path,
    Start,
    Goal,
}

impl CellClass {
    pub fn code(self) -> char {
        match self {
            CellClass::Free => '.',
            CellClass::Obstacle => '#',
            CellClass::Open => 'o',
            CellClass::Closed => 'c',
            CellClass::Deferred => 'd',
            CellClass::Path => 'p',
            CellClass::Start => 'S',
            CellClass::Goal => 'G',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            '.' => CellClass::Free,
            '#' => CellClass::Obstacle,
            'o' => CellClass::Open,
            'c' => CellClass::Closed,
            'd' => CellClass::Deferred,
            'p' => CellClass::Path,
            'S' => CellClass::Start,
            'G' => CellClass::Goal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub expansions: usize,
    pub complexity: usize,
    pub path_length: Option<usize>,
    pub mdt: Option<usize>,
    pub path_cost: Option<u64>,
}

/// Immutable view of a session for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub map_name: String,
    pub planner: PlannerKind,
    pub advisor: String,
    pub phase: Phase,
    pub stage_index: usize,
    pub seq: u64,
    pub width: u32,
    pub height: u32,
    pub current: CellCoord,
    pub subgoal: CellCoord,
    /// Row-major cell classes.
    pub cells: Vec<CellClass>,
    /// Path cells with their position along the path (for colour gradients).
    pub path: Vec<(CellCoord, usize)>,
    pub metrics: SnapshotMetrics,
    pub pending: Option<PendingProposal>,
    pub transcript_len: usize,
    pub transcript_tail: Vec<ChatMessage>,
    pub failure: Option<String>,
}

const TRANSCRIPT_TAIL: usize = 16;

#[derive(Debug)]
pub struct PlanningSession {
    id: String,
    map: GridMap,
    planner: PlannerKind,
    advisor: SessionAdvisor,
    params: SessionParams,
    phase: Phase,
    stage_index: usize,
    current: CellCoord,
    subgoal: CellCoord,
    value: ValueTable,
    mask: ObservationMask,
    search: Option<SearchState>,
    stages: Vec<StageRecord>,
    key_points: Vec<KeyPoint>,
    used_subgoals: Vec<CellCoord>,
    stage_retry_used: bool,
    advisor_failures: u32,
    pending: Option<PendingProposal>,
    transcript: Vec<ChatMessage>,
    events: Vec<SessionEvent>,
    failure: Option<String>,
}

impl PlanningSession {
    /// Validate the configuration and build the session. Advisor-guided
    /// planners wait for their first stage plan; plain planners start expanding.
    pub fn create(
        id: impl Into<String>,
        map: GridMap,
        planner: PlannerKind,
        advisor: SessionAdvisor,
        params: SessionParams,
    ) -> Result<Self, SessionError> {
        if planner == PlannerKind::Ppo {
            return Err(SessionError::IncompatibleConfig("ppo is not a search planner"));
        }
        if planner.uses_advisor() && matches!(advisor, SessionAdvisor::None) {
            return Err(SessionError::IncompatibleConfig("advisor-guided planners need an advisor"));
        }
        if matches!(advisor, SessionAdvisor::Human) && params.autopilot {
            return Err(SessionError::IncompatibleConfig("a human advisor cannot run on autopilot"));
        }
        let value = ValueTable::new(&map, params.value)?;
        let mut mask = ObservationMask::for_map(&map);
        mask.reveal(map.start(), params.value.reveal_radius);
        let mode = Self::mode_of(planner);
        let transcript = alloc::vec![ChatMessage::system(build_init_prompt(&map, mode))];
        let mut session = Self {
            id: id.into(),
            current: map.start(),
            subgoal: map.goal(),
            map,
            planner,
            advisor,
            params,
            phase: Phase::Init,
            stage_index: 0,
            value,
            mask,
            search: None,
            stages: Vec::new(),
            key_points: Vec::new(),
            used_subgoals: Vec::new(),
            stage_retry_used: false,
            advisor_failures: 0,
            pending: None,
            transcript,
            events: Vec::new(),
            failure: None,
        };
        if planner.uses_advisor() {
            session.phase = Phase::AwaitSeed;
        } else {
            session.begin_stage(session.map.goal())?;
            session.phase = Phase::Expanding;
        }
        Ok(session)
    }

    fn mode_of(planner: PlannerKind) -> SearchMode {
        match planner {
            PlannerKind::Greedy | PlannerKind::LlmGreedy => SearchMode::Greedy,
            _ => SearchMode::AStar,
        }
    }

    fn cost_model(&self) -> CostModel {
        let base = match Self::mode_of(self.planner) {
            SearchMode::AStar => CostModel::astar(),
            SearchMode::Greedy => CostModel::greedy(),
        };
        if self.planner.uses_advisor() {
            base.with_weight(self.params.value.lambda)
        } else {
            base
        }
    }

    fn begin_stage(&mut self, subgoal: CellCoord) -> Result<(), SessionError> {
        self.subgoal = subgoal;
        self.search = Some(SearchState::new(&self.map, self.current, subgoal, self.cost_model())?);
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn planner(&self) -> PlannerKind {
        self.planner
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn stage_index(&self) -> usize {
        self.stage_index
    }

    pub fn value(&self) -> &ValueTable {
        &self.value
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn events_after(&self, seq: u64) -> &[SessionEvent] {
        let from = self.events.partition_point(|e| e.seq <= seq);
        &self.events[from..]
    }

    /// Sequence number of the last event, 0 before the first one.
    pub fn seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn transcript(&self) -> &[ChatMessage] {
        &self.transcript
    }

    pub fn pending(&self) -> Option<&PendingProposal> {
        self.pending.as_ref()
    }

    fn emit(&mut self, payload: EventPayload) -> SessionEvent {
        let event = SessionEvent { seq: self.seq() + 1, payload };
        self.events.push(event.clone());
        event
    }

    fn fail(&mut self, reason: String) -> SessionEvent {
        self.phase = Phase::Failed;
        self.search = None;
        self.pending = None;
        self.failure = Some(reason.clone());
        self.emit(EventPayload::Failure { reason, fatal: true })
    }

    // Advisor errors are retried on the next step until the budget is spent.
    fn advisor_error(&mut self, e: AdvisorError) -> Result<SessionEvent, SessionError> {
        self.advisor_failures += 1;
        if self.advisor_failures > self.params.advisor_retries {
            Ok(self.fail(format!("advisor failed: {e}")))
        } else {
            Err(SessionError::Advisor(e))
        }
    }

    /// Advance by one unit of work.
    pub fn step(&mut self) -> Result<SessionEvent, SessionError> {
        match self.phase {
            Phase::AwaitSeed => self.step_seed(),
            Phase::Expanding => self.step_expand(),
            Phase::StageDone => Ok(self.step_stage_done()),
            other => Err(SessionError::WrongPhase(other)),
        }
    }

    fn step_seed(&mut self) -> Result<SessionEvent, SessionError> {
        let mut excluded = self.used_subgoals.clone();
        excluded.push(self.current);
        let explored = self.explored();
        let ctx = StageContext {
            current: self.current,
            goal: self.map.goal(),
            stage: self.stage_index,
            key_points: &self.key_points,
            mask: &self.mask,
            excluded: &excluded,
            explored,
        };
        let request = render_stage_request(&ctx);
        let forced_goal = self.stage_index + 1 >= self.params.max_stages;
        let planned = match self.advisor.as_advisor() {
            Some(adv) => adv.plan_stage(&self.map, &ctx),
            None => Err(AdvisorError::NoViableSubgoal),
        };
        let (mut subgoal, seed, rationale) = match planned {
            Ok(p) => (p.subgoal, p.seed, p.rationale),
            Err(AdvisorError::NoViableSubgoal) => (self.map.goal(), RewardSeed::default(), "SUBGOAL goal".to_string()),
            Err(e) => return self.advisor_error(e),
        };
        self.advisor_failures = 0;
        if forced_goal || subgoal == self.current || !self.map.is_free(subgoal) {
            subgoal = self.map.goal();
        }
        self.transcript.push(ChatMessage::user(request));
        self.transcript.push(ChatMessage::assistant(rationale));
        self.value.apply_reward_seed(seed.clone())?;
        self.used_subgoals.push(subgoal);
        self.begin_stage(subgoal)?;
        self.phase = Phase::Expanding;
        Ok(self.emit(EventPayload::SubgoalChosen { stage: self.stage_index, from: self.current, subgoal, seed }))
    }

    fn learn_from(&mut self, parent: Option<CellCoord>, cell: CellCoord) -> Result<(), SessionError> {
        if let Some(p) = parent {
            let r = self.value.pcat_reward(p, cell, &self.mask);
            self.value.td_update(p, cell, r)?;
        }
        self.mask.reveal(cell, self.params.value.reveal_radius);
        Ok(())
    }

    fn explored(&self) -> usize {
        self.stages.iter().map(|s| s.outcome.expansions.len()).sum::<usize>()
            + self.search.as_ref().map_or(0, |s| s.expansions().len())
    }

    fn candidate_set(&self, candidates: Vec<Candidate>) -> CandidateSet {
        let jump_points = self
            .key_points
            .iter()
            .map(|k| k.cell)
            .chain(self.search.iter().flat_map(|s| s.jump_points().iter().map(|k| k.cell)))
            .collect();
        CandidateSet {
            candidates,
            mode: Self::mode_of(self.planner),
            stage: self.stage_index,
            subgoal: self.subgoal,
            goal: self.map.goal(),
            jump_points,
            explored: self.explored(),
        }
    }

    fn step_expand(&mut self) -> Result<SessionEvent, SessionError> {
        let search = self.search.as_mut().ok_or(SessionError::WrongPhase(self.phase))?;
        // a previous advisor call failed after the expansion: ask again
        if !search.pending().is_empty() {
            let (cell, parent) = self.last_expanded();
            let candidates = self.search.as_ref().map(|s| s.pending().to_vec()).unwrap_or_default();
            return self.rule_on(cell, parent, candidates);
        }
        let value = self.planner.uses_advisor().then_some(&self.value);
        match search.expand(&self.map, value) {
            Err(SearchError::NoPath) => Ok(self.stage_failed()),
            Err(e) => Err(e.into()),
            Ok(Step::GoalReached { cell, parent }) => {
                self.learn_from(parent, cell)?;
                self.finish_stage();
                Ok(self.emit(EventPayload::Expansion {
                    stage: self.stage_index,
                    cell,
                    parent,
                    candidates: Vec::new(),
                    verdicts: Vec::new(),
                }))
            }
            Ok(Step::Expanded { cell, parent, candidates }) => {
                self.learn_from(parent, cell)?;
                self.rule_on(cell, parent, candidates)
            }
        }
    }

    fn last_expanded(&self) -> (CellCoord, Option<CellCoord>) {
        let s = self.search.as_ref().expect("search in progress");
        let cell = *s.expansions().last().expect("at least one expansion");
        (cell, s.parent_of(cell))
    }

    fn rule_on(
        &mut self,
        cell: CellCoord,
        parent: Option<CellCoord>,
        candidates: Vec<Candidate>,
    ) -> Result<SessionEvent, SessionError> {
        let stage = self.stage_index;
        let search = self.search.as_mut().expect("search in progress");
        if candidates.is_empty() || matches!(self.advisor, SessionAdvisor::None) {
            search.accept_all();
            let verdicts = candidates.iter().map(|c| (c.id, Verdict::Accept)).collect();
            return Ok(self.emit(EventPayload::Expansion { stage, cell, parent, candidates, verdicts }));
        }
        if matches!(self.advisor, SessionAdvisor::Human) {
            self.pending = Some(PendingProposal { candidates: candidates.clone(), suggested: None });
            self.phase = Phase::AwaitVerdict;
            return Ok(self.emit(EventPayload::VerdictNeeded { stage, cell, parent, candidates }));
        }
        let set = self.candidate_set(candidates.clone());
        let request = render_candidates(&set);
        let adv = self.advisor.as_advisor().expect("machine advisor");
        let response = match adv.request_verdicts(&self.map, &set) {
            Ok(r) => r.normalized(&set),
            Err(e) => return self.advisor_error(e),
        };
        self.advisor_failures = 0;
        self.transcript.push(ChatMessage::user(request));
        self.transcript.push(ChatMessage::assistant(response.rationale.clone()));
        let verdicts = response.verdicts;
        if self.params.autopilot {
            let ordered: Vec<Verdict> = verdicts.iter().map(|(_, v)| *v).collect();
            self.search.as_mut().expect("search in progress").resolve(&ordered)?;
            Ok(self.emit(EventPayload::Expansion { stage, cell, parent, candidates, verdicts }))
        } else {
            self.pending = Some(PendingProposal { candidates: candidates.clone(), suggested: Some(verdicts.clone()) });
            self.phase = Phase::AwaitVerdict;
            Ok(self.emit(EventPayload::Proposal { stage, cell, parent, candidates, suggested: verdicts }))
        }
    }

    /// Apply the human's (or operator's) verdicts to the pending candidates.
    /// Every pending id must be answered exactly once.
    pub fn submit_verdict(&mut self, verdicts: &[(u32, Verdict)]) -> Result<SessionEvent, SessionError> {
        if self.phase != Phase::AwaitVerdict {
            return Err(SessionError::WrongPhase(self.phase));
        }
        let pending = self.pending.as_ref().expect("pending proposal in AwaitVerdict");
        if let Some((id, _)) = verdicts.iter().find(|(id, _)| !pending.candidates.iter().any(|c| c.id == *id)) {
            return Err(SessionError::UnknownCandidate(*id));
        }
        let mut ordered = Vec::with_capacity(pending.candidates.len());
        for c in &pending.candidates {
            let mut answers = verdicts.iter().filter(|(id, _)| *id == c.id);
            match (answers.next(), answers.next()) {
                (Some((_, v)), None) => ordered.push((c.id, *v)),
                _ => return Err(SessionError::UnknownCandidate(c.id)),
            }
        }
        let plain: Vec<Verdict> = ordered.iter().map(|(_, v)| *v).collect();
        self.search.as_mut().expect("search in progress").resolve(&plain)?;
        self.pending = None;
        self.phase = Phase::Expanding;
        Ok(self.emit(EventPayload::VerdictApplied { verdicts: ordered }))
    }

    fn finish_stage(&mut self) {
        let search = self.search.take().expect("search in progress");
        self.key_points.extend_from_slice(search.jump_points());
        self.stages.push(StageRecord {
            index: self.stage_index,
            from: self.current,
            subgoal: self.subgoal,
            outcome: search.outcome(),
        });
        self.stage_retry_used = false;
        self.phase = Phase::StageDone;
    }

    fn stage_failed(&mut self) -> SessionEvent {
        let subgoal = self.subgoal;
        let retry = self.planner.uses_advisor() && !self.stage_retry_used && subgoal != self.map.goal();
        if retry {
            if let Some(s) = self.search.take() {
                self.key_points.extend_from_slice(s.jump_points());
            }
            self.stage_retry_used = true;
            self.phase = Phase::AwaitSeed;
            self.emit(EventPayload::Failure { reason: format!("no path to sub-goal {subgoal}"), fatal: false })
        } else {
            self.fail(format!("no path to {subgoal}"))
        }
    }

    fn step_stage_done(&mut self) -> SessionEvent {
        let record = self.stages.last().expect("a finished stage");
        if record.subgoal == self.map.goal() {
            self.phase = Phase::Done;
            let path = self.full_path();
            let outcome = self.accumulated();
            let metrics = RunMetrics::from_outcome(&outcome, self.planner, self.map.start(), self.map.goal())
                .expect("stage paths join into one connected path");
            let cost = path_cost(&path);
            return self.emit(EventPayload::PathFound { path, path_cost: cost, metrics });
        }
        let (stage, subgoal, path) = (record.index, record.subgoal, record.outcome.path.clone());
        self.current = subgoal;
        self.stage_index += 1;
        self.phase = Phase::AwaitSeed;
        self.emit(EventPayload::StageComplete { stage, subgoal, path })
    }

    /// Stage paths joined end to end.
    pub fn full_path(&self) -> Vec<CellCoord> {
        let mut path: Vec<CellCoord> = Vec::new();
        for s in &self.stages {
            let skip = usize::from(path.last() == s.outcome.path.first() && !path.is_empty());
            path.extend_from_slice(&s.outcome.path[skip..]);
        }
        path
    }

    /// All stages (and the live search) merged into one outcome. A cell counts
    /// once, in its most advanced state: closed over open over deferred.
    pub fn accumulated(&self) -> SearchOutcome {
        let live = self.search.as_ref().map(SearchState::outcome);
        let parts = self.stages.iter().map(|s| &s.outcome).chain(live.as_ref());
        let mut out = SearchOutcome::default();
        let mut open = BTreeSet::new();
        let mut deferred = BTreeSet::new();
        for o in parts {
            out.closed_final.extend(o.closed_final.iter().copied());
            open.extend(o.open_final.iter().copied());
            deferred.extend(o.deferred_final.iter().copied());
            out.accessed.extend(o.accessed.iter().copied());
            out.expansions.extend_from_slice(&o.expansions);
            out.jump_points.extend_from_slice(&o.jump_points);
            out.verdict_log.extend_from_slice(&o.verdict_log);
            out.recycles += o.recycles;
        }
        out.open_final = open.difference(&out.closed_final).copied().collect();
        out.deferred_final =
            deferred.into_iter().filter(|c| !out.closed_final.contains(c) && !out.open_final.contains(c)).collect();
        if self.phase == Phase::Done || (self.phase == Phase::StageDone && self.subgoal == self.map.goal()) {
            out.path = self.full_path();
            out.path_cost = path_cost(&out.path);
        }
        out
    }

    /// Drive the session until it finishes or pauses for verdicts.
    pub fn run_until_pause(&mut self, max_steps: usize) -> Result<Phase, SessionError> {
        for _ in 0..max_steps {
            if self.phase.is_terminal() || self.phase == Phase::AwaitVerdict {
                break;
            }
            self.step()?;
        }
        Ok(self.phase)
    }

    pub fn snapshot(&self) -> Snapshot {
        let outcome = self.accumulated();
        let (w, h) = (self.map.width(), self.map.height());
        let mut cells: Vec<CellClass> = self
            .map
            .tiles()
            .iter()
            .map(|t| match t {
                crate::grid::Tile::Free => CellClass::Free,
                crate::grid::Tile::Obstacle => CellClass::Obstacle,
            })
            .collect();
        let mut mark = |c: CellCoord, class: CellClass| {
            if let Some(i) = self.map.index(c) {
                cells[i] = class;
            }
        };
        for &c in &outcome.deferred_final {
            mark(c, CellClass::Deferred);
        }
        for &c in &outcome.open_final {
            mark(c, CellClass::Open);
        }
        for &c in &outcome.closed_final {
            mark(c, CellClass::Closed);
        }
        let path = if outcome.path.is_empty() { self.full_path() } else { outcome.path.clone() };
        for &c in &path {
            mark(c, CellClass::Path);
        }
        mark(self.map.start(), CellClass::Start);
        mark(self.map.goal(), CellClass::Goal);

        let done = self.phase == Phase::Done;
        let final_metrics = done
            .then(|| RunMetrics::from_outcome(&outcome, self.planner, self.map.start(), self.map.goal()).ok())
            .flatten();
        let metrics = SnapshotMetrics {
            expansions: outcome.expansions.len(),
            complexity: crate::metrics::search_complexity(&outcome, self.planner),
            path_length: final_metrics.map(|m| m.path_length),
            mdt: final_metrics.map(|m| m.mdt),
            path_cost: done.then(|| path_cost(&path)),
        };
        let tail_from = self.transcript.len().saturating_sub(TRANSCRIPT_TAIL);
        Snapshot {
            id: self.id.clone(),
            map_name: self.map.name().into(),
            planner: self.planner,
            advisor: self.advisor.label().into(),
            phase: self.phase,
            stage_index: self.stage_index,
            seq: self.seq(),
            width: w,
            height: h,
            current: self.current,
            subgoal: self.subgoal,
            cells,
            path: path.iter().copied().enumerate().map(|(i, c)| (c, i)).collect(),
            metrics,
            pending: self.pending.clone(),
            transcript_len: self.transcript.len(),
            transcript_tail: self.transcript[tail_from..].to_vec(),
            failure: self.failure.clone(),
        }
    }

    /// Re-drive a freshly created session with the commands implied by a
    /// recorded event log, checking that every regenerated event matches.
    pub fn replay(mut fresh: PlanningSession, events: &[SessionEvent]) -> Result<PlanningSession, SessionError> {
        for recorded in events {
            let produced = match &recorded.payload {
                EventPayload::VerdictApplied { verdicts } => fresh.submit_verdict(verdicts)?,
                _ => fresh.step()?,
            };
            if &produced != recorded {
                return Err(SessionError::ReplayDiverged(recorded.seq));
            }
        }
        Ok(fresh)
    }
}
