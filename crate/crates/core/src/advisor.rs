//! The high-level determiner that steers the search.
//!
//! An [`Advisor`] answers two kinds of questions: which freshly generated
//! frontier cells may enter the open set, and where the next stage of a
//! session should aim (sub-goal plus an initial reward seed). Three
//! implementations exist: [`ScriptedOracle`] (deterministic, used for tests
//! and benchmarks), [`LlmAdvisor`] (a chat model behind a [`ChatTransport`])
//! and the human proxy, which the session layer realises by pausing until
//! verdicts are submitted.
//!
//! The chat wire format and the reply grammar live here too so that the
//! transport in the `gridplan` crate only moves bytes.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{manhattan, CellCoord, Direction, GridMap};
use crate::search::{Candidate, KeyPoint, SearchMode, Verdict};
use crate::value::{ObservationMask, RewardSeed};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdvisorError {
    #[error("advisor did not answer in time")]
    Timeout,
    #[error("advisor reply could not be parsed: {0}")]
    MalformedReply(String),
    #[error("no viable sub-goal")]
    NoViableSubgoal,
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("transcript does not fit the token budget of {0}")]
    BudgetExceeded(usize),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
}

/// Candidates offered in one verdict round, plus what the advisor needs to
/// judge them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub mode: SearchMode,
    pub stage: usize,
    pub subgoal: CellCoord,
    pub goal: CellCoord,
    pub jump_points: Vec<CellCoord>,
    pub explored: usize,
}

impl CandidateSet {
    /// Ids are unique and `f` matches the mode's cost function.
    pub fn is_consistent(&self) -> bool {
        let ids_unique =
            self.candidates.iter().enumerate().all(|(i, c)| self.candidates[..i].iter().all(|p| p.id != c.id));
        let f_ok = self.candidates.iter().all(|c| {
            let want = match self.mode {
                SearchMode::AStar => c.g + c.h,
                SearchMode::Greedy => c.h,
            };
            (c.f - want).abs() <= 1e-9
        });
        ids_unique && f_ok
    }

    /// Id of the lowest-`f` candidate (first on ties).
    pub fn min_f_id(&self) -> Option<u32> {
        self.candidates.iter().min_by(|a, b| a.f.total_cmp(&b.f).then(a.id.cmp(&b.id))).map(|c| c.id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvisorResponse {
    pub verdicts: Vec<(u32, Verdict)>,
    pub subgoal: Option<CellCoord>,
    pub reward_seed: Option<RewardSeed>,
    pub rationale: String,
}

impl AdvisorResponse {
    pub fn verdict_for(&self, id: u32) -> Option<Verdict> {
        self.verdicts.iter().find(|(i, _)| *i == id).map(|(_, v)| *v)
    }

    /// One verdict per candidate, in candidate order. Ids the advisor did not
    /// mention are accepted; ids that are not candidates are dropped.
    pub fn normalized(mut self, set: &CandidateSet) -> Self {
        self.verdicts =
            set.candidates.iter().map(|c| (c.id, self.verdict_for(c.id).unwrap_or(Verdict::Accept))).collect();
        self
    }

    pub fn accept_all(set: &CandidateSet, rationale: impl Into<String>) -> Self {
        Self {
            verdicts: set.candidates.iter().map(|c| (c.id, Verdict::Accept)).collect(),
            rationale: rationale.into(),
            ..Default::default()
        }
    }

    pub fn ordered_verdicts(&self) -> Vec<Verdict> {
        self.verdicts.iter().map(|(_, v)| *v).collect()
    }
}

/// What the advisor knows when a new stage begins.
#[derive(Debug, Clone, Copy)]
pub struct StageContext<'a> {
    pub current: CellCoord,
    pub goal: CellCoord,
    pub stage: usize,
    pub key_points: &'a [KeyPoint],
    pub mask: &'a ObservationMask,
    /// Cells that must not be proposed again (failed or already used sub-goals).
    pub excluded: &'a [CellCoord],
    pub explored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub subgoal: CellCoord,
    pub seed: RewardSeed,
    pub rationale: String,
}

pub trait Advisor {
    /// Short identifier for logs and manifests.
    fn name(&self) -> &str;

    /// Rule on a non-empty candidate batch. Implementations return one verdict
    /// per candidate.
    fn request_verdicts(&mut self, map: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError>;

    /// Pick the next sub-goal and reward seed.
    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError>;

    /// Whether two calls with identical inputs always give identical answers.
    fn is_deterministic(&self) -> bool {
        false
    }
}

impl<A: Advisor + ?Sized> Advisor for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn request_verdicts(&mut self, map: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError> {
        (**self).request_verdicts(map, set)
    }

    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError> {
        (**self).plan_stage(map, ctx)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

// ─── Scripted oracle ────────────────────────────────────────────────

/// Deterministic stand-in for the language model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOracle {
    /// How many cells ahead the straight line towards the sub-goal is checked.
    pub lookahead: u32,
    /// Seed reward placed on each chosen sub-goal.
    pub subgoal_reward: f64,
}

impl Default for ScriptedOracle {
    fn default() -> Self {
        Self { lookahead: 4, subgoal_reward: 1.0 }
    }
}

impl ScriptedOracle {
    pub fn new(lookahead: u32) -> Self {
        Self { lookahead, ..Default::default() }
    }

    /// True when the first `lookahead` steps of the line from `from` towards
    /// `target` are all free.
    pub fn line_ahead_clear(&self, map: &GridMap, from: CellCoord, target: CellCoord) -> bool {
        GridMap::line(from, target).into_iter().take(self.lookahead as usize + 1).all(|c| map.is_free(c))
    }

    /// Accept a candidate iff its line towards the sub-goal is clear for
    /// `lookahead` cells, or it has the minimum `f` of the batch.
    pub fn verdicts(&self, map: &GridMap, set: &CandidateSet) -> AdvisorResponse {
        let best = set.min_f_id();
        let verdicts: Vec<(u32, Verdict)> = set
            .candidates
            .iter()
            .map(|c| {
                let keep = Some(c.id) == best || self.line_ahead_clear(map, c.cell, set.subgoal);
                (c.id, if keep { Verdict::Accept } else { Verdict::Decline })
            })
            .collect();
        let rationale = render_verdicts(&verdicts);
        AdvisorResponse { verdicts, subgoal: None, reward_seed: None, rationale }
    }

    /// Next sub-goal: the goal when it is already seen; otherwise the seen free
    /// cell in line of sight of `current` that is closest to the goal (and
    /// strictly closer than `current`); otherwise the unused key point
    /// nearest the goal.
    pub fn choose_subgoal(&self, map: &GridMap, ctx: &StageContext<'_>) -> Result<CellCoord, AdvisorError> {
        let goal = ctx.goal;
        if ctx.mask.is_seen(goal) {
            return Ok(goal);
        }
        let here = manhattan(ctx.current, goal);
        let usable = |c: CellCoord| c != ctx.current && map.is_free(c) && !ctx.excluded.contains(&c);
        let sighted = map
            .free_cells()
            .filter(|&c| usable(c) && ctx.mask.is_seen(c) && manhattan(c, goal) < here)
            .filter(|&c| map.line_is_clear(ctx.current, c))
            .min_by_key(|&c| (manhattan(c, goal), core::cmp::Reverse(manhattan(ctx.current, c)), c.y, c.x));
        if let Some(c) = sighted {
            return Ok(c);
        }
        ctx.key_points
            .iter()
            .map(|k| k.cell)
            .filter(|&c| usable(c))
            .min_by_key(|&c| (manhattan(c, goal), c.y, c.x))
            .ok_or(AdvisorError::NoViableSubgoal)
    }
}

impl Advisor for ScriptedOracle {
    fn name(&self) -> &str {
        "scripted"
    }

    fn request_verdicts(&mut self, map: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError> {
        if set.candidates.is_empty() {
            return Err(AdvisorError::EmptyCandidates);
        }
        Ok(self.verdicts(map, set))
    }

    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError> {
        let subgoal = self.choose_subgoal(map, ctx).unwrap_or(ctx.goal);
        let seed = RewardSeed::single(subgoal, self.subgoal_reward.clamp(-1.0, 1.0)).unwrap_or_default();
        Ok(StagePlan { subgoal, seed, rationale: format!("SUBGOAL {subgoal}") })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

// ─── Chat wire format ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Body of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatResponseBody {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

/// Extract `choices[0].message.content` from a chat-completion response body.
pub fn completion_text(body: &str) -> Result<String, AdvisorError> {
    let parsed: ChatResponseBody =
        serde_json::from_str(body).map_err(|e| AdvisorError::MalformedReply(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| AdvisorError::MalformedReply("response has no choices[0].message.content".to_owned()))
}

/// Token estimate used for budget enforcement.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

/// Roughly four characters per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharApprox {
    pub chars_per_token: usize,
}

impl Default for CharApprox {
    fn default() -> Self {
        Self { chars_per_token: 4 }
    }
}

impl TokenCounter for CharApprox {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(self.chars_per_token.max(1))
    }
}

/// Drop the oldest non-system messages until the transcript fits `budget`.
pub fn fit_to_budget(
    messages: &[ChatMessage],
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<Vec<ChatMessage>, AdvisorError> {
    let mut kept: Vec<ChatMessage> = messages.to_vec();
    let total = |m: &[ChatMessage]| m.iter().map(|x| counter.count(&x.content)).sum::<usize>();
    while total(&kept) > budget {
        match kept.iter().position(|m| m.role != Role::System) {
            Some(i) => {
                kept.remove(i);
            }
            None => return Err(AdvisorError::BudgetExceeded(budget)),
        }
    }
    Ok(kept)
}

/// One chat-completion round trip.
pub trait ChatTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, AdvisorError>;
}

// ─── Prompts ────────────────────────────────────────────────────────

/// The system message that opens every advisor conversation: endpoints,
/// obstacle layout, action space, cost convention and objective, followed by
/// the planning rules and the reply grammar.
pub fn build_init_prompt(map: &GridMap, mode: SearchMode) -> String {
    let (s, g) = (map.start(), map.goal());
    let mut p = String::new();
    let _ = writeln!(
        p,
        "You assist a mobile robot that plans a path on a {}x{} occupancy grid named \"{}\".",
        map.width(),
        map.height(),
        map.name()
    );
    let _ = writeln!(
        p,
        "Cells are written (x,y): x is the column from 0 (left) to {}, y is the row from 0 (top) to {}.",
        map.width() - 1,
        map.height() - 1
    );
    p.push_str("\nSetup:\n");
    let _ = writeln!(p, "1. Initial state: {s}. Goal state: {g}.");
    let obstacles: Vec<String> = map.obstacles().map(|c| c.to_string()).collect();
    let _ = writeln!(p, "2. Obstacles ({} cells): {}", obstacles.len(), obstacles.join(" "));
    let moves: Vec<String> = Direction::ALL
        .iter()
        .map(|d| {
            let (dx, dy) = d.delta();
            format!("{d:?} ({dx},{dy})")
        })
        .collect();
    let _ = writeln!(
        p,
        "3. Action space: the robot moves to one of its 8 neighbours: {}. A diagonal move is allowed only when both orthogonal cells beside it are free.",
        moves.join(", ")
    );
    let cost = match mode {
        SearchMode::AStar => "f(s) = g(s) + h(s)",
        SearchMode::Greedy => "f(s) = h(s)",
    };
    let _ = writeln!(
        p,
        "4. Costs use the Manhattan distance: an orthogonal move costs 1 and a diagonal move costs 2. g(s) is the cumulative cost from the initial state, h(s) is the Manhattan distance from s to the goal, and candidates are ranked by {cost}."
    );
    let _ = writeln!(p, "5. Objective: plan a path from {s} to {g}.");
    p.push_str("\nRules:\n");
    p.push_str("1. A viable path never collides with obstacles.\n");
    p.push_str("2. Expand the search along the direction suggested by the heuristic or by the human operator.\n");
    p.push_str("3. Prefer actions that speed up the planning process.\n");
    p.push_str("\nReply format:\n");
    p.push_str("- When asked for verdicts, answer `ACCEPT <ids> DECLINE <ids>` with comma-separated candidate ids.\n");
    p.push_str("- When asked for a stage plan, answer `SUBGOAL (x,y)` and optionally `SEED [{\"cell\":[x,y],\"reward\":r}]` with every r in [-1,1].\n");
    p
}

/// User message for one verdict round.
pub fn render_candidates(set: &CandidateSet) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "Stage {} towards sub-goal {} (goal {}). Explored cells: {}.",
        set.stage, set.subgoal, set.goal, set.explored
    );
    if !set.jump_points.is_empty() {
        let jumps: Vec<String> = set.jump_points.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(p, "Jump points so far: {}", jumps.join(" "));
    }
    p.push_str("Candidates:\n");
    for c in &set.candidates {
        let _ = writeln!(p, "{}: {} f={:.2} g={:.2} h={:.2}", c.id, c.cell, c.f, c.g, c.h);
    }
    p.push_str("Reply with ACCEPT/DECLINE.");
    p
}

/// User message asking for the next stage plan.
pub fn render_stage_request(ctx: &StageContext<'_>) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "Stage {} begins at {}; the goal is {}. Cells explored so far: {}.",
        ctx.stage, ctx.current, ctx.goal, ctx.explored
    );
    if !ctx.key_points.is_empty() {
        let keys: Vec<String> = ctx.key_points.iter().map(|k| k.cell.to_string()).collect();
        let _ = writeln!(p, "Key points recorded: {}", keys.join(" "));
    }
    if !ctx.excluded.is_empty() {
        let ex: Vec<String> = ctx.excluded.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(p, "Do not propose: {}", ex.join(" "));
    }
    p.push_str("Reply with SUBGOAL (x,y) and an optional SEED.");
    p
}

fn render_verdicts(verdicts: &[(u32, Verdict)]) -> String {
    let ids = |want: Verdict| {
        verdicts.iter().filter(|(_, v)| *v == want).map(|(i, _)| i.to_string()).collect::<Vec<_>>().join(",")
    };
    let (acc, dec) = (ids(Verdict::Accept), ids(Verdict::Decline));
    match (acc.is_empty(), dec.is_empty()) {
        (false, false) => format!("ACCEPT {acc} DECLINE {dec}"),
        (false, true) => format!("ACCEPT {acc}"),
        (true, false) => format!("DECLINE {dec}"),
        (true, true) => String::new(),
    }
}

// ─── Reply parsing ──────────────────────────────────────────────────

#[derive(Debug, Default)]
struct ReplyScan {
    verdicts: Vec<(u32, Verdict)>,
    subgoal: Option<CellCoord>,
    seed: Option<RewardSeed>,
}

fn scan_reply(text: &str) -> ReplyScan {
    let mut scan = ReplyScan::default();
    let upper = text.to_ascii_uppercase();
    let bytes = upper.as_bytes();

    for (keyword, verdict) in [("ACCEPT", Verdict::Accept), ("DECLINE", Verdict::Decline)] {
        let mut from = 0;
        while let Some(pos) = upper[from..].find(keyword) {
            let mut i = from + pos + keyword.len();
            from = i;
            // ids: digits separated by commas / whitespace
            loop {
                while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b',' || bytes[i] == b'\t') {
                    i += 1;
                }
                let d0 = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if d0 == i {
                    break;
                }
                if let Ok(id) = upper[d0..i].parse::<u32>() {
                    if !scan.verdicts.iter().any(|(x, _)| *x == id) {
                        scan.verdicts.push((id, verdict));
                    }
                }
            }
        }
    }

    if let Some(pos) = upper.find("SUBGOAL") {
        scan.subgoal = parse_coord(&text[pos + "SUBGOAL".len()..]);
    }

    let mut from = 0;
    while let Some(pos) = text[from..].find('[') {
        let open = from + pos;
        from = open + 1;
        let Some(close) = matching_bracket(&text[open..]) else { continue };
        let block = &text[open..open + close + 1];
        if !block.contains("cell") {
            continue;
        }
        if let Ok(seed) = serde_json::from_str::<RewardSeed>(block) {
            if seed.validate().is_ok() {
                scan.seed = Some(seed);
                break;
            }
        }
    }
    scan
}

fn matching_bracket(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// First `(x,y)` pair in `s`.
fn parse_coord(s: &str) -> Option<CellCoord> {
    let open = s.find('(')?;
    let close = open + s[open..].find(')')?;
    let (x, y) = s[open + 1..close].split_once(',')?;
    Some(CellCoord::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

/// Parse a verdict-round reply. Prose around the grammar is ignored; a reply
/// without any ACCEPT/DECLINE ids is malformed.
pub fn parse_reply(text: &str) -> Result<AdvisorResponse, AdvisorError> {
    let scan = scan_reply(text);
    if scan.verdicts.is_empty() {
        return Err(AdvisorError::MalformedReply(text.to_owned()));
    }
    Ok(AdvisorResponse {
        verdicts: scan.verdicts,
        subgoal: scan.subgoal,
        reward_seed: scan.seed,
        rationale: text.to_owned(),
    })
}

/// Parse a stage-plan reply; needs at least a sub-goal or a seed.
pub fn parse_stage_reply(text: &str) -> Result<AdvisorResponse, AdvisorError> {
    let scan = scan_reply(text);
    if scan.subgoal.is_none() && scan.seed.is_none() {
        return Err(AdvisorError::MalformedReply(text.to_owned()));
    }
    Ok(AdvisorResponse {
        verdicts: scan.verdicts,
        subgoal: scan.subgoal,
        reward_seed: scan.seed,
        rationale: text.to_owned(),
    })
}

// ─── Chat-model advisor ─────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub token_budget: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self { model: "gpt-3.5-turbo-16k".to_owned(), token_budget: 16_384 }
    }
}

/// Advisor backed by a chat model. Keeps its own conversation; all effects on
/// the planner flow through the returned responses.
pub struct LlmAdvisor<T> {
    transport: T,
    config: LlmConfig,
    counter: CharApprox,
    transcript: Vec<ChatMessage>,
    /// Raw replies that could not be parsed, kept for inspection.
    pub malformed: Vec<String>,
}

impl<T: ChatTransport> LlmAdvisor<T> {
    pub fn new(transport: T, config: LlmConfig, map: &GridMap, mode: SearchMode) -> Self {
        Self {
            transport,
            config,
            counter: CharApprox::default(),
            transcript: alloc::vec![ChatMessage::system(build_init_prompt(map, mode))],
            malformed: Vec::new(),
        }
    }

    pub fn transcript(&self) -> &[ChatMessage] {
        &self.transcript
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    fn round_trip(&mut self, user: String) -> Result<String, AdvisorError> {
        self.transcript.push(ChatMessage::user(user));
        let window = fit_to_budget(&self.transcript, self.config.token_budget, &self.counter)?;
        let reply = self.transport.complete(&window)?;
        self.transcript.push(ChatMessage::assistant(reply.clone()));
        Ok(reply)
    }
}

impl<T: ChatTransport> Advisor for LlmAdvisor<T> {
    fn name(&self) -> &str {
        "openai"
    }

    fn request_verdicts(&mut self, _map: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError> {
        if set.candidates.is_empty() {
            return Err(AdvisorError::EmptyCandidates);
        }
        let reply = self.round_trip(render_candidates(set))?;
        match parse_reply(&reply) {
            Ok(resp) => Ok(resp.normalized(set)),
            Err(_) => {
                // unparseable: accept everything this round so the search keeps moving
                self.malformed.push(reply.clone());
                Ok(AdvisorResponse::accept_all(set, format!("[unparsed, accepted all] {reply}")))
            }
        }
    }

    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError> {
        let reply = self.round_trip(render_stage_request(ctx))?;
        let parsed = parse_stage_reply(&reply).ok();
        if parsed.is_none() {
            self.malformed.push(reply.clone());
        }
        let parsed = parsed.unwrap_or_default();
        let subgoal = parsed
            .subgoal
            .filter(|&c| map.is_free(c) && c != ctx.current && !ctx.excluded.contains(&c))
            .unwrap_or(ctx.goal);
        Ok(StagePlan { subgoal, seed: parsed.reward_seed.unwrap_or_default(), rationale: reply })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cand(id: u32, x: u32, y: u32, g: f64, h: f64) -> Candidate {
        Candidate { id, cell: CellCoord::new(x, y), parent: CellCoord::new(0, 0), g, h, f: g + h }
    }

    fn set_of(cands: Vec<Candidate>, subgoal: CellCoord) -> CandidateSet {
        CandidateSet {
            candidates: cands,
            mode: SearchMode::AStar,
            stage: 0,
            subgoal,
            goal: subgoal,
            jump_points: vec![],
            explored: 0,
        }
    }

    #[test]
    fn parse_examples() {
        let r = parse_reply("ACCEPT 1 DECLINE 2; SUBGOAL (4,5)").unwrap();
        assert_eq!(r.verdicts, vec![(1, Verdict::Accept), (2, Verdict::Decline)]);
        assert_eq!(r.subgoal, Some(CellCoord::new(4, 5)));

        let r = parse_reply("ACCEPT 1,3 DECLINE 2").unwrap();
        assert_eq!(r.verdict_for(1), Some(Verdict::Accept));
        assert_eq!(r.verdict_for(2), Some(Verdict::Decline));
        assert_eq!(r.verdict_for(3), Some(Verdict::Accept));

        let prose = "Sure! Moving east looks safer. accept 2 decline 1. \
                     Rewards: [{\"cell\":[3,4],\"reward\":0.5},{\"cell\":[5,5],\"reward\":-0.25}] hope it helps";
        let r = parse_reply(prose).unwrap();
        assert_eq!(r.verdicts.len(), 2);
        let seed = r.reward_seed.unwrap();
        assert_eq!(seed.reward_at(CellCoord::new(3, 4)), 0.5);
        assert_eq!(seed.reward_at(CellCoord::new(5, 5)), -0.25);

        assert!(matches!(parse_reply("I think you should go north"), Err(AdvisorError::MalformedReply(_))));
    }

    #[test]
    fn stage_reply_needs_subgoal_or_seed() {
        assert_eq!(parse_stage_reply("SUBGOAL ( 7 , 2 )").unwrap().subgoal, Some(CellCoord::new(7, 2)));
        assert!(parse_stage_reply("head to the door").is_err());
    }

    #[test]
    fn single_candidate_is_accepted() {
        let map = GridMap::parse("t", "S#.\n###\n..G\n").unwrap();
        let set = set_of(vec![cand(1, 2, 0, 1.0, 3.0)], map.goal());
        let r = ScriptedOracle::default().request_verdicts(&map, &set).unwrap();
        assert_eq!(r.verdicts, vec![(1, Verdict::Accept)]);
    }

    #[test]
    fn scripted_line_rule_on_5x5() {
        // wall across column 1 rows 2..4; the goal is at the bottom right
        let map = GridMap::parse("t", "S....\n.....\n.#...\n.#...\n.#..G\n").unwrap();
        let goal = map.goal();
        // (1,1) heads straight down the diagonal to (4,4): clear
        // (0,1) runs along the left edge, its line to the goal hits (1,2)
        let set = set_of(vec![cand(1, 1, 1, 2.0, 6.0), cand(2, 0, 1, 1.0, 7.0)], goal);
        let r = ScriptedOracle::new(3).request_verdicts(&map, &set).unwrap();
        assert_eq!(r.verdicts, vec![(1, Verdict::Accept), (2, Verdict::Decline)]);
    }

    #[test]
    fn min_f_never_declined() {
        let map = GridMap::parse("t", "S....\n#####\n....G\n").unwrap();
        let set = set_of(vec![cand(1, 1, 0, 1.0, 6.0), cand(2, 2, 0, 2.0, 6.0)], map.goal());
        let r = ScriptedOracle::default().request_verdicts(&map, &set).unwrap();
        assert_eq!(r.verdict_for(1), Some(Verdict::Accept));
        assert_eq!(r.verdict_for(2), Some(Verdict::Decline));
    }

    #[test]
    fn subgoal_is_goal_when_seen() {
        let map = GridMap::parse("t", "S...\n....\n...G\n").unwrap();
        let mut mask = ObservationMask::for_map(&map);
        mask.reveal(map.start(), 10);
        let ctx = StageContext {
            current: map.start(),
            goal: map.goal(),
            stage: 0,
            key_points: &[],
            mask: &mask,
            excluded: &[],
            explored: 0,
        };
        assert_eq!(ScriptedOracle::default().choose_subgoal(&map, &ctx), Ok(map.goal()));
    }

    #[test]
    fn subgoal_l_corridor_corner() {
        let text = "S...\n###.\n###.\n###.\n###.\n###.\n...G\n";
        let map = GridMap::parse("l", text).unwrap();
        let mut mask = ObservationMask::for_map(&map);
        mask.reveal(map.start(), 3);
        let ctx = StageContext {
            current: map.start(),
            goal: map.goal(),
            stage: 0,
            key_points: &[],
            mask: &mask,
            excluded: &[],
            explored: 0,
        };
        assert_eq!(ScriptedOracle::default().choose_subgoal(&map, &ctx), Ok(CellCoord::new(3, 0)));
    }

    #[test]
    fn no_viable_subgoal() {
        let map = GridMap::parse("t", "S#..\n##..\n...G\n").unwrap();
        let mut mask = ObservationMask::for_map(&map);
        mask.reveal(map.start(), 0);
        let ctx = StageContext {
            current: map.start(),
            goal: map.goal(),
            stage: 0,
            key_points: &[],
            mask: &mask,
            excluded: &[],
            explored: 0,
        };
        let oracle = ScriptedOracle::default();
        assert_eq!(oracle.choose_subgoal(&map, &ctx), Err(AdvisorError::NoViableSubgoal));
        let plan = oracle.clone().plan_stage(&map, &ctx).unwrap();
        assert_eq!(plan.subgoal, map.goal());
    }

    #[test]
    fn budget_truncates_oldest_turns_first() {
        let msgs = vec![
            ChatMessage::system("s".repeat(40)),
            ChatMessage::user("a".repeat(40)),
            ChatMessage::assistant("b".repeat(40)),
            ChatMessage::user("c".repeat(40)),
        ];
        let counter = CharApprox::default();
        let kept = fit_to_budget(&msgs, 25, &counter).unwrap();
        assert_eq!(kept, vec![msgs[0].clone(), msgs[3].clone()]);
        assert_eq!(fit_to_budget(&msgs, 40, &counter).unwrap(), msgs);
        assert_eq!(fit_to_budget(&msgs, 5, &counter), Err(AdvisorError::BudgetExceeded(5)));
    }

    #[test]
    fn prompt_content() {
        let map = GridMap::parse("tiny", "S.\n.G\n").unwrap();
        let p = build_init_prompt(&map, SearchMode::AStar);
        assert!(p.contains("Initial state: (0,0). Goal state: (1,1)."));
        assert!(p.contains("Obstacles (0 cells)"));
        assert!(p.contains("8 neighbours"));
        assert!(p.contains("Manhattan"));
        assert_eq!(p, build_init_prompt(&map, SearchMode::AStar));
    }

    #[test]
    fn completion_text_reads_first_choice() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"ACCEPT 1"}}]}"#;
        assert_eq!(completion_text(body).unwrap(), "ACCEPT 1");
        assert!(completion_text(r#"{"choices":[]}"#).is_err());
    }

    struct Canned(Vec<String>);

    impl ChatTransport for Canned {
        fn complete(&mut self, _messages: &[ChatMessage]) -> Result<String, AdvisorError> {
            if self.0.is_empty() {
                return Err(AdvisorError::Timeout);
            }
            Ok(self.0.remove(0))
        }
    }

    #[test]
    fn llm_advisor_round_trips_and_falls_back() {
        let map = GridMap::parse("t", "S...\n....\n...G\n").unwrap();
        let transport = Canned(vec!["ACCEPT 1,3 DECLINE 2".into(), "no idea".into()]);
        let mut adv = LlmAdvisor::new(transport, LlmConfig::default(), &map, SearchMode::AStar);
        let set = set_of(vec![cand(1, 1, 0, 1.0, 4.0), cand(2, 0, 1, 1.0, 4.0), cand(3, 1, 1, 2.0, 3.0)], map.goal());
        let r = adv.request_verdicts(&map, &set).unwrap();
        assert_eq!(r.ordered_verdicts(), vec![Verdict::Accept, Verdict::Decline, Verdict::Accept]);
        let r = adv.request_verdicts(&map, &set).unwrap();
        assert_eq!(r.ordered_verdicts(), vec![Verdict::Accept; 3]);
        assert_eq!(adv.malformed, vec!["no idea".to_owned()]);
        assert_eq!(adv.transcript().len(), 5);
        assert!(matches!(adv.request_verdicts(&map, &set), Err(AdvisorError::Timeout)));
    }
}
