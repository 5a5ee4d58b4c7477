mod common;

use common::{dijkstra, solvable_maps};
use gridplan_core::advisor::{
    Advisor, AdvisorError, AdvisorResponse, CandidateSet, ScriptedOracle, StageContext, StagePlan,
};
use gridplan_core::metrics::PlannerKind;
use gridplan_core::orchestrator::*;
use gridplan_core::search::Verdict;
use gridplan_core::{CellCoord, GridMap, RewardSeed};

/// Accepts every candidate and delegates sub-goal choice to the scripted rule.
struct AcceptAll(ScriptedOracle);

impl Advisor for AcceptAll {
    fn name(&self) -> &str {
        "accept-all"
    }

    fn request_verdicts(&mut self, _: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError> {
        Ok(AdvisorResponse::accept_all(set, "all in"))
    }

    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError> {
        let subgoal = self.0.choose_subgoal(map, ctx)?;
        Ok(StagePlan { subgoal, seed: RewardSeed::single(subgoal, 1.0).unwrap(), rationale: String::new() })
    }
}

fn scripted(map: GridMap, planner: PlannerKind, autopilot: bool) -> PlanningSession {
    let params = SessionParams { autopilot, ..Default::default() };
    PlanningSession::create("t", map, planner, SessionAdvisor::Scripted(ScriptedOracle::default()), params).unwrap()
}

fn drive(s: &mut PlanningSession) {
    let mut guard = 0;
    while !s.phase().is_terminal() {
        let e = s.step().unwrap();
        if let EventPayload::Proposal { suggested, .. } = e.payload {
            s.submit_verdict(&suggested).unwrap();
        }
        guard += 1;
        assert!(guard < 100_000, "session does not terminate");
    }
}

fn cost(path: &[CellCoord]) -> u64 {
    path.windows(2).map(|w| (w[0].x.abs_diff(w[1].x) + w[0].y.abs_diff(w[1].y)) as u64).sum()
}

#[test]
fn replay_is_byte_identical_on_random_maps() {
    for (i, map) in solvable_maps(0xace, 12, 12).into_iter().enumerate() {
        let planner = if i % 2 == 0 { PlannerKind::LlmAStar } else { PlannerKind::LlmGreedy };
        let autopilot = i % 3 != 0;
        let mut s = scripted(map.clone(), planner, autopilot);
        drive(&mut s);
        let json = serde_json::to_string(s.events()).unwrap();
        let events: Vec<SessionEvent> = serde_json::from_str(&json).unwrap();
        let r = PlanningSession::replay(scripted(map, planner, autopilot), &events).unwrap();
        assert_eq!(serde_json::to_vec(&r.snapshot()).unwrap(), serde_json::to_vec(&s.snapshot()).unwrap());
    }
}

#[test]
fn done_sessions_have_connected_paths_and_gapless_events() {
    for map in solvable_maps(0xd0e, 10, 14) {
        let mut s = scripted(map.clone(), PlannerKind::LlmAStar, true);
        drive(&mut s);
        assert_eq!(s.phase(), Phase::Done);
        let path = s.full_path();
        assert_eq!(path.first(), Some(&map.start()));
        assert_eq!(path.last(), Some(&map.goal()));
        assert!(path.windows(2).all(|w| w[0].is_adjacent8(w[1])));
        assert!(s.events().iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1));
        assert!(matches!(s.step(), Err(SessionError::WrongPhase(Phase::Done))));
        assert!(matches!(s.submit_verdict(&[]), Err(SessionError::WrongPhase(Phase::Done))));
    }
}

#[test]
fn accept_all_stages_are_optimal() {
    for map in solvable_maps(0xa11, 10, 14) {
        let mut s = PlanningSession::create(
            "t",
            map.clone(),
            PlannerKind::LlmAStar,
            SessionAdvisor::External(Box::new(AcceptAll(ScriptedOracle::default()))),
            SessionParams::default(),
        )
        .unwrap();
        drive(&mut s);
        assert_eq!(s.phase(), Phase::Done);
        let mut total = 0;
        for st in s.stages() {
            let want = dijkstra(&map, st.from, st.subgoal).unwrap();
            assert_eq!(cost(&st.outcome.path), want, "stage {} of {}", st.index, map.name());
            total += want;
        }
        let found = s.events().iter().find_map(|e| match &e.payload {
            EventPayload::PathFound { path_cost, .. } => Some(*path_cost),
            _ => None,
        });
        assert_eq!(found, Some(total));
    }
}

#[test]
fn human_verdicts_validated() {
    let map = GridMap::parse("open", "S....\n.....\n....G\n").unwrap();
    let params = SessionParams { autopilot: false, ..Default::default() };
    let mut s = PlanningSession::create("h", map, PlannerKind::AStar, SessionAdvisor::Human, params).unwrap();
    let e = s.step().unwrap();
    let EventPayload::VerdictNeeded { candidates, .. } = e.payload else { panic!("expected a verdict request") };
    assert_eq!(s.phase(), Phase::AwaitVerdict);
    assert!(matches!(s.step(), Err(SessionError::WrongPhase(Phase::AwaitVerdict))));
    assert!(matches!(s.submit_verdict(&[(9999, Verdict::Accept)]), Err(SessionError::UnknownCandidate(9999))));
    let all: Vec<_> = candidates.iter().map(|c| (c.id, Verdict::Accept)).collect();
    assert!(s.submit_verdict(&all[..all.len() - 1]).is_err());
    s.submit_verdict(&all).unwrap();
    assert_eq!(s.phase(), Phase::Expanding);
}
