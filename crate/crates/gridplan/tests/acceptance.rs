//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::net::SocketAddr;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use common::http::call;
use common::{dijkstra, mdt_by_angle, solvable_maps};
use gridplan::bench::{self, BenchPlan};
use gridplan::service::{self, ServiceConfig};
use gridplan::wire::WireSession;
use gridplan_core::advisor::{
    Advisor, AdvisorError, AdvisorResponse, CandidateSet, ScriptedOracle, StageContext, StagePlan,
};
use gridplan_core::metrics::{mdt, MetricsReport, PlannerKind};
use gridplan_core::orchestrator::{EventPayload, Phase, PlanningSession, SessionAdvisor, SessionEvent, SessionParams};
use gridplan_core::rl::{
    actor_loss_grad, critic_loss_grad, observe, rollout_path, softmax, train, Mlp, PpoConfig, Sample, ACTIONS, OBS_LEN,
};
use gridplan_core::search::Verdict;
use gridplan_core::{plan, CellCoord, CostModel, Direction, GridMap, RewardSeed, ValueParams, ValueTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const RANDOM_SEED: u64 = 0x5eed;

fn random_maps() -> Vec<GridMap> {
    solvable_maps(RANDOM_SEED, 100, 16)
}

fn shipped(pattern: &str) -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps");
    gridplan::mapio::resolve_maps(&format!("{}/{pattern}", dir.display())).expect("shipped maps present")
}

fn report<'a>(reports: &'a [MetricsReport], map: &str, planner: PlannerKind) -> &'a MetricsReport {
    reports.iter().find(|r| r.map_name == map && r.planner == planner).expect("row present")
}

fn scripted_bench(maps: Vec<PathBuf>, planners: Vec<PlannerKind>) -> Result<Vec<MetricsReport>, String> {
    let plan = BenchPlan { repeats: 3, ..BenchPlan::new(maps, planners) };
    let result = bench::run_benchmark(&plan).map_err(|e| e.to_string())?;
    if result.has_failures() {
        return Err(format!("benchmark runs failed: {:?}", result.manifest.failures));
    }
    Ok(result.reports)
}

// ─── 1 ──────────────────────────────────────────────────────────────

fn astar_optimality() -> Check {
    let maps = random_maps();
    let started = Instant::now();
    let outcomes: Vec<_> = maps.iter().map(|m| plan(m, m.start(), m.goal(), CostModel::astar(), None, None)).collect();
    let elapsed = started.elapsed();
    for (m, out) in maps.iter().zip(outcomes) {
        let out = out.map_err(|e| format!("{}: {e}", m.name()))?;
        let want = dijkstra(m, m.start(), m.goal());
        ensure!(Some(out.path_cost) == want, "{}: cost {} vs oracle {want:?}", m.name(), out.path_cost);
    }
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!("100 maps, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

// ─── 2 ──────────────────────────────────────────────────────────────

/// Fixed verdict for every candidate; sub-goals from the scripted rule.
struct Fixed(Verdict, ScriptedOracle);

impl Advisor for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn request_verdicts(&mut self, _: &GridMap, set: &CandidateSet) -> Result<AdvisorResponse, AdvisorError> {
        let verdicts = set.candidates.iter().map(|c| (c.id, self.0)).collect();
        Ok(AdvisorResponse { verdicts, ..AdvisorResponse::accept_all(set, "") })
    }

    fn plan_stage(&mut self, map: &GridMap, ctx: &StageContext<'_>) -> Result<StagePlan, AdvisorError> {
        let subgoal = self.1.choose_subgoal(map, ctx)?;
        Ok(StagePlan { subgoal, seed: RewardSeed::default(), rationale: String::new() })
    }
}

fn completeness() -> Check {
    let maps = random_maps();
    for m in &maps {
        let advisors: [(&str, SessionAdvisor); 3] = [
            ("accept-all", SessionAdvisor::External(Box::new(Fixed(Verdict::Accept, ScriptedOracle::default())))),
            ("decline-all", SessionAdvisor::External(Box::new(Fixed(Verdict::Decline, ScriptedOracle::default())))),
            ("scripted", SessionAdvisor::Scripted(ScriptedOracle::default())),
        ];
        for (label, advisor) in advisors {
            let mut s =
                PlanningSession::create("c", m.clone(), PlannerKind::LlmAStar, advisor, SessionParams::default())
                    .map_err(|e| e.to_string())?;
            let metrics = bench::drive_session(&mut s, |_| Err("unexpected pause".into()))
                .map_err(|e| format!("{} with {label}: {e}", m.name()))?;
            ensure!(s.phase() == Phase::Done, "{} with {label} ended in {:?}", m.name(), s.phase());
            let path = s.full_path();
            ensure!(
                path.first() == Some(&m.start()) && path.last() == Some(&m.goal()),
                "{} with {label}: bad ends",
                m.name()
            );
            ensure!(metrics.path_length == path.len(), "{} with {label}: length mismatch", m.name());
        }
    }
    Ok("100 maps x 3 advisors reach the goal".into())
}

// ─── 3, 4 ───────────────────────────────────────────────────────────

const TREND_PLANNERS: [PlannerKind; 3] = [PlannerKind::AStar, PlannerKind::LlmAStar, PlannerKind::LlmGreedy];

fn complexity_trend() -> Check {
    let reports = scripted_bench(shipped("*_24.map"), TREND_PLANNERS.to_vec())?;
    let mut lines = Vec::new();
    for name in ["aisle_24", "canyon_24", "double_door_24"] {
        let c = |p| report(&reports, name, p).complexity.expect("complexity");
        let (a, la, lg) = (c(PlannerKind::AStar), c(PlannerKind::LlmAStar), c(PlannerKind::LlmGreedy));
        ensure!(lg < la && la <= a, "{name}: LLM-Greedy {lg} / LLM-A* {la} / A* {a}");
        lines.push(format!("{name} {lg}<{la}<={a}"));
    }
    Ok(lines.join(", "))
}

fn path_trend() -> Check {
    let reports = scripted_bench(shipped("*_24.map"), TREND_PLANNERS.to_vec())?;
    let mut lines = Vec::new();
    for name in ["aisle_24", "canyon_24", "double_door_24"] {
        let p = |k| report(&reports, name, k).path_length.expect("path length");
        let (a, la, lg) = (p(PlannerKind::AStar), p(PlannerKind::LlmAStar), p(PlannerKind::LlmGreedy));
        ensure!(a <= la && la < lg, "{name}: A* {a} / LLM-A* {la} / LLM-Greedy {lg}");
        lines.push(format!("{name} {a}<={la}<{lg}"));
    }
    Ok(lines.join(", "))
}

// ─── 5 ──────────────────────────────────────────────────────────────

fn mdt_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let mut c = CellCoord::new(60, 60);
        let mut path = vec![c];
        for _ in 0..rng.gen_range(0..50) {
            let (dx, dy) = Direction::ALL[rng.gen_range(0..8)].delta();
            c = c.offset(dx, dy).expect("stays on the plane");
            path.push(c);
        }
        let start = CellCoord::new(rng.gen_range(0..120), rng.gen_range(0..120));
        let goal = CellCoord::new(rng.gen_range(0..120), rng.gen_range(0..120));
        let ours = mdt(&path, start, goal).map_err(|e| e.to_string())?;
        ensure!(ours == mdt_by_angle(&path, start, goal), "path {i}: integer {ours} vs angle oracle");
    }
    let all = shipped("*.map");
    let reports = scripted_bench(all.clone(), vec![PlannerKind::AStar, PlannerKind::Greedy, PlannerKind::LlmGreedy])?;
    for p in &all {
        let name = p.file_stem().and_then(|s| s.to_str()).expect("utf-8 name");
        let m = |k| report(&reports, name, k).mdt.expect("mdt");
        let a = m(PlannerKind::AStar);
        ensure!(a <= m(PlannerKind::Greedy), "{name}: A* MDT {a} > Greedy {}", m(PlannerKind::Greedy));
        ensure!(a <= m(PlannerKind::LlmGreedy), "{name}: A* MDT {a} > LLM-Greedy {}", m(PlannerKind::LlmGreedy));
    }
    Ok(format!("1000 paths exact; A* <= Greedy on {} shipped maps", all.len()))
}

// ─── 6 ──────────────────────────────────────────────────────────────

fn value_inertness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in &random_maps() {
        let mut value = ValueTable::new(m, ValueParams::default()).map_err(|e| e.to_string())?;
        for c in m.free_cells() {
            // out-of-range writes exercise the clamp
            value.set(c, rng.gen_range(-1.0..=value.v_max() * 2.0));
        }
        for model in [CostModel::astar(), CostModel::greedy()] {
            let plain = plan(m, m.start(), m.goal(), model, None, None).map_err(|e| e.to_string())?;
            let shaped =
                plan(m, m.start(), m.goal(), model.with_weight(0.0), Some(&value), None).map_err(|e| e.to_string())?;
            ensure!(plain.expansions == shaped.expansions, "{}: expansion order differs at lambda 0", m.name());
            ensure!(plain == shaped, "{}: outcome differs at lambda 0", m.name());
        }
        let out = plan(m, m.start(), m.goal(), CostModel::astar().with_weight(0.5), Some(&value), None)
            .map_err(|e| e.to_string())?;
        ensure!(Some(out.path_cost) == dijkstra(m, m.start(), m.goal()), "{}: lambda 0.5 not optimal", m.name());
    }
    Ok("lambda 0 identical, lambda 0.5 optimal on 100 maps".into())
}

// ─── 7 ──────────────────────────────────────────────────────────────

fn td_update() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (s, t) = (CellCoord::new(0, 0), CellCoord::new(1, 0));
    for i in 0..1000 {
        let alpha = rng.gen_range(0.01..=1.0);
        let gamma = rng.gen_range(0.0..=1.0);
        let params = ValueParams { alpha, gamma, ..ValueParams::default() };

        let mut zero = ValueTable::with_bound(4, 4, 10.0, params).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let a = CellCoord::new(rng.gen_range(0..4), rng.gen_range(0..4));
            let b = CellCoord::new(rng.gen_range(0..4), rng.gen_range(0..4));
            zero.td_update(a, b, 0.0).map_err(|e| e.to_string())?;
        }
        ensure!(zero.values().iter().all(|v| *v == 0.0), "sample {i}: zero table moved");

        let (a0, a1, b0, b1) =
            (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
        let r = rng.gen_range(-5.0..5.0);
        let mut va = ValueTable::with_bound(2, 1, 1e6, params).map_err(|e| e.to_string())?;
        let mut vb = va.clone();
        va.set(s, a0);
        va.set(t, a1);
        vb.set(s, b0);
        vb.set(t, b1);
        let na = va.td_update(s, t, r).map_err(|e| e.to_string())?;
        let nb = vb.td_update(s, t, r).map_err(|e| e.to_string())?;
        let bound = (1.0 - alpha) * (a0 - b0).abs() + alpha * gamma * (a1 - b1).abs();
        ensure!((na - nb).abs() <= bound + 1e-12, "sample {i}: |{na} - {nb}| exceeds {bound}");
        let expected = (a0 + alpha * (r + gamma * a1 - a0)).clamp(0.0, 1e6);
        ensure!((na - expected).abs() <= 1e-12, "sample {i}: {na} vs {expected}");
    }
    Ok("1000 samples".into())
}

// ─── 8 ──────────────────────────────────────────────────────────────

fn toy_samples(actor: &Mlp) -> Vec<Sample> {
    let map = GridMap::parse("two", "SG\n").expect("toy map");
    let mut out = Vec::new();
    for (i, cell) in [CellCoord::new(0, 0), CellCoord::new(1, 0)].into_iter().enumerate() {
        for action in [2usize, 6, 1] {
            let obs = observe(&map, cell, map.goal());
            let p = softmax(&actor.forward(&obs));
            let old_logp = p[action].ln() + 0.05 * (action as f64 - 3.0) / 3.0;
            let advantage = if (i + action) % 2 == 0 { 0.7 } else { -0.4 };
            out.push(Sample { obs, action, old_logp, advantage, ret: 0.3 * action as f64 - 0.5 });
        }
    }
    out
}

fn max_rel_error(analytic: &[f64], mut loss: impl FnMut(usize, f64) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = (loss(i, h) - loss(i, -h)) / (2.0 * h);
        let denom = a.abs().max(numeric.abs());
        if denom > 0.0 {
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

fn ppo() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let actor = Mlp::new(&[OBS_LEN, 6, 5, ACTIONS], 1.0, &mut rng);
    let critic = Mlp::new(&[OBS_LEN, 6, 5, 1], 1.0, &mut rng);
    let samples = toy_samples(&actor);
    let (_, ga, _) = actor_loss_grad(&actor, &samples, 0.2, 0.01);
    let actor_err = max_rel_error(&ga, |i, d| {
        let mut m = actor.clone();
        m.params_mut()[i] += d;
        actor_loss_grad(&m, &samples, 0.2, 0.01).0
    });
    let (_, gc) = critic_loss_grad(&critic, &samples);
    let critic_err = max_rel_error(&gc, |i, d| {
        let mut m = critic.clone();
        m.params_mut()[i] += d;
        critic_loss_grad(&m, &samples).0
    });
    ensure!(actor_err < 1e-4, "actor gradient relative error {actor_err:e}");
    ensure!(critic_err < 1e-4, "critic gradient relative error {critic_err:e}");

    let mut rows = vec!["........".to_string(); 8];
    rows[0].replace_range(0..1, "S");
    rows[7].replace_range(7..8, "G");
    let map = GridMap::parse("empty8", &(rows.join("\n") + "\n")).map_err(|e| e.to_string())?;
    let config = PpoConfig { episodes: 500, ..PpoConfig::default() };
    let started = Instant::now();
    let (policy, curves) = train(&map, &config, 7).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let success = curves.success_rate_last(50);
    ensure!(success >= 0.9, "success over the final 50 episodes {success}");
    ensure!(elapsed.as_secs() < 180, "training took {elapsed:?}");
    rollout_path(&policy, &map, config.max_steps).map_err(|e| e.to_string())?;
    Ok(format!(
        "grad err actor {actor_err:.1e} critic {critic_err:.1e}; success {:.0}% in {:.1} s",
        success * 100.0,
        elapsed.as_secs_f64()
    ))
}

// ─── 9 ──────────────────────────────────────────────────────────────

fn scripted_session(map: GridMap, planner: PlannerKind, autopilot: bool) -> Result<PlanningSession, String> {
    let params = SessionParams { autopilot, ..SessionParams::default() };
    let advisor = SessionAdvisor::Scripted(ScriptedOracle::default());
    PlanningSession::create("r", map, planner, advisor, params).map_err(|e| e.to_string())
}

fn replay() -> Check {
    let mut maps = solvable_maps(0xace, 20, 14);
    for p in shipped("*_16.map") {
        maps.push(gridplan::mapio::load_map_file(&p).map_err(|e| e.to_string())?);
    }
    let mut sessions = 0;
    for (i, m) in maps.into_iter().enumerate() {
        for planner in [PlannerKind::LlmAStar, PlannerKind::LlmGreedy] {
            let autopilot = i % 2 == 0;
            let mut s = scripted_session(m.clone(), planner, autopilot)?;
            let mut guard = 0;
            while !s.phase().is_terminal() {
                let e = s.step().map_err(|e| e.to_string())?;
                if let EventPayload::Proposal { suggested, .. } = e.payload {
                    s.submit_verdict(&suggested).map_err(|e| e.to_string())?;
                }
                guard += 1;
                ensure!(guard < 200_000, "{}: session does not terminate", m.name());
            }
            let log = serde_json::to_string(s.events()).map_err(|e| e.to_string())?;
            let events: Vec<SessionEvent> = serde_json::from_str(&log).map_err(|e| e.to_string())?;
            let r = PlanningSession::replay(scripted_session(m.clone(), planner, autopilot)?, &events)
                .map_err(|e| e.to_string())?;
            let a = serde_json::to_vec(&s.snapshot()).map_err(|e| e.to_string())?;
            let b = serde_json::to_vec(&r.snapshot()).map_err(|e| e.to_string())?;
            ensure!(a == b, "{} {planner}: replayed snapshot differs", m.name());
            sessions += 1;
        }
    }
    Ok(format!("{sessions} sessions"))
}

// ─── 10 ─────────────────────────────────────────────────────────────

fn service_round_trip() -> Check {
    let handle = service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)), ServiceConfig::with_catalogue())
        .map_err(|e| e.to_string())?;
    let url = handle.base_url();
    let (status, body) =
        call("POST", &format!("{url}/sessions"), Some(json!({"map_name": "corridor", "planner": "astar"})));
    ensure!(status == 201, "create returned {status}: {body}");
    let id = body["id"].as_str().ok_or("no id")?.to_string();
    let mut steps = 0;
    loop {
        let (status, body) = call("POST", &format!("{url}/sessions/{id}/step"), Some(json!({"count": 1})));
        ensure!(status == 200, "step returned {status}: {body}");
        steps += 1;
        if body["phase"] == "done" {
            break;
        }
        ensure!(steps < 50, "corridor never finished");
    }
    let (status, body) = call("GET", &format!("{url}/sessions/{id}"), None);
    ensure!(status == 200, "get returned {status}");
    let snap: WireSession = serde_json::from_value(body).map_err(|e| e.to_string())?;
    ensure!(snap.phase == Phase::Done, "phase {:?}", snap.phase);
    ensure!(snap.metrics.path_length == Some(5), "path_length {:?}", snap.metrics.path_length);
    let (status, _) =
        call("POST", &format!("{url}/sessions/{id}/verdict"), Some(json!({"verdicts": [{"id": 1, "accept": true}]})));
    ensure!(status == 409, "verdict on a finished session returned {status}");
    Ok(format!("done after {steps} steps, path_length 5, wrong-phase verdict 409"))
}

// ─── Runner ─────────────────────────────────────────────────────────

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("astar-optimality", astar_optimality),
        ("completeness-under-advice", completeness),
        ("trend-complexity", complexity_trend),
        ("trend-path-length", path_trend),
        ("mdt-correctness", mdt_correctness),
        ("value-layer-inertness", value_inertness),
        ("td-update", td_update),
        ("ppo-gradients-and-training", ppo),
        ("event-replay", replay),
        ("service-round-trip", service_round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {reason}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
