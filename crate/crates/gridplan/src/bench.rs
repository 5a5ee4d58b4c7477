//! Benchmark harness: every planner on every map, repeated and averaged,
//! plus the result tables and the replay manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gridplan_core::advisor::ScriptedOracle;
use gridplan_core::metrics::{MetricsReport, PlannerKind, RunMetrics};
use gridplan_core::orchestrator::{EventPayload, Phase, PlanningSession, SessionError};
use gridplan_core::rl::{self, Checkpoint, LearningCurves, Policy, PpoConfig, RlError};
use gridplan_core::search::Verdict;
use gridplan_core::{GridMap, ValueParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mapio::{self, MapLoadError};
use crate::setup::{self, AdvisorChoice, LlmSettings, SetupError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl OutputFormat {
    /// Guess from a file extension; CSV unless it looks like markdown.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("md" | "markdown") => OutputFormat::Markdown,
            _ => OutputFormat::Csv,
        }
    }
}

/// Where the PPO policy comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpoSource {
    Checkpoint(PathBuf),
    /// Train a fresh policy per map and repeat.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub maps: Vec<PathBuf>,
    pub planners: Vec<PlannerKind>,
    pub repeats: usize,
    pub advisor: AdvisorChoice,
    pub format: OutputFormat,
    pub seed: u64,
    pub ppo: Option<PpoSource>,
    pub ppo_config: PpoConfig,
    pub llm: LlmSettings,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl BenchPlan {
    pub fn new(maps: Vec<PathBuf>, planners: Vec<PlannerKind>) -> Self {
        Self {
            maps,
            planners,
            repeats: 3,
            advisor: AdvisorChoice::Scripted,
            format: OutputFormat::Csv,
            seed: 0,
            ppo: None,
            ppo_config: PpoConfig::default(),
            llm: LlmSettings::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repeats == 0 {
            return Err(BenchError::InvalidPlan("repeats must be at least 1".into()));
        }
        if self.maps.is_empty() || self.planners.is_empty() {
            return Err(BenchError::InvalidPlan("need at least one map and one planner".into()));
        }
        if self.planners.contains(&PlannerKind::Ppo) && self.ppo.is_none() {
            return Err(BenchError::InvalidPlan("ppo needs --ppo-checkpoint or --train-ppo".into()));
        }
        if self.ppo.is_some() {
            self.ppo_config.validate().map_err(BenchError::Rl)?;
        }
        Ok(())
    }

    /// Rows whose numbers depend on a nondeterministic advisor.
    pub fn nondeterministic_planners(&self) -> Vec<PlannerKind> {
        if self.advisor.is_deterministic() {
            return Vec::new();
        }
        self.planners.iter().copied().filter(|p| p.uses_advisor()).collect()
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    MapLoad(#[from] MapLoadError),
    #[error("advisor unavailable: {0}")]
    AdvisorUnavailable(String),
    #[error("invalid benchmark plan: {0}")]
    InvalidPlan(String),
    #[error("ppo: {0}")]
    Rl(RlError),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub path: PathBuf,
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub map: String,
    pub planner: PlannerKind,
    pub repeat: usize,
    pub reason: String,
}

/// Everything needed to rerun a benchmark and check it ran on the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub plan: BenchPlan,
    pub maps: Vec<MapEntry>,
    pub advisor: AdvisorChoice,
    pub deterministic: bool,
    pub nondeterministic_planners: Vec<PlannerKind>,
    pub value_params: ValueParams,
    pub scripted_oracle: ScriptedOracle,
    pub ppo_checkpoint_sha256: Option<String>,
    pub failures: Vec<RunFailure>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Manifest(e.to_string()))
    }

    /// Check that the maps on disk still hash to the recorded values.
    pub fn verify_maps(&self) -> Result<(), BenchError> {
        for entry in &self.maps {
            let map = mapio::load_map_file(&entry.path)?;
            let sha = mapio::map_sha256(&map);
            if sha != entry.sha256 {
                return Err(BenchError::Manifest(format!("{} changed since the recorded run", entry.path.display())));
            }
        }
        Ok(())
    }
}

/// One (map, planner, repeat) cell before averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub map: String,
    pub planner: PlannerKind,
    pub repeat: usize,
    pub metrics: Option<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub reports: Vec<MetricsReport>,
    pub runs: Vec<RunRecord>,
    pub manifest: Manifest,
    /// Training curves per (map, repeat) when PPO was trained in-process.
    pub curves: BTreeMap<(String, usize), LearningCurves>,
}

impl BenchResult {
    pub fn has_failures(&self) -> bool {
        self.reports.iter().any(MetricsReport::is_failure)
    }
}

/// Drive a session to a terminal phase. `on_pause` answers verdict requests.
pub fn drive_session(
    s: &mut PlanningSession,
    mut on_pause: impl FnMut(&PlanningSession) -> Result<Vec<(u32, Verdict)>, String>,
) -> Result<RunMetrics, String> {
    // generous bound against a misbehaving advisor
    let limit = 64 * s.map().cell_count() * (s.params().max_stages + 1) + 1_000;
    for _ in 0..limit {
        match s.phase() {
            Phase::Done => {
                return s
                    .events()
                    .iter()
                    .rev()
                    .find_map(|e| match &e.payload {
                        EventPayload::PathFound { metrics, .. } => Some(*metrics),
                        _ => None,
                    })
                    .ok_or_else(|| "finished without a path".to_string());
            }
            Phase::Failed => {
                return Err(s.snapshot().failure.unwrap_or_else(|| "failed".into()));
            }
            Phase::AwaitVerdict => {
                let verdicts = on_pause(s)?;
                s.submit_verdict(&verdicts).map_err(|e| e.to_string())?;
            }
            _ => match s.step() {
                Ok(_) | Err(SessionError::Advisor(_)) => {}
                Err(e) => return Err(e.to_string()),
            },
        }
    }
    Err("step limit exceeded".into())
}

fn stdin_verdicts(s: &PlanningSession) -> Result<Vec<(u32, Verdict)>, String> {
    let pending = s.pending().ok_or("no pending proposal")?;
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut err = io::stderr();
    crate::console::prompt_verdicts(&s.snapshot(), &pending.candidates, &mut input, &mut err).map_err(|e| e.to_string())
}

fn derived_seed(base: u64, map: &GridMap, repeat: usize) -> u64 {
    let digest = Sha256::digest(map.to_text().as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    base ^ u64::from_le_bytes(head) ^ (repeat as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn load_checkpoint(path: &Path) -> Result<(Policy, String), BenchError> {
    let fail = |reason: String| BenchError::Checkpoint { path: path.into(), reason };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
    let policy = Policy::from_checkpoint(&ckpt).map_err(|e| fail(e.to_string()))?;
    Ok((policy, format!("{:x}", Sha256::digest(text.as_bytes()))))
}

struct Job<'a> {
    map_idx: usize,
    planner: PlannerKind,
    repeat: usize,
    map: &'a GridMap,
}

type JobOutput = (Result<RunMetrics, String>, Option<LearningCurves>);

fn run_job(job: &Job<'_>, plan: &BenchPlan, policy: Option<&Policy>) -> JobOutput {
    if job.planner == PlannerKind::Ppo {
        return run_ppo(job, plan, policy);
    }
    let advisor = job.planner.uses_advisor().then_some(plan.advisor);
    let id = format!("{}-{}-{}", job.map.name(), job.planner, job.repeat);
    let mut session = match setup::build_session(id, job.map.clone(), job.planner, advisor, None, &plan.llm) {
        Ok(s) => s,
        Err(e) => return (Err(e.to_string()), None),
    };
    (drive_session(&mut session, stdin_verdicts), None)
}

fn run_ppo(job: &Job<'_>, plan: &BenchPlan, policy: Option<&Policy>) -> JobOutput {
    let trained;
    let (policy, curves) = match policy {
        Some(p) => (p, None),
        None => match rl::train(job.map, &plan.ppo_config, derived_seed(plan.seed, job.map, job.repeat)) {
            Ok((p, c)) => {
                trained = p;
                (&trained, Some(c))
            }
            Err(e) => return (Err(e.to_string()), None),
        },
    };
    let out = rl::rollout_path(policy, job.map, plan.ppo_config.max_steps).map_err(|e| e.to_string()).and_then(|r| {
        RunMetrics::from_outcome(&r.to_outcome(), PlannerKind::Ppo, job.map.start(), job.map.goal())
            .map_err(|e| e.to_string())
    });
    (out, curves)
}

/// Run the full grid of (map, planner, repeat) cells on a worker pool and
/// average per (map, planner). Failed runs become explicit failure rows.
pub fn run_benchmark(plan: &BenchPlan) -> Result<BenchResult, BenchError> {
    plan.validate()?;
    let maps: Vec<GridMap> = plan.maps.iter().map(|p| mapio::load_map_file(p)).collect::<Result<_, _>>()?;
    let entries: Vec<MapEntry> = plan
        .maps
        .iter()
        .zip(&maps)
        .map(|(p, m)| MapEntry { path: p.clone(), name: m.name().into(), sha256: mapio::map_sha256(m) })
        .collect();

    if plan.advisor == AdvisorChoice::Openai && plan.planners.iter().any(|p| p.uses_advisor()) {
        // fail fast before spawning work
        if let Err(SetupError::AdvisorUnavailable(e)) =
            setup::make_advisor(Some(AdvisorChoice::Openai), PlannerKind::LlmAStar, &maps[0], &plan.llm)
        {
            return Err(BenchError::AdvisorUnavailable(e.to_string()));
        }
    }
    let (policy, ckpt_sha) = match &plan.ppo {
        Some(PpoSource::Checkpoint(path)) if plan.planners.contains(&PlannerKind::Ppo) => {
            let (p, sha) = load_checkpoint(path)?;
            (Some(p), Some(sha))
        }
        _ => (None, None),
    };

    let mut planners = plan.planners.clone();
    planners.sort();
    let jobs: Vec<Job<'_>> = maps
        .iter()
        .enumerate()
        .flat_map(|(map_idx, map)| {
            planners
                .iter()
                .flat_map(move |&planner| (0..plan.repeats).map(move |repeat| Job { map_idx, planner, repeat, map }))
        })
        .collect();

    let interactive = plan.advisor == AdvisorChoice::Human;
    let outputs: Vec<JobOutput> = if interactive {
        jobs.iter().map(|j| run_job(j, plan, policy.as_ref())).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = plan.threads {
            builder = builder.num_threads(n.max(1));
        }
        let pool = builder.build().map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(|j| run_job(j, plan, policy.as_ref())).collect())
    };

    // jobs are already in (map, planner, repeat) order, so grouping is deterministic
    let mut grouped: BTreeMap<(usize, PlannerKind), Vec<Option<RunMetrics>>> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut curves = BTreeMap::new();
    let mut runs = Vec::with_capacity(jobs.len());
    for (job, (result, curve)) in jobs.iter().zip(outputs) {
        runs.push(RunRecord {
            map: job.map.name().into(),
            planner: job.planner,
            repeat: job.repeat,
            metrics: result.as_ref().ok().copied(),
        });
        if let Some(c) = curve {
            curves.insert((job.map.name().to_string(), job.repeat), c);
        }
        let slot = grouped.entry((job.map_idx, job.planner)).or_default();
        match result {
            Ok(m) => slot.push(Some(m)),
            Err(reason) => {
                failures.push(RunFailure {
                    map: job.map.name().into(),
                    planner: job.planner,
                    repeat: job.repeat,
                    reason,
                });
                slot.push(None);
            }
        }
    }
    let reports = grouped
        .into_iter()
        .map(|((map_idx, planner), runs)| MetricsReport::aggregate(planner, maps[map_idx].name(), &runs))
        .collect();

    let nondeterministic_planners = plan.nondeterministic_planners();
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        plan: plan.clone(),
        maps: entries,
        advisor: plan.advisor,
        deterministic: nondeterministic_planners.is_empty(),
        nondeterministic_planners,
        value_params: ValueParams::default(),
        scripted_oracle: ScriptedOracle::default(),
        ppo_checkpoint_sha256: ckpt_sha,
        failures,
    };
    Ok(BenchResult { reports, runs, manifest, curves })
}

// ─── Tables ─────────────────────────────────────────────────────────

/// The three reported metrics, in table order.
pub const METRICS: [(&str, &str); 3] =
    [("path_length", "Path Length"), ("mdt", "MDT"), ("complexity", "Search Complexity")];

const FAIL: &str = "fail";

fn metric_value(r: &MetricsReport, metric: &str) -> Option<f64> {
    match metric {
        "path_length" => r.path_length,
        "mdt" => r.mdt,
        _ => r.complexity,
    }
}

/// Integers print bare; fractional values with two decimals.
pub fn format_number(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Planner column key used in CSV headers.
pub fn column_key(p: PlannerKind) -> String {
    p.as_str().replace('-', "_")
}

fn layout(reports: &[MetricsReport]) -> (Vec<String>, Vec<PlannerKind>) {
    let mut envs: Vec<String> = Vec::new();
    for r in reports {
        if !envs.contains(&r.map_name) {
            envs.push(r.map_name.clone());
        }
    }
    let planners = PlannerKind::ALL.into_iter().filter(|p| reports.iter().any(|r| r.planner == *p)).collect();
    (envs, planners)
}

fn cell<'a>(reports: &'a [MetricsReport], env: &str, p: PlannerKind) -> Option<&'a MetricsReport> {
    reports.iter().find(|r| r.map_name == env && r.planner == p)
}

/// Render reports grouped by metric, one row per environment and one column
/// per planner present (in the canonical planner order).
pub fn emit_table(reports: &[MetricsReport], format: OutputFormat) -> String {
    let (envs, planners) = layout(reports);
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str("metric,environment");
            for p in &planners {
                write!(out, ",{}", column_key(*p)).unwrap();
            }
            out.push('\n');
            for (key, _) in METRICS {
                for env in &envs {
                    write!(out, "{key},{env}").unwrap();
                    for &p in &planners {
                        let v = cell(reports, env, p).and_then(|r| metric_value(r, key));
                        match (cell(reports, env, p), v) {
                            (None, _) => out.push(','),
                            (Some(_), Some(v)) => write!(out, ",{}", format_number(v)).unwrap(),
                            (Some(_), None) => write!(out, ",{FAIL}").unwrap(),
                        }
                    }
                    out.push('\n');
                }
            }
        }
        OutputFormat::Markdown => {
            out.push_str("| Metric | Environment |");
            for p in &planners {
                write!(out, " {} |", p.title()).unwrap();
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---:|".repeat(planners.len()));
            out.push('\n');
            for (key, title) in METRICS {
                for (i, env) in envs.iter().enumerate() {
                    let values: Vec<Option<f64>> =
                        planners.iter().map(|&p| cell(reports, env, p).and_then(|r| metric_value(r, key))).collect();
                    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
                    sorted.sort_by(f64::total_cmp);
                    // lower is better for every metric; ties with the runner-up are bold too
                    let threshold = sorted.get(1.min(sorted.len().saturating_sub(1))).copied();
                    write!(out, "| {} | {} |", if i == 0 { title } else { "" }, env).unwrap();
                    for v in values {
                        match v {
                            Some(v) if threshold.is_some_and(|t| v <= t) => {
                                write!(out, " **{}** |", format_number(v)).unwrap()
                            }
                            Some(v) => write!(out, " {} |", format_number(v)).unwrap(),
                            None => out.push_str(" — |"),
                        }
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Read a CSV table back into one report per (environment, planner). Repeat
/// counts are not part of the table; a failure cell yields a single failed run.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsReport>, BenchError> {
    let bad = |msg: String| BenchError::Table(msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty table".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "metric" || cols[1] != "environment" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let planners: Vec<PlannerKind> =
        cols[2..].iter().map(|c| setup::parse_planner(c).map_err(bad)).collect::<Result<_, _>>()?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!("row has {} fields, header has {}", fields.len(), cols.len())));
        }
        let metric = fields[0];
        if !METRICS.iter().any(|(k, _)| *k == metric) {
            return Err(bad(format!("unknown metric {metric:?}")));
        }
        for (&p, raw) in planners.iter().zip(&fields[2..]) {
            if raw.is_empty() {
                continue;
            }
            let idx = match reports.iter().position(|r| r.map_name == fields[1] && r.planner == p) {
                Some(i) => i,
                None => {
                    reports.push(MetricsReport {
                        planner: p,
                        map_name: fields[1].into(),
                        repeats: 1,
                        path_length: None,
                        mdt: None,
                        complexity: None,
                        failures: 0,
                    });
                    reports.len() - 1
                }
            };
            let r = &mut reports[idx];
            let value = if *raw == FAIL {
                r.failures = 1;
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| bad(format!("bad number {raw:?}")))?)
            };
            match metric {
                "path_length" => r.path_length = value,
                "mdt" => r.mdt = value,
                _ => r.complexity = value,
            }
        }
    }
    Ok(reports)
}
