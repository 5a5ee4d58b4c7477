//! Turning user-facing choices into configured planning sessions.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use gridplan_core::advisor::{AdvisorError, LlmAdvisor, LlmConfig, ScriptedOracle};
use gridplan_core::metrics::PlannerKind;
use gridplan_core::orchestrator::{PlanningSession, SessionAdvisor, SessionError, SessionParams};
use gridplan_core::{GridMap, SearchMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::HttpTransport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdvisorChoice {
    Scripted,
    Openai,
    Human,
}

impl AdvisorChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            AdvisorChoice::Scripted => "scripted",
            AdvisorChoice::Openai => "openai",
            AdvisorChoice::Human => "human",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self == AdvisorChoice::Scripted
    }
}

impl fmt::Display for AdvisorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdvisorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scripted" => Ok(AdvisorChoice::Scripted),
            "openai" | "llm" => Ok(AdvisorChoice::Openai),
            "human" => Ok(AdvisorChoice::Human),
            other => Err(format!("unknown advisor {other:?}")),
        }
    }
}

/// Chat-model settings; the credential itself only ever comes from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub model: String,
    pub token_budget: usize,
    pub timeout_secs: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        let c = LlmConfig::default();
        Self { model: c.model, token_budget: c.token_budget, timeout_secs: 60 }
    }
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("advisor unavailable: {0}")]
    AdvisorUnavailable(AdvisorError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Parse a planner name, accepting both `llm-astar` and `llm_astar`.
pub fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse().map_err(|_| format!("unknown planner {s:?}"))
}

pub fn parse_planner_list(s: &str) -> Result<Vec<PlannerKind>, String> {
    let mut out: Vec<PlannerKind> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let p = parse_planner(part)?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err("no planners given".into());
    }
    Ok(out)
}

/// Build the advisor for one session. `None` means no advisor at all.
pub fn make_advisor(
    choice: Option<AdvisorChoice>,
    planner: PlannerKind,
    map: &GridMap,
    llm: &LlmSettings,
) -> Result<SessionAdvisor, SetupError> {
    Ok(match choice {
        None => SessionAdvisor::None,
        Some(AdvisorChoice::Scripted) => SessionAdvisor::Scripted(ScriptedOracle::default()),
        Some(AdvisorChoice::Human) => SessionAdvisor::Human,
        Some(AdvisorChoice::Openai) => {
            let transport = HttpTransport::from_env(llm.model.clone(), Duration::from_secs(llm.timeout_secs))
                .map_err(SetupError::AdvisorUnavailable)?;
            let mode = match planner {
                PlannerKind::Greedy | PlannerKind::LlmGreedy => SearchMode::Greedy,
                _ => SearchMode::AStar,
            };
            let config = LlmConfig { model: llm.model.clone(), token_budget: llm.token_budget };
            SessionAdvisor::External(Box::new(LlmAdvisor::new(transport, config, map, mode)))
        }
    })
}

/// Create a session. Advisor-guided planners default to the scripted oracle;
/// a human advisor turns autopilot off unless the caller asked otherwise.
pub fn build_session(
    id: impl Into<String>,
    map: GridMap,
    planner: PlannerKind,
    advisor: Option<AdvisorChoice>,
    autopilot: Option<bool>,
    llm: &LlmSettings,
) -> Result<PlanningSession, SetupError> {
    let advisor = advisor.or(planner.uses_advisor().then_some(AdvisorChoice::Scripted));
    let params = SessionParams {
        autopilot: autopilot.unwrap_or(advisor != Some(AdvisorChoice::Human)),
        ..SessionParams::default()
    };
    let adv = make_advisor(advisor, planner, &map, llm)?;
    Ok(PlanningSession::create(id, map, planner, adv, params)?)
}
