//! `plan`: benchmark, solve, train and serve from the command line.
//!
//! Exit codes: 0 on success, 2 when some runs failed, 1 on a fatal error.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridplan::bench::{self, BenchPlan, Manifest, OutputFormat, PpoSource};
use gridplan::console;
use gridplan::mapio;
use gridplan::service::{self, ServiceConfig};
use gridplan::setup::{self, AdvisorChoice, LlmSettings};
use gridplan_core::metrics::{PlannerKind, RunMetrics};
use gridplan_core::rl::{self, Checkpoint, Policy, PpoConfig};

#[derive(Parser)]
#[command(name = "plan", version, about = "Advisor-guided grid path planning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run planners over maps and emit the averaged metrics table.
    Bench(BenchArgs),
    /// Plan once on a single map and print the result.
    Solve(SolveArgs),
    /// Train the PPO baseline and write a checkpoint.
    TrainPpo(TrainArgs),
    /// Serve the session API.
    Serve(ServeArgs),
    /// Write the built-in map catalogue as .map files.
    Maps {
        #[arg(long, default_value = "maps")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LlmArgs {
    /// Chat model name sent to the endpoint.
    #[arg(long, default_value_t = LlmSettings::default().model)]
    model: String,
    #[arg(long, default_value_t = LlmSettings::default().timeout_secs)]
    llm_timeout: u64,
}

impl LlmArgs {
    fn settings(&self) -> LlmSettings {
        LlmSettings { model: self.model.clone(), timeout_secs: self.llm_timeout, ..LlmSettings::default() }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Glob of map files.
    #[arg(long, default_value = "maps/*_24.map")]
    maps: String,
    /// Comma-separated planners.
    #[arg(long, default_value = "astar,llm-astar,llm-greedy")]
    planners: String,
    #[arg(long, value_enum, default_value_t = AdvisorChoice::Scripted)]
    advisor: AdvisorChoice,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Output file; stdout when absent. The manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format; inferred from --out when absent.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ppo_checkpoint: Option<PathBuf>,
    /// Train PPO in-process for every map and repeat.
    #[arg(long)]
    train_ppo: bool,
    #[arg(long)]
    ppo_episodes: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Rerun the plan recorded in a manifest instead of the flags above.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args)]
struct SolveArgs {
    /// Map file or catalogue name.
    #[arg(long)]
    map: String,
    #[arg(long, value_parser = setup::parse_planner)]
    planner: PlannerKind,
    /// Pause on every candidate batch and read verdicts from stdin.
    #[arg(long)]
    interactive: bool,
    #[arg(long, value_enum)]
    advisor: Option<AdvisorChoice>,
    /// Write the event log as JSON lines.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    ppo_checkpoint: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    map: String,
    #[arg(long, default_value_t = PpoConfig::default().episodes)]
    episodes: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-episode learning curves as CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Browser origin allowed by CORS.
    #[arg(long)]
    ui_origin: Option<String>,
    /// Optional bearer token required on every request.
    #[arg(long, env = "PLAN_SERVICE_TOKEN")]
    token: Option<String>,
    #[command(flatten)]
    llm: LlmArgs,
}

type CliResult = Result<ExitCode, String>;

fn partial(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn bench_plan(args: &BenchArgs) -> Result<BenchPlan, String> {
    if let Some(path) = &args.replay {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let manifest = Manifest::from_json(&text).map_err(|e| e.to_string())?;
        manifest.verify_maps().map_err(|e| e.to_string())?;
        return Ok(manifest.plan);
    }
    let maps = mapio::resolve_maps(&args.maps).map_err(|e| e.to_string())?;
    let planners = setup::parse_planner_list(&args.planners)?;
    let mut plan = BenchPlan::new(maps, planners);
    plan.repeats = args.repeats;
    plan.advisor = args.advisor;
    plan.seed = args.seed;
    plan.threads = args.threads;
    plan.llm = args.llm.settings();
    plan.format = args.format.unwrap_or_else(|| args.out.as_deref().map_or(OutputFormat::Csv, OutputFormat::from_path));
    plan.ppo = match (&args.ppo_checkpoint, args.train_ppo) {
        (Some(p), _) => Some(PpoSource::Checkpoint(p.clone())),
        (None, true) => Some(PpoSource::Train),
        (None, false) => None,
    };
    if let Some(n) = args.ppo_episodes {
        plan.ppo_config.episodes = n;
    }
    Ok(plan)
}

fn run_bench(args: BenchArgs) -> CliResult {
    let plan = bench_plan(&args)?;
    let result = bench::run_benchmark(&plan).map_err(|e| e.to_string())?;
    let table = bench::emit_table(&result.reports, plan.format);
    for f in &result.manifest.failures {
        eprintln!("failed: {} {} repeat {}: {}", f.map, f.planner, f.repeat, f.reason);
    }
    match &args.out {
        Some(out) => {
            fs::write(out, &table).map_err(|e| format!("{}: {e}", out.display()))?;
            let mpath = out.with_extension("manifest.json");
            fs::write(&mpath, result.manifest.to_json()).map_err(|e| format!("{}: {e}", mpath.display()))?;
            eprintln!("wrote {} and {}", out.display(), mpath.display());
        }
        None => {
            print!("{table}");
            eprintln!("{}", result.manifest.to_json());
        }
    }
    Ok(partial(result.has_failures()))
}

fn print_metrics(m: &RunMetrics) {
    println!("path_length {}  mdt {}  complexity {}", m.path_length, m.mdt, m.complexity);
}

fn run_solve(args: SolveArgs) -> CliResult {
    let map = mapio::map_from_arg(&args.map).map_err(|e| e.to_string())?;
    if args.planner == PlannerKind::Ppo {
        let path = args.ppo_checkpoint.as_ref().ok_or("ppo needs --ppo-checkpoint")?;
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let policy = Policy::from_checkpoint(&ckpt).map_err(|e| e.to_string())?;
        return match rl::rollout_path(&policy, &map, PpoConfig::default().max_steps) {
            Ok(r) => {
                let m = RunMetrics::from_outcome(&r.to_outcome(), PlannerKind::Ppo, map.start(), map.goal())
                    .map_err(|e| e.to_string())?;
                print_metrics(&m);
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("{e}");
                Ok(ExitCode::from(2))
            }
        };
    }
    let advisor = if args.interactive { Some(AdvisorChoice::Human) } else { args.advisor };
    let mut session = setup::build_session("cli", map, args.planner, advisor, None, &args.llm.settings())
        .map_err(|e| e.to_string())?;
    let outcome = bench::drive_session(&mut session, |s| {
        let pending = s.pending().ok_or("no pending proposal")?;
        let stdin = io::stdin();
        let mut input = stdin.lock();
        console::prompt_verdicts(&s.snapshot(), &pending.candidates, &mut input, &mut io::stderr())
            .map_err(|e| e.to_string())
    });
    if let Some(path) = &args.events {
        let mut f = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        for ev in session.events() {
            writeln!(f, "{}", serde_json::to_string(ev).expect("events serialize")).map_err(|e| e.to_string())?;
        }
    }
    print!("{}", console::render_grid(&session.snapshot()));
    match outcome {
        Ok(m) => {
            print_metrics(&m);
            Ok(ExitCode::SUCCESS)
        }
        Err(reason) => {
            eprintln!("no path: {reason}");
            Ok(ExitCode::from(2))
        }
    }
}

fn run_train(args: TrainArgs) -> CliResult {
    let map = mapio::map_from_arg(&args.map).map_err(|e| e.to_string())?;
    let config = PpoConfig { episodes: args.episodes, ..PpoConfig::default() };
    let (policy, curves) = rl::train(&map, &config, args.seed).map_err(|e| e.to_string())?;
    let json = serde_json::to_string(&policy.checkpoint()).expect("checkpoint serializes");
    fs::write(&args.out, json).map_err(|e| format!("{}: {e}", args.out.display()))?;
    if let Some(path) = &args.curves {
        let mut text = String::from("episode,steps,score,reached\n");
        for i in 0..curves.steps.len() {
            text.push_str(&format!("{},{},{},{}\n", i, curves.steps[i], curves.score[i], curves.reached[i]));
        }
        fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let window = 100.min(curves.score.len());
    println!(
        "episodes {}  mean score first {window}: {:.3}  last {window}: {:.3}  success last {window}: {:.0}%",
        curves.score.len(),
        curves.mean_score_first(window),
        curves.mean_score_last(window),
        100.0 * curves.success_rate_last(window)
    );
    match rl::rollout_path(&policy, &map, config.max_steps) {
        Ok(r) => {
            println!("greedy rollout reaches the goal in {} cells", r.path.len());
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("greedy rollout: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn run_serve(args: ServeArgs) -> CliResult {
    let addr: SocketAddr =
        format!("{}:{}", args.host, args.port).parse().map_err(|e| format!("bad --host/--port: {e}"))?;
    let config = ServiceConfig {
        ui_origin: args.ui_origin,
        token: args.token,
        llm: args.llm.settings(),
        ..ServiceConfig::with_catalogue()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(service::serve(addr, config)).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => run_bench(a),
        Command::Solve(a) => run_solve(a),
        Command::TrainPpo(a) => run_train(a),
        Command::Serve(a) => run_serve(a),
        Command::Maps { out } => mapio::write_catalogue(&out)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            })
            .map_err(|e| e.to_string()),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
