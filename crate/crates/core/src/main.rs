//! `mapf` command-line tool.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error
//! (bad flags, missing input files, unusable output locations).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mapf_core::attention::{EncoderConfig, RecurrentState, ScoreScale};
use mapf_core::env::{EnvConfig, EVAL_MAX_STEPS};
use mapf_core::eval::{aggregate, prioritized_plan, run_batch, write_results_csv, PlanOutcome, PolicyKind};
use mapf_core::intent::{build_intent_graph, intent_heatmap, DEFAULT_HORIZON};
use mapf_core::local_obs::DEFAULT_FOV;
use mapf_core::mapgen::{generate_map, MapKind};
use mapf_core::network::AgentNetwork;
use mapf_core::obs::observe;
use mapf_core::render::{render_heatmap_ppm, render_map_pgm, render_skeleton_ppm};
use mapf_core::scenario::{generate_scenario, load_dir, Scenario, ScenarioParams};
use mapf_core::skeleton::{extract_graph, ThinningMethod};
use mapf_core::{Error, GridMap, Result};

#[derive(Parser)]
#[command(name = "mapf", version, about = "Grid MAPF toolkit: maps, skeleton graphs, observations, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a map (`.json` output writes the JSON form, anything else the text grid).
    GenMap(GenMapArgs),
    /// Generate scenario files into a directory.
    GenScenarios(GenScenariosArgs),
    /// Extract the skeleton graph of a map as JSON.
    ExtractGraph(ExtractGraphArgs),
    /// Dump one agent's observation features as JSON.
    Features(FeaturesArgs),
    /// Run a policy over a scenario directory and write metrics.
    Eval(EvalArgs),
    /// Dump attention weights of a seeded, untrained network.
    AttnDump(AttnDumpArgs),
    /// Write PGM/PPM rasters.
    #[command(subcommand)]
    Render(RenderCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Room,
    Random,
}

impl From<KindArg> for MapKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Room => MapKind::Room,
            KindArg::Random => MapKind::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mat,
    Zs,
}

impl From<MethodArg> for ThinningMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mat => ThinningMethod::MedialAxis,
            MethodArg::Zs => ThinningMethod::ZhangSuen,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Prioritized,
    Idle,
    Replay,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Prioritized => PolicyKind::Prioritized,
            PolicyArg::Idle => PolicyKind::Idle,
            PolicyArg::Replay => PolicyKind::Replay,
        }
    }
}

#[derive(Args)]
struct GenMapArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Width and height.
    #[arg(long, num_args = 2, value_names = ["W", "H"])]
    size: Vec<usize>,
    /// Obstacle density for random maps.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenScenariosArgs {
    #[arg(long, value_enum, default_value = "random")]
    kind: KindArg,
    #[arg(long, num_args = 2, value_names = ["W", "H"])]
    size: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = EVAL_MAX_STEPS)]
    max_steps: usize,
    #[arg(long)]
    seed: u64,
    /// Store a prioritized plan in each file for `eval --policy replay`.
    #[arg(long)]
    with_plan: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExtractGraphArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum, default_value = "mat")]
    method: MethodArg,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
#[group(id = "part", multiple = false)]
struct PartFlags {
    #[arg(long = "static", group = "part")]
    static_graph: bool,
    #[arg(long, group = "part")]
    intent: bool,
    #[arg(long, group = "part")]
    local: bool,
    #[arg(long, group = "part")]
    all: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    agent: usize,
    #[command(flatten)]
    part: PartFlags,
    #[arg(long, value_enum, default_value = "mat")]
    method: MethodArg,
    /// Intent prediction horizon.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Local view side (odd, 5 to 21).
    #[arg(long, default_value_t = DEFAULT_FOV)]
    fov: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Blocking tolerance in moves.
    #[arg(long, default_value_t = 10)]
    tau: u32,
    /// Skip blocking detection in rewards.
    #[arg(long)]
    no_blocking: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AttnDumpArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    agent: usize,
    /// Weight initialisation seed.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mat")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_FOV)]
    fov: usize,
    /// Scale self-attention scores by sqrt(d) instead of sqrt(d / heads).
    #[arg(long)]
    full_scale_scores: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum RenderCommand {
    /// Grayscale map (PGM).
    Map {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Skeleton and graph nodes over the map (PPM).
    Skeleton {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum, default_value = "mat")]
        method: MethodArg,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Intent heat map of a scenario's start state (PPM).
    Intent {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn need_file(p: &Path) -> CliResult {
    if !p.is_file() {
        return Err(Failure::Usage(format!("input file {} does not exist", p.display())));
    }
    Ok(())
}

fn need_dir(p: &Path) -> CliResult {
    if !p.is_dir() {
        return Err(Failure::Usage(format!("input directory {} does not exist", p.display())));
    }
    Ok(())
}

fn need_parent(p: &Path) -> CliResult {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Failure::Usage(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn size_pair(size: &[usize]) -> (usize, usize) {
    (size[0], size[1])
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

fn load_map(p: &Path) -> Result<GridMap> {
    let text = fs::read_to_string(p)?;
    if is_json(p) {
        GridMap::from_json(&serde_json::from_str(&text)?)
    } else {
        GridMap::parse(&text)
    }
}

fn write_json<T: Serialize>(p: &Path, value: &T) -> Result<()> {
    fs::write(p, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn gen_map(a: GenMapArgs) -> CliResult {
    need_parent(&a.output)?;
    let (w, h) = size_pair(&a.size);
    let map = generate_map(a.kind.into(), w, h, a.density, a.seed)?;
    if is_json(&a.output) {
        write_json(&a.output, &map.to_json())?;
    } else {
        fs::write(&a.output, map.serialize()).map_err(Error::from)?;
    }
    Ok(())
}

fn gen_scenarios(a: GenScenariosArgs) -> CliResult {
    let (width, height) = size_pair(&a.size);
    fs::create_dir_all(&a.output).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", a.output.display())))?;
    for k in 0..a.count {
        let params = ScenarioParams {
            kind: a.kind.into(),
            width,
            height,
            density: a.density,
            agents: a.agents,
            max_steps: a.max_steps,
            seed: a.seed.wrapping_add(k as u64),
        };
        let id = format!("scenario_{k:04}");
        let mut s = generate_scenario(&id, &params)?;
        if a.with_plan {
            let map = s.grid()?;
            match prioritized_plan(&map, &s.starts, &s.goals, s.max_steps, s.seed)? {
                PlanOutcome::Solved(plan) => s.plan = Some(plan.paths),
                PlanOutcome::Failed { .. } => log::warn!("{id}: no prioritized plan found, stored without one"),
            }
        }
        s.save(&a.output.join(format!("{id}.json")))?;
    }
    Ok(())
}

fn extract(a: ExtractGraphArgs) -> CliResult {
    need_file(&a.map)?;
    need_parent(&a.output)?;
    let map = load_map(&a.map)?;
    write_json(&a.output, &extract_graph(&map, a.method.into()).dump())?;
    Ok(())
}

fn features(a: FeaturesArgs) -> CliResult {
    need_file(&a.scenario)?;
    need_parent(&a.output)?;
    let scenario = Scenario::load(&a.scenario)?;
    let state = scenario.initial_state()?;
    let nodes = extract_graph(&state.map, a.method.into()).node_positions();
    let bundle = observe(&state, &nodes, a.agent, a.horizon, a.fov)?;
    let p = &a.part;
    if p.static_graph {
        write_json(&a.output, &bundle.static_graph)?;
    } else if p.intent {
        write_json(&a.output, &bundle.intent_graph)?;
    } else if p.local {
        write_json(&a.output, &bundle.local)?;
    } else {
        write_json(&a.output, &bundle)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    need_dir(&a.scenarios)?;
    fs::create_dir_all(&a.output).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", a.output.display())))?;
    let scenarios = load_dir(&a.scenarios)?;
    let config = EnvConfig { tau: a.tau, compute_blocking: !a.no_blocking };
    let records = run_batch(&scenarios, a.policy.into(), &config)?;
    write_results_csv(&records, &a.output.join("results.csv"))?;
    write_json(&a.output.join("aggregate.json"), &aggregate(&records)?)?;
    let mut lines = String::new();
    for r in &records {
        lines += &serde_json::to_string(r).map_err(Error::from)?;
        lines.push('\n');
    }
    fs::write(a.output.join("episodes.jsonl"), lines).map_err(Error::from)?;
    Ok(())
}

fn attn_dump(a: AttnDumpArgs) -> CliResult {
    need_file(&a.scenario)?;
    need_parent(&a.output)?;
    let scenario = Scenario::load(&a.scenario)?;
    let state = scenario.initial_state()?;
    let nodes = extract_graph(&state.map, a.method.into()).node_positions();
    let bundle = observe(&state, &nodes, a.agent, a.horizon, a.fov)?;
    let mut template = EncoderConfig::desk(1);
    if a.full_scale_scores {
        template.scale = ScoreScale::Full;
    }
    let net = AgentNetwork::new(&template, a.fov, a.seed)?;
    let out = net.forward(&bundle, &RecurrentState::zeros(template.d))?;
    // Self-attention weights grow with the square of the node count.
    fs::write(&a.output, serde_json::to_string(&out).map_err(Error::from)? + "\n").map_err(Error::from)?;
    Ok(())
}

fn render(cmd: RenderCommand) -> CliResult {
    let (bytes, output) = match cmd {
        RenderCommand::Map { map, scale, output } => {
            need_file(&map)?;
            need_parent(&output)?;
            (render_map_pgm(&load_map(&map)?, scale)?, output)
        }
        RenderCommand::Skeleton { map, method, scale, output } => {
            need_file(&map)?;
            need_parent(&output)?;
            let map = load_map(&map)?;
            let graph = extract_graph(&map, method.into());
            (render_skeleton_ppm(&map, &graph, scale)?, output)
        }
        RenderCommand::Intent { scenario, horizon, scale, output } => {
            need_file(&scenario)?;
            need_parent(&output)?;
            let s = Scenario::load(&scenario)?;
            let map = s.grid()?;
            let graph = build_intent_graph(&map, &s.starts, &s.goals, horizon)?;
            (render_heatmap_ppm(&map, &intent_heatmap(&map, &graph), scale)?, output)
        }
    };
    fs::write(output, bytes).map_err(Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenMap(a) => gen_map(a),
        Command::GenScenarios(a) => gen_scenarios(a),
        Command::ExtractGraph(a) => extract(a),
        Command::Features(a) => features(a),
        Command::Eval(a) => eval(a),
        Command::AttnDump(a) => attn_dump(a),
        Command::Render(c) => render(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("mapf: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("mapf: {e}");
            ExitCode::from(1)
        }
    }
}
