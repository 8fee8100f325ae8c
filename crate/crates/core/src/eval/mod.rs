//! Episode runner, scripted policies, the prioritized planner and evaluation
//! metrics.
//!
//! An agent has arrived when it stands on its goal at the end of the episode.
//! Its arrival step is the first step from which it stayed there. Timed-out
//! episodes count `max_steps` towards makespan and episode length.

mod planner;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{is_done, step_joint, Action, EnvConfig, EnvState, Status};
use crate::error::{invalid, Error, Result};
use crate::grid::Coord;
use crate::scenario::Scenario;

pub use planner::{prioritized_plan, Plan, PlanOutcome, PLAN_ATTEMPTS};

/// Caps the number of worker threads used by [`run_batch`].
pub const THREADS_ENV: &str = "ALPHA_MAPF_THREADS";

pub trait Policy {
    fn act(&mut self, state: &EnvState) -> Result<Vec<Action>>;
}

/// Every agent idles.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn act(&mut self, state: &EnvState) -> Result<Vec<Action>> {
        Ok(vec![Action::Idle; state.num_agents()])
    }
}

/// Follows timed paths step by step; fails if the state drifts off the plan.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    paths: Vec<Vec<Coord>>,
}

impl ReplayPolicy {
    pub fn new(paths: Vec<Vec<Coord>>) -> Result<Self> {
        if paths.iter().any(Vec::is_empty) {
            return Err(invalid("replay plan contains an empty path"));
        }
        Ok(Self { paths })
    }
}

impl Policy for ReplayPolicy {
    fn act(&mut self, state: &EnvState) -> Result<Vec<Action>> {
        if self.paths.len() != state.num_agents() {
            return Err(invalid(format!("plan has {} paths for {} agents", self.paths.len(), state.num_agents())));
        }
        let t = state.step;
        self.paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let at = |k: usize| p[k.min(p.len() - 1)];
                if state.positions[i] != at(t) {
                    return Err(invalid(format!(
                        "agent {i} at {} but plan expects {} at step {t}",
                        state.positions[i],
                        at(t)
                    )));
                }
                Action::between(at(t), at(t + 1))
                    .ok_or_else(|| invalid(format!("agent {i}: plan step {t} is not a unit move")))
            })
            .collect()
    }
}

/// Plans once from the first state it sees, then replays the plan. If
/// planning fails every agent idles.
#[derive(Debug, Clone)]
pub struct PrioritizedPolicy {
    seed: u64,
    /// Step the plan was made at, and the plan unless planning failed.
    replay: Option<(usize, Option<ReplayPolicy>)>,
}

impl PrioritizedPolicy {
    pub fn new(seed: u64) -> Self {
        Self { seed, replay: None }
    }
}

impl Policy for PrioritizedPolicy {
    fn act(&mut self, state: &EnvState) -> Result<Vec<Action>> {
        if self.replay.is_none() {
            let horizon = state.max_steps.saturating_sub(state.step);
            let outcome = prioritized_plan(&state.map, &state.positions, &state.goals, horizon, self.seed)?;
            let replay = match outcome {
                PlanOutcome::Solved(plan) => Some(ReplayPolicy::new(plan.paths)?),
                PlanOutcome::Failed { .. } => None,
            };
            self.replay = Some((state.step, replay));
        }
        match self.replay.as_mut().expect("set above") {
            (start, Some(r)) => {
                let shifted = EnvState { step: state.step - *start, ..state.clone() };
                r.act(&shifted)
            }
            (_, None) => IdlePolicy.act(state),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Prioritized,
    Idle,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub actions: Vec<Action>,
    pub executed: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Positions after the step.
    pub positions: Vec<Coord>,
    pub collisions: Vec<bool>,
    pub eta: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario_id: String,
    pub n_agents: usize,
    pub map_size: (usize, usize),
    pub status: Status,
    pub steps: usize,
    pub max_steps: usize,
    pub arrivals: Vec<Option<usize>>,
    pub log: Vec<StepLog>,
}

impl EpisodeRecord {
    pub fn arrived(&self) -> usize {
        self.arrivals.iter().filter(|a| a.is_some()).count()
    }

    pub fn collisions(&self) -> usize {
        self.log.iter().map(|s| s.collisions.iter().filter(|&&c| c).count()).sum()
    }
}

fn arrivals(initial: &EnvState, log: &[StepLog]) -> Vec<Option<usize>> {
    (0..initial.num_agents())
        .map(|i| {
            let goal = initial.goals[i];
            let mut since = (initial.positions[i] == goal).then_some(0);
            for s in log {
                if s.positions[i] != goal {
                    since = None;
                } else if since.is_none() {
                    since = Some(s.step);
                }
            }
            since
        })
        .collect()
}

/// Steps `policy` until every agent is on its goal or the step cap is hit.
pub fn run_episode(id: &str, initial: EnvState, policy: &mut dyn Policy, config: &EnvConfig) -> Result<EpisodeRecord> {
    let mut state = initial.clone();
    let mut log = Vec::new();
    let mut status = is_done(&state);
    while status == Status::Running {
        let actions = policy.act(&state)?;
        if actions.len() != state.num_agents() {
            return Err(invalid(format!(
                "policy returned {} actions for {} agents at step {}",
                actions.len(),
                state.num_agents(),
                state.step
            )));
        }
        let (next, outcome) = step_joint(&state, &actions, config)?;
        log.push(StepLog {
            step: next.step,
            actions,
            executed: outcome.executed,
            rewards: outcome.rewards,
            positions: next.positions.clone(),
            collisions: outcome.collided,
            eta: outcome.eta,
        });
        status = outcome.status;
        state = next;
    }
    Ok(EpisodeRecord {
        scenario_id: id.to_string(),
        n_agents: initial.num_agents(),
        map_size: (initial.map.width(), initial.map.height()),
        status,
        steps: state.step,
        max_steps: initial.max_steps,
        arrivals: arrivals(&initial, &log),
        log,
    })
}

pub fn makespan(record: &EpisodeRecord) -> usize {
    match record.status {
        Status::Success => record.arrivals.iter().flatten().copied().max().unwrap_or(0),
        _ => record.max_steps,
    }
}

fn non_empty(records: &[EpisodeRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("metrics over an empty set of episodes".into()));
    }
    Ok(())
}

pub fn success_rate(records: &[EpisodeRecord]) -> Result<f64> {
    non_empty(records)?;
    Ok(records.iter().filter(|r| r.status == Status::Success).count() as f64 / records.len() as f64)
}

/// Arrived agents over all agents, pooled across episodes.
pub fn arrival_rate(records: &[EpisodeRecord]) -> Result<f64> {
    non_empty(records)?;
    let agents: usize = records.iter().map(|r| r.n_agents).sum();
    if agents == 0 {
        return Err(Error::InvalidArgument("episodes contain no agents".into()));
    }
    Ok(records.iter().map(EpisodeRecord::arrived).sum::<usize>() as f64 / agents as f64)
}

/// Mean makespan, with timeouts contributing the step cap.
pub fn episode_length(records: &[EpisodeRecord]) -> Result<f64> {
    non_empty(records)?;
    Ok(records.iter().map(makespan).sum::<usize>() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(rename = "MS")]
    pub ms: f64,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "AR")]
    pub ar: f64,
    #[serde(rename = "EL")]
    pub el: f64,
}

pub fn aggregate(records: &[EpisodeRecord]) -> Result<Aggregate> {
    let el = episode_length(records)?;
    Ok(Aggregate { ms: el, sr: success_rate(records)?, ar: arrival_rate(records)?, el })
}

pub fn run_scenario(scenario: &Scenario, kind: PolicyKind, config: &EnvConfig) -> Result<EpisodeRecord> {
    let initial = scenario.initial_state()?;
    let mut policy: Box<dyn Policy> = match kind {
        PolicyKind::Idle => Box::new(IdlePolicy),
        PolicyKind::Prioritized => Box::new(PrioritizedPolicy::new(scenario.seed)),
        PolicyKind::Replay => {
            let plan = scenario
                .plan
                .clone()
                .ok_or_else(|| invalid(format!("scenario {} has no stored plan to replay", scenario.id)))?;
            Box::new(ReplayPolicy::new(plan)?)
        }
    };
    run_episode(&scenario.id, initial, policy.as_mut(), config)
}

fn thread_cap() -> Option<usize> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {THREADS_ENV}={raw:?}");
            None
        }
    }
}

/// Runs every scenario, in parallel, returning records in input order.
pub fn run_batch(scenarios: &[Scenario], kind: PolicyKind, config: &EnvConfig) -> Result<Vec<EpisodeRecord>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| scenarios.par_iter().map(|s| run_scenario(s, kind, config)).collect())
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    scenario_id: &'a str,
    n_agents: usize,
    map_size: String,
    status: &'static str,
    makespan: usize,
}

pub fn write_results_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(CsvRow {
            scenario_id: &r.scenario_id,
            n_agents: r.n_agents,
            map_size: format!("{}x{}", r.map_size.0, r.map_size.1),
            status: match r.status {
                Status::Success => "success",
                Status::Timeout => "timeout",
                Status::Running => "running",
            },
            makespan: makespan(r),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}
