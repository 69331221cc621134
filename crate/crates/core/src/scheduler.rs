//! Bounded-parallel execution of a task graph.
//!
//! Ready tasks are dispatched shortest-estimate first (then by priority and id)
//! into a fixed budget of `max_parallel` worker slots. A failure marks every
//! transitive dependent failed without running it; unrelated branches continue.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgentRole;
use crate::planner::{Phase, PlannerError, TaskGraph, TaskNode, TaskStatus};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("no executor registered for role {0}")]
    ExecutorMissing(AgentRole),
    #[error(transparent)]
    Graph(#[from] PlannerError),
    #[error("max_parallel must be at least 1")]
    NoBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub max_parallel: usize,
    /// Poll interval while waiting on running tasks.
    pub tick: Duration,
    /// Estimate used for a phase with no history (s).
    pub default_durations: BTreeMap<Phase, f64>,
    /// Refine estimates from measured durations. Off gives a run-independent order.
    pub adaptive: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        let default_durations = [
            (Phase::Geometry, 1.0),
            (Phase::Aero, 60.0),
            (Phase::Acoustics, 5.0),
            (Phase::Selection, 1.0),
            (Phase::Structures, 10.0),
            (Phase::Optimization, 30.0),
        ]
        .into_iter()
        .collect();
        Self {
            max_parallel: 4,
            tick: Duration::from_millis(50),
            default_durations,
            adaptive: true,
        }
    }
}

impl SchedulerConfig {
    pub fn serial() -> Self {
        Self {
            max_parallel: 1,
            adaptive: false,
            ..Self::default()
        }
    }
}

/// Measured task durations per role and phase (s).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationHistory {
    samples: BTreeMap<(AgentRole, Phase), Vec<f64>>,
}

impl DurationHistory {
    pub fn record(&mut self, role: AgentRole, phase: Phase, seconds: f64) {
        self.samples.entry((role, phase)).or_default().push(seconds);
    }

    pub fn mean(&self, role: AgentRole, phase: Phase) -> Option<f64> {
        let v = self.samples.get(&(role, phase))?;
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Mean of past durations for the node's role and phase, else the phase default.
pub fn estimate_duration(
    node: &TaskNode,
    history: &DurationHistory,
    config: &SchedulerConfig,
) -> f64 {
    let fallback = config
        .default_durations
        .get(&node.phase)
        .copied()
        .unwrap_or(1.0);
    if config.adaptive {
        history.mean(node.role, node.phase).unwrap_or(fallback)
    } else {
        fallback
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub message: String,
    pub attempts: u32,
}

/// Result of one execution: attempts used on success.
pub type ExecResult = Result<u32, TaskFailure>;

pub trait Executor: Send + Sync {
    fn execute(&self, node: &TaskNode) -> ExecResult;
}

impl<F> Executor for F
where
    F: Fn(&TaskNode) -> ExecResult + Send + Sync,
{
    fn execute(&self, node: &TaskNode) -> ExecResult {
        self(node)
    }
}

#[derive(Clone, Default)]
pub struct ExecutorRegistry {
    map: HashMap<AgentRole, Arc<dyn Executor>>,
}

impl ExecutorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, role: AgentRole, exec: Arc<dyn Executor>) -> &mut Self {
        self.map.insert(role, exec);
        self
    }

    pub fn get(&self, role: AgentRole) -> Option<Arc<dyn Executor>> {
        self.map.get(&role).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub task_id: String,
    pub phase: Phase,
    pub status: TaskStatus,
    pub attempts: u32,
    pub wall_time_s: f64,
    /// Start offset from the beginning of the run (s).
    pub started_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub nodes: Vec<NodeReport>,
    pub max_concurrency: usize,
    pub makespan_s: f64,
    pub interrupted: bool,
}

impl RunReport {
    pub fn failed(&self) -> impl Iterator<Item = &NodeReport> {
        self.nodes.iter().filter(|n| n.status == TaskStatus::Failed)
    }

    pub fn all_done(&self) -> bool {
        !self.interrupted && self.failed().next().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// Dispatch nothing new; let running tasks finish, then return.
    Stop,
}

/// Observer called on the scheduler thread after each task settles.
pub trait RunHooks {
    fn on_settled(&mut self, _graph: &TaskGraph, _report: &NodeReport) -> Control {
        Control::Continue
    }
}

pub struct NoHooks;

impl RunHooks for NoHooks {}

/// Bookkeeping shared by the threaded runner and the simulator.
struct Dispatch {
    remaining_deps: Vec<usize>,
    dependents: Vec<Vec<usize>>,
    ready: Vec<usize>,
}

impl Dispatch {
    fn new(graph: &TaskGraph) -> Result<Self, SchedulerError> {
        graph.validate()?;
        let index = graph.index();
        let n = graph.len();
        let mut remaining_deps = vec![0; n];
        let mut dependents = vec![Vec::new(); n];
        for (i, node) in graph.nodes.iter().enumerate() {
            for d in &node.dependencies {
                let j = index[d.as_str()];
                dependents[j].push(i);
                if graph.nodes[j].status != TaskStatus::Done {
                    remaining_deps[i] += 1;
                }
            }
        }
        let ready = (0..n)
            .filter(|&i| graph.nodes[i].status != TaskStatus::Done && remaining_deps[i] == 0)
            .collect();
        Ok(Self {
            remaining_deps,
            dependents,
            ready,
        })
    }

    /// Removes and returns the next task to start.
    fn pop(
        &mut self,
        graph: &TaskGraph,
        history: &DurationHistory,
        config: &SchedulerConfig,
    ) -> Option<usize> {
        if self.ready.is_empty() {
            return None;
        }
        let key = |i: usize| {
            let n = &graph.nodes[i];
            (
                estimate_duration(n, history, config),
                n.priority,
                n.task_id.as_str(),
            )
        };
        let mut best = 0;
        for k in 1..self.ready.len() {
            let (a, b) = (key(self.ready[k]), key(self.ready[best]));
            if a.0
                .total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(b.2))
                .is_lt()
            {
                best = k;
            }
        }
        Some(self.ready.swap_remove(best))
    }

    fn complete(&mut self, i: usize) {
        for &k in &self.dependents[i] {
            self.remaining_deps[k] -= 1;
            if self.remaining_deps[k] == 0 {
                self.ready.push(k);
            }
        }
    }

    /// Every transitive dependent of `i` that is not yet done.
    fn downstream(&self, graph: &TaskGraph, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = vec![false; graph.len()];
        let mut stack = self.dependents[i].clone();
        while let Some(k) = stack.pop() {
            if seen[k] || graph.nodes[k].status == TaskStatus::Done {
                continue;
            }
            seen[k] = true;
            out.push(k);
            stack.extend(self.dependents[k].iter().copied());
        }
        out.sort_unstable();
        out
    }
}

/// Executes `graph` in place. Nodes already `Done` are skipped (resume).
pub fn run(
    graph: &mut TaskGraph,
    config: &SchedulerConfig,
    registry: &ExecutorRegistry,
) -> Result<RunReport, SchedulerError> {
    run_with(
        graph,
        config,
        registry,
        &mut DurationHistory::default(),
        &mut NoHooks,
    )
}

pub fn run_with(
    graph: &mut TaskGraph,
    config: &SchedulerConfig,
    registry: &ExecutorRegistry,
    history: &mut DurationHistory,
    hooks: &mut dyn RunHooks,
) -> Result<RunReport, SchedulerError> {
    if config.max_parallel == 0 {
        return Err(SchedulerError::NoBudget);
    }
    for node in &mut graph.nodes {
        if node.status != TaskStatus::Done {
            node.status = TaskStatus::Pending;
            if registry.get(node.role).is_none() {
                return Err(SchedulerError::ExecutorMissing(node.role));
            }
        }
    }
    let mut dispatch = Dispatch::new(graph)?;
    let start = Instant::now();
    let (tx, rx) = mpsc::channel::<(usize, ExecResult, f64, f64)>();
    let mut running = 0usize;
    let mut report = RunReport::default();
    let mut stopping = false;
    let mut settled = vec![false; graph.len()];
    for (i, n) in graph.nodes.iter().enumerate() {
        settled[i] = n.status == TaskStatus::Done;
    }

    loop {
        while !stopping && running < config.max_parallel {
            let Some(i) = dispatch.pop(graph, history, config) else {
                break;
            };
            let node = graph.nodes[i].clone();
            graph.nodes[i].status = TaskStatus::Running;
            let exec = registry.get(node.role).expect("checked above");
            let tx = tx.clone();
            let started = start.elapsed().as_secs_f64();
            running += 1;
            report.max_concurrency = report.max_concurrency.max(running);
            std::thread::spawn(move || {
                let t0 = Instant::now();
                let result =
                    std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| exec.execute(&node)))
                        .unwrap_or_else(|_| {
                            Err(TaskFailure {
                                message: "executor panicked".into(),
                                attempts: 1,
                            })
                        });
                let _ = tx.send((i, result, started, t0.elapsed().as_secs_f64()));
            });
        }
        if running == 0 {
            break;
        }
        let (i, result, started, wall) = match rx.recv_timeout(config.tick) {
            Ok(m) => m,
            Err(mpsc::RecvTimeoutError::Timeout) => continue,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        running -= 1;
        let node = &mut graph.nodes[i];
        history.record(node.role, node.phase, wall);
        let mut settled_now = Vec::new();
        match result {
            Ok(attempts) => {
                node.status = TaskStatus::Done;
                node.attempts = attempts;
                settled_now.push(NodeReport {
                    task_id: node.task_id.clone(),
                    phase: node.phase,
                    status: TaskStatus::Done,
                    attempts,
                    wall_time_s: wall,
                    started_s: started,
                    error: None,
                });
                dispatch.complete(i);
            }
            Err(f) => {
                node.status = TaskStatus::Failed;
                node.attempts = f.attempts;
                let failed_id = node.task_id.clone();
                settled_now.push(NodeReport {
                    task_id: failed_id.clone(),
                    phase: node.phase,
                    status: TaskStatus::Failed,
                    attempts: f.attempts,
                    wall_time_s: wall,
                    started_s: started,
                    error: Some(f.message),
                });
                for k in dispatch.downstream(graph, i) {
                    if settled[k] {
                        continue;
                    }
                    let dep = &mut graph.nodes[k];
                    dep.status = TaskStatus::Failed;
                    settled[k] = true;
                    settled_now.push(NodeReport {
                        task_id: dep.task_id.clone(),
                        phase: dep.phase,
                        status: TaskStatus::Failed,
                        attempts: 0,
                        wall_time_s: 0.0,
                        started_s: started + wall,
                        error: Some(format!("dependency {failed_id} failed")),
                    });
                }
            }
        }
        settled[i] = true;
        for r in settled_now {
            if hooks.on_settled(graph, &r) == Control::Stop {
                stopping = true;
            }
            report.nodes.push(r);
        }
    }
    report.makespan_s = start.elapsed().as_secs_f64();
    report.interrupted = stopping && settled.iter().any(|s| !s);
    Ok(report)
}

/// Timeline produced by [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRun {
    /// (task_id, start, finish) in dispatch order.
    pub timeline: Vec<(String, f64, f64)>,
    pub makespan: f64,
    pub max_concurrency: usize,
}

/// Discrete-event run of the dispatch policy with given task durations.
pub fn simulate(
    graph: &TaskGraph,
    config: &SchedulerConfig,
    duration: &dyn Fn(&TaskNode) -> f64,
) -> Result<SimulatedRun, SchedulerError> {
    if config.max_parallel == 0 {
        return Err(SchedulerError::NoBudget);
    }
    let mut dispatch = Dispatch::new(graph)?;
    let history = DurationHistory::default();
    let mut now = 0.0f64;
    let mut running: Vec<(f64, usize)> = Vec::new();
    let mut timeline = Vec::new();
    let mut max_concurrency = 0;
    loop {
        while running.len() < config.max_parallel {
            let Some(i) = dispatch.pop(graph, &history, config) else {
                break;
            };
            let end = now + duration(&graph.nodes[i]).max(0.0);
            timeline.push((graph.nodes[i].task_id.clone(), now, end));
            running.push((end, i));
            max_concurrency = max_concurrency.max(running.len());
        }
        if running.is_empty() {
            break;
        }
        running.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (end, i) = running.remove(0);
        now = end;
        dispatch.complete(i);
    }
    Ok(SimulatedRun {
        timeline,
        makespan: now,
        max_concurrency,
    })
}
