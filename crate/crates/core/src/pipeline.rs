//! End-to-end orchestration: planning, scheduled agent execution with retry,
//! checkpointing, resume and reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::{self, Band};
use crate::aero::{self, AdapterConfig, DeskSolverConfig};
use crate::knowledge::{KnowledgeError, KnowledgeStore};
use crate::model::{
    validate, AgentRole, DesignMatrix, FlowResult, RequirementSpec, StructConfig, StructResult,
    Validate, Violation,
};
use crate::optimizer::{self, BoConfig, OptimizationResult};
use crate::planner::{
    self, geometry_task_id, select_airfoil, CaseOutcome, Phase, PlannerBackend, PlannerError,
    Selection, TaskGraph, TaskNode, TaskStatus,
};
use crate::recovery::{
    retry_loop, AttemptFailure, CheckpointStore, Clock, ErrorKind, LogRules, Recoverable,
    RecoveryError, RecoveryStrategy, RetryOutcome, RetryPolicy, SolverParams, SystemClock,
    CHECKPOINT_INTERVAL,
};
use crate::scheduler::{
    self, Control, DurationHistory, ExecResult, ExecutorRegistry, NodeReport, RunHooks, RunReport,
    SchedulerConfig, SchedulerError, TaskFailure,
};
use crate::structures::{self, LoadCase, SweepBounds, SweepFailure, SweepTable, WingPanel};
use crate::workspace::{
    init_project, ArtifactRecord, ProjectWorkspace, WorkspaceError, CHECKPOINT_DIR, KNOWLEDGE_DIR,
};

pub const AERO_SUMMARY_PATH: &str = "airfoil/multi_case_analysis/aerodynamic_data.csv";
pub const ACOUSTIC_SUMMARY_PATH: &str = "airfoil/multi_case_analysis/acoustic_data.csv";
pub const RESULT_PATH: &str = "airfoil/result.md";
pub const AERO_PLAN_PATH: &str = "airfoil/aerodynamics_plan.md";
pub const ACOUSTIC_PLAN_PATH: &str = "airfoil/acoustics_plan.md";
pub const SELECTION_PATH: &str = "airfoil/multi_case_analysis/selection.json";
pub const SWEEP_PATH: &str = "structures/structural_sweep.csv";
pub const PARETO_PATH: &str = "optimization/pareto_front.csv";
pub const OPT_REPORT_PATH: &str = "optimization/optimization_report.md";
pub const GP_STRESS_PATH: &str = "optimization/gp_validation_stress.csv";
pub const GP_MASS_PATH: &str = "optimization/gp_validation_mass.csv";
pub const RUN_REPORT_PATH: &str = "run_report.json";

pub const AERO_COLUMNS: [&str; 15] = [
    "case_id",
    "airfoil",
    "chord_m",
    "velocity_ms",
    "aoa_deg",
    "reynolds",
    "cl",
    "cd",
    "cm",
    "lift_to_drag",
    "delta_star_m",
    "theta_m",
    "shape_factor",
    "converged",
    "iterations",
];

pub const ACOUSTIC_COLUMNS: [&str; 8] = [
    "case_id",
    "airfoil",
    "velocity_ms",
    "aoa_deg",
    "oaspl_db",
    "oaspl_dba",
    "noise_term",
    "j",
];

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_EXECUTION: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid requirement: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("workspace has no pipeline state")]
    EmptyWorkspace,
    #[error("{0}")]
    Fixture(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) | PipelineError::Fixture(_) => EXIT_VALIDATION,
            PipelineError::Planner(PlannerError::InvalidSpec(_)) => EXIT_VALIDATION,
            _ => EXIT_EXECUTION,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Desk,
    Adapter(AdapterConfig),
}

/// One injected failure: tasks matching `pattern` fail their first `failures`
/// attempts with a synthetic log of `kind`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    /// Exact task id, or a prefix followed by `*`.
    pub pattern: String,
    pub kind: ErrorKind,
    pub failures: u32,
}

impl Fault {
    /// Parses `pattern=kind[:count]`, e.g. `aero:sim_*=solver_divergence:2`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (pattern, rest) = s
            .rsplit_once('=')
            .ok_or_else(|| format!("fault '{s}': expected pattern=kind[:count]"))?;
        let (kind, count) = match rest.split_once(':') {
            Some((k, c)) => (
                k,
                c.parse::<u32>()
                    .map_err(|_| format!("fault '{s}': bad count"))?,
            ),
            None => (rest, 1),
        };
        let kind: ErrorKind = serde_json::from_value(serde_json::Value::String(kind.to_string()))
            .map_err(|_| format!("fault '{s}': unknown error kind '{kind}'"))?;
        Ok(Self {
            pattern: pattern.to_string(),
            kind,
            failures: count,
        })
    }

    pub fn matches(&self, task_id: &str) -> bool {
        match self.pattern.strip_suffix('*') {
            Some(prefix) => task_id.starts_with(prefix),
            None => task_id == self.pattern,
        }
    }
}

/// Log text a real tool would print for each failure class.
pub fn synthetic_log(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::MeshConversionFailure => {
            "Reading mesh file airfoil.msh\n--> FOAM FATAL ERROR: gmshToFoam error reading airfoil.msh\n    ***Zero or negative cell volume detected.\nFailed 2 mesh checks.\n"
        }
        ErrorKind::SolverDivergence => {
            "Time = 412\nsmoothSolver:  Solving for Ux, Initial residual = 0.91, Final residual = nan, No Iterations 1000\n#0  Foam::error::printStack(Foam::Ostream&)\nFloating point exception (core dumped)\n"
        }
        ErrorKind::BoundaryConditionError => {
            "--> FOAM FATAL IO ERROR:\nCannot find patchField entry for front\nfile: 0/U.boundaryField\n"
        }
        ErrorKind::ResourceExhaustion => "terminate called after throwing an instance of 'std::bad_alloc'\nKilled\n",
        ErrorKind::Unknown => "process exited with status 1\n",
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultPlan {
    pub faults: Vec<Fault>,
}

impl FaultPlan {
    fn failure(&self, task_id: &str, attempt: u32) -> Option<AttemptFailure> {
        let f = self
            .faults
            .iter()
            .find(|f| f.matches(task_id) && attempt <= f.failures)?;
        Some(AttemptFailure::new(
            format!("injected {:?} on attempt {attempt}", f.kind),
            synthetic_log(f.kind),
        ))
    }
}

/// Fixture values for one case, used instead of solver output at selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedCase {
    /// 1-based position in the design matrix.
    pub case: usize,
    pub airfoil: String,
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
    pub oaspl_db: f64,
}

/// Reads a fixture table with columns `case,airfoil,cl,cd,cm,oaspl_db`.
pub fn parse_injected(text: &str) -> Result<Vec<InjectedCase>, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    rdr.deserialize()
        .collect::<Result<Vec<InjectedCase>, _>>()
        .map_err(|e| PipelineError::Fixture(e.to_string()))
}

/// Settings that are not part of the persisted state.
#[derive(Clone)]
pub struct RunOptions {
    pub max_parallel: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub stop_after: Option<Phase>,
    pub faults: FaultPlan,
    pub clock: Arc<dyn Clock>,
    pub policy: RetryPolicy,
    pub bo: BoConfig,
    pub bounds: SweepBounds,
    pub injected: Option<Vec<InjectedCase>>,
    /// Set from a signal handler; the run checkpoints and stops.
    pub interrupt: Arc<AtomicBool>,
    pub force: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_parallel: 4,
            seed: 42,
            solver: SolverKind::Desk,
            stop_after: None,
            faults: FaultPlan::default(),
            clock: Arc::new(SystemClock),
            policy: RetryPolicy::default(),
            bo: BoConfig::default(),
            bounds: SweepBounds::default(),
            injected: None,
            interrupt: Arc::new(AtomicBool::new(false)),
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseAcoustics {
    pub oaspl: f64,
    pub oaspl_dba: f64,
}

/// What recovery did for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrace {
    pub attempts: u32,
    pub success: bool,
    pub diagnoses: Vec<ErrorKind>,
    pub strategies: Vec<RecoveryStrategy>,
    pub waits_s: Vec<f64>,
    pub final_params: Option<SolverParams>,
    pub last_error: Option<String>,
}

/// Everything needed to resume a run; this is what checkpoints hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub spec: RequirementSpec,
    pub seed: u64,
    pub planner: String,
    pub solver: SolverKind,
    pub bounds: SweepBounds,
    pub injected: Option<Vec<InjectedCase>>,
    pub matrix: DesignMatrix,
    pub done: BTreeSet<String>,
    pub flows: BTreeMap<String, FlowResult>,
    pub acoustics: BTreeMap<String, CaseAcoustics>,
    pub selection: Option<Selection>,
    /// Flow and free-stream speed the structural loads are built on.
    pub design_point: Option<(String, FlowResult, f64)>,
    pub structures: BTreeMap<String, StructResult>,
    pub failures: BTreeMap<String, String>,
    pub recoveries: BTreeMap<String, RecoveryTrace>,
    pub optimization: Option<OptimizationResult>,
}

impl PipelineState {
    /// Domain validation applied to restored checkpoints.
    pub fn check(&self) -> Result<(), String> {
        let mut bad: Vec<Violation> = validate(&self.spec);
        bad.extend(self.matrix.violations());
        for f in self.flows.values() {
            bad.extend(f.violations());
        }
        let yield_mpa = self.spec.material.yield_strength * 1e-6;
        for r in self.structures.values() {
            bad.extend(r.check(yield_mpa));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(join_violations(&bad))
        }
    }

    pub fn phase_complete(&self, graph: &TaskGraph, phase: Phase) -> bool {
        graph
            .in_phase(phase)
            .all(|n| self.done.contains(&n.task_id))
    }

    pub fn sweep_table(&self) -> SweepTable {
        let mut table = SweepTable {
            load_cases: structures::LOAD_FACTORS
                .iter()
                .map(|(n, _)| (*n).to_string())
                .collect(),
            ..Default::default()
        };
        for cfg in structures::sweep(&self.bounds) {
            let label = cfg.label();
            if let Some(r) = self.structures.get(&label) {
                table.results.push(r.clone());
            } else if let Some(e) = self.failures.get(&planner::structures_task_id(&label)) {
                let attempts = self
                    .recoveries
                    .get(&planner::structures_task_id(&label))
                    .map_or(1, |t| t.attempts);
                table.failures.push(SweepFailure {
                    config: cfg,
                    error: e.clone(),
                    attempts,
                });
            }
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
    Interrupted,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => EXIT_OK,
            RunStatus::Failed => EXIT_EXECUTION,
            RunStatus::Interrupted => EXIT_INTERRUPTED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub status: RunStatus,
    pub state: PipelineState,
    pub report: RunReport,
    pub checkpoints: usize,
}

struct StructModel {
    panel: WingPanel,
    loads: Vec<LoadCase>,
}

struct Ctx {
    ws: ProjectWorkspace,
    state: Mutex<PipelineState>,
    opts: RunOptions,
    knowledge: KnowledgeStore,
    configs: BTreeMap<String, StructConfig>,
    model: Mutex<Option<Arc<StructModel>>>,
}

impl Ctx {
    fn state(&self) -> MutexGuard<'_, PipelineState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn case(&self, node: &TaskNode) -> Result<crate::model::CaseConfig, TaskFailure> {
        let id = node
            .task_id
            .split_once(':')
            .map(|(_, c)| c)
            .unwrap_or_default();
        self.state()
            .matrix
            .cases
            .iter()
            .find(|c| c.case_id == id)
            .cloned()
            .ok_or_else(|| fail(format!("unknown case in task {}", node.task_id), 0))
    }

    fn note(&self, body: &str, tags: &[&str], role: AgentRole) {
        if let Err(e) = self.knowledge.record_finding(body, tags, role) {
            self.ws
                .log("knowledge", &format!("cannot record finding: {e}"));
        }
    }

    /// Wraps `execute` in the retry loop with fault injection, and records the
    /// recovery trace.
    fn retry<S, E, V>(
        &self,
        node: &TaskNode,
        initial: S,
        mut execute: E,
        validate: V,
    ) -> RetryOutcome<S>
    where
        S: Recoverable,
        E: FnMut(&mut S, u32) -> Result<(), AttemptFailure>,
        V: FnMut(&S) -> Result<(), String>,
    {
        let id = node.task_id.clone();
        let rollback_to = initial.clone();
        let out = retry_loop(
            initial,
            self.opts.policy,
            LogRules::builtin(),
            self.opts.clock.as_ref(),
            || rollback_to.clone(),
            |s, attempt| {
                if let Some(f) = self.opts.faults.failure(&id, attempt) {
                    return Err(f);
                }
                execute(s, attempt)
            },
            validate,
        );
        if out.attempts > 1 || !out.success {
            for (k, d) in out.diagnoses.iter().enumerate() {
                self.ws
                    .log(&id, &format!("attempt {} failed: {:?}", k + 1, d.kind));
            }
            for s in &out.strategies {
                self.ws.log(
                    &id,
                    &format!(
                        "recovery strategy {}",
                        serde_json::to_string(s).unwrap_or_default()
                    ),
                );
            }
            let trace = RecoveryTrace {
                attempts: out.attempts,
                success: out.success,
                diagnoses: out.diagnoses.iter().map(|d| d.kind).collect(),
                strategies: out.strategies.clone(),
                waits_s: out.waits.iter().map(|w| w.as_secs_f64()).collect(),
                final_params: out.state.solver_params().cloned(),
                last_error: out.last_error.clone(),
            };
            self.state().recoveries.insert(id.clone(), trace);
            if out.success {
                let kinds: Vec<String> = out
                    .diagnoses
                    .iter()
                    .map(|d| format!("{:?}", d.kind))
                    .collect();
                self.note(
                    &format!(
                        "Task {id} recovered after {} attempts ({}).",
                        out.attempts,
                        kinds.join(", ")
                    ),
                    &["recovery", node.phase.as_str()],
                    node.role,
                );
            }
        }
        out
    }

    fn struct_model(&self) -> Result<Arc<StructModel>, TaskFailure> {
        let mut slot = self.model.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(m) = slot.as_ref() {
            return Ok(m.clone());
        }
        let (spec, point) = {
            let st = self.state();
            (st.spec.clone(), st.design_point.clone())
        };
        let (airfoil, flow, velocity) = point.ok_or_else(|| fail("no selected airfoil", 0))?;
        let panel = WingPanel::new(&airfoil, &spec).map_err(|e| fail(e.to_string(), 0))?;
        let loads = structures::load_cases(&spec, &flow, velocity);
        let m = Arc::new(StructModel { panel, loads });
        *slot = Some(m.clone());
        Ok(m)
    }

    fn publish(&self, path: &str, role: AgentRole, body: &[u8]) -> Result<(), TaskFailure> {
        self.ws
            .publish(ArtifactRecord::new(path, role), body)
            .map(|_| ())
            .map_err(|e| fail(e.to_string(), 1))
    }
}

fn fail(message: impl Into<String>, attempts: u32) -> TaskFailure {
    TaskFailure {
        message: message.into(),
        attempts,
    }
}

#[derive(Clone)]
struct Plain;

impl Recoverable for Plain {}

/// Attempt state that only carries the produced value.
#[derive(Clone)]
struct Output<T>(Option<T>);

impl<T: Clone> Recoverable for Output<T> {}

#[derive(Clone)]
struct AeroAttempt {
    params: SolverParams,
    flow: Option<FlowResult>,
}

impl Recoverable for AeroAttempt {
    fn solver_params(&self) -> Option<&SolverParams> {
        Some(&self.params)
    }

    fn apply_strategy(&mut self, strategy: &RecoveryStrategy) {
        strategy.apply(&mut self.params);
    }
}

fn geometry_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let case = ctx.case(node)?;
    let out = ctx.retry(
        node,
        Plain,
        |_, _| {
            aero::build_geometry(&ctx.ws, &case)
                .map_err(|e| AttemptFailure::new(e.to_string(), e.logs()))
        },
        |_| Ok(()),
    );
    finish(ctx, node, out.success, out.attempts, out.last_error)
}

/// Failures of per-case and per-configuration tasks are recorded, not fatal:
/// downstream phases continue with what succeeded.
fn finish(
    ctx: &Ctx,
    node: &TaskNode,
    success: bool,
    attempts: u32,
    error: Option<String>,
) -> ExecResult {
    if !success {
        let msg = error.unwrap_or_else(|| "failed".into());
        ctx.ws.log(
            &node.task_id,
            &format!("failed after {attempts} attempts: {msg}"),
        );
        ctx.state().failures.insert(node.task_id.clone(), msg);
    }
    Ok(attempts)
}

fn aero_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let case = ctx.case(node)?;
    if ctx
        .state()
        .failures
        .contains_key(&geometry_task_id(&case.case_id))
    {
        return finish(ctx, node, false, 0, Some("geometry unavailable".into()));
    }
    let (span, solver) = {
        let st = ctx.state();
        (st.spec.span, st.solver.clone())
    };
    let desk = DeskSolverConfig::default();
    let initial = AeroAttempt {
        params: SolverParams::default(),
        flow: None,
    };
    let ws = &ctx.ws;
    let out = ctx.retry(
        node,
        initial,
        |s, _| {
            let err = |e: aero::AeroError| AttemptFailure::new(e.to_string(), e.logs());
            aero::build_case(ws, &case, &s.params, &desk).map_err(err)?;
            match &solver {
                SolverKind::Desk => {
                    aero::run_desk_case(ws, &case, span, &desk).map_err(err)?;
                }
                SolverKind::Adapter(adapter) => {
                    adapter.run(ws, &case, span).map_err(err)?;
                }
            }
            s.flow = Some(aero::extract_results(ws, &case.case_id).map_err(err)?);
            Ok(())
        },
        |s| {
            let flow = s.flow.as_ref().ok_or("no flow result")?;
            ws.read_for(
                AgentRole::Aerodynamics,
                &format!("{}/{}", case.case_id, aero::COEFFICIENT_PATH),
            )
            .map_err(|e| e.to_string())?;
            let bad = flow.violations();
            if bad.is_empty() {
                Ok(())
            } else {
                Err(join_violations(&bad))
            }
        },
    );
    if let Some(flow) = out.state.flow.clone().filter(|_| out.success) {
        ctx.ws.log(
            &node.task_id,
            &format!(
                "Cl {:.4} Cd {:.5} Cm {:.4} L/D {:.2}",
                flow.cl, flow.cd, flow.cm, flow.lift_to_drag
            ),
        );
        ctx.state().flows.insert(case.case_id.clone(), flow);
    }
    finish(ctx, node, out.success, out.attempts, out.last_error)
}

fn acoustics_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let case = ctx.case(node)?;
    if !ctx.state().flows.contains_key(&case.case_id) {
        return finish(
            ctx,
            node,
            false,
            0,
            Some("aerodynamic results unavailable".into()),
        );
    }
    let out = ctx.retry(
        node,
        Output(None),
        |s, _| {
            let r = acoustics::run_case(&ctx.ws, &case.case_id, Band::DEFAULT)
                .map_err(|e| AttemptFailure::new(e.to_string(), e.to_string()))?;
            s.0 = r.into_iter().next();
            Ok(())
        },
        |s| match &s.0 {
            Some(r) => {
                let bad = r.violations();
                if bad.is_empty() {
                    Ok(())
                } else {
                    Err(join_violations(&bad))
                }
            }
            None => Err("no acoustic result".into()),
        },
    );
    if let Some(r) = out.state.0.as_ref().filter(|_| out.success) {
        ctx.ws.log(
            &node.task_id,
            &format!("OASPL {:.2} dB, {:.2} dBA", r.oaspl, r.oaspl_dba),
        );
        ctx.state().acoustics.insert(
            case.case_id.clone(),
            CaseAcoustics {
                oaspl: r.oaspl,
                oaspl_dba: r.oaspl_dba,
            },
        );
    }
    finish(ctx, node, out.success, out.attempts, out.last_error)
}

/// Selection inputs: solver results, or the injected fixture when present.
pub fn case_outcomes(state: &PipelineState) -> Result<Vec<CaseOutcome>, PipelineError> {
    match &state.injected {
        None => Ok(state
            .matrix
            .cases
            .iter()
            .map(|c| CaseOutcome {
                case_id: c.case_id.clone(),
                airfoil: c.airfoil.clone(),
                flow: state.flows.get(&c.case_id).cloned(),
                oaspl: state.acoustics.get(&c.case_id).map(|a| a.oaspl),
            })
            .collect()),
        Some(rows) => rows
            .iter()
            .map(|r| {
                let c = r
                    .case
                    .checked_sub(1)
                    .and_then(|i| state.matrix.cases.get(i))
                    .ok_or_else(|| {
                        PipelineError::Fixture(format!("fixture case {} not in matrix", r.case))
                    })?;
                if c.airfoil != r.airfoil {
                    return Err(PipelineError::Fixture(format!(
                        "fixture case {} is {} but the matrix has {}",
                        r.case, r.airfoil, c.airfoil
                    )));
                }
                let bl = state.flows.get(&c.case_id);
                let flow = FlowResult::from_coefficients(
                    r.cl,
                    r.cd,
                    r.cm,
                    bl.map_or(1e-3, |f| f.delta_star),
                    bl.map_or(7e-4, |f| f.theta),
                    true,
                    bl.map_or(3000, |f| f.iterations),
                );
                Ok(CaseOutcome {
                    case_id: c.case_id.clone(),
                    airfoil: c.airfoil.clone(),
                    flow: Some(flow),
                    oaspl: Some(r.oaspl_db),
                })
            })
            .collect(),
    }
}

fn selection_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let state = ctx.state().clone();
    let outcomes = case_outcomes(&state).map_err(|e| fail(e.to_string(), 1))?;
    let sel = select_airfoil(&outcomes, state.spec.aero_weight, state.spec.noise_weight)
        .map_err(|e| fail(e.to_string(), 1))?;
    let w = &sel.winner;
    let flow = outcomes
        .iter()
        .find(|o| o.case_id == w.case_id)
        .and_then(|o| o.flow.clone())
        .ok_or_else(|| fail("winner has no flow", 1))?;
    let velocity = state
        .matrix
        .cases
        .iter()
        .find(|c| c.case_id == w.case_id)
        .map_or(state.spec.velocities[0], |c| c.velocity);
    ctx.ws.log(
        &node.task_id,
        &format!("winner {} ({}) J={:.4}", w.airfoil, w.case_id, w.j),
    );
    let mut json = serde_json::to_vec_pretty(&sel).map_err(|e| fail(e.to_string(), 1))?;
    json.push(b'\n');
    ctx.publish(SELECTION_PATH, AgentRole::Chief, &json)?;
    let snapshot = {
        let mut st = ctx.state();
        st.selection = Some(sel.clone());
        st.design_point = Some((w.airfoil.clone(), flow, velocity));
        st.clone()
    };
    write_summaries(&ctx.ws, &snapshot).map_err(|e| fail(e.to_string(), 1))?;
    ctx.note(
        &format!(
            "Selected {} from case {} with J = {:.4} (L/D {:.2}, OASPL {:.2} dB).",
            w.airfoil, w.case_id, w.j, w.lift_to_drag, w.oaspl
        ),
        &["selection", &w.airfoil.to_lowercase()],
        AgentRole::Chief,
    );
    Ok(1)
}

fn structures_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let label = node.task_id.strip_prefix("structures:").unwrap_or_default();
    let cfg = *ctx
        .configs
        .get(label)
        .ok_or_else(|| fail(format!("unknown configuration {label}"), 0))?;
    let model = ctx.struct_model()?;
    let yield_mpa = model.panel.material.yield_strength * 1e-6;
    let out = ctx.retry(
        node,
        Output(None),
        |s, _| {
            let r = model
                .panel
                .evaluate(&cfg, &model.loads)
                .map_err(|e| AttemptFailure::new(e.to_string(), e.to_string()))?;
            s.0 = Some(r);
            Ok(())
        },
        |s| {
            let r = s.0.as_ref().ok_or("no result")?;
            let bad = r.check(yield_mpa);
            if bad.is_empty() {
                Ok(())
            } else {
                Err(join_violations(&bad))
            }
        },
    );
    match out.state.0.clone().filter(|_| out.success) {
        Some(r) => {
            ctx.state().structures.insert(label.to_string(), r);
        }
        None => ctx.note(
            &format!(
                "Structural configuration {label} failed after {} attempts: {}",
                out.attempts,
                out.last_error.clone().unwrap_or_default()
            ),
            &["known-failure", "structures"],
            AgentRole::Structures,
        ),
    }
    finish(ctx, node, out.success, out.attempts, out.last_error)
}

fn optimization_exec(ctx: &Ctx, node: &TaskNode) -> ExecResult {
    let state = ctx.state().clone();
    let table = state.sweep_table();
    ctx.publish(
        SWEEP_PATH,
        AgentRole::Structures,
        structures::sweep_csv(&table).as_bytes(),
    )?;
    let model = ctx.struct_model()?;
    let bo = BoConfig {
        seed: state.seed,
        ..ctx.opts.bo
    };
    let result = optimizer::optimize(&table, &state.bounds, &bo, |c| {
        model
            .panel
            .evaluate(c, &model.loads)
            .ok()
            .map(|r| (r.max_stress(), r.mass))
    })
    .map_err(|e| fail(e.to_string(), 1))?;
    let o = AgentRole::Optimizer;
    ctx.publish(PARETO_PATH, o, optimizer::pareto_csv(&result).as_bytes())?;
    ctx.publish(
        OPT_REPORT_PATH,
        o,
        optimizer::optimization_report(&result).as_bytes(),
    )?;
    ctx.publish(
        GP_STRESS_PATH,
        o,
        optimizer::validation_csv(&result.stress_report).as_bytes(),
    )?;
    ctx.publish(
        GP_MASS_PATH,
        o,
        optimizer::validation_csv(&result.mass_report).as_bytes(),
    )?;
    ctx.ws.log(
        &node.task_id,
        &format!(
            "best {:.3} MPa at {:.2} g, improvement {:.2}%, Pareto {}",
            result.best.stress,
            result.best.mass,
            100.0 * result.improvement,
            result.pareto.len()
        ),
    );
    ctx.note(
        &format!(
            "Optimum {} at {:.3} MPa and {:.2} g; {:.2}% below the best sweep design under a {:.2} g cap.",
            result.best.config.label(),
            result.best.stress,
            result.best.mass,
            100.0 * result.improvement,
            result.mass_cap
        ),
        &["optimization", "structures"],
        AgentRole::Optimizer,
    );
    ctx.state().optimization = Some(result);
    Ok(1)
}

struct Hooks<'a> {
    ctx: &'a Ctx,
    store: CheckpointStore,
    since: u64,
    saved: usize,
    stop_after: Option<Phase>,
    error: Option<RecoveryError>,
}

impl Hooks<'_> {
    fn checkpoint(&mut self, graph: &TaskGraph, phase: &str) {
        let state = self.ctx.state().clone();
        let progress = 100.0 * state.done.len() as f64 / graph.len().max(1) as f64;
        match self.store.save(phase, progress, &state) {
            Ok(meta) => {
                self.saved += 1;
                self.since = 0;
                self.ctx.ws.log(
                    "checkpoint",
                    &format!(
                        "{} phase {phase} progress {progress:.1}%",
                        meta.checkpoint_id
                    ),
                );
            }
            Err(e) => {
                self.ctx.ws.log("checkpoint", &format!("save failed: {e}"));
                self.error.get_or_insert(e);
            }
        }
    }
}

impl RunHooks for Hooks<'_> {
    fn on_settled(&mut self, graph: &TaskGraph, report: &NodeReport) -> Control {
        if report.status == TaskStatus::Done {
            self.ctx.state().done.insert(report.task_id.clone());
        } else if let Some(e) = &report.error {
            self.ctx
                .state()
                .failures
                .insert(report.task_id.clone(), e.clone());
        }
        self.since += 1;
        let complete = self.ctx.state().phase_complete(graph, report.phase);
        if complete || self.since >= CHECKPOINT_INTERVAL {
            self.checkpoint(graph, report.phase.as_str());
        }
        if self.ctx.opts.interrupt.load(Ordering::SeqCst) {
            if !complete {
                self.checkpoint(graph, report.phase.as_str());
            }
            self.ctx.ws.log(
                "orchestrator",
                "interrupt received, stopping after running tasks",
            );
            return Control::Stop;
        }
        if complete && self.stop_after == Some(report.phase) {
            self.ctx.ws.log(
                "orchestrator",
                &format!("stopping after phase {}", report.phase.as_str()),
            );
            return Control::Stop;
        }
        Control::Continue
    }
}

fn registry(ctx: &Arc<Ctx>) -> ExecutorRegistry {
    let mut reg = ExecutorRegistry::new();
    type Exec = fn(&Ctx, &TaskNode) -> ExecResult;
    let roles: [(AgentRole, Exec); 6] = [
        (AgentRole::Geometry, geometry_exec),
        (AgentRole::Aerodynamics, aero_exec),
        (AgentRole::Acoustics, acoustics_exec),
        (AgentRole::Chief, selection_exec),
        (AgentRole::Structures, structures_exec),
        (AgentRole::Optimizer, optimization_exec),
    ];
    for (role, f) in roles {
        let c = ctx.clone();
        reg.register(role, Arc::new(move |n: &TaskNode| f(&c, n)));
    }
    reg
}

fn graph_for(state: &PipelineState) -> TaskGraph {
    let mut g = planner::build_task_graph_with(&state.matrix, &state.bounds);
    for n in &mut g.nodes {
        if state.done.contains(&n.task_id) {
            n.status = TaskStatus::Done;
        }
    }
    g
}

fn execute(
    ws: ProjectWorkspace,
    state: PipelineState,
    opts: RunOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let knowledge = KnowledgeStore::open(&ws.root().join(KNOWLEDGE_DIR))?;
    let store = CheckpointStore::open(&ws.root().join(CHECKPOINT_DIR))?;
    let mut graph = graph_for(&state);
    let configs = structures::sweep(&state.bounds)
        .into_iter()
        .map(|c| (c.label(), c))
        .collect();
    let stop_after = opts.stop_after;
    let config = SchedulerConfig {
        max_parallel: opts.max_parallel.max(1),
        ..Default::default()
    };
    let ctx = Arc::new(Ctx {
        ws: ws.clone(),
        state: Mutex::new(state),
        opts,
        knowledge,
        configs,
        model: Mutex::new(None),
    });
    let reg = registry(&ctx);
    let mut hooks = Hooks {
        ctx: &ctx,
        store,
        since: 0,
        saved: 0,
        stop_after,
        error: None,
    };
    // A stop that lands on an already-finished phase takes effect immediately.
    let already = stop_after.is_some_and(|p| ctx.state().phase_complete(&graph, p));
    let report = if already {
        RunReport {
            interrupted: graph.nodes.iter().any(|n| n.status != TaskStatus::Done),
            ..Default::default()
        }
    } else {
        scheduler::run_with(
            &mut graph,
            &config,
            &reg,
            &mut DurationHistory::default(),
            &mut hooks,
        )?
    };
    let complete = graph.nodes.iter().all(|n| n.status == TaskStatus::Done);
    if complete {
        hooks.checkpoint(&graph, "complete");
    }
    if let Some(e) = hooks.error.take() {
        return Err(e.into());
    }
    let saved = hooks.saved;
    drop(hooks);
    drop(reg);
    let state = ctx.state().clone();
    // Exhausted retries outrank an interruption: the exit code reports them.
    let status = if !state.failures.is_empty() || report.failed().next().is_some() {
        RunStatus::Failed
    } else if report.interrupted || !complete {
        RunStatus::Interrupted
    } else {
        RunStatus::Completed
    };
    write_summaries(&ws, &state)?;
    ws.publish(
        ArtifactRecord::new(RESULT_PATH, AgentRole::Chief),
        result_markdown(&state, &graph).as_bytes(),
    )?;
    let run_doc = serde_json::json!({
        "status": status,
        "planner": state.planner,
        "seed": state.seed,
        "tasks": graph.len(),
        "done": state.done.len(),
        "failures": state.failures,
        "recoveries": state.recoveries,
        "checkpoints_written": saved,
        "scheduler": report,
    });
    let mut bytes = serde_json::to_vec_pretty(&run_doc).map_err(WorkspaceError::from)?;
    bytes.push(b'\n');
    ws.publish(
        ArtifactRecord::new(RUN_REPORT_PATH, AgentRole::Orchestrator),
        &bytes,
    )?;
    ws.log("orchestrator", &format!("run finished: {status:?}"));
    Ok(PipelineOutcome {
        status,
        state,
        report,
        checkpoints: saved,
    })
}

/// Plans and executes a fresh project at `root`.
pub fn run(
    spec: &RequirementSpec,
    root: &Path,
    backend: &dyn PlannerBackend,
    opts: RunOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let bad = validate(spec);
    if !bad.is_empty() {
        return Err(PipelineError::Validation(bad));
    }
    let matrix = backend.generate_matrix(spec, opts.seed)?;
    let bad = matrix.violations();
    if !bad.is_empty() {
        return Err(PipelineError::Validation(bad));
    }
    let ws = init_project(spec, root, opts.force)?;
    ws.log(
        "chief",
        &format!("{} planner produced {} cases", backend.kind(), matrix.len()),
    );
    let c = AgentRole::Chief;
    ws.publish(
        ArtifactRecord::new(AERO_PLAN_PATH, c),
        planner::aerodynamics_plan(&matrix, spec).as_bytes(),
    )?;
    ws.publish(
        ArtifactRecord::new(ACOUSTIC_PLAN_PATH, c),
        planner::acoustics_plan(&matrix, spec).as_bytes(),
    )?;
    let state = PipelineState {
        spec: spec.clone(),
        seed: opts.seed,
        planner: backend.kind().to_string(),
        solver: opts.solver.clone(),
        bounds: opts.bounds.clone(),
        injected: opts.injected.clone(),
        matrix,
        done: BTreeSet::new(),
        flows: BTreeMap::new(),
        acoustics: BTreeMap::new(),
        selection: None,
        design_point: None,
        structures: BTreeMap::new(),
        failures: BTreeMap::new(),
        recoveries: BTreeMap::new(),
        optimization: None,
    };
    // Validates the fixture against the matrix before any work starts.
    if state.injected.is_some() {
        case_outcomes(&state)?;
    }
    let mut store = CheckpointStore::open(&root.join(CHECKPOINT_DIR))?;
    store.save("planning", 0.0, &state)?;
    execute(ws, state, opts)
}

/// Newest checkpointed state of the project at `root` that passes validation.
pub fn load_state(root: &Path) -> Result<PipelineState, PipelineError> {
    let store = CheckpointStore::open(&root.join(CHECKPOINT_DIR))?;
    let (_, state) = store.latest_valid(|s: &PipelineState| s.check())?;
    Ok(state)
}

/// Continues a project from its newest valid checkpoint; finished tasks are
/// not re-executed. Solver, seed and fixtures come from the checkpoint.
pub fn resume(root: &Path, opts: RunOptions) -> Result<PipelineOutcome, PipelineError> {
    let ws = ProjectWorkspace::open(root)?;
    let mut state = load_state(root)?;
    // Failed tasks get another chance.
    let failed: Vec<String> = state.failures.keys().cloned().collect();
    for id in failed {
        state.done.remove(&id);
    }
    state.failures.clear();
    ws.log(
        "orchestrator",
        &format!("resuming with {} completed tasks", state.done.len()),
    );
    execute(ws, state, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// Rewrites the summaries and result document from the newest checkpoint and
/// returns them in the requested format.
pub fn report(root: &Path, format: ReportFormat) -> Result<String, PipelineError> {
    let ws = ProjectWorkspace::open(root)?;
    let state = match load_state(root) {
        Ok(s) => s,
        Err(PipelineError::Recovery(RecoveryError::NoValidCheckpoint)) => {
            return Err(PipelineError::EmptyWorkspace)
        }
        Err(e) => return Err(e),
    };
    let graph = graph_for(&state);
    write_summaries(&ws, &state)?;
    let md = result_markdown(&state, &graph);
    ws.publish(
        ArtifactRecord::new(RESULT_PATH, AgentRole::Chief),
        md.as_bytes(),
    )?;
    Ok(match format {
        ReportFormat::Markdown => md,
        ReportFormat::Csv => format!("{}\n{}", aero_summary(&state), acoustic_summary(&state)),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn aero_summary(state: &PipelineState) -> String {
    let mut s = AERO_COLUMNS.join(",");
    s.push('\n');
    for c in &state.matrix.cases {
        let f = state.flows.get(&c.case_id);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.case_id,
            c.airfoil,
            c.chord,
            c.velocity,
            c.aoa,
            c.reynolds,
            opt(f.map(|f| f.cl)),
            opt(f.map(|f| f.cd)),
            opt(f.map(|f| f.cm)),
            opt(f.map(|f| f.lift_to_drag)),
            opt(f.map(|f| f.delta_star)),
            opt(f.map(|f| f.theta)),
            opt(f.map(|f| f.shape_factor)),
            opt(f.map(|f| f.converged)),
            opt(f.map(|f| f.iterations)),
        );
    }
    s
}

pub fn acoustic_summary(state: &PipelineState) -> String {
    let mut s = ACOUSTIC_COLUMNS.join(",");
    s.push('\n');
    for c in &state.matrix.cases {
        let a = state.acoustics.get(&c.case_id);
        let score = state
            .selection
            .as_ref()
            .and_then(|sel| sel.ranking.iter().find(|r| r.case_id == c.case_id));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.case_id,
            c.airfoil,
            c.velocity,
            c.aoa,
            opt(a.map(|a| a.oaspl)),
            opt(a.map(|a| a.oaspl_dba)),
            opt(score.map(|r| r.noise_term)),
            opt(score.map(|r| r.j)),
        );
    }
    s
}

fn write_summaries(ws: &ProjectWorkspace, state: &PipelineState) -> Result<(), WorkspaceError> {
    let c = AgentRole::Chief;
    ws.publish(
        ArtifactRecord::new(AERO_SUMMARY_PATH, c),
        aero_summary(state).as_bytes(),
    )?;
    ws.publish(
        ArtifactRecord::new(ACOUSTIC_SUMMARY_PATH, c),
        acoustic_summary(state).as_bytes(),
    )?;
    Ok(())
}

/// Human-readable project summary; phases without results are marked missing.
pub fn result_markdown(state: &PipelineState, graph: &TaskGraph) -> String {
    let mut s = String::from("# Design result\n\n");
    let _ = writeln!(s, "Objective: {}\n", state.spec.objective_text);
    s.push_str("## Phases\n\n| phase | tasks | done | status |\n|---|---|---|---|\n");
    for phase in Phase::ALL {
        let total = graph.in_phase(phase).count();
        let done = graph
            .in_phase(phase)
            .filter(|n| state.done.contains(&n.task_id))
            .count();
        let status = if done == total {
            "complete"
        } else if done == 0 {
            "MISSING"
        } else {
            "PARTIAL"
        };
        let _ = writeln!(s, "| {} | {total} | {done} | {status} |", phase.as_str());
    }
    if !state.failures.is_empty() {
        s.push_str("\n### Failed tasks\n\n");
        for (id, e) in &state.failures {
            let _ = writeln!(s, "- {id}: {e}");
        }
    }

    s.push_str("\n## Airfoil selection\n\n");
    match &state.selection {
        None => s.push_str("_Missing: selection has not run._\n"),
        Some(sel) => {
            let _ = writeln!(
                s,
                "Weights: aerodynamic {}, noise {}.{}\n",
                state.spec.aero_weight,
                state.spec.noise_weight,
                if state.injected.is_some() {
                    " Inputs: injected fixture values."
                } else {
                    ""
                }
            );
            s.push_str("| rank | case | airfoil | L/D | OASPL (dB) | aero term | noise term | J |\n|---|---|---|---|---|---|---|---|\n");
            for (i, r) in sel.ranking.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {:.2} | {:.2} | {:.4} | {:.4} | {:.4} |",
                    i + 1,
                    r.case_id,
                    r.airfoil,
                    r.lift_to_drag,
                    r.oaspl,
                    r.aero_term,
                    r.noise_term,
                    r.j
                );
            }
            let _ = writeln!(
                s,
                "\nWinner: **{}** (case {}, J = {:.4}).",
                sel.winner.airfoil, sel.winner.case_id, sel.winner.j
            );
        }
    }

    s.push_str("\n## Structural sweep\n\n");
    let table = state.sweep_table();
    let expected = structures::sweep(&state.bounds).len();
    if table.results.is_empty() {
        s.push_str("_Missing: no structural results._\n");
    } else {
        let (mut m_lo, mut m_hi, mut s_lo, mut s_hi) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for r in &table.results {
            m_lo = m_lo.min(r.mass);
            m_hi = m_hi.max(r.mass);
            s_lo = s_lo.min(r.max_stress());
            s_hi = s_hi.max(r.max_stress());
        }
        let _ = writeln!(
            s,
            "- configurations evaluated: {} of {expected} ({} failed)\n- mass: {m_lo:.2} to {m_hi:.2} g\n- peak stress: {s_lo:.3} to {s_hi:.3} MPa",
            table.results.len(),
            table.failures.len()
        );
        if let Some(b) = table.best_by_stress() {
            let _ = writeln!(
                s,
                "- lowest stress: {} ({:.3} MPa, {:.2} g, SF {:.1})",
                b.config.label(),
                b.max_stress(),
                b.mass,
                b.safety_factor
            );
        }
    }

    s.push_str("\n## Optimization\n\n");
    match &state.optimization {
        None => s.push_str("_Missing: optimization has not run._\n"),
        Some(o) => {
            let _ = writeln!(
                s,
                "- mass cap: {:.2} g\n- best discrete: {} ({:.3} MPa, {:.2} g)\n- optimum: {} ({:.3} MPa, {:.2} g, {})\n- stress improvement: {:.2}%\n- Pareto set: {} designs\n- surrogate R²: stress {:.4}, mass {:.4}",
                o.mass_cap,
                o.best_discrete.config.label(),
                o.best_discrete.stress,
                o.best_discrete.mass,
                o.best.config.label(),
                o.best.stress,
                o.best.mass,
                o.best.source.as_str(),
                100.0 * o.improvement,
                o.pareto.len(),
                o.stress_report.r2,
                o.mass_report.r2
            );
        }
    }

    if !state.recoveries.is_empty() {
        s.push_str(
            "\n## Recovery\n\n| task | attempts | diagnoses | recovered |\n|---|---|---|---|\n",
        );
        for (id, t) in &state.recoveries {
            let kinds: Vec<String> = t.diagnoses.iter().map(|k| format!("{k:?}")).collect();
            let _ = writeln!(
                s,
                "| {id} | {} | {} | {} |",
                t.attempts,
                kinds.join(", "),
                t.success
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_parsing() {
        let f = Fault::parse("aero:sim_*=solver_divergence:2").unwrap();
        assert_eq!(f.kind, ErrorKind::SolverDivergence);
        assert_eq!(f.failures, 2);
        assert!(f.matches("aero:sim_NACA0012_25ms_aoa0"));
        assert!(!f.matches("acoustics:sim_NACA0012_25ms_aoa0"));
        assert_eq!(Fault::parse("selection=unknown").unwrap().failures, 1);
        assert!(Fault::parse("x=bogus").is_err());
        assert!(Fault::parse("nothing").is_err());
    }

    #[test]
    fn synthetic_logs_classify_as_labelled() {
        for kind in [
            ErrorKind::MeshConversionFailure,
            ErrorKind::SolverDivergence,
            ErrorKind::BoundaryConditionError,
            ErrorKind::ResourceExhaustion,
            ErrorKind::Unknown,
        ] {
            assert_eq!(crate::recovery::classify(synthetic_log(kind)).kind, kind);
        }
    }

    #[test]
    fn injected_table_parses() {
        let rows = parse_injected(
            "case,airfoil,cl,cd,cm,oaspl_db\n# note\n1, NACA0012, 0, 0.014, 0, 135.8\n",
        )
        .unwrap();
        assert_eq!(rows[0].airfoil, "NACA0012");
        assert!(parse_injected("case,airfoil\n1,x\n").is_err());
    }
}
