//! The chief engineer: experiment matrix, task graph and airfoil selection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::Read;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentRole, CaseConfig, DesignMatrix, FlowResult, RequirementSpec, Validate};
use crate::structures::{sweep, SweepBounds};

/// Largest accepted remote-planner response body.
pub const MAX_RESPONSE_BYTES: u64 = 1 << 20;
pub const ENV_PLANNER_URL: &str = "AEROFORGE_PLANNER_URL";
pub const ENV_PLANNER_TOKEN: &str = "AEROFORGE_PLANNER_TOKEN";

/// AoA grid indices cycled over the cases, airfoil-major.
const AOA_SCHEDULE: [usize; 12] = [0, 3, 6, 2, 4, 1, 1, 5, 2, 5, 0, 4];

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("requirement spec is invalid: {0}")]
    InvalidSpec(String),
    #[error("no airfoil candidates")]
    NoCandidates,
    #[error("no velocities")]
    NoVelocities,
    #[error("no case has a converged result to select from")]
    AllCasesFailed,
    #[error("task graph has a cycle through {0}")]
    Cycle(String),
    #[error("task {task} depends on unknown task {dependency}")]
    UnknownDependency { task: String, dependency: String },
    #[error("duplicate task id {0}")]
    DuplicateTask(String),
    #[error("remote planner: {0}")]
    Remote(String),
    #[error("remote planner response rejected: {0}")]
    Schema(String),
}

/// Where planning decisions come from.
pub trait PlannerBackend: Send + Sync {
    fn kind(&self) -> &'static str;
    fn generate_matrix(
        &self,
        spec: &RequirementSpec,
        seed: u64,
    ) -> Result<DesignMatrix, PlannerError>;
}

/// Deterministic planner: every airfoil at every velocity, AoA from a fixed cycle.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScriptedPlanner;

impl PlannerBackend for ScriptedPlanner {
    fn kind(&self) -> &'static str {
        "scripted"
    }

    fn generate_matrix(
        &self,
        spec: &RequirementSpec,
        _seed: u64,
    ) -> Result<DesignMatrix, PlannerError> {
        generate_matrix(spec)
    }
}

/// Integer-degree AoA values inside the spec range (at least the range minimum).
pub fn aoa_grid(spec: &RequirementSpec) -> Vec<f64> {
    let lo = spec.aoa_range.min.ceil() as i64;
    let hi = spec.aoa_range.max.floor() as i64;
    if hi < lo {
        return vec![spec.aoa_range.min];
    }
    (lo..=hi).map(|a| a as f64).collect()
}

/// The scripted experiment matrix: |airfoils| × |velocities| cases.
pub fn generate_matrix(spec: &RequirementSpec) -> Result<DesignMatrix, PlannerError> {
    if spec.airfoil_candidates.is_empty() {
        return Err(PlannerError::NoCandidates);
    }
    if spec.velocities.is_empty() {
        return Err(PlannerError::NoVelocities);
    }
    let violations = spec.violations();
    if !violations.is_empty() {
        let joined = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(PlannerError::InvalidSpec(joined));
    }
    let grid = aoa_grid(spec);
    let mut cases = Vec::with_capacity(spec.airfoil_candidates.len() * spec.velocities.len());
    for airfoil in &spec.airfoil_candidates {
        for &u in &spec.velocities {
            let k = cases.len();
            let aoa = grid[AOA_SCHEDULE[k % AOA_SCHEDULE.len()] % grid.len()];
            cases.push(CaseConfig::new(
                airfoil,
                spec.chord,
                u,
                aoa,
                spec.kinematic_viscosity,
            ));
        }
    }
    Ok(DesignMatrix { cases })
}

#[derive(Debug, Serialize)]
struct RemoteRequest<'a> {
    spec: &'a RequirementSpec,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RemoteResponse {
    cases: Vec<RemoteCase>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RemoteCase {
    airfoil: String,
    velocity: f64,
    aoa: f64,
}

/// Planner that delegates matrix design to an HTTP service.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl RemotePlanner {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            timeout: Duration::from_secs(30),
        }
    }

    /// Reads endpoint and token from the environment.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_PLANNER_URL)
            .ok()
            .filter(|u| !u.is_empty())?;
        let mut p = Self::new(url);
        p.token = std::env::var(ENV_PLANNER_TOKEN)
            .ok()
            .filter(|t| !t.is_empty());
        Some(p)
    }
}

impl PlannerBackend for RemotePlanner {
    fn kind(&self) -> &'static str {
        "remote"
    }

    fn generate_matrix(
        &self,
        spec: &RequirementSpec,
        seed: u64,
    ) -> Result<DesignMatrix, PlannerError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent
            .post(&self.url)
            .set("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::to_string(&RemoteRequest { spec, seed })
            .map_err(|e| PlannerError::Remote(e.to_string()))?;
        let resp = req
            .send_string(&body)
            .map_err(|e| PlannerError::Remote(e.to_string()))?;
        let mut buf = Vec::new();
        resp.into_reader()
            .take(MAX_RESPONSE_BYTES + 1)
            .read_to_end(&mut buf)
            .map_err(|e| PlannerError::Remote(e.to_string()))?;
        if buf.len() as u64 > MAX_RESPONSE_BYTES {
            return Err(PlannerError::Schema(format!(
                "response exceeds {MAX_RESPONSE_BYTES} bytes"
            )));
        }
        parse_remote_matrix(&buf, spec)
    }
}

/// Validates a remote planner document against the spec; all or nothing.
pub fn parse_remote_matrix(
    body: &[u8],
    spec: &RequirementSpec,
) -> Result<DesignMatrix, PlannerError> {
    let doc: RemoteResponse =
        serde_json::from_slice(body).map_err(|e| PlannerError::Schema(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut cases = Vec::with_capacity(doc.cases.len());
    for c in doc.cases {
        if !spec.airfoil_candidates.contains(&c.airfoil) {
            return Err(PlannerError::Schema(format!(
                "unknown airfoil {}",
                c.airfoil
            )));
        }
        let Some(&u) = spec
            .velocities
            .iter()
            .find(|v| (**v - c.velocity).abs() < 1e-9)
        else {
            return Err(PlannerError::Schema(format!(
                "velocity {} not in spec",
                c.velocity
            )));
        };
        if !(c.aoa >= spec.aoa_range.min && c.aoa <= spec.aoa_range.max) {
            return Err(PlannerError::Schema(format!("aoa {} outside range", c.aoa)));
        }
        if !seen.insert((c.airfoil.clone(), u.to_bits())) {
            return Err(PlannerError::Schema(format!(
                "{} at {u} m/s listed twice",
                c.airfoil
            )));
        }
        cases.push(CaseConfig::new(
            &c.airfoil,
            spec.chord,
            u,
            c.aoa,
            spec.kinematic_viscosity,
        ));
    }
    let expected = spec.airfoil_candidates.len() * spec.velocities.len();
    if cases.len() != expected {
        return Err(PlannerError::Schema(format!(
            "expected {expected} cases, got {}",
            cases.len()
        )));
    }
    Ok(DesignMatrix { cases })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Geometry,
    Aero,
    Acoustics,
    Selection,
    Structures,
    Optimization,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Geometry,
        Phase::Aero,
        Phase::Acoustics,
        Phase::Selection,
        Phase::Structures,
        Phase::Optimization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Geometry => "geometry",
            Phase::Aero => "aero",
            Phase::Acoustics => "acoustics",
            Phase::Selection => "selection",
            Phase::Structures => "structures",
            Phase::Optimization => "optimization",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode {
    pub task_id: String,
    pub role: AgentRole,
    pub phase: Phase,
    /// Workspace paths (or keys) the task works on.
    pub payload: Vec<String>,
    pub dependencies: Vec<String>,
    pub status: TaskStatus,
    /// Lower runs first among equal duration estimates.
    pub priority: u32,
    pub attempts: u32,
}

impl TaskNode {
    pub fn new(task_id: impl Into<String>, role: AgentRole, phase: Phase) -> Self {
        Self {
            task_id: task_id.into(),
            role,
            phase,
            payload: Vec::new(),
            dependencies: Vec::new(),
            status: TaskStatus::Pending,
            priority: 0,
            attempts: 0,
        }
    }

    pub fn with_payload(mut self, p: impl Into<String>) -> Self {
        self.payload.push(p.into());
        self
    }

    pub fn depends_on(mut self, ids: impl IntoIterator<Item = String>) -> Self {
        self.dependencies.extend(ids);
        self
    }
}

/// Dependency DAG of agent tasks, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub nodes: Vec<TaskNode>,
}

impl TaskGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn push(&mut self, node: TaskNode) {
        self.nodes.push(node);
    }

    pub fn get(&self, id: &str) -> Option<&TaskNode> {
        self.nodes.iter().find(|n| n.task_id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut TaskNode> {
        self.nodes.iter_mut().find(|n| n.task_id == id)
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.task_id.as_str(), i))
            .collect()
    }

    pub fn in_phase(&self, phase: Phase) -> impl Iterator<Item = &TaskNode> {
        self.nodes.iter().filter(move |n| n.phase == phase)
    }

    /// Kahn topological order (ties in insertion order), or the first
    /// structural problem found.
    pub fn topological_order(&self) -> Result<Vec<usize>, PlannerError> {
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.task_id.as_str(), i).is_some() {
                return Err(PlannerError::DuplicateTask(n.task_id.clone()));
            }
        }
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut dependents = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for d in &n.dependencies {
                let Some(&j) = index.get(d.as_str()) else {
                    return Err(PlannerError::UnknownDependency {
                        task: n.task_id.clone(),
                        dependency: d.clone(),
                    });
                };
                indegree[i] += 1;
                dependents[j].push(i);
            }
        }
        let mut queue: VecDeque<usize> = (0..self.nodes.len())
            .filter(|&i| indegree[i] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &k in &dependents[i] {
                indegree[k] -= 1;
                if indegree[k] == 0 {
                    queue.push_back(k);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = (0..self.nodes.len())
                .find(|&i| indegree[i] > 0)
                .map(|i| self.nodes[i].task_id.clone())
                .unwrap_or_default();
            return Err(PlannerError::Cycle(stuck));
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.topological_order().map(|_| ())
    }
}

pub fn geometry_task_id(case_id: &str) -> String {
    format!("geometry:{case_id}")
}

pub fn aero_task_id(case_id: &str) -> String {
    format!("aero:{case_id}")
}

pub fn acoustics_task_id(case_id: &str) -> String {
    format!("acoustics:{case_id}")
}

pub const SELECTION_TASK: &str = "selection";
pub const OPTIMIZATION_TASK: &str = "optimization";

pub fn structures_task_id(label: &str) -> String {
    format!("structures:{label}")
}

/// Per-case geometry → aero → acoustics chains joined at a selection barrier,
/// followed by the structural sweep and the optimizer.
pub fn build_task_graph(matrix: &DesignMatrix, _spec: &RequirementSpec) -> TaskGraph {
    build_task_graph_with(matrix, &SweepBounds::default())
}

pub fn build_task_graph_with(matrix: &DesignMatrix, bounds: &SweepBounds) -> TaskGraph {
    let mut g = TaskGraph::default();
    let mut selection_deps = Vec::new();
    for (i, case) in matrix.cases.iter().enumerate() {
        let id = &case.case_id;
        let prio = i as u32;
        let mut geo = TaskNode::new(geometry_task_id(id), AgentRole::Geometry, Phase::Geometry)
            .with_payload(format!("{id}/airfoil.geo"));
        geo.priority = prio;
        let mut aero = TaskNode::new(aero_task_id(id), AgentRole::Aerodynamics, Phase::Aero)
            .with_payload(format!("{id}/postProcessing/forceCoeffs/0/coefficient.dat"))
            .depends_on([geo.task_id.clone()]);
        aero.priority = prio;
        let mut ac = TaskNode::new(
            acoustics_task_id(id),
            AgentRole::Acoustics,
            Phase::Acoustics,
        )
        .with_payload(format!("{id}/acoustics_data/bpm_input.json"))
        .depends_on([aero.task_id.clone()]);
        ac.priority = prio;
        selection_deps.push(aero.task_id.clone());
        selection_deps.push(ac.task_id.clone());
        g.push(geo);
        g.push(aero);
        g.push(ac);
    }
    g.push(
        TaskNode::new(SELECTION_TASK, AgentRole::Chief, Phase::Selection)
            .with_payload("airfoil/multi_case_analysis/aerodynamic_data.csv")
            .depends_on(selection_deps),
    );
    let mut sweep_ids = Vec::new();
    for (i, cfg) in sweep(bounds).iter().enumerate() {
        let label = cfg.label();
        let mut node = TaskNode::new(
            structures_task_id(&label),
            AgentRole::Structures,
            Phase::Structures,
        )
        .with_payload(format!("structures/{label}"))
        .depends_on([SELECTION_TASK.to_string()]);
        node.priority = i as u32;
        sweep_ids.push(node.task_id.clone());
        g.push(node);
    }
    g.push(
        TaskNode::new(OPTIMIZATION_TASK, AgentRole::Optimizer, Phase::Optimization)
            .with_payload("structures/structural_sweep.csv")
            .depends_on(sweep_ids),
    );
    g
}

/// What selection needs from one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub airfoil: String,
    pub flow: Option<FlowResult>,
    /// dB; `None` when acoustics failed
    pub oaspl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScore {
    pub case_id: String,
    pub airfoil: String,
    pub lift_to_drag: f64,
    pub oaspl: f64,
    pub aero_term: f64,
    pub noise_term: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Best first.
    pub ranking: Vec<CaseScore>,
    pub winner: CaseScore,
}

/// Weighted aero/noise ranking.
///
/// J = w₁·(L/D)/(L/D)ₘₐₓ + w₂·(1 − (OASPL − min)/(max − min)). Negative L/D
/// scores zero on the aero term; equal OASPL everywhere gives every case a noise
/// term of 1. Ties go to higher L/D, then the lexicographically smaller case id.
pub fn select_airfoil(
    outcomes: &[CaseOutcome],
    aero_weight: f64,
    noise_weight: f64,
) -> Result<Selection, PlannerError> {
    let usable: Vec<(&CaseOutcome, &FlowResult, f64)> = outcomes
        .iter()
        .filter_map(|o| {
            let f = o
                .flow
                .as_ref()
                .filter(|f| f.converged && f.lift_to_drag.is_finite())?;
            let spl = o.oaspl.filter(|s| s.is_finite())?;
            Some((o, f, spl))
        })
        .collect();
    if usable.is_empty() {
        return Err(PlannerError::AllCasesFailed);
    }
    let ld_max = usable
        .iter()
        .map(|(_, f, _)| f.lift_to_drag)
        .fold(f64::NEG_INFINITY, f64::max);
    let spl_min = usable.iter().map(|u| u.2).fold(f64::INFINITY, f64::min);
    let spl_max = usable.iter().map(|u| u.2).fold(f64::NEG_INFINITY, f64::max);
    let mut ranking: Vec<CaseScore> = usable
        .iter()
        .map(|(o, f, spl)| {
            let aero_term = if ld_max > 0.0 {
                f.lift_to_drag.max(0.0) / ld_max
            } else {
                0.0
            };
            let noise_term = if spl_max > spl_min {
                1.0 - (spl - spl_min) / (spl_max - spl_min)
            } else {
                1.0
            };
            CaseScore {
                case_id: o.case_id.clone(),
                airfoil: o.airfoil.clone(),
                lift_to_drag: f.lift_to_drag,
                oaspl: *spl,
                aero_term,
                noise_term,
                j: aero_weight * aero_term + noise_weight * noise_term,
            }
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.j.partial_cmp(&a.j)
            .unwrap_or(Ordering::Equal)
            .then(
                b.lift_to_drag
                    .partial_cmp(&a.lift_to_drag)
                    .unwrap_or(Ordering::Equal),
            )
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    let winner = ranking[0].clone();
    Ok(Selection { ranking, winner })
}

/// Planning memo for the aerodynamics engineer.
pub fn aerodynamics_plan(matrix: &DesignMatrix, spec: &RequirementSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Aerodynamics plan\n");
    let _ = writeln!(s, "Objective: {}\n", spec.objective_text);
    let _ = writeln!(
        s,
        "Solver: steady incompressible RANS, Spalart-Allmaras, SIMPLE with relaxation p=0.3 U=0.7, 3000 iterations."
    );
    let _ = writeln!(
        s,
        "Mesh: C-type, 40000-45000 nodes, checked before solving.\n"
    );
    let _ = writeln!(
        s,
        "| # | Case | Airfoil | Chord (m) | Re | U (m/s) | AoA (deg) |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|");
    for (i, c) in matrix.cases.iter().enumerate() {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.2} | {:.3e} | {:.1} | {} |",
            i + 1,
            c.case_id,
            c.airfoil,
            c.chord,
            c.reynolds,
            c.velocity,
            c.aoa
        );
    }
    s
}

/// Planning memo for the acoustics engineer.
pub fn acoustics_plan(matrix: &DesignMatrix, spec: &RequirementSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Acoustics plan\n");
    let _ = writeln!(
        s,
        "Model: semi-empirical airfoil self-noise (turbulent boundary layer trailing edge, separation, laminar vortex shedding)."
    );
    let _ = writeln!(s, "Band: 100 Hz to 10 kHz, third-octave centers; observer 1.0 m perpendicular to the trailing edge.");
    let _ = writeln!(s, "Span: {} m. Metrics: SPL, OASPL, dBA.\n", spec.span);
    let mut by_velocity: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
    for c in &matrix.cases {
        by_velocity
            .entry(c.velocity.to_bits())
            .or_default()
            .push(&c.case_id);
    }
    for (bits, ids) in by_velocity {
        let _ = writeln!(s, "- {} m/s: {}", f64::from_bits(bits), ids.join(", "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    fn flow(cl: f64, cd: f64) -> FlowResult {
        FlowResult::from_coefficients(cl, cd, 0.0, 1e-3, 7e-4, true, 3000)
    }

    fn outcome(id: &str, ld: f64, spl: f64) -> CaseOutcome {
        CaseOutcome {
            case_id: id.into(),
            airfoil: id.into(),
            flow: Some(flow(ld * 0.01, 0.01)),
            oaspl: Some(spl),
        }
    }

    #[test]
    fn uav_matrix_has_twelve_cases() {
        let m = generate_matrix(&RequirementSpec::uav_wing()).unwrap();
        assert_eq!(m.len(), 12);
        assert!(m.is_valid());
        let aoas: Vec<f64> = m.cases.iter().map(|c| c.aoa).collect();
        assert_eq!(aoas, vec![0., 3., 6., 2., 4., 1., 1., 5., 2., 5., 0., 4.]);
    }

    #[test]
    fn single_case_matrix() {
        let mut s = RequirementSpec::uav_wing();
        s.airfoil_candidates.truncate(1);
        s.velocities.truncate(1);
        assert_eq!(generate_matrix(&s).unwrap().len(), 1);
    }

    #[test]
    fn empty_candidates_rejected() {
        let mut s = RequirementSpec::uav_wing();
        s.airfoil_candidates.clear();
        assert!(matches!(
            generate_matrix(&s),
            Err(PlannerError::NoCandidates)
        ));
    }

    #[test]
    fn narrow_aoa_range_stays_inside() {
        let mut s = RequirementSpec::uav_wing();
        s.aoa_range.min = 2.0;
        s.aoa_range.max = 3.0;
        let m = generate_matrix(&s).unwrap();
        assert!(m.cases.iter().all(|c| (2.0..=3.0).contains(&c.aoa)));
    }

    #[test]
    fn graph_joins_at_selection() {
        let spec = RequirementSpec::uav_wing();
        let m = generate_matrix(&spec).unwrap();
        let g = build_task_graph(&m, &spec);
        g.validate().unwrap();
        assert_eq!(g.len(), 12 * 3 + 1 + 432 + 1);
        let sel = g.get(SELECTION_TASK).unwrap();
        assert_eq!(sel.dependencies.len(), 24);
        assert_eq!(g.get(OPTIMIZATION_TASK).unwrap().dependencies.len(), 432);
    }

    #[test]
    fn cycles_are_detected() {
        let mut g = TaskGraph::default();
        g.push(
            TaskNode::new("a", AgentRole::Geometry, Phase::Geometry).depends_on(["b".to_string()]),
        );
        g.push(
            TaskNode::new("b", AgentRole::Geometry, Phase::Geometry).depends_on(["a".to_string()]),
        );
        assert!(matches!(g.validate(), Err(PlannerError::Cycle(_))));
    }

    #[test]
    fn selection_prefers_high_ld_and_low_noise() {
        let out = [
            outcome("a", 20.0, 130.0),
            outcome("b", 25.0, 130.0),
            outcome("c", 25.0, 140.0),
        ];
        let s = select_airfoil(&out, 0.6, 0.4).unwrap();
        assert_eq!(s.winner.case_id, "b");
        assert!((s.winner.j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_case_scores_full_marks() {
        let s = select_airfoil(&[outcome("x", 10.0, 120.0)], 0.6, 0.4).unwrap();
        assert!((s.winner.j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ties_break_by_case_id() {
        let out = [outcome("z", 10.0, 120.0), outcome("m", 10.0, 120.0)];
        let s = select_airfoil(&out, 0.6, 0.4).unwrap();
        assert_eq!(s.winner.case_id, "m");
        assert_eq!(s.ranking[0].j, s.ranking[1].j);
    }

    #[test]
    fn failed_cases_are_skipped() {
        let mut bad = outcome("a", 50.0, 100.0);
        bad.flow.as_mut().unwrap().converged = false;
        let s = select_airfoil(&[bad, outcome("b", 10.0, 120.0)], 0.6, 0.4).unwrap();
        assert_eq!(s.winner.case_id, "b");
        let mut none = outcome("c", 1.0, 1.0);
        none.flow = None;
        assert!(matches!(
            select_airfoil(&[none], 0.6, 0.4),
            Err(PlannerError::AllCasesFailed)
        ));
    }

    #[test]
    fn remote_response_validation() {
        let spec = RequirementSpec::uav_wing();
        let mut cases = Vec::new();
        for a in &spec.airfoil_candidates {
            for u in &spec.velocities {
                cases.push(serde_json::json!({"airfoil": a, "velocity": u, "aoa": 2.0}));
            }
        }
        let ok = serde_json::to_vec(&serde_json::json!({ "cases": cases })).unwrap();
        assert_eq!(parse_remote_matrix(&ok, &spec).unwrap().len(), 12);
        let extra = br#"{"cases": [], "note": 1}"#;
        assert!(parse_remote_matrix(extra, &spec).is_err());
        let bad_aoa = br#"{"cases": [{"airfoil": "NACA0012", "velocity": 25, "aoa": 40}]}"#;
        assert!(parse_remote_matrix(bad_aoa, &spec).is_err());
        assert!(parse_remote_matrix(b"not json", &spec).is_err());
    }

    fn serve_once(body: Vec<u8>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            stream.write_all(head.as_bytes()).unwrap();
            let _ = stream.write_all(&body);
        });
        format!("http://{addr}/plan")
    }

    #[test]
    fn remote_backend_round_trip() {
        let spec = RequirementSpec::uav_wing();
        let scripted = generate_matrix(&spec).unwrap();
        let cases: Vec<_> = scripted
            .cases
            .iter()
            .map(
                |c| serde_json::json!({"airfoil": c.airfoil, "velocity": c.velocity, "aoa": c.aoa}),
            )
            .collect();
        let url = serve_once(serde_json::to_vec(&serde_json::json!({ "cases": cases })).unwrap());
        let m = RemotePlanner::new(url).generate_matrix(&spec, 42).unwrap();
        assert_eq!(m, scripted);
    }

    #[test]
    fn oversized_remote_response_is_rejected() {
        let spec = RequirementSpec::uav_wing();
        let url = serve_once(vec![b' '; (MAX_RESPONSE_BYTES + 10) as usize]);
        let err = RemotePlanner::new(url)
            .generate_matrix(&spec, 1)
            .unwrap_err();
        assert!(matches!(err, PlannerError::Schema(_)), "{err}");
    }

    #[test]
    fn plans_list_every_case() {
        let spec = RequirementSpec::uav_wing();
        let m = generate_matrix(&spec).unwrap();
        let a = aerodynamics_plan(&m, &spec);
        assert!(m.cases.iter().all(|c| a.contains(&c.case_id)));
        assert!(acoustics_plan(&m, &spec).contains("35 m/s"));
    }
}
