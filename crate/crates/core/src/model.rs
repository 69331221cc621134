//! Shared domain types for every agent in the pipeline.
//!
//! Angles are carried in degrees at every boundary; kernels convert to radians
//! internally. Structural outputs use display units: grams, MPa and mm.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Kinematic viscosity implied by the reference simulation matrix (m²/s).
pub const DEFAULT_KINEMATIC_VISCOSITY: f64 = 8.57e-6;
/// Sea-level air density (kg/m³).
pub const DEFAULT_AIR_DENSITY: f64 = 1.225;

/// Agents (and the orchestrator itself) that may produce or consume artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Chief,
    Geometry,
    Aerodynamics,
    Acoustics,
    Structures,
    Optimizer,
    Orchestrator,
}

impl AgentRole {
    pub const ALL: [AgentRole; 7] = [
        AgentRole::Chief,
        AgentRole::Geometry,
        AgentRole::Aerodynamics,
        AgentRole::Acoustics,
        AgentRole::Structures,
        AgentRole::Optimizer,
        AgentRole::Orchestrator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Chief => "chief",
            AgentRole::Geometry => "geometry",
            AgentRole::Aerodynamics => "aerodynamics",
            AgentRole::Acoustics => "acoustics",
            AgentRole::Structures => "structures",
            AgentRole::Optimizer => "optimizer",
            AgentRole::Orchestrator => "orchestrator",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single failed invariant: which field, and which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Types that can check their own invariants.
pub trait Validate {
    fn violations(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³
    pub density: f64,
    /// Pa
    pub yield_strength: f64,
}

impl MaterialSpec {
    /// Aluminium 7075-T6. Yield strength is the handbook value (503 MPa).
    pub fn al7075_t6() -> Self {
        Self {
            name: "aluminum 7075-T6".to_string(),
            youngs_modulus: 71.7e9,
            poisson_ratio: 0.33,
            density: 2810.0,
            yield_strength: 503e6,
        }
    }
}

impl Validate for MaterialSpec {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.youngs_modulus > 0.0) {
            v.push(Violation::new("material.youngs_modulus", "E > 0"));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            v.push(Violation::new("material.poisson_ratio", "0 < nu < 0.5"));
        }
        if !(self.density > 0.0) {
            v.push(Violation::new("material.density", "rho > 0"));
        }
        if !(self.yield_strength > 0.0) {
            v.push(Violation::new("material.yield_strength", "yield > 0"));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaRange {
    pub min: f64,
    pub max: f64,
}

fn default_nu() -> f64 {
    DEFAULT_KINEMATIC_VISCOSITY
}

fn default_rho() -> f64 {
    DEFAULT_AIR_DENSITY
}

/// Parsed customer requirements that drive planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSpec {
    pub objective_text: String,
    /// m
    pub chord: f64,
    /// m
    pub span: f64,
    /// m/s
    pub velocities: Vec<f64>,
    /// deg
    pub aoa_range: AoaRange,
    pub airfoil_candidates: Vec<String>,
    pub material: MaterialSpec,
    pub min_safety_factor: f64,
    pub aero_weight: f64,
    pub noise_weight: f64,
    #[serde(default = "default_nu")]
    pub kinematic_viscosity: f64,
    #[serde(default = "default_rho")]
    pub air_density: f64,
}

impl RequirementSpec {
    /// The UAV-wing requirement, already parsed from its prose form.
    pub fn uav_wing() -> Self {
        Self {
            objective_text: "Design a lightweight and efficient UAV wing for small drone \
                applications. Minimize noise while maintaining good aerodynamic performance."
                .to_string(),
            chord: 0.1,
            span: 0.2,
            velocities: vec![25.0, 30.0, 35.0],
            aoa_range: AoaRange { min: 0.0, max: 6.0 },
            airfoil_candidates: ["NACA0012", "NACA0015", "NACA2412", "NACA4412"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            material: MaterialSpec::al7075_t6(),
            min_safety_factor: 1.5,
            aero_weight: 0.6,
            noise_weight: 0.4,
            kinematic_viscosity: DEFAULT_KINEMATIC_VISCOSITY,
            air_density: DEFAULT_AIR_DENSITY,
        }
    }
}

impl Validate for RequirementSpec {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.chord > 0.0) {
            v.push(Violation::new("chord", "chord > 0"));
        }
        if !(self.span > 0.0) {
            v.push(Violation::new("span", "span > 0"));
        }
        if self.velocities.is_empty() {
            v.push(Violation::new("velocities", "nonempty"));
        } else if self.velocities.iter().any(|u| !(*u > 0.0)) {
            v.push(Violation::new("velocities", "all > 0"));
        }
        if !(self.aoa_range.min <= self.aoa_range.max) {
            v.push(Violation::new("aoa_range", "min <= max"));
        }
        if self.airfoil_candidates.is_empty() {
            v.push(Violation::new("airfoil_candidates", "nonempty"));
        }
        for name in &self.airfoil_candidates {
            if crate::geometry::AirfoilSpec::parse(name).is_err() {
                v.push(Violation::new(
                    "airfoil_candidates",
                    format!("'{name}' is not a NACA 4-digit designator"),
                ));
            }
        }
        if !(self.min_safety_factor > 0.0) {
            v.push(Violation::new("min_safety_factor", "min_safety_factor > 0"));
        }
        if !((self.aero_weight + self.noise_weight - 1.0).abs() <= 1e-9) {
            v.push(Violation::new(
                "aero_weight+noise_weight",
                "weights sum to 1 within 1e-9",
            ));
        }
        if !(self.kinematic_viscosity > 0.0) {
            v.push(Violation::new("kinematic_viscosity", "nu > 0"));
        }
        if !(self.air_density > 0.0) {
            v.push(Violation::new("air_density", "rho > 0"));
        }
        v.extend(self.material.violations());
        v
    }
}

/// Every violated invariant of a requirement document; empty when valid.
pub fn validate(spec: &RequirementSpec) -> Vec<Violation> {
    spec.violations()
}

/// One aero-acoustic simulation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case_id: String,
    pub airfoil: String,
    pub chord: f64,
    pub velocity: f64,
    pub aoa: f64,
    pub reynolds: f64,
    pub kinematic_viscosity: f64,
}

impl CaseConfig {
    pub fn new(airfoil: &str, chord: f64, velocity: f64, aoa: f64, nu: f64) -> Self {
        Self {
            case_id: case_id(airfoil, velocity, aoa),
            airfoil: airfoil.to_string(),
            chord,
            velocity,
            aoa,
            reynolds: velocity * chord / nu,
            kinematic_viscosity: nu,
        }
    }
}

fn trim_number(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Case directory name, e.g. `sim_NACA0012_25ms_aoa0`.
pub fn case_id(airfoil: &str, velocity: f64, aoa: f64) -> String {
    format!(
        "sim_{}_{}ms_aoa{}",
        airfoil,
        trim_number(velocity),
        trim_number(aoa)
    )
}

impl Validate for CaseConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.chord > 0.0) {
            v.push(Violation::new("chord", "chord > 0"));
        }
        if !(self.velocity > 0.0) {
            v.push(Violation::new("velocity", "velocity > 0"));
        }
        if !(self.kinematic_viscosity > 0.0) {
            v.push(Violation::new("kinematic_viscosity", "nu > 0"));
        } else {
            let re = self.velocity * self.chord / self.kinematic_viscosity;
            if !((self.reynolds - re).abs() <= 0.005 * re.abs()) {
                v.push(Violation::new(
                    "reynolds",
                    "Re = U*c/nu within 0.5% relative",
                ));
            }
        }
        v
    }
}

/// The planned set of simulation cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub cases: Vec<CaseConfig>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

impl Validate for DesignMatrix {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for c in &self.cases {
            if !seen.insert(c.case_id.as_str()) {
                v.push(Violation::new(
                    format!("cases[{}].case_id", c.case_id),
                    "case_id unique within matrix",
                ));
            }
            for mut x in c.violations() {
                x.field = format!("cases[{}].{}", c.case_id, x.field);
                v.push(x);
            }
        }
        v
    }
}

/// Integrated aerodynamic outputs of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
    pub lift_to_drag: f64,
    /// m
    pub delta_star: f64,
    /// m
    pub theta: f64,
    pub shape_factor: f64,
    pub converged: bool,
    pub iterations: u32,
}

impl FlowResult {
    /// Builds a result with the derived ratios filled in.
    pub fn from_coefficients(
        cl: f64,
        cd: f64,
        cm: f64,
        delta_star: f64,
        theta: f64,
        converged: bool,
        iterations: u32,
    ) -> Self {
        Self {
            cl,
            cd,
            cm,
            lift_to_drag: if cd > 0.0 { cl / cd } else { 0.0 },
            delta_star,
            theta,
            shape_factor: if theta > 0.0 { delta_star / theta } else { 0.0 },
            converged,
            iterations,
        }
    }
}

impl Validate for FlowResult {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.cd > 0.0) {
            v.push(Violation::new("cd", "cd > 0"));
        } else if !((self.lift_to_drag - self.cl / self.cd).abs() <= 1e-9) {
            v.push(Violation::new("lift_to_drag", "L/D = cl/cd within 1e-9"));
        }
        if !(self.theta > 0.0 && self.delta_star > 0.0) {
            v.push(Violation::new("theta", "boundary-layer thicknesses > 0"));
        } else {
            if !((self.shape_factor - self.delta_star / self.theta).abs() <= 1e-9) {
                v.push(Violation::new(
                    "shape_factor",
                    "H = delta*/theta within 1e-9",
                ));
            }
            if !(self.shape_factor >= 1.0) {
                v.push(Violation::new("shape_factor", "H >= 1"));
            }
        }
        if ![self.cl, self.cd, self.cm].iter().all(|x| x.is_finite()) {
            v.push(Violation::new("coefficients", "finite"));
        }
        v
    }
}

/// Level of one mechanism over the shared frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpl {
    pub mechanism: String,
    pub spl: Vec<f64>,
}

/// Acoustic outputs of one case at one observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticResult {
    pub frequencies: Vec<f64>,
    pub mechanisms: Vec<MechanismSpl>,
    pub total_spl: Vec<f64>,
    pub oaspl: f64,
    pub oaspl_dba: f64,
    pub third_octave: Vec<(f64, f64)>,
    pub observer_distance: f64,
    pub observer_angle: f64,
}

impl Validate for AcousticResult {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !self.frequencies.windows(2).all(|w| w[0] < w[1]) {
            v.push(Violation::new("frequencies", "strictly increasing"));
        }
        if self.total_spl.len() != self.frequencies.len() {
            v.push(Violation::new("total_spl", "one level per frequency"));
        }
        for m in &self.mechanisms {
            if m.spl.len() != self.frequencies.len() {
                v.push(Violation::new(
                    format!("spl.{}", m.mechanism),
                    "one level per frequency",
                ));
                continue;
            }
            for (i, (&total, &part)) in self.total_spl.iter().zip(&m.spl).enumerate() {
                if part.is_finite() && total < part - 1e-9 {
                    v.push(Violation::new(
                        format!("total_spl[{i}]"),
                        format!("total >= {} level", m.mechanism),
                    ));
                }
            }
        }
        let band_max = self
            .total_spl
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if self.oaspl < band_max - 1e-9 {
            v.push(Violation::new("oaspl", "oaspl >= max band level"));
        }
        v
    }
}

/// One point of the structural parametric sweep. Thicknesses in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructConfig {
    pub spar_width: f64,
    pub rib_thickness: f64,
    pub shell_thickness: f64,
    pub n_spars: u32,
    pub n_ribs: u32,
}

impl StructConfig {
    /// Directory-safe label built from the parameter values.
    pub fn label(&self) -> String {
        format!(
            "sw{:.3}_rt{:.3}_st{:.3}_ns{}_nr{}",
            self.spar_width, self.rib_thickness, self.shell_thickness, self.n_spars, self.n_ribs
        )
    }
}

impl Validate for StructConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let eps = 1e-9;
        if !(self.spar_width >= 0.2 - eps && self.spar_width <= 2.0 + eps) {
            v.push(Violation::new("spar_width", "0.2 <= spar_width <= 2.0 mm"));
        }
        if !(self.rib_thickness >= 0.5 - eps && self.rib_thickness <= 2.0 + eps) {
            v.push(Violation::new(
                "rib_thickness",
                "0.5 <= rib_thickness <= 2.0 mm",
            ));
        }
        if !(self.shell_thickness >= 1.0 - eps && self.shell_thickness <= 3.0 + eps) {
            v.push(Violation::new(
                "shell_thickness",
                "1.0 <= shell_thickness <= 3.0 mm",
            ));
        }
        if !matches!(self.n_spars, 2 | 3) {
            v.push(Violation::new("n_spars", "n_spars in {2,3}"));
        }
        if !matches!(self.n_ribs, 2 | 3) {
            v.push(Violation::new("n_ribs", "n_ribs in {2,3}"));
        }
        v
    }
}

/// Structural response of one configuration over all load cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructResult {
    pub config: StructConfig,
    /// MPa, one per load case
    pub max_von_mises: Vec<f64>,
    /// mm, one per load case
    pub max_displacement: Vec<f64>,
    /// g
    pub mass: f64,
    pub safety_factor: f64,
}

impl StructResult {
    pub fn max_stress(&self) -> f64 {
        self.max_von_mises.iter().copied().fold(0.0, f64::max)
    }

    /// Derives the safety factor from the stresses; `yield_mpa` in MPa.
    pub fn with_safety_factor(mut self, yield_mpa: f64) -> Self {
        let s = self.max_stress();
        self.safety_factor = if s > 0.0 {
            yield_mpa / s
        } else {
            f64::INFINITY
        };
        self
    }

    pub fn check(&self, yield_mpa: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.mass > 0.0) {
            v.push(Violation::new("mass", "mass > 0"));
        }
        let s = self.max_stress();
        if s > 0.0
            && !((self.safety_factor - yield_mpa / s).abs()
                <= 1e-9 * self.safety_factor.abs().max(1.0))
        {
            v.push(Violation::new(
                "safety_factor",
                "safety_factor = yield / max stress",
            ));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uav_spec_is_valid() {
        assert!(validate(&RequirementSpec::uav_wing()).is_empty());
    }

    #[test]
    fn zero_chord_is_reported() {
        let mut s = RequirementSpec::uav_wing();
        s.chord = 0.0;
        let v = validate(&s);
        assert_eq!(v, vec![Violation::new("chord", "chord > 0")]);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut s = RequirementSpec::uav_wing();
        s.aero_weight = 0.7;
        s.noise_weight = 0.4;
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "aero_weight+noise_weight");
    }

    #[test]
    fn several_violations_are_all_listed() {
        let mut s = RequirementSpec::uav_wing();
        s.span = -1.0;
        s.velocities.clear();
        s.aoa_range = AoaRange { min: 5.0, max: 1.0 };
        s.material.poisson_ratio = 0.5;
        let fields: Vec<_> = validate(&s).into_iter().map(|v| v.field).collect();
        assert_eq!(
            fields,
            ["span", "velocities", "aoa_range", "material.poisson_ratio"]
        );
    }

    #[test]
    fn case_ids_follow_directory_convention() {
        assert_eq!(case_id("NACA0012", 25.0, 0.0), "sim_NACA0012_25ms_aoa0");
        assert_eq!(
            case_id("NACA4412", 27.5, 2.25),
            "sim_NACA4412_27.5ms_aoa2.25"
        );
    }

    #[test]
    fn reynolds_consistency_is_checked() {
        let mut c = CaseConfig::new("NACA0012", 0.1, 25.0, 0.0, 8.57e-6);
        assert!(c.is_valid());
        c.reynolds *= 1.01;
        assert!(!c.is_valid());
    }

    #[test]
    fn duplicate_case_ids_are_rejected() {
        let c = CaseConfig::new("NACA0012", 0.1, 25.0, 0.0, 8.57e-6);
        let m = DesignMatrix {
            cases: vec![c.clone(), c],
        };
        assert!(!m.is_valid());
    }

    #[test]
    fn flow_result_ratios() {
        let r = FlowResult::from_coefficients(0.5, 0.02, -0.1, 2e-3, 1.4e-3, true, 3000);
        assert!(r.is_valid());
        assert!((r.lift_to_drag - 25.0).abs() < 1e-12);
        let mut bad = r.clone();
        bad.shape_factor = 0.9;
        assert!(!bad.is_valid());
    }

    #[test]
    fn struct_config_bounds() {
        let ok = StructConfig {
            spar_width: 0.2,
            rib_thickness: 2.0,
            shell_thickness: 3.0,
            n_spars: 3,
            n_ribs: 2,
        };
        assert!(ok.is_valid());
        let bad = StructConfig { n_spars: 4, ..ok };
        assert_eq!(bad.violations()[0].field, "n_spars");
    }

    #[test]
    fn agent_roles_round_trip_names() {
        for r in AgentRole::ALL {
            assert_eq!(AgentRole::parse(r.as_str()), Some(r));
        }
        assert_eq!(AgentRole::parse("pilot"), None);
    }
}
