//! Structural sweep: factorial enumeration, analytic mass, desk cantilever stress.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, AirfoilCoordinates, AirfoilSpec, GeometryError, SectionProperties};
use crate::model::{
    FlowResult, MaterialSpec, RequirementSpec, StructConfig, StructResult, Validate,
};
use crate::recovery::{retry_loop, AttemptFailure, Clock, LogRules, Recoverable, RetryPolicy};

pub const GRAVITY: f64 = 9.80665;
/// Stations per surface used for structural sections.
pub const SECTION_POINTS: usize = 121;

#[derive(Debug, Error)]
pub enum StructError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("section inertia must be positive, got {0}")]
    Inertia(f64),
    #[error("config {label} is invalid: {reason}")]
    InvalidConfig { label: String, reason: String },
    #[error("no configurations to run")]
    EmptySweep,
    #[error("bad sweep table: {0}")]
    Table(String),
}

/// One factorial axis: `levels` evenly spaced values over `[min, max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub levels: usize,
}

impl Axis {
    pub const fn new(min: f64, max: f64, levels: usize) -> Self {
        Self { min, max, levels }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.levels {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBounds {
    pub spar_width: Axis,
    pub rib_thickness: Axis,
    pub shell_thickness: Axis,
    pub n_spars: Vec<u32>,
    pub n_ribs: Vec<u32>,
}

impl Default for SweepBounds {
    fn default() -> Self {
        Self {
            spar_width: Axis::new(0.2, 2.0, 3),
            rib_thickness: Axis::new(0.5, 2.0, 6),
            shell_thickness: Axis::new(1.0, 3.0, 6),
            n_spars: vec![2, 3],
            n_ribs: vec![2, 3],
        }
    }
}

/// Full factorial in a fixed nesting order (spar, rib, shell, spars, ribs).
pub fn sweep(bounds: &SweepBounds) -> Vec<StructConfig> {
    let mut out = Vec::new();
    for sw in bounds.spar_width.values() {
        for rt in bounds.rib_thickness.values() {
            for st in bounds.shell_thickness.values() {
                for &ns in &bounds.n_spars {
                    for &nr in &bounds.n_ribs {
                        out.push(StructConfig {
                            spar_width: sw,
                            rib_thickness: rt,
                            shell_thickness: st,
                            n_spars: ns,
                            n_ribs: nr,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    pub name: String,
    pub load_factor: f64,
    /// Aerodynamic lift on the modelled semi-span at 1g (N).
    pub semi_span_lift: f64,
}

pub const LOAD_FACTORS: [(&str, f64); 4] = [
    ("cruise", 1.0),
    ("maneuver", 2.5),
    ("gust", 1.5),
    ("landing", 3.0),
];

/// Cruise, maneuver, gust and landing cases built on the selected flow result.
pub fn load_cases(spec: &RequirementSpec, flow: &FlowResult, velocity: f64) -> Vec<LoadCase> {
    let area = spec.chord * spec.span;
    let lift = 0.5 * spec.air_density * velocity * velocity * area * flow.cl;
    LOAD_FACTORS
        .iter()
        .map(|(name, n)| LoadCase {
            name: (*name).to_string(),
            load_factor: *n,
            semi_span_lift: 0.5 * lift,
        })
        .collect()
}

/// Root-fixed semi-span wing panel of one airfoil.
#[derive(Debug, Clone)]
pub struct WingPanel {
    pub coords: AirfoilCoordinates,
    pub chord: f64,
    /// Cantilever length, half the wing span (m).
    pub length: f64,
    pub material: MaterialSpec,
}

impl WingPanel {
    pub fn new(airfoil: &str, spec: &RequirementSpec) -> Result<Self, StructError> {
        let coords = geometry::generate(&AirfoilSpec::parse(airfoil)?, SECTION_POINTS)?;
        Ok(Self {
            coords,
            chord: spec.chord,
            length: 0.5 * spec.span,
            material: spec.material.clone(),
        })
    }

    pub fn section(&self, config: &StructConfig) -> Result<SectionProperties, StructError> {
        check_config(config)?;
        Ok(geometry::wing_section_properties(
            &self.coords,
            config,
            self.chord,
            self.length,
        )?)
    }

    /// Structural mass in grams.
    pub fn mass(&self, config: &StructConfig) -> Result<f64, StructError> {
        Ok(self.material.density * self.section(config)?.material_volume() * 1e3)
    }

    /// Root von Mises stress (MPa) and tip deflection (mm) of the uniformly
    /// loaded cantilever.
    pub fn desk_stress(
        &self,
        config: &StructConfig,
        load: &LoadCase,
    ) -> Result<(f64, f64), StructError> {
        let section = self.section(config)?;
        let mass_kg = self.material.density * section.material_volume();
        self.stress_for(&section, mass_kg, load)
    }

    fn stress_for(
        &self,
        section: &SectionProperties,
        mass_kg: f64,
        load: &LoadCase,
    ) -> Result<(f64, f64), StructError> {
        let i = section.second_moment;
        if !(i > 0.0) {
            return Err(StructError::Inertia(i));
        }
        let force = load.load_factor * (load.semi_span_lift + mass_kg * GRAVITY);
        let b = self.length;
        let moment = 0.5 * force * b;
        let sigma = moment * section.y_max / i;
        let tip = force * b.powi(3) / (8.0 * self.material.youngs_modulus * i);
        Ok((sigma * 1e-6, tip * 1e3))
    }

    /// All load cases for one configuration.
    pub fn evaluate(
        &self,
        config: &StructConfig,
        loads: &[LoadCase],
    ) -> Result<StructResult, StructError> {
        let section = self.section(config)?;
        let mass_kg = self.material.density * section.material_volume();
        let mut stress = Vec::with_capacity(loads.len());
        let mut disp = Vec::with_capacity(loads.len());
        for load in loads {
            let (s, d) = self.stress_for(&section, mass_kg, load)?;
            stress.push(s);
            disp.push(d);
        }
        Ok(StructResult {
            config: *config,
            max_von_mises: stress,
            max_displacement: disp,
            mass: mass_kg * 1e3,
            safety_factor: 0.0,
        }
        .with_safety_factor(self.material.yield_strength * 1e-6))
    }
}

fn check_config(config: &StructConfig) -> Result<(), StructError> {
    let v = config.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(StructError::InvalidConfig {
            label: config.label(),
            reason: v
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub config: StructConfig,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub load_cases: Vec<String>,
    pub results: Vec<StructResult>,
    pub failures: Vec<SweepFailure>,
}

impl SweepTable {
    pub fn success_count(&self) -> usize {
        self.results.len()
    }

    /// Configuration with the lowest peak stress.
    pub fn best_by_stress(&self) -> Option<&StructResult> {
        self.results
            .iter()
            .min_by(|a, b| a.max_stress().total_cmp(&b.max_stress()))
    }
}

#[derive(Clone)]
struct Unit;

impl Recoverable for Unit {}

/// Runs every configuration through `execute` under the retry policy; failures
/// are collected, never fatal.
pub fn run_sweep<E>(
    configs: &[StructConfig],
    load_names: &[String],
    policy: RetryPolicy,
    clock: &dyn Clock,
    mut execute: E,
) -> Result<SweepTable, StructError>
where
    E: FnMut(&StructConfig) -> Result<StructResult, AttemptFailure>,
{
    if configs.is_empty() {
        return Err(StructError::EmptySweep);
    }
    let mut table = SweepTable {
        load_cases: load_names.to_vec(),
        ..Default::default()
    };
    for cfg in configs {
        let mut produced = None;
        let out = retry_loop(
            Unit,
            policy,
            LogRules::builtin(),
            clock,
            || Unit,
            |_, _| {
                produced = Some(execute(cfg)?);
                Ok(())
            },
            |_| Ok(()),
        );
        match (out.success, produced) {
            (true, Some(r)) => table.results.push(r),
            _ => table.failures.push(SweepFailure {
                config: *cfg,
                error: out.last_error.unwrap_or_else(|| "no result".into()),
                attempts: out.attempts,
            }),
        }
    }
    Ok(table)
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "spar_width_mm",
    "rib_thickness_mm",
    "shell_thickness_mm",
    "n_spars",
    "n_ribs",
];

/// `structural_sweep.csv`: config columns, mass, peak stress, per-case stress and
/// displacement, safety factor.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::new();
    let mut header: Vec<String> = SWEEP_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.push("mass_g".into());
    header.push("max_stress_mpa".into());
    for n in &table.load_cases {
        header.push(format!("stress_{n}_mpa"));
    }
    for n in &table.load_cases {
        header.push(format!("displacement_{n}_mm"));
    }
    header.push("safety_factor".into());
    let _ = writeln!(s, "{}", header.join(","));
    for r in &table.results {
        let c = &r.config;
        let mut row = vec![
            c.spar_width.to_string(),
            c.rib_thickness.to_string(),
            c.shell_thickness.to_string(),
            c.n_spars.to_string(),
            c.n_ribs.to_string(),
            r.mass.to_string(),
            r.max_stress().to_string(),
        ];
        row.extend(r.max_von_mises.iter().map(ToString::to_string));
        row.extend(r.max_displacement.iter().map(ToString::to_string));
        row.push(r.safety_factor.to_string());
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Parses the sweep table back into results.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable, StructError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| StructError::Table(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StructError::Table(format!("missing column {name}")))
    };
    let stress_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let n = h.strip_prefix("stress_")?.strip_suffix("_mpa")?;
            Some((i, n.to_string()))
        })
        .collect();
    let disp_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("displacement_"))
        .map(|(i, _)| i)
        .collect();
    let idx: Vec<usize> = SWEEP_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let mass = col("mass_g")?;
    let sf = col("safety_factor")?;
    let mut table = SweepTable {
        load_cases: stress_cols.iter().map(|(_, n)| n.clone()).collect(),
        ..Default::default()
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| StructError::Table(e.to_string()))?;
        let f = |i: usize| -> Result<f64, StructError> {
            rec.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| StructError::Table(format!("bad number in column {i}")))
        };
        let config = StructConfig {
            spar_width: f(idx[0])?,
            rib_thickness: f(idx[1])?,
            shell_thickness: f(idx[2])?,
            n_spars: f(idx[3])? as u32,
            n_ribs: f(idx[4])? as u32,
        };
        table.results.push(StructResult {
            config,
            max_von_mises: stress_cols
                .iter()
                .map(|(i, _)| f(*i))
                .collect::<Result<_, _>>()?,
            max_displacement: disp_cols.iter().map(|i| f(*i)).collect::<Result<_, _>>()?,
            mass: f(mass)?,
            safety_factor: f(sf)?,
        });
    }
    Ok(table)
}

/// Input deck for an external CalculiX run of one configuration (adapter path).
pub fn fea_input_deck(
    panel: &WingPanel,
    config: &StructConfig,
    loads: &[LoadCase],
) -> Result<String, StructError> {
    let section = panel.section(config)?;
    let m = &panel.material;
    let mut s = String::new();
    let _ = writeln!(s, "*HEADING\nwing panel {}", config.label());
    let _ = writeln!(s, "*INCLUDE, INPUT=mesh.inp");
    let _ = writeln!(s, "*MATERIAL, NAME={}", m.name);
    let _ = writeln!(s, "*ELASTIC\n{:e}, {}", m.youngs_modulus, m.poisson_ratio);
    let _ = writeln!(s, "*DENSITY\n{}", m.density);
    let _ = writeln!(s, "*BOUNDARY\nROOT, 1, 6");
    let mass = m.density * section.material_volume();
    for (k, load) in loads.iter().enumerate() {
        let force = load.load_factor * (load.semi_span_lift + mass * GRAVITY);
        let _ = writeln!(s, "*STEP\n*STATIC\n*CLOAD\nTIP, 2, {force:e}");
        let _ = writeln!(
            s,
            "*NODE FILE\nU\n*EL FILE\nS\n*END STEP ** {} {}",
            k + 1,
            load.name
        );
    }
    Ok(s)
}

/// Reads `max_von_mises_mpa` / `max_displacement_mm` lines from a solver summary.
pub fn parse_fea_summary(text: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut stress = Vec::new();
    let mut disp = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match (
            parts.next(),
            parts.next().and_then(|v| v.parse::<f64>().ok()),
        ) {
            (Some("max_von_mises_mpa"), Some(v)) => stress.push(v),
            (Some("max_displacement_mm"), Some(v)) => disp.push(v),
            _ => {}
        }
    }
    (!stress.is_empty() && stress.len() == disp.len()).then_some((stress, disp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::SimulatedClock;
    use std::collections::HashSet;

    fn panel() -> WingPanel {
        WingPanel::new("NACA4412", &RequirementSpec::uav_wing()).unwrap()
    }

    fn cruise(n: f64) -> LoadCase {
        LoadCase {
            name: "c".into(),
            load_factor: n,
            semi_span_lift: 7.0,
        }
    }

    fn cfg(sw: f64, rt: f64, st: f64, ns: u32, nr: u32) -> StructConfig {
        StructConfig {
            spar_width: sw,
            rib_thickness: rt,
            shell_thickness: st,
            n_spars: ns,
            n_ribs: nr,
        }
    }

    #[test]
    fn default_sweep_is_432_unique() {
        let s = sweep(&SweepBounds::default());
        assert_eq!(s.len(), 432);
        let keys: HashSet<String> = s.iter().map(|c| c.label()).collect();
        assert_eq!(keys.len(), 432);
        assert!(s.iter().all(|c| c.is_valid()));
    }

    #[test]
    fn single_level_sweep() {
        let b = SweepBounds {
            spar_width: Axis::new(1.0, 1.0, 1),
            rib_thickness: Axis::new(1.0, 1.0, 1),
            shell_thickness: Axis::new(2.0, 2.0, 1),
            n_spars: vec![2],
            n_ribs: vec![3],
        };
        assert_eq!(sweep(&b).len(), 1);
    }

    #[test]
    fn axis_levels_include_endpoints() {
        assert_eq!(Axis::new(0.2, 2.0, 3).values(), vec![0.2, 1.1, 2.0]);
        let v = Axis::new(1.0, 3.0, 6).values();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[5], 3.0);
        assert!((v[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn load_cases_scale_cruise() {
        let spec = RequirementSpec::uav_wing();
        let f = FlowResult::from_coefficients(0.96, 0.0345, -0.1, 1e-3, 7e-4, true, 1);
        let l = load_cases(&spec, &f, 25.0);
        assert_eq!(l.len(), 4);
        assert_eq!(l[0].load_factor, 1.0);
        assert_eq!(l[3].load_factor, 3.0);
        let expected = 0.5 * 0.5 * 1.225 * 625.0 * 0.02 * 0.96;
        assert!((l[0].semi_span_lift - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_lift_still_loads_landing() {
        let p = panel();
        let spec = RequirementSpec::uav_wing();
        let f = FlowResult::from_coefficients(0.0, 0.014, 0.0, 1e-3, 7e-4, true, 1);
        let l = load_cases(&spec, &f, 25.0);
        let (s, _) = p.desk_stress(&cfg(0.2, 0.5, 1.0, 2, 2), &l[3]).unwrap();
        assert!(s > 0.0);
    }

    #[test]
    fn mass_linear_in_density() {
        let mut p = panel();
        let c = cfg(1.1, 1.0, 2.0, 3, 2);
        let m1 = p.mass(&c).unwrap();
        p.material.density *= 2.0;
        assert!((p.mass(&c).unwrap() - 2.0 * m1).abs() < 1e-9 * m1);
    }

    #[test]
    fn mass_monotone_in_each_parameter() {
        let p = panel();
        let base = cfg(0.2, 0.5, 1.0, 2, 2);
        let m0 = p.mass(&base).unwrap();
        for bumped in [
            cfg(1.1, 0.5, 1.0, 2, 2),
            cfg(0.2, 0.8, 1.0, 2, 2),
            cfg(0.2, 0.5, 1.4, 2, 2),
            cfg(0.2, 0.5, 1.0, 3, 2),
            cfg(0.2, 0.5, 1.0, 2, 3),
        ] {
            assert!(p.mass(&bumped).unwrap() > m0, "{bumped:?}");
        }
    }

    #[test]
    fn stress_is_linear_in_load_factor() {
        let p = panel();
        let c = cfg(1.1, 1.0, 2.0, 2, 2);
        let (s1, d1) = p.desk_stress(&c, &cruise(1.0)).unwrap();
        let (s2, d2) = p.desk_stress(&c, &cruise(2.0)).unwrap();
        assert!((s2 - 2.0 * s1).abs() < 1e-12 * s2);
        assert!((d2 - 2.0 * d1).abs() < 1e-12 * d2);
        assert_eq!(p.desk_stress(&c, &cruise(0.0)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn thicker_shell_lowers_stress() {
        let p = panel();
        let (a, _) = p
            .desk_stress(&cfg(0.2, 0.5, 1.0, 2, 2), &cruise(1.0))
            .unwrap();
        let (b, _) = p
            .desk_stress(&cfg(0.2, 0.5, 1.4, 2, 2), &cruise(1.0))
            .unwrap();
        assert!(b < a);
    }

    #[test]
    fn safety_factor_times_stress_is_yield() {
        let p = panel();
        let r = p
            .evaluate(&cfg(2.0, 2.0, 3.0, 3, 3), &[cruise(1.0), cruise(3.0)])
            .unwrap();
        assert!((r.safety_factor * r.max_stress() - 503.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_survives_one_broken_config() {
        let p = panel();
        let loads = vec![cruise(1.0)];
        let configs = sweep(&SweepBounds::default());
        let broken = configs[17];
        let clock = SimulatedClock::new();
        let table = run_sweep(
            &configs,
            &["c".into()],
            RetryPolicy::default(),
            &clock,
            |c| {
                if *c == broken {
                    Err(AttemptFailure::new(
                        "solver crashed",
                        "Floating point exception",
                    ))
                } else {
                    p.evaluate(c, &loads)
                        .map_err(|e| AttemptFailure::new(e.to_string(), ""))
                }
            },
        )
        .unwrap();
        assert_eq!(table.results.len(), 431);
        assert_eq!(table.failures.len(), 1);
        assert_eq!(table.failures[0].attempts, 3);
        assert!(run_sweep(&[], &[], RetryPolicy::default(), &clock, |_| unreachable!()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = panel();
        let loads = vec![cruise(1.0), cruise(2.5)];
        let clock = SimulatedClock::new();
        let configs = &sweep(&SweepBounds::default())[..5];
        let table = run_sweep(
            configs,
            &["cruise".into(), "maneuver".into()],
            RetryPolicy::default(),
            &clock,
            |c| {
                p.evaluate(c, &loads)
                    .map_err(|e| AttemptFailure::new(e.to_string(), ""))
            },
        )
        .unwrap();
        let text = sweep_csv(&table);
        let back = parse_sweep_csv(&text).unwrap();
        assert_eq!(back.results, table.results);
        assert_eq!(back.load_cases, table.load_cases);
    }

    #[test]
    fn fea_adapter_documents() {
        let p = panel();
        let deck = fea_input_deck(&p, &cfg(0.2, 0.5, 1.0, 2, 2), &[cruise(1.0)]).unwrap();
        assert!(deck.contains("*ELASTIC"));
        let (s, d) =
            parse_fea_summary("max_von_mises_mpa 224.0\nmax_displacement_mm 1.5\n").unwrap();
        assert_eq!((s[0], d[0]), (224.0, 1.5));
        assert!(parse_fea_summary("garbage").is_none());
    }
}
