//! Aerodynamics agent: case setup, desk-scale solver, external-solver adapter and
//! extraction of integrated coefficients.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, AirfoilSpec, GeometryError};
use crate::model::{AgentRole, CaseConfig, FlowResult, Validate};
use crate::recovery::SolverParams;
use crate::workspace::{vtk_polydata, ArtifactRecord, ProjectWorkspace, WorkspaceError};

pub const SPEED_OF_SOUND: f64 = 340.29;
pub const COEFFICIENT_PATH: &str = "postProcessing/forceCoeffs/0/coefficient.dat";
pub const BOUNDARY_LAYER_JSON: &str = "acoustics_data/boundary_layer.json";
pub const BPM_INPUT_JSON: &str = "acoustics_data/bpm_input.json";
pub const FLOW_FIELD_JSON: &str = "acoustics_data/flow_field.json";
pub const INTEGRATED_DIR: &str = "postProcessing/integrated";

#[derive(Debug, Error)]
pub enum AeroError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("missing solver output {0}")]
    MissingOutput(String),
    #[error("non-finite {column} in final coefficient row")]
    NonFinite { column: String },
    #[error("cannot parse solver output: {0}")]
    Parse(String),
    #[error("external solver failed")]
    Solver { logs: String },
    #[error("invalid case: {0}")]
    InvalidCase(String),
}

impl AeroError {
    /// Log text for the recovery classifier.
    pub fn logs(&self) -> String {
        match self {
            AeroError::NonFinite { column } => {
                format!("Floating point exception: {column} is not finite (solution diverged)")
            }
            AeroError::Solver { logs } => logs.clone(),
            other => other.to_string(),
        }
    }
}

/// Inlet velocity vector (U cos α, U sin α, 0) for `aoa` in degrees.
pub fn inlet_velocity(u: f64, aoa: f64) -> [f64; 3] {
    let a = aoa.to_radians();
    [u * a.cos(), u * a.sin(), 0.0]
}

pub fn reynolds(u: f64, chord: f64, nu: f64) -> f64 {
    u * chord / nu
}

/// Constants of the desk-scale solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskSolverConfig {
    /// Turbulent flat-plate skin friction Cf = a·Re^(−b).
    pub cf_coefficient: f64,
    pub cf_exponent: f64,
    /// Induced/profile drag factor k in k·Cl².
    pub induced_factor: f64,
    pub iterations: u32,
    /// Every how many iterations a history row is written.
    pub write_interval: u32,
}

impl Default for DeskSolverConfig {
    fn default() -> Self {
        Self {
            cf_coefficient: 0.074,
            cf_exponent: 0.2,
            induced_factor: 0.01,
            iterations: 3000,
            write_interval: 10,
        }
    }
}

/// Thin-airfoil camber integrals: zero-lift angle (rad) and quarter-chord Cm.
pub fn thin_airfoil(spec: &AirfoilSpec) -> (f64, f64) {
    if spec.m == 0.0 {
        return (0.0, 0.0);
    }
    const N: usize = 4000;
    let (mut i0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    let h = PI / N as f64;
    for k in 0..N {
        let th = (k as f64 + 0.5) * h;
        let x = 0.5 * (1.0 - th.cos());
        let (_, slope) = geometry::camber(x, spec.m, spec.p).expect("x within [0, 1]");
        i0 += slope * (th.cos() - 1.0) * h;
        a1 += slope * th.cos() * h;
        a2 += slope * (2.0 * th).cos() * h;
    }
    let alpha_l0 = -i0 / PI;
    let (a1, a2) = (2.0 * a1 / PI, 2.0 * a2 / PI);
    (alpha_l0, 0.25 * PI * (a2 - a1))
}

/// One written iteration of the coefficient history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub iteration: u32,
    pub cd: f64,
    pub cl: f64,
    pub cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskSolution {
    pub flow: FlowResult,
    pub history: Vec<CoefficientRow>,
    pub alpha_l0_deg: f64,
}

/// Deterministic analytic stand-in for a RANS run.
pub fn run_desk_solver(
    config: &CaseConfig,
    airfoil: &AirfoilSpec,
    desk: &DeskSolverConfig,
) -> DeskSolution {
    let (alpha_l0, cm) = thin_airfoil(airfoil);
    let alpha = config.aoa.to_radians();
    let re = config.reynolds;
    let cl = 2.0 * PI * (alpha - alpha_l0);
    let cf = desk.cf_coefficient * re.powf(-desk.cf_exponent);
    let t = airfoil.t;
    let form = 1.0 + 2.0 * t + 60.0 * t.powi(4);
    let cd = 2.0 * cf * form + desk.induced_factor * cl * cl;
    let delta = 0.37 * config.chord * re.powf(-0.2);
    let delta_star = delta / 8.0;
    let theta = 7.0 * delta / 72.0;
    let flow = FlowResult::from_coefficients(cl, cd, cm, delta_star, theta, true, desk.iterations);

    let mut history = Vec::new();
    let step = desk.write_interval.max(1);
    let mut it = step;
    while it < desk.iterations {
        let s = f64::from(it);
        let relax = 1.0 - (-s / 250.0).exp() * (s / 35.0).cos();
        history.push(CoefficientRow {
            iteration: it,
            cd: cd * (1.0 + 0.5 * (-s / 300.0).exp()),
            cl: cl * relax,
            cm: cm * relax,
        });
        it += step;
    }
    history.push(CoefficientRow {
        iteration: desk.iterations,
        cd,
        cl,
        cm,
    });
    DeskSolution {
        flow,
        history,
        alpha_l0_deg: alpha_l0.to_degrees(),
    }
}

/// The `coefficient.dat` text: comment header, then whitespace-separated rows.
pub fn coefficient_dat(history: &[CoefficientRow]) -> String {
    let mut s = String::new();
    s.push_str("# Force coefficients\n# dragDir (1 0 0)\n# liftDir (0 1 0)\n# CofR (0.025 0 0)\n");
    s.push_str("# Time\tCd\tCd(f)\tCd(r)\tCl\tCl(f)\tCl(r)\tCmPitch\tCmRoll\tCmYaw\tCs\n");
    for r in history {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t0",
            r.iteration,
            r.cd,
            0.5 * r.cd,
            0.5 * r.cd,
            r.cl,
            0.5 * r.cl + r.cm,
            0.5 * r.cl - r.cm,
            r.cm
        );
    }
    s
}

/// Final (Cd, Cl, Cm) from a coefficient table, columns located by header name.
pub fn parse_coefficients(text: &str) -> Result<(f64, f64, f64, u32), AeroError> {
    let mut header: Option<Vec<String>> = None;
    let mut last: Option<Vec<String>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let cols: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if cols.first().map(String::as_str) == Some("Time") {
                header = Some(cols);
            }
            continue;
        }
        last = Some(line.split_whitespace().map(str::to_string).collect());
    }
    let header = header.ok_or_else(|| AeroError::Parse("no '# Time' header".into()))?;
    let row = last.ok_or_else(|| AeroError::MissingOutput(COEFFICIENT_PATH.into()))?;
    let col = |name: &str| -> Result<f64, AeroError> {
        let i = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AeroError::Parse(format!("no {name} column")))?;
        let raw = row
            .get(i)
            .ok_or_else(|| AeroError::Parse(format!("short row, no {name}")))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| AeroError::Parse(format!("{name} = '{raw}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AeroError::NonFinite {
                column: name.to_string(),
            })
        }
    };
    let iteration = row
        .first()
        .and_then(|t| t.parse::<f64>().ok())
        .map_or(0, |t| t as u32);
    Ok((col("Cd")?, col("Cl")?, col("CmPitch")?, iteration))
}

/// Flat-plate-shaped chordwise loading carrying `cl`: ΔCp = (2Cl/π)·√((1−x)/x).
pub fn cp_distribution(cl: f64, stations: &[f64]) -> Vec<(f64, f64, f64)> {
    stations
        .iter()
        .filter(|&&x| x > 0.0 && x < 1.0)
        .map(|&x| {
            let dcp = 2.0 * cl / PI * ((1.0 - x) / x).sqrt();
            (x, -0.5 * dcp, 0.5 * dcp)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayerDoc {
    /// "desk" (correlation stand-in) or "cfd" (extracted from a solver run).
    pub source: String,
    pub delta_star: f64,
    pub theta: f64,
    pub shape_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpmInputDoc {
    pub case_id: String,
    pub airfoil: String,
    pub chord: f64,
    pub span: f64,
    pub velocity: f64,
    pub aoa: f64,
    pub reynolds: f64,
    pub kinematic_viscosity: f64,
    pub tripped: bool,
    /// Suction/pressure δ* from a CFD solution; correlations are used when absent.
    pub delta_star_suction: Option<f64>,
    pub delta_star_pressure: Option<f64>,
}

fn publish(
    ws: &ProjectWorkspace,
    case_id: &str,
    rel: &str,
    role: AgentRole,
    bytes: &[u8],
) -> Result<(), AeroError> {
    ws.publish(ArtifactRecord::new(format!("{case_id}/{rel}"), role), bytes)?;
    Ok(())
}

/// Geometry agent: airfoil outline and Gmsh description for one case.
pub fn build_geometry(ws: &ProjectWorkspace, config: &CaseConfig) -> Result<(), AeroError> {
    let spec = AirfoilSpec::parse(&config.airfoil)?;
    let coords = geometry::generate(&spec, 121)?;
    ws.case_dir(&config.case_id)?;
    let g = AgentRole::Geometry;
    publish(
        ws,
        &config.case_id,
        "airfoil.geo",
        g,
        coords.to_geo(config.chord, config.chord / 100.0).as_bytes(),
    )?;
    publish(
        ws,
        &config.case_id,
        "airfoil.dat",
        g,
        coords.to_selig().as_bytes(),
    )?;
    Ok(())
}

fn foam_header(class: &str, object: &str) -> String {
    format!(
        "FoamFile\n{{\n    version     2.0;\n    format      ascii;\n    class       {class};\n    object      {object};\n}}\n\n"
    )
}

fn boundary_field(params: &SolverParams, inlet: &str, outlet: &str, wall: &str) -> String {
    let mut s = String::from("boundaryField\n{\n");
    for (patch, kind) in &params.patch_types {
        let body = match (patch.as_str(), kind.as_str()) {
            (_, "empty") => "type empty;".to_string(),
            ("inlet", _) => inlet.to_string(),
            ("outlet", _) => outlet.to_string(),
            (_, "wall") => wall.to_string(),
            _ => "type zeroGradient;".to_string(),
        };
        let _ = writeln!(s, "    {patch}\n    {{\n        {body}\n    }}");
    }
    s.push_str("}\n");
    s
}

/// Aerodynamics agent: solver configuration tree, mesh request and run script.
pub fn build_case(
    ws: &ProjectWorkspace,
    config: &CaseConfig,
    params: &SolverParams,
    desk: &DeskSolverConfig,
) -> Result<(), AeroError> {
    let bad = config.violations();
    if !bad.is_empty() {
        return Err(AeroError::InvalidCase(
            bad.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let id = &config.case_id;
    let a = AgentRole::Aerodynamics;
    ws.case_dir(id)?;
    let [ux, uy, uz] = inlet_velocity(config.velocity, config.aoa);

    let nodes = (42_500.0 / params.refinement.max(1e-3)).round();
    let mesh = format!(
        "# Mesh request\n\n- case: {id}\n- topology: C-type structured\n- target nodes: 40000-45000 (scaled target {nodes})\n\
         - refinement scale: {}\n- first-cell height: wall-resolved, y+ ~ 1\n- geometry: airfoil.geo\n- quality check: checkMesh, refineWallLayer on failure\n",
        params.refinement
    );
    publish(ws, id, "mesh.md", a, mesh.as_bytes())?;

    let transport = format!(
        "{}transportModel  Newtonian;\nnu              {};\n",
        foam_header("dictionary", "transportProperties"),
        config.kinematic_viscosity
    );
    publish(
        ws,
        id,
        "constant/transportProperties",
        a,
        transport.as_bytes(),
    )?;
    let turb = format!(
        "{}simulationType  RAS;\nRAS\n{{\n    model           SpalartAllmaras;\n    turbulence      on;\n}}\n",
        foam_header("dictionary", "momentumTransport")
    );
    publish(ws, id, "constant/momentumTransport", a, turb.as_bytes())?;

    let control = format!(
        "{}application     simpleFoam;\nstartTime       0;\nendTime         {};\ndeltaT          {};\nwriteInterval   {};\n\
         functions\n{{\n    forceCoeffs\n    {{\n        type            forceCoeffs;\n        patches         (walls);\n\
         magUInf         {};\n        lRef            {};\n        Aref            {};\n        liftDir         ({} {} 0);\n\
         dragDir         ({} {} 0);\n        CofR            ({} 0 0);\n    }}\n}}\n",
        foam_header("dictionary", "controlDict"),
        desk.iterations,
        params.time_step,
        desk.iterations,
        config.velocity,
        config.chord,
        config.chord,
        -uy / config.velocity,
        ux / config.velocity,
        ux / config.velocity,
        uy / config.velocity,
        0.25 * config.chord
    );
    publish(ws, id, "system/controlDict", a, control.as_bytes())?;
    let solution = format!(
        "{}SIMPLE\n{{\n    nNonOrthogonalCorrectors 0;\n    consistent      no;\n}}\n\
         relaxationFactors\n{{\n    fields\n    {{\n        p               {};\n    }}\n    equations\n    {{\n        U               {};\n        nuTilda         {};\n    }}\n}}\n",
        foam_header("dictionary", "fvSolution"),
        params.relax_p,
        params.relax_u,
        params.relax_u
    );
    publish(ws, id, "system/fvSolution", a, solution.as_bytes())?;
    let schemes = format!(
        "{}ddtSchemes {{ default steadyState; }}\ngradSchemes {{ default Gauss linear; }}\n\
         divSchemes {{ default none; div(phi,U) bounded Gauss linearUpwind grad(U); div(phi,nuTilda) bounded Gauss linearUpwind grad(nuTilda); }}\n\
         laplacianSchemes {{ default Gauss linear corrected; }}\n",
        foam_header("dictionary", "fvSchemes")
    );
    publish(ws, id, "system/fvSchemes", a, schemes.as_bytes())?;

    let u_field = format!(
        "{}dimensions      [0 1 -1 0 0 0 0];\ninternalField   uniform ({ux} {uy} {uz});\n{}",
        foam_header("volVectorField", "U"),
        boundary_field(
            params,
            &format!("type fixedValue; value uniform ({ux} {uy} {uz});"),
            "type zeroGradient;",
            "type noSlip;"
        )
    );
    publish(ws, id, "0/U", a, u_field.as_bytes())?;
    let p_field = format!(
        "{}dimensions      [0 2 -2 0 0 0 0];\ninternalField   uniform 0;\n{}",
        foam_header("volScalarField", "p"),
        boundary_field(
            params,
            "type zeroGradient;",
            "type fixedValue; value uniform 0;",
            "type zeroGradient;"
        )
    );
    publish(ws, id, "0/p", a, p_field.as_bytes())?;
    let nu_tilda = 3.0 * config.kinematic_viscosity;
    let nt_field = format!(
        "{}dimensions      [0 2 -1 0 0 0 0];\ninternalField   uniform {nu_tilda};\n{}",
        foam_header("volScalarField", "nuTilda"),
        boundary_field(
            params,
            &format!("type fixedValue; value uniform {nu_tilda};"),
            "type zeroGradient;",
            "type fixedValue; value uniform 0;"
        )
    );
    publish(ws, id, "0/nuTilda", a, nt_field.as_bytes())?;

    let allrun =
        "#!/bin/sh\ncd \"${0%/*}\" || exit 1\ngmsh -3 airfoil.geo -o airfoil.msh > log.gmsh 2>&1\n\
                  gmshToFoam airfoil.msh > log.gmshToFoam 2>&1\ncheckMesh > log.checkMesh 2>&1\n\
                  simpleFoam > log.simpleFoam 2>&1\nfoamToVTK -latestTime > log.foamToVTK 2>&1\n";
    publish(ws, id, "Allrun", a, allrun.as_bytes())?;
    Ok(())
}

/// Desk solver run plus every file the acoustics agent consumes.
pub fn run_desk_case(
    ws: &ProjectWorkspace,
    config: &CaseConfig,
    span: f64,
    desk: &DeskSolverConfig,
) -> Result<DeskSolution, AeroError> {
    let spec = AirfoilSpec::parse(&config.airfoil)?;
    let sol = run_desk_solver(config, &spec, desk);
    let id = &config.case_id;
    let a = AgentRole::Aerodynamics;
    publish(
        ws,
        id,
        COEFFICIENT_PATH,
        a,
        coefficient_dat(&sol.history).as_bytes(),
    )?;
    write_flow_documents(ws, config, span, &sol.flow, "desk")?;
    Ok(sol)
}

fn write_flow_documents(
    ws: &ProjectWorkspace,
    config: &CaseConfig,
    span: f64,
    flow: &FlowResult,
    source: &str,
) -> Result<(), AeroError> {
    let id = &config.case_id;
    let a = AgentRole::Aerodynamics;
    let bl = BoundaryLayerDoc {
        source: source.to_string(),
        delta_star: flow.delta_star,
        theta: flow.theta,
        shape_factor: flow.shape_factor,
    };
    publish(ws, id, BOUNDARY_LAYER_JSON, a, &to_json(&bl)?)?;
    let cfd = source == "cfd";
    let bpm = BpmInputDoc {
        case_id: id.clone(),
        airfoil: config.airfoil.clone(),
        chord: config.chord,
        span,
        velocity: config.velocity,
        aoa: config.aoa,
        reynolds: config.reynolds,
        kinematic_viscosity: config.kinematic_viscosity,
        tripped: true,
        delta_star_suction: cfd.then_some(flow.delta_star),
        delta_star_pressure: cfd.then_some(flow.delta_star),
    };
    publish(ws, id, BPM_INPUT_JSON, a, &to_json(&bpm)?)?;
    let [ux, uy, uz] = inlet_velocity(config.velocity, config.aoa);
    let field = serde_json::json!({
        "case_id": id,
        "inlet_velocity": [ux, uy, uz],
        "reynolds": config.reynolds,
        "mach": config.velocity / SPEED_OF_SOUND,
        "cl": flow.cl,
        "cd": flow.cd,
        "cm": flow.cm,
    });
    publish(ws, id, FLOW_FIELD_JSON, a, &to_json(&field)?)?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, AeroError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| AeroError::Parse(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

/// Reads the final coefficients and boundary layer of a case, and writes the
/// integrated CSVs and VTK snapshot.
pub fn extract_results(ws: &ProjectWorkspace, case_id: &str) -> Result<FlowResult, AeroError> {
    let a = AgentRole::Aerodynamics;
    let coeff_path = format!("{case_id}/{COEFFICIENT_PATH}");
    let text = match ws.read_string_for(a, &coeff_path) {
        Ok(t) => t,
        Err(WorkspaceError::MissingArtifact(p)) => return Err(AeroError::MissingOutput(p)),
        Err(e) => return Err(e.into()),
    };
    if text.lines().all(|l| l.trim().is_empty()) {
        return Err(AeroError::MissingOutput(coeff_path));
    }
    let (cd, cl, cm, iterations) = parse_coefficients(&text)?;
    let bl_bytes = ws.read_for(a, &format!("{case_id}/{BOUNDARY_LAYER_JSON}"))?;
    let bl: BoundaryLayerDoc =
        serde_json::from_slice(&bl_bytes).map_err(|e| AeroError::Parse(e.to_string()))?;
    let flow = FlowResult::from_coefficients(cl, cd, cm, bl.delta_star, bl.theta, true, iterations);
    if !(cd > 0.0) {
        return Err(AeroError::NonFinite {
            column: "Cd".into(),
        });
    }

    let forces = format!(
        "case_id,cl,cd,cm,lift_to_drag,iterations,converged\n{case_id},{},{},{},{},{},{}\n",
        flow.cl, flow.cd, flow.cm, flow.lift_to_drag, flow.iterations, flow.converged
    );
    publish(
        ws,
        case_id,
        &format!("{INTEGRATED_DIR}/force_coefficients.csv"),
        a,
        forces.as_bytes(),
    )?;
    let blc = format!(
        "case_id,delta_star_m,theta_m,shape_factor,source\n{case_id},{},{},{},{}\n",
        flow.delta_star, flow.theta, flow.shape_factor, bl.source
    );
    publish(
        ws,
        case_id,
        &format!("{INTEGRATED_DIR}/boundary_layer.csv"),
        a,
        blc.as_bytes(),
    )?;

    let stations = geometry::cosine_stations(61);
    let cp = cp_distribution(cl, &stations);
    let mut cps = String::from("x_c,cp_upper,cp_lower\n");
    for (x, u, l) in &cp {
        let _ = writeln!(cps, "{x},{u},{l}");
    }
    publish(
        ws,
        case_id,
        &format!("{INTEGRATED_DIR}/cp_data.csv"),
        a,
        cps.as_bytes(),
    )?;

    let points: Vec<[f64; 3]> = cp.iter().map(|(x, _, _)| [*x, 0.0, 0.0]).collect();
    let values: Vec<f64> = cp.iter().map(|(_, u, l)| l - u).collect();
    let vtk = vtk_polydata(
        &format!("{case_id} chordwise loading"),
        &points,
        "deltaCp",
        &values,
    );
    publish(
        ws,
        case_id,
        "VTK/openfoam_3000/walls.vtk",
        a,
        vtk.as_bytes(),
    )?;
    let vtm = "<?xml version=\"1.0\"?>\n<VTKFile type=\"vtkMultiBlockDataSet\" version=\"1.0\">\n  <vtkMultiBlockDataSet>\n    \
               <DataSet index=\"0\" name=\"walls\" file=\"openfoam_3000/walls.vtk\"/>\n  </vtkMultiBlockDataSet>\n</VTKFile>\n";
    publish(ws, case_id, "VTK/openfoam_3000.vtm", a, vtm.as_bytes())?;
    let series = "{\n  \"file-series-version\" : \"1.0\",\n  \"files\" : [\n    { \"name\" : \"openfoam_3000.vtm\", \"time\" : 3000 }\n  ]\n}\n";
    publish(ws, case_id, "VTK/openfoam.vtm.series", a, series.as_bytes())?;
    Ok(flow)
}

/// Container invocation for the external solver path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// `{case_dir}` and `{case_id}` are substituted.
    pub command_template: String,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            command_template: "docker run --rm -v {case_dir}:/case -w /case openfoam/openfoam10-paraview56 ./Allrun"
                .to_string(),
        }
    }
}

impl AdapterConfig {
    pub fn render(&self, case_dir: &Path, case_id: &str) -> String {
        self.command_template
            .replace("{case_dir}", &case_dir.display().to_string())
            .replace("{case_id}", case_id)
    }

    /// Runs the rendered command, then takes ownership of the solver's
    /// coefficient table so it enters the ledger.
    pub fn run(
        &self,
        ws: &ProjectWorkspace,
        config: &CaseConfig,
        span: f64,
    ) -> Result<FlowResult, AeroError> {
        let dir = ws.case_dir(&config.case_id)?;
        let cmd = self.render(&dir, &config.case_id);
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| AeroError::Solver {
                logs: e.to_string(),
            })?;
        let mut logs = String::from_utf8_lossy(&out.stdout).to_string();
        logs.push_str(&String::from_utf8_lossy(&out.stderr));
        for entry in ["log.gmshToFoam", "log.checkMesh", "log.simpleFoam"] {
            if let Ok(t) = std::fs::read_to_string(dir.join(entry)) {
                logs.push_str(&t);
            }
        }
        if !out.status.success() {
            return Err(AeroError::Solver { logs });
        }
        let raw = std::fs::read(dir.join(COEFFICIENT_PATH))
            .map_err(|_| AeroError::MissingOutput(COEFFICIENT_PATH.into()))?;
        let text = String::from_utf8_lossy(&raw).to_string();
        let (cd, cl, cm, iterations) = parse_coefficients(&text)?;
        publish(
            ws,
            &config.case_id,
            COEFFICIENT_PATH,
            AgentRole::Aerodynamics,
            &raw,
        )?;
        let spec = AirfoilSpec::parse(&config.airfoil)?;
        let desk = run_desk_solver(config, &spec, &DeskSolverConfig::default());
        let flow = FlowResult::from_coefficients(
            cl,
            cd,
            cm,
            desk.flow.delta_star,
            desk.flow.theta,
            true,
            iterations,
        );
        write_flow_documents(ws, config, span, &flow, "desk")?;
        Ok(flow)
    }
}
