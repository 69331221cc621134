use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aeroforge::aero::AdapterConfig;
use aeroforge::model::RequirementSpec;
use aeroforge::pipeline::{
    self, Fault, FaultPlan, PipelineError, PipelineOutcome, ReportFormat, RunOptions, SolverKind,
    EXIT_EXECUTION, EXIT_VALIDATION,
};
use aeroforge::planner::{Phase, PlannerBackend, RemotePlanner, ScriptedPlanner};

/// Multi-agent aero-acoustic-structural design pipeline.
///
/// Exit codes: 0 success, 2 invalid input, 3 execution failure after
/// retries, 4 interrupted (a checkpoint was written; use `resume`).
#[derive(Debug, Parser)]
#[command(name = "aeroforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan and execute a project from a requirement document.
    Run(RunArgs),
    /// Continue a project from its newest valid checkpoint.
    Resume(ResumeArgs),
    /// Regenerate result.md and the multi-case summaries.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlannerChoice {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverChoice {
    Desk,
    Adapter,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatChoice {
    Md,
    Csv,
}

#[derive(Debug, Args)]
struct ExecArgs {
    /// Concurrent task budget.
    #[arg(long, env = "AEROFORGE_MAX_PARALLEL", default_value_t = 4)]
    max_parallel: usize,
    /// Run one task at a time (deterministic ordering).
    #[arg(long, env = "AEROFORGE_SERIAL")]
    serial: bool,
    /// Checkpoint and exit with code 4 once this phase is complete.
    #[arg(long, env = "AEROFORGE_STOP_AFTER", value_parser = parse_phase)]
    stop_after: Option<Phase>,
    /// Inject failures: `task-pattern=kind[:count]`, e.g. `aero:sim_*=solver_divergence:1`.
    #[arg(long = "fault", env = "AEROFORGE_FAULTS", value_delimiter = ',', value_parser = Fault::parse)]
    faults: Vec<Fault>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Requirement document (JSON).
    spec: PathBuf,
    #[arg(long, env = "AEROFORGE_ROOT", default_value = "aeroforge-project")]
    root: PathBuf,
    #[arg(
        long,
        env = "AEROFORGE_PLANNER",
        value_enum,
        default_value = "scripted"
    )]
    planner: PlannerChoice,
    /// Endpoint of the remote planner.
    #[arg(long, env = "AEROFORGE_PLANNER_URL")]
    planner_url: Option<String>,
    #[arg(long, env = "AEROFORGE_SOLVER", value_enum, default_value = "desk")]
    solver: SolverChoice,
    /// Command template for `--solver adapter`; `{case_dir}` and `{case_id}` are substituted.
    #[arg(long, env = "AEROFORGE_ADAPTER_COMMAND")]
    adapter_command: Option<String>,
    #[arg(long, env = "AEROFORGE_SEED", default_value_t = 42)]
    seed: u64,
    /// CSV of per-case coefficients and OASPL used for airfoil selection
    /// instead of solver output.
    #[arg(long, env = "AEROFORGE_INJECT_RESULTS")]
    inject_results: Option<PathBuf>,
    /// Replace an existing project at the root.
    #[arg(long, env = "AEROFORGE_FORCE")]
    force: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Debug, Args)]
struct ResumeArgs {
    #[arg(long, env = "AEROFORGE_ROOT", default_value = "aeroforge-project")]
    root: PathBuf,
    /// Restore the newest valid checkpoint (the only supported source).
    #[arg(long, default_value_t = true)]
    from_last: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, env = "AEROFORGE_ROOT", default_value = "aeroforge-project")]
    root: PathBuf,
    #[arg(
        long,
        env = "AEROFORGE_REPORT_FORMAT",
        value_enum,
        default_value = "md"
    )]
    format: FormatChoice,
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    Phase::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Phase::ALL.iter().map(|p| p.as_str()).collect();
        format!("unknown phase '{s}' (expected one of {})", names.join(", "))
    })
}

fn options(exec: &ExecArgs) -> RunOptions {
    let opts = RunOptions {
        max_parallel: if exec.serial {
            1
        } else {
            exec.max_parallel.max(1)
        },
        stop_after: exec.stop_after,
        faults: FaultPlan {
            faults: exec.faults.clone(),
        },
        ..Default::default()
    };
    let flag = Arc::clone(&opts.interrupt);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        eprintln!("warning: no interrupt handler: {e}");
    }
    opts
}

fn load_spec(path: &Path) -> Result<RequirementSpec, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| format!("invalid requirement document {}: {e}", path.display()))
}

fn summarize(outcome: &PipelineOutcome) -> i32 {
    let s = &outcome.state;
    if let Some(sel) = &s.selection {
        println!(
            "winner: {} (case {}, J = {:.4})",
            sel.winner.airfoil, sel.winner.case_id, sel.winner.j
        );
    }
    if !s.structures.is_empty() {
        println!("structural sweep: {} configurations", s.structures.len());
    }
    if let Some(o) = &s.optimization {
        println!(
            "optimum: {:.3} MPa at {:.2} g, improvement {:.2}%, Pareto set {}",
            o.best.stress,
            o.best.mass,
            100.0 * o.improvement,
            o.pareto.len()
        );
    }
    for (id, e) in &s.failures {
        eprintln!("failed: {id}: {e}");
    }
    println!("status: {:?}", outcome.status);
    outcome.status.exit_code()
}

fn report_error(e: &PipelineError) -> i32 {
    match e {
        PipelineError::Validation(v) => {
            eprintln!("requirement is invalid:");
            for x in v {
                eprintln!("  - {x}");
            }
        }
        other => eprintln!("error: {other}"),
    }
    e.exit_code()
}

fn cmd_run(args: RunArgs) -> i32 {
    let spec = match load_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_VALIDATION;
        }
    };
    let mut opts = options(&args.exec);
    opts.seed = args.seed;
    opts.force = args.force;
    opts.solver = match args.solver {
        SolverChoice::Desk => SolverKind::Desk,
        SolverChoice::Adapter => SolverKind::Adapter(match args.adapter_command {
            Some(t) => AdapterConfig {
                command_template: t,
            },
            None => AdapterConfig::default(),
        }),
    };
    if let Some(path) = &args.inject_results {
        match std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Fixture(format!("cannot read {}: {e}", path.display())))
            .and_then(|t| pipeline::parse_injected(&t))
        {
            Ok(rows) => opts.injected = Some(rows),
            Err(e) => return report_error(&e),
        }
    }
    let backend: Box<dyn PlannerBackend> = match args.planner {
        PlannerChoice::Scripted => Box::new(ScriptedPlanner),
        PlannerChoice::Remote => match args
            .planner_url
            .map(RemotePlanner::new)
            .or_else(RemotePlanner::from_env)
        {
            Some(mut p) => {
                p.token = p
                    .token
                    .or_else(|| std::env::var(aeroforge::planner::ENV_PLANNER_TOKEN).ok());
                Box::new(p)
            }
            None => {
                eprintln!("--planner remote needs --planner-url or AEROFORGE_PLANNER_URL");
                return EXIT_VALIDATION;
            }
        },
    };
    match pipeline::run(&spec, &args.root, backend.as_ref(), opts) {
        Ok(o) => summarize(&o),
        Err(e) => report_error(&e),
    }
}

fn cmd_resume(args: ResumeArgs) -> i32 {
    match pipeline::resume(&args.root, options(&args.exec)) {
        Ok(o) => summarize(&o),
        Err(e) => report_error(&e),
    }
}

fn cmd_report(args: ReportArgs) -> i32 {
    let format = match args.format {
        FormatChoice::Md => ReportFormat::Markdown,
        FormatChoice::Csv => ReportFormat::Csv,
    };
    match pipeline::report(&args.root, format) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_EXECUTION
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Report(a) => cmd_report(a),
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
