mod common;

use std::process::Command;

use common::{cli, code, fixture};
use tempfile::TempDir;

fn spec() -> String {
    fixture("uav_wing.json").to_string_lossy().into_owned()
}

#[test]
fn invalid_spec_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("p");
    let bad = fixture("invalid_spec.json");
    let out = cli(&[
        "run",
        bad.to_str().unwrap(),
        "--root",
        root.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("chord"), "{err}");
    assert!(!root.join("checkpoints").exists());
}

#[test]
fn unreadable_spec_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("p");
    let out = cli(&[
        "run",
        "/nonexistent/spec.json",
        "--root",
        root.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn stop_after_then_resume_completes() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("p");
    let r = root.to_str().unwrap();
    let out = cli(&[
        "run",
        &spec(),
        "--root",
        r,
        "--serial",
        "--stop-after",
        "acoustics",
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));

    let md = cli(&["report", "--root", r]);
    assert_eq!(code(&md), 0);
    let text = String::from_utf8_lossy(&md.stdout);
    assert!(
        text.contains("| acoustics | 12 | 12 | complete |"),
        "{text}"
    );
    assert!(
        text.contains("| structures |") && text.contains("MISSING"),
        "{text}"
    );

    let out = cli(&["resume", "--root", r, "--serial"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("winner: NACA4412"), "{stdout}");
    assert!(root.join("optimization/pareto_front.csv").is_file());
}

#[test]
fn resume_without_project_fails() {
    let dir = TempDir::new().unwrap();
    let out = cli(&[
        "resume",
        "--root",
        dir.path().join("nothing").to_str().unwrap(),
    ]);
    assert_ne!(code(&out), 0);
    assert_ne!(code(&out), 4);
}

#[test]
fn report_on_empty_root_fails() {
    let dir = TempDir::new().unwrap();
    let out = cli(&["report", "--root", dir.path().to_str().unwrap()]);
    assert_ne!(code(&out), 0);
}

#[test]
fn csv_report_lists_all_cases() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("p");
    let r = r.to_str().unwrap();
    assert_eq!(
        code(&cli(&[
            "run",
            &spec(),
            "--root",
            r,
            "--serial",
            "--stop-after",
            "acoustics"
        ])),
        4
    );
    let out = cli(&["report", "--root", r, "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut blocks = text.split("\n\n");
    let aero: Vec<&str> = blocks.next().unwrap().lines().collect();
    assert_eq!(aero[0], aeroforge::pipeline::AERO_COLUMNS.join(","));
    assert_eq!(aero.len(), 13);
    assert!(text.contains(&aeroforge::pipeline::ACOUSTIC_COLUMNS.join(",")));
}

#[test]
fn injected_results_drive_selection() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("p");
    let inject = fixture("reference_selection.csv");
    let out = cli(&[
        "run",
        &spec(),
        "--root",
        r.to_str().unwrap(),
        "--serial",
        "--stop-after",
        "selection",
        "--inject-results",
        inject.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("winner: NACA4412 (case sim_NACA4412_25ms_aoa5, J = 0.97"),
        "{stdout}"
    );
}

#[test]
fn flag_overrides_environment() {
    let dir = TempDir::new().unwrap();
    let env_root = dir.path().join("from_env");
    let flag_root = dir.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_aeroforge"))
        .args(["run", &spec(), "--serial", "--stop-after", "geometry"])
        .env("AEROFORGE_ROOT", &env_root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    assert!(env_root.join("checkpoints").is_dir());

    let out = Command::new(env!("CARGO_BIN_EXE_aeroforge"))
        .args([
            "run",
            &spec(),
            "--serial",
            "--stop-after",
            "geometry",
            "--root",
        ])
        .arg(&flag_root)
        .env("AEROFORGE_ROOT", dir.path().join("ignored"))
        .env("AEROFORGE_STOP_AFTER", "aero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    assert!(flag_root.join("checkpoints").is_dir());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn rerun_into_existing_project_needs_force() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("p");
    let r = r.to_str().unwrap();
    assert_eq!(
        code(&cli(&[
            "run",
            &spec(),
            "--root",
            r,
            "--serial",
            "--stop-after",
            "geometry"
        ])),
        4
    );
    assert_ne!(
        code(&cli(&[
            "run",
            &spec(),
            "--root",
            r,
            "--serial",
            "--stop-after",
            "geometry"
        ])),
        0
    );
    assert_eq!(
        code(&cli(&[
            "run",
            &spec(),
            "--root",
            r,
            "--serial",
            "--stop-after",
            "geometry",
            "--force"
        ])),
        4
    );
}

#[test]
fn persistent_fault_fails_with_execution_code() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("p");
    let out = cli(&[
        "run",
        &spec(),
        "--root",
        r.to_str().unwrap(),
        "--serial",
        "--stop-after",
        "aero",
        "--fault",
        "aero:sim_NACA0012_25ms_aoa0=resource_exhaustion:9",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aero:sim_NACA0012_25ms_aoa0"));
}
