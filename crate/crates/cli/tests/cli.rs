//! End-to-end tests of the `varslide` binary: exit codes, summary
//! lines, artifact files, and determinism across thread counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_varslide")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn varslide")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn list_prints_every_experiment() {
    let output = run(&["--list"]);
    assert!(output.status.success());
    let text = stdout(&output);
    for name in [
        "energy", "growth", "slide", "compare", "improve", "probe", "exa", "exa2", "abs",
        "solve", "onedim", "accept-all",
    ] {
        assert!(text.contains(name), "--list is missing {name}:\n{text}");
    }
}

#[test]
fn describe_knows_slide_and_rejects_unknown_names() {
    let output = run(&["--describe", "slide"]);
    assert!(output.status.success());
    assert!(stdout(&output).contains("second energy difference"));

    let output = run(&["--describe", "nonsense"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("unknown experiment"));
}

#[test]
fn abs_config_matches_the_quoted_energies() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_config("abs.toml");
    let output = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("abs PASS E_u=4.000 E_v=1.778"), "summary was: {text}");
    assert!(dir.path().join("abs.csv").is_file());
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("abs PASS"));
}

#[test]
fn empty_radii_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty-radii.toml");
    std::fs::write(
        &config,
        r#"
[experiment]
name = "energy"

[grid]
half_widths = [1.0, 1.0]
spacing = 0.1

[integrand]
name = "dirichlet"

[field]
kind = "linear"
slope = [1.0, 0.0]

[energy]
radii = []
"#,
    )
    .unwrap();
    let output = run(&["--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("radii list empty"), "stderr: {}", stderr(&output));
}

#[test]
fn unsupported_gate_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad-gate.toml");
    std::fs::write(
        &config,
        r#"
[experiment]
name = "energy"

[grid]
half_widths = [1.0]
spacing = 0.1

[integrand]
name = "dirichlet"

[field]
kind = "constant"
value = 0.0

[energy]
radii = [1.0]

[assert]
converged = true
"#,
    )
    .unwrap();
    let output = run(&["--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("not supported"), "stderr: {}", stderr(&output));
}

#[test]
fn failed_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("too-tight.toml");
    // The disc energy of a unit-slope linear field is about pi/2, well
    // outside the demanded window.
    std::fs::write(
        &config,
        r#"
[experiment]
name = "energy"

[grid]
half_widths = [2.0, 2.0]
spacing = 0.05

[integrand]
name = "dirichlet"

[field]
kind = "linear"
slope = [1.0, 0.0]

[energy]
radii = [1.0]

[assert]
energy_between = [100.0, 101.0]
"#,
    )
    .unwrap();
    let output = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1), "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("energy FAIL"));
    assert!(stderr(&output).contains("gate failed"));
}

#[test]
fn solve_then_onedim_chain_through_a_field_file() {
    let dir = tempfile::tempdir().unwrap();
    let solve = dir.path().join("solve.toml");
    std::fs::write(
        &solve,
        r#"
[experiment]
name = "solve"

[grid]
half_widths = [6.0]
spacing = 0.1
split = 1

[integrand]
name = "allen_cahn"

[field]
kind = "tanh_interface"

[solver]
dt = 2e-3
max_steps = 30000
tolerance = 1e-8
bc = ["fixed"]

[assert]
converged = true
residual_at_most = 1e-8
"#,
    )
    .unwrap();
    let onedim = dir.path().join("onedim.toml");
    std::fs::write(
        &onedim,
        r#"
[experiment]
name = "onedim"

[field]
kind = "file"
path = "solved_field.txt"

[onedim]
bins = 500
axis = 0

[assert]
onedim_residual_at_most = 1e-8
mixed_lines = 0
direction_axis = 0
direction_cos_at_least = 0.99
"#,
    )
    .unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let output = run(&["--config", solve.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    assert!(dir.path().join("solved_field.txt").is_file());

    // The onedim config resolves its field path against its own
    // directory, which is also the artifact directory here.
    let output = run(&["--config", onedim.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("onedim PASS"));
}

#[test]
fn thread_flag_does_not_change_artifacts() {
    let one = tempfile::tempdir().unwrap();
    let eight = tempfile::tempdir().unwrap();
    let config = repo_config("compare-linears.toml");
    for (dir, threads) in [(&one, "1"), (&eight, "8")] {
        let output = run(&[
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    }
    let a = std::fs::read(one.path().join("compare.csv")).unwrap();
    let b = std::fs::read(eight.path().join("compare.csv")).unwrap();
    assert_eq!(a, b, "compare.csv differs between thread counts");
}
