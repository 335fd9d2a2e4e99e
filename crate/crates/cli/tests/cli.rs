use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bonus-malus"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn golden(name: &str) -> String {
    fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const FINE_RELATIVITIES: &str = r#"
lambda = 0.1
thresholds = [0.3, 1.2, 2.8]

[severity]
kind = "exponential"
mean = 2.0

[mixing]
kind = "exponential_unit"

[scale]
levels = 4
penalties = [1, 2, 3, 3]
"#;

const COARSE_MANUAL: &str = r#"
lambda = 0.1
thresholds = [1.0, 2.0, 4.0]

[severity]
kind = "exponential"
mean = 2.0

[mixing]
kind = "exponential_unit"

[scale]
levels = 4
penalties = [1, 2, 3, 3]
"#;

#[test]
fn tables_match_golden_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["tables", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for n in 1..=12 {
        let name = format!("table_{n:02}.csv");
        let got = fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(got, golden(&name), "{name}");
    }
    let text = stdout(&out);
    assert_eq!(text.matches("Table ").count(), 12);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = run(&["tables", "--number", "9"]);
    let b = run(&["tables", "--number", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn allocate_reproduces_first_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_file("configs/coarse_proportional.toml");
    let out = run(&[
        "allocate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
    assert_eq!(csv, golden("table_01.csv"));
    assert!(stdout(&out).contains("x = 0.050066, x0 = 0.666667"));
}

#[test]
fn relativities_match_fine_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fine.toml");
    fs::write(&config, FINE_RELATIVITIES).unwrap();
    let out = run(&[
        "relativities",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("relativities.csv")).unwrap();
    let expected: String = golden("table_10.csv")
        .lines()
        .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    assert_eq!(csv, expected);
}

#[test]
fn full_precision_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "tables",
        "--number",
        "1",
        "--full-precision",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("table_01.csv")).unwrap();
    let top: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((top[9] - 0.3004).abs() < 5e-5);
    assert!(csv.lines().nth(1).unwrap().len() > 80);
}

fn validate(schedule_csv: &str, tol: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("coarse.toml");
    fs::write(&config, COARSE_MANUAL).unwrap();
    let schedule = dir.path().join("schedule.csv");
    fs::write(&schedule, schedule_csv).unwrap();
    run(&[
        "validate",
        "--config",
        config.to_str().unwrap(),
        "--schedule",
        schedule.to_str().unwrap(),
        "--residual-tol",
        tol,
    ])
}

#[test]
fn validate_accepts_printed_ninth_table() {
    let out = validate(&golden("table_09.csv"), "5e-3");
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn validate_rejects_lowered_deductible() {
    // d_{3,1} from 0.7 to 0.4, below d_{2,1} = 0.5
    let corrupted = golden("table_09.csv")
        .replace("0.4500,0.2403,0.0000,0.7000", "0.4500,0.2403,0.0000,0.4000");
    assert_ne!(corrupted, golden("table_09.csv"));
    let out = validate(&corrupted, "5e-3");
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error[schedule_rejected]:"), "{err}");
    assert!(err.contains("level 3: assumption 2(iii)"), "{err}");
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn validate_rejects_deductible_above_cap() {
    let corrupted = golden("table_09.csv").replace(
        "0.4500,0.2403,0.0000,0.7000,1.5000",
        "0.4500,0.2403,0.0000,1.2000,1.5000",
    );
    let out = validate(&corrupted, "1");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("level 3: assumption 2(i)"));
}

#[test]
fn config_errors_are_machine_readable() {
    let out = run(&["relativities", "--config", "/nonexistent/tariff.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[config]:"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, COARSE_MANUAL.replace("[1, 2, 3, 3]", "[1, 2]")).unwrap();
    let out = run(&["relativities", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("penalties"));

    let config = dir.path().join("alpha.toml");
    fs::write(
        &config,
        format!("{COARSE_MANUAL}\n[deductible]\nprinciple = \"proportional_top\"\nalphas = 0.2\n"),
    )
    .unwrap();
    let out = run(&["allocate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).starts_with("error[alpha_out_of_range]: level 3"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    fs::write(
        &config,
        format!(
            "{COARSE_MANUAL}\n[deductible]\nprinciple = \"greedy_top\"\nalphas = 0.05\n\n[simulation]\nn_policies = 2000\nburn_in_years = 50\nsample_years = 20\nseed = 5\n"
        ),
    )
    .unwrap();
    let args = ["simulate", "--config", config.to_str().unwrap()];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&[&args[..], &["--seed", "6"]].concat());
    assert_ne!(a.stdout, c.stdout);
    assert!(stdout(&c).contains("seed = 6"));
    assert!(stdout(&a).lines().next().unwrap().contains("paid_sim"));
}

#[test]
fn unknown_table_number() {
    let out = run(&["tables", "--number", "13"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[invalid_parameter]"));
}
