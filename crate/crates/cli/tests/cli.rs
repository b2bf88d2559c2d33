use std::fs;
use std::process::{Command, Output};

fn owqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owqc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no '{key}' line in:\n{text}"))
        .trim()
}

fn numbers(s: &str) -> Vec<f64> {
    s.split_whitespace().map(|t| t.parse().unwrap()).collect()
}

fn matrix(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip_while(|l| *l != "matrix:")
        .skip(1)
        .take_while(|l| !l.contains(':'))
        .map(numbers)
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn scheme_cz_beam_splitter() {
    let o = owqc(&["scheme", "CzBeamSplitter"]);
    assert!(o.status.success());
    assert_eq!(line(&stdout(&o), "variance:"), "2 2 2 2");
}

#[test]
fn scheme_rotator_shear() {
    let o = owqc(&[
        "scheme",
        "TwoNodeRotator",
        "1.5707963",
        "1.1071487",
        "1.1071487",
    ]);
    assert!(o.status.success());
    let m = matrix(&stdout(&o));
    // Seven-digit phases: entries agree to that precision.
    assert!(close(&m[0], &[1.0, 0.0], 1e-6), "{m:?}");
    assert!(close(&m[1], &[1.0, 1.0], 1e-6), "{m:?}");
    assert_eq!(line(&stdout(&o), "variance:"), "2 2");
}

#[test]
fn scheme_four_node_identity() {
    let o = owqc(&[
        "scheme",
        "FourNode3",
        "0",
        "1.5707963",
        "1.5707963",
        "1.5707963",
    ]);
    assert!(o.status.success());
    let m = matrix(&stdout(&o));
    assert!(
        close(&m[0], &[1.0, 0.0], 1e-6) && close(&m[1], &[0.0, 1.0], 1e-6),
        "{m:?}"
    );
    assert!(close(
        &numbers(line(&stdout(&o), "variance:")),
        &[3.0, 3.0],
        1e-9
    ));
}

#[test]
fn scheme_singular_exits_3() {
    let o = owqc(&["scheme", "FourNode3", "0", "1.5707963", "0", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("singular phase configuration"));
    let o = owqc(&["scheme", "TwoNode", "0", "0"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["scheme", "NoSuchScheme"][..],
        &["scheme", "TwoNode", "1"],
        &["--sigma2", "0.3", "scheme", "CzBeamSplitter"],
        &["--sigma2", "abc", "scheme", "CzBeamSplitter"],
        &["--grid", "1", "scan"],
        &["--trials", "0", "validate", "TwoNode", "1", "1"],
        &["--grid", "100", "area-ratio"],
        &["frobnicate"],
    ] {
        let o = owqc(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(
            stderr(&o).trim().lines().count(),
            1,
            "{args:?}: {}",
            stderr(&o)
        );
    }
}

#[test]
fn scan_grid3_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = owqc(&["scan", "--grid", "3", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(
        text,
        "theta3,theta4,norm_four_node,norm_pair\n1.570796327,1.570796327,3.000000000,4.000000000\n"
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn scan_center_row_at_201() {
    let o = owqc(&["scan", "--grid", "201"]);
    let text = stdout(&o);
    assert!(text
        .lines()
        .any(|l| l == "1.570796327,1.570796327,3.000000000,4.000000000"));
    assert_eq!(text.lines().count(), 1 + 199 * 199);
}

#[test]
fn scan_unwritable_exits_4() {
    let o = owqc(&["scan", "--grid", "5", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn area_ratio_band_and_reverse() {
    let ratio = |args: &[&str]| -> f64 { line(&stdout(&owqc(args)), "ratio:").parse().unwrap() };
    let r2001 = ratio(&["area-ratio", "--grid", "2001"]);
    let r1001 = ratio(&["area-ratio", "--grid", "1001"]);
    assert!((5.1..=6.9).contains(&r2001), "{r2001}");
    assert!((r2001 - r1001).abs() / r2001 < 0.02);
    let rev = ratio(&["area-ratio", "--grid", "2001", "--reverse"]);
    assert!((rev * r2001 - 1.0).abs() < 1e-9);
    let o = owqc(&["area-ratio", "--grid", "1001"]);
    let s = stdout(&o);
    let p: f64 = line(&s, "pair_better_cells:").parse().unwrap();
    let f: f64 = line(&s, "four_node_better_cells:").parse().unwrap();
    assert!((p / f - r1001).abs() < 1e-9);
}

fn compile(circuit: &str, extra: &[&str]) -> (Output, Option<String>) {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.json");
    let plan = dir.path().join("plan.json");
    fs::write(&input, circuit).unwrap();
    let mut args = vec![
        "compile",
        input.to_str().unwrap(),
        "--out",
        plan.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = owqc(&args);
    (o, fs::read_to_string(&plan).ok())
}

#[test]
fn compile_cz() {
    let (o, plan) = compile(r#"{"modes":2,"gates":[{"type":"cz","modes":[0,1]}]}"#, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(close(
        &numbers(line(&stdout(&o), "budget:")),
        &[2.0; 4],
        1e-12
    ));
    assert!(close(
        &numbers(line(&stdout(&o), "budget_abs:")),
        &[0.1; 4],
        1e-12
    ));
    let plan = plan.unwrap();
    assert!(plan.contains("\"beam_splitter\"") && plan.contains("\"sigma2\""));
}

#[test]
fn compile_shear_phases() {
    let (o, plan) = compile(
        r#"{"modes":1,"gates":[{"type":"single","mode":0,"matrix":[[1,0],[1,1]]}]}"#,
        &[],
    );
    assert!(o.status.success());
    let plan = owqc::formats::parse_plan(&plan.unwrap()).unwrap();
    match plan.steps[0] {
        owqc::compiler::PlanStep::TwoNodeGate {
            theta_plus,
            theta_minus,
            rotator_phi,
            ..
        } => {
            let a = 2f64.atan();
            assert!((rotator_phi - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
            assert!((theta_plus - a).abs() < 1e-12 && (theta_minus - a).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(line(&stdout(&o), "budget:"), "2 2");
}

#[test]
fn compile_gate_then_cz() {
    let (o, _) = compile(
        r#"{"modes":2,"gates":[{"type":"single","mode":0,"matrix":[[2,1],[1,1]]},{"type":"cz","modes":[0,1]}]}"#,
        &[],
    );
    assert!(o.status.success());
    assert!(close(
        &numbers(line(&stdout(&o), "budget:")),
        &[4.0, 2.0, 4.0, 4.0],
        1e-12
    ));
    assert_eq!(line(&stdout(&o), "linf:"), "4");
}

#[test]
fn compile_errors() {
    let (o, _) = compile("{\n\"modes\": 1,\n\"gates\": [,]\n}", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let (o, _) = compile(
        r#"{"modes":1,"gates":[{"type":"single","mode":0,"matrix":[[1,0],[0,1]]},{"type":"single","mode":0,"matrix":[[3,0],[0,3]]}]}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("gate 1"), "{}", stderr(&o));

    let o = owqc(&["compile", "/nonexistent-dir/c.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn validate_passes_and_fails() {
    let o = owqc(&["validate", "CzTwoNodeStretch"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(close(
        &numbers(line(&stdout(&o), "analytic:")),
        &[0.1, 0.1, 0.2, 0.2],
        1e-12
    ));
    assert!(stdout(&o).trim_end().ends_with("PASS"));

    let o = owqc(&[
        "validate",
        "TwoNodeRotator",
        "0.4",
        "-1.3",
        "2.2",
        "--seed",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(0));

    let o = owqc(&["validate", "CzTwoNodeStretch", "--expect", "2,2,2,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).trim_end().ends_with("FAIL"));

    let o = owqc(&["validate", "FourNode3", "0", "1.5707963", "0", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_is_deterministic_across_threads() {
    let run = |t: &str| {
        stdout(&owqc(&[
            "validate",
            "CzBeamSplitter",
            "--trials",
            "50000",
            "--seed",
            "4",
            "--threads",
            t,
        ]))
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn match_phases_table() {
    let o = owqc(&["match-phases", "0.7", "2.1", "0.3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().any(|l| l == "3,0.7,2.1,0.3"));
}
