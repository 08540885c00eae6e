use std::path::Path;
use std::process::{Command, Output};

use dcs_cli::{EXIT_IO, EXIT_SOLVER, EXIT_VALIDATION};
use dcs_core::functions::CorrectionKind;
use dcs_core::report::EvalReport;
use dcs_core::{FunctionSet, SchemeFile};

fn dcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dcs(args);
    assert!(
        out.status.success(),
        "dcs {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_p1(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("p1.csv");
    ok(&[
        "synth",
        "--suite",
        "P1",
        "--num-instances",
        "400",
        "--out",
        s(&path),
    ]);
    path
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_p1(dir.path());
    let out = dcs(&[
        "optimize",
        "--input",
        s(&data),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn exit_codes_by_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dcs(&[
        "optimize",
        "--input",
        s(&missing),
        "--seed",
        "0",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_IO));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,label,p_1,p_2\na,1,1.3,0.1\nb,2,0.2,0.8\n").unwrap();
    let out = dcs(&[
        "optimize",
        "--input",
        s(&bad),
        "--seed",
        "0",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));

    let data = small_p1(dir.path());
    let out = dcs(&[
        "oracle",
        "--input",
        s(&data),
        "--limit",
        "1000",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_SOLVER));

    let out = dcs(&[
        "synth",
        "--suite",
        "P9",
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
}

#[test]
fn restricted_modes_stay_in_their_families() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_p1(dir.path());
    for (mode, allowed) in [
        ("dnip", CorrectionKind::Weight),
        ("furud", CorrectionKind::Membership),
    ] {
        let out = dir.path().join(mode);
        ok(&[
            "optimize",
            "--input",
            s(&data),
            "--mode",
            mode,
            "--seed",
            "4",
            "--max-outer",
            "10",
            "--out",
            s(&out),
        ]);
        let scheme = SchemeFile::load(out.join("scheme.json")).unwrap();
        let fs = scheme.function_set().unwrap();
        for k in scheme.xi.iter() {
            assert!(
                k == fs.dont_change_index() || fs.kind(k).unwrap() == allowed,
                "{mode} picked {k}"
            );
        }
        let report: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(out.join("dev_report.json")).unwrap())
                .unwrap();
        assert_eq!(report.num_classes, 3);
        assert_eq!(report.classes.len(), 3);
    }
}

#[test]
fn optimize_writes_a_complete_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_p1(dir.path());
    let out = dir.path().join("run");
    let stdout = ok(&[
        "optimize",
        "--input",
        s(&data),
        "--seed",
        "0",
        "--max-outer",
        "5",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("dev raw") && stdout.contains("dev dcs"));
    for f in [
        "scheme.json",
        "solve.json",
        "trace.csv",
        "optimization_set.json",
        "dev_set.json",
        "dev_report.json",
        "dev_report.csv",
        "dev_baseline.json",
        "optimization_report.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let scheme = SchemeFile::load(out.join("scheme.json")).unwrap();
    assert_eq!(scheme.xi.len(), 3);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);

    // Applying to the saved optimization set reproduces the recorded z.
    let applied = ok(&[
        "apply",
        "--input",
        s(&out.join("optimization_set.json")),
        "--scheme",
        s(&out.join("scheme.json")),
        "--out",
        s(&dir.path().join("applied")),
    ]);
    assert!(
        applied.contains(&format!("recomputed z={}", scheme.best_z)),
        "{applied}"
    );

    let report = ok(&["report", "--trace", s(&out.join("solve.json"))]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("task,N,search_space"), "{}", lines[0]);
    assert!(lines[1].starts_with("p1,3,147,"), "{}", lines[1]);
}

#[test]
fn compare_grid_covers_beta_tau_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_p1(dir.path());
    let out = dir.path().join("cmp");
    ok(&[
        "compare",
        "--input",
        s(&data),
        "--modes",
        "dcs",
        "--beta",
        "0.5,1,2",
        "--tau",
        "0,0.5,1",
        "--seed",
        "0",
        "--max-outer",
        "2",
        "--out",
        s(&out),
    ]);
    let mut rdr = csv::Reader::from_path(out.join("compare.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 9);
    let mut rdr = csv::Reader::from_path(out.join("compare_summary.csv")).unwrap();
    assert_eq!(rdr.records().count(), 9);

    let out = dir.path().join("cmp2");
    let stdout = ok(&[
        "compare",
        "--input",
        s(&data),
        "--seed",
        "0,1",
        "--max-outer",
        "2",
        "--out",
        s(&out),
    ]);
    // Default grid: 3 modes x 3 betas x 3 taus summary lines, 2 seeds each.
    assert_eq!(stdout.lines().filter(|l| l.starts_with("p1")).count(), 27);
    let mut rdr = csv::Reader::from_path(out.join("compare.csv")).unwrap();
    assert_eq!(rdr.records().count(), 54);

    let out = dcs(&[
        "compare",
        "--input",
        s(&data),
        "--out",
        s(&dir.path().join("cmp3")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
}

#[test]
fn catalog_and_custom_catalog_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    ok(&["catalog", "--out", s(&path)]);
    let fs = FunctionSet::load(&path).unwrap();
    assert_eq!((fs.num_memberships(), fs.num_weights()), (19, 30));

    let small = dir.path().join("small.json");
    std::fs::write(
        &small,
        r#"{"memberships":[{"a":0.0,"b":1.0,"c":1.0},{"a":0.4,"b":1.0,"c":1.0}],"num_weights":2}"#,
    )
    .unwrap();
    let data = small_p1(dir.path());
    let stdout = ok(&[
        "oracle",
        "--input",
        s(&data),
        "--catalog",
        s(&small),
        "--out",
        s(&dir.path().join("or")),
    ]);
    assert!(stdout.contains("evaluated=64"), "{stdout}");
}

#[test]
fn synth_profile_file_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.json");
    std::fs::write(
        &profile,
        r#"{"num_classes":2,"class_priors":[0.5,0.5],"target_per_class_accuracy":[1.0,1.0],"confusion_temperature":1.0,"seed":3}"#,
    )
    .unwrap();
    let out = dir.path().join("d.json");
    ok(&[
        "synth",
        "--profile",
        s(&profile),
        "--num-instances",
        "100",
        "--out",
        s(&out),
    ]);
    let ds = dcs_core::load_dataset(&out, dcs_core::Format::Json).unwrap();
    assert_eq!(ds.num_instances(), 100);
}
