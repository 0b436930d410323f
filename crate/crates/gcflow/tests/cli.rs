use std::fs;
use std::path::Path;
use std::sync::Arc;

use gcflow::cli::main_with;
use gcflow::formats::{read_field, write_field};
use gcflow::report::Summary;
use gcflow::ExperimentConfig;
use gcflow_core::{Domain, DomainKind, FlowParams, ScalarField};

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn coarse(extra: &str) -> String {
    format!(
        r#"
[params]
alpha = 1.0

[domain]
kind = "disc"
radius = 1.0
h = 0.0625
{extra}
"#
    )
}

fn run(args: &[&str]) -> i32 {
    main_with(std::iter::once("gcflow").chain(args.iter().copied()))
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = coarse(
        "[initial]\nkind = \"bowl\"\nc = 2.5\n[evolve]\nt_end = 7.5\nsamples = [1.0, 2.0]\n[solver]\nscheme = \"monotone4\"\n",
    );
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let path = dir.path().join("copy.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.check().unwrap(), cfg.check().unwrap());
}

#[test]
fn field_csv_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let kind = DomainKind::Ellipse { a: 1.0, b: 0.5 };
    let domain = Arc::new(Domain::new(kind, 1.0 / 24.0).unwrap());
    let field = ScalarField::from_fn(&domain, |x, y| (0.1 * x + y).sin() / 3.0 - x * y * 1e-300)
        .with_time(1.0 / 3.0);
    let params = FlowParams::geometric(2, 0.75).unwrap();
    let path = dir.path().join("f.csv");
    write_field(&path, &field, Some(&params)).unwrap();

    let (header, back) = read_field(&path, None).unwrap();
    assert_eq!(header.kind, kind);
    assert_eq!(header.params, Some(params));
    assert_eq!(back.time(), field.time());
    for (a, b) in back.values().iter().zip(field.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let (_, again) = read_field(&path, Some(&domain)).unwrap();
    assert_eq!(again, field);
}

#[test]
fn profile_run_writes_files_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &coarse(""));
    let out = dir.path().join("out");
    let code = run(&[
        "profile",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    for f in [
        "profile.csv",
        "mask.csv",
        "radial.csv",
        "comparison.csv",
        "config.toml",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = Summary::parse(&fs::read_to_string(out.join("profile_summary.txt")).unwrap());
    let sup: f64 = summary.metric_value("sup_abs").unwrap().parse().unwrap();
    assert!(sup <= 4.0);
    assert!(summary.find_check("abp_bound").unwrap().pass);
    // The oracle tolerance is meant for h = 1/64; only the ABP and residual checks bind here.
    assert!(
        code == 0 || !summary.find_check("oracle").unwrap().pass,
        "{summary}"
    );
}

#[test]
fn lemma_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &coarse("[lemma]\nsamples = 2000\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let code = run(&[
            "lemma",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(
        fs::read(a.join("lemma.csv")).unwrap(),
        fs::read(b.join("lemma.csv")).unwrap()
    );

    let c = dir.path().join("c");
    run(&[
        "lemma",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert_ne!(
        fs::read(a.join("lemma.csv")).unwrap(),
        fs::read(c.join("lemma.csv")).unwrap()
    );

    let unit = write_config(
        dir.path(),
        &coarse("[lemma]\nsamples = 500\nrange = \"unit-s\"\n"),
    );
    let d = dir.path().join("d");
    assert_eq!(
        run(&[
            "lemma",
            "--config",
            unit.to_str().unwrap(),
            "--out",
            d.to_str().unwrap()
        ]),
        0
    );
    let summary = Summary::parse(&fs::read_to_string(d.join("lemma_summary.txt")).unwrap());
    assert!(summary.find_check("equality_slice").unwrap().pass);
}

#[test]
fn malformed_configs_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_alpha = write_config(
        dir.path(),
        &coarse("").replace("alpha = 1.0", "alpha = 0.4"),
    );
    assert_eq!(
        run(&[
            "profile",
            "--config",
            bad_alpha.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        3
    );
    let err = ExperimentConfig::load(&bad_alpha)
        .unwrap()
        .check()
        .unwrap_err();
    assert!(err.to_string().contains("InvalidExponent"), "{err}");

    let unknown = write_config(dir.path(), &coarse("[solver]\nshceme = \"standard9\"\n"));
    assert_eq!(run(&["profile", "--config", unknown.to_str().unwrap()]), 3);
    assert_eq!(run(&["profile", "--config", "/nonexistent/run.toml"]), 2);
    assert_eq!(run(&["profile"]), 3);
}

#[test]
fn samples_after_t_end_are_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &coarse("[evolve]\nt_end = 1.0\nsamples = [3.0, 7.0]\n"),
    );
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "evolve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
    let exp = ExperimentConfig::load(&cfg).unwrap().check().unwrap();
    match gcflow::run::run_evolve(&exp, &out, None) {
        Err(gcflow::AppError::Solver(gcflow_core::Error::InsufficientSamples {
            found: 0, ..
        })) => {}
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("expected an error"),
    }
}

#[test]
fn evolve_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &coarse("[initial]\nkind = \"asym-bowl\"\n[evolve]\nt_end = 3.0\nsnapshot_every = 2.0\n[solver]\nscheme = \"monotone2\"\n"),
    );
    let out = dir.path().join("runs").join("evolve");
    let code = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "4",
    ]);
    assert!(code <= 1, "exit {code}");
    for f in [
        "trajectory.csv",
        "sandwich.csv",
        "final.csv",
        "profile.csv",
        "snapshot_t00002.0000.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(
        traj.contains("t,sup_abs_u,grad_sup,deviation_sup,symmetry_defect,G_current,injected_mu")
    );
    // Dyadic samples 0, 1, 3; the extra snapshot at t = 2 is not in the trajectory.
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#')).count(), 4);

    let summary = Summary::parse(&fs::read_to_string(out.join("evolve_summary.txt")).unwrap());
    assert!(summary.find_check("sandwich").unwrap().pass, "{summary}");
    assert!(summary.find_check("injected_mu").unwrap().pass);
    // Three samples cannot support a rate fit.
    assert!(!summary.find_check("rate_p").unwrap().pass);
    assert_eq!(code, 1);

    let report_code = run(&["report", "--out", dir.path().join("runs").to_str().unwrap()]);
    assert_eq!(report_code, 1);
    let total = gcflow::report::aggregate(&dir.path().join("runs")).unwrap();
    assert!(total
        .checks
        .iter()
        .any(|c| c.name == "evolve/evolve_summary.txt sandwich"));
    assert_eq!(
        run(&[
            "report",
            "--out",
            dir.path().join("empty").to_str().unwrap()
        ]),
        2
    );
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg =
                ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.check()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
