use std::path::{Path, PathBuf};
use std::process::Command;

use selfdual_cli::{execute, parse_model_spec, CliError, Overrides, TaskKind};

fn spec_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn spec_text(name: &str) -> String {
    std::fs::read_to_string(spec_path(name)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selfdual"))
}

fn schema_errors(text: &str) -> Vec<String> {
    match parse_model_spec(text, &Overrides::default()) {
        Err(CliError::Schema(errs)) => errs,
        other => panic!("expected schema error, got {other:?}"),
    }
}

fn small_hedge() -> String {
    spec_text("hedge_spread.toml")
        .replace("n_outer = 10000", "n_outer = 2000")
        .replace("n_inner = 20000", "n_inner = 4000")
        .replace("n_states = 50", "n_states = 10")
        .replace("steps = 250", "steps = 100")
}

#[test]
fn minimal_spec_gets_defaults() {
    let text = "version = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = 0.2\n[task]\nkind = \"check\"\n";
    let spec = parse_model_spec(text, &Overrides::default()).unwrap();
    assert_eq!(spec.seed, 20_240_917);
    assert_eq!(spec.samples, 100_000);
    assert_eq!(spec.tolerance.exact, Some(1e-10));
    assert_eq!(spec.tolerance.se_band, Some(3.0));
    assert_eq!(spec.task.which.as_deref(), Some("auto"));
    assert_eq!(spec.task.numeraire, Some(1));
    assert_eq!(spec.kind(), TaskKind::Check);
    let echoed = spec.to_toml();
    assert!(echoed.contains("which = \"auto\""), "{echoed}");
}

#[test]
fn negative_sigma_names_the_field() {
    let errs = schema_errors("version = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = -1.0\n[task]\nkind = \"check\"\n");
    assert!(errs.iter().any(|e| e.starts_with("model.scalar.sigma")), "{errs:?}");
}

#[test]
fn unknown_keys_are_rejected() {
    let errs = schema_errors("version = 1\nbogus = 3\n[model.scalar]\nfamily = \"lognormal\"\nsigma = 0.2\n[task]\nkind = \"check\"\n");
    assert_eq!(errs, vec!["bogus: unknown key".to_string()]);
}

#[test]
fn all_violations_are_reported_together() {
    let text = "version = 2\nbogus = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = -1.0\nfoo = 2\n[task]\nkind = \"check\"\nwhich = \"nope\"\n";
    let errs = schema_errors(text);
    for key in ["bogus", "model.scalar.foo", "version", "model.scalar.sigma", "task.which"] {
        assert!(errs.iter().any(|e| e.starts_with(&format!("{key}:"))), "missing {key} in {errs:?}");
    }
}

#[test]
fn mistyped_value_is_reported() {
    let errs = schema_errors("version = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = \"wide\"\n[task]\nkind = \"check\"\n");
    assert!(errs.iter().any(|e| e == "model.scalar.sigma: expected a number"), "{errs:?}");
}

#[test]
fn normalized_spec_round_trips() {
    let cases = [
        ("discrete.toml", TaskKind::Check),
        ("lognormal.toml", TaskKind::Check),
        ("alpha_lognormal.toml", TaskKind::Alpha),
        ("price_call.toml", TaskKind::Price),
        ("hedge_spread.toml", TaskKind::Hedge),
        ("zonoid.toml", TaskKind::Zonoid),
    ];
    for (name, kind) in cases {
        let first = parse_model_spec(&spec_text(name), &Overrides { kind: Some(kind), ..Default::default() }).unwrap();
        let again = parse_model_spec(&first.to_toml(), &Overrides::default()).unwrap();
        assert_eq!(first, again, "{name}");
    }
}

#[test]
fn overrides_replace_spec_values() {
    let ov = Overrides { kind: Some(TaskKind::Check), seed: Some(7), samples: Some(500), tol: Some(1e-6) };
    let spec = parse_model_spec(&spec_text("lognormal.toml"), &ov).unwrap();
    assert_eq!(spec.seed, 7);
    assert_eq!(spec.samples, 500);
    assert_eq!(spec.tolerance.exact, Some(1e-6));
}

#[test]
fn discrete_check_passes() {
    let out = bin().arg("check").arg(spec_path("discrete.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict = \"pass\""));
}

#[test]
fn asymmetric_law_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "version = 1\n[model.scalar]\nfamily = \"atoms\"\natoms = [[0.5, 0.5], [1.5, 0.5]]\n").unwrap();
    let out = bin().arg("check").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn alpha_solves_lognormal_case() {
    let out = bin().arg("alpha").arg(spec_path("alpha_lognormal.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    let alpha = &report["result"]["alpha"];
    assert_eq!(alpha["method"].as_str(), Some("closed_lognormal"));
    let a = alpha["alpha"].as_float().unwrap();
    assert!((a - 0.5).abs() < 1e-12, "{a}");
}

#[test]
fn price_matches_black_scholes() {
    let (code, report) = execute(&spec_text("price_call.toml"), &Overrides { kind: Some(TaskKind::Price), ..Default::default() }, None).unwrap();
    assert_eq!(code, 0);
    let t: toml::Table = report.parse().unwrap();
    let price = &t["result"]["price"];
    // undiscounted Black-Scholes call with F = 1, K = 1.1, sigma = 0.25
    let oracle = 0.061_904_264_137_683_46;
    assert!((price["value"].as_float().unwrap() - oracle).abs() < 1e-10);
    let disc = price["discount"].as_float().unwrap();
    assert!((disc - (-0.02f64).exp()).abs() < 1e-15);
    assert!((price["discounted"].as_float().unwrap() - oracle * disc).abs() < 1e-10);
}

#[test]
fn spread_hedge_passes() {
    let (code, report) = execute(&small_hedge(), &Overrides { kind: Some(TaskKind::Hedge), ..Default::default() }, None).unwrap();
    assert_eq!(code, 0, "{report}");
}

#[test]
fn output_is_deterministic() {
    let ov = Overrides { kind: Some(TaskKind::Hedge), seed: Some(11), ..Default::default() };
    let a = execute(&small_hedge(), &ov, None).unwrap();
    let b = execute(&small_hedge(), &ov, None).unwrap();
    assert_eq!(a, b);
    let run = || bin().arg("check").arg(spec_path("lognormal.toml")).output().unwrap().stdout;
    assert_eq!(run(), run());
}

#[test]
fn seed_changes_header_hash() {
    let ov = |seed| Overrides { kind: Some(TaskKind::Check), seed: Some(seed), ..Default::default() };
    let (_, a) = execute(&spec_text("discrete.toml"), &ov(1), None).unwrap();
    let (_, b) = execute(&spec_text("discrete.toml"), &ov(2), None).unwrap();
    let hash = |r: &str| r.parse::<toml::Table>().unwrap()["header"]["spec_sha256"].as_str().unwrap().to_string();
    assert_ne!(hash(&a), hash(&b));
    assert_eq!(hash(&a).len(), 64);
}

#[test]
fn out_dir_receives_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("hedge.toml");
    std::fs::write(&spec, small_hedge()).unwrap();
    let out = bin().arg("--out").arg(dir.path()).arg("hedge").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert_eq!(report, String::from_utf8(out.stdout).unwrap());
    assert!(dir.path().join("records.csv").exists());
    let gaps = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
    assert!(gaps.lines().count() > 1);

    let zdir = tempfile::tempdir().unwrap();
    let out = bin().arg("--out").arg(zdir.path()).arg("zonoid").arg(spec_path("zonoid.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(zdir.path().join("boundary.csv").exists());
}

#[test]
fn errors_exit_with_three() {
    let out = bin().arg("check").arg("/nonexistent/spec.toml").output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "version = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = -1.0\n").unwrap();
    let out = bin().arg("check").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("model.scalar.sigma"), "{err}");
}
