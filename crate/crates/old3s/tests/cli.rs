use std::path::Path;
use std::process::Command;

use old3s::checkpoint::{Checkpoint, MAGIC};
use old3s::config::RunConfig;
use old3s::core::eval::OcaTracker;
use old3s::core::learner::{Learner, VariantKind};
use old3s::runner::{load_dataset, metrics_path, prepare_stream, summary_path, SummaryFile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_old3s"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"{
  "data": {"synthetic": {"n": 600, "d1": 4, "classes": 2, "margin": 2.0, "seed": 3, "blobs_per_class": 2}},
  "d2": 8,
  "model": {"hidden": 16, "latent": 4, "depth": 2},
  "seeds": [0, 1],
  "hindsight_epochs": 2
}"#;

#[test]
fn run_writes_one_csv_and_summary_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--jobs").arg("2").output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let parsed = RunConfig::load(&cfg).unwrap();
    for seed in [0, 1] {
        for kind in VariantKind::ALL {
            let csv = std::fs::read_to_string(metrics_path(&out, kind, seed)).unwrap();
            let mut lines = csv.lines();
            let header = lines.next().unwrap();
            let depth = if kind == VariantKind::ZeroPad { 1 } else { 2 };
            assert_eq!(header.split(',').count(), 6 + depth, "{header}");
            assert_eq!(lines.count(), 600);

            let text = std::fs::read_to_string(summary_path(&out, kind, seed)).unwrap();
            let s: SummaryFile = serde_json::from_str(&text).unwrap();
            let mut expected = parsed.clone();
            expected.out = out.clone();
            assert_eq!(s.config, expected);
            assert_eq!((s.variant, s.seed, s.rounds), (kind, seed, 600));
            assert!(s.acr.is_finite() && (0.0..=1.0).contains(&s.hindsight));
        }
    }

    let report = bin().arg("report").arg(&out).output().unwrap();
    assert!(report.status.success());
    let table = String::from_utf8(report.stdout).unwrap();
    for kind in VariantKind::ALL {
        assert!(table.contains(kind.name()), "{table}");
    }
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let s = bin().args(["run", "--seed-override", "5", "--out"]).arg(out).arg(&cfg).output().unwrap();
        assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    }
    for kind in VariantKind::ALL {
        let x = std::fs::read(metrics_path(&a, kind, 5)).unwrap();
        let y = std::fs::read(metrics_path(&b, kind, 5)).unwrap();
        assert_eq!(x, y, "{}", kind.name());
    }
    assert!(!metrics_path(&a, VariantKind::Old3s, 0).exists());
}

#[test]
fn config_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = SMALL.replace("\"d2\": 8", "\"d2\": 8, \"variants\": [\"old3s\", \"old4s\"]");
    let cfg = write(dir.path(), "bad.json", &bad);
    let s = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&s.stderr).contains("old4s"));
    assert!(!out.exists());

    let typo = write(dir.path(), "typo.json", &SMALL.replace("\"d2\"", "\"d3\""));
    let s = bin().arg("run").arg(&typo).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&s.stderr).contains("d3"));

    let missing = write(
        dir.path(),
        "missing.json",
        r#"{"data": {"csv": {"path": "nowhere.csv"}}, "seeds": [0]}"#,
    );
    let s = bin().arg("run").arg(&missing).arg("--out").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn synth_writes_deterministic_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", r#"{"n": 100, "d1": 4, "classes": 2, "margin": 2.0, "seed": 9}"#);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let s = bin().arg("synth").arg(&spec).arg("--out").arg(out).output().unwrap();
        assert!(s.status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().all(|l| l.split(',').count() == 5));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let bad = write(dir.path(), "bad.json", r#"{"n": 100, "d1": 4, "classes": 1, "margin": 2.0, "seed": 9}"#);
    assert_eq!(bin().arg("synth").arg(&bad).output().unwrap().status.code(), Some(2));
}

#[test]
fn csv_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", r#"{"n": 400, "d1": 3, "classes": 3, "margin": 3.0, "seed": 2}"#);
    let data = dir.path().join("blobs.csv");
    assert!(bin().arg("synth").arg(&spec).arg("--out").arg(&data).output().unwrap().status.success());
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"data": {"csv": {"path": "blobs.csv"}}, "d2": 6, "seeds": [1],
            "variants": ["old3s", "zero_pad"], "model": {"hidden": 8, "latent": 3, "depth": 2},
            "hindsight_epochs": 1, "checkpoint": true, "out": "res"}"#,
    );
    let s = bin().arg("run").arg(&cfg).current_dir(dir.path()).output().unwrap();
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let ck = Checkpoint::load(&dir.path().join("res").join("old3s-seed1.ckpt.json")).unwrap();
    assert_eq!(ck.magic, MAGIC);
    assert_eq!((ck.d1, ck.d2, ck.classes, ck.round), (3, 6, 3, 400));
}

#[test]
fn large_margin_fixture_is_separable_for_zero_pad() {
    let config = RunConfig::from_json(
        r#"{"data": {"synthetic": {"n": 6000, "d1": 10, "classes": 2, "margin": 8.0, "seed": 4}}, "seeds": [0]}"#,
    )
    .unwrap();
    let ds = load_dataset(&config).unwrap();
    let st = prepare_stream(&config, &ds, 0).unwrap();
    let mut learner = Learner::for_variant(&config.variant(VariantKind::ZeroPad, 0), st.d1(), st.d2(), st.classes).unwrap();
    let mut oca = OcaTracker::new(st.schedule.window).unwrap();
    let mut last = 0.0;
    for t in 1..=st.schedule.t1_end {
        let inst = st.instance(t);
        last = oca.push(learner.step(&inst).unwrap().predicted == inst.y);
    }
    assert!(last > 0.95, "T1 OCA {last}");
}

#[test]
fn checkpoint_resumes_bit_for_bit() {
    let config = RunConfig::from_json(SMALL).unwrap();
    let ds = load_dataset(&config).unwrap();
    let st = prepare_stream(&config, &ds, 1).unwrap();
    let variant = config.variant(VariantKind::Old3s, 1);
    let mut straight = Learner::for_variant(&variant, st.d1(), st.d2(), st.classes).unwrap();
    let mut resumed = straight.clone();
    let cut = st.schedule.t1_end + 20;
    for t in 1..=cut {
        resumed.step(&st.instance(t)).unwrap();
    }
    let ck = Checkpoint::new(VariantKind::Old3s, 1, st.d1(), st.d2(), st.classes, cut, resumed);
    let back = Checkpoint::from_json(&ck.to_json()).unwrap();
    assert_eq!(back, ck);
    let mut resumed = back.learner;
    for t in 1..=cut {
        straight.step(&st.instance(t)).unwrap();
    }
    for t in cut + 1..=st.schedule.n_total {
        let a = straight.step(&st.instance(t)).unwrap();
        let b = resumed.step(&st.instance(t)).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(straight, resumed);

    let forged = ck.to_json().replace(MAGIC, "OLD3S-CKPT-v0");
    assert!(Checkpoint::from_json(&forged).unwrap_err().contains("unsupported"));
}

#[test]
fn check_passes_and_catches_injected_fault() {
    let ok = bin().arg("check").output().unwrap();
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{text}");
    for suite in ["nn-substrate", "kl-oracle", "hedge-invariants", "ensemble-invariants"] {
        assert!(text.contains(suite), "{text}");
    }
    let bad = bin().args(["check", "--inject-fault"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nn-substrate"));
}
