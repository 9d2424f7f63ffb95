use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use tse_search::extractors::ExtractorSpec;
use tse_search::harness::{read_rows, Manifest, RunConfig, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tse-search"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(scenes: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[
            "synth",
            "--num-scenes",
            &scenes.to_string(),
            "--seed",
            "7",
            "--duration",
            "0.5",
            "--out",
            p(&dir.path().join("data")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn manifest(&self) -> PathBuf {
        self.path("data/manifest.jsonl")
    }

    fn config(&self, name: &str, spec: ExtractorSpec, steps: usize) -> PathBuf {
        let mut cfg = RunConfig::with_extractor(spec);
        cfg.steps = steps;
        cfg.candidates = 6;
        let path = self.path(name);
        cfg.save(&path).unwrap();
        path
    }

    fn run(&self, config: &Path, selector: &str, report: &str) -> Output {
        run(&[
            "run",
            "--manifest",
            p(&self.manifest()),
            "--config",
            p(config),
            "--selector",
            selector,
            "--report",
            p(&self.path(report)),
        ])
    }
}

#[test]
fn synth_run_report_pipeline() {
    let ws = Workspace::new(3);
    let manifest = Manifest::load(ws.manifest()).unwrap();
    assert_eq!(manifest.entries.len(), 3);

    let cfg = ws.config("leaky.json", ExtractorSpec::LeakyLinear { kappa: 0.5 }, 3);
    let out = ws.run(&cfg, "oracle,quality", "a.csv");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(ws.path("a.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_rows(&ws.path("a.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 4);
    assert!(ws.path("a.json").exists());

    let out = run(&["report", p(&ws.path("a.csv")), "--csv", p(&ws.path("table.csv"))]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("baseline").count(), 1, "{stdout}");
    let table = fs::read_to_string(ws.path("table.csv")).unwrap();
    assert!(table.starts_with("selector,step,si_sdri_db,quality,spk_sim"));

    // A second report with another selector merges into one table.
    assert_eq!(code(&ws.run(&cfg, "spksim", "b.csv")), 0);
    let out = run(&["report", p(&ws.path("a.json")), p(&ws.path("b.csv"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_with_mismatched_steps_is_a_merge_error() {
    let ws = Workspace::new(1);
    let three = ws.config("t3.json", ExtractorSpec::Identity, 3);
    let two = ws.config("t2.json", ExtractorSpec::Identity, 2);
    assert_eq!(code(&ws.run(&three, "quality", "t3.csv")), 0);
    assert_eq!(code(&ws.run(&two, "spksim", "t2.csv")), 0);
    let out = run(&["report", p(&ws.path("t3.csv")), p(&ws.path("t2.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_errors_exit_with_two() {
    let ws = Workspace::new(1);
    let cfg = ws.config("id.json", ExtractorSpec::Identity, 1);
    let out = run(&[
        "analyze",
        "--manifest",
        p(&ws.manifest()),
        "--config",
        p(&cfg),
        "--mode",
        "fisher",
        "--out",
        p(&ws.path("x.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&ws.run(&cfg, "beam", "x.csv")), 2);
    assert_eq!(
        code(&run(&[
            "synth",
            "--num-scenes",
            "1",
            "--duration",
            "0",
            "--out",
            p(&ws.path("z"))
        ])),
        2
    );

    fs::write(ws.path("typo.json"), r#"{"steps": 2}"#).unwrap();
    assert_eq!(code(&ws.run(&ws.path("typo.json"), "quality", "x.csv")), 2);
    assert!(!ws.path("x.csv").exists());
}

#[test]
fn oracle_without_targets_aborts_before_processing() {
    let ws = Workspace::new(2);
    let mut manifest = Manifest::load(ws.manifest()).unwrap();
    manifest.entries[1].target_path = None;
    manifest.save(ws.manifest()).unwrap();
    let cfg = ws.config("id.json", ExtractorSpec::Identity, 1);
    let out = ws.run(&cfg, "oracle", "r.csv");
    assert_eq!(code(&out), 2);
    assert!(!ws.path("r.csv").exists());
    // Non-intrusive selectors still run; SI-SDR columns stay empty there.
    assert_eq!(code(&ws.run(&cfg, "quality", "q.csv")), 0);
    let rows = read_rows(&ws.path("q.csv")).unwrap();
    assert!(rows
        .iter()
        .filter(|r| r.id == manifest.entries[1].id)
        .all(|r| r.si_sdr_db.is_none()));
}

#[test]
fn bad_entry_fails_alone_with_exit_one() {
    let ws = Workspace::new(3);
    let manifest = Manifest::load(ws.manifest()).unwrap();
    // Truncate one target so it no longer matches its mixture.
    let bad = &manifest.entries[1];
    let target = manifest.resolve(bad.target_path.as_ref().unwrap());
    let w = tse_search::signal::load_wav(&target).unwrap();
    let short = tse_search::Waveform::new(w.samples()[..100].to_vec(), w.sample_rate()).unwrap();
    tse_search::signal::save_wav(&short, &target).unwrap();

    let cfg = ws.config("sp.json", ExtractorSpec::SpectralSubtraction { floor: 0.1 }, 1);
    let out = ws.run(&cfg, "quality", "r.csv");
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&bad.id));
    let rows = read_rows(&ws.path("r.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 2);
    assert!(rows.iter().all(|r| r.id != bad.id));
    let summary: Value = serde_json::from_str(&fs::read_to_string(ws.path("r.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

fn analyze(ws: &Workspace, cfg: &Path, mode: &str) -> Value {
    let out_path = ws.path(&format!("{mode}.json"));
    let out = run(&[
        "analyze",
        "--manifest",
        p(&ws.manifest()),
        "--config",
        p(cfg),
        "--mode",
        mode,
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&fs::read_to_string(out_path).unwrap()).unwrap()
}

#[test]
fn analyze_modes_write_json() {
    let ws = Workspace::new(2);
    let identity = ws.config("id.json", ExtractorSpec::Identity, 2);
    let report = analyze(&ws, &identity, "lipschitz");
    assert_eq!(report["mode"], "lipschitz");
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        let l_f = e["estimate"]["L_f"].as_f64().unwrap();
        assert!((l_f - 1.0).abs() < 1e-9, "{l_f}");
    }

    let leaky = ws.config("leaky.json", ExtractorSpec::LeakyLinear { kappa: 0.5 }, 2);
    let report = analyze(&ws, &leaky, "det_bound");
    assert!(report["max_value"].as_f64().unwrap() <= 1.0 + 1e-6);

    let mut cfg = RunConfig::load(&leaky).unwrap();
    cfg.trials = 200;
    cfg.save(ws.path("var.json")).unwrap();
    let report = analyze(&ws, &ws.path("var.json"), "var_bound");
    assert_eq!(report["entries"].as_array().unwrap().len(), 2 * 2);
}
