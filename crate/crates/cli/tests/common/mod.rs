#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .unwrap()
}

pub fn mortsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mortsim"))
}

pub fn run(args: &[&str]) -> Output {
    mortsim().args(args).output().expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "mortsim {} failed with {:?}\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small model and ensemble over the synthetic fixtures; a full pipeline
/// with it takes a few seconds.
pub fn write_tiny_config(dir: &Path) -> PathBuf {
    let f = fixtures();
    let text = format!(
        "seed = 11\n\
         [data]\n\
         mortality = {m}\n\
         population = {p}\n\
         flows = {fl}\n\
         fertility = {fe}\n\
         [train]\n\
         input_size = 15\n\
         depth = 3\n\
         hidden_width = 8\n\
         n_train = 3\n\
         batch_size = 8\n\
         window = 100\n\
         steps = 300\n\
         learning_rate = 0.001\n\
         [forecast]\n\
         runs = 3\n\
         sensitivity = 30\n\
         [simulate]\n\
         replicates = 2\n\
         scale = 50000\n",
        m = f.join("mortality.csv").display(),
        p = f.join("population.csv").display(),
        fl = f.join("flows.csv").display(),
        fe = f.join("fertility.csv").display(),
    );
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Output directories of one train → forecast → simulate → report pass.
pub struct Pipeline {
    pub root: PathBuf,
    pub config: PathBuf,
    pub train: PathBuf,
    pub forecast: PathBuf,
    pub simulate: PathBuf,
    pub report: PathBuf,
}

impl Pipeline {
    pub fn run_in(root: PathBuf, config: PathBuf) -> Self {
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let p = Pipeline {
            train: root.join("train"),
            forecast: root.join("forecast"),
            simulate: root.join("simulate"),
            report: root.join("report"),
            root,
            config,
        };
        let cfg = s(&p.config);
        ok(&["--config", &cfg, "--out", &s(&p.train), "train"]);
        ok(&["--config", &cfg, "--out", &s(&p.forecast), "forecast"]);
        let fc = s(&p.forecast.join("forecast.csv"));
        ok(&[
            "--config",
            &cfg,
            "--out",
            &s(&p.simulate),
            "simulate",
            "--forecast",
            &fc,
        ]);
        ok(&[
            "--config",
            &cfg,
            "--out",
            &s(&p.report),
            "report",
            "--forecast-dir",
            &s(&p.forecast),
            "--simulate-dir",
            &s(&p.simulate),
        ]);
        p
    }
}

/// The tiny pipeline, run once per test binary.
pub fn tiny_pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let root = scratch(&format!("tiny-pipeline-{}", std::process::id()));
        let cfg = write_tiny_config(&root);
        Pipeline::run_in(root, cfg)
    })
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr =
        csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

pub fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

pub fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}
