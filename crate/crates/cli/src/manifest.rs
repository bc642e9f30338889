//! Per-run manifest and output directory bookkeeping.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config_file: Option<String>,
    /// Every setting the command resolved, after flags, config and defaults.
    pub config: BTreeMap<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub rng: &'static str,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> CliResult<(String, u64)> {
    let mut f = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

/// The `--out` directory of one command. Output names are bare file names,
/// so nothing can be written outside it.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a new output file; records it for the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        assert!(
            !name.is_empty()
                && !name.contains(['/', '\\'])
                && name != ".."
                && name != MANIFEST_NAME,
            "output name {name:?} must be a plain file name"
        );
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.file(name);
        std::fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

impl Manifest {
    pub fn begin(
        command: &str,
        argv: Vec<String>,
        config_file: Option<&Path>,
        threads: usize,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv,
            config_file: config_file.map(|p| p.display().to_string()),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            rng: mortsim_core::rng::ALGORITHM_ID,
            threads,
            started_at: timestamp(),
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let (sha256, bytes) = sha256_file(path)?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn finish(mut self, out: &OutDir) -> CliResult<()> {
        self.finished_at = timestamp();
        self.outputs = out.written().to_vec();
        self.outputs.sort();
        let path = out.dir().join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}
