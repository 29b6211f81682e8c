//! Run manifests: config echo, per-task status, wall-clock times and
//! checksummed output listings.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    /// "ok" or "failed: <reason>".
    pub status: String,
    pub seconds: f64,
}

impl TaskRecord {
    pub fn failed(&self) -> bool {
        self.status != "ok"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub code_version: String,
    pub config: BTreeMap<String, String>,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<OutputRecord>,
    /// Provenance notes for fixture-dependent quantities (e.g. whether
    /// homoclinic A/L were computed or taken from fixtures).
    pub provenance: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(experiment: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            tasks: Vec::new(),
            outputs: Vec::new(),
            provenance: BTreeMap::new(),
        }
    }

    /// Runs a closure as a named task, recording status and duration.
    pub fn task<T, E: std::fmt::Display>(
        &mut self,
        name: &str,
        f: impl FnOnce() -> Result<T, E>,
    ) -> Option<T> {
        let start = Instant::now();
        let outcome = f();
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(v) => {
                self.tasks.push(TaskRecord {
                    name: name.to_string(),
                    status: "ok".into(),
                    seconds,
                });
                Some(v)
            }
            Err(e) => {
                self.tasks.push(TaskRecord {
                    name: name.to_string(),
                    status: format!("failed: {e}"),
                    seconds,
                });
                None
            }
        }
    }

    /// Registers a finished output file, hashing its contents.
    pub fn add_output(&mut self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::open(path)?;
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 65536];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        self.outputs.push(OutputRecord {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    pub fn note_provenance(&mut self, key: &str, value: &str) {
        self.provenance.insert(key.to_string(), value.to_string());
    }

    pub fn failed_tasks(&self) -> usize {
        self.tasks.iter().filter(|t| t.failed()).count()
    }

    /// Writes run_manifest.json into `out_dir` and returns its path.
    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = out_dir.join("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
