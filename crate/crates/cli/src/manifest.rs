use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Timings, the only part that differs between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    /// Milliseconds per stage, in execution order.
    pub wall_clock_ms: Vec<(String, f64)>,
    pub total_ms: f64,
}

/// Record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub runtime: Runtime,
}

/// Collects outputs and stage timings for one run.
pub struct Recorder {
    pub command: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    outputs: Vec<String>,
    stages: Vec<(String, f64)>,
    started: Instant,
    stage_started: Instant,
}

impl Recorder {
    pub fn new(command: &str, output_dir: &Path) -> Self {
        let now = Instant::now();
        Recorder {
            command: command.to_string(),
            seed: None,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            output_dir: output_dir.to_path_buf(),
            outputs: Vec::new(),
            stages: Vec::new(),
            started: now,
            stage_started: now,
        }
    }

    /// Closes the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push((name.to_string(), (now - self.stage_started).as_secs_f64() * 1e3));
        self.stage_started = now;
    }

    pub fn input(&mut self, path: &Path) {
        let s = path.display().to_string();
        if !self.inputs.iter().any(|p| p.display().to_string() == s) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Path for output `name` inside the output directory, recorded.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.output_dir.join(name)
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.outputs.sort();
        self.outputs.dedup();
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs,
            runtime: Runtime {
                wall_clock_ms: self.stages,
                total_ms: self.started.elapsed().as_secs_f64() * 1e3,
            },
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.output_dir.join(MANIFEST_FILE), text + "\n")
    }
}
