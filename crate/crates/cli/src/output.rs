//! Artifact persistence: versioned report envelopes, atomic file writes,
//! and the timestamp sidecar that keeps the reports themselves byte-stable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

pub const ARTIFACT_VERSION: u64 = 1;

/// Envelope carried by every JSON report: tool identity, the fully resolved
/// configuration, and the command-specific payload.
#[derive(Serialize)]
pub struct Artifact<T: Serialize> {
    pub version: u64,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub config: RunConfig,
    pub report: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(config: RunConfig, report: T) -> Self {
        Artifact {
            version: ARTIFACT_VERSION,
            tool: "reeblab",
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
            report,
        }
    }
}

/// One command's output sink: a directory plus a file stem.
pub struct Sink {
    dir: PathBuf,
    stem: String,
    started: SystemTime,
    written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, stem: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            started: SystemTime::now(),
            written: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    /// Writes bytes atomically: a temp file in the same directory, flushed,
    /// then renamed over the target, so readers never see partial content.
    fn write_atomic(&mut self, suffix: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        let mut tmp = tempfile::Builder::new()
            .prefix(&format!(".{}", self.stem))
            .suffix(".tmp")
            .tempfile_in(&self.dir)
            .map_err(|e| CliError::config(format!("cannot create temp file: {e}")))?;
        tmp.write_all(contents.as_bytes())
            .and_then(|_| tmp.flush())
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        tmp.persist(&path)
            .map_err(|e| CliError::config(format!("cannot finalize {}: {e}", path.display())))?;
        self.written.push(path.file_name().unwrap().to_string_lossy().into_owned());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, value: &T) -> Result<PathBuf, CliError> {
        let text = reeblab::report::to_pretty_json(value)?;
        self.write_atomic(".json", &text)
    }

    pub fn write_csv(&mut self, contents: &str) -> Result<PathBuf, CliError> {
        self.write_atomic(".csv", contents)
    }

    /// Minimal gnuplot driver for the CSV just written.
    pub fn write_plot_script(&mut self, columns: &[(usize, &str)]) -> Result<PathBuf, CliError> {
        let csv = format!("{}.csv", self.stem);
        let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        script.push_str(&format!("set output '{}.png'\nset terminal png size 900,600\n", self.stem));
        let plots: Vec<String> = columns
            .iter()
            .map(|(col, title)| format!("'{csv}' using 1:{col} with linespoints title '{title}'"))
            .collect();
        script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        self.write_atomic(".gp", &script)
    }

    /// Timestamp sidecar, written last. Wall-clock facts live only here so
    /// the report files stay byte-identical across reruns.
    pub fn write_meta(mut self) -> Result<PathBuf, CliError> {
        let finished = SystemTime::now();
        let unix = |t: SystemTime| {
            t.duration_since(UNIX_EPOCH).unwrap_or(Duration::ZERO).as_millis() as u64
        };
        let meta = json!({
            "started_unix_ms": unix(self.started),
            "finished_unix_ms": unix(finished),
            "duration_ms": finished.duration_since(self.started).unwrap_or(Duration::ZERO).as_millis() as u64,
            "artifacts": self.written,
        });
        let text = reeblab::report::to_pretty_json(&meta)?;
        self.write_atomic(".meta.json", &text)
    }
}
