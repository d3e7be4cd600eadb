//! Output directories: every file written is listed in `manifest.json`, and
//! a failed command leaves a `FAILED` marker next to whatever it flushed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const FAILED: &str = "FAILED";

pub struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let marker = dir.join(FAILED);
        if marker.exists() {
            fs::remove_file(marker)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a new file, recorded in the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_manifest(
        &self,
        command: &str,
        config: &Value,
        extra: Value,
        status: &str,
    ) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "mmloc",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "status": status,
            "config": config,
            "inputs": extra,
            "files": self.files,
        });
        fs::write(
            self.dir.join(MANIFEST),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }

    pub fn finish(self, command: &str, config: &Value, inputs: Value) -> Result<(), CliError> {
        self.write_manifest(command, config, inputs, "ok")
    }

    /// Writes the manifest and the failure marker; the original error is
    /// returned so the caller can still exit with its code.
    pub fn fail(self, command: &str, config: &Value, inputs: Value, err: CliError) -> CliError {
        let _ = self.write_manifest(command, config, inputs, "failed");
        let _ = fs::write(self.dir.join(FAILED), format!("{err}\n"));
        err
    }
}

/// Shortest round-trip text for a float.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
