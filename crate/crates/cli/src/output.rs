use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const VERSION: &str = match option_env!("CONTRASTIVE_GIT_DESCRIBE") {
    Some(v) => v,
    None => env!("CARGO_PKG_VERSION"),
};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";
pub const CONFIG: &str = "config.json";

/// An output directory that records every file written into it.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `name` through `body`, buffered.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes the resolved config, `manifest.json` (deterministic) and `timing.json`.
    pub fn finish(mut self, experiment: &str, config: &Value, wall_clock_seconds: f64) -> Result<()> {
        self.write_json(CONFIG, config)?;
        let outputs = self.files.clone();
        let manifest = json!({
            "experiment": experiment,
            "version": VERSION,
            "seed": config.get("seed").cloned().unwrap_or(Value::Null),
            "config": config,
            "outputs": outputs,
            "timing": TIMING,
            "rerun": format!("contrastive {experiment} --config {CONFIG} --out DIR"),
        });
        self.write_json(MANIFEST, &manifest)?;
        let path = self.dir.join(TIMING);
        let timing = json!({ "experiment": experiment, "wall_clock_seconds": wall_clock_seconds });
        fs::write(&path, serde_json::to_string_pretty(&timing)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

/// 17 significant digits, enough for a lossless round trip.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn floats(values: &[f64]) -> String {
    values.iter().map(|v| float(*v)).collect::<Vec<_>>().join(",")
}
