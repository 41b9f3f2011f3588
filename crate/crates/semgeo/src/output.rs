//! Writes reports and the run manifest into the output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::commands::{Report, SCHEMA};
use crate::config::{Config, OutputFormat};
use crate::error::{Error, Result};

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Output { path: path.to_owned(), source })
}

/// Writes `<name>.json` and each table as `<stem>.csv`, as `format` asks.
/// Returns the file names written, in order.
pub fn write_reports(dir: &Path, format: OutputFormat, reports: &[Report]) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Output { path: dir.to_owned(), source })?;
    let mut written = Vec::new();
    for r in reports {
        if format.json() {
            let name = format!("{}.json", r.name);
            write_json(&dir.join(&name), &r.json)?;
            written.push(name);
        }
        if format.csv() {
            for (stem, table) in &r.tables {
                let name = format!("{stem}.csv");
                let path = dir.join(&name);
                table.save(&path).map_err(|source| Error::Csv { path, source })?;
                written.push(name);
            }
        }
    }
    Ok(written)
}

/// `manifest.json`: config echo, seed, tool version, outputs and a
/// wall-clock timestamp. The timestamp is the only field that changes
/// between identical runs.
pub fn write_manifest(dir: &Path, command: &str, cfg: &Config, outputs: &[String]) -> Result<PathBuf> {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "schema": SCHEMA,
        "tool": "semgeo",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.run.seed,
        "workers": cfg.run.workers,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "outputs": outputs,
        "timestamp": timestamp,
    });
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
