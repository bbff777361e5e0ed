use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::Cli;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with an explicit header, for outputs that may have no rows.
pub fn write_csv_with_header<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Dump<'a> {
    command: String,
    args: Vec<String>,
    scenarios: &'a [PathBuf],
    error: Vec<String>,
}

/// Writes the failing invocation and error chain next to the outputs.
pub fn write_dump(cli: &Cli, e: &anyhow::Error) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    let path = dir.join("charflow-dump.json");
    let dump = Dump {
        command: format!("{:?}", cli.cmd),
        args: std::env::args().collect(),
        scenarios: &cli.scenario,
        error: e.chain().map(|c| c.to_string()).collect(),
    };
    write_json(&path, &dump)?;
    Ok(path)
}
