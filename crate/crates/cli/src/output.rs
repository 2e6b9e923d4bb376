//! Output directory handling and the audit header carried by every CSV.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use vaxdyn::Scenario;

pub const DEFAULT_OUT: &str = "vaxdyn-out";

/// `# vaxdyn <command> seed=<seed> scenario=<json>`
pub fn header(command: &str, scenario: &Scenario) -> Result<String> {
    let json = serde_json::to_string(scenario).context("serializing scenario")?;
    Ok(format!("# vaxdyn {command} seed={} scenario={json}", scenario.seed))
}

pub fn out_dir(requested: Option<&Path>) -> Result<PathBuf> {
    let dir = requested.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Writes `header` then the body produced by `body` to `dir/name`.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}
