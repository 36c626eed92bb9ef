use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use crate::config::RunConfig;

pub const CONFIG_FILE: &str = "config.toml";
const HASH_PREFIX: &str = "# config_hash=";

/// An output directory whose files all carry the hash of one resolved config.
pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    command: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    command: &'a str,
    report: &'a T,
}

impl OutputDir {
    /// Creates the directory and writes the resolved config into it.
    pub fn create(cfg: &RunConfig) -> anyhow::Result<Self> {
        let dir = cfg.output.directory.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let out = Self { dir, hash: cfg.hash(), command: cfg.command.clone() };
        out.write(CONFIG_FILE, &format!("{HASH_PREFIX}{}\n{}", out.hash, cfg.to_toml()))?;
        Ok(out)
    }

    fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
        Ok(())
    }

    /// CSV with the hash on a leading comment line.
    pub fn csv(&self, name: &str, body: &str) -> anyhow::Result<()> {
        self.write(name, &format!("{HASH_PREFIX}{}\n{body}", self.hash))
    }

    pub fn json<T: Serialize>(&self, name: &str, report: &T) -> anyhow::Result<()> {
        let env = Envelope { config_hash: &self.hash, command: &self.command, report };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn leading_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix(HASH_PREFIX).map(str::trim)
}

/// Recomputes the config hash in `dir` and checks every CSV and JSON file against it.
/// Returns one `(file, ok)` line per checked file.
pub fn check_dir(dir: &Path) -> anyhow::Result<Vec<(String, bool)>> {
    let config_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let cfg = RunConfig::from_toml(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    let hash = cfg.hash();
    let mut rows = vec![(CONFIG_FILE.to_string(), leading_hash(&text) == Some(hash.as_str()))];
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    names.sort();
    for path in names {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let embedded = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => leading_hash(&fs::read_to_string(&path)?).map(str::to_string),
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?;
                v.get("config_hash").and_then(|h| h.as_str()).map(str::to_string)
            }
            _ => continue,
        };
        rows.push((name, embedded.as_deref() == Some(hash.as_str())));
    }
    if rows.len() == 1 {
        bail!("no CSV or JSON outputs in {}", dir.display());
    }
    Ok(rows)
}
