//! Run manifests: config echo, config hash, crate versions, and the
//! pass/fail record of every invariant checked during the run.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a serde_json::Value,
    config_sha256: String,
    versions: Versions,
    checks: &'a [Check],
    all_passed: bool,
}

#[derive(Debug, Serialize)]
struct Versions {
    pn_core: &'static str,
    pn_cli: &'static str,
}

/// Writes `manifest.json`, prints one line per check, and reports failures
/// on standard error. Returns whether every check passed.
pub fn finalize(out: &Path, command: &str, config: serde_json::Value, checks: &[Check]) -> Result<bool> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let config_text = serde_json::to_string(&config)?;
    let hash = hex_digest(config_text.as_bytes());
    let all_passed = checks.iter().all(|c| c.passed);
    let manifest = Manifest {
        schema_version: 1,
        command,
        config: &config,
        config_sha256: hash,
        versions: Versions {
            pn_core: env!("CARGO_PKG_VERSION"),
            pn_cli: env!("CARGO_PKG_VERSION"),
        },
        checks,
        all_passed,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for check in checks {
        println!(
            "{} {} ({})",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
        if !check.passed {
            eprintln!("check failed: {} ({})", check.name, check.detail);
        }
    }
    Ok(all_passed)
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Flag-over-file merge helper.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Loads the optional JSON config file.
pub fn load_config(path: &Option<std::path::PathBuf>) -> Result<serde_json::Value> {
    match path {
        None => Ok(serde_json::json!({})),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("schema_version").and_then(|v| v.as_u64()) != Some(1) {
                anyhow::bail!("config {} must declare \"schema_version\": 1", p.display());
            }
            Ok(value)
        }
    }
}

/// Typed lookup into the config file section for one subcommand.
pub fn section<T: serde::de::DeserializeOwned + Default>(
    config: &serde_json::Value,
    name: &str,
) -> Result<T> {
    match config.get(name) {
        None => Ok(T::default()),
        Some(v) => Ok(serde_json::from_value(v.clone())?),
    }
}
