//! Run manifest and output helpers.
//!
//! The manifest hash covers everything that determines the data: tool
//! version, subcommand, config contents, seeds and overrides. Paths and the
//! timestamp are recorded in `manifest.json` but excluded from the hash, so
//! re-running a command reproduces every data file byte for byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub mode: String,
    pub theta: Option<f64>,
    pub tol: Option<f64>,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub hash: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    tool_version: &'a str,
    subcommand: &'a str,
    config_sha256: &'a str,
    seeds: &'a [u64],
    mode: &'a str,
    theta: Option<f64>,
    tol: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(subcommand: &str, config_path: &Path, config_text: &str, seeds: Vec<u64>, out_dir: &Path, mode: &str, theta: Option<f64>, tol: Option<f64>) -> Self {
        let config_sha256 = sha256_hex(config_text.as_bytes());
        let hashed = Hashed { tool_version: TOOL_VERSION, subcommand, config_sha256: &config_sha256, seeds: &seeds, mode, theta, tol };
        let hash = sha256_hex(serde_json::to_string(&hashed).expect("manifest serializes").as_bytes());
        let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            subcommand: subcommand.into(),
            config_path: config_path.to_path_buf(),
            config_sha256,
            seeds,
            out_dir: out_dir.to_path_buf(),
            mode: mode.into(),
            theta,
            tol,
            tool_version: TOOL_VERSION.into(),
            timestamp_unix,
            hash,
        }
    }
}

/// Output directory writer; every CSV starts with a `# manifest_hash=` line.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn create(manifest: &RunManifest) -> anyhow::Result<Self> {
        let dir = manifest.out_dir.clone();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let out = Self { dir, hash: manifest.hash.clone() };
        out.write("manifest.json", &(serde_json::to_string_pretty(manifest)? + "\n"))?;
        Ok(out)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    /// `body` starts with the CSV header line.
    pub fn csv(&self, name: &str, body: &str) -> anyhow::Result<()> {
        self.write(name, &format!("# manifest_hash={}\n{body}", self.hash))
    }

    /// Serializes `value` with a leading `manifest_hash` field.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut v = serde_json::to_value(value)?;
        let obj = v.as_object_mut().context("JSON outputs are objects")?;
        let mut with_hash = serde_json::Map::new();
        with_hash.insert("manifest_hash".into(), self.hash.clone().into());
        with_hash.append(obj);
        self.write(name, &(serde_json::to_string_pretty(&with_hash)? + "\n"))
    }
}
