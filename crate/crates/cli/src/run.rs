//! Config loading, output files and the run manifest.

use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, CONFIG_VERSION};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config key `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] nscascade::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Malformed input is a validation failure (2); everything else is a runtime error (1).
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub struct Context {
    pub subcommand: &'static str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    outputs: Vec<String>,
}

impl Context {
    pub fn new(subcommand: &'static str, config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Context {
        Context { subcommand, config, seed, out, outputs: Vec::new() }
    }

    /// Reads the config (or the config echoed in a manifest), rejecting unknown
    /// keys and other versions, and resolves the seed: flag, then config, then 0.
    pub fn load<T: RunConfig + DeserializeOwned>(&self) -> Result<T, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --config PATH", self.subcommand)))?;
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { context: format!("reading {}", path.display()), source })?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config { path: "$".into(), message: format!("{} is not valid JSON: {e}", path.display()) })?;
        if let Some(obj) = value.as_object_mut() {
            if obj.contains_key("manifest_version") {
                let sub = obj.get("subcommand").and_then(Value::as_str).unwrap_or_default();
                if sub != self.subcommand {
                    return Err(CliError::Config {
                        path: "subcommand".into(),
                        message: format!("manifest was written by `{sub}`, not `{}`", self.subcommand),
                    });
                }
                value = obj.remove("config").ok_or_else(|| CliError::Config { path: "config".into(), message: "manifest has no config".into() })?;
            }
        }
        let mut cfg: T = serde_path_to_error::deserialize(value)
            .map_err(|e| CliError::Config { path: e.path().to_string(), message: e.into_inner().to_string() })?;
        if cfg.version() != CONFIG_VERSION {
            return Err(CliError::Config {
                path: "version".into(),
                message: format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version()),
            });
        }
        let seed = self.seed.or(cfg.seed()).unwrap_or(0);
        cfg.set_seed(seed);
        Ok(cfg)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|source| CliError::Io { context: format!("creating {}", self.out.display()), source })?;
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source })?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("output serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Writes the manifest echoing the resolved config and returns `pass`.
    pub fn finish<T: RunConfig + Serialize>(mut self, cfg: &T, pass: bool) -> Result<bool, CliError> {
        let manifest = json!({
            "manifest_version": MANIFEST_VERSION,
            "tool": "nscascade",
            "artifact_version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "seed": cfg.seed(),
            "config": cfg,
            "outputs": self.outputs,
            "pass": pass,
        });
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(pass)
    }
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
