//! `--config` files and the error type shared by the commands.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit 1.
    Usage(String),
    /// Validation or numerical failure: exit 2.
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<hprobe::Error> for CliError {
    fn from(e: hprobe::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn failed(msg: impl Into<String>) -> CliError {
    CliError::Failed(msg.into())
}

/// Parsed `--config` file: `{"seed": .., "outdir": .., "format": .., "<command>": {..}}`.
#[derive(Debug, Default)]
pub struct FileConfig {
    root: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| failed(format!("config {}: {e}", path.display())))?;
        match serde_json::from_str(&text).map_err(|e| failed(format!("config {}: {e}", path.display())))? {
            Value::Object(root) => Ok(Self { root }),
            _ => Err(failed(format!("config {}: expected a JSON object", path.display()))),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.root
            .get(key)
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| failed(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    /// Command flags layered over the command's section of the file.
    pub fn merge<T: Serialize + DeserializeOwned>(&self, command: &str, cli: &T) -> Result<T> {
        let mut merged = match self.root.get(command) {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(failed(format!("config section `{command}` must be an object"))),
        };
        if let Value::Object(flags) = serde_json::to_value(cli)? {
            for (k, v) in flags {
                let unset = match &v {
                    Value::Null => true,
                    Value::Bool(b) => !b,
                    Value::Array(a) => a.is_empty(),
                    _ => false,
                };
                if !unset {
                    merged.insert(k, v);
                }
            }
        }
        let keys: Vec<String> = merged.keys().cloned().collect();
        let out: T = serde_json::from_value(Value::Object(merged))
            .map_err(|e| failed(format!("config section `{command}`: {e}")))?;
        // Catch typos: every key must survive a round trip through T.
        if let Value::Object(known) = serde_json::to_value(&out)? {
            if let Some(k) = keys.iter().find(|k| !known.contains_key(*k)) {
                return Err(failed(format!("config section `{command}`: unknown key `{k}`")));
            }
        }
        Ok(out)
    }
}
