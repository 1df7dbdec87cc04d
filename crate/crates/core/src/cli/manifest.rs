//! Run manifests: what a command read, which knobs it used and what it wrote,
//! each file pinned by its SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::bn::Variable;

pub const MANIFEST_FORMAT: &str = "cbn-manifest/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name, verbatim.
    pub args: Vec<String>,
    pub inputs: Vec<FileDigest>,
    /// Digest of the variable list (`name:state,state` lines).
    pub schema_sha256: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn schema_digest(variables: &[Variable]) -> String {
    let mut s = String::new();
    for v in variables {
        s.push_str(v.name());
        s.push(':');
        s.push_str(&v.states().join(","));
        s.push('\n');
    }
    sha256_hex(s.as_bytes())
}

/// Collects digests while a command runs.
#[derive(Debug)]
pub struct Recorder {
    command: String,
    args: Vec<String>,
    inputs: Vec<FileDigest>,
    schema: Option<String>,
    seeds: BTreeMap<String, u64>,
    config: serde_json::Value,
    outputs: Vec<FileDigest>,
}

impl Recorder {
    pub fn new(command: &str, args: &[String]) -> Self {
        Recorder {
            command: command.to_string(),
            args: args.to_vec(),
            inputs: Vec::new(),
            schema: None,
            seeds: BTreeMap::new(),
            config: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|_| CliError::validation(format!("{}: not valid UTF-8", path.display())))
    }

    pub fn schema(&mut self, variables: &[Variable]) {
        self.schema = Some(schema_digest(variables));
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    /// Writes an output file and records its digest.
    pub fn write(&mut self, role: &str, path: &Path, contents: &[u8]) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
        self.outputs.push(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            format: MANIFEST_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            args: self.args,
            inputs: self.inputs,
            schema_sha256: self.schema,
            seeds: self.seeds,
            config: self.config,
            outputs: self.outputs,
        }
    }

    /// Finishes and writes the manifest to `path`.
    pub fn save(self, path: &Path) -> Result<RunManifest, CliError> {
        let manifest = self.finish();
        let text = manifest.to_json();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
        Ok(manifest)
    }
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let m: RunManifest =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::validation(format!("unsupported manifest format `{}`", m.format)));
        }
        Ok(m)
    }

    /// Input files whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>, CliError> {
        changed(&self.inputs)
    }

    /// Output files whose current digest differs from the recorded one.
    pub fn changed_outputs(&self) -> Result<Vec<PathBuf>, CliError> {
        changed(&self.outputs)
    }
}

fn changed(files: &[FileDigest]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for f in files {
        let path = PathBuf::from(&f.path);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            out.push(path);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn schema_digest_sees_state_order() {
        let a = Variable::with_states("X", &["a", "b"]).unwrap();
        let b = Variable::with_states("X", &["b", "a"]).unwrap();
        assert_ne!(schema_digest(&[a]), schema_digest(&[b]));
    }

    #[test]
    fn manifest_round_trip() {
        let mut r = Recorder::new("fit", &["--data".into(), "x.csv".into()]);
        r.seed("em", 3);
        r.config(serde_json::json!({"ess": 1.0}));
        let m = r.finish();
        assert_eq!(RunManifest::from_json(&m.to_json()).unwrap(), m);
        let bad = m.to_json().replace(MANIFEST_FORMAT, "other/9");
        assert!(RunManifest::from_json(&bad).is_err());
    }
}
