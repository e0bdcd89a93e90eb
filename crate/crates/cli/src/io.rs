//! File formats and run provenance: line-delimited JSON readers that skip
//! embedded manifest headers, atomic output writing, and the manifest every
//! output embeds.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::CliError;

/// A line that failed to parse or validate, with its 1-based line number.
#[derive(Debug, Clone)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

pub struct JsonlRead<T> {
    /// Parsed records with their 1-based source line numbers.
    pub records: Vec<(usize, T)>,
    pub skipped: Vec<LineIssue>,
}

/// Reads line-delimited JSON records. Blank lines and embedded manifest
/// header lines (objects carrying a "manifest" key) are skipped silently;
/// malformed lines are collected as issues, not errors.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlRead<T>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                skipped.push(LineIssue { line: line_no, message: format!("invalid JSON: {e}") });
                continue;
            }
        };
        if value.get("manifest").is_some() {
            continue;
        }
        match serde_json::from_value::<T>(value) {
            Ok(record) => records.push((line_no, record)),
            Err(e) => {
                skipped.push(LineIssue { line: line_no, message: e.to_string() });
            }
        }
    }
    Ok(JsonlRead { records, skipped })
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance header embedded in every output: the command, its resolved
/// configuration, content digests of each input, tool version, seed, skip
/// counts, and a timestamp (the one field excluded from the determinism
/// contract).
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub skipped_lines: u64,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config,
            inputs: Vec::new(),
            skipped_lines: 0,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex });
        Ok(())
    }
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let write = |p: &Path| -> std::io::Result<()> {
        fs::write(p, bytes)?;
        fs::rename(p, path)?;
        Ok(())
    };
    write(&tmp).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// JSONL output: one manifest header line (optionally carrying a summary
/// object), then one record per line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    manifest: &RunManifest,
    summary: Option<serde_json::Value>,
    records: &[T],
) -> Result<(), CliError> {
    let mut header = serde_json::Map::new();
    header.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    if let Some(summary) = summary {
        header.insert("summary".into(), summary);
    }
    let mut out = serde_json::to_string(&serde_json::Value::Object(header)).expect("header");
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Pretty JSON document with the manifest as its first field.
pub fn write_json_doc<T: Serialize>(
    path: &Path,
    manifest: &RunManifest,
    body: &T,
) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    let body = serde_json::to_value(body).expect("body serializes");
    match body {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                doc.insert(k, v);
            }
        }
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut out =
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("doc serializes");
    out.push('\n');
    write_atomic(path, out.as_bytes())
}

/// CSV with the manifest embedded as a leading `#` comment line.
pub fn write_csv(
    path: &Path,
    manifest: &RunManifest,
    header: &str,
    rows: &[String],
) -> Result<(), CliError> {
    let mut out = format!(
        "# manifest: {}\n{header}\n",
        serde_json::to_string(manifest).expect("manifest serializes")
    );
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Companion JSON path for a CSV output: the extension swapped to `json`,
/// or `.doc.json` appended when that would collide with the output itself.
pub fn companion_json_path(path: &Path) -> std::path::PathBuf {
    let candidate = path.with_extension("json");
    if candidate == path {
        let mut name = path.as_os_str().to_os_string();
        name.push(".doc.json");
        std::path::PathBuf::from(name)
    } else {
        candidate
    }
}
