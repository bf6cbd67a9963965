//! Output files: CSV and JSON at 12 significant digits plus a provenance record.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Decimal text with 12 significant digits; non-finite values become empty.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        round12(x).to_string()
    } else {
        String::new()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Applies [`round12`] to every number in a JSON tree.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => {
                serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
            }
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub timestamp: u64,
    pub cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_plane_waves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    pub outputs: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, config_text: &str, cutoff: f64) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            command: command.to_string(),
            config_hash: sha256_hex(config_text.as_bytes()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            cutoff,
            num_plane_waves: None,
            resolution: None,
            drift: None,
            outputs: Vec::new(),
        }
    }
}

/// Tracks files written by one run so they can be removed if the run fails.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            created_dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `{"provenance": "provenance.json", "data": value}` with rounded numbers.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let data = round_json(serde_json::to_value(value)?);
        let doc = serde_json::json!({ "provenance": "provenance.json", "data": data });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &bytes)
    }

    pub fn file_names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    pub fn finish(mut self, mut provenance: Provenance) -> Result<Vec<PathBuf>> {
        provenance.outputs = self.file_names();
        let mut text = serde_json::to_string_pretty(&round_json(serde_json::to_value(&provenance)?))?;
        text.push('\n');
        self.write("provenance.json", text.as_bytes())?;
        Ok(std::mem::take(&mut self.written))
    }

    /// Removes every file written so far (and the directory if this run made it).
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
