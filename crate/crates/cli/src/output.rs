use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use polyfract::report::to_csv;

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

/// Where results go and what provenance they carry.
pub struct Sink {
    dir: PathBuf,
    format: Format,
    seed: u64,
    config_json: String,
    config_hash: String,
}

impl Sink {
    pub fn new(dir: &Path, format: Format, config: &ExperimentConfig) -> Result<Self, CliError> {
        let config_json = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
        let mut hashed = config.clone();
        hashed.output.dir = None;
        let hashed = serde_json::to_string(&hashed).map_err(|e| CliError::Io(e.to_string()))?;
        let config_hash = hex::encode(Sha256::digest(hashed.as_bytes()));
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            format,
            seed: config.seed(),
            config_json,
            config_hash,
        })
    }

    /// `# polyfract <version> config_hash=<sha256> seed=<seed>` and the
    /// resolved config.
    pub fn header(&self) -> String {
        format!(
            "# polyfract {} config_hash={} seed={}\n# config {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed,
            self.config_json
        )
    }

    fn write(&self, file: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(file);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn envelope<T: Serialize + ?Sized>(&self, key: &str, value: &T) -> Result<String, CliError> {
        let config: serde_json::Value =
            serde_json::from_str(&self.config_json).map_err(|e| CliError::Io(e.to_string()))?;
        let mut doc = serde_json::json!({
            "tool": "polyfract",
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": config,
        });
        doc[key] = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// A table as `<stem>.csv` or `<stem>.json`.
    pub fn table<T: Serialize>(&self, stem: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => {
                let body = to_csv(rows)?;
                self.write(&format!("{stem}.csv"), &(self.header() + &body))
            }
            Format::Json => self.write(&format!("{stem}.json"), &self.envelope("rows", rows)?),
        }
    }

    /// A JSON document, whatever the table format.
    pub fn document<T: Serialize>(&self, stem: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(&format!("{stem}.json"), &self.envelope("result", value)?)
    }

    /// Free text with the header spliced in after its first line.
    pub fn text_after_first_line(&self, file: &str, text: &str) -> Result<PathBuf, CliError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        self.write(file, &format!("{first}\n{}{rest}", self.header()))
    }
}
