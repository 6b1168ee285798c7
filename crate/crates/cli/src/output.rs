//! Writers for run artifacts. Every file carries the config digest: JSON as a
//! `config_digest` field, CSV as a leading `#` comment, SVG as an XML comment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ordscore_core::data::{write_csv, Schema, Table};
use ordscore_core::{Crossing, Scorecard};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_at, CliError, Result};

/// On-disk scorecard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorecardFile {
    pub feature_names: Vec<String>,
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub convention: Crossing,
    pub config_digest: String,
}

impl ScorecardFile {
    pub fn new(card: &Scorecard, feature_names: Vec<String>, config_digest: String) -> Self {
        ScorecardFile {
            feature_names,
            beta: card.beta.clone(),
            tau: card.tau.clone(),
            convention: card.crossing,
            config_digest,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let file: ScorecardFile = serde_json::from_str(&text)
            .map_err(|e| CliError::ConfigParse { path: path.to_path_buf(), message: e.to_string() })?;
        if file.feature_names.len() != file.beta.len() {
            return Err(CliError::ConfigParse {
                path: path.to_path_buf(),
                message: "feature_names and beta differ in length".into(),
            });
        }
        Ok(file)
    }

    pub fn scorecard(&self) -> Result<Scorecard> {
        let mut card = Scorecard::new(self.beta.clone(), self.tau.clone())?;
        card.crossing = self.convention;
        Ok(card)
    }
}

/// Collects the files a command writes, in order, for the manifest.
pub struct OutDir {
    root: PathBuf,
    digest: String,
    written: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(root: PathBuf, digest: &str) -> Result<OutDir> {
        fs::create_dir_all(&root).map_err(io_at(&root))?;
        Ok(OutDir { root, digest: digest.to_string(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// `(file name, sha256)` of everything written so far.
    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(io_at(&path))?;
        log::info!("wrote {}", path.display());
        self.written.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    /// Pretty JSON; objects gain a `config_digest` field first.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(json_err)?;
        if let serde_json::Value::Object(map) = &mut v {
            if !map.contains_key("config_digest") {
                let mut with = serde_json::Map::new();
                with.insert("config_digest".into(), self.digest.clone().into());
                with.extend(std::mem::take(map));
                *map = with;
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&v).map_err(json_err)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }

    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("{}{body}", self.csv_header());
        self.put(name, text.as_bytes())
    }

    pub fn table(&mut self, name: &str, table: &Table, schema: Schema) -> Result<()> {
        let mut bytes = self.csv_header().into_bytes();
        write_csv(table, schema, &mut bytes)?;
        self.put(name, &bytes)
    }

    /// Line-delimited JSON after a header line holding the digest.
    pub fn jsonl(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let mut bytes = Vec::new();
        serde_json::to_writer(&mut bytes, &serde_json::json!({ "config_digest": self.digest })).map_err(json_err)?;
        bytes.push(b'\n');
        bytes.write_all(body).map_err(io_at(self.path(name)))?;
        self.put(name, &bytes)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<()> {
        let comment = format!("<!-- config_digest: {} -->\n", self.digest);
        let text = match svg.find('>') {
            Some(i) if svg.starts_with("<svg") => format!("{}\n{comment}{}", &svg[..=i], svg[i + 1..].trim_start()),
            _ => format!("{comment}{svg}"),
        };
        self.put(name, text.as_bytes())
    }

    fn csv_header(&self) -> String {
        format!("# config_digest: {}\n", self.digest)
    }
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Core(ordscore_core::Error::Io(e.into()))
}
