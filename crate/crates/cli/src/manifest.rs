// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! The run manifest: an append-only record of every artifact written into an
//! output directory, with SHA-256 checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssbv_core::{Error, Result, ShotTable};

pub const MANIFEST_SCHEMA: &str = "ssbv-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// The resolved configuration the command ran with.
    pub config: serde_json::Value,
    pub files_added: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitEntry {
    pub n: usize,
    pub oracle: String,
    pub file: String,
    pub sha256: String,
    pub layout: String,
    pub cnot_count: usize,
    pub dd: Option<String>,
    pub run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub n: usize,
    pub oracle: String,
    pub file: String,
    pub sha256: String,
    pub shots: u64,
    /// `simulated`, `reduced:<n>` or `ingested:<path>`.
    pub source: String,
    pub run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub runs: Vec<RunRecord>,
    pub circuits: Vec<CircuitEntry>,
    pub tables: Vec<TableEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn corrupt(msg: String) -> Error {
    Error::InvalidArgument(format!("manifest: {msg}"))
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            runs: Vec::new(),
            circuits: Vec::new(),
            tables: Vec::new(),
        }
    }
}

impl RunManifest {
    /// Loads `out/manifest.json`, or starts a new manifest if there is none.
    pub fn open(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path)?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(corrupt(format!("unsupported schema {:?}", m.schema)));
        }
        Ok(m)
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| corrupt(e.to_string()))?;
        let tmp = out.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, text + "\n")?;
        fs::rename(tmp, out.join(MANIFEST_FILE))?;
        Ok(())
    }

    /// Index the next run record will get.
    pub fn next_run(&self) -> usize {
        self.runs.len()
    }

    fn recorded_sha(&self, file: &str) -> Option<&str> {
        self.circuits
            .iter()
            .map(|c| (&c.file, &c.sha256))
            .chain(self.tables.iter().map(|t| (&t.file, &t.sha256)))
            .find(|(f, _)| f.as_str() == file)
            .map(|(_, s)| s.as_str())
    }

    /// Writes `contents` to `out/rel` unless the manifest already records
    /// that file. Returns the checksum and whether the file is new. A file
    /// recorded with different contents is never overwritten.
    pub fn write_file(&self, out: &Path, rel: &str, contents: &[u8]) -> Result<(String, bool)> {
        let sha = sha256_hex(contents);
        if let Some(old) = self.recorded_sha(rel) {
            if old != sha {
                return Err(Error::InvalidArgument(format!(
                    "{rel} is already recorded with different contents; use a fresh output directory"
                )));
            }
            return Ok((sha, false));
        }
        let path = out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, contents)?;
        Ok((sha, true))
    }

    /// Every referenced file exists and matches its checksum.
    pub fn verify(&self, out: &Path) -> Result<()> {
        let files = self
            .circuits
            .iter()
            .map(|c| (&c.file, &c.sha256))
            .chain(self.tables.iter().map(|t| (&t.file, &t.sha256)));
        for (file, sha) in files {
            let bytes = fs::read(out.join(file)).map_err(|e| corrupt(format!("{file}: {e}")))?;
            if &sha256_hex(&bytes) != sha {
                return Err(corrupt(format!("checksum mismatch for {file}")));
            }
        }
        Ok(())
    }

    /// Verified shot tables grouped by problem size.
    pub fn load_tables(&self, out: &Path) -> Result<BTreeMap<usize, Vec<ShotTable>>> {
        let mut by_n: BTreeMap<usize, Vec<ShotTable>> = BTreeMap::new();
        for e in &self.tables {
            let bytes =
                fs::read(out.join(&e.file)).map_err(|err| corrupt(format!("{}: {err}", e.file)))?;
            if sha256_hex(&bytes) != e.sha256 {
                return Err(corrupt(format!("checksum mismatch for {}", e.file)));
            }
            let text = String::from_utf8(bytes)
                .map_err(|_| corrupt(format!("{} is not UTF-8", e.file)))?;
            let table =
                ShotTable::from_text(&text).map_err(|err| corrupt(format!("{}: {err}", e.file)))?;
            by_n.entry(e.n).or_default().push(table);
        }
        for tables in by_n.values_mut() {
            tables.sort_by_key(|t| t.oracle().b);
        }
        Ok(by_n)
    }
}
