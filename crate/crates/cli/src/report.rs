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

//! The analysis report and its columnar plot files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssbv_core::analysis::{AnalysisConfig, FitResult, SpeedupCurve, TtsPoint};
use ssbv_core::{Error, Result};

pub const REPORT_SCHEMA: &str = "ssbv-report/1";
pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub oracle: String,
    pub outcome: String,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessSummary {
    pub n: usize,
    /// Every oracle answered correctly more than half the time.
    pub bqp: bool,
    pub diagonal: Vec<(String, f64)>,
    /// Full output distributions, kept for small `n` only.
    pub matrix: Option<Vec<MatrixCell>>,
}

/// Everything `analyze` computes. Contains no timestamps, so identical
/// inputs serialize to identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub device: String,
    pub layout: String,
    pub dd: String,
    pub seed: u64,
    pub n_range: (usize, usize),
    pub analysis: AnalysisConfig,
    /// Smallest size whose TTS is infinite, if any.
    pub terminated_at: Option<usize>,
    pub quantum_fit: Option<FitResult>,
    pub quantum_fit_error: Option<String>,
    pub classical_fit: Option<FitResult>,
    pub local_lambda: Vec<(usize, f64)>,
    pub speedup: SpeedupCurve,
    pub quantum: Vec<TtsPoint>,
    pub classical: Vec<TtsPoint>,
    pub success: Vec<SuccessSummary>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::InvalidArgument(format!("report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("report: {e}")))?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported report schema {:?}",
                r.schema
            )));
        }
        Ok(r)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:e}"))
}

fn write_tsv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: Vec<String>,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut text = header.join("\t");
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

/// Tab-separated plot files with a header row: `tts.tsv` (one row per
/// finite quantum TTS), `local_lambda.tsv`, `speedup.tsv`, `success.tsv`
/// and `success_n<n>.tsv` for sizes with a stored matrix.
pub fn write_plots(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let tts = report
        .quantum
        .iter()
        .filter_map(|q| {
            let mean = q.tts_mean?;
            let c = report
                .classical
                .iter()
                .find(|c| c.n == q.n)
                .and_then(|c| c.tts_mean);
            Some(format!(
                "{}\t{mean:e}\t{}\t{}\t{}",
                q.n,
                opt(q.ci_low),
                opt(q.ci_high),
                opt(c)
            ))
        })
        .collect();
    write_tsv(
        dir,
        "tts.tsv",
        &[
            "n",
            "tts_quantum_s",
            "ci_low_s",
            "ci_high_s",
            "tts_classical_s",
        ],
        tts,
        &mut written,
    )?;

    let local = report
        .local_lambda
        .iter()
        .map(|(n, l)| format!("{n}\t{l}"))
        .collect();
    write_tsv(
        dir,
        "local_lambda.tsv",
        &["n", "lambda"],
        local,
        &mut written,
    )?;

    let speedup = report
        .speedup
        .points
        .iter()
        .map(|(n, s)| format!("{n}\t{s:e}"))
        .collect();
    write_tsv(dir, "speedup.tsv", &["n", "speedup"], speedup, &mut written)?;

    let mut success = Vec::new();
    for s in &report.success {
        for (o, p) in &s.diagonal {
            success.push(format!("{}\t{o}\t{p}\t{}", s.n, s.bqp));
        }
    }
    write_tsv(
        dir,
        "success.tsv",
        &["n", "oracle", "p_s", "bqp"],
        success,
        &mut written,
    )?;

    for s in &report.success {
        let Some(cells) = &s.matrix else { continue };
        let mut rows = Vec::with_capacity(cells.len());
        for c in cells {
            let mut line = String::new();
            let _ = write!(line, "{}\t{}\t{}", c.oracle, c.outcome, c.frequency);
            rows.push(line);
        }
        write_tsv(
            dir,
            &format!("success_n{}.tsv", s.n),
            &["oracle", "outcome", "frequency"],
            rows,
            &mut written,
        )?;
    }
    Ok(written)
}
