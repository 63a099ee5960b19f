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

//! The subcommands. Each one reads the config, does its work and appends a
//! run record to the manifest in the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ssbv_core::analysis::{
    local_lambda, speedup_ratio, success_matrix, tts_classical, tts_point, worst_case_lambda,
    TtsPoint,
};
use ssbv_core::pipeline::{prepare, reduce_from_max, simulate_oracle, RunOptions};
use ssbv_core::seed::{stream, Purpose};
use ssbv_core::{Error, OracleSpec, Result, ShotTable};

use crate::config::{Collection, ExperimentConfig, Resolved};
use crate::manifest::{unix_now, CircuitEntry, RunManifest, RunRecord, TableEntry};
use crate::report::{write_plots, MatrixCell, Report, SuccessSummary, REPORT_FILE, REPORT_SCHEMA};

/// Schema name accepted by `ingest`.
pub const COUNTS_SCHEMA: &str = "ssbv-counts/1";

/// Success matrices are stored in full only up to this size.
const MATRIX_MAX_N: usize = 6;

pub fn counts_file(n: usize, b: &str) -> String {
    format!("counts/n{n}_{b}.counts")
}

pub fn circuit_file(n: usize, b: &str) -> String {
    format!("circuits/n{n}_{b}.circuit")
}

fn snapshot(r: &Resolved) -> serde_json::Value {
    serde_json::json!({
        "experiment": r.config,
        "device": r.profile.device.name,
        "layout": r.layout_name,
        "noise": r.profile.noise,
    })
}

fn finish_run(
    mut manifest: RunManifest,
    out: &Path,
    command: &str,
    started: u64,
    config: serde_json::Value,
    files_added: usize,
) -> Result<RunManifest> {
    manifest.runs.push(RunRecord {
        command: command.into(),
        started_unix: started,
        finished_unix: unix_now(),
        config,
        files_added,
    });
    manifest.save(out)?;
    Ok(manifest)
}

fn run_options(r: &Resolved) -> Result<RunOptions> {
    Ok(RunOptions {
        dd: r.dd_policy()?,
        ..RunOptions::default()
    })
}

fn check_capacity(r: &Resolved, n: usize) -> Result<()> {
    let usable = r.profile.device.graph.usable_nodes().len();
    if n + 1 > usable {
        return Err(Error::Infeasible(format!(
            "BV-{n} needs {} qubits but layout {} has {usable} usable",
            n + 1,
            r.layout_name
        )));
    }
    Ok(())
}

fn dd_label(r: &Resolved) -> Option<String> {
    r.config.dd.sequence.map(|n| format!("ur{n}"))
}

/// Routes (and DD-dresses) every oracle in scope and writes circuit files.
/// Instances that cannot be routed are reported and skipped; the first such
/// error is returned after the others are written.
pub fn generate(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = unix_now();
    let r = cfg.resolve()?;
    let out = &cfg.out;
    let options = run_options(&r)?;
    let mut manifest = RunManifest::open(out)?;
    let run = manifest.next_run();
    let mut added = 0;
    let mut first_err = None;
    for n in cfg.n_min..=cfg.n_max {
        for spec in cfg.oracles_at(n)? {
            let b = spec.b.to_string();
            let prepared =
                check_capacity(&r, n).and_then(|_| prepare(&spec, &r.profile.device, &options));
            let prepared = match prepared {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("n={n} oracle {b}: {e}");
                    first_err.get_or_insert(e);
                    continue;
                }
            };
            let p = &prepared.program;
            let wires = |v: &[usize]| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let readout: Vec<String> = p
                .readout
                .iter()
                .map(|w| w.map_or("-".to_string(), |w| w.to_string()))
                .collect();
            let text = format!(
                "# oracle {b}\n# layout {}\n# cnot_count {}\n# physical {}\n# readout {}\n{}",
                r.layout_name,
                prepared.routed.cnot_count,
                wires(&p.physical),
                readout.join(" "),
                p.circuit.to_text()
            );
            let file = circuit_file(n, &b);
            let (sha, new) = manifest.write_file(out, &file, text.as_bytes())?;
            if new {
                added += 1;
                manifest.circuits.push(CircuitEntry {
                    n,
                    oracle: b,
                    file,
                    sha256: sha,
                    layout: r.layout_name.clone(),
                    cnot_count: prepared.routed.cnot_count,
                    dd: dd_label(&r),
                    run,
                });
            }
        }
    }
    let manifest = finish_run(manifest, out, "generate", started, snapshot(&r), added)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn record_table(
    manifest: &mut RunManifest,
    out: &Path,
    table: &ShotTable,
    source: String,
    run: usize,
) -> Result<bool> {
    let n = table.oracle().n();
    let b = table.oracle().b.to_string();
    let file = counts_file(n, &b);
    let (sha, new) = manifest.write_file(out, &file, table.to_text().as_bytes())?;
    if new {
        manifest.tables.push(TableEntry {
            n,
            oracle: b,
            file,
            sha256: sha,
            shots: table.total_shots(),
            source,
            run,
        });
    }
    Ok(new)
}

fn simulate_set(
    r: &Resolved,
    options: &RunOptions,
    specs: &[OracleSpec],
) -> Result<Vec<ShotTable>> {
    let cfg = &r.config;
    specs
        .iter()
        .map(|spec| {
            check_capacity(r, spec.n())?;
            let t = simulate_oracle(
                spec,
                &r.profile.device,
                &r.profile.noise,
                options,
                cfg.shots,
                cfg.seed,
            )?;
            if !cfg.quiet {
                eprintln!(
                    "simulated n={} oracle {}: p_s = {:.4}",
                    spec.n(),
                    spec.b,
                    t.successes() as f64 / t.total_shots() as f64
                );
            }
            Ok(t)
        })
        .collect()
}

/// Simulates every oracle in scope and writes count files.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = unix_now();
    let r = cfg.resolve()?;
    let out = &cfg.out;
    let options = run_options(&r)?;
    let mut manifest = RunManifest::open(out)?;
    let run = manifest.next_run();
    let mut added = 0;
    match cfg.collection {
        Collection::ReduceFromMax => {
            let top = simulate_set(&r, &options, &cfg.oracles_at(cfg.n_max)?)?;
            for m in cfg.n_min..=cfg.n_max {
                let source = if m == cfg.n_max {
                    "simulated".to_string()
                } else {
                    format!("reduced:{}", cfg.n_max)
                };
                for t in reduce_from_max(&top, m)? {
                    added += record_table(&mut manifest, out, &t, source.clone(), run)? as usize;
                }
            }
        }
        Collection::PerSize => {
            for n in cfg.n_min..=cfg.n_max {
                for t in simulate_set(&r, &options, &cfg.oracles_at(n)?)? {
                    added +=
                        record_table(&mut manifest, out, &t, "simulated".into(), run)? as usize;
                }
            }
        }
    }
    finish_run(manifest, out, "simulate", started, snapshot(&r), added)
}

fn count_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "counts"))
        .collect();
    files.sort();
    Ok(files)
}

/// Validates external count files and registers them in the manifest.
/// Nothing is recorded unless every file parses.
pub fn ingest(cfg: &ExperimentConfig, paths: &[PathBuf], schema: &str) -> Result<RunManifest> {
    let started = unix_now();
    if schema != COUNTS_SCHEMA {
        return Err(Error::InvalidArgument(format!(
            "unsupported count schema {schema:?} (expected {COUNTS_SCHEMA:?})"
        )));
    }
    let mut parsed = Vec::new();
    for path in paths {
        for file in count_files(path)? {
            let text = fs::read_to_string(&file).map_err(|e| {
                Error::InvalidArgument(format!("cannot read {}: {e}", file.display()))
            })?;
            let table = ShotTable::from_text(&text).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", file.display()),
                },
                other => Error::InvalidArgument(format!("{}: {other}", file.display())),
            })?;
            parsed.push((file, table));
        }
    }
    if parsed.is_empty() {
        return Err(Error::InvalidArgument("no count files found".into()));
    }
    let out = &cfg.out;
    let mut manifest = RunManifest::open(out)?;
    let run = manifest.next_run();
    let mut added = 0;
    for (file, table) in &parsed {
        let source = format!("ingested:{}", file.display());
        added += record_table(&mut manifest, out, table, source, run)? as usize;
    }
    let config = serde_json::json!({ "schema": schema, "files": parsed.len() });
    finish_run(manifest, out, "ingest", started, config, added)
}

/// Tables for exactly the configured oracles, or the list of missing ones.
fn select_tables(
    cfg: &ExperimentConfig,
    available: &BTreeMap<usize, Vec<ShotTable>>,
) -> Result<BTreeMap<usize, Vec<ShotTable>>> {
    let mut selected = BTreeMap::new();
    let mut missing = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        let have = available.get(&n).map(Vec::as_slice).unwrap_or(&[]);
        let mut tables = Vec::new();
        for spec in cfg.oracles_at(n)? {
            match have.iter().find(|t| t.oracle().b == spec.b) {
                Some(t) => tables.push(t.clone()),
                None => missing.push(format!("n={n} oracle {}", spec.b)),
            }
        }
        selected.insert(n, tables);
    }
    if !missing.is_empty() {
        let shown = missing
            .iter()
            .take(20)
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        let more = missing.len().saturating_sub(20);
        let tail = if more > 0 {
            format!(" and {more} more")
        } else {
            String::new()
        };
        return Err(Error::InvalidArgument(format!(
            "missing tables: {shown}{tail}"
        )));
    }
    Ok(selected)
}

/// Builds the report from tables. Pure: the same inputs give the same bytes.
pub fn build_report(r: &Resolved, tables: &BTreeMap<usize, Vec<ShotTable>>) -> Result<Report> {
    let cfg = &r.config;
    let a = cfg.analysis;
    let mut quantum = Vec::new();
    let mut success = Vec::new();
    for (&n, ts) in tables {
        let mut rng = stream(cfg.seed, Purpose::Bootstrap, n as u64, 0);
        quantum.push(tts_point(n, ts, &r.profile.run_time, &a, &mut rng)?);
        let m = success_matrix(ts)?;
        let matrix = (n <= MATRIX_MAX_N).then(|| {
            m.oracles
                .iter()
                .zip(&m.rows)
                .flat_map(|(o, row)| {
                    row.iter().map(move |(outcome, f)| MatrixCell {
                        oracle: o.to_string(),
                        outcome: outcome.to_string(),
                        frequency: *f,
                    })
                })
                .collect()
        });
        success.push(SuccessSummary {
            n,
            bqp: m.bqp_verdict(),
            diagonal: m
                .oracles
                .iter()
                .map(|o| o.to_string())
                .zip(m.diagonal.iter().copied())
                .collect(),
            matrix,
        });
    }
    let classical: Vec<TtsPoint> = tables
        .keys()
        .map(|&n| TtsPoint::exact(n, tts_classical(n, cfg.classical_a_us * 1e-6, a.p_d)))
        .collect();
    let terminated_at = quantum.iter().find(|p| p.terminated).map(|p| p.n);
    let (quantum_fit, quantum_fit_error) = match worst_case_lambda(&quantum, &a) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let local: Vec<(usize, f64)> = quantum
        .iter()
        .filter_map(|p| local_lambda(&quantum, p.n, &a).ok().map(|l| (p.n, l)))
        .collect();
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        device: r.profile.device.name.clone(),
        layout: r.layout_name.clone(),
        dd: dd_label(r).unwrap_or_else(|| "none".into()),
        seed: cfg.seed,
        n_range: (cfg.n_min, cfg.n_max),
        analysis: a,
        terminated_at,
        quantum_fit,
        quantum_fit_error,
        classical_fit: worst_case_lambda(&classical, &a).ok(),
        local_lambda: local,
        speedup: speedup_ratio(&quantum, &classical),
        quantum,
        classical,
        success,
    })
}

/// Analyses the recorded tables, writing `report.json` and the plot files.
pub fn analyze(cfg: &ExperimentConfig) -> Result<Report> {
    let started = unix_now();
    let r = cfg.resolve()?;
    let out = &cfg.out;
    let manifest = RunManifest::open(out)?;
    manifest.verify(out)?;
    let tables = select_tables(cfg, &manifest.load_tables(out)?)?;
    let report = build_report(&r, &tables)?;
    fs::write(out.join(REPORT_FILE), report.to_json()?)?;
    write_plots(&report, &out.join("plots"))?;
    finish_run(manifest, out, "analyze", started, snapshot(&r), 0)?;
    Ok(report)
}

/// Re-emits the plot files from an existing report.
pub fn plot_data(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = &cfg.out;
    let text = fs::read_to_string(out.join(REPORT_FILE))
        .map_err(|e| Error::InvalidArgument(format!("no report in {}: {e}", out.display())))?;
    let report = Report::from_json(&text)?;
    write_plots(&report, &out.join("plots"))
}
