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

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ssbv_cli::manifest::RunManifest;
use ssbv_cli::report::Report;
use ssbv_core::bv::{all_oracles, representative_oracles};
use ssbv_core::{OracleSpec, Profile, ShotTable};

fn ssbv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssbv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, body: &str) {
    fs::write(
        dir.join("exp.toml"),
        format!("schema = \"ssbv-experiment/1\"\n{body}"),
    )
    .unwrap();
}

/// A table with `succ` hits on `b` and the rest on `b` with bit 0 flipped.
fn two_outcome(spec: OracleSpec, succ: u64, shots: u64) -> ShotTable {
    let mut t = ShotTable::empty(spec);
    t.record(spec.b, succ);
    t.record(spec.b.with_bit(0, !spec.b.bit(0)), shots - succ);
    t
}

fn write_tables(dir: &Path, tables: &[ShotTable]) {
    fs::create_dir_all(dir).unwrap();
    for t in tables {
        let name = format!("n{}_{}.counts", t.oracle().n(), t.oracle().b);
        fs::write(dir.join(name), t.to_text()).unwrap();
    }
}

#[test]
fn generate_writes_one_circuit_per_oracle() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "n_min = 2\nn_max = 6\nprofile = \"montreal\"\n");
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "hh", "generate"],
    ));
    let expected: usize = (2..=6)
        .map(|n| representative_oracles(n).unwrap().len())
        .sum();
    assert_eq!(expected, 25);
    let m = RunManifest::open(&dir.path().join("hh")).unwrap();
    assert_eq!(m.circuits.len(), expected);
    assert_eq!(
        fs::read_dir(dir.path().join("hh/circuits"))
            .unwrap()
            .count(),
        expected
    );
    m.verify(&dir.path().join("hh")).unwrap();

    let text = fs::read_to_string(dir.path().join("hh").join(&m.circuits[0].file)).unwrap();
    ssbv_core::TimedCircuit::from_text(&text).unwrap();

    ok(&ssbv(
        dir.path(),
        &[
            "--config", "exp.toml", "--out", "chain", "--layout", "chain", "generate",
        ],
    ));
    let c = RunManifest::open(&dir.path().join("chain")).unwrap();
    let differs = m
        .circuits
        .iter()
        .zip(&c.circuits)
        .any(|(a, b)| a.file == b.file && a.cnot_count != b.cnot_count);
    assert!(differs, "chain and heavy-hex routed identically");
}

#[test]
fn oversized_instance_is_an_error_exit() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "n_min = 3\nn_max = 6\nlayout = \"chain:5\"\n");
    let out = ssbv(dir.path(), &["--config", "exp.toml", "generate"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "n_min = 5\nn_max = 4\n");
    assert_eq!(
        ssbv(dir.path(), &["--config", "exp.toml", "generate"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ssbv(dir.path(), &["--dd", "ur5", "generate"]).status.code(),
        Some(2)
    );
}

#[test]
fn noiseless_simulation_is_exact_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "n_min = 2\nn_max = 5\nprofile = \"noiseless\"\nshots = 200\n[dd]\nsequence = \"ur14\"\n",
    );
    ok(&ssbv(
        dir.path(),
        &[
            "--config", "exp.toml", "--out", "a", "--seed", "3", "simulate",
        ],
    ));
    let out = dir.path().join("a");
    let m = RunManifest::open(&out).unwrap();
    let tables = m.load_tables(&out).unwrap();
    assert_eq!(
        tables.values().map(Vec::len).sum::<usize>(),
        (2..=5).map(|n| n + 1).sum::<usize>()
    );
    for t in tables.values().flatten() {
        assert_eq!(t.successes(), 200, "oracle {}", t.oracle().b);
    }

    ok(&ssbv(
        dir.path(),
        &[
            "--config", "exp.toml", "--out", "a", "--seed", "3", "simulate",
        ],
    ));
    let again = RunManifest::open(&out).unwrap();
    assert_eq!(again.tables, m.tables);
    assert_eq!(again.runs.len(), 2);
    assert_eq!(again.runs[1].files_added, 0);

    // A different seed must not silently overwrite recorded tables.
    write_config(
        dir.path(),
        "n_min = 2\nn_max = 5\nprofile = \"montreal\"\nshots = 200\n",
    );
    let clash = ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "a", "simulate"],
    );
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn dd_raises_mean_success_on_noisy_profile() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "n_min = 6\nn_max = 6\nprofile = \"montreal\"\nshots = 4000\ncollection = \"per-size\"\n",
    );
    let mean_ps = |name: &str| {
        let out = dir.path().join(name);
        let tables = RunManifest::open(&out).unwrap().load_tables(&out).unwrap();
        let ts = &tables[&6];
        ts.iter()
            .map(|t| t.successes() as f64 / t.total_shots() as f64)
            .sum::<f64>()
            / ts.len() as f64
    };
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "bare", "simulate"],
    ));
    ok(&ssbv(
        dir.path(),
        &[
            "--config", "exp.toml", "--out", "dd", "--dd", "ur14", "simulate",
        ],
    ));
    let (bare, dd) = (mean_ps("bare"), mean_ps("dd"));
    assert!(dd > bare, "DD {dd:.4} vs bare {bare:.4}");
}

#[test]
fn ingest_accepts_well_formed_and_names_bad_records() {
    let dir = tempfile::tempdir().unwrap();
    let spec = OracleSpec::new("1010".parse().unwrap());
    let t = two_outcome(spec, 700, 1000);
    write_tables(&dir.path().join("good"), std::slice::from_ref(&t));
    ok(&ssbv(dir.path(), &["--out", "o", "ingest", "good"]));
    let out = dir.path().join("o");
    let m = RunManifest::open(&out).unwrap();
    assert_eq!(m.tables[0].shots, 1000);
    assert_eq!(m.load_tables(&out).unwrap()[&4], vec![t]);

    fs::create_dir_all(dir.path().join("bad")).unwrap();
    fs::write(
        dir.path().join("bad/x.counts"),
        "ssbv-counts 1\nn 4\noracle 1010\nshots 10\n1010 7\n101 3\n",
    )
    .unwrap();
    let bad = ssbv(dir.path(), &["--out", "o2", "ingest", "bad"]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("line 6") && err.contains("\"101\""), "{err}");
    assert!(!dir.path().join("o2/manifest.json").exists());

    let schema = ssbv(
        dir.path(),
        &["--out", "o3", "ingest", "good", "--schema", "csv"],
    );
    assert_eq!(schema.status.code(), Some(2));
}

#[test]
fn ingested_bv6_tables_give_success_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let tables: Vec<ShotTable> = all_oracles(6, 12)
        .unwrap()
        .into_iter()
        .map(|spec| {
            // Oracle 0b101101 is answered correctly only 40% of the time.
            let succ = if spec.b.value() == 45 { 400 } else { 900 };
            two_outcome(spec, succ, 1000)
        })
        .collect();
    write_tables(&dir.path().join("in"), &tables);
    write_config(
        dir.path(),
        "n_min = 6\nn_max = 6\noracles = \"all\"\ncollection = \"per-size\"\nprofile = \"noiseless\"\n",
    );
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "ingest", "in"],
    ));
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "analyze"],
    ));
    let report =
        Report::from_json(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    let s = &report.success[0];
    assert_eq!(s.diagonal.len(), 64);
    assert!(!s.bqp);
    for (o, p) in &s.diagonal {
        let want = if o == "101101" { 0.4 } else { 0.9 };
        assert!((p - want).abs() < 1e-12, "{o}: {p}");
    }
    assert_eq!(s.matrix.as_ref().unwrap().len(), 128);
    let matrix = fs::read_to_string(dir.path().join("o/plots/success_n6.tsv")).unwrap();
    assert_eq!(matrix.lines().count(), 129);
}

/// Tables whose TTS is `A 2^(lambda n)` under the profile's run-time model,
/// up to rounding of the success counts.
fn synthetic_tables(
    lambda: f64,
    ns: std::ops::RangeInclusive<usize>,
    shots: u64,
) -> Vec<ShotTable> {
    let model = Profile::builtin("noiseless").unwrap().run_time;
    let n0 = *ns.start();
    let a = 2.0 * model.run_time(n0) / 2f64.powf(lambda * n0 as f64);
    let mut out = Vec::new();
    for n in ns {
        let r = a * 2f64.powf(lambda * n as f64) / model.run_time(n);
        let p = 1.0 - 0.01f64.powf(1.0 / r);
        let succ = (p * shots as f64).round() as u64;
        for spec in representative_oracles(n).unwrap() {
            out.push(two_outcome(spec, succ, shots));
        }
    }
    out
}

#[test]
fn analyze_recovers_synthetic_exponent_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(
        &dir.path().join("in"),
        &synthetic_tables(0.6, 3..=12, 1_000_000_000),
    );
    write_config(
        dir.path(),
        "n_min = 3\nn_max = 12\nprofile = \"noiseless\"\nseed = 5\n",
    );
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "ingest", "in"],
    ));
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "analyze"],
    ));
    let first = fs::read(dir.path().join("o/report.json")).unwrap();
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "analyze"],
    ));
    assert_eq!(first, fs::read(dir.path().join("o/report.json")).unwrap());

    let report = Report::from_json(std::str::from_utf8(&first).unwrap()).unwrap();
    let fit = report.quantum_fit.unwrap();
    assert!((fit.lambda - 0.6).abs() < 1e-6, "lambda = {}", fit.lambda);
    assert_eq!(report.terminated_at, None);

    // One row per finite n, every field numeric.
    let tts = fs::read_to_string(dir.path().join("o/plots/tts.tsv")).unwrap();
    let mut lines = tts.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let fields: Vec<f64> = row.split('\t').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), header.len());
    }

    fs::remove_dir_all(dir.path().join("o/plots")).unwrap();
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "plot-data"],
    ));
    assert_eq!(
        fs::read_to_string(dir.path().join("o/plots/tts.tsv")).unwrap(),
        tts
    );
}

#[test]
fn zero_success_point_terminates_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = synthetic_tables(0.8, 3..=16, 32_000);
    for spec in representative_oracles(17).unwrap() {
        tables.push(two_outcome(spec, 0, 32_000));
    }
    write_tables(&dir.path().join("in"), &tables);
    write_config(
        dir.path(),
        "n_min = 3\nn_max = 17\nprofile = \"noiseless\"\n",
    );
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "ingest", "in"],
    ));
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "analyze"],
    ));
    let report =
        Report::from_json(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report.terminated_at, Some(17));
    assert_eq!(report.quantum_fit.unwrap().window.1, 16);
    assert_eq!(report.local_lambda.last().unwrap().0, 16);
    let rows = fs::read_to_string(dir.path().join("o/plots/tts.tsv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, 14);
}

#[test]
fn analyze_lists_missing_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(&dir.path().join("in"), &synthetic_tables(0.6, 3..=5, 1000));
    write_config(
        dir.path(),
        "n_min = 3\nn_max = 6\nprofile = \"noiseless\"\n",
    );
    ok(&ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "ingest", "in"],
    ));
    let out = ssbv(
        dir.path(),
        &["--config", "exp.toml", "--out", "o", "analyze"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n=6 oracle 000000"), "{err}");
}
