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

//! Single-shot Bernstein-Vazirani oracles, shot tables and size reduction.

use std::collections::BTreeMap;

use crate::circuit::{Bitstring, Dt, GateDurations, GateKind, Scheduler, TimedCircuit};
use crate::error::{invalid, parse_err, Error, Result};

/// Default cap for [`all_oracles`]; 2^12 oracles is already a lot of shots.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// A hidden string `b`. Data qubits are `0..n`, the ancilla is qubit `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OracleSpec {
    pub b: Bitstring,
}

impl OracleSpec {
    pub fn new(b: Bitstring) -> Self {
        Self { b }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn ancilla_index(&self) -> usize {
        self.b.len()
    }

    pub fn k(&self) -> usize {
        self.b.hamming_weight()
    }

    pub fn marked(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.b.bit(i)).collect()
    }

    /// True when `b` has the `1^k 0^(n-k)` shape used by the representative set.
    pub fn is_representative(&self) -> bool {
        let k = self.k();
        (0..self.n()).all(|i| self.b.bit(i) == (i < k))
    }
}

/// The textbook circuit on a fully connected register with unit durations:
/// X on the ancilla, then an H layer, one CNOT per marked qubit in ascending
/// order, and a final H layer on every qubit.
pub fn bv_logical_circuit(spec: &OracleSpec) -> TimedCircuit {
    let n = spec.n();
    let anc = spec.ancilla_index();
    let mut s = Scheduler::new(n + 1, GateDurations::UNIT);
    s.push(GateKind::X, &[anc]);
    for q in 0..n {
        s.push(GateKind::H, &[q]);
    }
    s.push(GateKind::H, &[anc]);
    for q in spec.marked() {
        s.push(GateKind::Cnot, &[q, anc]);
    }
    let all: Vec<usize> = (0..=n).collect();
    s.align(&all);
    for q in all {
        s.push(GateKind::H, &[q]);
    }
    s.finish(Dt::DEFAULT)
}

/// `1^k 0^(n-k)` for `k = 0..=n`.
pub fn representative_oracles(n: usize) -> Result<Vec<OracleSpec>> {
    if n == 0 {
        return invalid("problem size must be at least 1");
    }
    (0..=n)
        .map(|k| Bitstring::ones_then_zeros(n, k).map(OracleSpec::new))
        .collect()
}

/// All `2^n` oracles in lexicographic order.
pub fn all_oracles(n: usize, cap: usize) -> Result<Vec<OracleSpec>> {
    if n == 0 {
        return invalid("problem size must be at least 1");
    }
    if n > cap {
        return invalid(format!(
            "refusing to enumerate 2^{n} oracles (cap is n <= {cap})"
        ));
    }
    (0..1u64 << n)
        .map(|v| Bitstring::new(n, v).map(OracleSpec::new))
        .collect()
}

/// `2^(1-n)`: query one bit, guess the rest.
pub fn classical_success_prob(n: usize) -> f64 {
    assert!(n >= 1, "problem size must be at least 1");
    2f64.powi(1 - n as i32)
}

/// Histogram of measured data-qubit strings for one oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotTable {
    oracle: OracleSpec,
    counts: BTreeMap<Bitstring, u64>,
    total_shots: u64,
}

impl ShotTable {
    pub fn new(oracle: OracleSpec, counts: BTreeMap<Bitstring, u64>) -> Result<Self> {
        if let Some(bad) = counts.keys().find(|b| b.len() != oracle.n()) {
            return invalid(format!(
                "outcome {bad} has length {}, expected {}",
                bad.len(),
                oracle.n()
            ));
        }
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let total_shots = counts.values().sum();
        Ok(Self {
            oracle,
            counts,
            total_shots,
        })
    }

    pub fn empty(oracle: OracleSpec) -> Self {
        Self {
            oracle,
            counts: BTreeMap::new(),
            total_shots: 0,
        }
    }

    pub fn record(&mut self, outcome: Bitstring, count: u64) {
        assert_eq!(outcome.len(), self.oracle.n(), "outcome length mismatch");
        if count > 0 {
            *self.counts.entry(outcome).or_insert(0) += count;
            self.total_shots += count;
        }
    }

    pub fn oracle(&self) -> &OracleSpec {
        &self.oracle
    }

    pub fn counts(&self) -> &BTreeMap<Bitstring, u64> {
        &self.counts
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn count(&self, outcome: &Bitstring) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn successes(&self) -> u64 {
        self.count(&self.oracle.b)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "ssbv-counts 1\nn {}\noracle {}\nshots {}\n",
            self.oracle.n(),
            self.oracle.b,
            self.total_shots
        );
        for (b, c) in &self.counts {
            out.push_str(&format!("{b} {c}\n"));
        }
        out
    }

    /// Parses the counts format. Errors name the offending line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (no, magic) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty counts file"))?;
        if magic != "ssbv-counts 1" {
            return Err(parse_err(
                no,
                format!("expected header 'ssbv-counts 1', got {magic:?}"),
            ));
        }
        let mut last = no;
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| parse_err(last, format!("missing '{key}' line")))?;
            last = no;
            match line.split_once(char::is_whitespace) {
                Some((k, v)) if k == key => Ok((no, v.trim().to_string())),
                _ => Err(parse_err(no, format!("expected '{key} <value>'"))),
            }
        };
        let (nno, n) = field("n")?;
        let n: usize = n.parse().map_err(|_| parse_err(nno, "bad problem size"))?;
        let (ono, b) = field("oracle")?;
        let b: Bitstring = b
            .parse()
            .map_err(|e: Error| parse_err(ono, e.to_string()))?;
        if b.len() != n {
            return Err(parse_err(
                ono,
                format!("oracle has length {}, expected {n}", b.len()),
            ));
        }
        let (sno, shots) = field("shots")?;
        let shots: u64 = shots
            .parse()
            .map_err(|_| parse_err(sno, "bad shot count"))?;
        let mut table = ShotTable::empty(OracleSpec::new(b));
        for (no, line) in lines {
            let mut toks = line.split_whitespace();
            let (Some(bits), Some(count), None) = (toks.next(), toks.next(), toks.next()) else {
                return Err(parse_err(
                    no,
                    format!("expected '<bitstring> <count>', got {line:?}"),
                ));
            };
            let outcome: Bitstring = bits
                .parse()
                .map_err(|e: Error| parse_err(no, format!("record {bits:?}: {e}")))?;
            if outcome.len() != n {
                return Err(parse_err(
                    no,
                    format!("record {bits:?} has length {}, expected {n}", outcome.len()),
                ));
            }
            if table.counts.contains_key(&outcome) {
                return Err(parse_err(no, format!("duplicate record {bits:?}")));
            }
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(no, format!("record {bits:?}: bad count {count:?}")))?;
            table.record(outcome, count);
        }
        if table.total_shots != shots {
            return Err(parse_err(
                last,
                format!("counts sum to {}, header says {shots}", table.total_shots),
            ));
        }
        Ok(table)
    }
}

/// Traces out the trailing `n - m` (unmarked) data qubits of a table whose
/// oracle is `1^k 0^(n-k)`.
pub fn reduce_counts(table: &ShotTable, m: usize) -> Result<ShotTable> {
    let spec = table.oracle();
    let (n, k) = (spec.n(), spec.k());
    if !spec.is_representative() {
        return invalid(format!(
            "reduction needs an oracle of the form 1^k0^(n-k), got {}",
            spec.b
        ));
    }
    if m >= n {
        return invalid(format!("target size {m} must be smaller than {n}"));
    }
    if m < k || m == 0 {
        return invalid(format!("cannot trace out marked qubits (k = {k}, m = {m})"));
    }
    let mut out = ShotTable::empty(OracleSpec::new(Bitstring::ones_then_zeros(m, k)?));
    for (b, &c) in table.counts() {
        out.record(b.prefix(m)?, c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_duration, validate_circuit};

    fn spec(s: &str) -> OracleSpec {
        OracleSpec::new(s.parse().unwrap())
    }

    #[test]
    fn identity_oracle_has_no_cnots() {
        let c = bv_logical_circuit(&spec("00"));
        assert_eq!(c.cnot_count(), 0);
        assert_eq!(validate_circuit(&c), Ok(()));
    }

    #[test]
    fn all_ones_has_n_cnots_into_ancilla_and_depth_n_plus_3() {
        let c = bv_logical_circuit(&spec("111111"));
        let cx: Vec<_> = c
            .events
            .iter()
            .filter(|e| e.kind() == GateKind::Cnot)
            .collect();
        assert_eq!(cx.len(), 6);
        assert!(cx.iter().all(|e| e.qubits()[1] == 6));
        assert_eq!(circuit_duration(&c), 9);
    }

    #[test]
    fn trailing_zeros_only_add_h_pairs() {
        let big = bv_logical_circuit(&spec("1100"));
        let small = bv_logical_circuit(&spec("11"));
        // relabel the small circuit's ancilla 2 -> 4
        let relabel = |q: usize| if q == 2 { 4 } else { q };
        let mut expected: Vec<_> = small
            .events
            .iter()
            .map(|e| {
                crate::circuit::GateEvent::new(
                    e.kind(),
                    e.qubits().iter().map(|&q| relabel(q)).collect(),
                    e.start(),
                    e.duration(),
                )
                .unwrap()
            })
            .collect();
        let extra: Vec<_> = big
            .events
            .iter()
            .filter(|e| e.qubits().iter().any(|&q| q == 2 || q == 3))
            .cloned()
            .collect();
        assert_eq!(extra.len(), 4);
        assert!(extra.iter().all(|e| e.kind() == GateKind::H));
        for q in [2, 3] {
            let on: Vec<_> = extra.iter().filter(|e| e.qubits()[0] == q).collect();
            assert_eq!(on.len(), 2);
        }
        expected.extend(extra);
        let mut a = TimedCircuit {
            events: expected,
            ..big.clone()
        };
        a.events = a.canonical_events();
        assert_eq!(a.events, big.canonical_events());
    }

    #[test]
    fn representative_sets() {
        let r = representative_oracles(1).unwrap();
        assert_eq!(
            r.iter().map(|s| s.b.to_string()).collect::<Vec<_>>(),
            ["0", "1"]
        );
        let r = representative_oracles(6).unwrap();
        assert_eq!(r.len(), 7);
        assert_eq!(
            r.iter().map(OracleSpec::k).collect::<Vec<_>>(),
            (0..=6).collect::<Vec<_>>()
        );
        let r = representative_oracles(26).unwrap();
        assert_eq!(r.len(), 27);
        assert_eq!(r.iter().map(OracleSpec::k).max(), Some(26));
        assert!(r.iter().all(OracleSpec::is_representative));
    }

    #[test]
    fn enumeration() {
        let all = all_oracles(3, DEFAULT_ENUMERATION_CAP).unwrap();
        let names: Vec<String> = all.iter().map(|s| s.b.to_string()).collect();
        let expected: Vec<String> = (0..8).map(|v| format!("{v:03b}")).collect();
        assert_eq!(names, expected);
        assert_eq!(all_oracles(6, DEFAULT_ENUMERATION_CAP).unwrap().len(), 64);
        assert!(all_oracles(13, DEFAULT_ENUMERATION_CAP).is_err());
    }

    #[test]
    fn classical_baseline() {
        assert_eq!(classical_success_prob(1), 1.0);
        assert_eq!(classical_success_prob(6), 1.0 / 32.0);
    }

    #[test]
    fn reduce_by_hand() {
        let mut t = ShotTable::empty(spec("10"));
        t.record("10".parse().unwrap(), 7);
        t.record("11".parse().unwrap(), 3);
        let r = reduce_counts(&t, 1).unwrap();
        assert_eq!(r.oracle().b.to_string(), "1");
        assert_eq!(r.counts().len(), 1);
        assert_eq!(r.count(&"1".parse().unwrap()), 10);
        assert_eq!(r.total_shots(), 10);
    }

    #[test]
    fn reduce_rejects_bad_targets() {
        let t = ShotTable::empty(spec("1100"));
        assert!(reduce_counts(&t, 1).is_err());
        assert!(reduce_counts(&t, 4).is_err());
        assert!(reduce_counts(&ShotTable::empty(spec("0110")), 3).is_err());
    }

    #[test]
    fn counts_round_trip_and_errors() {
        let mut t = ShotTable::empty(spec("101"));
        t.record("101".parse().unwrap(), 90);
        t.record("001".parse().unwrap(), 10);
        let back = ShotTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);

        let bad = "ssbv-counts 1\nn 3\noracle 101\nshots 5\n101 4\n10 1\n";
        match ShotTable::from_text(bad) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("\"10\""), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let short = "ssbv-counts 1\nn 3\noracle 101\nshots 5\n101 4\n";
        assert!(ShotTable::from_text(short).is_err());
    }
}
