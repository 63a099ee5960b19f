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

//! Timed circuit representation.
//!
//! Time is kept in integer ticks of the device sampling period `dt`; seconds
//! only appear when a circuit is handed to the analysis layer.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, parse_err, Error, Result};

/// Longest bitstring we represent. Problem sizes in practice stop at 26.
pub const MAX_BITS: usize = 64;

/// A fixed-length string of bits.
///
/// Bit 0 is the leftmost character of the textual form and the most
/// significant bit of [`Bitstring::value`], so numeric order equals
/// lexicographic order of the strings.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Bitstring {
    len: u8,
    value: u64,
}

impl Bitstring {
    pub fn new(len: usize, value: u64) -> Result<Self> {
        if len == 0 || len > MAX_BITS {
            return invalid(format!("bitstring length {len} outside 1..={MAX_BITS}"));
        }
        if len < 64 && value >> len != 0 {
            return invalid(format!("value {value} does not fit in {len} bits"));
        }
        Ok(Self {
            len: len as u8,
            value,
        })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(len, 0)
    }

    /// `1^k 0^(len-k)`.
    pub fn ones_then_zeros(len: usize, k: usize) -> Result<Self> {
        if k > len {
            return invalid(format!("weight {k} exceeds length {len}"));
        }
        let mut b = Self::zeros(len)?;
        for i in 0..k {
            b = b.with_bit(i, true);
        }
        Ok(b)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut b = Self::zeros(bits.len())?;
        for (i, &bit) in bits.iter().enumerate() {
            b = b.with_bit(i, bit);
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    fn shift(&self, i: usize) -> usize {
        assert!(
            i < self.len(),
            "bit {i} out of range for length {}",
            self.len
        );
        self.len() - 1 - i
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.value >> self.shift(i)) & 1 == 1
    }

    #[must_use]
    pub fn with_bit(self, i: usize, bit: bool) -> Self {
        let mask = 1u64 << self.shift(i);
        let value = if bit {
            self.value | mask
        } else {
            self.value & !mask
        };
        Self { value, ..self }
    }

    pub fn hamming_weight(&self) -> usize {
        self.value.count_ones() as usize
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    /// The first `m` bits.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return invalid(format!("prefix length {m} outside 1..={}", self.len));
        }
        Self::new(m, self.value >> (self.len() - m))
    }

    /// Output bit `i` is input bit `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return invalid("permutation length mismatch");
        }
        let bits: Vec<bool> = perm.iter().map(|&p| self.bit(p)).collect();
        Self::from_bits(&bits)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => invalid(format!("invalid bit character {other:?} in {s:?}")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

/// Sampling period as an exact rational number of nanoseconds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Dt {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Dt {
    /// 2/9 ns, the waveform-generator period of the reference devices.
    pub const DEFAULT: Dt = Dt { num: 2, den: 9 };

    pub fn new(num_ns: u64, den: u64) -> Result<Self> {
        if num_ns == 0 || den == 0 {
            return invalid("dt must be a positive rational");
        }
        let g = gcd(num_ns, den);
        Ok(Self {
            num: num_ns / g,
            den: den / g,
        })
    }

    pub fn num_ns(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn seconds_per_tick(&self) -> f64 {
        self.num as f64 / self.den as f64 * 1e-9
    }

    pub fn to_seconds(&self, ticks: u64) -> f64 {
        ticks as f64 * self.seconds_per_tick()
    }

    /// Nearest whole number of ticks.
    pub fn ticks(&self, seconds: f64) -> u64 {
        (seconds / self.seconds_per_tick()).round().max(0.0) as u64
    }
}

impl Default for Dt {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Dt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Dt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dt numerator in {s:?}")))?;
        let d = d
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dt denominator in {s:?}")))?;
        Dt::new(n, d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    H,
    X,
    Cnot,
    /// A pi rotation about the equatorial axis at angle `phase` from x.
    PhasedPi(f64),
    Delay,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn phased_pi(phase: f64) -> Self {
        GateKind::PhasedPi(normalize_phase(phase))
    }

    fn mnemonic(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Cnot => "CX",
            GateKind::PhasedPi(_) => "PI",
            GateKind::Delay => "DELAY",
        }
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = phase.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateEvent {
    kind: GateKind,
    qubits: Vec<usize>,
    start: u64,
    duration: u64,
}

impl GateEvent {
    pub fn new(kind: GateKind, qubits: Vec<usize>, start: u64, duration: u64) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return invalid(format!(
                "{} takes {} qubit(s), got {}",
                kind.mnemonic(),
                kind.arity(),
                qubits.len()
            ));
        }
        if kind == GateKind::Cnot && qubits[0] == qubits[1] {
            return invalid("CNOT control and target coincide");
        }
        if duration == 0 && kind != GateKind::Delay {
            return invalid(format!("{} needs a positive duration", kind.mnemonic()));
        }
        let kind = match kind {
            GateKind::PhasedPi(p) => GateKind::phased_pi(p),
            k => k,
        };
        Ok(Self {
            kind,
            qubits,
            start,
            duration,
        })
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn end(&self) -> u64 {
        self.start + self.duration
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }
}

/// Why a circuit failed validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    QubitOutOfRange {
        event: usize,
        qubit: usize,
    },
    Overlap {
        qubit: usize,
        first: usize,
        second: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::QubitOutOfRange { event, qubit } => {
                write!(
                    f,
                    "event {event} references qubit {qubit} outside the register"
                )
            }
            Violation::Overlap {
                qubit,
                first,
                second,
            } => write!(f, "events {first} and {second} overlap on qubit {qubit}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedCircuit {
    pub num_qubits: usize,
    pub events: Vec<GateEvent>,
    pub readout_duration: u64,
    pub dt: Dt,
}

impl TimedCircuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            events: Vec::new(),
            readout_duration: 0,
            dt: Dt::DEFAULT,
        }
    }

    /// End of the last gate, excluding readout.
    pub fn end_time(&self) -> u64 {
        self.events.iter().map(GateEvent::end).max().unwrap_or(0)
    }

    /// Events touching `q`, sorted by start time.
    pub fn events_on(&self, q: usize) -> Vec<&GateEvent> {
        let mut evs: Vec<&GateEvent> = self.events.iter().filter(|e| e.acts_on(q)).collect();
        evs.sort_by_key(|e| (e.start, e.end()));
        evs
    }

    pub fn count(&self, kind: fn(&GateKind) -> bool) -> usize {
        self.events.iter().filter(|e| kind(&e.kind)).count()
    }

    pub fn cnot_count(&self) -> usize {
        self.count(|k| *k == GateKind::Cnot)
    }

    /// Events sorted by (start, first qubit) so that equal circuits compare
    /// equal regardless of list order.
    pub fn canonical_events(&self) -> Vec<GateEvent> {
        let mut evs = self.events.clone();
        evs.sort_by(|a, b| {
            (a.start, &a.qubits, a.duration)
                .cmp(&(b.start, &b.qubits, b.duration))
                .then(a.kind.mnemonic().cmp(b.kind.mnemonic()))
        });
        evs
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("ssbv-circuit 1\n");
        out.push_str(&format!("qubits {}\n", self.num_qubits));
        out.push_str(&format!("dt_ns {}\n", self.dt));
        out.push_str(&format!("readout {}\n", self.readout_duration));
        for e in &self.events {
            out.push_str(e.kind.mnemonic());
            if let GateKind::PhasedPi(p) = e.kind {
                out.push_str(&format!(" {p:?}"));
            }
            for q in &e.qubits {
                out.push_str(&format!(" {q}"));
            }
            out.push_str(&format!(" {} {}\n", e.start, e.duration));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (no, magic) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty circuit file"))?;
        if magic != "ssbv-circuit 1" {
            return Err(parse_err(
                no,
                format!("expected header 'ssbv-circuit 1', got {magic:?}"),
            ));
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| parse_err(no, format!("missing '{key}' line")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((no, v.trim().to_string())),
                _ => Err(parse_err(no, format!("expected '{key} <value>'"))),
            }
        };
        let (qno, q) = header("qubits")?;
        let num_qubits = q.parse().map_err(|_| parse_err(qno, "bad qubit count"))?;
        let (dno, d) = header("dt_ns")?;
        let dt = d.parse::<Dt>().map_err(|e| parse_err(dno, e.to_string()))?;
        let (rno, r) = header("readout")?;
        let readout_duration = r
            .parse()
            .map_err(|_| parse_err(rno, "bad readout duration"))?;
        let mut events = Vec::new();
        for (no, line) in lines {
            events.push(parse_event(line).map_err(|e| parse_err(no, e.to_string()))?);
        }
        Ok(Self {
            num_qubits,
            events,
            readout_duration,
            dt,
        })
    }
}

fn parse_event(line: &str) -> Result<GateEvent> {
    let mut toks = line.split_whitespace();
    let mnemonic = toks.next().unwrap_or_default();
    let num = |t: Option<&str>| -> Result<u64> {
        t.ok_or_else(|| Error::InvalidArgument("truncated event".into()))?
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad integer in {line:?}")))
    };
    let kind = match mnemonic {
        "H" => GateKind::H,
        "X" => GateKind::X,
        "CX" => GateKind::Cnot,
        "DELAY" => GateKind::Delay,
        "PI" => {
            let p: f64 = toks
                .next()
                .ok_or_else(|| Error::InvalidArgument("missing phase".into()))?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad phase in {line:?}")))?;
            GateKind::PhasedPi(p)
        }
        other => return invalid(format!("unknown gate {other:?}")),
    };
    let qubits = (0..kind.arity())
        .map(|_| num(toks.next()).map(|q| q as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = num(toks.next())?;
    let duration = num(toks.next())?;
    if toks.next().is_some() {
        return invalid(format!("trailing tokens in {line:?}"));
    }
    GateEvent::new(kind, qubits, start, duration)
}

/// First range or overlap violation, scanning events in list order for range
/// errors and then each qubit's timeline in ascending qubit order.
pub fn validate_circuit(circuit: &TimedCircuit) -> std::result::Result<(), Violation> {
    for (i, e) in circuit.events.iter().enumerate() {
        if let Some(&q) = e.qubits.iter().find(|&&q| q >= circuit.num_qubits) {
            return Err(Violation::QubitOutOfRange { event: i, qubit: q });
        }
    }
    let mut per_qubit: Vec<Vec<usize>> = vec![Vec::new(); circuit.num_qubits];
    for (i, e) in circuit.events.iter().enumerate() {
        if e.duration == 0 {
            continue;
        }
        for &q in &e.qubits {
            per_qubit[q].push(i);
        }
    }
    for (q, idx) in per_qubit.iter_mut().enumerate() {
        idx.sort_by_key(|&i| (circuit.events[i].start, i));
        for w in idx.windows(2) {
            let (a, b) = (&circuit.events[w[0]], &circuit.events[w[1]]);
            if b.start < a.end() {
                return Err(Violation::Overlap {
                    qubit: q,
                    first: w[0].min(w[1]),
                    second: w[0].max(w[1]),
                });
            }
        }
    }
    Ok(())
}

/// Last gate end plus readout, in ticks.
pub fn circuit_duration(circuit: &TimedCircuit) -> u64 {
    circuit.end_time() + circuit.readout_duration
}

/// Per-device gate durations in ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GateDurations {
    pub single_qubit: u64,
    pub two_qubit: u64,
    pub readout: u64,
    pub dd_pulse: u64,
}

impl GateDurations {
    /// One tick per gate and no readout; the abstract layer-counting model.
    pub const UNIT: GateDurations = GateDurations {
        single_qubit: 1,
        two_qubit: 1,
        readout: 0,
        dd_pulse: 1,
    };

    pub fn of(&self, kind: GateKind) -> u64 {
        match kind {
            GateKind::Cnot => self.two_qubit,
            GateKind::PhasedPi(_) => self.dd_pulse,
            GateKind::Delay => 0,
            _ => self.single_qubit,
        }
    }
}

/// As-soon-as-possible placement of gates on a register.
#[derive(Debug)]
pub struct Scheduler {
    avail: Vec<u64>,
    events: Vec<GateEvent>,
    durations: GateDurations,
}

impl Scheduler {
    pub fn new(num_qubits: usize, durations: GateDurations) -> Self {
        Self {
            avail: vec![0; num_qubits],
            events: Vec::new(),
            durations,
        }
    }

    /// Places `kind` on `qubits` at the earliest time all of them are free.
    pub fn push(&mut self, kind: GateKind, qubits: &[usize]) -> u64 {
        let start = qubits.iter().map(|&q| self.avail[q]).max().unwrap_or(0);
        let duration = self.durations.of(kind);
        let ev = GateEvent::new(kind, qubits.to_vec(), start, duration)
            .expect("scheduler received a malformed gate");
        for &q in qubits {
            self.avail[q] = start + duration;
        }
        self.events.push(ev);
        start
    }

    /// Makes every qubit in `qubits` available no earlier than the latest
    /// of them, so the next gates on them form a layer.
    pub fn align(&mut self, qubits: &[usize]) -> u64 {
        let t = qubits.iter().map(|&q| self.avail[q]).max().unwrap_or(0);
        for &q in qubits {
            self.avail[q] = t;
        }
        t
    }

    pub fn latest(&self) -> u64 {
        self.avail.iter().copied().max().unwrap_or(0)
    }

    pub fn finish(self, dt: Dt) -> TimedCircuit {
        TimedCircuit {
            num_qubits: self.avail.len(),
            events: self.events,
            readout_duration: self.durations.readout,
            dt,
        }
    }
}

/// A circuit plus what the measurement means.
///
/// Circuit qubits are "wires"; `physical[w]` is the device qubit behind wire
/// `w`, and `readout[i]` names the wire holding logical data qubit `i` at
/// measurement time. Data qubits with no wire never took part in the circuit
/// and are reported as 0 (subject to readout error).
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub circuit: TimedCircuit,
    pub physical: Vec<usize>,
    pub readout: Vec<Option<usize>>,
}

impl Program {
    pub fn num_data(&self) -> usize {
        self.readout.len()
    }

    pub fn num_wires(&self) -> usize {
        self.circuit.num_qubits
    }
}

/// Single-run duration `t_r(n) = c * tau_2q * n + tau_0`, optionally
/// overridden by exact per-size values where the linear model is poor.
#[derive(Clone, Debug, PartialEq)]
pub struct DurationModel {
    c: f64,
    tau_2q: f64,
    tau_0: f64,
    exact_table: BTreeMap<usize, f64>,
}

impl DurationModel {
    pub fn linear(c: f64, tau_2q: f64, tau_0: f64) -> Result<Self> {
        Self::with_table(c, tau_2q, tau_0, BTreeMap::new())
    }

    pub fn with_table(
        c: f64,
        tau_2q: f64,
        tau_0: f64,
        exact_table: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if !(c > 0.0 && tau_2q > 0.0 && tau_0 >= 0.0) || !(c * tau_2q).is_finite() {
            return invalid("duration model needs c, tau_2q > 0 and tau_0 >= 0");
        }
        let model = Self {
            c,
            tau_2q,
            tau_0,
            exact_table,
        };
        let horizon = model.exact_table.keys().next_back().map_or(0, |&n| n + 1);
        for n in 0..horizon {
            if model.run_time(n + 1) <= model.run_time(n) {
                return invalid(format!(
                    "run time not increasing between n={n} and n={}",
                    n + 1
                ));
            }
        }
        Ok(model)
    }

    pub fn slope(&self) -> f64 {
        self.c * self.tau_2q
    }

    pub fn intercept(&self) -> f64 {
        self.tau_0
    }

    pub fn exact_table(&self) -> &BTreeMap<usize, f64> {
        &self.exact_table
    }

    /// Seconds for one run at size `n`.
    pub fn run_time(&self, n: usize) -> f64 {
        match self.exact_table.get(&n) {
            Some(&t) => t,
            None => self.slope() * n as f64 + self.tau_0,
        }
    }
}
