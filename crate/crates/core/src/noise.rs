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

//! Device parameters, noise configuration and Kraus channels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{Bitstring, Dt, DurationModel, GateDurations};
use crate::error::{invalid, Error, Result};
use crate::route::CouplingGraph;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A completely positive map given by its Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    arity: usize,
    ops: Vec<CMat>,
}

impl KrausChannel {
    pub fn new(arity: usize, ops: Vec<CMat>) -> Result<Self> {
        let dim = 1usize << arity;
        if arity == 0 || arity > 2 || ops.is_empty() {
            return invalid("channels act on one or two qubits and need at least one operator");
        }
        if ops.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return invalid(format!("Kraus operators must be {dim}x{dim}"));
        }
        Ok(Self { arity, ops })
    }

    pub fn identity(arity: usize) -> Self {
        let dim = 1usize << arity;
        Self {
            arity,
            ops: vec![CMat::identity(dim, dim)],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    /// Frobenius distance of `sum K^dag K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let dim = 1usize << self.arity;
        let sum = self
            .ops
            .iter()
            .fold(CMat::zeros(dim, dim), |acc, k| acc + k.adjoint() * k);
        (sum - CMat::identity(dim, dim)).norm()
    }

    /// `other` after `self`.
    pub fn then(&self, other: &KrausChannel) -> KrausChannel {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        let ops = other
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        KrausChannel {
            arity: self.arity,
            ops,
        }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        self.ops
            .iter()
            .fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, k| {
                acc + k * rho * k.adjoint()
            })
    }
}

pub fn pauli(index: usize) -> CMat {
    let i = Complex64::i();
    match index {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        2 => CMat::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)]),
        3 => CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        _ => panic!("pauli index {index} out of range"),
    }
}

/// Uniform Pauli channel: with probability `p` one of the `4^arity - 1`
/// non-identity Paulis is applied.
pub fn depolarizing(p: f64, arity: usize) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("depolarizing probability {p} outside [0, 1]"));
    }
    let count = (1usize << (2 * arity)) - 1;
    let mut ops = vec![CMat::identity(1 << arity, 1 << arity) * c((1.0 - p).sqrt())];
    let w = c((p / count as f64).sqrt());
    for idx in 1..=count {
        let op = match arity {
            1 => pauli(idx),
            2 => pauli(idx / 4).kronecker(&pauli(idx % 4)),
            _ => return invalid("depolarizing arity must be 1 or 2"),
        };
        ops.push(op * w);
    }
    KrausChannel::new(arity, ops)
}

pub fn amplitude_damping(gamma: f64) -> KrausChannel {
    let k0 = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]);
    let k1 = CMat::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]);
    KrausChannel {
        arity: 1,
        ops: vec![k0, k1],
    }
}

/// Z applied with probability `p_z`.
pub fn phase_flip(p_z: f64) -> KrausChannel {
    KrausChannel {
        arity: 1,
        ops: vec![
            CMat::identity(2, 2) * c((1.0 - p_z).sqrt()),
            pauli(3) * c(p_z.sqrt()),
        ],
    }
}

/// Decay and dephasing parameters of an idle stretch: amplitude damping
/// strength and the phase-flip probability that follows it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Relaxation {
    pub gamma: f64,
    pub p_z: f64,
}

impl Relaxation {
    pub const NONE: Relaxation = Relaxation {
        gamma: 0.0,
        p_z: 0.0,
    };

    pub fn new(t1: f64, t2: f64, t: f64) -> Result<Self> {
        check_t1_t2(t1, t2)?;
        if !(t >= 0.0) {
            return invalid(format!("idle time {t} must be nonnegative"));
        }
        let gamma = if t1.is_infinite() {
            0.0
        } else {
            1.0 - (-t / t1).exp()
        };
        let inv_tphi = if t2.is_infinite() {
            0.0
        } else {
            1.0 / t2 - 0.5 / t1
        };
        let p_z = 0.5 * (1.0 - (-t * inv_tphi.max(0.0)).exp());
        Ok(Self { gamma, p_z })
    }

    /// The two stretches back to back. Damping and dephasing commute, so
    /// the result has the same shape.
    pub fn compose(self, other: Relaxation) -> Relaxation {
        Relaxation {
            gamma: 1.0 - (1.0 - self.gamma) * (1.0 - other.gamma),
            p_z: 0.5 * (1.0 - (1.0 - 2.0 * self.p_z) * (1.0 - 2.0 * other.p_z)),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.gamma == 0.0 && self.p_z == 0.0
    }

    pub fn channel(&self) -> KrausChannel {
        amplitude_damping(self.gamma).then(&phase_flip(self.p_z))
    }
}

fn check_t1_t2(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return invalid(format!("T1 = {t1} and T2 = {t2} must be positive"));
    }
    if t2 > 2.0 * t1 {
        return invalid(format!("T2 = {t2} exceeds 2 T1 = {}", 2.0 * t1));
    }
    Ok(())
}

/// Amplitude damping for `t` followed by pure dephasing at rate
/// `1/T_phi = 1/T2 - 1/(2 T1)`. Times in seconds.
pub fn idle_channel(t1: f64, t2: f64, t: f64) -> Result<KrausChannel> {
    let r = Relaxation::new(t1, t2, t)?;
    if r.is_trivial() {
        return Ok(KrausChannel::identity(1));
    }
    Ok(r.channel())
}

/// Coherence parameters of one physical qubit. Times in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub t1: f64,
    pub t2: f64,
    /// Probability of reading 1 when the qubit is in 0.
    pub p_read1_given0: f64,
    /// Probability of reading 0 when the qubit is in 1.
    pub p_read0_given1: f64,
}

impl QubitParams {
    pub const IDEAL: QubitParams = QubitParams {
        t1: f64::INFINITY,
        t2: f64::INFINITY,
        p_read1_given0: 0.0,
        p_read0_given1: 0.0,
    };

    fn validate(&self, q: usize) -> Result<()> {
        check_t1_t2(self.t1, self.t2)
            .map_err(|e| Error::InvalidArgument(format!("qubit {q}: {e}")))?;
        for p in [self.p_read1_given0, self.p_read0_given1] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("qubit {q}: readout probability {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub graph: CouplingGraph,
    /// One entry per physical node of `graph`.
    pub qubits: Vec<QubitParams>,
    pub durations: GateDurations,
    pub error_1q: f64,
    pub error_2q: f64,
    pub dt: Dt,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        if self.qubits.len() != self.graph.num_physical() {
            return invalid(format!(
                "{} qubit records for a {}-node graph",
                self.qubits.len(),
                self.graph.num_physical()
            ));
        }
        for (q, p) in self.qubits.iter().enumerate() {
            p.validate(q)?;
        }
        for p in [self.error_1q, self.error_2q] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("gate error {p} outside [0, 1]"));
            }
        }
        let d = &self.durations;
        if d.single_qubit == 0 || d.two_qubit == 0 || d.dd_pulse == 0 {
            return invalid("gate durations must be positive");
        }
        Ok(())
    }

    /// Noise-free device on `graph` with the given timing.
    pub fn ideal(graph: CouplingGraph, durations: GateDurations) -> Self {
        let n = graph.num_physical();
        Self {
            name: "ideal".into(),
            graph,
            qubits: vec![QubitParams::IDEAL; n],
            durations,
            error_1q: 0.0,
            error_2q: 0.0,
            dt: Dt::DEFAULT,
        }
    }

    /// Same parameters on a different coupling graph. Qubits beyond the old
    /// graph get the mean parameters.
    pub fn with_graph(&self, graph: CouplingGraph) -> Self {
        let mean = self.mean_qubit();
        let qubits = (0..graph.num_physical())
            .map(|q| self.qubits.get(q).copied().unwrap_or(mean))
            .collect();
        Self {
            graph,
            qubits,
            ..self.clone()
        }
    }

    /// Arithmetic mean of the per-qubit parameters (harmonic for rates
    /// would be equally defensible; profiles are homogeneous by default).
    pub fn mean_qubit(&self) -> QubitParams {
        let n = self.qubits.len().max(1) as f64;
        let sum = |f: fn(&QubitParams) -> f64| self.qubits.iter().map(f).sum::<f64>() / n;
        if self.qubits.is_empty() {
            return QubitParams::IDEAL;
        }
        QubitParams {
            t1: sum(|q| q.t1),
            t2: sum(|q| q.t2),
            p_read1_given0: sum(|q| q.p_read1_given0),
            p_read0_given1: sum(|q| q.p_read0_given1),
        }
    }

    /// Shrinks T1 and T2 by `factor` (> 1 means more decoherence).
    pub fn with_decoherence_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for q in &mut out.qubits {
            q.t1 /= factor;
            q.t2 /= factor;
        }
        out
    }
}

/// Which noise processes are simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Channels {
    pub decoherence: bool,
    pub depolarizing: bool,
    pub readout: bool,
    pub detuning: bool,
    pub crosstalk: bool,
    pub flip_angle: bool,
}

impl Default for Channels {
    fn default() -> Self {
        Self::ALL
    }
}

impl Channels {
    pub const ALL: Channels = Channels {
        decoherence: true,
        depolarizing: true,
        readout: true,
        detuning: true,
        crosstalk: true,
        flip_angle: true,
    };
    pub const NONE: Channels = Channels {
        decoherence: false,
        depolarizing: false,
        readout: false,
        detuning: false,
        crosstalk: false,
        flip_angle: false,
    };
}

/// Coherent and quasi-static error parameters on top of the device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the per-run static detuning, rad/s.
    pub detuning_sigma: f64,
    /// ZZ coupling between neighbouring idle qubits, rad/s.
    pub zz_rate: f64,
    /// Relative over-rotation of every DD pulse.
    pub flip_angle_eps: f64,
    pub channels: Channels,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            detuning_sigma: 0.0,
            zz_rate: 0.0,
            flip_angle_eps: 0.0,
            channels: Channels::ALL,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.detuning_sigma >= 0.0 && self.zz_rate >= 0.0) {
            return invalid("detuning sigma and ZZ rate must be nonnegative");
        }
        if !(self.flip_angle_eps.abs() < 1.0) {
            return invalid("flip-angle error must satisfy |eps| < 1");
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        if self.channels.detuning {
            self.detuning_sigma
        } else {
            0.0
        }
    }

    pub fn zz(&self) -> f64 {
        if self.channels.crosstalk {
            self.zz_rate
        } else {
            0.0
        }
    }

    pub fn eps(&self) -> f64 {
        if self.channels.flip_angle {
            self.flip_angle_eps
        } else {
            0.0
        }
    }
}

/// One static detuning per qubit, drawn from `N(0, sigma)`.
pub fn sample_static_fields<R: Rng + ?Sized>(
    config: &NoiseConfig,
    num_qubits: usize,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = config.sigma();
    if sigma == 0.0 {
        return vec![0.0; num_qubits];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
    (0..num_qubits).map(|_| normal.sample(rng)).collect()
}

/// Independent per-bit readout flips; `confusion[i]` is
/// `(p(read 1 | 0), p(read 0 | 1))` for bit `i`.
pub fn readout_sample<R: Rng + ?Sized>(
    true_bits: Bitstring,
    confusion: &[(f64, f64)],
    rng: &mut R,
) -> Bitstring {
    assert_eq!(
        confusion.len(),
        true_bits.len(),
        "one confusion pair per bit"
    );
    let mut out = true_bits;
    for (i, &(p10, p01)) in confusion.iter().enumerate() {
        let bit = true_bits.bit(i);
        let p_flip = if bit { p01 } else { p10 };
        if p_flip > 0.0 && rng.random::<f64>() < p_flip {
            out = out.with_bit(i, !bit);
        }
    }
    out
}

/// A shipped or user-supplied device and noise description.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub device: DeviceModel,
    pub noise: NoiseConfig,
    /// Default UR sequence length, if the profile recommends DD.
    pub default_dd: Option<usize>,
    /// Single-run duration used for time-to-solution.
    pub run_time: DurationModel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    device: DeviceSection,
    #[serde(default)]
    noise: NoiseConfig,
    #[serde(default)]
    default_dd: Option<usize>,
    run_time: Option<RunTimeSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunTimeSection {
    slope_us: f64,
    intercept_us: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceSection {
    dt_ns: String,
    layout: String,
    #[serde(default)]
    blacklist: Vec<usize>,
    single_qubit_duration: u64,
    two_qubit_duration: u64,
    readout_duration: u64,
    dd_pulse_duration: Option<u64>,
    t1_us: f64,
    t2_us: f64,
    error_1q: f64,
    error_2q: f64,
    readout_error: f64,
    #[serde(default)]
    qubit: Vec<QubitOverride>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitOverride {
    index: usize,
    t1_us: Option<f64>,
    t2_us: Option<f64>,
    readout_error: Option<f64>,
}

/// Builds a named layout: `chain:<n>`, `heavy-hex-27` or `complete:<n>`.
pub fn named_layout(name: &str) -> Result<CouplingGraph> {
    let size = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad layout size in {name:?}")))
    };
    match name.split_once(':') {
        None if name == "heavy-hex-27" => Ok(CouplingGraph::heavy_hex_27()),
        Some(("chain", n)) => Ok(CouplingGraph::chain(size(n)?)),
        Some(("complete", n)) => Ok(CouplingGraph::fully_connected(size(n)?)),
        _ => invalid(format!("unknown layout {name:?}")),
    }
}

impl Profile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ProfileFile =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("profile: {e}")))?;
        let d = f.device;
        let graph = named_layout(&d.layout)?.with_blacklist(d.blacklist)?;
        let base = QubitParams {
            t1: d.t1_us * 1e-6,
            t2: d.t2_us * 1e-6,
            p_read1_given0: d.readout_error,
            p_read0_given1: d.readout_error,
        };
        let mut qubits = vec![base; graph.num_physical()];
        for o in d.qubit {
            let q = qubits.get_mut(o.index).ok_or_else(|| {
                Error::InvalidArgument(format!("override for missing qubit {}", o.index))
            })?;
            if let Some(t1) = o.t1_us {
                q.t1 = t1 * 1e-6;
            }
            if let Some(t2) = o.t2_us {
                q.t2 = t2 * 1e-6;
            }
            if let Some(r) = o.readout_error {
                q.p_read1_given0 = r;
                q.p_read0_given1 = r;
            }
        }
        let device = DeviceModel {
            name: f.name,
            graph,
            qubits,
            durations: GateDurations {
                single_qubit: d.single_qubit_duration,
                two_qubit: d.two_qubit_duration,
                readout: d.readout_duration,
                dd_pulse: d.dd_pulse_duration.unwrap_or(d.single_qubit_duration),
            },
            error_1q: d.error_1q,
            error_2q: d.error_2q,
            dt: d.dt_ns.parse()?,
        };
        device.validate()?;
        f.noise.validate()?;
        if let Some(n) = f.default_dd {
            crate::dd::ur_phases(n)?;
        }
        // Without calibrated values, charge one CNOT per qubit plus readout.
        let run_time = match f.run_time {
            Some(r) => DurationModel::linear(1.0, r.slope_us * 1e-6, r.intercept_us * 1e-6)?,
            None => DurationModel::linear(
                1.0,
                device.dt.to_seconds(device.durations.two_qubit),
                device.dt.to_seconds(device.durations.readout),
            )?,
        };
        Ok(Self {
            device,
            noise: f.noise,
            default_dd: f.default_dd,
            run_time,
        })
    }

    /// One of the profiles shipped with the crate: `montreal`, `cairo` or
    /// `noiseless`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "montreal" => include_str!("../../../profiles/montreal.profile"),
            "cairo" => include_str!("../../../profiles/cairo.profile"),
            "noiseless" => include_str!("../../../profiles/noiseless.profile"),
            other => return invalid(format!("no built-in profile named {other:?}")),
        };
        Self::from_toml(text)
    }
}
