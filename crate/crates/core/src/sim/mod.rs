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

//! Noisy simulation backends.

pub mod compile;
pub mod exact;
pub mod trajectory;

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::bv::{OracleSpec, ShotTable};
use crate::circuit::{Bitstring, GateKind, Program};
use crate::dd::{schedule_dd, DdPolicy};
use crate::error::{invalid, Error, Result};
use crate::noise::{DeviceModel, NoiseConfig};
use crate::route::{find_embedding, route_bv, CouplingGraph, RouteOptions, Setup};

pub use compile::{compile, Compiled, Op};
pub use exact::DEFAULT_EXACT_CAP;
pub use trajectory::{TrajectoryPlan, DEFAULT_TRAJECTORY_CAP};

/// Probability of each data bitstring.
pub type Distribution = BTreeMap<Bitstring, f64>;

/// Programs up to this many wires are checked by dense simulation.
pub const VERIFY_STATEVECTOR_WIRES: usize = 11;
const IDEAL_CAP: usize = 24;

/// Exact output distribution under `device` and `noise`.
pub fn simulate_exact(
    program: &Program,
    device: &DeviceModel,
    noise: &NoiseConfig,
) -> Result<Distribution> {
    simulate_exact_capped(program, device, noise, DEFAULT_EXACT_CAP)
}

pub fn simulate_exact_capped(
    program: &Program,
    device: &DeviceModel,
    noise: &NoiseConfig,
    cap: usize,
) -> Result<Distribution> {
    let compiled = compile(program, device, noise)?;
    exact::simulate_exact_compiled(&compiled, cap)
}

/// Sampled shot table under `device` and `noise`.
pub fn simulate_shots(
    program: &Program,
    oracle: &OracleSpec,
    device: &DeviceModel,
    noise: &NoiseConfig,
    plan: &TrajectoryPlan,
) -> Result<ShotTable> {
    let compiled = compile(program, device, noise)?;
    trajectory::simulate_shots_compiled(&compiled, oracle, plan)
}

/// Convolves a distribution with independent per-bit readout flips.
pub fn apply_confusion(dist: &Distribution, confusion: &[(f64, f64)]) -> Distribution {
    let mut cur: Distribution = dist.clone();
    for (i, &(p10, p01)) in confusion.iter().enumerate() {
        if p10 == 0.0 && p01 == 0.0 {
            continue;
        }
        let mut next = Distribution::new();
        for (&b, &p) in &cur {
            let flip = if b.bit(i) { p01 } else { p10 };
            *next.entry(b).or_insert(0.0) += p * (1.0 - flip);
            if flip > 0.0 {
                *next.entry(b.with_bit(i, !b.bit(i))).or_insert(0.0) += p * flip;
            }
        }
        cur = next;
    }
    cur
}

/// Noise-free distribution by dense state-vector simulation. DD pulses are
/// ideal.
pub fn ideal_distribution(program: &Program) -> Result<Distribution> {
    let c = &program.circuit;
    let w = c.num_qubits;
    if w > IDEAL_CAP {
        return Err(Error::CapExceeded(format!(
            "ideal simulation capped at {IDEAL_CAP} qubits"
        )));
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << w];
    psi[0] = Complex64::new(1.0, 0.0);
    let mut events: Vec<_> = c.events.iter().collect();
    events.sort_by_key(|e| e.start());
    for e in events {
        let qs = e.qubits();
        let u = match e.kind() {
            GateKind::Delay => continue,
            GateKind::Cnot => {
                let (cb, tb) = (1usize << qs[0], 1usize << qs[1]);
                for i in 0..psi.len() {
                    if i & cb != 0 && i & tb == 0 {
                        psi.swap(i, i | tb);
                    }
                }
                continue;
            }
            GateKind::H => compile::h_matrix(),
            GateKind::X => compile::x_matrix(),
            GateKind::PhasedPi(p) => crate::dd::pulse_unitary(p, 0.0),
        };
        let m = 1usize << qs[0];
        for i in (0..psi.len()).filter(|i| i & m == 0) {
            let (a0, a1) = (psi[i], psi[i | m]);
            psi[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            psi[i | m] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
    }
    let mut dist = Distribution::new();
    for (idx, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        if p < 1e-15 {
            continue;
        }
        let bits: Vec<bool> = program
            .readout
            .iter()
            .map(|r| r.is_some_and(|q| idx >> q & 1 == 1))
            .collect();
        *dist.entry(Bitstring::from_bits(&bits)?).or_insert(0.0) += p;
    }
    Ok(dist)
}

/// Total variation distance.
pub fn tvd(a: &Distribution, b: &Distribution) -> f64 {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Marginal over the first `m` bits.
pub fn marginal_prefix(dist: &Distribution, m: usize) -> Result<Distribution> {
    let mut out = Distribution::new();
    for (b, &p) in dist {
        *out.entry(b.prefix(m)?).or_insert(0.0) += p;
    }
    Ok(out)
}

/// Empirical distribution of a shot table.
pub fn empirical(table: &ShotTable) -> Distribution {
    let total = table.total_shots() as f64;
    table
        .counts()
        .iter()
        .map(|(&b, &c)| (b, c as f64 / total))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub tvd: f64,
    pub pass: bool,
}

/// BV-`size` for `1^k 0^(size-k)` on a chain, every data qubit present, the
/// ancilla starting at the end of the chain.
pub fn chain_program(
    size: usize,
    k: usize,
    device: &DeviceModel,
    dd: Option<&DdPolicy>,
) -> Result<Program> {
    let spec = OracleSpec::new(Bitstring::ones_then_zeros(size, k)?);
    let graph = CouplingGraph::chain(size + 1);
    let dev = device.with_graph(graph.clone());
    let emb = find_embedding(&graph, &spec.marked(), Some(0))?;
    let opts = RouteOptions {
        setup: Setup::Standard,
        fuse: true,
        durations: dev.durations,
        dt: dev.dt,
    };
    let mut program = route_bv(&spec, &graph, &emb, &opts)?.program;
    if let Some(policy) = dd {
        program.circuit = schedule_dd(&program.circuit, policy)?.0;
    }
    Ok(program)
}

/// Compares BV-`n` traced down to `m` qubits against BV-`m` directly, both
/// exact. With factorized noise the two agree to rounding error.
pub fn check_reduction_equivalence(
    n: usize,
    m: usize,
    k: usize,
    device: &DeviceModel,
    noise: &NoiseConfig,
    dd: Option<&DdPolicy>,
) -> Result<ReductionReport> {
    if !(k <= m && m < n) {
        return invalid(format!("need k <= m < n, got k = {k}, m = {m}, n = {n}"));
    }
    let big = chain_program(n, k, device, dd)?;
    let small = chain_program(m, k, device, dd)?;
    let dev_big = device.with_graph(CouplingGraph::chain(n + 1));
    let dev_small = device.with_graph(CouplingGraph::chain(m + 1));
    let reduced = marginal_prefix(&simulate_exact(&big, &dev_big, noise)?, m)?;
    let direct = simulate_exact(&small, &dev_small, noise)?;
    let d = tvd(&reduced, &direct);
    Ok(ReductionReport {
        n,
        m,
        k,
        tvd: d,
        pass: d < 1e-9,
    })
}
