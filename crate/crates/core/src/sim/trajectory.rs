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

//! Monte Carlo trajectory backend.
//!
//! Wires start as independent single-qubit states and are merged into a
//! joint state vector only when a two-qubit operation couples them. Once a
//! wire has seen its last two-qubit operation, its remaining single-qubit
//! operations commute with everything else, so they are applied at once and
//! the wire is measured and removed. For the fan-in circuits of interest the
//! joint states stay a few qubits wide.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::compile::{Compiled, Mat2, Op};
use crate::bv::{OracleSpec, ShotTable};
use crate::circuit::Bitstring;
use crate::error::{invalid, Error, Result};
use crate::noise::readout_sample;
use crate::seed::{stream, Purpose};

/// Largest joint state a trajectory may build, in qubits.
pub const DEFAULT_TRAJECTORY_CAP: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryPlan {
    pub shots: u64,
    pub master_seed: u64,
    /// Distinguishes the streams of different oracles under one seed.
    pub oracle_id: u64,
    pub max_joint_qubits: usize,
    /// Check state normalization after every operation.
    pub assert_norm: bool,
}

impl TrajectoryPlan {
    pub fn new(shots: u64, master_seed: u64, oracle_id: u64) -> Self {
        Self {
            shots,
            master_seed,
            oracle_id,
            max_joint_qubits: DEFAULT_TRAJECTORY_CAP,
            assert_norm: false,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Apply(usize),
    Measure(usize),
}

/// Op indices reordered so each wire is measured right after its last
/// multi-qubit op together with its trailing single-qubit ops.
fn schedule(compiled: &Compiled) -> Vec<Step> {
    let w = compiled.num_wires;
    let mut last_multi = vec![None; w];
    let mut per_wire: Vec<Vec<usize>> = vec![Vec::new(); w];
    for (i, op) in compiled.ops.iter().enumerate() {
        let (a, b) = op.wires();
        per_wire[a].push(i);
        if let Some(b) = b {
            per_wire[b].push(i);
            last_multi[a] = Some(i);
            last_multi[b] = Some(i);
        }
    }
    let mut steps = Vec::with_capacity(compiled.ops.len() + w);
    let mut done = vec![false; compiled.ops.len()];
    let finish = |q: usize, steps: &mut Vec<Step>, done: &mut Vec<bool>| {
        for &j in &per_wire[q] {
            if !done[j] {
                done[j] = true;
                steps.push(Step::Apply(j));
            }
        }
        steps.push(Step::Measure(q));
    };
    for q in 0..w {
        if last_multi[q].is_none() {
            finish(q, &mut steps, &mut done);
        }
    }
    for (i, op) in compiled.ops.iter().enumerate() {
        if done[i] {
            continue;
        }
        done[i] = true;
        steps.push(Step::Apply(i));
        let (a, b) = op.wires();
        for q in [Some(a), b].into_iter().flatten() {
            if last_multi[q] == Some(i) {
                finish(q, &mut steps, &mut done);
            }
        }
    }
    steps
}

#[derive(Clone, Debug)]
struct Cluster {
    wires: Vec<usize>,
    amps: Vec<Complex64>,
}

struct State {
    clusters: Vec<Option<Cluster>>,
    /// Cluster slot and bit position of each live wire.
    loc: Vec<(usize, usize)>,
    cap: usize,
}

impl State {
    fn new(w: usize, cap: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            clusters: (0..w)
                .map(|q| {
                    Some(Cluster {
                        wires: vec![q],
                        amps: vec![one, zero],
                    })
                })
                .collect(),
            loc: (0..w).map(|q| (q, 0)).collect(),
            cap,
        }
    }

    fn cluster(&mut self, q: usize) -> (&mut Cluster, usize) {
        let (slot, bit) = self.loc[q];
        (self.clusters[slot].as_mut().expect("live cluster"), bit)
    }

    /// Puts `a` and `b` in the same cluster.
    fn join(&mut self, a: usize, b: usize) -> Result<()> {
        let (sa, sb) = (self.loc[a].0, self.loc[b].0);
        if sa == sb {
            return Ok(());
        }
        let ca = self.clusters[sa].take().expect("live cluster");
        let cb = self.clusters[sb].take().expect("live cluster");
        let width = ca.wires.len() + cb.wires.len();
        if width > self.cap {
            return Err(Error::CapExceeded(format!(
                "trajectory state would span {width} qubits (cap {})",
                self.cap
            )));
        }
        let shift = ca.wires.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
        for (j, &y) in cb.amps.iter().enumerate() {
            if y == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (i, &x) in ca.amps.iter().enumerate() {
                amps[i | j << shift] = x * y;
            }
        }
        let mut wires = ca.wires;
        wires.extend(cb.wires);
        for (bit, &q) in wires.iter().enumerate() {
            self.loc[q] = (sa, bit);
        }
        self.clusters[sa] = Some(Cluster { wires, amps });
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, u: &Mat2) {
        let (c, bit) = self.cluster(q);
        let m = 1usize << bit;
        for i in (0..c.amps.len()).filter(|i| i & m == 0) {
            let (a0, a1) = (c.amps[i], c.amps[i | m]);
            c.amps[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            c.amps[i | m] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
    }

    fn pauli(&mut self, q: usize, p: usize) {
        let (c, bit) = self.cluster(q);
        let m = 1usize << bit;
        let i = Complex64::i();
        for k in (0..c.amps.len()).filter(|k| k & m == 0) {
            let (a0, a1) = (c.amps[k], c.amps[k | m]);
            let (b0, b1) = match p {
                1 => (a1, a0),
                2 => (-i * a1, i * a0),
                3 => (a0, -a1),
                _ => (a0, a1),
            };
            c.amps[k] = b0;
            c.amps[k | m] = b1;
        }
    }

    fn prob_one(&mut self, q: usize) -> f64 {
        let (c, bit) = self.cluster(q);
        let m = 1usize << bit;
        c.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn scale(&mut self, q: usize, s0: f64, s1: f64) {
        let (c, bit) = self.cluster(q);
        let m = 1usize << bit;
        for (i, a) in c.amps.iter_mut().enumerate() {
            *a *= if i & m == 0 { s0 } else { s1 };
        }
    }

    fn decay(&mut self, q: usize, norm: f64) {
        let (c, bit) = self.cluster(q);
        let m = 1usize << bit;
        for i in (0..c.amps.len()).filter(|i| i & m == 0) {
            c.amps[i] = c.amps[i | m] / norm;
            c.amps[i | m] = Complex64::new(0.0, 0.0);
        }
    }

    fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.join(control, target)?;
        let (cb, tb) = (1usize << self.loc[control].1, 1usize << self.loc[target].1);
        let (c, _) = self.cluster(control);
        for i in 0..c.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                c.amps.swap(i, i | tb);
            }
        }
        Ok(())
    }

    fn zz(&mut self, a: usize, b: usize, angle: f64) -> Result<()> {
        self.join(a, b)?;
        let (ab, bb) = (1usize << self.loc[a].1, 1usize << self.loc[b].1);
        let same = Complex64::from_polar(1.0, -angle / 2.0);
        let diff = Complex64::from_polar(1.0, angle / 2.0);
        let (c, _) = self.cluster(a);
        for (i, amp) in c.amps.iter_mut().enumerate() {
            *amp *= if (i & ab != 0) == (i & bb != 0) {
                same
            } else {
                diff
            };
        }
        Ok(())
    }

    /// Projective Z measurement that removes the wire from its cluster.
    fn measure(&mut self, q: usize, rng: &mut ChaCha8Rng) -> bool {
        let p1 = self.prob_one(q);
        let outcome = rng.random::<f64>() < p1;
        let norm = if outcome { p1 } else { 1.0 - p1 }.sqrt();
        let (slot, bit) = self.loc[q];
        let c = self.clusters[slot].take().expect("live cluster");
        let m = 1usize << bit;
        let low = m - 1;
        let want = if outcome { m } else { 0 };
        let amps: Vec<Complex64> = (0..c.amps.len() / 2)
            .map(|k| {
                let i = (k & low) | ((k & !low) << 1) | want;
                c.amps[i] / norm
            })
            .collect();
        let wires: Vec<usize> = c.wires.into_iter().filter(|&w| w != q).collect();
        for (b, &w) in wires.iter().enumerate() {
            self.loc[w] = (slot, b);
        }
        if !wires.is_empty() {
            self.clusters[slot] = Some(Cluster { wires, amps });
        }
        outcome
    }

    fn norm_error(&self) -> f64 {
        self.clusters
            .iter()
            .flatten()
            .map(|c| (c.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn rz(theta: f64) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    Mat2::new(
        Complex64::from_polar(1.0, -theta / 2.0),
        z,
        z,
        Complex64::from_polar(1.0, theta / 2.0),
    )
}

/// Runs one trajectory and returns the measured data bits before readout
/// error.
fn run_shot(
    compiled: &Compiled,
    steps: &[Step],
    plan: &TrajectoryPlan,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<bool>> {
    let w = compiled.num_wires;
    let delta = if compiled.sigma > 0.0 {
        let cfg = crate::noise::NoiseConfig {
            detuning_sigma: compiled.sigma,
            ..Default::default()
        };
        crate::noise::sample_static_fields(&cfg, w, rng)
    } else {
        vec![0.0; w]
    };
    let mut state = State::new(w, plan.max_joint_qubits.max(1));
    let mut bits = vec![false; w];
    for step in steps {
        match *step {
            Step::Measure(q) => bits[q] = state.measure(q, rng),
            Step::Apply(i) => match compiled.ops[i] {
                Op::Unitary { wire, ref u } => state.apply_1q(wire, u),
                Op::Depol1 { wire, p } => {
                    if rng.random::<f64>() < p {
                        state.pauli(wire, rng.random_range(1..4));
                    }
                }
                Op::Depol2 { a, b, p } => {
                    if rng.random::<f64>() < p {
                        let idx = rng.random_range(1..16);
                        state.pauli(a, idx / 4);
                        state.pauli(b, idx % 4);
                    }
                }
                Op::Cnot { control, target } => state.cnot(control, target)?,
                Op::Zz { a, b, angle } => state.zz(a, b, angle)?,
                Op::Detune { wire, ticks } => {
                    if delta[wire] != 0.0 {
                        state.apply_1q(wire, &rz(delta[wire] * ticks as f64 * compiled.tick));
                    }
                }
                Op::Relax { wire, r } => {
                    if r.gamma > 0.0 {
                        let p1 = state.prob_one(wire);
                        let p_decay = r.gamma * p1;
                        if rng.random::<f64>() < p_decay {
                            state.decay(wire, p_decay.sqrt() / r.gamma.sqrt());
                        } else {
                            let keep = (1.0 - p_decay).sqrt();
                            state.scale(wire, 1.0 / keep, (1.0 - r.gamma).sqrt() / keep);
                        }
                    }
                    if r.p_z > 0.0 && rng.random::<f64>() < r.p_z {
                        state.pauli(wire, 3);
                    }
                }
            },
        }
        if plan.assert_norm {
            let err = state.norm_error();
            assert!(err < 1e-9, "state norm drifted by {err}");
        }
    }
    Ok(compiled
        .readout
        .iter()
        .map(|r| r.is_some_and(|q| bits[q]))
        .collect())
}

/// Samples `plan.shots` trajectories. Shot `i` draws from a stream that
/// depends only on `(master_seed, oracle_id, i)`.
pub fn simulate_shots_compiled(
    compiled: &Compiled,
    oracle: &OracleSpec,
    plan: &TrajectoryPlan,
) -> Result<ShotTable> {
    if compiled.readout.len() != oracle.n() {
        return invalid(format!(
            "program reads {} bits, oracle has {}",
            compiled.readout.len(),
            oracle.n()
        ));
    }
    let steps = schedule(compiled);
    let mut table = ShotTable::empty(*oracle);
    let mut counts: std::collections::HashMap<Bitstring, u64> = std::collections::HashMap::new();
    for shot in 0..plan.shots {
        let mut rng = stream(plan.master_seed, Purpose::Simulation, plan.oracle_id, shot);
        let bits = run_shot(compiled, &steps, plan, &mut rng)?;
        let ideal = Bitstring::from_bits(&bits)?;
        let seen = readout_sample(ideal, &compiled.confusion, &mut rng);
        *counts.entry(seen).or_insert(0) += 1;
    }
    for (b, c) in counts {
        table.record(b, c);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::compile::{h_matrix, x_matrix};
    use super::super::exact::simulate_exact_compiled;
    use super::*;
    use crate::noise::Relaxation;

    fn compiled(ops: Vec<Op>, w: usize, n: usize) -> Compiled {
        Compiled {
            num_wires: w,
            ops,
            readout: (0..n).map(Some).collect(),
            confusion: vec![(0.02, 0.05); n],
            sigma: 2e6,
            tick: 1e-9,
        }
    }

    fn oracle(n: usize) -> OracleSpec {
        OracleSpec::new(Bitstring::ones_then_zeros(n, n).unwrap())
    }

    /// BV-2 style circuit with every kind of noise op.
    fn noisy_ops() -> Vec<Op> {
        let relax = Relaxation::new(40e-6, 30e-6, 5e-6).unwrap();
        vec![
            Op::Unitary {
                wire: 2,
                u: x_matrix(),
            },
            Op::Unitary {
                wire: 0,
                u: h_matrix(),
            },
            Op::Unitary {
                wire: 1,
                u: h_matrix(),
            },
            Op::Unitary {
                wire: 2,
                u: h_matrix(),
            },
            Op::Depol1 { wire: 0, p: 0.05 },
            Op::Detune {
                wire: 1,
                ticks: 250,
            },
            Op::Relax { wire: 1, r: relax },
            Op::Cnot {
                control: 0,
                target: 2,
            },
            Op::Depol2 {
                a: 0,
                b: 2,
                p: 0.08,
            },
            Op::Zz {
                a: 0,
                b: 1,
                angle: 0.4,
            },
            Op::Cnot {
                control: 1,
                target: 2,
            },
            Op::Relax { wire: 0, r: relax },
            Op::Detune {
                wire: 0,
                ticks: 400,
            },
            Op::Unitary {
                wire: 0,
                u: h_matrix(),
            },
            Op::Unitary {
                wire: 1,
                u: h_matrix(),
            },
            Op::Unitary {
                wire: 2,
                u: h_matrix(),
            },
        ]
    }

    #[test]
    fn agrees_with_exact_backend() {
        let c = compiled(noisy_ops(), 3, 2);
        let exact = simulate_exact_compiled(&c, 7).unwrap();
        let shots = 40_000;
        let mut plan = TrajectoryPlan::new(shots, 9, 1);
        plan.assert_norm = true;
        let table = simulate_shots_compiled(&c, &oracle(2), &plan).unwrap();
        for (b, &p) in &exact {
            let got = table.count(b) as f64 / shots as f64;
            let sd = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((got - p).abs() < 4.0 * sd + 1e-12, "{b}: {got} vs {p}");
        }
    }

    #[test]
    fn shots_are_deterministic_per_seed() {
        let c = compiled(noisy_ops(), 3, 2);
        let run = |seed| {
            simulate_shots_compiled(&c, &oracle(2), &TrajectoryPlan::new(500, seed, 4)).unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn joint_state_cap() {
        let ops = vec![
            Op::Cnot {
                control: 0,
                target: 1,
            },
            Op::Cnot {
                control: 2,
                target: 3,
            },
            Op::Cnot {
                control: 1,
                target: 2,
            },
            Op::Cnot {
                control: 0,
                target: 3,
            },
        ];
        let c = compiled(ops, 4, 4);
        let mut plan = TrajectoryPlan::new(1, 0, 0);
        plan.max_joint_qubits = 3;
        assert!(matches!(
            simulate_shots_compiled(&c, &oracle(4), &plan),
            Err(Error::CapExceeded(_))
        ));
        plan.max_joint_qubits = 4;
        assert!(simulate_shots_compiled(&c, &oracle(4), &plan).is_ok());
    }

    #[test]
    fn early_measurement_keeps_clusters_small() {
        // A fan-in onto wire 0 from 30 wires: each source is measured right
        // after its CNOT, so the joint state never exceeds two qubits.
        let mut ops = vec![Op::Unitary {
            wire: 0,
            u: x_matrix(),
        }];
        for q in 1..=30 {
            ops.push(Op::Unitary {
                wire: q,
                u: h_matrix(),
            });
        }
        for q in 1..=30 {
            ops.push(Op::Cnot {
                control: q,
                target: 0,
            });
            ops.push(Op::Unitary {
                wire: q,
                u: h_matrix(),
            });
        }
        let mut c = compiled(ops, 31, 1);
        c.sigma = 0.0;
        c.confusion = vec![(0.0, 0.0)];
        let mut plan = TrajectoryPlan::new(20, 0, 0);
        plan.max_joint_qubits = 2;
        let t = simulate_shots_compiled(&c, &OracleSpec::new(Bitstring::new(1, 1).unwrap()), &plan)
            .unwrap();
        assert_eq!(t.total_shots(), 20);
    }
}
