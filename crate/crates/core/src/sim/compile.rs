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

//! Lowering of a timed program plus noise model to a flat operation stream
//! shared by both backends.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::circuit::{GateKind, Program};
use crate::dd::pulse_unitary;
use crate::error::{invalid, Result};
use crate::noise::{DeviceModel, NoiseConfig, Relaxation};

pub type Mat2 = Matrix2<Complex64>;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Unitary {
        wire: usize,
        u: Mat2,
    },
    Depol1 {
        wire: usize,
        p: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Depol2 {
        a: usize,
        b: usize,
        p: f64,
    },
    Relax {
        wire: usize,
        r: Relaxation,
    },
    /// Free precession under the static detuning for `ticks` dt units.
    Detune {
        wire: usize,
        ticks: u64,
    },
    /// `exp(-i angle Z Z / 2)`.
    Zz {
        a: usize,
        b: usize,
        angle: f64,
    },
}

impl Op {
    pub fn wires(&self) -> (usize, Option<usize>) {
        match *self {
            Op::Unitary { wire, .. }
            | Op::Depol1 { wire, .. }
            | Op::Relax { wire, .. }
            | Op::Detune { wire, .. } => (wire, None),
            Op::Cnot { control, target } => (control, Some(target)),
            Op::Depol2 { a, b, .. } | Op::Zz { a, b, .. } => (a, Some(b)),
        }
    }

    pub fn is_multi(&self) -> bool {
        self.wires().1.is_some()
    }
}

/// Everything a backend needs: the op stream, which wires are read out as
/// which data bits, and the readout confusion of each data bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Compiled {
    pub num_wires: usize,
    pub ops: Vec<Op>,
    pub readout: Vec<Option<usize>>,
    /// `(p(read 1 | 0), p(read 0 | 1))` per data bit.
    pub confusion: Vec<(f64, f64)>,
    /// Static detuning standard deviation, rad/s.
    pub sigma: f64,
    /// Seconds per dt tick.
    pub tick: f64,
}

pub fn h_matrix() -> Mat2 {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Mat2::new(s, s, s, -s)
}

pub fn x_matrix() -> Mat2 {
    let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    Mat2::new(z, o, o, z)
}

fn gate_matrix(kind: GateKind, eps: f64) -> Option<Mat2> {
    match kind {
        GateKind::H => Some(h_matrix()),
        GateKind::X => Some(x_matrix()),
        GateKind::PhasedPi(phase) => Some(pulse_unitary(phase, eps)),
        GateKind::Cnot | GateKind::Delay => None,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Activity {
    Idle,
    OneQubit,
    TwoQubit,
}

/// Per-wire accumulator for mergeable continuous-time noise.
#[derive(Clone, Copy, Default)]
struct Pending {
    relax: Option<Relaxation>,
    detune: u64,
}

fn flush(wire: usize, p: &mut Pending, ops: &mut Vec<Op>) {
    if let Some(r) = p.relax.take() {
        if !r.is_trivial() {
            ops.push(Op::Relax { wire, r });
        }
    }
    if p.detune > 0 {
        ops.push(Op::Detune {
            wire,
            ticks: p.detune,
        });
        p.detune = 0;
    }
}

/// Lowers `program` on `device` with `noise`.
///
/// Each gate is applied at its start time followed by its depolarizing
/// channel. Between consecutive event boundaries every wire decoheres unless
/// it is inside a two-qubit gate, whose error rate already covers it; idle
/// wires also precess under the static detuning, and idle neighbours pick up
/// ZZ phase. Readout is instantaneous apart from the confusion matrix.
pub fn compile(program: &Program, device: &DeviceModel, noise: &NoiseConfig) -> Result<Compiled> {
    let c = &program.circuit;
    let w = c.num_qubits;
    if program.physical.len() != w {
        return invalid("program needs one physical node per wire");
    }
    if let Some(&p) = program.physical.iter().find(|&&p| p >= device.qubits.len()) {
        return invalid(format!(
            "wire mapped to node {p}, device has {}",
            device.qubits.len()
        ));
    }
    if let Some(Some(bad)) = program.readout.iter().find(|r| r.is_some_and(|x| x >= w)) {
        return invalid(format!("readout wire {bad} out of range"));
    }
    crate::circuit::validate_circuit(c)
        .map_err(|v| crate::error::Error::InvalidArgument(format!("invalid circuit: {v}")))?;
    noise.validate()?;
    let ch = noise.channels;
    let dt = c.dt.seconds_per_tick();
    let eps = noise.eps();
    let sigma = noise.sigma();
    let zz = noise.zz();
    let params: Vec<_> = program.physical.iter().map(|&p| device.qubits[p]).collect();

    let mut events: Vec<_> = c.events.iter().filter(|e| e.duration() > 0).collect();
    events.sort_by_key(|e| e.start());
    let mut bounds: Vec<u64> = vec![0, c.end_time()];
    for e in &events {
        bounds.push(e.start());
        bounds.push(e.end());
    }
    bounds.sort_unstable();
    bounds.dedup();

    let pairs: Vec<(usize, usize)> = if zz > 0.0 {
        (0..w)
            .flat_map(|a| (a + 1..w).map(move |b| (a, b)))
            .filter(|&(a, b)| {
                device
                    .graph
                    .is_adjacent(program.physical[a], program.physical[b])
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut ops = Vec::new();
    let mut pending = vec![Pending::default(); w];
    let mut activity = vec![Activity::Idle; w];
    let mut busy_until = vec![0u64; w];
    let mut next_event = 0;
    for seg in bounds.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        for q in 0..w {
            if busy_until[q] <= t0 {
                activity[q] = Activity::Idle;
            }
        }
        while next_event < events.len() && events[next_event].start() == t0 {
            let e = events[next_event];
            next_event += 1;
            let qs = e.qubits();
            for &q in qs {
                flush(q, &mut pending[q], &mut ops);
                busy_until[q] = e.end();
            }
            match e.kind() {
                GateKind::Delay => {}
                GateKind::Cnot => {
                    ops.push(Op::Cnot {
                        control: qs[0],
                        target: qs[1],
                    });
                    if ch.depolarizing && device.error_2q > 0.0 {
                        ops.push(Op::Depol2 {
                            a: qs[0],
                            b: qs[1],
                            p: device.error_2q,
                        });
                    }
                    activity[qs[0]] = Activity::TwoQubit;
                    activity[qs[1]] = Activity::TwoQubit;
                }
                kind => {
                    let u = gate_matrix(kind, eps).expect("single-qubit gate");
                    ops.push(Op::Unitary { wire: qs[0], u });
                    if ch.depolarizing && device.error_1q > 0.0 {
                        ops.push(Op::Depol1 {
                            wire: qs[0],
                            p: device.error_1q,
                        });
                    }
                    activity[qs[0]] = Activity::OneQubit;
                }
            }
            if e.kind() == GateKind::Delay {
                for &q in qs {
                    activity[q] = Activity::Idle;
                }
            }
        }
        let len = (t1 - t0) as f64 * dt;
        for q in 0..w {
            if ch.decoherence && activity[q] != Activity::TwoQubit {
                let r = Relaxation::new(params[q].t1, params[q].t2, len)?;
                let p = &mut pending[q];
                p.relax = Some(p.relax.map_or(r, |old| old.compose(r)));
            }
            if activity[q] == Activity::Idle && sigma > 0.0 {
                pending[q].detune += t1 - t0;
            }
        }
        for &(a, b) in &pairs {
            if activity[a] == Activity::Idle && activity[b] == Activity::Idle {
                flush(a, &mut pending[a], &mut ops);
                flush(b, &mut pending[b], &mut ops);
                ops.push(Op::Zz {
                    a,
                    b,
                    angle: zz * len,
                });
            }
        }
    }
    for (q, p) in pending.iter_mut().enumerate() {
        flush(q, p, &mut ops);
    }

    let mean = device.mean_qubit();
    let confusion = program
        .readout
        .iter()
        .map(|r| {
            if !ch.readout {
                return (0.0, 0.0);
            }
            let q = r.map_or(mean, |wire| params[wire]);
            (q.p_read1_given0, q.p_read0_given1)
        })
        .collect();
    Ok(Compiled {
        num_wires: w,
        ops,
        readout: program.readout.clone(),
        confusion,
        sigma,
        tick: dt,
    })
}
