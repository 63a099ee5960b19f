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

//! Universally robust dynamical-decoupling sequences and their placement in
//! idle gaps.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{normalize_phase, validate_circuit, GateEvent, GateKind, TimedCircuit};
use crate::error::{invalid, Result};

/// An ordered list of phased pi pulses.
#[derive(Clone, Debug, PartialEq)]
pub struct DDSequence {
    pub name: String,
    pub phases: Vec<f64>,
}

impl DDSequence {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// `UR_n` phases: `phi_k = (k-1)(k-2)/2 * Phi + (k-1) * pi/2` with
/// `Phi = pi/m` for `n = 4m` and `2m*pi/(2m+1)` for `n = 4m + 2`.
pub fn ur_phases(n: usize) -> Result<DDSequence> {
    if n < 4 || n % 2 == 1 {
        return invalid(format!("UR_n needs an even n >= 4, got {n}"));
    }
    let m = (n / 4) as f64;
    let big_phi = if n % 4 == 0 {
        PI / m
    } else {
        2.0 * m * PI / (2.0 * m + 1.0)
    };
    // With phi_2 = pi/2 the n = 4m + 2 products come out as a Z rotation by
    // pi; phi_2 = 0 keeps them proportional to the identity.
    let phi2 = if n % 4 == 0 { FRAC_PI_2 } else { 0.0 };
    let phases = (1..=n)
        .map(|k| {
            let k = k as f64;
            normalize_phase((k - 1.0) * (k - 2.0) / 2.0 * big_phi + (k - 1.0) * phi2)
        })
        .collect();
    Ok(DDSequence {
        name: format!("UR{n}"),
        phases,
    })
}

/// `exp(-i theta/2 (cos(phi) X + sin(phi) Y))` with `theta = pi (1 + eps)`.
pub fn pulse_unitary(phase: f64, eps: f64) -> Matrix2<Complex64> {
    let half = PI * (1.0 + eps) / 2.0;
    let (c, s) = (half.cos(), half.sin());
    let i = Complex64::i();
    let e_minus = Complex64::from_polar(1.0, -phase);
    let e_plus = Complex64::from_polar(1.0, phase);
    Matrix2::new(
        Complex64::from(c),
        -i * s * e_minus,
        -i * s * e_plus,
        Complex64::from(c),
    )
}

/// Time-ordered product of pulses (first pulse acts first).
pub fn sequence_unitary(phases: &[f64], eps: f64) -> Matrix2<Complex64> {
    phases
        .iter()
        .fold(Matrix2::identity(), |acc, &p| pulse_unitary(p, eps) * acc)
}

/// Whether the ideal pulse product is proportional to the identity.
pub fn is_identity_up_to_phase(phases: &[f64], tol: f64) -> bool {
    let u = sequence_unitary(phases, 0.0);
    (u.trace().norm() - 2.0).abs() < tol && u[(0, 1)].norm() < tol && u[(1, 0)].norm() < tol
}

/// Per-qubit idle intervals `[start, end)` in ticks.
///
/// Only the span between a qubit's first and last event is considered unless
/// `include_edges` is set, in which case the stretch from time 0 and the one
/// up to the end of the last gate in the circuit count too. Delay events are
/// treated as idle time.
pub fn detect_gaps(circuit: &TimedCircuit, include_edges: bool) -> Vec<Vec<(u64, u64)>> {
    let horizon = circuit.end_time();
    (0..circuit.num_qubits)
        .map(|q| {
            let busy: Vec<(u64, u64)> = circuit
                .events_on(q)
                .into_iter()
                .filter(|e| e.kind() != GateKind::Delay)
                .map(|e| (e.start(), e.end()))
                .collect();
            let mut gaps = Vec::new();
            let Some(&(first, _)) = busy.first() else {
                return gaps;
            };
            if include_edges && first > 0 {
                gaps.push((0, first));
            }
            let mut cursor = first;
            for &(s, e) in &busy {
                if s > cursor {
                    gaps.push((cursor, s));
                }
                cursor = cursor.max(e);
            }
            if include_edges && horizon > cursor {
                gaps.push((cursor, horizon));
            }
            gaps
        })
        .collect()
}

/// What to do with a gap too short for the configured sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    /// Try `UR_(n-4)`, `UR_(n-8)`, ... and finally `UR_4`.
    #[default]
    Ladder,
    Idle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdPolicy {
    pub sequence: DDSequence,
    pub pulse_duration: u64,
    pub fallback: Fallback,
    pub include_edges: bool,
}

/// Pulses placed in one gap.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSchedule {
    pub qubit: usize,
    pub gap: (u64, u64),
    pub pulse_starts: Vec<u64>,
    pub sequence: String,
}

fn ladder(seq: &DDSequence, fallback: Fallback) -> Result<Vec<DDSequence>> {
    let mut out = vec![seq.clone()];
    if fallback == Fallback::Ladder {
        let mut n = seq.len();
        while n >= 8 {
            n -= 4;
            out.push(ur_phases(n)?);
        }
        if n != 4 {
            out.push(ur_phases(4)?);
        }
    }
    Ok(out)
}

/// Starts of `n` pulses of length `pd` with centres equally spaced across a
/// gap of length `len`, rounded toward the gap start.
pub fn pulse_starts(gap_start: u64, len: u64, n: usize, pd: u64) -> Vec<u64> {
    let n = n as u64;
    (0..n)
        .map(|j| gap_start + ((2 * j + 1) * len - n * pd) / (2 * n))
        .collect()
}

/// Fills each idle gap with one repetition of the policy's sequence.
pub fn schedule_dd(
    circuit: &TimedCircuit,
    policy: &DdPolicy,
) -> Result<(TimedCircuit, Vec<GapSchedule>)> {
    let pd = policy.pulse_duration;
    if pd == 0 {
        return invalid("DD pulse duration must be positive");
    }
    let candidates = ladder(&policy.sequence, policy.fallback)?;
    let gaps = detect_gaps(circuit, policy.include_edges);
    let mut out = circuit.clone();
    let mut schedules = Vec::new();
    for (q, qgaps) in gaps.into_iter().enumerate() {
        for (g0, g1) in qgaps {
            let len = g1 - g0;
            let Some(seq) = candidates.iter().find(|s| len >= s.len() as u64 * pd) else {
                continue;
            };
            out.events.retain(|e| {
                !(e.kind() == GateKind::Delay && e.acts_on(q) && e.start() < g1 && e.end() > g0)
            });
            let starts = pulse_starts(g0, len, seq.len(), pd);
            for (&t, &phase) in starts.iter().zip(&seq.phases) {
                out.events
                    .push(GateEvent::new(GateKind::PhasedPi(phase), vec![q], t, pd)?);
            }
            schedules.push(GapSchedule {
                qubit: q,
                gap: (g0, g1),
                pulse_starts: starts,
                sequence: seq.name.clone(),
            });
        }
    }
    debug_assert_eq!(validate_circuit(&out), Ok(()));
    Ok((out, schedules))
}
