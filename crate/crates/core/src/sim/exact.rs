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

//! Exact density-operator backend.
//!
//! The static detuning is averaged analytically: coherences of each wire
//! carry a tag recording how long they have precessed (with sign), and the
//! Gaussian average `exp(-sigma^2 T^2 / 2)` is applied per tag at the end.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::compile::{Compiled, Mat2, Op};
use super::{apply_confusion, Distribution};
use crate::circuit::Bitstring;
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_CAP: usize = 7;
/// Upper bound on distinct precession tags before giving up.
pub const MAX_TAGS: usize = 1 << 16;
/// Branches whose entries all fall below this are dropped. They come from
/// several unlikely Pauli errors inside one DD sequence.
const PRUNE: f64 = 1e-14;

type CMat = DMatrix<Complex64>;

type Super = [[Complex64; 4]; 4];

/// Superoperator of the Kraus set `ks` on row-major 2x2 blocks.
fn superop(ks: &[Mat2]) -> Super {
    let mut s = [[Complex64::new(0.0, 0.0); 4]; 4];
    for k in ks {
        for (row, out) in s.iter_mut().enumerate() {
            let (i, j) = (row / 2, row % 2);
            for (col, v) in out.iter_mut().enumerate() {
                let (a, b) = (col / 2, col % 2);
                *v += k[(i, a)] * k[(j, b)].conj();
            }
        }
    }
    s
}

/// Visits every 2x2 block of `rho` on `wire` as `[00, 01, 10, 11]`.
fn for_each_block(rho: &mut CMat, wire: usize, mut f: impl FnMut(&mut [Complex64; 4])) {
    let dim = rho.nrows();
    let bit = 1usize << wire;
    for c in (0..dim).filter(|c| c & bit == 0) {
        for r in (0..dim).filter(|r| r & bit == 0) {
            let idx = [(r, c), (r, c | bit), (r | bit, c), (r | bit, c | bit)];
            let mut m = idx.map(|i| rho[i]);
            f(&mut m);
            for (i, v) in idx.into_iter().zip(m) {
                rho[i] = v;
            }
        }
    }
}

fn apply_super(rho: &mut CMat, wire: usize, s: &Super) {
    for_each_block(rho, wire, |m| {
        let old = *m;
        for (out, row) in m.iter_mut().zip(s) {
            *out = row.iter().zip(&old).map(|(a, b)| a * b).sum();
        }
    });
}

fn relax_kraus(gamma: f64, p_z: f64) -> Vec<Mat2> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let k0 = Mat2::new(one, zero, zero, Complex64::new((1.0 - gamma).sqrt(), 0.0));
    let k1 = Mat2::new(zero, Complex64::new(gamma.sqrt(), 0.0), zero, zero);
    let z = Mat2::new(one, zero, zero, -one);
    let (a, b) = ((1.0 - p_z).sqrt(), p_z.sqrt());
    [k0, k1]
        .iter()
        .flat_map(|k| [k * Complex64::new(a, 0.0), z * k * Complex64::new(b, 0.0)])
        .collect()
}

fn apply_op(rho: &mut CMat, op: &Op) {
    let dim = rho.nrows();
    match *op {
        Op::Unitary { wire, ref u } => apply_super(rho, wire, &superop(std::slice::from_ref(u))),
        Op::Relax { wire, r } => apply_super(rho, wire, &superop(&relax_kraus(r.gamma, r.p_z))),
        // Summing P rho P over all Paulis leaves the partial trace times the
        // identity, so depolarizing only mixes in that term.
        Op::Depol1 { wire, p } => {
            let keep = Complex64::new(1.0 - 4.0 * p / 3.0, 0.0);
            let mix = Complex64::new(2.0 * p / 3.0, 0.0);
            for_each_block(rho, wire, |m| {
                let tr = m[0] + m[3];
                for v in m.iter_mut() {
                    *v *= keep;
                }
                m[0] += mix * tr;
                m[3] += mix * tr;
            });
        }
        Op::Depol2 { a, b, p } => {
            let keep = Complex64::new(1.0 - 16.0 * p / 15.0, 0.0);
            let mix = Complex64::new(4.0 * p / 15.0, 0.0);
            let mask = (1usize << a) | (1usize << b);
            let offs = [0, 1usize << a, 1usize << b, mask];
            for c in (0..dim).filter(|c| c & mask == 0) {
                for r in (0..dim).filter(|r| r & mask == 0) {
                    let tr: Complex64 = offs.iter().map(|&o| rho[(r | o, c | o)]).sum();
                    for &i in &offs {
                        for &j in &offs {
                            rho[(r | i, c | j)] *= keep;
                        }
                    }
                    for &o in &offs {
                        rho[(r | o, c | o)] += mix * tr;
                    }
                }
            }
        }
        Op::Cnot { control, target } => {
            let (cb, tb) = (1usize << control, 1usize << target);
            let f = |i: usize| if i & cb != 0 { i ^ tb } else { i };
            // Rows then columns; each is an involution, so swap pairs once.
            for r in (0..dim).filter(|&r| r & cb != 0 && r & tb == 0) {
                rho.swap_rows(r, r | tb);
            }
            for c in (0..dim).filter(|&c| f(c) > c) {
                rho.swap_columns(c, f(c));
            }
        }
        Op::Zz { a, b, angle } => {
            let z = |i: usize| -> f64 {
                if (i >> a ^ i >> b) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            // exp(-i angle/2 ZZ) on both sides: phase exp(-i angle d/2).
            let phase = [
                Complex64::from_polar(1.0, angle),
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(1.0, -angle),
            ];
            for c in 0..dim {
                for r in 0..dim {
                    let d = z(r) - z(c);
                    if d != 0.0 {
                        rho[(r, c)] *= phase[(d / 2.0 + 1.0) as usize];
                    }
                }
            }
        }
        Op::Detune { .. } => unreachable!("detuning is handled by tags"),
    }
}

/// Density matrix of all wires after the op stream, averaged over the
/// static detuning. Fails if the register exceeds `cap` wires.
pub fn final_density(compiled: &Compiled, cap: usize) -> Result<CMat> {
    let w = compiled.num_wires;
    if w > cap {
        return Err(Error::CapExceeded(format!(
            "exact backend holds at most {cap} qubits, circuit has {w}"
        )));
    }
    let dim = 1usize << w;
    let mut init = CMat::zeros(dim, dim);
    init[(0, 0)] = Complex64::new(1.0, 0.0);
    let mut blocks: HashMap<Vec<i64>, CMat> = HashMap::from([(vec![0; w], init)]);
    // Precession tags count dt ticks, so echoes cancel exactly.
    for op in &compiled.ops {
        match *op {
            Op::Detune { wire, ticks } => {
                if compiled.sigma == 0.0 {
                    continue;
                }
                let t = ticks as i64;
                let bit = 1usize << wire;
                let mut next: HashMap<Vec<i64>, CMat> = HashMap::new();
                for (tag, rho) in blocks {
                    let mut parts = [rho.clone(), CMat::zeros(dim, dim), CMat::zeros(dim, dim)];
                    for r in 0..dim {
                        for c in 0..dim {
                            let slot = match (r & bit != 0, c & bit != 0) {
                                (false, true) => 1,
                                (true, false) => 2,
                                _ => continue,
                            };
                            parts[slot][(r, c)] = rho[(r, c)];
                            parts[0][(r, c)] = Complex64::new(0.0, 0.0);
                        }
                    }
                    for (slot, part) in parts.into_iter().enumerate() {
                        let mut key = tag.clone();
                        key[wire] += match slot {
                            0 => 0,
                            1 => t,
                            _ => -t,
                        };
                        if part.iter().all(|z| z.norm_sqr() <= PRUNE * PRUNE) {
                            continue;
                        }
                        *next.entry(key).or_insert_with(|| CMat::zeros(dim, dim)) += part;
                    }
                }
                if next.len() > MAX_TAGS {
                    return Err(Error::CapExceeded(format!(
                        "detuning average needs more than {MAX_TAGS} precession tags"
                    )));
                }
                blocks = next;
            }
            ref other => {
                for rho in blocks.values_mut() {
                    apply_op(rho, other);
                }
            }
        }
    }
    let sigma = compiled.sigma;
    let mut rho = CMat::zeros(dim, dim);
    for (tag, block) in blocks {
        let s2: f64 = tag
            .iter()
            .map(|&t| (t as f64 * compiled.tick).powi(2))
            .sum();
        rho += block * Complex64::new((-0.5 * sigma * sigma * s2).exp(), 0.0);
    }
    Ok(rho)
}

/// Exact distribution of the measured data bits.
pub fn simulate_exact_compiled(compiled: &Compiled, cap: usize) -> Result<Distribution> {
    let rho = final_density(compiled, cap)?;
    let n = compiled.readout.len();
    let mut ideal: BTreeMap<Bitstring, f64> = BTreeMap::new();
    for idx in 0..rho.nrows() {
        let p = rho[(idx, idx)].re;
        if p <= 0.0 {
            continue;
        }
        let bits: Vec<bool> = compiled
            .readout
            .iter()
            .map(|r| r.is_some_and(|w| idx >> w & 1 == 1))
            .collect();
        *ideal.entry(Bitstring::from_bits(&bits)?).or_insert(0.0) += p;
    }
    debug_assert_eq!(n, compiled.confusion.len());
    Ok(apply_confusion(&ideal, &compiled.confusion))
}
