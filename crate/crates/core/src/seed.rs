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

//! Derivation of independent random streams from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the derivation,
/// so the values must never change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Simulation = 1,
    Bootstrap = 2,
    Synthetic = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A 64-bit key that is a pure function of its inputs.
pub fn derive(master: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(master);
    for x in [purpose as u64, a, b] {
        h = splitmix64(h ^ x);
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, purpose, a, b))
}

/// Stable identifier of an oracle `(n, b)` for stream derivation.
pub fn oracle_id(n: usize, b_value: u64) -> u64 {
    splitmix64((n as u64) << 58 ^ b_value)
}
