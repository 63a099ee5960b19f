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

//! Shared fixtures for the benchmarks in `benches/`.

use ssbv_core::analysis::TtsPoint;
use ssbv_core::bv::representative_oracles;
use ssbv_core::{Bitstring, OracleSpec, ShotTable};

/// Tables for every representative oracle of size `n` with `succ` hits out
/// of `shots`; misses land on the answer with its first bit flipped.
pub fn representative_tables(n: usize, succ: u64, shots: u64) -> Vec<ShotTable> {
    representative_oracles(n)
        .expect("n >= 1")
        .into_iter()
        .map(|spec| {
            let mut t = ShotTable::empty(spec);
            t.record(spec.b, succ);
            t.record(spec.b.with_bit(0, !spec.b.bit(0)), shots - succ);
            t
        })
        .collect()
}

/// The all-ones oracle of size `n`.
pub fn all_ones(n: usize) -> OracleSpec {
    OracleSpec::new(Bitstring::ones_then_zeros(n, n).expect("n <= 64"))
}

/// A noiseless TTS curve `2^(lambda n)` for `n = 1..=hi`.
pub fn exponential_curve(lambda: f64, hi: usize) -> Vec<TtsPoint> {
    (1..=hi)
        .map(|n| TtsPoint::exact(n, 2f64.powf(lambda * n as f64)))
        .collect()
}
