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

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ssbv_bench::all_ones;
use ssbv_core::noise::Profile;
use ssbv_core::pipeline::{dd_policy, prepare, RunOptions};
use ssbv_core::sim::{simulate_exact, simulate_shots, TrajectoryPlan};

fn trajectory(c: &mut Criterion) {
    let p = Profile::builtin("montreal").unwrap();
    let mut group = c.benchmark_group("trajectory_1000_shots");
    group.sample_size(10);
    for (label, dd) in [
        ("bv10", None),
        ("bv10_ur14", Some(dd_policy(14, &p.device).unwrap())),
    ] {
        let spec = all_ones(10);
        let prepared = prepare(
            &spec,
            &p.device,
            &RunOptions {
                dd,
                ..RunOptions::default()
            },
        )
        .unwrap();
        group.bench_function(label, |b| {
            b.iter(|| {
                let plan = TrajectoryPlan::new(1000, 1, 0);
                simulate_shots(
                    black_box(&prepared.program),
                    &spec,
                    &p.device,
                    &p.noise,
                    &plan,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn exact(c: &mut Criterion) {
    let p = Profile::builtin("montreal").unwrap();
    let spec = all_ones(4);
    let prepared = prepare(&spec, &p.device, &RunOptions::default()).unwrap();
    let mut group = c.benchmark_group("exact");
    group.sample_size(10);
    group.bench_function("bv4", |b| {
        b.iter(|| simulate_exact(black_box(&prepared.program), &p.device, &p.noise).unwrap())
    });
    group.finish();
}

criterion_group!(benches, trajectory, exact);
criterion_main!(benches);
