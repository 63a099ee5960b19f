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

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssbv_bench::all_ones;
use ssbv_core::route::{find_embedding, route_oracle, CouplingGraph, RouteOptions};

fn embedding_search(c: &mut Criterion) {
    let g = CouplingGraph::heavy_hex_27();
    let mut group = c.benchmark_group("embedding_heavy_hex");
    for n in [8, 16, 26] {
        let marked: Vec<usize> = (0..n).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &marked, |b, m| {
            b.iter(|| find_embedding(black_box(&g), m, None).unwrap())
        });
    }
    group.finish();
}

fn full_routing(c: &mut Criterion) {
    let opts = RouteOptions::default();
    let spec = all_ones(20);
    let hh = CouplingGraph::heavy_hex_27();
    let chain = CouplingGraph::chain(21);
    c.bench_function("route_bv20_heavy_hex", |b| {
        b.iter(|| route_oracle(black_box(&spec), &hh, None, &opts).unwrap())
    });
    c.bench_function("route_bv20_chain", |b| {
        b.iter(|| route_oracle(black_box(&spec), &chain, None, &opts).unwrap())
    });
}

criterion_group!(benches, embedding_search, full_routing);
criterion_main!(benches);
