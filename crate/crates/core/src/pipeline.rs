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

//! Routing, DD dressing and simulation of whole oracle sets.

use crate::bv::{reduce_counts, OracleSpec, ShotTable};
use crate::circuit::Program;
use crate::dd::{schedule_dd, ur_phases, DdPolicy, Fallback, GapSchedule};
use crate::error::{invalid, Result};
use crate::noise::{DeviceModel, NoiseConfig};
use crate::route::{route_oracle, RouteOptions, RoutedCircuit, Setup};
use crate::seed::oracle_id;
use crate::sim::{simulate_shots, TrajectoryPlan};

/// How oracles are compiled before simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub setup: Setup,
    pub fuse: bool,
    pub ancilla_start: Option<usize>,
    pub dd: Option<DdPolicy>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            setup: Setup::Reduced,
            fuse: true,
            ancilla_start: None,
            dd: None,
        }
    }
}

/// `UR_n` with the device's pulse length, ladder fallback and interior
/// gaps only.
pub fn dd_policy(n: usize, device: &DeviceModel) -> Result<DdPolicy> {
    Ok(DdPolicy {
        sequence: ur_phases(n)?,
        pulse_duration: device.durations.dd_pulse,
        fallback: Fallback::Ladder,
        include_edges: false,
    })
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub routed: RoutedCircuit,
    /// The routed program, with DD pulses when requested.
    pub program: Program,
    pub gaps: Vec<GapSchedule>,
}

pub fn prepare(spec: &OracleSpec, device: &DeviceModel, options: &RunOptions) -> Result<Prepared> {
    let route_options = RouteOptions {
        setup: options.setup,
        fuse: options.fuse,
        durations: device.durations,
        dt: device.dt,
    };
    let routed = route_oracle(spec, &device.graph, options.ancilla_start, &route_options)?;
    let mut program = routed.program.clone();
    let gaps = match &options.dd {
        Some(policy) => {
            let (circuit, gaps) = schedule_dd(&program.circuit, policy)?;
            program.circuit = circuit;
            gaps
        }
        None => Vec::new(),
    };
    Ok(Prepared {
        routed,
        program,
        gaps,
    })
}

/// Trajectory simulation of one oracle. The shot streams depend on the
/// oracle, so tables for different oracles are independent.
pub fn simulate_oracle(
    spec: &OracleSpec,
    device: &DeviceModel,
    noise: &NoiseConfig,
    options: &RunOptions,
    shots: u64,
    master_seed: u64,
) -> Result<ShotTable> {
    let prepared = prepare(spec, device, options)?;
    let plan = TrajectoryPlan::new(shots, master_seed, oracle_id(spec.n(), spec.b.value()));
    simulate_shots(&prepared.program, spec, device, noise, &plan)
}

/// BV-`m` tables obtained by tracing the trailing qubits out of BV-`n`
/// tables for `1^k 0^(n-k)`. Oracles with `k > m` have no BV-`m`
/// counterpart and are skipped.
pub fn reduce_from_max(tables: &[ShotTable], m: usize) -> Result<Vec<ShotTable>> {
    let mut out = Vec::new();
    for t in tables {
        let spec = t.oracle();
        if m > spec.n() {
            return invalid(format!("cannot reduce BV-{} to BV-{m}", spec.n()));
        }
        if m == spec.n() {
            out.push(t.clone());
        } else if spec.k() <= m {
            out.push(reduce_counts(t, m)?);
        }
    }
    out.sort_by_key(|t| t.oracle().k());
    Ok(out)
}
