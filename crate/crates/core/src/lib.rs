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

//! Single-shot Bernstein-Vazirani benchmarking toolkit.

pub mod analysis;
pub mod bv;
pub mod circuit;
pub mod dd;
pub mod error;
pub mod noise;
pub mod pipeline;
pub mod route;
pub mod seed;
pub mod sim;

pub use bv::{OracleSpec, ShotTable};
pub use circuit::{Bitstring, Dt, DurationModel, GateEvent, GateKind, Program, TimedCircuit};
pub use error::{Error, Result};
pub use noise::{DeviceModel, NoiseConfig, Profile};
pub use route::{CouplingGraph, Embedding, RoutedCircuit};
