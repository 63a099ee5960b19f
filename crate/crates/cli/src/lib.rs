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

//! Experiment pipeline for single-shot Bernstein-Vazirani studies:
//! configuration files, the run manifest, count-file ingestion, analysis
//! reports and plot data.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use ssbv_core::dd::Fallback;
use ssbv_core::{Error, Result};

use crate::config::{parse_dd, ExperimentConfig};

/// Process exit status for an error: 2 for configuration and input
/// problems, 3 for an instance that cannot be routed, 4 for a simulator
/// size cap and 1 for anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::Parse { .. } => 2,
        Error::Infeasible(_) => 3,
        Error::CapExceeded(_) => 4,
        Error::Io(_) => 1,
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub layout: Option<String>,
    pub shots: Option<u64>,
    pub dd: Option<String>,
    pub dd_pulse_duration: Option<u64>,
    pub dd_fallback: Option<Fallback>,
    pub quiet: bool,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(l) = &self.layout {
            cfg.layout = Some(l.clone());
        }
        if let Some(s) = self.shots {
            cfg.shots = s;
        }
        if let Some(d) = &self.dd {
            cfg.dd.sequence = parse_dd(d)?;
        }
        if let Some(p) = self.dd_pulse_duration {
            cfg.dd.pulse_duration = Some(p);
        }
        if let Some(f) = self.dd_fallback {
            cfg.dd.fallback = f;
        }
        cfg.quiet |= self.quiet;
        Ok(cfg)
    }
}

/// Loads the config file (or the defaults) and applies the overrides.
pub fn load_config(
    path: Option<&std::path::Path>,
    overrides: &Overrides,
) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(cfg)
}
