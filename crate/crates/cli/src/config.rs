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

//! Experiment configuration files.
//!
//! ```toml
//! schema = "ssbv-experiment/1"
//! n_min = 3
//! n_max = 12
//! oracles = "representative"     # or "all"
//! profile = "montreal"           # built-in name or path to a .profile file
//! layout = "heavy-hex-27"        # optional; "chain", "chain:<n>", "complete:<n>"
//! shots = 32000
//! seed = 7
//! collection = "reduce-from-max" # or "per-size"
//! classical_a_us = 1.0
//! out = "runs/montreal"
//!
//! [dd]
//! sequence = "ur14"              # "none", "ur<n>" or "ur:<n>"
//! fallback = "ladder"            # or "idle"
//!
//! [noise]                        # overrides of the profile's values
//! detuning_sigma = 2.0e5
//!
//! [analysis]
//! bootstrap_b = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssbv_core::analysis::AnalysisConfig;
use ssbv_core::bv::{all_oracles, representative_oracles, DEFAULT_ENUMERATION_CAP};
use ssbv_core::dd::{ur_phases, DdPolicy, Fallback};
use ssbv_core::noise::{named_layout, Channels};
use ssbv_core::{CouplingGraph, Error, OracleSpec, Profile, Result};

pub const CONFIG_SCHEMA: &str = "ssbv-experiment/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// `1^k 0^(n-k)` for `k = 0..=n`.
    #[default]
    Representative,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collection {
    /// Simulate BV-`n_max` once and trace out qubits for smaller sizes.
    #[default]
    ReduceFromMax,
    PerSize,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdSettings {
    /// UR sequence length; `None` disables DD.
    #[serde(with = "dd_name")]
    pub sequence: Option<usize>,
    /// Pulse length in dt; the profile's value when absent.
    pub pulse_duration: Option<u64>,
    pub fallback: Fallback,
}

/// Partial overrides of the profile's noise parameters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseOverrides {
    pub detuning_sigma: Option<f64>,
    pub zz_rate: Option<f64>,
    pub flip_angle_eps: Option<f64>,
    pub channels: Option<Channels>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub n_min: usize,
    pub n_max: usize,
    pub oracles: OracleMode,
    pub profile: String,
    pub layout: Option<String>,
    pub shots: u64,
    pub seed: u64,
    pub collection: Collection,
    /// Classical cost per oracle query, microseconds.
    pub classical_a_us: f64,
    pub out: PathBuf,
    pub dd: DdSettings,
    pub noise: NoiseOverrides,
    pub analysis: AnalysisConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Suppress per-oracle progress on stderr.
    #[serde(skip)]
    pub quiet: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            n_min: 3,
            n_max: 10,
            oracles: OracleMode::Representative,
            profile: "montreal".into(),
            layout: None,
            shots: 32_000,
            seed: 1,
            collection: Collection::ReduceFromMax,
            classical_a_us: 1.0,
            out: PathBuf::from("ssbv-out"),
            dd: DdSettings::default(),
            noise: NoiseOverrides::default(),
            analysis: AnalysisConfig::default(),
            base_dir: PathBuf::from("."),
            quiet: false,
        }
    }
}

/// Parses `none`, `ur<n>` or `ur:<n>`.
pub fn parse_dd(name: &str) -> Result<Option<usize>> {
    let lower = name.trim().to_ascii_lowercase();
    if lower == "none" {
        return Ok(None);
    }
    let digits = lower
        .strip_prefix("ur:")
        .or_else(|| lower.strip_prefix("ur"))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown DD sequence {name:?}")))?;
    let n: usize = digits
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("unknown DD sequence {name:?}")))?;
    ur_phases(n)?;
    Ok(Some(n))
}

mod dd_name {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_str(&format!("ur{n}")),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_dd(&s).map_err(serde::de::Error::custom)
    }
}

/// A config with its profile loaded and overrides applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub profile: Profile,
    pub layout_name: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "config schema {:?} is not supported (expected {CONFIG_SCHEMA:?})",
                cfg.schema
            )));
        }
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_profile(&self) -> Result<Profile> {
        match Profile::builtin(&self.profile) {
            Ok(p) => Ok(p),
            Err(_) if self.profile.contains('/') || self.profile.ends_with(".profile") => {
                let path = self.resolve_path(&self.profile);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::InvalidArgument(format!("cannot read profile {}: {e}", path.display()))
                })?;
                Profile::from_toml(&text)
            }
            Err(e) => Err(e),
        }
    }

    fn graph(&self, name: &str) -> Result<CouplingGraph> {
        if name == "chain" {
            return Ok(CouplingGraph::chain(self.n_max + 1));
        }
        named_layout(name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_min == 0 || self.n_min > self.n_max {
            return bad(format!(
                "need 1 <= n_min <= n_max, got [{}, {}]",
                self.n_min, self.n_max
            ));
        }
        if self.n_max >= ssbv_core::circuit::MAX_BITS {
            return bad(format!(
                "n_max = {} exceeds the bitstring width",
                self.n_max
            ));
        }
        if self.shots == 0 {
            return bad("shots must be positive".into());
        }
        if self.oracles == OracleMode::All && self.n_max > DEFAULT_ENUMERATION_CAP {
            return bad(format!(
                "oracles = \"all\" is limited to n <= {DEFAULT_ENUMERATION_CAP}"
            ));
        }
        if self.oracles == OracleMode::All && self.collection == Collection::ReduceFromMax {
            return bad(
                "reduce-from-max needs representative oracles; use collection = \"per-size\""
                    .into(),
            );
        }
        if !(self.classical_a_us > 0.0) {
            return bad("classical_a_us must be positive".into());
        }
        self.analysis.validate()
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let mut profile = self.load_profile()?;
        let layout_name = match &self.layout {
            Some(name) => {
                profile.device = profile.device.with_graph(self.graph(name)?);
                name.clone()
            }
            None => format!("profile:{}", profile.device.name),
        };
        let o = &self.noise;
        let noise = &mut profile.noise;
        if let Some(v) = o.detuning_sigma {
            noise.detuning_sigma = v;
        }
        if let Some(v) = o.zz_rate {
            noise.zz_rate = v;
        }
        if let Some(v) = o.flip_angle_eps {
            noise.flip_angle_eps = v;
        }
        if let Some(c) = o.channels {
            noise.channels = c;
        }
        noise.validate()?;
        Ok(Resolved {
            config: self.clone(),
            profile,
            layout_name,
        })
    }

    /// Oracles simulated or analysed at size `n`.
    pub fn oracles_at(&self, n: usize) -> Result<Vec<OracleSpec>> {
        match self.oracles {
            OracleMode::Representative => representative_oracles(n),
            OracleMode::All => all_oracles(n, DEFAULT_ENUMERATION_CAP),
        }
    }
}

impl Resolved {
    pub fn dd_policy(&self) -> Result<Option<DdPolicy>> {
        let Some(n) = self.config.dd.sequence else {
            return Ok(None);
        };
        Ok(Some(DdPolicy {
            sequence: ur_phases(n)?,
            pulse_duration: self
                .config
                .dd
                .pulse_duration
                .unwrap_or(self.profile.device.durations.dd_pulse),
            fallback: self.config.dd.fallback,
            include_edges: false,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            schema = "ssbv-experiment/1"
            n_min = 2
            n_max = 6
            profile = "noiseless"
            layout = "chain"
            seed = 9
            [dd]
            sequence = "ur:14"
            fallback = "idle"
            [noise]
            zz_rate = 1.0e5
            [analysis]
            bootstrap_b = 50
        "#;
        let cfg = ExperimentConfig::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(cfg.dd.sequence, Some(14));
        assert_eq!(cfg.dd.fallback, Fallback::Idle);
        assert_eq!(cfg.analysis.bootstrap_b, 50);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.profile.device.graph.num_physical(), 7);
        assert_eq!(r.profile.noise.zz_rate, 1.0e5);
        assert_eq!(r.dd_policy().unwrap().unwrap().sequence.len(), 14);
    }

    #[test]
    fn rejects_wrong_schema_and_unknown_keys() {
        assert!(ExperimentConfig::from_toml("schema = \"other/2\"", Path::new(".")).is_err());
        let text = "schema = \"ssbv-experiment/1\"\nshotz = 3\n";
        assert!(ExperimentConfig::from_toml(text, Path::new(".")).is_err());
    }

    #[test]
    fn dd_names() {
        assert_eq!(parse_dd("none").unwrap(), None);
        assert_eq!(parse_dd("UR4").unwrap(), Some(4));
        assert_eq!(parse_dd("ur:18").unwrap(), Some(18));
        assert!(parse_dd("ur5").is_err());
        assert!(parse_dd("xy4").is_err());
    }

    #[test]
    fn all_oracles_cannot_be_reduced() {
        let cfg = ExperimentConfig {
            oracles: OracleMode::All,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = ExperimentConfig {
            dd: DdSettings {
                sequence: Some(14),
                ..DdSettings::default()
            },
            ..ExperimentConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(back, cfg);
    }
}
