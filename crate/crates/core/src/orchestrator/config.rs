//! Experiment and testbed configuration documents (YAML).

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{BehaviorId, InnerKind};
use crate::driver::TrexEndpoint;
use crate::finder::{Algorithm, SearchConfig, TrialPolicy};
use crate::rate::LinkSpec;
use crate::sim::ForwarderModel;

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Configuration error, located by the path of the offending key
/// (`search.min_percent`, `behaviors[2]`, ...). The path is `.` for the
/// document root.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn parse_yaml<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = serde_yaml::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let mut message = e.into_inner().to_string();
        // serde_yaml appends the location; keep it, it helps with long files
        if message.is_empty() {
            message = "invalid document".into();
        }
        ConfigError::new(path, message)
    })
}

fn check_version(v: u32) -> Result<(), ConfigError> {
    if v != SCHEMA_VERSION {
        return Err(ConfigError::new(
            "version",
            format!("unsupported schema version {v}, this build reads version {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentType {
    #[default]
    Pdr,
    /// PDR with a zero loss threshold.
    Ndr,
}

/// Changes to the default test packets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketOverrides {
    /// Inner packet size in bytes (whole inner frame for Ethernet).
    #[serde(default)]
    pub inner_size: Option<usize>,
    /// Inner packet kind for H.Encaps (`ipv6` or `ipv4`); ignored by
    /// behaviors whose traffic kind is fixed.
    #[serde(default)]
    pub inner_kind: Option<InnerKind>,
    /// SIDs carried by endpoint test packets.
    #[serde(default)]
    pub sid_count: Option<usize>,
    /// Segments in headend policies.
    #[serde(default = "one")]
    pub policy_sids: usize,
}

fn one() -> usize {
    1
}

impl Default for PacketOverrides {
    fn default() -> Self {
        Self {
            inner_size: None,
            inner_kind: None,
            sid_count: None,
            policy_sids: 1,
        }
    }
}

fn default_runs() -> usize {
    10
}

/// What to measure and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub behaviors: Vec<BehaviorId>,
    #[serde(default)]
    pub experiment_type: ExperimentType,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Searches per behavior; their midpoints give mean, CV and CI95.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub packet: PacketOverrides,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub policy: TrialPolicy,
}

impl ExperimentConfig {
    pub fn new(behaviors: Vec<BehaviorId>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            behaviors,
            experiment_type: ExperimentType::Pdr,
            algorithm: Algorithm::Binary,
            runs: default_runs(),
            packet: PacketOverrides::default(),
            search: SearchConfig::default(),
            policy: TrialPolicy::default(),
        }
    }

    /// Checks invariants and applies the experiment type. NDR experiments
    /// always search with a zero loss threshold.
    pub fn validate(mut self) -> Result<Self, ConfigError> {
        check_version(self.version)?;
        if self.behaviors.is_empty() {
            return Err(ConfigError::new("behaviors", "at least one behavior is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, b) in self.behaviors.iter().enumerate() {
            if !seen.insert(*b) {
                return Err(ConfigError::new(
                    format!("behaviors[{i}]"),
                    format!("duplicate behavior {b}"),
                ));
            }
        }
        if self.runs == 0 {
            return Err(ConfigError::new("runs", "must be at least 1"));
        }
        if self.packet.policy_sids == 0 {
            return Err(ConfigError::new("packet.policy_sids", "must be at least 1"));
        }
        if self.packet.sid_count == Some(0) {
            return Err(ConfigError::new("packet.sid_count", "must be at least 1"));
        }
        if self.experiment_type == ExperimentType::Ndr {
            self.search.loss_threshold = 0.0;
        }
        self.search
            .validate()
            .map_err(|e| ConfigError::new("search", e.to_string()))?;
        self.policy
            .validate()
            .map_err(|e| ConfigError::new("policy", e.to_string()))?;
        Ok(self)
    }
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_yaml::<ExperimentConfig>(text)?.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwarderKind {
    Linux,
    Vpp,
    Sim,
}

impl ForwarderKind {
    pub const ALL: [ForwarderKind; 3] = [ForwarderKind::Linux, ForwarderKind::Vpp, ForwarderKind::Sim];

    pub fn as_str(self) -> &'static str {
        match self {
            ForwarderKind::Linux => "linux",
            ForwarderKind::Vpp => "vpp",
            ForwarderKind::Sim => "sim",
        }
    }
}

impl fmt::Display for ForwarderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn ssh_port() -> u16 {
    22
}

/// How to reach the SUT's shell. Credentials are referenced (an identity
/// file path), never inlined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Connection {
    pub host: String,
    #[serde(default = "ssh_port")]
    pub port: u16,
    pub user: String,
    #[serde(default)]
    pub identity_file: Option<PathBuf>,
    /// Extra `-o` options passed to ssh.
    #[serde(default)]
    pub ssh_options: Vec<String>,
    /// Prefix for forwarder commands, e.g. `vppctl` or `sudo`.
    #[serde(default)]
    pub command_prefix: Option<String>,
}

fn eth1() -> String {
    "eth1".into()
}

fn eth2() -> String {
    "eth2".into()
}

/// SUT interface names substituted into recipes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interfaces {
    /// Port receiving traffic from the generator.
    #[serde(default = "eth1")]
    pub sut_in: String,
    /// Port sending traffic back to the generator.
    #[serde(default = "eth2")]
    pub sut_out: String,
}

impl Default for Interfaces {
    fn default() -> Self {
        Self {
            sut_in: eth1(),
            sut_out: eth2(),
        }
    }
}

/// The forwarder under test and how to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub forwarder_kind: ForwarderKind,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub interfaces: Interfaces,
    /// Required for `linux` and `vpp`.
    #[serde(default)]
    pub connection: Option<Connection>,
    /// Hardware traffic generator.
    #[serde(default)]
    pub generator: Option<TrexEndpoint>,
    /// Required for `sim`.
    #[serde(default)]
    pub sim: Option<ForwarderModel>,
    /// Directory with `<forwarder_kind>.yaml` replacing the built-in
    /// recipes.
    #[serde(default)]
    pub recipes_dir: Option<PathBuf>,
}

impl TestbedConfig {
    pub fn sim(model: ForwarderModel) -> Self {
        Self {
            version: SCHEMA_VERSION,
            forwarder_kind: ForwarderKind::Sim,
            link: LinkSpec::ten_gig(),
            interfaces: Interfaces::default(),
            connection: None,
            generator: None,
            sim: Some(model),
            recipes_dir: None,
        }
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        check_version(self.version)?;
        self.link
            .validate()
            .map_err(|e| ConfigError::new("link", e.to_string()))?;
        match self.forwarder_kind {
            ForwarderKind::Sim => {
                let model = self
                    .sim
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("sim", "forwarder_kind sim requires model parameters"))?;
                model.validate().map_err(|e| ConfigError::new("sim", e.to_string()))?;
            }
            kind => {
                if self.connection.is_none() {
                    return Err(ConfigError::new(
                        "connection",
                        format!("forwarder_kind {kind} requires a connection descriptor"),
                    ));
                }
            }
        }
        Ok(self)
    }
}

pub fn parse_testbed_config(text: &str) -> Result<TestbedConfig, ConfigError> {
    parse_yaml::<TestbedConfig>(text)?.validate()
}
