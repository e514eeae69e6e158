//! Trial-running contract between the search algorithms and a traffic
//! generator / SUT pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{BehaviorId, TrafficRequirement};
use crate::packet::PacketTemplate;
use crate::rate::{line_packet_rate, LinkSpec, RateError, TrialSample};
use crate::sim::{SimError, Simulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("driver not available: {0}")]
    NotAvailable(String),
    #[error("trial failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Runs fixed-rate, fixed-duration trials. Calls block until the trial is
/// over.
pub trait TrafficDriver {
    /// Highest rate the generator can offer for the current template.
    fn line_packet_rate(&self) -> f64;

    fn run_trial(&mut self, rate: f64, duration_s: f64) -> Result<TrialSample, DriverError>;

    /// Forwarded packets that did not match the behavior's semantics, over
    /// all trials so far. Drivers that cannot inspect packets report 0.
    fn semantic_violations(&self) -> usize {
        0
    }
}

impl<T: TrafficDriver + ?Sized> TrafficDriver for &mut T {
    fn line_packet_rate(&self) -> f64 {
        (**self).line_packet_rate()
    }

    fn run_trial(&mut self, rate: f64, duration_s: f64) -> Result<TrialSample, DriverError> {
        (**self).run_trial(rate, duration_s)
    }

    fn semantic_violations(&self) -> usize {
        (**self).semantic_violations()
    }
}

/// Drives the simulated forwarder with one behavior's test packet. Offered
/// rates above the line packet rate are clamped to it, as a real generator
/// cannot exceed the link.
#[derive(Debug, Clone)]
pub struct SimDriver {
    sim: Simulator,
    behavior: BehaviorId,
    requirement: TrafficRequirement,
    template: PacketTemplate,
    lpr: f64,
    trials: usize,
    semantic_violations: usize,
}

impl SimDriver {
    pub fn new(
        sim: Simulator,
        behavior: BehaviorId,
        requirement: TrafficRequirement,
        template: PacketTemplate,
        link: &LinkSpec,
    ) -> Result<Self, DriverError> {
        let lpr = line_packet_rate(link, template.frame_size())?;
        Ok(Self {
            sim,
            behavior,
            requirement,
            template,
            lpr,
            trials: 0,
            semantic_violations: 0,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }
}

impl TrafficDriver for SimDriver {
    fn line_packet_rate(&self) -> f64 {
        self.lpr
    }

    fn run_trial(&mut self, rate: f64, duration_s: f64) -> Result<TrialSample, DriverError> {
        let rate = rate.min(self.lpr);
        let report = self
            .sim
            .run_trial_with(self.behavior, &self.requirement, &self.template, rate, duration_s)?;
        self.trials += 1;
        self.semantic_violations += report.semantic_violations;
        Ok(report.sample)
    }

    fn semantic_violations(&self) -> usize {
        self.semantic_violations
    }
}

/// Connection parameters of a TRex stateless server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrexEndpoint {
    pub host: String,
    #[serde(default = "default_trex_port")]
    pub port: u16,
    #[serde(default)]
    pub tx_port: u8,
    #[serde(default = "one")]
    pub rx_port: u8,
}

fn default_trex_port() -> u16 {
    4501
}

fn one() -> u8 {
    1
}

/// Placeholder for a hardware generator. Reports its line rate but every
/// trial fails with [`DriverError::NotAvailable`].
#[derive(Debug, Clone)]
pub struct TrexDriver {
    endpoint: TrexEndpoint,
    lpr: f64,
}

impl TrexDriver {
    pub fn new(endpoint: TrexEndpoint, template: &PacketTemplate, link: &LinkSpec) -> Result<Self, DriverError> {
        Ok(Self {
            lpr: line_packet_rate(link, template.frame_size())?,
            endpoint,
        })
    }
}

impl TrafficDriver for TrexDriver {
    fn line_packet_rate(&self) -> f64 {
        self.lpr
    }

    fn run_trial(&mut self, _rate: f64, _duration_s: f64) -> Result<TrialSample, DriverError> {
        Err(DriverError::NotAvailable(format!(
            "TRex control at {}:{} is not implemented; use a sim testbed",
            self.endpoint.host, self.endpoint.port
        )))
    }
}
