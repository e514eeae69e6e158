//! Simulated system under test: a single-core forwarder whose delivery
//! ratio follows a closed-form curve of the offered rate, and which runs
//! the real packet transform on the test template.
//!
//! Below capacity `C` the forwarder loses a small, growing fraction of
//! packets, `l0·(r/C)^p`; above it the forwarded rate stays flat at
//! `(1-l0)·C`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{traffic_requirement, BehaviorId, CatalogError, TrafficRequirement};
use crate::packet::{
    apply_behavior, check_requirement, verify_transform, ApplyError, BehaviorConfig, ForwardAction, PacketError,
    PacketTemplate,
};
use crate::rate::{RateError, TrialSample};

pub const DEFAULT_LOSS_AT_CAPACITY: f64 = 0.01;
pub const DEFAULT_CURVE_EXPONENT: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no capacity configured for behavior {0}")]
    UnknownBehavior(BehaviorId),
    #[error("invalid forwarder model: {0}")]
    InvalidModel(String),
    #[error("invalid trial: {0}")]
    InvalidTrial(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("requirement violation: {0}")]
    Requirement(#[from] PacketError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

fn default_l0() -> f64 {
    DEFAULT_LOSS_AT_CAPACITY
}

fn default_p() -> f64 {
    DEFAULT_CURVE_EXPONENT
}

/// Parameters of the simulated forwarder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwarderModel {
    /// Forwarding capacity per behavior, packets per second.
    pub capacities: BTreeMap<BehaviorId, f64>,
    #[serde(default = "default_l0")]
    pub loss_at_capacity: f64,
    #[serde(default = "default_p")]
    pub curve_exponent: f64,
    /// Relative standard deviation of the received packet count.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Per-behavior configuration; behaviors not listed use the default.
    #[serde(default)]
    pub behavior_configs: BTreeMap<BehaviorId, BehaviorConfig>,
}

impl ForwarderModel {
    pub fn new(capacities: impl IntoIterator<Item = (BehaviorId, f64)>) -> Self {
        Self {
            capacities: capacities.into_iter().collect(),
            loss_at_capacity: DEFAULT_LOSS_AT_CAPACITY,
            curve_exponent: DEFAULT_CURVE_EXPONENT,
            noise_sigma: 0.0,
            seed: 0,
            behavior_configs: BTreeMap::new(),
        }
    }

    /// Lossless below capacity.
    pub fn sharp(capacities: impl IntoIterator<Item = (BehaviorId, f64)>) -> Self {
        Self {
            loss_at_capacity: 0.0,
            ..Self::new(capacities)
        }
    }

    pub fn with_curve(mut self, loss_at_capacity: f64, curve_exponent: f64) -> Self {
        self.loss_at_capacity = loss_at_capacity;
        self.curve_exponent = curve_exponent;
        self
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidModel(m));
        if self.capacities.is_empty() {
            return bad("no behavior capacities configured".into());
        }
        for (b, c) in &self.capacities {
            if !(c.is_finite() && *c > 0.0) {
                return bad(format!("capacity of {b} must be positive, got {c}"));
            }
        }
        if !(0.0..1.0).contains(&self.loss_at_capacity) {
            return bad(format!(
                "loss_at_capacity must be in [0, 1), got {}",
                self.loss_at_capacity
            ));
        }
        if !(self.curve_exponent.is_finite() && self.curve_exponent >= 1.0) {
            return bad(format!("curve_exponent must be >= 1, got {}", self.curve_exponent));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }

    pub fn capacity(&self, behavior: BehaviorId) -> Result<f64, SimError> {
        self.capacities
            .get(&behavior)
            .copied()
            .ok_or(SimError::UnknownBehavior(behavior))
    }

    pub fn behavior_config(&self, behavior: BehaviorId) -> BehaviorConfig {
        self.behavior_configs.get(&behavior).cloned().unwrap_or_default()
    }

    /// Expected delivery ratio at offered rate `rate`.
    pub fn delivery_model(&self, behavior: BehaviorId, rate: f64) -> Result<f64, SimError> {
        let c = self.capacity(behavior)?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SimError::InvalidTrial(format!("rate must be positive, got {rate}")));
        }
        let l0 = self.loss_at_capacity;
        Ok(if rate <= c {
            1.0 - l0 * (rate / c).powf(self.curve_exponent)
        } else {
            (1.0 - l0) * c / rate
        })
    }

    /// Highest rate whose expected delivery ratio is at least `1 - x`.
    pub fn analytic_pdr(&self, behavior: BehaviorId, x: f64) -> Result<f64, SimError> {
        let c = self.capacity(behavior)?;
        if !(0.0..1.0).contains(&x) {
            return Err(SimError::InvalidTrial(format!(
                "loss threshold must be in [0, 1), got {x}"
            )));
        }
        let l0 = self.loss_at_capacity;
        Ok(if x <= l0 && l0 > 0.0 {
            c * (x / l0).powf(1.0 / self.curve_exponent)
        } else {
            (1.0 - l0) * c / (1.0 - x)
        })
    }
}

/// Result of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrialReport {
    pub sample: TrialSample,
    pub forwarded_template: PacketTemplate,
    pub action: ForwardAction,
    pub semantic_violations: usize,
}

/// A forwarder instance. Trials run one at a time and draw noise from a
/// generator seeded by the model, so the same sequence of calls on two
/// instances built from the same model gives the same reports.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: ForwarderModel,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(model: ForwarderModel) -> Result<Self, SimError> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self { model, rng })
    }

    pub fn model(&self) -> &ForwarderModel {
        &self.model
    }

    /// Runs a trial with the behavior's catalog traffic requirement.
    pub fn run_trial(
        &mut self,
        behavior: BehaviorId,
        template: &PacketTemplate,
        rate: f64,
        duration_s: f64,
    ) -> Result<SimTrialReport, SimError> {
        let req = traffic_requirement(behavior)?;
        self.run_trial_with(behavior, &req, template, rate, duration_s)
    }

    /// Runs a trial checking the template against `req` instead of the
    /// catalog requirement (used for packet overrides).
    pub fn run_trial_with(
        &mut self,
        behavior: BehaviorId,
        req: &TrafficRequirement,
        template: &PacketTemplate,
        rate: f64,
        duration_s: f64,
    ) -> Result<SimTrialReport, SimError> {
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(SimError::InvalidTrial(format!(
                "duration must be positive, got {duration_s}"
            )));
        }
        let dr = self.model.delivery_model(behavior, rate)?;
        check_requirement(req, template)?;
        let cfg = self.model.behavior_config(behavior);
        let (forwarded, action) = apply_behavior(behavior, template, &cfg)?;
        let semantic_violations = verify_transform(behavior, template, &forwarded, &action).len();

        let p_in = (rate * duration_s).round() as u64;
        let mut p_out = if action.is_drop() {
            0.0
        } else {
            (p_in as f64 * dr).round()
        };
        if self.model.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.model.noise_sigma).map_err(|e| SimError::InvalidModel(e.to_string()))?;
            p_out = (p_out * (1.0 + normal.sample(&mut self.rng))).round();
        }
        let p_out = p_out.clamp(0.0, p_in as f64) as u64;
        Ok(SimTrialReport {
            sample: TrialSample::new(p_in, p_out, duration_s)?,
            forwarded_template: forwarded,
            action,
            semantic_violations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{build_test_packet, AddressPlan};
    use crate::rate::delivery_ratio;
    use proptest::prelude::*;

    const END: BehaviorId = BehaviorId::End;

    fn end_packet() -> PacketTemplate {
        let req = traffic_requirement(END).unwrap();
        build_test_packet(&req, &AddressPlan::default().endpoint_path(END, 2)).unwrap()
    }

    #[test]
    fn curve_reference_points() {
        let m = ForwarderModel::new([(END, 5e6)]);
        assert!((m.delivery_model(END, 5e6).unwrap() - 0.99).abs() < 1e-12);
        assert!(m.delivery_model(END, 1.0).unwrap() > 1.0 - 1e-12);
        let sharp = ForwarderModel::sharp([(END, 5e6)]);
        assert_eq!(sharp.delivery_model(END, 4.9e6).unwrap(), 1.0);
        assert_eq!(sharp.delivery_model(END, 1e7).unwrap(), 0.5);
        assert!(matches!(
            m.delivery_model(BehaviorId::EndT, 1.0),
            Err(SimError::UnknownBehavior(_))
        ));
    }

    #[test]
    fn analytic_pdr_reference_points() {
        let sharp = ForwarderModel::sharp([(END, 5e6)]);
        assert!((sharp.analytic_pdr(END, 0.005).unwrap() - 5e6 / 0.995).abs() < 1e-6);
        let ramp = ForwarderModel::new([(END, 5e6)]);
        let pdr = ramp.analytic_pdr(END, 0.005).unwrap();
        assert!((pdr - 5e6 * 0.5f64.powf(0.25)).abs() < 1e-6);
        assert!((pdr - 4_204_482.0).abs() < 1.0);
        assert!((ramp.analytic_pdr(END, 0.01).unwrap() - 5e6).abs() < 1e-6);
    }

    #[test]
    fn trial_reference_points() {
        let mut sim = Simulator::new(ForwarderModel::sharp([(END, 5e6)])).unwrap();
        let p = end_packet();
        let r = sim.run_trial(END, &p, 1e6, 10.0).unwrap();
        assert_eq!((r.sample.tx_packets, r.sample.rx_packets), (10_000_000, 10_000_000));
        assert_eq!(r.semantic_violations, 0);
        assert_eq!(r.forwarded_template.srh().unwrap().segments_left, 0);

        let r = sim.run_trial(END, &p, 1e7, 10.0).unwrap();
        assert_eq!(r.sample.rx_packets, 50_000_000);
        assert_eq!(delivery_ratio(&r.sample).unwrap(), 0.5);
    }

    #[test]
    fn trial_rejects_wrong_traffic() {
        let mut sim = Simulator::new(ForwarderModel::new([(BehaviorId::EndDT4, 1e6)])).unwrap();
        assert!(matches!(
            sim.run_trial(BehaviorId::EndDT4, &end_packet(), 1e5, 1.0),
            Err(SimError::Requirement(_))
        ));
        assert!(sim.run_trial(BehaviorId::EndDT4, &end_packet(), 1e5, 0.0).is_err());
    }

    #[test]
    fn noisy_trials_are_reproducible() {
        let model = ForwarderModel::new([(END, 5e6)]).with_noise(0.01, 42);
        let run = |m: &ForwarderModel| {
            let mut sim = Simulator::new(m.clone()).unwrap();
            (0..5)
                .map(|_| serde_json::to_string(&sim.run_trial(END, &end_packet(), 1e7, 10.0).unwrap()).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(&model);
        assert_eq!(a, run(&model));
        assert_ne!(a[0], a[1], "successive trials draw fresh noise");
    }

    #[test]
    fn invalid_models() {
        assert!(Simulator::new(ForwarderModel::new([(END, 0.0)])).is_err());
        assert!(Simulator::new(ForwarderModel::new([(END, 1.0)]).with_curve(1.0, 4.0)).is_err());
        assert!(Simulator::new(ForwarderModel::new([(END, 1.0)]).with_curve(0.01, 0.5)).is_err());
        assert!(Simulator::new(ForwarderModel::new([(END, 1.0)]).with_noise(-1.0, 0)).is_err());
        assert!(Simulator::new(ForwarderModel::new([])).is_err());
    }

    fn model_strategy() -> impl Strategy<Value = ForwarderModel> {
        (
            1e5..2e7f64,
            prop_oneof![Just(0.0), Just(0.002), Just(0.01), Just(0.05)],
            prop_oneof![Just(1.0), Just(2.0), Just(4.0)],
        )
            .prop_map(|(c, l0, p)| ForwarderModel::new([(END, c)]).with_curve(l0, p))
    }

    proptest! {
        #[test]
        fn curve_is_non_increasing(m in model_strategy(), a in 1e3..3e7f64, b in 1e3..3e7f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.delivery_model(END, lo).unwrap() >= m.delivery_model(END, hi).unwrap());
        }

        #[test]
        fn curve_is_continuous_at_capacity(m in model_strategy()) {
            let c = m.capacity(END).unwrap();
            let below = m.delivery_model(END, c).unwrap();
            let above = m.delivery_model(END, c * (1.0 + 1e-12)).unwrap();
            prop_assert!((below - above).abs() < 1e-9);
        }

        #[test]
        fn analytic_pdr_sits_on_threshold(m in model_strategy(), x in 0.0005..0.2f64) {
            let pdr = m.analytic_pdr(END, x).unwrap();
            let dr = m.delivery_model(END, pdr).unwrap();
            prop_assert!((dr - (1.0 - x)).abs() < 1e-9, "DR {} at PDR", dr);
        }

        #[test]
        fn noiseless_trial_matches_curve(m in model_strategy(), rate in 1e4..2e7f64, d in 0.5..20.0f64) {
            let mut sim = Simulator::new(m.clone()).unwrap();
            let r = sim.run_trial(END, &end_packet(), rate, d).unwrap();
            let want = m.delivery_model(END, rate).unwrap();
            let got = delivery_ratio(&r.sample).unwrap();
            prop_assert!((got - want).abs() <= 1.0 / r.sample.tx_packets as f64);
        }
    }
}
