//! Partial Drop Rate search.
//!
//! [`find_pdr`] bisects `[min, max]` (percent of the line packet rate)
//! until the window is no wider than the accuracy. [`find_pdr_legacy`]
//! first doubles the rate from `min` to bracket the PDR, then bisects.
//! Points near the loss threshold are re-measured according to a
//! [`TrialPolicy`].

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{DriverError, TrafficDriver};
use crate::rate::{delivery_ratio, summarize, RateError, SummaryStats};

/// Slack on the exit test so that windows that are an exact power-of-two
/// fraction of the search range do not take an extra step to float
/// rounding.
const WIDTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinderError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("experiment aborted after {} evaluations: {source}", trace.steps.len())]
    Aborted { source: DriverError, trace: FinderTrace },
    #[error("unstable measurement at {rate:.0} pps: rx rate CV {cv_percent:.3}% after {batches} batches")]
    Unstable {
        rate: f64,
        cv_percent: f64,
        batches: u32,
        trace: FinderTrace,
    },
    #[error(transparent)]
    Rate(#[from] RateError),
}

fn d_min() -> f64 {
    1.0
}
fn d_max() -> f64 {
    100.0
}
fn d_acc() -> f64 {
    1.0
}
fn d_x() -> f64 {
    0.005
}
fn d_duration() -> f64 {
    10.0
}

/// Search bounds in percent of the line packet rate, loss threshold and
/// trial duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "d_min")]
    pub min_percent: f64,
    #[serde(default = "d_max")]
    pub max_percent: f64,
    #[serde(default = "d_acc")]
    pub accuracy_percent: f64,
    #[serde(default = "d_x")]
    pub loss_threshold: f64,
    #[serde(default = "d_duration")]
    pub trial_duration_s: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            min_percent: d_min(),
            max_percent: d_max(),
            accuracy_percent: d_acc(),
            loss_threshold: d_x(),
            trial_duration_s: d_duration(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), FinderError> {
        let bad = |m: String| Err(FinderError::InvalidConfig(m));
        if !(self.min_percent > 0.0 && self.min_percent < self.max_percent && self.max_percent <= 100.0) {
            return bad(format!(
                "need 0 < min_percent < max_percent <= 100, got min {} max {}",
                self.min_percent, self.max_percent
            ));
        }
        if !(self.accuracy_percent > 0.0 && self.accuracy_percent.is_finite()) {
            return bad(format!(
                "accuracy_percent must be positive, got {}",
                self.accuracy_percent
            ));
        }
        if !(0.0..1.0).contains(&self.loss_threshold) {
            return bad(format!("loss_threshold must be in [0, 1), got {}", self.loss_threshold));
        }
        if !(self.trial_duration_s > 0.0 && self.trial_duration_s.is_finite()) {
            return bad(format!(
                "trial_duration_s must be positive, got {}",
                self.trial_duration_s
            ));
        }
        Ok(())
    }

    /// Smallest delivery ratio that passes.
    pub fn pass_ratio(&self) -> f64 {
        1.0 - self.loss_threshold
    }
}

fn d_band() -> f64 {
    0.0025
}
fn d_reps() -> u32 {
    5
}
fn d_cv() -> f64 {
    1.0
}
fn d_retry() -> u32 {
    3
}

/// When and how a point close to the threshold is re-measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialPolicy {
    /// Distance from `1 - x` within which a measured DR is re-checked.
    #[serde(default = "d_band")]
    pub near_band: f64,
    /// Trials per batch, the first measurement included.
    #[serde(default = "d_reps")]
    pub repetitions: u32,
    /// Largest accepted CV of the batch's rx rates, percent.
    #[serde(default = "d_cv")]
    pub max_rx_cv_percent: f64,
    #[serde(default = "d_retry")]
    pub retry_cap: u32,
}

impl Default for TrialPolicy {
    fn default() -> Self {
        Self {
            near_band: d_band(),
            repetitions: d_reps(),
            max_rx_cv_percent: d_cv(),
            retry_cap: d_retry(),
        }
    }
}

impl TrialPolicy {
    pub fn validate(&self) -> Result<(), FinderError> {
        if self.near_band.is_nan()
            || self.near_band <= 0.0
            || self.repetitions < 2
            || self.retry_cap < 1
            || self.max_rx_cv_percent.is_nan()
            || self.max_rx_cv_percent < 0.0
        {
            return Err(FinderError::InvalidConfig(format!(
                "need near_band > 0, repetitions >= 2, retry_cap >= 1, max_rx_cv_percent >= 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Binary,
    Legacy,
}

/// Interval of offered rates, packets per second, known to contain the
/// PDR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub low: f64,
    pub high: f64,
}

impl RateInterval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn midpoint(&self) -> f64 {
        (self.low + self.high) / 2.0
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.low <= rate && rate <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResultFlag {
    /// The upper bound was never lowered: the SUT forwards everything the
    /// generator can offer, so its PDR is not measurable on this link.
    LineRateLimited,
    /// The lower bound was never raised: the PDR may lie under the
    /// search floor.
    BelowSearchFloor,
}

impl ResultFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultFlag::LineRateLimited => "line-rate-limited",
            ResultFlag::BelowSearchFloor => "below-search-floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    RaiseLow,
    LowerHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Exponential,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub tx_rate: f64,
    pub delivery_ratio: f64,
    /// Mean received rate over the trials at this point, packets/second.
    pub rx_rate: f64,
    pub decision: Decision,
    pub repetitions: u32,
    pub phase: Phase,
}

/// Every evaluation a search made, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinderTrace {
    pub steps: Vec<TraceStep>,
}

impl FinderTrace {
    pub fn distinct_points(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.tx_rate.to_bits())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn trials(&self) -> u32 {
        self.steps.iter().map(|s| s.repetitions).sum()
    }

    /// One JSON object per line, one line per evaluation.
    pub fn to_json_lines(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("trace steps serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinderOutcome {
    pub interval: RateInterval,
    pub flags: Vec<ResultFlag>,
    pub trace: FinderTrace,
}

/// Measured delivery ratio at one offered rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMeasurement {
    pub delivery_ratio: f64,
    pub rx_rate: f64,
    pub trials: u32,
}

#[derive(Debug)]
enum PointError {
    Driver(DriverError),
    Unstable { cv_percent: f64, batches: u32 },
    Rate(RateError),
}

impl From<DriverError> for PointError {
    fn from(e: DriverError) -> Self {
        PointError::Driver(e)
    }
}

impl From<RateError> for PointError {
    fn from(e: RateError) -> Self {
        PointError::Rate(e)
    }
}

impl PointError {
    fn into_finder(self, rate: f64, trace: &FinderTrace) -> FinderError {
        match self {
            PointError::Driver(source) => FinderError::Aborted {
                source,
                trace: trace.clone(),
            },
            PointError::Unstable { cv_percent, batches } => FinderError::Unstable {
                rate,
                cv_percent,
                batches,
                trace: trace.clone(),
            },
            PointError::Rate(e) => FinderError::Rate(e),
        }
    }
}

fn measure_point(
    driver: &mut dyn TrafficDriver,
    rate: f64,
    duration_s: f64,
    x: f64,
    policy: &TrialPolicy,
) -> Result<PointMeasurement, PointError> {
    let first = driver.run_trial(rate, duration_s)?;
    let dr = delivery_ratio(&first)?;
    if dr == 1.0 || (dr - (1.0 - x)).abs() > policy.near_band {
        return Ok(PointMeasurement {
            delivery_ratio: dr,
            rx_rate: first.throughput(),
            trials: 1,
        });
    }
    let k = policy.repetitions as usize;
    let mut trials = 1u32;
    let mut batch = vec![first];
    let mut cv_percent = 0.0;
    for _ in 0..policy.retry_cap {
        while batch.len() < k {
            batch.push(driver.run_trial(rate, duration_s)?);
            trials += 1;
        }
        let rx: Vec<f64> = batch.iter().map(|s| s.throughput()).collect();
        let stats = summarize(&rx)?;
        cv_percent = stats.cv_percent;
        if cv_percent <= policy.max_rx_cv_percent {
            let ratios = batch.iter().map(delivery_ratio).collect::<Result<Vec<_>, _>>()?;
            return Ok(PointMeasurement {
                delivery_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
                rx_rate: stats.mean,
                trials,
            });
        }
        batch.clear();
    }
    Err(PointError::Unstable {
        cv_percent,
        batches: policy.retry_cap,
    })
}

/// Measures the delivery ratio at `rate`. A single trial is enough unless
/// its DR falls within `near_band` of `1 - x` (and is not 1); then a batch
/// of `repetitions` trials is run and its mean DR is accepted if the rx
/// rates agree within `max_rx_cv_percent`. Batches are retried up to
/// `retry_cap` times.
pub fn evaluate_point(
    driver: &mut dyn TrafficDriver,
    rate: f64,
    duration_s: f64,
    x: f64,
    policy: &TrialPolicy,
) -> Result<PointMeasurement, FinderError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(FinderError::InvalidConfig(format!("rate must be positive, got {rate}")));
    }
    measure_point(driver, rate, duration_s, x, policy).map_err(|e| e.into_finder(rate, &FinderTrace::default()))
}

struct Search<'a> {
    driver: &'a mut dyn TrafficDriver,
    cfg: SearchConfig,
    policy: TrialPolicy,
    trace: FinderTrace,
}

impl Search<'_> {
    /// Evaluates `rate`; returns true when it passes.
    fn step(&mut self, rate: f64, phase: Phase) -> Result<bool, FinderError> {
        let m = measure_point(
            self.driver,
            rate,
            self.cfg.trial_duration_s,
            self.cfg.loss_threshold,
            &self.policy,
        )
        .map_err(|e| e.into_finder(rate, &self.trace))?;
        let pass = m.delivery_ratio >= self.cfg.pass_ratio();
        log::debug!(
            "{phase:?} step at {rate:.1} pps: DR {:.6} ({} trials)",
            m.delivery_ratio,
            m.trials
        );
        self.trace.steps.push(TraceStep {
            tx_rate: rate,
            delivery_ratio: m.delivery_ratio,
            rx_rate: m.rx_rate,
            decision: if pass { Decision::RaiseLow } else { Decision::LowerHigh },
            repetitions: m.trials,
            phase,
        });
        Ok(pass)
    }

    fn bisect(&mut self, mut low: f64, mut high: f64, eps: f64) -> Result<(f64, f64), FinderError> {
        while high - low > eps * (1.0 + WIDTH_TOLERANCE) {
            let rate = (low + high) / 2.0;
            if self.step(rate, Phase::Binary)? {
                low = rate;
            } else {
                high = rate;
            }
        }
        Ok((low, high))
    }
}

struct Bounds {
    floor: f64,
    top: f64,
    eps: f64,
}

fn setup(driver: &dyn TrafficDriver, cfg: &SearchConfig, policy: &TrialPolicy) -> Result<Bounds, FinderError> {
    cfg.validate()?;
    policy.validate()?;
    let lpr = driver.line_packet_rate();
    if !(lpr > 0.0 && lpr.is_finite()) {
        return Err(FinderError::InvalidConfig(format!(
            "driver reports line packet rate {lpr}"
        )));
    }
    Ok(Bounds {
        floor: lpr * cfg.min_percent / 100.0,
        top: lpr * cfg.max_percent / 100.0,
        eps: lpr * cfg.accuracy_percent / 100.0,
    })
}

fn outcome(low: f64, high: f64, b: &Bounds, trace: FinderTrace) -> FinderOutcome {
    let mut flags = Vec::new();
    if high == b.top {
        flags.push(ResultFlag::LineRateLimited);
    }
    if low == b.floor {
        flags.push(ResultFlag::BelowSearchFloor);
    }
    FinderOutcome {
        interval: RateInterval { low, high },
        flags,
        trace,
    }
}

/// Bisection over `[min, max]` until the window is at most `accuracy`
/// wide. A DR of exactly `1 - x` passes.
pub fn find_pdr(
    driver: &mut dyn TrafficDriver,
    cfg: &SearchConfig,
    policy: &TrialPolicy,
) -> Result<FinderOutcome, FinderError> {
    let b = setup(driver, cfg, policy)?;
    let mut s = Search {
        driver,
        cfg: *cfg,
        policy: *policy,
        trace: FinderTrace::default(),
    };
    let (low, high) = s.bisect(b.floor, b.top, b.eps)?;
    Ok(outcome(low, high, &b, s.trace))
}

/// Exponential bracketing then bisection. Rates `min·2^k` below `max` are
/// tried in turn; the first failure (or `max` if none fails) closes the
/// window opened by the last pass. If `min` itself fails, returns the
/// degenerate interval `[min, min]` flagged below-search-floor.
pub fn find_pdr_legacy(
    driver: &mut dyn TrafficDriver,
    cfg: &SearchConfig,
    policy: &TrialPolicy,
) -> Result<FinderOutcome, FinderError> {
    let b = setup(driver, cfg, policy)?;
    let mut s = Search {
        driver,
        cfg: *cfg,
        policy: *policy,
        trace: FinderTrace::default(),
    };
    let mut rate = b.floor;
    let mut last_pass = None;
    let mut first_fail = None;
    while rate < b.top {
        if s.step(rate, Phase::Exponential)? {
            last_pass = Some(rate);
            rate *= 2.0;
        } else {
            first_fail = Some(rate);
            break;
        }
    }
    let Some(low) = last_pass else {
        return Ok(FinderOutcome {
            interval: RateInterval {
                low: b.floor,
                high: b.floor,
            },
            flags: vec![ResultFlag::BelowSearchFloor],
            trace: s.trace,
        });
    };
    let (low, high) = s.bisect(low, first_fail.unwrap_or(b.top), b.eps)?;
    let mut out = outcome(low, high, &b, s.trace);
    // `min` passed, so the floor is confirmed even if bisection never moved.
    out.flags.retain(|f| *f != ResultFlag::BelowSearchFloor);
    Ok(out)
}

pub fn run_search(
    algorithm: Algorithm,
    driver: &mut dyn TrafficDriver,
    cfg: &SearchConfig,
    policy: &TrialPolicy,
) -> Result<FinderOutcome, FinderError> {
    match algorithm {
        Algorithm::Binary => find_pdr(driver, cfg, policy),
        Algorithm::Legacy => find_pdr_legacy(driver, cfg, policy),
    }
}

/// Repeated searches and the statistics of their interval midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    /// Smallest interval covering every run's interval.
    pub interval: RateInterval,
    /// Flags raised by any run.
    pub flags: Vec<ResultFlag>,
    pub stats: SummaryStats,
    pub runs: Vec<FinderOutcome>,
}

/// Runs the search `runs` times and summarizes the midpoints.
pub fn validate_pdr(
    driver: &mut dyn TrafficDriver,
    algorithm: Algorithm,
    cfg: &SearchConfig,
    policy: &TrialPolicy,
    runs: usize,
) -> Result<Validation, FinderError> {
    if runs == 0 {
        return Err(FinderError::InvalidConfig("runs must be at least 1".into()));
    }
    let mut outcomes = Vec::with_capacity(runs);
    for i in 0..runs {
        let o = run_search(algorithm, driver, cfg, policy)?;
        log::info!(
            "run {}/{runs}: [{:.0}, {:.0}] pps",
            i + 1,
            o.interval.low,
            o.interval.high
        );
        outcomes.push(o);
    }
    let midpoints: Vec<f64> = outcomes.iter().map(|o| o.interval.midpoint()).collect();
    let stats = summarize(&midpoints)?;
    let interval = RateInterval {
        low: outcomes.iter().map(|o| o.interval.low).fold(f64::INFINITY, f64::min),
        high: outcomes
            .iter()
            .map(|o| o.interval.high)
            .fold(f64::NEG_INFINITY, f64::max),
    };
    let mut flags: Vec<ResultFlag> = outcomes.iter().flat_map(|o| o.flags.iter().copied()).collect();
    flags.sort();
    flags.dedup();
    Ok(Validation {
        interval,
        flags,
        stats,
        runs: outcomes,
    })
}
