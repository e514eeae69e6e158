//! Rate arithmetic used by the benchmarking methodology: line packet rate,
//! delivery ratio, throughput and the summary statistics reported for each
//! behavior.
//!
//! All rates are carried as `f64` packets per second. Kilo-packets per
//! second only show up when formatting reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest legal Ethernet frame (without FCS), in bytes.
pub const MIN_FRAME_SIZE: usize = 64;

/// Two-sided 95% quantile of the standard normal distribution.
///
/// The confidence interval half-width assumes normally distributed
/// samples; reports carry [`CI95_METHOD`] so readers know which factor was
/// used.
pub const Z_95: f64 = 1.96;

/// Label stored in reports describing how `ci95_percent` was computed.
pub const CI95_METHOD: &str = "normal approximation, 1.96*s/sqrt(n), relative to mean";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("frame size {0} B is below the {MIN_FRAME_SIZE} B Ethernet minimum")]
    InvalidFrame(usize),
    #[error("line bit rate must be positive, got {0}")]
    InvalidLink(f64),
    #[error("delivery ratio undefined: no packets were offered")]
    UndefinedRatio,
    #[error("trial reports {rx} received packets but only {tx} offered")]
    RxExceedsTx { tx: u64, rx: u64 },
    #[error("trial duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("cannot summarize an empty sample list")]
    EmptySamples,
    #[error("coefficient of variation undefined for zero mean with non-zero spread")]
    UndefinedCv,
}

/// Physical link parameters used to bound the offered packet rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Line bit rate in bits per second.
    pub line_bit_rate_bps: f64,
    /// Ethernet header length in bytes, already part of the frame size.
    #[serde(default = "default_eth_header")]
    pub ethernet_header_len: usize,
    /// Per-frame bytes on the wire outside the frame: 4 CRC, 8 preamble/SFD
    /// and 12 inter-frame gap.
    #[serde(default = "default_eth_overhead")]
    pub ethernet_overhead: usize,
}

fn default_eth_header() -> usize {
    14
}

fn default_eth_overhead() -> usize {
    24
}

impl LinkSpec {
    pub fn new(line_bit_rate_bps: f64) -> Result<Self, RateError> {
        let link = Self {
            line_bit_rate_bps,
            ethernet_header_len: default_eth_header(),
            ethernet_overhead: default_eth_overhead(),
        };
        link.validate()?;
        Ok(link)
    }

    /// A 10 Gb/s Ethernet link.
    pub fn ten_gig() -> Self {
        Self {
            line_bit_rate_bps: 10e9,
            ethernet_header_len: default_eth_header(),
            ethernet_overhead: default_eth_overhead(),
        }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if !(self.line_bit_rate_bps.is_finite() && self.line_bit_rate_bps > 0.0) {
            return Err(RateError::InvalidLink(self.line_bit_rate_bps));
        }
        Ok(())
    }

    /// Frame size for an IP packet of `ip_packet_size` bytes.
    pub fn frame_size_for_ip(&self, ip_packet_size: usize) -> usize {
        ip_packet_size + self.ethernet_header_len
    }
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self::ten_gig()
    }
}

/// Maximum packet rate the link can carry for frames of `frame_size` bytes
/// (Ethernet header included, CRC excluded).
pub fn line_packet_rate(link: &LinkSpec, frame_size: usize) -> Result<f64, RateError> {
    link.validate()?;
    if frame_size < MIN_FRAME_SIZE {
        return Err(RateError::InvalidFrame(frame_size));
    }
    let wire_bytes = (frame_size + link.ethernet_overhead) as f64;
    Ok(link.line_bit_rate_bps / (8.0 * wire_bytes))
}

/// Outcome of one fixed-rate, fixed-duration traffic offering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    /// Packets sent by the generator into the SUT.
    pub tx_packets: u64,
    /// Packets forwarded by the SUT back to the generator.
    pub rx_packets: u64,
    /// Trial duration in seconds.
    pub duration_s: f64,
}

impl TrialSample {
    pub fn new(tx_packets: u64, rx_packets: u64, duration_s: f64) -> Result<Self, RateError> {
        if rx_packets > tx_packets {
            return Err(RateError::RxExceedsTx {
                tx: tx_packets,
                rx: rx_packets,
            });
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(RateError::InvalidDuration(duration_s));
        }
        Ok(Self {
            tx_packets,
            rx_packets,
            duration_s,
        })
    }

    /// Offered rate, packets per second.
    pub fn tx_rate(&self) -> f64 {
        self.tx_packets as f64 / self.duration_s
    }

    /// Throughput (received rate), packets per second.
    pub fn throughput(&self) -> f64 {
        self.rx_packets as f64 / self.duration_s
    }
}

/// Fraction of offered packets that were forwarded.
pub fn delivery_ratio(sample: &TrialSample) -> Result<f64, RateError> {
    if sample.tx_packets == 0 {
        return Err(RateError::UndefinedRatio);
    }
    Ok(sample.rx_packets as f64 / sample.tx_packets as f64)
}

/// Mean, coefficient of variation and 95% confidence half-width of a set
/// of repeated measurements. CV and CI95 are percentages of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub cv_percent: f64,
    pub ci95_percent: f64,
    pub n: usize,
}

impl SummaryStats {
    /// Sample standard deviation recovered from the relative CV.
    pub fn std_dev(&self) -> f64 {
        self.cv_percent * self.mean / 100.0
    }
}

/// Summarizes samples using the n-1 sample standard deviation.
pub fn summarize(samples: &[f64]) -> Result<SummaryStats, RateError> {
    let n = samples.len();
    if n == 0 {
        return Err(RateError::EmptySamples);
    }
    if samples.iter().all(|&s| s == samples[0]) {
        return Ok(SummaryStats {
            mean: samples[0],
            cv_percent: 0.0,
            ci95_percent: 0.0,
            n,
        });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(SummaryStats {
            mean,
            cv_percent: 0.0,
            ci95_percent: 0.0,
            n,
        });
    }
    if mean == 0.0 {
        return Err(RateError::UndefinedCv);
    }
    let cv_percent = 100.0 * sd / mean.abs();
    let ci95_percent = 100.0 * (Z_95 * sd / (n as f64).sqrt()) / mean.abs();
    Ok(SummaryStats {
        mean,
        cv_percent,
        ci95_percent,
        n,
    })
}
