//! Benchmarking toolkit for SRv6 forwarding behaviors.

pub mod catalog;
pub mod driver;
pub mod finder;
pub mod orchestrator;
pub mod packet;
pub mod rate;
pub mod sim;
