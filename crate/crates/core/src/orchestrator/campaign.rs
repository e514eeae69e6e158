use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ExperimentConfig, ForwarderKind, PacketOverrides, TestbedConfig, SCHEMA_VERSION};
use super::executor::{ConfigExecutor, SimExecutor, SshExecutor};
use super::recipe::{recipe_vars, render, ConfigRecipe, RecipeBook, RecipeError};
use crate::catalog::{lookup, BehaviorId, InnerKind, TrafficRequirement};
use crate::driver::{DriverError, SimDriver, TrafficDriver, TrexDriver};
use crate::finder::{validate_pdr, FinderOutcome, RateInterval, ResultFlag};
use crate::packet::{build_test_packet, AddressPlan, BehaviorConfig, PacketError, PacketTemplate};
use crate::rate::{line_packet_rate, SummaryStats, CI95_METHOD};
use crate::sim::Simulator;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolveError {
    #[error("{behavior} is not supported on {forwarder}: {reason}")]
    Unsupported {
        behavior: BehaviorId,
        forwarder: ForwarderKind,
        reason: String,
    },
    #[error("{behavior} has no test traffic: no packet semantics or recipes are implemented for it ({summary})")]
    NoTraffic { behavior: BehaviorId, summary: String },
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
}

/// Everything needed to measure one behavior on one testbed.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub behavior: BehaviorId,
    pub requirement: TrafficRequirement,
    pub template: PacketTemplate,
    pub recipe: ConfigRecipe,
    pub behavior_config: BehaviorConfig,
}

fn catalog_summary(behavior: BehaviorId) -> String {
    let s = lookup(behavior);
    let yn = |b: bool| if b { "yes" } else { "no" };
    format!(
        "catalog entry {}: category {}, linux {}, vpp {}, measured {}",
        s.id,
        s.category,
        yn(s.linux_supported),
        yn(s.vpp_supported),
        yn(s.measured)
    )
}

/// Recipe book for a testbed: the built-in one unless `recipes_dir` is set.
pub fn recipe_book(testbed: &TestbedConfig) -> Result<RecipeBook, RecipeError> {
    match &testbed.recipes_dir {
        Some(dir) => RecipeBook::load_dir(testbed.forwarder_kind, dir),
        None => Ok(RecipeBook::builtin(testbed.forwarder_kind)),
    }
}

/// Traffic requirement after experiment overrides.
pub fn effective_requirement(
    behavior: BehaviorId,
    base: TrafficRequirement,
    packet: &PacketOverrides,
) -> TrafficRequirement {
    let mut req = base;
    if let Some(size) = packet.inner_size {
        req = req.with_inner_size(size);
    }
    if let (BehaviorId::HEncaps, Some(kind @ (InnerKind::Ipv4 | InnerKind::Ipv6))) = (behavior, packet.inner_kind) {
        req = req.with_inner_kind(kind);
    }
    if let Some(n) = packet.sid_count {
        if req.needs_srv6_encap {
            req = req.with_sid_count(n);
        }
    }
    req
}

/// The packet replayed to measure `behavior`, after overrides. Fails for
/// behaviors without packet semantics.
pub fn test_packet(
    behavior: BehaviorId,
    packet: &PacketOverrides,
) -> Result<(TrafficRequirement, PacketTemplate), ResolveError> {
    let spec = lookup(behavior);
    let (true, Some(base)) = (spec.runnable(), spec.traffic) else {
        return Err(ResolveError::NoTraffic {
            behavior,
            summary: catalog_summary(behavior),
        });
    };
    let requirement = effective_requirement(behavior, base, packet);
    let sids = if requirement.needs_srv6_encap {
        AddressPlan::default().endpoint_path(behavior, requirement.srh_sid_count)
    } else {
        Vec::new()
    };
    let template = build_test_packet(&requirement, &sids)?;
    Ok((requirement, template))
}

/// Maps a behavior to its test packet and rendered configuration recipe.
pub fn resolve(
    behavior: BehaviorId,
    testbed: &TestbedConfig,
    packet: &PacketOverrides,
) -> Result<Resolved, ResolveError> {
    resolve_with(behavior, testbed, packet, &recipe_book(testbed)?)
}

pub fn resolve_with(
    behavior: BehaviorId,
    testbed: &TestbedConfig,
    packet: &PacketOverrides,
    book: &RecipeBook,
) -> Result<Resolved, ResolveError> {
    let spec = lookup(behavior);
    let forwarder = testbed.forwarder_kind;
    let supported = match forwarder {
        ForwarderKind::Linux => spec.linux_supported,
        ForwarderKind::Vpp => spec.vpp_supported,
        ForwarderKind::Sim => true,
    };
    let (requirement, template) = test_packet(behavior, packet).map_err(|e| match e {
        ResolveError::NoTraffic { summary, .. } => ResolveError::Unsupported {
            behavior,
            forwarder,
            reason: format!("no packet semantics or recipes are implemented for it ({summary})"),
        },
        e => e,
    })?;
    if !supported {
        return Err(ResolveError::Unsupported {
            behavior,
            forwarder,
            reason: format!("the forwarder does not implement it ({})", catalog_summary(behavior)),
        });
    }

    let plan = AddressPlan::default();

    let mut behavior_config = BehaviorConfig::from_plan(&plan, packet.policy_sids, testbed.interfaces.sut_out.clone());
    if let Some(model) = &testbed.sim {
        if let Some(c) = model.behavior_configs.get(&behavior) {
            behavior_config = c.clone();
        }
    }
    let vars = recipe_vars(behavior, &plan, &behavior_config, &testbed.interfaces);
    let recipe = render(book, behavior, &spec.recipe_key, &vars)?;
    Ok(Resolved {
        behavior,
        requirement,
        template,
        recipe,
        behavior_config,
    })
}

/// Builds the traffic driver for a resolved behavior.
pub trait DriverFactory {
    fn create(&mut self, resolved: &Resolved, testbed: &TestbedConfig) -> Result<Box<dyn TrafficDriver>, DriverError>;
}

impl<F> DriverFactory for F
where
    F: FnMut(&Resolved, &TestbedConfig) -> Result<Box<dyn TrafficDriver>, DriverError>,
{
    fn create(&mut self, resolved: &Resolved, testbed: &TestbedConfig) -> Result<Box<dyn TrafficDriver>, DriverError> {
        self(resolved, testbed)
    }
}

/// Simulated driver for sim testbeds, TRex stub otherwise.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultDrivers;

impl DriverFactory for DefaultDrivers {
    fn create(&mut self, r: &Resolved, testbed: &TestbedConfig) -> Result<Box<dyn TrafficDriver>, DriverError> {
        match (testbed.forwarder_kind, &testbed.sim, &testbed.generator) {
            (ForwarderKind::Sim, Some(model), _) => {
                let mut model = model.clone();
                model
                    .behavior_configs
                    .entry(r.behavior)
                    .or_insert_with(|| r.behavior_config.clone());
                model.capacity(r.behavior)?;
                let sim = Simulator::new(model)?;
                Ok(Box::new(SimDriver::new(
                    sim,
                    r.behavior,
                    r.requirement,
                    r.template.clone(),
                    &testbed.link,
                )?))
            }
            (ForwarderKind::Sim, None, _) => Err(DriverError::NotAvailable("sim testbed without model".into())),
            (_, _, Some(endpoint)) => Ok(Box::new(TrexDriver::new(endpoint.clone(), &r.template, &testbed.link)?)),
            (kind, _, None) => Err(DriverError::NotAvailable(format!(
                "no traffic generator configured for the {kind} testbed"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorResult {
    pub behavior: BehaviorId,
    pub forwarder: ForwarderKind,
    pub status: Status,
    pub error: Option<String>,
    pub frame_size: Option<usize>,
    pub line_packet_rate_pps: Option<f64>,
    /// Smallest interval covering every run's interval.
    pub interval: Option<RateInterval>,
    pub flags: Vec<ResultFlag>,
    /// Statistics of the interval midpoints over the runs.
    pub stats: Option<SummaryStats>,
    pub runs: Vec<FinderOutcome>,
    /// Configuration steps issued, setup then teardown.
    pub commands: Vec<String>,
    pub semantic_violations: usize,
    /// File the search traces are written to, relative to the output
    /// directory.
    pub trace_file: String,
}

impl BehaviorResult {
    fn new(behavior: BehaviorId, forwarder: ForwarderKind) -> Self {
        Self {
            behavior,
            forwarder,
            status: Status::Ok,
            error: None,
            frame_size: None,
            line_packet_rate_pps: None,
            interval: None,
            flags: Vec::new(),
            stats: None,
            runs: Vec::new(),
            commands: Vec::new(),
            semantic_violations: 0,
            trace_file: trace_file_name(behavior),
        }
    }

    fn fail(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::error!("{}: {msg}", self.behavior);
        self.status = Status::Error;
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }
}

pub fn trace_file_name(behavior: BehaviorId) -> String {
    format!("trace_{}.jsonl", behavior.name().to_ascii_lowercase().replace('.', "_"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetadata {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub ci95_method: String,
    pub experiment: ExperimentConfig,
    pub testbed: TestbedConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub metadata: CampaignMetadata,
    /// Some behavior failed.
    pub partial: bool,
    pub results: Vec<BehaviorResult>,
}

/// Runs a campaign with the testbed's own executor and driver: the
/// simulator for `sim`, ssh and the generator for hardware testbeds.
pub fn run_campaign(exp: &ExperimentConfig, testbed: &TestbedConfig) -> CampaignResult {
    match (testbed.forwarder_kind, &testbed.connection) {
        (ForwarderKind::Sim, _) => run_campaign_with(exp, testbed, &mut SimExecutor::new(), &mut DefaultDrivers),
        (_, Some(conn)) => run_campaign_with(exp, testbed, &mut SshExecutor::new(conn.clone()), &mut DefaultDrivers),
        (_, None) => {
            // parse-time validation rules this out; report it per behavior anyway
            let mut r = empty_result(exp, testbed);
            for b in &exp.behaviors {
                let mut e = BehaviorResult::new(*b, testbed.forwarder_kind);
                e.fail("testbed has no connection descriptor");
                r.results.push(e);
            }
            r.partial = true;
            r
        }
    }
}

fn empty_result(exp: &ExperimentConfig, testbed: &TestbedConfig) -> CampaignResult {
    let now = Utc::now();
    CampaignResult {
        metadata: CampaignMetadata {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            schema_version: SCHEMA_VERSION,
            started_at: now,
            finished_at: now,
            ci95_method: CI95_METHOD.into(),
            experiment: exp.clone(),
            testbed: testbed.clone(),
        },
        partial: false,
        results: Vec::new(),
    }
}

/// Runs every requested behavior in order: setup steps, repeated PDR
/// searches, teardown steps. A failing behavior is recorded and the
/// campaign moves on.
pub fn run_campaign_with(
    exp: &ExperimentConfig,
    testbed: &TestbedConfig,
    executor: &mut dyn ConfigExecutor,
    drivers: &mut dyn DriverFactory,
) -> CampaignResult {
    let mut result = empty_result(exp, testbed);
    let book = recipe_book(testbed);
    for &behavior in &exp.behaviors {
        log::info!("{behavior} on {}", testbed.forwarder_kind);
        let mut entry = BehaviorResult::new(behavior, testbed.forwarder_kind);
        match &book {
            Ok(book) => measure(&mut entry, exp, testbed, book, executor, drivers),
            Err(e) => entry.fail(e.to_string()),
        }
        result.partial |= entry.status == Status::Error;
        result.results.push(entry);
    }
    result.metadata.finished_at = Utc::now();
    result
}

fn run_steps(executor: &mut dyn ConfigExecutor, steps: &[String], issued: &mut Vec<String>) -> Result<(), String> {
    for step in steps {
        log::debug!("exec: {step}");
        issued.push(step.clone());
        match executor.execute(step) {
            Ok(out) if out.success() => {}
            Ok(out) => {
                return Err(format!(
                    "`{step}` exited with status {}: {}",
                    out.status,
                    out.output.trim()
                ))
            }
            Err(e) => return Err(format!("`{step}`: {e}")),
        }
    }
    Ok(())
}

fn measure(
    entry: &mut BehaviorResult,
    exp: &ExperimentConfig,
    testbed: &TestbedConfig,
    book: &RecipeBook,
    executor: &mut dyn ConfigExecutor,
    drivers: &mut dyn DriverFactory,
) {
    let resolved = match resolve_with(entry.behavior, testbed, &exp.packet, book) {
        Ok(r) => r,
        Err(e) => return entry.fail(e.to_string()),
    };
    entry.frame_size = Some(resolved.template.frame_size());
    entry.line_packet_rate_pps = line_packet_rate(&testbed.link, resolved.template.frame_size()).ok();

    let setup = run_steps(executor, &resolved.recipe.steps, &mut entry.commands);
    let setup_ok = setup.is_ok();
    match setup {
        Ok(()) => search(entry, exp, testbed, &resolved, drivers),
        Err(e) => entry.fail(format!("setup failed: {e}")),
    }
    // teardown runs in full even when a step fails
    let mut failures = Vec::new();
    for step in &resolved.recipe.teardown {
        if let Err(e) = run_steps(executor, std::slice::from_ref(step), &mut entry.commands) {
            failures.push(e);
        }
    }
    if !failures.is_empty() {
        if setup_ok {
            entry.fail(format!("teardown failed: {}", failures.join("; ")));
        } else {
            log::warn!(
                "{}: teardown after failed setup: {}",
                entry.behavior,
                failures.join("; ")
            );
        }
    }
}

fn search(
    entry: &mut BehaviorResult,
    exp: &ExperimentConfig,
    testbed: &TestbedConfig,
    resolved: &Resolved,
    drivers: &mut dyn DriverFactory,
) {
    let mut driver = match drivers.create(resolved, testbed) {
        Ok(d) => d,
        Err(e) => return entry.fail(format!("driver: {e}")),
    };
    let outcome = validate_pdr(driver.as_mut(), exp.algorithm, &exp.search, &exp.policy, exp.runs);
    entry.semantic_violations = driver.semantic_violations();
    match outcome {
        Ok(v) => {
            entry.interval = Some(v.interval);
            entry.flags = v.flags;
            entry.stats = Some(v.stats);
            entry.runs = v.runs;
            if entry.semantic_violations > 0 {
                entry.fail(format!(
                    "{} semantic violations in forwarded packets",
                    entry.semantic_violations
                ));
            }
        }
        Err(e) => entry.fail(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::executor::RecordingExecutor;
    use crate::sim::ForwarderModel;

    fn sim_testbed() -> TestbedConfig {
        TestbedConfig::sim(ForwarderModel::sharp([
            (BehaviorId::End, 4e6),
            (BehaviorId::EndDT6, 3e6),
        ]))
    }

    #[test]
    fn resolve_end_linux_and_sim() {
        let mut linux = sim_testbed();
        linux.forwarder_kind = ForwarderKind::Linux;
        let r = resolve(BehaviorId::End, &linux, &PacketOverrides::default()).unwrap();
        assert_eq!(r.recipe.steps.len(), 2);
        assert_eq!(r.template.frame_size(), 158);
        let r = resolve(BehaviorId::End, &sim_testbed(), &PacketOverrides::default()).unwrap();
        assert_eq!(r.recipe.steps.len(), 1);
    }

    #[test]
    fn resolve_refuses_unsupported() {
        let mut linux = sim_testbed();
        linux.forwarder_kind = ForwarderKind::Linux;
        let err = resolve(BehaviorId::EndDT4, &linux, &PacketOverrides::default()).unwrap_err();
        assert!(matches!(err, ResolveError::Unsupported { .. }));
        assert!(err.to_string().contains("linux no"), "{err}");
        let err = resolve(BehaviorId::EndAD, &sim_testbed(), &PacketOverrides::default()).unwrap_err();
        assert!(matches!(err, ResolveError::Unsupported { .. }));
        let mut vpp = linux.clone();
        vpp.forwarder_kind = ForwarderKind::Vpp;
        assert!(resolve(BehaviorId::EndDT4, &vpp, &PacketOverrides::default()).is_ok());
    }

    #[test]
    fn overrides_shape_the_packet() {
        let tb = sim_testbed();
        let v4 = PacketOverrides {
            inner_kind: Some(InnerKind::Ipv4),
            ..PacketOverrides::default()
        };
        let r = resolve(BehaviorId::HEncaps, &tb, &v4).unwrap();
        assert_eq!(r.requirement.inner_kind, InnerKind::Ipv4);
        // fixed-kind behaviors ignore the kind override
        let r = resolve(BehaviorId::EndDT6, &tb, &v4).unwrap();
        assert_eq!(r.requirement.inner_kind, InnerKind::Ipv6);
        let big = PacketOverrides {
            inner_size: Some(1000),
            sid_count: Some(4),
            ..PacketOverrides::default()
        };
        let r = resolve(BehaviorId::End, &tb, &big).unwrap();
        assert_eq!(r.template.frame_size(), 14 + 40 + 8 + 64 + 1000);
        let policy = PacketOverrides {
            policy_sids: 3,
            ..PacketOverrides::default()
        };
        let r = resolve(BehaviorId::HEncaps, &tb, &policy).unwrap();
        assert_eq!(r.behavior_config.segments.len(), 3);
    }

    #[test]
    fn campaign_isolates_failures() {
        let exp = ExperimentConfig {
            runs: 2,
            ..ExperimentConfig::new(vec![BehaviorId::End, BehaviorId::EndAD, BehaviorId::EndT])
        };
        let r = run_campaign(&exp, &sim_testbed());
        assert!(r.partial);
        assert_eq!(r.results.len(), 3);
        assert_eq!(r.results[0].status, Status::Ok);
        assert_eq!(r.results[1].status, Status::Error);
        assert!(r.results[1].commands.is_empty());
        // End.T has no capacity in the model: configured, then torn down
        assert_eq!(r.results[2].status, Status::Error);
        assert_eq!(r.results[2].commands.len(), 2);
    }

    #[test]
    fn setup_failure_still_tears_down() {
        let exp = ExperimentConfig {
            runs: 1,
            ..ExperimentConfig::new(vec![BehaviorId::End])
        };
        let mut linux = sim_testbed();
        linux.forwarder_kind = ForwarderKind::Linux;
        let mut exec = RecordingExecutor::new().failing_on("fcf0:0:2::/48");
        let r = run_campaign_with(&exp, &linux, &mut exec, &mut DefaultDrivers);
        assert!(r.partial);
        let cmds = exec.commands();
        assert_eq!(cmds.len(), 4);
        assert!(cmds[2].contains("route del"));
    }

    #[test]
    fn hardware_testbeds_without_generator_fail_cleanly() {
        let exp = ExperimentConfig {
            runs: 1,
            ..ExperimentConfig::new(vec![BehaviorId::End])
        };
        let mut vpp = sim_testbed();
        vpp.forwarder_kind = ForwarderKind::Vpp;
        let mut exec = RecordingExecutor::new();
        let r = run_campaign_with(&exp, &vpp, &mut exec, &mut DefaultDrivers);
        assert!(r.results[0].error.as_deref().unwrap().contains("no traffic generator"));
        assert_eq!(exec.commands().len(), 4);

        vpp.generator = Some(crate::driver::TrexEndpoint {
            host: "tg".into(),
            port: 4501,
            tx_port: 0,
            rx_port: 1,
        });
        let r = run_campaign_with(&exp, &vpp, &mut RecordingExecutor::new(), &mut DefaultDrivers);
        assert!(r.results[0].error.as_deref().unwrap().contains("not available"));
    }
}
