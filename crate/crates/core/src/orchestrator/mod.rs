//! Campaign automation: configuration files, per-forwarder recipes,
//! remote execution and result assembly.

pub mod campaign;
pub mod config;
pub mod executor;
pub mod recipe;
pub mod report;

pub use campaign::{
    recipe_book, resolve, run_campaign, run_campaign_with, test_packet, BehaviorResult, CampaignMetadata,
    CampaignResult, DefaultDrivers, DriverFactory, ResolveError, Resolved, Status,
};
pub use config::{
    parse_experiment_config, parse_testbed_config, ConfigError, ExperimentConfig, ExperimentType, ForwarderKind,
    TestbedConfig,
};
pub use executor::{CommandOutput, ConfigExecutor, EventLog, RecordingExecutor, SimExecutor, SshExecutor};
pub use recipe::{ConfigRecipe, RecipeBook};
