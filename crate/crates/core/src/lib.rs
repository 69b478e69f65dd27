pub mod agents;
pub mod cache;
pub mod env;
pub mod oracle;
pub mod orchestrator;
pub mod rng;
pub mod schedule;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
