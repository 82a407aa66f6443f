//! Agent-based simulator of a catastrophe insurance market with a learning government.

pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod government;
pub mod individual;
pub mod insurer;
pub mod io;
pub mod metrics;
pub mod rl;
pub mod rng;
pub mod welfare;

pub use config::ScenarioConfig;
pub use env::{run_episode, EpisodeTrace, PolicySource, World};
pub use error::{ConfigError, IoError, ModelError};
pub use government::Intervention;
