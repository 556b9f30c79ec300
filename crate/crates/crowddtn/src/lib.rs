//! Deterministic discrete-event simulator for opportunistic delay-tolerant
//! routing across dense stationary crowds.
//!
//! One artist node broadcasts small lighting-cue messages to audience nodes
//! arranged on a grid, using store-carry-forward protocols: PRoPHET,
//! PRoPHETv2, Spray & Wait and Spray & Focus. Runs are driven by flat
//! settings files, produce append-only event logs, and are bit-reproducible
//! for a given configuration and seed.

pub mod engine;
pub mod metrics;
pub mod routing;
pub mod runner;
pub mod scenario;
pub mod settings;
pub mod trace;

pub use engine::{run, run_observed, SimResult};
pub use metrics::{report, EventKind, EventLog, MessageId, Report};
pub use runner::{run_single, run_sweep, Error, RunOutput, SweepOutput, SweepSpec};
pub use scenario::{NodeId, RouterKind, RouterParams, ScenarioConfig};
pub use settings::{parse_settings, serialize_settings, Settings, SettingsError};
