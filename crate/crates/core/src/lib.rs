//! Packet-level discrete-event simulator of terrestrial/satellite NR dual
//! connectivity.
//!
//! A scenario places UEs in a three-site terrestrial grid under a single
//! quasi-earth-fixed LEO beam. Every UE is anchored at its terrestrial
//! sector (the master node); a policy decides when the satellite beam is
//! added as secondary node, after which downlink PDCP traffic is split
//! between both legs under SN-driven flow control.
//!
//! The usual entry points are [`campaign::run_campaign`] for multi-seed
//! experiments and [`sim::run_scenario`] for a single run. The `examples/`
//! directory has one program per building block.

pub mod campaign;
pub mod channel;
pub mod config;
pub mod dataplane;
pub mod engine;
pub mod geometry;
pub mod ids;
pub mod mc;
pub mod sim;
pub mod split;
pub mod stats;

pub use config::{Policy, ScenarioConfig};
pub use engine::SimTime;
pub use ids::{NodeId, UeId};
