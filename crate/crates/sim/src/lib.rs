//! Synthetic user campaigns against the living-lab platform.
//!
//! The simulator generates a world with known relevance, stands in for the
//! participating systems, and drives sessions of searching, clicking,
//! voting, and leaving. Because the ground truth is known, campaign
//! outcomes can be checked against what the evaluation machinery is
//! supposed to measure.

pub mod campaign;
pub mod click;
pub mod client;
pub mod policy;
pub mod stub;
pub mod world;

pub use campaign::{
    build_inproc, build_wire, drive, register_systems, run_inproc, run_wire, AdhocPlan,
    CampaignOutcome, DriveStats, RecPlan, Scenario, Summary, SystemPlan, WireHarness,
};
pub use click::{BehaviorSpec, ClickModel};
pub use client::{DriveError, Platform};
pub use policy::Policy;
pub use stub::{spawn_stub_system, FaultSpec, PolicyEndpoint};
pub use world::{World, WorldSpec};
