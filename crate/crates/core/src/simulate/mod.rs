//! Stochastic simulation: the three-type process, the substitution
//! (meltdown) process, and an individual-based multi-locus model.

pub mod gillespie;
pub mod meltdown;
pub mod micro;
pub mod rng;

pub use gillespie::{
    mc_fixation, run_logged, run_to_absorption, write_event_log, Absorption, AbsorptionOutcome,
    EventRecord, McEstimate, DEFAULT_EVENT_CAP, Z_99,
};
pub use meltdown::{
    plan_meltdown, simulate_meltdown, MeltdownPlan, MeltdownStep, MeltdownTrajectory,
};
pub use micro::{simulate_microscopic, MicroConfig, MicroEvent, MicroEventKind, MicroRun};
pub use rng::RngStream;
