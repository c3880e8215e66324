//! Simulation and runtime monitoring of an avionics data path.
//!
//! The library models a transmitting IMA module (time-partitioned
//! applications behind ARINC 653 ports) feeding an ARINC 664 end system
//! that emits BAG-regulated frames over virtual links, and a switch-resident
//! monitor that re-derives the expected traffic from the same configuration
//! and flags deviations in arrival timing, sequence continuity, and data
//! plausibility.
//!
//! Modules:
//!
//! - [`kernel`] — static-scheduled cycle-accurate simulator for single-clock
//!   netlists of communicating state machines, plus an event-driven reference
//!   scheduler used for differential testing.
//! - [`arinc653`] — major-frame partition schedule, inter-partition ports,
//!   and the deterministic application sample generators.
//! - [`arinc664`] — virtual-link configuration, frame codec, BAG regulator,
//!   and static routing.
//! - [`monitor`] — expected-traffic model and the temporal / sequence / data
//!   consistency checks with their anomaly taxonomy.
//! - [`faults`] — deterministic fault injection on recorded frame streams.
//! - [`harness`] — system configuration, scenario runner, report emission,
//!   and trace serialization.

pub mod arinc653;
pub mod arinc664;
pub mod faults;
pub mod harness;
pub mod kernel;
pub mod monitor;
