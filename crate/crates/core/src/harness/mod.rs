//! End-to-end orchestration: configuration loading, transmitter
//! simulation, fault application, monitoring, and reporting.
//!
//! A run is a straight pipeline. The transmitter produces the wire-event
//! stream for `run_mafs` major frames, the fault scenario perturbs it, the
//! monitor consumes it against the expected model built from the same
//! (unperturbed) configuration, and the findings become a [`Report`].
//! Every stage is deterministic: two runs of the same configuration
//! produce byte-identical reports.

mod config;
mod netview;
mod report;
mod run;
mod trace;

pub use config::{load_config, ConfigError, PartitionConfig, PortKindConfig, SystemConfig};
pub use netview::{netlist_view, NetView};
pub use report::{emit_report, AnomalyCounts, AnomalyRecord, Report, Verdict};
pub use run::{monitor_stream, run_scenario, transmit, RunError, RunOutcome, TransmitterOutput};
pub use trace::{
    events_from_trace, read_trace, validate_bag, write_trace, BagViolation, TraceError, TraceLine,
};
