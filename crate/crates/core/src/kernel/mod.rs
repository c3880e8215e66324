//! Static-scheduled cycle-accurate simulation of single-clock netlists.
//!
//! A netlist is a set of modules holding registers and ports, connected by
//! point-to-point bindings from output ports to input ports. Module behavior
//! is expressed as processes of three kinds:
//!
//! - **Transition** — runs on the clock rising edge; reads registers and
//!   input ports, writes the next register values. All transition writes in
//!   a cycle are applied atomically, so every transition observes the
//!   pre-edge state.
//! - **Moore generation** — runs on the falling edge; computes output ports
//!   from registers only, so its order relative to other generations is
//!   irrelevant.
//! - **Mealy generation** — runs on the falling edge; computes output ports
//!   from registers *and* input ports, so it must run after whatever drives
//!   those inputs. Elaboration orders Mealy processes topologically and
//!   rejects combinational cycles.
//!
//! [`elaborate`] validates a netlist and produces a [`StaticSchedule`]: a
//! fixed process order computed once, after which [`step`] executes cycles
//! with no scheduling decisions and no storage growth. [`oracle_run`] is an
//! independent event-driven scheduler (evaluate / update / advance) kept
//! solely to cross-check the static engine; both must produce bit-identical
//! signal traces on any valid netlist.

mod elaborate;
mod netlist;
mod oracle;
pub mod random;
mod sim;

pub use elaborate::{elaborate, ElabError, StaticSchedule};
pub use netlist::{
    Behavior, Binding, ModuleSpec, Netlist, PortRef, PortSpec, ProcessCtx, ProcessKind,
    ProcessSpec, RegisterSpec,
};
pub use oracle::{oracle_run, oracle_run_with_limit, DEFAULT_DELTA_LIMIT};
pub use sim::{run, step, SimError, SimState, SignalTrace, TraceRecord};
