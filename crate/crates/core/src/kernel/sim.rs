//! The static-scheduled engine: state storage, the cycle step, and traces.

use serde::Serialize;
use thiserror::Error;

use super::elaborate::{elaborate, ElabError, StaticSchedule};
use super::netlist::{Netlist, ProcessCtx};

/// Engine errors. `ContractViolation` is raised when a behavior touches a
/// signal outside its declared read/write sets; `NonConvergence` is raised
/// only by the event-driven oracle when a falling edge fails to settle.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Elab(#[from] ElabError),
    #[error("process `{process}`: {violation}")]
    ContractViolation { process: String, violation: String },
    #[error("no convergence after {limit} delta iterations at cycle {cycle}")]
    NonConvergence { cycle: u64, limit: usize },
}

/// All mutable simulation storage. Allocated once from the schedule; the
/// slot counts and buffer capacities never change afterwards, so stepping
/// performs no allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub cycle: u64,
    pub(crate) registers: Vec<u64>,
    pub(crate) ports: Vec<u64>,
    write_buf: Vec<(u32, u64)>,
}

impl SimState {
    /// Number of stored signal values (registers + output ports).
    pub fn value_slots(&self) -> usize {
        self.registers.len() + self.ports.len()
    }

    /// Total allocated storage footprint, in slots, including the write
    /// buffer capacity. Exactly stable across steps.
    pub fn storage_footprint(&self) -> usize {
        self.registers.capacity() + self.ports.capacity() + self.write_buf.capacity()
    }

    /// Current value of a register by flat slot index.
    pub fn register(&self, slot: usize) -> u64 {
        self.registers[slot]
    }

    /// Current value of an output port by flat slot index.
    pub fn port(&self, slot: usize) -> u64 {
        self.ports[slot]
    }
}

impl StaticSchedule {
    /// Fresh state: registers at reset, ports cleared, then one falling-edge
    /// pass so outputs reflect the reset registers before the first rising
    /// edge.
    pub fn init_state(&self, netlist: &Netlist) -> Result<SimState, SimError> {
        let mut state = SimState {
            cycle: 0,
            registers: self.resolved.registers.iter().map(|r| r.reset).collect(),
            ports: vec![0; self.resolved.ports.len()],
            write_buf: Vec::with_capacity(self.resolved.max_phase_writes.max(1)),
        };
        falling_edge(&mut state, self, netlist)?;
        Ok(state)
    }
}

fn run_process(
    state: &mut SimState,
    schedule: &StaticSchedule,
    netlist: &Netlist,
    idx: usize,
) -> Result<(), SimError> {
    let proc_ = &schedule.resolved.processes[idx];
    let spec = &netlist.modules[proc_.module_idx].processes[proc_.process_idx];
    let mut ctx = ProcessCtx {
        reads: &proc_.reads,
        writes: &proc_.writes,
        regs: &state.registers,
        ports: &state.ports,
        out: &mut state.write_buf,
        violation: None,
    };
    (spec.behavior)(&mut ctx);
    if let Some(violation) = ctx.violation {
        return Err(SimError::ContractViolation {
            process: proc_.label.clone(),
            violation,
        });
    }
    Ok(())
}

/// Falling edge: Moore generations first (any order is equivalent, the
/// declaration order is used), then Mealy generations in topological order.
/// Each process's writes land before the next process runs.
fn falling_edge(
    state: &mut SimState,
    schedule: &StaticSchedule,
    netlist: &Netlist,
) -> Result<(), SimError> {
    for phase in [&schedule.moore_order, &schedule.mealy_order] {
        for &idx in phase.iter() {
            run_process(state, schedule, netlist, idx)?;
            while let Some((slot, value)) = state.write_buf.pop() {
                state.ports[slot as usize] = value;
            }
        }
    }
    Ok(())
}

/// Advances the simulation by one full clock cycle: rising edge (all
/// transitions, register writes applied atomically afterwards), then the
/// falling edge, then the cycle counter.
pub fn step(
    state: &mut SimState,
    schedule: &StaticSchedule,
    netlist: &Netlist,
) -> Result<(), SimError> {
    for &idx in &schedule.transition_order {
        run_process(state, schedule, netlist, idx)?;
    }
    // Applied only after every transition has read the pre-edge state.
    while let Some((slot, value)) = state.write_buf.pop() {
        state.registers[slot as usize] = value;
    }
    falling_edge(state, schedule, netlist)?;
    state.cycle += 1;
    Ok(())
}

// ---------------------------------------------------------------------------
// Signal traces
// ---------------------------------------------------------------------------

/// One recorded port value. `port` indexes the trace's port name table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub port: u32,
    pub value: u64,
}

/// Every output port value per cycle, in slot order within each cycle.
/// Two engines agree on a netlist exactly when their traces are equal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignalTrace {
    pub ports: Vec<String>,
    pub records: Vec<TraceRecord>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    cycle: u64,
    port: &'a str,
    value: u64,
}

impl SignalTrace {
    pub(crate) fn record_cycle(&mut self, cycle: u64, ports: &[u64]) {
        for (slot, &value) in ports.iter().enumerate() {
            self.records.push(TraceRecord {
                cycle,
                port: slot as u32,
                value,
            });
        }
    }

    /// Values of one named port across the trace, in cycle order.
    pub fn port_values(&self, name: &str) -> Vec<u64> {
        let Some(idx) = self.ports.iter().position(|p| p == name) else {
            return Vec::new();
        };
        self.records
            .iter()
            .filter(|r| r.port == idx as u32)
            .map(|r| r.value)
            .collect()
    }

    /// One JSON object per record: `{"cycle":..,"port":"module.port","value":..}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = TraceLine {
                cycle: r.cycle,
                port: &self.ports[r.port as usize],
                value: r.value,
            };
            out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            out.push('\n');
        }
        out
    }
}

/// Elaborates and simulates `n_cycles` full cycles, recording every output
/// port after each cycle. Cycle 0 (the reset falling edge) is not recorded;
/// `n_cycles = 0` produces an empty trace.
pub fn run(netlist: &Netlist, n_cycles: u64) -> Result<SignalTrace, SimError> {
    let schedule = elaborate(netlist)?;
    let mut state = schedule.init_state(netlist)?;
    let mut trace = SignalTrace {
        ports: schedule.port_names().iter().map(|s| s.to_string()).collect(),
        records: Vec::new(),
    };
    for _ in 0..n_cycles {
        step(&mut state, &schedule, netlist)?;
        trace.record_cycle(state.cycle, &state.ports);
    }
    Ok(trace)
}
