//! Event-driven reference scheduler.
//!
//! Independent of the static schedule: processes are re-evaluated whenever a
//! signal in their read set changes, in an evaluate / update loop that
//! repeats until the falling edge settles, then time advances one cycle.
//! Exists to cross-check the static engine; on any netlist the static
//! schedule accepts, both must produce bit-identical traces. A falling edge
//! that does not settle within the delta limit (a combinational loop that
//! keeps toggling) is reported as `NonConvergence`.

use super::elaborate::resolve;
use super::netlist::{Netlist, ProcessCtx, ProcessKind, SlotRead};
use super::sim::{SignalTrace, SimError};

/// Default bound on delta iterations within one falling edge.
pub const DEFAULT_DELTA_LIMIT: usize = 1000;

/// [`oracle_run`] with an explicit delta iteration limit.
pub fn oracle_run_with_limit(
    netlist: &Netlist,
    n_cycles: u64,
    delta_limit: usize,
) -> Result<SignalTrace, SimError> {
    let resolved = resolve(netlist)?;
    let n_procs = resolved.processes.len();

    let mut registers: Vec<u64> = resolved.registers.iter().map(|r| r.reset).collect();
    let mut ports: Vec<u64> = vec![0; resolved.ports.len()];

    // Sensitivity index: which generation processes read each slot.
    let mut reg_readers: Vec<Vec<usize>> = vec![Vec::new(); registers.len()];
    let mut port_readers: Vec<Vec<usize>> = vec![Vec::new(); ports.len()];
    for (i, p) in resolved.processes.iter().enumerate() {
        if p.kind == ProcessKind::Transition {
            continue;
        }
        for r in &p.reads {
            match r.from {
                SlotRead::Reg(s) => reg_readers[s as usize].push(i),
                SlotRead::Port(s) => port_readers[s as usize].push(i),
            }
        }
    }

    let transitions: Vec<usize> = (0..n_procs)
        .filter(|&i| resolved.processes[i].kind == ProcessKind::Transition)
        .collect();
    let generations: Vec<usize> = (0..n_procs)
        .filter(|&i| resolved.processes[i].kind != ProcessKind::Transition)
        .collect();

    let mut trace = SignalTrace {
        ports: resolved.ports.iter().map(|p| p.name.clone()).collect(),
        records: Vec::new(),
    };

    let mut pending: Vec<(u32, u64)> = Vec::new();
    let mut runnable = vec![false; n_procs];

    let evaluate = |idx: usize,
                        registers: &[u64],
                        ports: &[u64],
                        pending: &mut Vec<(u32, u64)>|
     -> Result<(), SimError> {
        let proc_ = &resolved.processes[idx];
        let spec = &netlist.modules[proc_.module_idx].processes[proc_.process_idx];
        let mut ctx = ProcessCtx {
            reads: &proc_.reads,
            writes: &proc_.writes,
            regs: registers,
            ports,
            out: pending,
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
    };

    // Falling-edge settle loop, used at initialization and every cycle.
    let settle = |runnable: &mut Vec<bool>,
                      registers: &[u64],
                      ports: &mut Vec<u64>,
                      pending: &mut Vec<(u32, u64)>,
                      cycle: u64|
     -> Result<(), SimError> {
        let mut deltas = 0usize;
        while runnable.iter().any(|&r| r) {
            deltas += 1;
            if deltas > delta_limit {
                return Err(SimError::NonConvergence {
                    cycle,
                    limit: delta_limit,
                });
            }
            // Evaluation: run every triggered process against the current
            // values; writes are buffered.
            for i in 0..n_procs {
                if runnable[i] {
                    runnable[i] = false;
                    evaluate(i, registers, ports, pending)?;
                }
            }
            // Update: apply buffered writes; processes reading a slot whose
            // value actually changed become runnable for the next delta.
            for (slot, value) in pending.drain(..) {
                let slot = slot as usize;
                if ports[slot] != value {
                    ports[slot] = value;
                    for &reader in &port_readers[slot] {
                        runnable[reader] = true;
                    }
                }
            }
        }
        Ok(())
    };

    // Initialization: every generation process runs once against the reset
    // registers, then the edge settles.
    for &g in &generations {
        runnable[g] = true;
    }
    settle(&mut runnable, &registers, &mut ports, &mut pending, 0)?;

    for cycle in 1..=n_cycles {
        // Rising edge: transitions evaluate against the pre-edge state and
        // the register file updates atomically.
        for &t in &transitions {
            evaluate(t, &registers, &ports, &mut pending)?;
        }
        for (slot, value) in pending.drain(..) {
            let slot = slot as usize;
            if registers[slot] != value {
                registers[slot] = value;
                for &reader in &reg_readers[slot] {
                    runnable[reader] = true;
                }
            }
        }
        settle(&mut runnable, &registers, &mut ports, &mut pending, cycle)?;
        trace.record_cycle(cycle, &ports);
    }
    Ok(trace)
}

/// Runs the event-driven scheduler for `n_cycles` with the default delta
/// limit, recording the same trace format as [`super::run`].
pub fn oracle_run(netlist: &Netlist, n_cycles: u64) -> Result<SignalTrace, SimError> {
    oracle_run_with_limit(netlist, n_cycles, DEFAULT_DELTA_LIMIT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::random::{cyclic_netlist, random_acyclic_netlist, NetlistGenConfig};
    use crate::kernel::{run, ModuleSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_static_engine_on_a_toggle() {
        let n = Netlist::new(10).module(
            ModuleSpec::new("m")
                .register("r", 1, 0)
                .output("out", 1)
                .transition("flip", &["r"], &["r"], |ctx| {
                    let r = ctx.read("r");
                    ctx.write("r", !r);
                })
                .moore("drive", &["r"], &["out"], |ctx| {
                    let r = ctx.read("r");
                    ctx.write("out", r);
                }),
        );
        assert_eq!(oracle_run(&n, 16).unwrap(), run(&n, 16).unwrap());
    }

    #[test]
    fn matches_static_engine_on_random_netlists() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = NetlistGenConfig::default();
        for case in 0..25 {
            let n = random_acyclic_netlist(&mut rng, &cfg);
            let a = run(&n, 200).unwrap();
            let b = oracle_run(&n, 200).unwrap();
            assert_eq!(a, b, "trace divergence on case {case}");
        }
    }

    #[test]
    fn oscillating_loop_hits_the_delta_limit() {
        let n = cyclic_netlist(2, 8);
        match oracle_run(&n, 4) {
            Err(SimError::NonConvergence { cycle, limit }) => {
                assert_eq!(cycle, 0); // diverges during initialization
                assert_eq!(limit, DEFAULT_DELTA_LIMIT);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn delta_limit_is_configurable() {
        let n = cyclic_netlist(3, 4);
        match oracle_run_with_limit(&n, 1, 17) {
            Err(SimError::NonConvergence { limit, .. }) => assert_eq!(limit, 17),
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }
}
