//! Netlist validation, slot resolution, and static schedule construction.
//!
//! Elaboration happens once. It flattens registers and output ports into
//! dense slot arrays, resolves every declared read/write to a slot, checks
//! the structural rules, and fixes the process execution order:
//! declaration order for transitions and Moore generations, a topological
//! order of the output-to-input dependency graph for Mealy generations.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::netlist::{
    width_mask, Netlist, ProcessKind, ReadSlot, SlotRead, WriteSlot,
};

/// Structural errors found during elaboration.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ElabError {
    #[error("input port `{0}` is not bound to any output")]
    UnboundPort(String),
    #[error("input port `{0}` is bound more than once")]
    DuplicateDriver(String),
    #[error("binding references unknown port `{0}`")]
    UnknownPort(String),
    #[error("width mismatch on binding {from} ({from_width} bits) -> {to} ({to_width} bits)")]
    WidthMismatch {
        from: String,
        from_width: u8,
        to: String,
        to_width: u8,
    },
    #[error("combinational cycle through processes: {}", .0.join(" -> "))]
    CombinationalCycle(Vec<String>),
    #[error("invalid module `{module}`: {reason}")]
    InvalidModule { module: String, reason: String },
    #[error("invalid process `{process}`: {reason}")]
    InvalidProcess { process: String, reason: String },
}

/// A process with every read and write resolved to a flat slot.
#[derive(Debug, Clone)]
pub(crate) struct ElabProcess {
    /// `module.process`, used in error reports and schedule dumps.
    pub label: String,
    pub kind: ProcessKind,
    pub module_idx: usize,
    pub process_idx: usize,
    pub reads: Vec<ReadSlot>,
    pub writes: Vec<WriteSlot>,
}

#[derive(Debug, Clone)]
pub(crate) struct RegInfo {
    pub name: String,
    pub reset: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct PortInfo {
    pub name: String,
}

/// Flattened, validated view of a netlist. Shared by the static engine and
/// the event-driven oracle; only the static engine adds the Mealy order.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub processes: Vec<ElabProcess>,
    pub registers: Vec<RegInfo>,
    pub ports: Vec<PortInfo>,
    /// Upper bound on writes buffered within one engine phase.
    pub max_phase_writes: usize,
}

/// The product of elaboration: resolved slots plus fixed execution orders.
/// Indices in the order vectors point into the resolved process table.
#[derive(Debug, Clone)]
pub struct StaticSchedule {
    pub(crate) resolved: Resolved,
    pub(crate) transition_order: Vec<usize>,
    pub(crate) moore_order: Vec<usize>,
    pub(crate) mealy_order: Vec<usize>,
}

impl StaticSchedule {
    /// Total number of value slots (registers + output ports). Fixed at
    /// elaboration; stepping never changes it.
    pub fn value_slots(&self) -> usize {
        self.resolved.registers.len() + self.resolved.ports.len()
    }

    pub fn transition_labels(&self) -> Vec<&str> {
        self.labels(&self.transition_order)
    }

    pub fn moore_labels(&self) -> Vec<&str> {
        self.labels(&self.moore_order)
    }

    pub fn mealy_labels(&self) -> Vec<&str> {
        self.labels(&self.mealy_order)
    }

    fn labels(&self, order: &[usize]) -> Vec<&str> {
        order
            .iter()
            .map(|&i| self.resolved.processes[i].label.as_str())
            .collect()
    }

    /// Output port names in slot order, as `module.port`.
    pub fn port_names(&self) -> Vec<&str> {
        self.resolved.ports.iter().map(|p| p.name.as_str()).collect()
    }

    /// Register names in slot order, as `module.register`.
    pub fn register_names(&self) -> Vec<&str> {
        self.resolved
            .registers
            .iter()
            .map(|r| r.name.as_str())
            .collect()
    }
}

/// Validates the netlist and resolves all names to flat slots, without
/// committing to an execution order. Rejects everything except
/// combinational cycles, which only the static schedule forbids.
pub(crate) fn resolve(netlist: &Netlist) -> Result<Resolved, ElabError> {
    let mut registers = Vec::new();
    let mut ports = Vec::new();
    // (module, local name) -> slot, for registers / output ports.
    let mut reg_slots: HashMap<(usize, &str), u32> = HashMap::new();
    let mut out_slots: HashMap<(usize, &str), u32> = HashMap::new();
    let mut module_names: HashMap<&str, usize> = HashMap::new();
    // Declared widths keyed the same way, for mask and binding checks.
    let mut widths: HashMap<(usize, &str), u8> = HashMap::new();
    let mut is_input: HashMap<(usize, &str), u8> = HashMap::new();

    for (mi, module) in netlist.modules.iter().enumerate() {
        if module_names.insert(module.name.as_str(), mi).is_some() {
            return Err(ElabError::InvalidModule {
                module: module.name.clone(),
                reason: "duplicate module name".to_string(),
            });
        }
        fn declare<'a>(
            local: &mut HashSet<&'a str>,
            module: &str,
            name: &'a str,
        ) -> Result<(), ElabError> {
            if !local.insert(name) {
                return Err(ElabError::InvalidModule {
                    module: module.to_string(),
                    reason: format!("duplicate signal name `{name}`"),
                });
            }
            Ok(())
        }
        let mut local: HashSet<&str> = HashSet::new();
        for r in &module.registers {
            declare(&mut local, &module.name, &r.name)?;
            check_width(&module.name, &r.name, r.width)?;
            reg_slots.insert((mi, r.name.as_str()), registers.len() as u32);
            widths.insert((mi, r.name.as_str()), r.width);
            registers.push(RegInfo {
                name: format!("{}.{}", module.name, r.name),
                reset: r.reset & width_mask(r.width),
            });
        }
        for p in &module.outputs {
            declare(&mut local, &module.name, &p.name)?;
            check_width(&module.name, &p.name, p.width)?;
            out_slots.insert((mi, p.name.as_str()), ports.len() as u32);
            widths.insert((mi, p.name.as_str()), p.width);
            ports.push(PortInfo {
                name: format!("{}.{}", module.name, p.name),
            });
        }
        for p in &module.inputs {
            declare(&mut local, &module.name, &p.name)?;
            check_width(&module.name, &p.name, p.width)?;
            widths.insert((mi, p.name.as_str()), p.width);
            is_input.insert((mi, p.name.as_str()), p.width);
        }
    }

    // Resolve bindings: every input port aliases the slot of its single
    // driving output port.
    let mut input_src: HashMap<(usize, String), u32> = HashMap::new();
    for b in &netlist.bindings {
        let from_mi = *module_names
            .get(b.from.module.as_str())
            .ok_or_else(|| ElabError::UnknownPort(b.from.to_string()))?;
        let to_mi = *module_names
            .get(b.to.module.as_str())
            .ok_or_else(|| ElabError::UnknownPort(b.to.to_string()))?;
        let src_slot = *out_slots
            .get(&(from_mi, b.from.port.as_str()))
            .ok_or_else(|| ElabError::UnknownPort(b.from.to_string()))?;
        let to_width = *is_input
            .get(&(to_mi, b.to.port.as_str()))
            .ok_or_else(|| ElabError::UnknownPort(b.to.to_string()))?;
        let from_width = widths[&(from_mi, b.from.port.as_str())];
        if from_width != to_width {
            return Err(ElabError::WidthMismatch {
                from: b.from.to_string(),
                from_width,
                to: b.to.to_string(),
                to_width,
            });
        }
        if input_src
            .insert((to_mi, b.to.port.clone()), src_slot)
            .is_some()
        {
            return Err(ElabError::DuplicateDriver(b.to.to_string()));
        }
    }
    for (mi, module) in netlist.modules.iter().enumerate() {
        for p in &module.inputs {
            if !input_src.contains_key(&(mi, p.name.clone())) {
                return Err(ElabError::UnboundPort(format!(
                    "{}.{}",
                    module.name, p.name
                )));
            }
        }
    }

    // Resolve processes and enforce the kind rules.
    let mut processes = Vec::new();
    let mut reg_writer: HashMap<u32, String> = HashMap::new();
    let mut port_writer: HashMap<u32, String> = HashMap::new();
    let mut max_phase_writes = 0usize;
    let mut transition_writes_total = 0usize;
    for (mi, module) in netlist.modules.iter().enumerate() {
        for (pi, proc_) in module.processes.iter().enumerate() {
            let label = format!("{}.{}", module.name, proc_.name);
            let invalid = |reason: String| ElabError::InvalidProcess {
                process: label.clone(),
                reason,
            };
            let mut reads = Vec::new();
            for name in &proc_.reads {
                let from = if let Some(&slot) = reg_slots.get(&(mi, name.as_str())) {
                    SlotRead::Reg(slot)
                } else if let Some(&slot) = input_src.get(&(mi, name.clone())) {
                    if proc_.kind == ProcessKind::MooreGeneration {
                        return Err(invalid(format!(
                            "moore generation reads input port `{name}`"
                        )));
                    }
                    SlotRead::Port(slot)
                } else {
                    return Err(invalid(format!(
                        "read set names `{name}`, which is not a register or input port"
                    )));
                };
                reads.push(ReadSlot {
                    name: name.clone(),
                    from,
                });
            }
            let mut writes = Vec::new();
            for name in &proc_.writes {
                let (slot, mask) = match proc_.kind {
                    ProcessKind::Transition => {
                        let slot = *reg_slots.get(&(mi, name.as_str())).ok_or_else(|| {
                            invalid(format!(
                                "transition writes `{name}`, which is not a register"
                            ))
                        })?;
                        if let Some(prev) = reg_writer.insert(slot, label.clone()) {
                            return Err(invalid(format!(
                                "register `{name}` already written by `{prev}`"
                            )));
                        }
                        (slot, width_mask(widths[&(mi, name.as_str())]))
                    }
                    ProcessKind::MooreGeneration | ProcessKind::MealyGeneration => {
                        let slot = *out_slots.get(&(mi, name.as_str())).ok_or_else(|| {
                            invalid(format!(
                                "generation writes `{name}`, which is not an output port"
                            ))
                        })?;
                        if let Some(prev) = port_writer.insert(slot, label.clone()) {
                            return Err(invalid(format!(
                                "output port `{name}` already written by `{prev}`"
                            )));
                        }
                        (slot, width_mask(widths[&(mi, name.as_str())]))
                    }
                };
                writes.push(WriteSlot {
                    name: name.clone(),
                    slot,
                    mask,
                });
            }
            if proc_.kind == ProcessKind::Transition {
                transition_writes_total += writes.len();
            } else {
                max_phase_writes = max_phase_writes.max(writes.len());
            }
            processes.push(ElabProcess {
                label,
                kind: proc_.kind,
                module_idx: mi,
                process_idx: pi,
                reads,
                writes,
            });
        }
    }
    // Transition writes buffer together (atomic edge); generations buffer
    // one process at a time.
    max_phase_writes = max_phase_writes.max(transition_writes_total);

    Ok(Resolved {
        processes,
        registers,
        ports,
        max_phase_writes,
    })
}

fn check_width(module: &str, name: &str, width: u8) -> Result<(), ElabError> {
    if (1..=64).contains(&width) {
        Ok(())
    } else {
        Err(ElabError::InvalidModule {
            module: module.to_string(),
            reason: format!("signal `{name}` has width {width}, expected 1..=64"),
        })
    }
}

/// Validates the netlist and computes the static process schedule.
pub fn elaborate(netlist: &Netlist) -> Result<StaticSchedule, ElabError> {
    let resolved = resolve(netlist)?;

    let transition_order: Vec<usize> = order_of(&resolved, ProcessKind::Transition);
    let moore_order: Vec<usize> = order_of(&resolved, ProcessKind::MooreGeneration);
    let mealy: Vec<usize> = order_of(&resolved, ProcessKind::MealyGeneration);

    // Dependency edges between Mealy processes: writer of a port slot
    // precedes every Mealy that reads it.
    let mut writer_of: HashMap<u32, usize> = HashMap::new();
    for &i in &mealy {
        for w in &resolved.processes[i].writes {
            writer_of.insert(w.slot, i);
        }
    }
    let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut indegree: HashMap<usize, usize> = mealy.iter().map(|&i| (i, 0)).collect();
    for &i in &mealy {
        for r in &resolved.processes[i].reads {
            if let SlotRead::Port(slot) = r.from {
                if let Some(&w) = writer_of.get(&slot) {
                    if w != i {
                        succ.entry(w).or_default().push(i);
                        *indegree.get_mut(&i).unwrap() += 1;
                    }
                }
            }
        }
    }
    // Kahn's algorithm; ready nodes picked in ascending index for a
    // deterministic order.
    let mut ready: Vec<usize> = mealy
        .iter()
        .copied()
        .filter(|i| indegree[i] == 0)
        .collect();
    ready.sort_unstable();
    let mut mealy_order = Vec::with_capacity(mealy.len());
    while let Some(&next) = ready.first() {
        ready.remove(0);
        mealy_order.push(next);
        if let Some(followers) = succ.get(&next) {
            for &f in followers {
                let d = indegree.get_mut(&f).unwrap();
                *d -= 1;
                if *d == 0 {
                    let pos = ready.binary_search(&f).unwrap_or_else(|p| p);
                    ready.insert(pos, f);
                }
            }
        }
    }
    if mealy_order.len() != mealy.len() {
        let remaining: Vec<usize> = mealy
            .iter()
            .copied()
            .filter(|i| !mealy_order.contains(i))
            .collect();
        let cycle = find_cycle(&resolved, &remaining, &writer_of);
        return Err(ElabError::CombinationalCycle(cycle));
    }

    Ok(StaticSchedule {
        resolved,
        transition_order,
        moore_order,
        mealy_order,
    })
}

fn order_of(resolved: &Resolved, kind: ProcessKind) -> Vec<usize> {
    resolved
        .processes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind == kind)
        .map(|(i, _)| i)
        .collect()
}

/// Walks successor edges among the unordered Mealy processes until a node
/// repeats, and returns the labels along the cycle.
fn find_cycle(
    resolved: &Resolved,
    remaining: &[usize],
    writer_of: &HashMap<u32, usize>,
) -> Vec<String> {
    let succ_of = |i: usize| -> Vec<usize> {
        // Successors within `remaining`: processes reading a port this one
        // writes. Recomputed here; elaboration failure is not a hot path.
        let mut out = Vec::new();
        for &j in remaining {
            if j == i {
                continue;
            }
            for r in &resolved.processes[j].reads {
                if let SlotRead::Port(slot) = r.from {
                    if writer_of.get(&slot) == Some(&i) {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    };
    let start = remaining[0];
    let mut path = vec![start];
    let mut seen_at: HashMap<usize, usize> = HashMap::new();
    seen_at.insert(start, 0);
    let mut cur = start;
    loop {
        // Every remaining node has indegree > 0 within the residue, so a
        // successor always exists and the walk must revisit a node.
        let next = succ_of(cur)[0];
        if let Some(&at) = seen_at.get(&next) {
            return path[at..]
                .iter()
                .map(|&i| resolved.processes[i].label.clone())
                .collect();
        }
        seen_at.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}
