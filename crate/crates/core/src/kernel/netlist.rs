//! Netlist description types: modules, registers, ports, processes, bindings.

use std::fmt;
use std::sync::Arc;

/// Process behavior. Reads and writes go through [`ProcessCtx`], which
/// resolves names against the sets the process declared and masks written
/// values to the declared bit width.
pub type Behavior = Arc<dyn Fn(&mut ProcessCtx<'_>) + Send + Sync>;

/// The three process kinds of the machine model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    /// Rising edge: registers <- f(registers, input ports).
    Transition,
    /// Falling edge: output ports <- f(registers).
    MooreGeneration,
    /// Falling edge: output ports <- f(registers, input ports).
    MealyGeneration,
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessKind::Transition => write!(f, "transition"),
            ProcessKind::MooreGeneration => write!(f, "moore"),
            ProcessKind::MealyGeneration => write!(f, "mealy"),
        }
    }
}

/// A register: clocked state local to a module. `width` is in bits (1..=64);
/// values are masked to the width on every write.
#[derive(Debug, Clone)]
pub struct RegisterSpec {
    pub name: String,
    pub width: u8,
    pub reset: u64,
}

/// An input or output port. Input ports must be bound to exactly one output
/// port of equal width.
#[derive(Debug, Clone)]
pub struct PortSpec {
    pub name: String,
    pub width: u8,
}

/// A process: kind, declared read/write sets (names local to the owning
/// module), and behavior.
#[derive(Clone)]
pub struct ProcessSpec {
    pub name: String,
    pub kind: ProcessKind,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    pub behavior: Behavior,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("reads", &self.reads)
            .field("writes", &self.writes)
            .finish_non_exhaustive()
    }
}

/// A module: named unit owning registers, ports, and processes. Signal names
/// (registers, inputs, outputs together) must be unique within the module.
#[derive(Debug, Clone, Default)]
pub struct ModuleSpec {
    pub name: String,
    pub registers: Vec<RegisterSpec>,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
    pub processes: Vec<ProcessSpec>,
}

impl ModuleSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ModuleSpec {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn register(mut self, name: &str, width: u8, reset: u64) -> Self {
        self.registers.push(RegisterSpec {
            name: name.to_string(),
            width,
            reset,
        });
        self
    }

    pub fn input(mut self, name: &str, width: u8) -> Self {
        self.inputs.push(PortSpec {
            name: name.to_string(),
            width,
        });
        self
    }

    pub fn output(mut self, name: &str, width: u8) -> Self {
        self.outputs.push(PortSpec {
            name: name.to_string(),
            width,
        });
        self
    }

    pub fn process(
        mut self,
        kind: ProcessKind,
        name: &str,
        reads: &[&str],
        writes: &[&str],
        behavior: impl Fn(&mut ProcessCtx<'_>) + Send + Sync + 'static,
    ) -> Self {
        self.processes.push(ProcessSpec {
            name: name.to_string(),
            kind,
            reads: reads.iter().map(|s| s.to_string()).collect(),
            writes: writes.iter().map(|s| s.to_string()).collect(),
            behavior: Arc::new(behavior),
        });
        self
    }

    pub fn transition(
        self,
        name: &str,
        reads: &[&str],
        writes: &[&str],
        behavior: impl Fn(&mut ProcessCtx<'_>) + Send + Sync + 'static,
    ) -> Self {
        self.process(ProcessKind::Transition, name, reads, writes, behavior)
    }

    pub fn moore(
        self,
        name: &str,
        reads: &[&str],
        writes: &[&str],
        behavior: impl Fn(&mut ProcessCtx<'_>) + Send + Sync + 'static,
    ) -> Self {
        self.process(ProcessKind::MooreGeneration, name, reads, writes, behavior)
    }

    pub fn mealy(
        self,
        name: &str,
        reads: &[&str],
        writes: &[&str],
        behavior: impl Fn(&mut ProcessCtx<'_>) + Send + Sync + 'static,
    ) -> Self {
        self.process(ProcessKind::MealyGeneration, name, reads, writes, behavior)
    }
}

/// Reference to a port as `module.port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub module: String,
    pub port: String,
}

impl PortRef {
    /// Parses `"module.port"`. Panics on missing dot; intended for literals.
    pub fn parse(s: &str) -> Self {
        let (module, port) = s
            .split_once('.')
            .unwrap_or_else(|| panic!("port reference `{s}` must be `module.port`"));
        PortRef {
            module: module.to_string(),
            port: port.to_string(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.module, self.port)
    }
}

/// A point-to-point connection from an output port to an input port.
#[derive(Debug, Clone)]
pub struct Binding {
    pub from: PortRef,
    pub to: PortRef,
}

/// A complete single-clock design: modules plus bindings. `clock_period_us`
/// is carried for callers that map cycles to simulated time; the kernel
/// itself counts cycles.
#[derive(Debug, Clone, Default)]
pub struct Netlist {
    pub modules: Vec<ModuleSpec>,
    pub bindings: Vec<Binding>,
    pub clock_period_us: u64,
}

impl Netlist {
    pub fn new(clock_period_us: u64) -> Self {
        Netlist {
            clock_period_us,
            ..Default::default()
        }
    }

    pub fn module(mut self, m: ModuleSpec) -> Self {
        self.modules.push(m);
        self
    }

    /// Binds `from` (an output, `"module.port"`) to `to` (an input).
    pub fn bind(mut self, from: &str, to: &str) -> Self {
        self.bindings.push(Binding {
            from: PortRef::parse(from),
            to: PortRef::parse(to),
        });
        self
    }
}

// ---------------------------------------------------------------------------
// Process execution context
// ---------------------------------------------------------------------------

/// Where a resolved read comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SlotRead {
    Reg(u32),
    Port(u32),
}

/// A resolved write target: flat slot index plus width mask. The target
/// array (registers vs. ports) is implied by the process kind.
#[derive(Debug, Clone)]
pub(crate) struct WriteSlot {
    pub name: String,
    pub slot: u32,
    pub mask: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct ReadSlot {
    pub name: String,
    pub from: SlotRead,
}

/// Handed to behaviors: name-based access restricted to the declared
/// read/write sets. Out-of-set accesses are recorded and surfaced by the
/// engine as a contract violation after the behavior returns.
pub struct ProcessCtx<'a> {
    pub(crate) reads: &'a [ReadSlot],
    pub(crate) writes: &'a [WriteSlot],
    pub(crate) regs: &'a [u64],
    pub(crate) ports: &'a [u64],
    pub(crate) out: &'a mut Vec<(u32, u64)>,
    pub(crate) violation: Option<String>,
}

impl ProcessCtx<'_> {
    /// Value of a declared register or input port. Undeclared names read as
    /// zero and flag a contract violation.
    pub fn read(&mut self, name: &str) -> u64 {
        match self.reads.iter().find(|r| r.name == name) {
            Some(r) => match r.from {
                SlotRead::Reg(i) => self.regs[i as usize],
                SlotRead::Port(i) => self.ports[i as usize],
            },
            None => {
                self.flag(format!("read of undeclared signal `{name}`"));
                0
            }
        }
    }

    /// Writes a declared target; the value is masked to the declared width.
    /// Undeclared names are dropped and flag a contract violation.
    pub fn write(&mut self, name: &str, value: u64) {
        match self.writes.iter().find(|w| w.name == name) {
            Some(w) => self.out.push((w.slot, value & w.mask)),
            None => self.flag(format!("write to undeclared signal `{name}`")),
        }
    }

    fn flag(&mut self, msg: String) {
        if self.violation.is_none() {
            self.violation = Some(msg);
        }
    }
}

/// Width-to-mask helper shared by elaboration and the engines.
pub(crate) fn width_mask(width: u8) -> u64 {
    debug_assert!((1..=64).contains(&width));
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_ref_parses_module_and_port() {
        let r = PortRef::parse("es.vl1_emit");
        assert_eq!(r.module, "es");
        assert_eq!(r.port, "vl1_emit");
        assert_eq!(r.to_string(), "es.vl1_emit");
    }

    #[test]
    fn width_mask_covers_full_range() {
        assert_eq!(width_mask(1), 1);
        assert_eq!(width_mask(8), 0xFF);
        assert_eq!(width_mask(63), u64::MAX >> 1);
        assert_eq!(width_mask(64), u64::MAX);
    }

    #[test]
    fn builder_collects_declarations() {
        let m = ModuleSpec::new("m")
            .register("r", 4, 3)
            .input("in", 8)
            .output("out", 8)
            .moore("drive", &["r"], &["out"], |_| {});
        assert_eq!(m.registers.len(), 1);
        assert_eq!(m.inputs.len(), 1);
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.processes[0].kind, ProcessKind::MooreGeneration);
    }
}
