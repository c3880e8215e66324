//! Seeded netlist generation for differential testing.
//!
//! [`random_acyclic_netlist`] draws netlists that are valid by construction:
//! Mealy processes only consume outputs of Moore processes or of Mealy
//! processes in earlier modules, so the combinational graph is a DAG.
//! [`cyclic_netlist`] builds a ring of incrementing Mealy processes, which
//! the static schedule must reject and which keeps the event-driven
//! scheduler busy forever (x+1 never equals x in any width).

use rand::Rng;

use super::netlist::{ModuleSpec, Netlist, ProcessCtx, ProcessKind};

/// Bounds for the generator.
#[derive(Debug, Clone)]
pub struct NetlistGenConfig {
    pub max_modules: usize,
    pub max_processes_per_module: usize,
}

impl Default for NetlistGenConfig {
    fn default() -> Self {
        NetlistGenConfig {
            max_modules: 8,
            max_processes_per_module: 4,
        }
    }
}

/// A tiny RPN program over the values of the declared read set. Behaviors
/// built from it are pure functions of their reads, as the process contract
/// requires.
#[derive(Debug, Clone)]
enum Op {
    Read(usize),
    Const(u64),
    Not,
    RotL(u32),
    Add,
    Xor,
    And,
    Or,
    Mul,
}

fn eval(prog: &[Op], inputs: &[u64]) -> u64 {
    let mut stack: Vec<u64> = Vec::with_capacity(8);
    for op in prog {
        match op {
            Op::Read(i) => stack.push(inputs[*i]),
            Op::Const(c) => stack.push(*c),
            Op::Not => {
                let a = stack.pop().unwrap();
                stack.push(!a);
            }
            Op::RotL(k) => {
                let a = stack.pop().unwrap();
                stack.push(a.rotate_left(*k));
            }
            Op::Add | Op::Xor | Op::And | Op::Or | Op::Mul => {
                let b = stack.pop().unwrap();
                let a = stack.pop().unwrap();
                stack.push(match op {
                    Op::Add => a.wrapping_add(b),
                    Op::Xor => a ^ b,
                    Op::And => a & b,
                    Op::Or => a | b,
                    Op::Mul => a.wrapping_mul(b),
                    _ => unreachable!(),
                });
            }
        }
    }
    stack.pop().unwrap()
}

fn gen_expr(rng: &mut impl Rng, n_reads: usize, budget: &mut u32, prog: &mut Vec<Op>) {
    if *budget == 0 || rng.gen_bool(0.3) {
        if n_reads > 0 && rng.gen_bool(0.85) {
            prog.push(Op::Read(rng.gen_range(0..n_reads)));
        } else {
            prog.push(Op::Const(rng.gen()));
        }
        return;
    }
    *budget -= 1;
    match rng.gen_range(0..7u32) {
        0 => {
            gen_expr(rng, n_reads, budget, prog);
            prog.push(Op::Not);
        }
        1 => {
            gen_expr(rng, n_reads, budget, prog);
            prog.push(Op::RotL(rng.gen_range(1..63)));
        }
        op => {
            gen_expr(rng, n_reads, budget, prog);
            gen_expr(rng, n_reads, budget, prog);
            prog.push(match op {
                2 => Op::Add,
                3 => Op::Xor,
                4 => Op::And,
                5 => Op::Or,
                _ => Op::Mul,
            });
        }
    }
}

fn behavior_from(
    reads: Vec<String>,
    write: String,
    prog: Vec<Op>,
) -> impl Fn(&mut ProcessCtx<'_>) + Send + Sync + 'static {
    move |ctx| {
        let values: Vec<u64> = reads.iter().map(|name| ctx.read(name)).collect();
        ctx.write(&write, eval(&prog, &values));
    }
}

/// An output port another process may consume.
#[derive(Debug, Clone)]
struct SourcePort {
    module_idx: usize,
    name: String, // "module.port"
    width: u8,
    from_mealy: bool,
}

struct ProcessPlan {
    kind: ProcessKind,
    /// Register name for transitions, output port name for generations.
    target: String,
    target_width: u8,
}

/// Draws a netlist with at most `max_modules` modules and at most
/// `max_processes_per_module` processes each. Always elaborates cleanly.
pub fn random_acyclic_netlist(rng: &mut impl Rng, cfg: &NetlistGenConfig) -> Netlist {
    let n_modules = rng.gen_range(2..=cfg.max_modules.max(2));
    let widths = [1u8, 4, 8, 13, 16, 32, 64];

    // Pass 1: fix registers, process plans, and output ports so pass 2 can
    // bind inputs against the full source list.
    let mut reg_names: Vec<Vec<(String, u8)>> = Vec::new();
    let mut plans: Vec<Vec<ProcessPlan>> = Vec::new();
    let mut sources: Vec<SourcePort> = Vec::new();
    let mut resets: Vec<Vec<u64>> = Vec::new();
    for mi in 0..n_modules {
        let n_regs = rng.gen_range(1..=3usize);
        let mut regs = Vec::new();
        let mut rst = Vec::new();
        for ri in 0..n_regs {
            let w = widths[rng.gen_range(0..widths.len())];
            regs.push((format!("r{ri}"), w));
            rst.push(rng.gen::<u64>());
        }
        let max_t = (cfg.max_processes_per_module - 1).min(n_regs).min(2);
        let n_trans = rng.gen_range(0..=max_t);
        let n_gens = rng.gen_range(1..=(cfg.max_processes_per_module - n_trans).min(2));
        let mut plan = Vec::new();
        for ti in 0..n_trans {
            plan.push(ProcessPlan {
                kind: ProcessKind::Transition,
                target: regs[ti].0.clone(),
                target_width: regs[ti].1,
            });
        }
        for gi in 0..n_gens {
            let kind = if rng.gen_bool(0.5) {
                ProcessKind::MooreGeneration
            } else {
                ProcessKind::MealyGeneration
            };
            let w = widths[rng.gen_range(0..widths.len())];
            let name = format!("o{gi}");
            sources.push(SourcePort {
                module_idx: mi,
                name: format!("m{mi}.{name}"),
                width: w,
                from_mealy: kind == ProcessKind::MealyGeneration,
            });
            plan.push(ProcessPlan {
                kind,
                target: name,
                target_width: w,
            });
        }
        reg_names.push(regs);
        plans.push(plan);
        resets.push(rst);
    }

    // Pass 2: build the modules, drawing read sets and creating one input
    // port (plus binding) per consumed remote output.
    let mut netlist = Netlist::new(1);
    let mut bindings: Vec<(String, String)> = Vec::new();
    for mi in 0..n_modules {
        let mut module = ModuleSpec::new(format!("m{mi}"));
        for ((name, width), reset) in reg_names[mi].iter().zip(&resets[mi]) {
            module = module.register(name, *width, *reset);
        }
        let mut input_counter = 0usize;
        for (pi, plan) in plans[mi].iter().enumerate() {
            let mut reads: Vec<String> = Vec::new();
            let n_local = rng.gen_range(0..=reg_names[mi].len());
            for (name, _) in reg_names[mi].iter().take(n_local.max(
                // Moore generations read registers only; keep them nonempty.
                usize::from(plan.kind == ProcessKind::MooreGeneration),
            )) {
                reads.push(name.clone());
            }
            // Remote reads through fresh input ports.
            let candidates: Vec<&SourcePort> = sources
                .iter()
                .filter(|s| match plan.kind {
                    ProcessKind::Transition => true,
                    ProcessKind::MooreGeneration => false,
                    // Keeps the Mealy dependency graph acyclic: Moore
                    // outputs anywhere, Mealy outputs strictly upstream.
                    ProcessKind::MealyGeneration => !s.from_mealy || s.module_idx < mi,
                })
                .collect();
            let n_remote = if candidates.is_empty() {
                0
            } else {
                rng.gen_range(0..=2usize)
            };
            for _ in 0..n_remote {
                let src = candidates[rng.gen_range(0..candidates.len())];
                let in_name = format!("i{input_counter}");
                input_counter += 1;
                module = module.input(&in_name, src.width);
                bindings.push((src.name.clone(), format!("m{mi}.{in_name}")));
                reads.push(in_name);
            }
            if reads.is_empty() {
                reads.push(reg_names[mi][0].0.clone());
            }

            let mut prog = Vec::new();
            let mut budget = rng.gen_range(1..=5u32);
            gen_expr(rng, reads.len(), &mut budget, &mut prog);
            let behavior = behavior_from(reads.clone(), plan.target.clone(), prog);
            let read_refs: Vec<&str> = reads.iter().map(|s| s.as_str()).collect();
            let name = format!("p{pi}");
            match plan.kind {
                ProcessKind::Transition => {
                    module = module.transition(&name, &read_refs, &[&plan.target], behavior);
                }
                ProcessKind::MooreGeneration => {
                    module = module.output(&plan.target, plan.target_width).moore(
                        &name,
                        &read_refs,
                        &[&plan.target],
                        behavior,
                    );
                }
                ProcessKind::MealyGeneration => {
                    module = module.output(&plan.target, plan.target_width).mealy(
                        &name,
                        &read_refs,
                        &[&plan.target],
                        behavior,
                    );
                }
            }
        }
        netlist = netlist.module(module);
    }
    for (from, to) in bindings {
        netlist = netlist.bind(&from, &to);
    }
    netlist
}

/// A ring of `ring_len` Mealy incrementers. Structurally cyclic, and the
/// values never settle, so the event-driven scheduler cannot converge.
pub fn cyclic_netlist(ring_len: usize, width: u8) -> Netlist {
    assert!(ring_len >= 2, "a combinational cycle needs at least 2 nodes");
    let mut netlist = Netlist::new(1);
    for i in 0..ring_len {
        netlist = netlist.module(
            ModuleSpec::new(format!("c{i}"))
                .input("in", width)
                .output("out", width)
                .mealy("inc", &["in"], &["out"], |ctx| {
                    let v = ctx.read("in");
                    ctx.write("out", v.wrapping_add(1));
                }),
        );
    }
    for i in 0..ring_len {
        netlist = netlist.bind(
            &format!("c{i}.out"),
            &format!("c{}.in", (i + 1) % ring_len),
        );
    }
    netlist
}
