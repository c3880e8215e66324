//! Netlist view of a configuration.
//!
//! Projects the transmit side onto the cycle-accurate kernel: a scheduler
//! module drives a wrapped MAF cycle counter, each partition raises a
//! pulse in the cycle its window opens, and an end-system module turns
//! pulses into BAG-regulated emission bits. The clock period is the GCD
//! of every time constant in the configuration, so all window edges and
//! BAGs land on cycle boundaries.
//!
//! The view exists for inspection (the `schedule` subcommand elaborates
//! it to show the static process order) and as a cross-check: emission
//! bits must line up with the expected-traffic model, one cycle late
//! (pulses are sampled at the rising edge after the window opens).

use crate::kernel::{ModuleSpec, Netlist};

use super::config::SystemConfig;

#[derive(Debug, Clone)]
pub struct NetView {
    pub netlist: Netlist,
    pub clock_us: u64,
    pub cycles_per_maf: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Builds the kernel netlist for a validated configuration.
pub fn netlist_view(config: &SystemConfig) -> NetView {
    let mut clock_us = config.major_frame.maf_us.max(1);
    for w in &config.major_frame.windows {
        clock_us = gcd(clock_us, w.offset_us);
        clock_us = gcd(clock_us, w.duration_us);
    }
    for l in &config.virtual_links {
        clock_us = gcd(clock_us, l.bag_us());
    }
    let cycles_per_maf = config.major_frame.maf_us / clock_us;

    let mut netlist = Netlist::new(clock_us);

    let wrap = cycles_per_maf;
    let sched = ModuleSpec::new("sched")
        .register("t", 64, 0)
        .output("t_maf", 64)
        .transition("tick", &["t"], &["t"], move |ctx| {
            let t = ctx.read("t");
            ctx.write("t", (t + 1) % wrap);
        })
        .moore("phase", &["t"], &["t_maf"], |ctx| {
            let t = ctx.read("t");
            ctx.write("t_maf", t);
        });
    netlist = netlist.module(sched);

    // Partition modules pulse in the cycle their window opens. Every
    // partition gets one; only those feeding a VL are wired to the end
    // system below.
    for p in &config.partitions {
        let starts: Vec<u64> = config
            .major_frame
            .windows
            .iter()
            .filter(|w| w.partition == p.partition)
            .map(|w| w.offset_us / clock_us)
            .collect();
        let name = format!("p{}", p.partition.0);
        let module = ModuleSpec::new(&name)
            .input("t_maf", 64)
            .output("sample_pulse", 1)
            .mealy("pulse", &["t_maf"], &["sample_pulse"], move |ctx| {
                let t = ctx.read("t_maf");
                ctx.write("sample_pulse", u64::from(starts.contains(&t)));
            });
        netlist = netlist
            .module(module)
            .bind("sched.t_maf", &format!("{name}.t_maf"));
    }

    // One emission pipeline per VL, driven by its source partition's
    // pulse. A partition drives at most one VL here, mirroring the
    // transmitter; extra VLs on the same partition get no pipeline.
    let mut wired_partitions: Vec<u8> = Vec::new();
    let mut es = ModuleSpec::new("es");
    let mut pulse_inputs: Vec<String> = Vec::new();
    let mut bindings: Vec<(String, String)> = Vec::new();
    for l in &config.virtual_links {
        if wired_partitions.contains(&l.source_partition.0) {
            continue;
        }
        if !config
            .partitions
            .iter()
            .any(|p| p.partition == l.source_partition)
        {
            continue;
        }
        wired_partitions.push(l.source_partition.0);
        let id = l.vl_id.0;
        let pulse = format!("pulse_vl{id}");
        let pending = format!("pending_{id}");
        let timer = format!("timer_{id}");
        let emitting = format!("emitting_{id}");
        let emit_out = format!("emit_vl{id}");
        let bag_cycles = l.bag_us() / clock_us;

        es = es
            .input(&pulse, 1)
            .register(&pending, 8, 0)
            .register(&timer, 32, 0)
            .register(&emitting, 1, 0)
            .output(&emit_out, 1);
        {
            let (pulse, pending, timer, emitting) =
                (pulse.clone(), pending.clone(), timer.clone(), emitting.clone());
            let reads = [pulse.clone(), pending.clone(), timer.clone()];
            let writes = [pending.clone(), timer.clone(), emitting.clone()];
            let read_refs: Vec<&str> = reads.iter().map(String::as_str).collect();
            let write_refs: Vec<&str> = writes.iter().map(String::as_str).collect();
            es = es.transition(&format!("tx_{id}"), &read_refs, &write_refs, move |ctx| {
                let p = ctx.read(&pulse);
                let backlog = ctx.read(&pending);
                let t = ctx.read(&timer);
                let emit_now = (backlog > 0 || p == 1) && t == 0;
                ctx.write(&pending, backlog + p - u64::from(emit_now));
                ctx.write(
                    &timer,
                    if emit_now {
                        bag_cycles.saturating_sub(1)
                    } else {
                        t.saturating_sub(1)
                    },
                );
                ctx.write(&emitting, u64::from(emit_now));
            });
        }
        {
            let emitting_read = emitting.clone();
            let emit_out_write = emit_out.clone();
            es = es.moore(
                &format!("out_{id}"),
                &[emitting.as_str()],
                &[emit_out.as_str()],
                move |ctx| {
                    let e = ctx.read(&emitting_read);
                    ctx.write(&emit_out_write, e);
                },
            );
        }
        bindings.push((
            format!("p{}.sample_pulse", l.source_partition.0),
            format!("es.{pulse}"),
        ));
        pulse_inputs.push(pulse);
    }

    if !pulse_inputs.is_empty() {
        es = es.output("bus_request", 1);
        let inputs = pulse_inputs.clone();
        let read_refs: Vec<&str> = pulse_inputs.iter().map(String::as_str).collect();
        es = es.mealy("bus", &read_refs, &["bus_request"], move |ctx| {
            let any = inputs.iter().any(|name| ctx.read(name) == 1);
            ctx.write("bus_request", u64::from(any));
        });
        netlist = netlist.module(es);
        for (from, to) in &bindings {
            netlist = netlist.bind(from, to);
        }
    }

    NetView {
        netlist,
        clock_us,
        cycles_per_maf,
    }
}
