//! Command-line front end.
//!
//! Exit codes: 0 when the run passes, 1 when the monitor found anomalies
//! (or selftest found divergence), 2 for configuration-class errors
//! (unreadable files, invalid config, infeasible schedule, fault targets
//! that don't exist, malformed traces).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ima_sentinel::harness::{
    emit_report, events_from_trace, load_config, monitor_stream, netlist_view, read_trace,
    run_scenario, write_trace, Report, SystemConfig, Verdict,
};
use ima_sentinel::kernel::random::{random_acyclic_netlist, NetlistGenConfig};
use ima_sentinel::kernel::{elaborate, oracle_run, run};
use ima_sentinel::monitor::build_expected_model;

#[derive(Parser)]
#[command(
    name = "ima-sentinel",
    version,
    about = "Simulate ARINC 653/664 traffic and monitor it for anomalies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration (optionally with faults) and report.
    Simulate {
        /// Configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Fault scenario JSON; replaces any scenario in the config.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override the configuration's run_mafs.
        #[arg(long)]
        mafs: Option<u64>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the frame trace (JSON Lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Replay a recorded trace through the monitor.
    Check {
        /// Configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Trace to replay (JSON Lines).
        #[arg(long)]
        trace: PathBuf,
        /// Override the configuration's run_mafs.
        #[arg(long)]
        mafs: Option<u64>,
    },
    /// Show the kernel's static process order and the expected traffic.
    Schedule {
        /// Configuration JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the static kernel against the event-driven reference on
    /// random netlists.
    Selftest {
        /// Number of random netlists.
        #[arg(long, default_value_t = 100)]
        cases: u64,
        /// Base seed; case i uses seed + i.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("IMA_SENTINEL_LOG", "warn"),
    )
    .init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            scenario,
            mafs,
            out,
            trace,
        } => simulate(&config, scenario.as_deref(), mafs, out.as_deref(), trace.as_deref()),
        Command::Check { config, trace, mafs } => check(&config, &trace, mafs),
        Command::Schedule { config } => schedule(&config),
        Command::Selftest { cases, seed } => selftest(cases, seed),
    }
    .unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn load(config_path: &Path, mafs: Option<u64>) -> Result<SystemConfig, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let mut config = load_config(&text)?;
    if let Some(n) = mafs {
        config.run_mafs = n;
    }
    Ok(config)
}

fn verdict_code(report: &Report) -> ExitCode {
    match report.verdict {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(1),
    }
}

fn simulate(
    config_path: &Path,
    scenario_path: Option<&Path>,
    mafs: Option<u64>,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> CliResult {
    let mut config = load(config_path, mafs)?;
    if let Some(path) = scenario_path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let scenario = serde_json::from_str(&text)
            .map_err(|e| format!("scenario {} does not parse: {e}", path.display()))?;
        config.scenario = Some(scenario);
    }
    let outcome = run_scenario(&config)?;
    let text = emit_report(&outcome.report);
    match out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = trace {
        std::fs::write(path, write_trace(&outcome.events))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(verdict_code(&outcome.report))
}

fn check(config_path: &Path, trace_path: &Path, mafs: Option<u64>) -> CliResult {
    let config = load(config_path, mafs)?;
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| format!("cannot read {}: {e}", trace_path.display()))?;
    let lines = read_trace(&text)?;
    let events = events_from_trace(&lines, &config);
    let model = build_expected_model(
        &config.major_frame,
        &config.virtual_links,
        config.prop_delay_us,
    )?;
    let (anomalies, diagnostics) =
        monitor_stream(model, config.laws.clone(), config.run_mafs, &events);
    for d in &diagnostics {
        log::info!("{d}");
    }
    let n = lines.len() as u64;
    let report = Report::new(config.digest(), config.run_mafs, n, n, &anomalies);
    print!("{}", emit_report(&report));
    Ok(verdict_code(&report))
}

fn schedule(config_path: &Path) -> CliResult {
    let config = load(config_path, None)?;
    let view = netlist_view(&config);
    let static_schedule = elaborate(&view.netlist)?;
    println!("clock period: {} us ({} cycles per MAF)", view.clock_us, view.cycles_per_maf);
    println!(
        "state: {} registers, {} output ports",
        static_schedule.register_names().len(),
        static_schedule.port_names().len()
    );
    println!("transition order (rising edge):");
    for label in static_schedule.transition_labels() {
        println!("  {label}");
    }
    println!("moore order (falling edge):");
    for label in static_schedule.moore_labels() {
        println!("  {label}");
    }
    println!("mealy order (falling edge, topological):");
    for label in static_schedule.mealy_labels() {
        println!("  {label}");
    }
    let model = build_expected_model(
        &config.major_frame,
        &config.virtual_links,
        config.prop_delay_us,
    )?;
    println!("expected traffic per MAF ({} us):", model.maf_us);
    for vle in &model.vls {
        for em in &vle.emissions {
            println!(
                "  {}: emit at +{} us, arrival window [+{}, +{}] us",
                vle.vl, em.nominal_emit_us, em.earliest_arrival_us, em.latest_arrival_us
            );
        }
    }
    let order: Vec<String> = model
        .order
        .iter()
        .map(|(vl, k)| format!("{vl}#{k}"))
        .collect();
    println!("expected arrival order: {}", order.join(" -> "));
    Ok(ExitCode::SUCCESS)
}

fn selftest(cases: u64, seed: u64) -> CliResult {
    const CYCLES: u64 = 200;
    let gen_config = NetlistGenConfig::default();
    let mut failures: Vec<u64> = Vec::new();
    for i in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let netlist = random_acyclic_netlist(&mut rng, &gen_config);
        let static_trace = run(&netlist, CYCLES);
        let oracle_trace = oracle_run(&netlist, CYCLES);
        let ok = match (&static_trace, &oracle_trace) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if !ok {
            failures.push(seed.wrapping_add(i));
            eprintln!(
                "case {i} (seed {}): DIVERGED (static: {:?}, oracle: {:?})",
                seed.wrapping_add(i),
                static_trace.as_ref().err(),
                oracle_trace.as_ref().err()
            );
        }
    }
    let passed = cases - failures.len() as u64;
    println!(
        "selftest: {passed}/{cases} netlists agree over {CYCLES} cycles (base seed {seed})"
    );
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        println!("diverging seeds: {failures:?}");
        Ok(ExitCode::from(1))
    }
}
