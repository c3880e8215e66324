//! Transmitter simulation and run orchestration.
//!
//! The transmitter is an event-driven replay of the data path: partition
//! window activations produce one sample each, samples pass through the
//! partition's ARINC 653 port to the end system, and the end system's
//! per-VL regulators emit frames under BAG control. Two event kinds
//! drive it, and at equal times window activations run before regulator
//! ticks so a frame enqueued at an instant can leave at that instant.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::arinc653::{AppGeneratorState, Port653};
use crate::arinc664::{VlRegulator, WireEvent};
use crate::faults::{apply_scenario, apply_schedule_shifts, FaultError};
use crate::monitor::{
    build_expected_model, Anomaly, ExpectedTrafficModel, ModelError, Monitor, MonitorEvent,
    VariationLaw,
};

use super::config::{PortKindConfig, SystemConfig};
use super::report::Report;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Infeasible(#[from] ModelError),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone)]
pub struct TransmitterOutput {
    /// Wire events sorted by arrival time.
    pub events: Vec<WireEvent>,
    pub frames_emitted: u64,
}

/// Heap entry. Order is (time, kind, index): window starts before
/// regulator ticks at the same instant, index as the final tiebreak for
/// reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TxEventKind {
    WindowStart,
    RegulatorTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TxEvent {
    t_us: u64,
    kind: TxEventKind,
    index: usize,
}

/// Simulates the transmit side for `run_mafs` major frames and returns
/// the frame stream as it appears on the wire, fault-free.
pub fn transmit(config: &SystemConfig, run_mafs: u64) -> TransmitterOutput {
    let maf_us = config.major_frame.maf_us;
    let run_end_us = run_mafs.saturating_mul(maf_us);

    let mut generators: Vec<AppGeneratorState> = Vec::new();
    let mut ports: Vec<Port653> = Vec::new();
    let mut last_forwarded: Vec<Option<u16>> = Vec::new();
    // partition index -> vl index, if the partition feeds a VL
    let mut vl_of_partition: Vec<Option<usize>> = Vec::new();
    for p in &config.partitions {
        generators.push(AppGeneratorState::new(p.app, p.generator.clone()));
        ports.push(match p.port {
            PortKindConfig::Queuing => {
                Port653::queuing(format!("{}_out", p.partition), p.queue_capacity)
            }
            PortKindConfig::Sampling => Port653::sampling(format!("{}_out", p.partition)),
        });
        last_forwarded.push(None);
        vl_of_partition.push(
            config
                .virtual_links
                .iter()
                .position(|l| l.source_partition == p.partition),
        );
    }
    let mut regulators: Vec<VlRegulator> = config
        .virtual_links
        .iter()
        .map(|_| VlRegulator::new())
        .collect();

    let mut heap: BinaryHeap<Reverse<TxEvent>> = BinaryHeap::new();
    for maf in 0..run_mafs {
        for (w, window) in config.major_frame.windows.iter().enumerate() {
            heap.push(Reverse(TxEvent {
                t_us: maf * maf_us + window.offset_us,
                kind: TxEventKind::WindowStart,
                index: w,
            }));
        }
    }

    let mut events: Vec<WireEvent> = Vec::new();
    while let Some(Reverse(ev)) = heap.pop() {
        if ev.t_us >= run_end_us {
            continue;
        }
        match ev.kind {
            TxEventKind::WindowStart => {
                let window = &config.major_frame.windows[ev.index];
                let Some(pi) = config
                    .partitions
                    .iter()
                    .position(|p| p.partition == window.partition)
                else {
                    continue;
                };
                let sample = generators[pi].generate(ev.t_us);
                if let Err(e) = ports[pi].send(sample) {
                    log::warn!("{}: sample dropped at the port: {e}", window.partition);
                }
                let Some(vi) = vl_of_partition[pi] else {
                    while ports[pi].receive().is_some() {} // no VL: drain and discard
                    continue;
                };
                let link = &config.virtual_links[vi];
                match config.partitions[pi].port {
                    PortKindConfig::Queuing => {
                        while let Some(s) = ports[pi].receive() {
                            if let Err(e) = regulators[vi].enqueue(&s, link) {
                                log::warn!("{}: sample not encodable: {e}", link.vl_id);
                            }
                        }
                    }
                    PortKindConfig::Sampling => {
                        if let Some(s) = ports[pi].receive() {
                            if last_forwarded[pi] != Some(s.sample_seq) {
                                last_forwarded[pi] = Some(s.sample_seq);
                                if let Err(e) = regulators[vi].enqueue(&s, link) {
                                    log::warn!("{}: sample not encodable: {e}", link.vl_id);
                                }
                            }
                        }
                    }
                }
                heap.push(Reverse(TxEvent {
                    t_us: ev.t_us,
                    kind: TxEventKind::RegulatorTick,
                    index: vi,
                }));
            }
            TxEventKind::RegulatorTick => {
                let link = &config.virtual_links[ev.index];
                if let Some(emission) = regulators[ev.index].regulate(link, ev.t_us) {
                    events.push(WireEvent {
                        t_emit_us: emission.t_emit_us,
                        t_arrive_us: emission.t_emit_us + config.prop_delay_us,
                        raw: emission.raw,
                    });
                }
                if let Some(opportunity) = regulators[ev.index].next_opportunity_us(link) {
                    let next = opportunity.max(ev.t_us.saturating_add(1));
                    if next < run_end_us {
                        heap.push(Reverse(TxEvent {
                            t_us: next,
                            kind: TxEventKind::RegulatorTick,
                            index: ev.index,
                        }));
                    }
                }
            }
        }
    }

    let frames_emitted = events.len() as u64;
    TransmitterOutput {
        events,
        frames_emitted,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    /// The perturbed stream as the monitor saw it (what `--trace` saves).
    pub events: Vec<WireEvent>,
    /// Monitor notes that are not anomalies (e.g. apps without laws).
    pub diagnostics: Vec<String>,
}

/// Feeds a stream through a fresh monitor, interleaving the MAF-boundary
/// flushes, and returns the anomalies plus the monitor's diagnostics.
/// Arrivals exactly on a boundary belong to the MAF that starts there.
pub fn monitor_stream(
    model: ExpectedTrafficModel,
    laws: Vec<VariationLaw>,
    run_mafs: u64,
    events: &[WireEvent],
) -> (Vec<Anomaly>, Vec<String>) {
    let maf_us = model.maf_us;
    let mut monitor = Monitor::new(model, laws, run_mafs);
    let mut anomalies = Vec::new();
    let mut next_boundary: u64 = 1;
    for ev in events {
        while next_boundary <= run_mafs && next_boundary * maf_us <= ev.t_arrive_us {
            anomalies.extend(monitor.ingest(MonitorEvent::MafEnd(next_boundary * maf_us)));
            next_boundary += 1;
        }
        anomalies.extend(monitor.ingest(MonitorEvent::Arrival(ev.clone())));
    }
    while next_boundary <= run_mafs {
        anomalies.extend(monitor.ingest(MonitorEvent::MafEnd(next_boundary * maf_us)));
        next_boundary += 1;
    }
    (anomalies, monitor.diagnostics().to_vec())
}

/// The full pipeline: transmit, perturb, monitor, report.
///
/// The expected model always comes from the configuration as written;
/// schedule-shift faults apply only to the transmitter's copy, which is
/// exactly the mismatch the monitor is supposed to notice.
pub fn run_scenario(config: &SystemConfig) -> Result<RunOutcome, RunError> {
    let digest = config.digest();
    let model = build_expected_model(
        &config.major_frame,
        &config.virtual_links,
        config.prop_delay_us,
    )?;

    let mut tx_config = config.clone();
    if let Some(scenario) = &config.scenario {
        apply_schedule_shifts(&mut tx_config.major_frame, scenario)?;
    }
    let tx = transmit(&tx_config, config.run_mafs);

    let events = match &config.scenario {
        Some(scenario) => apply_scenario(&tx.events, scenario)?,
        None => tx.events,
    };
    let frames_received = events.len() as u64;

    let (anomalies, diagnostics) =
        monitor_stream(model, config.laws.clone(), config.run_mafs, &events);
    for d in &diagnostics {
        log::info!("{d}");
    }
    let report = Report::new(
        digest,
        config.run_mafs,
        tx.frames_emitted,
        frames_received,
        &anomalies,
    );
    Ok(RunOutcome {
        report,
        events,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arinc664::{decode_frame, VlId};
    use crate::faults::{FaultScenario, FaultSpec};
    use crate::harness::config::load_config;
    use crate::harness::report::{emit_report, Verdict};
    use crate::monitor::AnomalyKind;

    fn baseline(run_mafs: u64) -> SystemConfig {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/baseline.json"
        ))
        .unwrap();
        let mut config = load_config(&text).unwrap();
        config.run_mafs = run_mafs;
        config
    }

    #[test]
    fn baseline_timing_and_sequences() {
        let tx = transmit(&baseline(2), 2);
        assert_eq!(tx.frames_emitted, 6);
        let emits: Vec<u64> = tx.events.iter().map(|e| e.t_emit_us).collect();
        assert_eq!(emits, vec![0, 100_000, 200_000, 300_000, 400_000, 500_000]);
        assert!(tx.events.iter().all(|e| e.t_arrive_us == e.t_emit_us + 100));
        let frames: Vec<_> = tx
            .events
            .iter()
            .map(|e| decode_frame(&e.raw).unwrap())
            .collect();
        assert_eq!(frames[0].vl_id, VlId(1));
        assert_eq!(frames[1].vl_id, VlId(2));
        assert_eq!(frames[3].vl_id, VlId(1));
        assert_eq!(frames[0].vl_seq, 1);
        assert_eq!(frames[3].vl_seq, 2, "per-VL sequence advances each MAF");
        assert_eq!(frames[0].sample.values.len(), 2, "GPS emits lat/lon");
        assert_eq!(frames[1].sample.values.len(), 1);
    }

    #[test]
    fn baseline_run_is_clean() {
        let config = baseline(10);
        let outcome = run_scenario(&config).unwrap();
        assert_eq!(outcome.report.verdict, Verdict::Pass);
        assert_eq!(outcome.report.frames_emitted, 30);
        assert_eq!(outcome.report.frames_received, 30);
        assert!(outcome.report.anomalies.is_empty());
        assert_eq!(outcome.report.mafs, 10);
    }

    #[test]
    fn zero_mafs_pass_with_zero_frames() {
        let config = baseline(0);
        let outcome = run_scenario(&config).unwrap();
        assert_eq!(outcome.report.verdict, Verdict::Pass);
        assert_eq!(outcome.report.frames_emitted, 0);
        assert_eq!(outcome.report.frames_received, 0);
    }

    #[test]
    fn dropping_the_first_vl2_frame_yields_missing_plus_sequence() {
        let mut config = baseline(10);
        config.scenario = Some(FaultScenario {
            name: "drop-first-vl2".into(),
            faults: vec![FaultSpec::Drop { vl: VlId(2), nth: 1 }],
            seed: 0,
        });
        let outcome = run_scenario(&config).unwrap();
        let report = &outcome.report;
        assert_eq!(report.verdict, Verdict::Fail);
        assert_eq!(report.counts.missing, 1);
        assert_eq!(report.counts.sequence, 1);
        assert_eq!(report.counts.total(), 2, "{:#?}", report.anomalies);
        assert!(report.anomalies.iter().all(|a| a.vl == 2));
        assert_eq!(report.frames_received, report.frames_emitted - 1);
    }

    #[test]
    fn identical_runs_identical_bytes() {
        let config = baseline(5);
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        assert_eq!(emit_report(&a.report), emit_report(&b.report));
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn sampling_port_carries_the_same_traffic() {
        let queuing = baseline(5);
        let mut sampling = baseline(5);
        for p in &mut sampling.partitions {
            p.port = PortKindConfig::Sampling;
        }
        let a = transmit(&queuing, 5);
        let b = transmit(&sampling, 5);
        assert_eq!(a.events, b.events, "one sample per activation, both port kinds forward it once");
    }

    #[test]
    fn scenario_changes_the_digest() {
        let plain = baseline(5);
        let mut with_fault = baseline(5);
        with_fault.scenario = Some(FaultScenario {
            name: "x".into(),
            faults: vec![FaultSpec::Drop { vl: VlId(1), nth: 1 }],
            seed: 0,
        });
        assert_ne!(
            run_scenario(&plain).unwrap().report.config_digest,
            run_scenario(&with_fault).unwrap().report.config_digest
        );
    }

    #[test]
    fn schedule_shift_faults_move_windows_only_for_the_transmitter() {
        let mut config = baseline(4);
        config.scenario = Some(FaultScenario {
            name: "shift-p1".into(),
            faults: vec![FaultSpec::ScheduleShift {
                partition: crate::arinc653::PartitionId(1),
                delta_us: 150_000,
            }],
            seed: 0,
        });
        let outcome = run_scenario(&config).unwrap();
        assert_eq!(outcome.report.verdict, Verdict::Fail);
        let order_violations = outcome
            .report
            .anomalies
            .iter()
            .filter(|a| a.kind == AnomalyKind::UnexpectedComm && a.detail.contains("order"))
            .count();
        assert!(order_violations >= 1, "{:#?}", outcome.report.anomalies);
    }
}
