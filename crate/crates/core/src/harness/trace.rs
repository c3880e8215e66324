//! Frame-event traces as JSON Lines.
//!
//! A trace is the decoded view of the wire: one line per frame with its
//! emission and arrival times plus the payload fields. Frames that do not
//! decode (e.g. transport-corrupted by a fault) have no decoded view and
//! are skipped at write time with a warning.
//!
//! Reconstructing wire events from a trace is lossy in two declared ways:
//! the payload's own sampling timestamp is not a trace field and is taken
//! to be `t_emit`, and the source partition comes from the configuration
//! (or 0 for VLs the configuration does not know).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::BTreeMap;

use crate::arinc653::{AppId, AppSample, PartitionId};
use crate::arinc664::{decode_frame, encode_frame, VirtualLinkConfig, VlId, WireEvent};

use super::config::SystemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t_emit: u64,
    pub t_arrive: u64,
    pub vl: u16,
    pub seq: u8,
    pub app: u8,
    pub sample_seq: u16,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
}

/// Serializes the decodable events, one JSON object per line.
pub fn write_trace(events: &[WireEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        match decode_frame(&ev.raw) {
            Ok(frame) => {
                let line = TraceLine {
                    t_emit: ev.t_emit_us,
                    t_arrive: ev.t_arrive_us,
                    vl: frame.vl_id.0,
                    seq: frame.vl_seq,
                    app: frame.sample.app.0,
                    sample_seq: frame.sample.sample_seq,
                    values: frame.sample.values,
                };
                out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
                out.push('\n');
            }
            Err(e) => {
                log::warn!("undecodable frame at t={} not traced: {e}", ev.t_arrive_us);
            }
        }
    }
    out
}

/// Parses a JSON Lines trace; empty lines are ignored.
pub fn read_trace(text: &str) -> Result<Vec<TraceLine>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed =
            serde_json::from_str(line).map_err(|source| TraceError::BadLine { line: i + 1, source })?;
        out.push(parsed);
    }
    Ok(out)
}

/// Rebuilds wire events from trace lines so the monitor can replay them.
/// See the module docs for the two declared substitutions.
pub fn events_from_trace(lines: &[TraceLine], config: &SystemConfig) -> Vec<WireEvent> {
    lines
        .iter()
        .map(|line| {
            let vl = VlId(line.vl);
            let link = config
                .virtual_links
                .iter()
                .find(|l| l.vl_id == vl)
                .cloned()
                .unwrap_or(VirtualLinkConfig {
                    vl_id: vl,
                    bag_ms: 1,
                    max_frame_size: 1518,
                    max_jitter_us: 0,
                    source_partition: PartitionId(0),
                    destinations: Vec::new(),
                });
            let sample = AppSample {
                app: AppId(line.app),
                sample_seq: line.sample_seq,
                timestamp_us: line.t_emit,
                values: line.values.clone(),
            };
            let raw = encode_frame(&sample, &link, line.seq).expect("trace line re-encodes");
            WireEvent {
                t_emit_us: line.t_emit,
                t_arrive_us: line.t_arrive,
                raw,
            }
        })
        .collect()
}

/// One BAG violation found in a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagViolation {
    pub vl: u16,
    pub prev_emit_us: u64,
    pub emit_us: u64,
    pub required_gap_us: u64,
}

/// Checks per-VL inter-emission gaps against the given BAGs using nothing
/// but the trace lines. VLs absent from the map are not checked.
pub fn validate_bag(lines: &[TraceLine], bag_us_by_vl: &BTreeMap<u16, u64>) -> Vec<BagViolation> {
    let mut last: BTreeMap<u16, u64> = BTreeMap::new();
    let mut out = Vec::new();
    for line in lines {
        let Some(&bag) = bag_us_by_vl.get(&line.vl) else {
            continue;
        };
        if let Some(&prev) = last.get(&line.vl) {
            if line.t_emit.saturating_sub(prev) < bag {
                out.push(BagViolation {
                    vl: line.vl,
                    prev_emit_us: prev,
                    emit_us: line.t_emit,
                    required_gap_us: bag,
                });
            }
        }
        last.insert(line.vl, line.t_emit);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::load_config;
    use crate::harness::run::{monitor_stream, transmit};
    use crate::monitor::build_expected_model;

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
    fn trace_round_trip_preserves_fields() {
        let config = baseline(3);
        let tx = transmit(&config, 3);
        let text = write_trace(&tx.events);
        assert_eq!(text.lines().count(), 9);
        let lines = read_trace(&text).unwrap();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0].t_emit, 0);
        assert_eq!(lines[0].t_arrive, 100);
        assert_eq!(lines[0].vl, 1);
        assert_eq!(lines[0].seq, 1);
        assert_eq!(lines[0].app, 1);
        assert_eq!(lines[0].values.len(), 2);
        assert_eq!(lines[4].vl, 2);
        assert_eq!(lines[4].seq, 2, "second MAF advances the sequence");
    }

    #[test]
    fn line_schema_has_the_agreed_keys() {
        let line = TraceLine {
            t_emit: 1,
            t_arrive: 2,
            vl: 3,
            seq: 4,
            app: 5,
            sample_seq: 6,
            values: vec![7.0],
        };
        assert_eq!(
            serde_json::to_string(&line).unwrap(),
            r#"{"t_emit":1,"t_arrive":2,"vl":3,"seq":4,"app":5,"sample_seq":6,"values":[7.0]}"#
        );
    }

    #[test]
    fn undecodable_frames_are_skipped() {
        let config = baseline(1);
        let mut tx = transmit(&config, 1);
        tx.events[1].raw[20] ^= 0xFF;
        let text = write_trace(&tx.events);
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn bad_line_reports_its_number() {
        let text = "{\"t_emit\":1,\"t_arrive\":2,\"vl\":3,\"seq\":4,\"app\":5,\"sample_seq\":6,\"values\":[]}\nnot json\n";
        match read_trace(text) {
            Err(TraceError::BadLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected BadLine, got {other:?}"),
        }
    }

    #[test]
    fn fault_free_trace_has_no_bag_violations() {
        let config = baseline(10);
        let tx = transmit(&config, 10);
        let lines = read_trace(&write_trace(&tx.events)).unwrap();
        let bags: BTreeMap<u16, u64> = config
            .virtual_links
            .iter()
            .map(|l| (l.vl_id.0, l.bag_us()))
            .collect();
        assert_eq!(validate_bag(&lines, &bags), Vec::new());
    }

    #[test]
    fn bag_violation_detected() {
        let mk = |t_emit| TraceLine {
            t_emit,
            t_arrive: t_emit + 100,
            vl: 1,
            seq: 1,
            app: 1,
            sample_seq: 0,
            values: vec![],
        };
        let lines = vec![mk(0), mk(3_999), mk(8_000)];
        let bags: BTreeMap<u16, u64> = [(1u16, 4_000u64)].into_iter().collect();
        let violations = validate_bag(&lines, &bags);
        assert_eq!(violations.len(), 1);
        assert_eq!(
            violations[0],
            BagViolation { vl: 1, prev_emit_us: 0, emit_us: 3_999, required_gap_us: 4_000 }
        );
    }

    #[test]
    fn reconstructed_events_replay_clean_through_the_monitor() {
        let config = baseline(5);
        let tx = transmit(&config, 5);
        let lines = read_trace(&write_trace(&tx.events)).unwrap();
        let events = events_from_trace(&lines, &config);
        assert_eq!(events.len(), tx.events.len());

        let model = build_expected_model(
            &config.major_frame,
            &config.virtual_links,
            config.prop_delay_us,
        )
        .unwrap();
        let (anomalies, _) = monitor_stream(model, config.laws.clone(), 5, &events);
        assert_eq!(anomalies, Vec::new());
    }

    #[test]
    fn unknown_vl_lines_reconstruct_with_partition_zero() {
        let config = baseline(1);
        let line = TraceLine {
            t_emit: 110_000,
            t_arrive: 110_000,
            vl: 99,
            seq: 0,
            app: 0,
            sample_seq: 0,
            values: vec![],
        };
        let events = events_from_trace(&[line], &config);
        let frame = decode_frame(&events[0].raw).unwrap();
        assert_eq!(frame.vl_id, VlId(99));
        assert_eq!(frame.source_partition, PartitionId(0));
    }
}
