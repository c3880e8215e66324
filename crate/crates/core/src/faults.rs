//! Deterministic fault injection on the wire-event stream.
//!
//! Faults are positional: each one names its victim by VL (or application)
//! and occurrence index, so the same scenario always perturbs the same
//! frames. Every frame that is not targeted passes through byte-identical.
//!
//! `ScheduleShift` is the one exception to the stream model: it rewrites
//! partition window offsets in the configuration before the transmitter
//! runs (see [`shift_schedule`]), because a schedule change alters what
//! the frames are, not how they travel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arinc653::{AppId, AppSample, MajorFrame, PartitionId};
use crate::arinc664::{
    decode_frame, encode_frame, patch_value, peek_vl, VirtualLinkConfig, VlId, WireEvent,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    /// The scenario names a frame, sample, partition, or byte that the
    /// stream does not contain. A scenario configuration error, not a
    /// simulation failure.
    #[error("fault target not found: {0}")]
    TargetNotFound(String),
}

/// One fault. `nth` and `nth_sample` count from 1 over the whole run, in
/// stream order, against the stream as previous faults left it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultSpec {
    /// Remove the nth frame of the VL.
    Drop { vl: VlId, nth: u32 },
    /// Add `delta_us` to the nth frame's arrival time.
    Delay { vl: VlId, nth: u32, delta_us: u64 },
    /// Insert a byte-identical copy immediately after the nth frame.
    Duplicate { vl: VlId, nth: u32 },
    /// Add `delta` to one payload value of the nth sample of an
    /// application and reseal the CRC: the frame stays valid on the wire
    /// and only the data checks can catch it.
    CorruptValue {
        app: AppId,
        nth_sample: u32,
        value_index: usize,
        delta: f64,
    },
    /// XOR one raw byte without touching the CRC: transport corruption.
    CorruptBits {
        vl: VlId,
        nth: u32,
        byte_index: usize,
        xor_mask: u8,
    },
    /// Inject minimal valid frames on a VL of the attacker's choosing at
    /// the given absolute times.
    RogueVl { vl_id: VlId, times_us: Vec<u64> },
    /// Shift every window of the partition by `delta_us` (wrapping around
    /// the MAF). Applied to the configuration, not the stream.
    ScheduleShift { partition: PartitionId, delta_us: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub name: String,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    /// Reserved for randomized campaigns; current faults are positional
    /// and ignore it.
    #[serde(default)]
    pub seed: u64,
}

impl FaultScenario {
    /// The stream-level part of the scenario is empty (identity).
    pub fn is_stream_identity(&self) -> bool {
        self.faults
            .iter()
            .all(|f| matches!(f, FaultSpec::ScheduleShift { .. }))
    }
}

/// Index of the event carrying the nth (1-based) frame of `vl`, judged by
/// the VL id bytes alone so already-corrupted frames still count.
fn find_nth_vl(events: &[WireEvent], vl: VlId, nth: u32) -> Result<usize, FaultError> {
    let mut seen = 0u32;
    for (i, ev) in events.iter().enumerate() {
        if peek_vl(&ev.raw) == Some(vl) {
            seen += 1;
            if seen == nth {
                return Ok(i);
            }
        }
    }
    Err(FaultError::TargetNotFound(format!(
        "stream has {seen} frames on {vl}, fault wants occurrence {nth}"
    )))
}

/// Index of the event carrying the nth (1-based) decodable sample of `app`.
fn find_nth_sample(events: &[WireEvent], app: AppId, nth: u32) -> Result<usize, FaultError> {
    let mut seen = 0u32;
    for (i, ev) in events.iter().enumerate() {
        if let Ok(frame) = decode_frame(&ev.raw) {
            if frame.sample.app == app {
                seen += 1;
                if seen == nth {
                    return Ok(i);
                }
            }
        }
    }
    Err(FaultError::TargetNotFound(format!(
        "stream has {seen} samples of {app}, fault wants occurrence {nth}"
    )))
}

fn rogue_frame(vl: VlId, t_us: u64) -> WireEvent {
    let sample = AppSample {
        app: AppId(0),
        sample_seq: 0,
        timestamp_us: t_us,
        values: Vec::new(),
    };
    let link = VirtualLinkConfig {
        vl_id: vl,
        bag_ms: 1,
        max_frame_size: 1518,
        max_jitter_us: 0,
        source_partition: PartitionId(0),
        destinations: Vec::new(),
    };
    let raw = encode_frame(&sample, &link, 0).expect("empty payload fits any frame");
    WireEvent {
        t_emit_us: t_us,
        t_arrive_us: t_us,
        raw,
    }
}

/// Applies the stream-level faults of a scenario in order and returns the
/// perturbed stream, re-sorted by arrival time (stable, so equal-time
/// events keep their relative order). `ScheduleShift` entries are skipped
/// here; the harness applies them to the configuration first.
pub fn apply_scenario(
    events: &[WireEvent],
    scenario: &FaultScenario,
) -> Result<Vec<WireEvent>, FaultError> {
    let mut out: Vec<WireEvent> = events.to_vec();
    for fault in &scenario.faults {
        match fault {
            FaultSpec::Drop { vl, nth } => {
                let i = find_nth_vl(&out, *vl, *nth)?;
                out.remove(i);
            }
            FaultSpec::Delay { vl, nth, delta_us } => {
                let i = find_nth_vl(&out, *vl, *nth)?;
                out[i].t_arrive_us += delta_us;
            }
            FaultSpec::Duplicate { vl, nth } => {
                let i = find_nth_vl(&out, *vl, *nth)?;
                let copy = out[i].clone();
                out.insert(i + 1, copy);
            }
            FaultSpec::CorruptValue {
                app,
                nth_sample,
                value_index,
                delta,
            } => {
                let i = find_nth_sample(&out, *app, *nth_sample)?;
                patch_value(&mut out[i].raw, *value_index, *delta).map_err(|e| {
                    FaultError::TargetNotFound(format!(
                        "cannot patch value {value_index} of sample {nth_sample} of {app}: {e}"
                    ))
                })?;
            }
            FaultSpec::CorruptBits {
                vl,
                nth,
                byte_index,
                xor_mask,
            } => {
                let i = find_nth_vl(&out, *vl, *nth)?;
                let raw = &mut out[i].raw;
                if *byte_index >= raw.len() {
                    return Err(FaultError::TargetNotFound(format!(
                        "byte {byte_index} outside {}-byte frame on {vl}",
                        raw.len()
                    )));
                }
                raw[*byte_index] ^= xor_mask;
            }
            FaultSpec::RogueVl { vl_id, times_us } => {
                for &t in times_us {
                    out.push(rogue_frame(*vl_id, t));
                }
            }
            FaultSpec::ScheduleShift { .. } => {}
        }
    }
    out.sort_by_key(|ev| ev.t_arrive_us);
    Ok(out)
}

/// Applies a `ScheduleShift` to the major frame in place: each window of
/// the partition moves by `delta_us` modulo the MAF.
pub fn shift_schedule(
    mf: &mut MajorFrame,
    partition: PartitionId,
    delta_us: i64,
) -> Result<(), FaultError> {
    let maf = mf.maf_us as i64;
    let mut hit = false;
    for w in &mut mf.windows {
        if w.partition == partition {
            hit = true;
            w.offset_us = (w.offset_us as i64 + delta_us).rem_euclid(maf) as u64;
        }
    }
    if hit {
        Ok(())
    } else {
        Err(FaultError::TargetNotFound(format!(
            "no window belongs to {partition}"
        )))
    }
}

/// Applies every `ScheduleShift` in the scenario to the major frame.
pub fn apply_schedule_shifts(
    mf: &mut MajorFrame,
    scenario: &FaultScenario,
) -> Result<(), FaultError> {
    for fault in &scenario.faults {
        if let FaultSpec::ScheduleShift { partition, delta_us } = fault {
            shift_schedule(mf, *partition, *delta_us)?;
        }
    }
    Ok(())
}
