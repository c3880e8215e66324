//! Time-partitioned execution: major frame schedule, inter-partition ports,
//! and the deterministic application sample generators.
//!
//! A major frame (MAF) of fixed duration is tiled with partition windows;
//! the schedule repeats forever. Applications exchange data through queuing
//! ports (bounded FIFO) or sampling ports (single overwritable slot whose
//! reads do not consume). Each application owns a kinematic generator that
//! advances with constant configured rates and stamps samples with the
//! generation time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Partition identifier; small integers, carried in the frame header.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PartitionId(pub u8);

impl std::fmt::Display for PartitionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Application identifier, also the `app_id` byte of the frame payload.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AppId(pub u8);

impl AppId {
    pub const GPS: AppId = AppId(1);
    pub const SPEED: AppId = AppId(2);
    pub const ANGLE: AppId = AppId(3);
}

impl std::fmt::Display for AppId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "app{}", self.0)
    }
}

// ---------------------------------------------------------------------------
// Major frame schedule
// ---------------------------------------------------------------------------

/// One execution window inside the major frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionWindow {
    pub partition: PartitionId,
    pub offset_us: u64,
    pub duration_us: u64,
}

impl PartitionWindow {
    pub fn end_us(&self) -> u64 {
        self.offset_us + self.duration_us
    }
}

/// The repeating major frame: total duration plus its windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorFrame {
    pub maf_us: u64,
    pub windows: Vec<PartitionWindow>,
}

/// A single problem found by [`validate_major_frame`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("major frame duration must be positive")]
    EmptyMajorFrame,
    #[error("window {index} for {partition} has zero duration")]
    EmptyWindow { index: usize, partition: PartitionId },
    #[error("window {index} for {partition} ends at {end_us} us, past the major frame ({maf_us} us)")]
    OutOfRange {
        index: usize,
        partition: PartitionId,
        end_us: u64,
        maf_us: u64,
    },
    #[error("windows {first} and {second} overlap ({a} and {b})")]
    Overlap {
        first: usize,
        second: usize,
        a: PartitionId,
        b: PartitionId,
    },
    #[error("partition {0} is declared but appears in no window")]
    AbsentPartition(PartitionId),
}

/// Checks the schedule invariants: positive MAF, non-empty windows inside
/// the MAF, pairwise disjoint windows, and every declared partition present
/// in at least one window. Returns every violation found, not just the
/// first; an empty vector means the schedule is valid.
pub fn validate_major_frame(
    mf: &MajorFrame,
    declared: &[PartitionId],
) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    if mf.maf_us == 0 {
        out.push(ScheduleViolation::EmptyMajorFrame);
    }
    for (i, w) in mf.windows.iter().enumerate() {
        if w.duration_us == 0 {
            out.push(ScheduleViolation::EmptyWindow {
                index: i,
                partition: w.partition,
            });
        } else if w.end_us() > mf.maf_us {
            out.push(ScheduleViolation::OutOfRange {
                index: i,
                partition: w.partition,
                end_us: w.end_us(),
                maf_us: mf.maf_us,
            });
        }
    }
    let mut by_offset: Vec<usize> = (0..mf.windows.len()).collect();
    by_offset.sort_by_key(|&i| mf.windows[i].offset_us);
    for pair in by_offset.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let (a, b) = (&mf.windows[i], &mf.windows[j]);
        if a.duration_us > 0 && b.duration_us > 0 && a.end_us() > b.offset_us {
            out.push(ScheduleViolation::Overlap {
                first: i,
                second: j,
                a: a.partition,
                b: b.partition,
            });
        }
    }
    for &p in declared {
        if !mf.windows.iter().any(|w| w.partition == p) {
            out.push(ScheduleViolation::AbsentPartition(p));
        }
    }
    out
}

/// The partition executing at absolute time `t_us`, if any. The schedule
/// repeats with the MAF period; gaps between windows return `None`.
pub fn active_partition(mf: &MajorFrame, t_us: u64) -> Option<PartitionId> {
    if mf.maf_us == 0 {
        return None;
    }
    let t = t_us % mf.maf_us;
    mf.windows
        .iter()
        .find(|w| t >= w.offset_us && t < w.end_us())
        .map(|w| w.partition)
}

// ---------------------------------------------------------------------------
// Inter-partition ports
// ---------------------------------------------------------------------------

/// A message sample produced by an application. `values` is the decoded
/// payload (for example `[lat, lon]` for the GPS application).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSample {
    pub app: AppId,
    pub sample_seq: u16,
    pub timestamp_us: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PortError {
    #[error("queuing port `{port}` is full (capacity {capacity})")]
    QueueFull { port: String, capacity: usize },
}

/// Port discipline plus its buffered state.
#[derive(Debug, Clone)]
pub enum PortKind {
    /// Bounded FIFO; sends to a full queue fail, receives consume.
    Queuing {
        capacity: usize,
        queue: VecDeque<AppSample>,
    },
    /// Single slot; sends overwrite, receives do not consume.
    Sampling { slot: Option<AppSample> },
}

/// An ARINC 653 communication port.
#[derive(Debug, Clone)]
pub struct Port653 {
    pub name: String,
    pub kind: PortKind,
}

impl Port653 {
    pub fn queuing(name: impl Into<String>, capacity: usize) -> Self {
        Port653 {
            name: name.into(),
            kind: PortKind::Queuing {
                capacity,
                queue: VecDeque::with_capacity(capacity),
            },
        }
    }

    pub fn sampling(name: impl Into<String>) -> Self {
        Port653 {
            name: name.into(),
            kind: PortKind::Sampling { slot: None },
        }
    }

    /// Writes one message. Queuing ports append and fail when full;
    /// sampling ports overwrite unconditionally.
    pub fn send(&mut self, msg: AppSample) -> Result<(), PortError> {
        match &mut self.kind {
            PortKind::Queuing { capacity, queue } => {
                if queue.len() >= *capacity {
                    return Err(PortError::QueueFull {
                        port: self.name.clone(),
                        capacity: *capacity,
                    });
                }
                queue.push_back(msg);
                Ok(())
            }
            PortKind::Sampling { slot } => {
                *slot = Some(msg);
                Ok(())
            }
        }
    }

    /// Reads one message, or `None` when nothing is available. Queuing
    /// ports pop the oldest entry; sampling ports return a copy of the
    /// current slot without consuming it.
    pub fn receive(&mut self) -> Option<AppSample> {
        match &mut self.kind {
            PortKind::Queuing { queue, .. } => queue.pop_front(),
            PortKind::Sampling { slot } => slot.clone(),
        }
    }

    /// Messages currently buffered (1 or 0 for sampling ports).
    pub fn len(&self) -> usize {
        match &self.kind {
            PortKind::Queuing { queue, .. } => queue.len(),
            PortKind::Sampling { slot } => usize::from(slot.is_some()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// ---------------------------------------------------------------------------
// Application sample generators
// ---------------------------------------------------------------------------

/// Meters of one degree of latitude, used for the flat-earth position step.
const METERS_PER_DEG: f64 = 111_320.0;

/// Constant-rate parameters for a generator, as configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub speed_mps: f64,
    pub heading_deg: f64,
    /// Acceleration applied every step, m/s^2.
    pub accel_mps2: f64,
    /// Heading change, degrees per second.
    pub turn_rate_deg_s: f64,
    /// Speed ceiling; keeps long runs inside the configured plausibility
    /// laws. No ceiling when absent.
    #[serde(default)]
    pub max_speed_mps: Option<f64>,
}

/// Deterministic kinematic state for one application. Successive calls to
/// [`AppGeneratorState::generate`] advance the state by the elapsed time at
/// the configured constant rates and emit the sample for that instant.
#[derive(Debug, Clone)]
pub struct AppGeneratorState {
    pub app: AppId,
    params: GeneratorParams,
    sample_seq: u16,
    last_t_us: Option<u64>,
    lat_deg: f64,
    lon_deg: f64,
    speed_mps: f64,
    heading_deg: f64,
}

impl AppGeneratorState {
    pub fn new(app: AppId, params: GeneratorParams) -> Self {
        AppGeneratorState {
            app,
            lat_deg: params.lat_deg,
            lon_deg: params.lon_deg,
            speed_mps: params.speed_mps,
            heading_deg: params.heading_deg.rem_euclid(360.0),
            params,
            sample_seq: 0,
            last_t_us: None,
        }
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn heading_deg(&self) -> f64 {
        self.heading_deg
    }

    pub fn position_deg(&self) -> (f64, f64) {
        (self.lat_deg, self.lon_deg)
    }

    /// Advances the kinematics by the time elapsed since the previous sample
    /// (zero for the first) and returns the sample stamped with `t_us`.
    /// Values per application: GPS `[lat, lon]`, speed `[v]`, angle
    /// `[heading]`; unknown app ids get the full triple-state `[lat, lon]`
    /// fallback of the GPS layout.
    pub fn generate(&mut self, t_us: u64) -> AppSample {
        let dt_s = match self.last_t_us {
            Some(last) => (t_us.saturating_sub(last)) as f64 / 1e6,
            None => 0.0,
        };
        self.last_t_us = Some(t_us);

        self.speed_mps += self.params.accel_mps2 * dt_s;
        if let Some(cap) = self.params.max_speed_mps {
            self.speed_mps = self.speed_mps.min(cap);
        }
        self.heading_deg =
            (self.heading_deg + self.params.turn_rate_deg_s * dt_s).rem_euclid(360.0);
        let heading_rad = self.heading_deg.to_radians();
        self.lat_deg += self.speed_mps * heading_rad.cos() * dt_s / METERS_PER_DEG;
        self.lon_deg += self.speed_mps * heading_rad.sin() * dt_s
            / (METERS_PER_DEG * self.lat_deg.to_radians().cos());

        let values = match self.app {
            AppId::SPEED => vec![self.speed_mps],
            AppId::ANGLE => vec![self.heading_deg],
            _ => vec![self.lat_deg, self.lon_deg],
        };
        let sample = AppSample {
            app: self.app,
            sample_seq: self.sample_seq,
            timestamp_us: t_us,
            values,
        };
        self.sample_seq = self.sample_seq.wrapping_add(1);
        sample
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mf(maf_us: u64, windows: &[(u8, u64, u64)]) -> MajorFrame {
        MajorFrame {
            maf_us,
            windows: windows
                .iter()
                .map(|&(p, offset_us, duration_us)| PartitionWindow {
                    partition: PartitionId(p),
                    offset_us,
                    duration_us,
                })
                .collect(),
        }
    }

    fn params() -> GeneratorParams {
        GeneratorParams {
            lat_deg: 48.0,
            lon_deg: 2.0,
            speed_mps: 100.0,
            heading_deg: 90.0,
            accel_mps2: 0.5,
            turn_rate_deg_s: 5.0,
            max_speed_mps: None,
        }
    }

    #[test]
    fn tiled_schedule_validates_clean() {
        let m = mf(300_000, &[(1, 0, 100_000), (2, 100_000, 100_000), (3, 200_000, 100_000)]);
        let declared = [PartitionId(1), PartitionId(2), PartitionId(3)];
        assert!(validate_major_frame(&m, &declared).is_empty());
    }

    #[test]
    fn overlap_and_out_of_range_are_both_reported() {
        let m = mf(300_000, &[(1, 0, 150_000), (2, 100_000, 100_000), (3, 250_000, 100_000)]);
        let declared = [PartitionId(1), PartitionId(2), PartitionId(3), PartitionId(4)];
        let violations = validate_major_frame(&m, &declared);
        assert!(violations
            .iter()
            .any(|v| matches!(v, ScheduleViolation::Overlap { .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, ScheduleViolation::OutOfRange { .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, ScheduleViolation::AbsentPartition(PartitionId(4)))));
    }

    #[test]
    fn active_partition_is_modular_in_time() {
        let m = mf(300_000, &[(1, 0, 100_000), (2, 100_000, 100_000), (3, 200_000, 100_000)]);
        assert_eq!(active_partition(&m, 0), Some(PartitionId(1)));
        assert_eq!(active_partition(&m, 99_999), Some(PartitionId(1)));
        assert_eq!(active_partition(&m, 100_000), Some(PartitionId(2)));
        // One full MAF later the same window is active.
        assert_eq!(active_partition(&m, 450_000), Some(PartitionId(2)));
    }

    #[test]
    fn slack_in_the_frame_has_no_active_partition() {
        let m = mf(300_000, &[(1, 0, 100_000), (2, 150_000, 100_000)]);
        assert_eq!(active_partition(&m, 120_000), None);
        assert_eq!(active_partition(&m, 260_000), None);
    }

    fn sample(seq: u16) -> AppSample {
        AppSample {
            app: AppId::SPEED,
            sample_seq: seq,
            timestamp_us: 0,
            values: vec![0.0],
        }
    }

    #[test]
    fn queuing_port_is_fifo_and_bounded() {
        let mut port = Port653::queuing("q", 2);
        port.send(sample(1)).unwrap();
        port.send(sample(2)).unwrap();
        assert_eq!(
            port.send(sample(3)),
            Err(PortError::QueueFull {
                port: "q".to_string(),
                capacity: 2
            })
        );
        assert_eq!(port.receive().unwrap().sample_seq, 1);
        assert_eq!(port.receive().unwrap().sample_seq, 2);
        assert_eq!(port.receive(), None);
    }

    #[test]
    fn sampling_port_overwrites_and_reads_do_not_consume() {
        let mut port = Port653::sampling("s");
        assert_eq!(port.receive(), None);
        port.send(sample(1)).unwrap();
        port.send(sample(2)).unwrap();
        assert_eq!(port.receive().unwrap().sample_seq, 2);
        // Still there: sampling reads are non-destructive.
        assert_eq!(port.receive().unwrap().sample_seq, 2);
        assert_eq!(port.len(), 1);
    }

    #[test]
    fn queue_conservation_under_interleaved_traffic() {
        let mut port = Port653::queuing("q", 8);
        let mut sent = 0u32;
        let mut received = 0u32;
        let mut rejected = 0u32;
        for i in 0..100u16 {
            if port.send(sample(i)).is_ok() {
                sent += 1;
            } else {
                rejected += 1;
            }
            if i % 3 == 0 && port.receive().is_some() {
                received += 1;
            }
        }
        assert_eq!(sent as usize - received as usize, port.len());
        assert_eq!(sent + rejected, 100);
    }

    #[test]
    fn speed_sample_advances_linearly() {
        let mut state = AppGeneratorState::new(AppId::SPEED, params());
        let first = state.generate(0);
        assert_eq!(first.values, vec![100.0]); // dt = 0 on the first sample
        let second = state.generate(300_000);
        assert!((second.values[0] - 100.15).abs() < 1e-12);
        assert_eq!(second.sample_seq, 1);
        assert_eq!(second.timestamp_us, 300_000);
    }

    #[test]
    fn heading_wraps_at_360() {
        let mut p = params();
        p.heading_deg = 359.0;
        let mut state = AppGeneratorState::new(AppId::ANGLE, p);
        state.generate(0);
        let s = state.generate(300_000); // +5 deg/s * 0.3 s = +1.5 deg
        assert!((s.values[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_elapsed_time_leaves_values_unchanged_but_counts() {
        let mut state = AppGeneratorState::new(AppId::SPEED, params());
        let a = state.generate(1_000);
        let b = state.generate(1_000);
        assert_eq!(a.values, b.values);
        assert_eq!(b.sample_seq, a.sample_seq + 1);
    }

    #[test]
    fn sample_seq_wraps_to_zero() {
        let mut state = AppGeneratorState::new(AppId::SPEED, params());
        state.sample_seq = 65_535;
        assert_eq!(state.generate(0).sample_seq, 65_535);
        assert_eq!(state.generate(0).sample_seq, 0);
    }

    #[test]
    fn gps_position_follows_heading() {
        let mut p = params();
        p.turn_rate_deg_s = 0.0;
        p.accel_mps2 = 0.0;
        p.heading_deg = 90.0; // due east: lon grows, lat still
        let mut state = AppGeneratorState::new(AppId::GPS, p);
        let first = state.generate(0);
        let second = state.generate(1_000_000); // 1 s at 100 m/s
        let dlat = second.values[0] - first.values[0];
        let dlon = second.values[1] - first.values[1];
        assert!(dlat.abs() < 1e-9);
        let expected_dlon = 100.0 / (METERS_PER_DEG * 48.0f64.to_radians().cos());
        assert!((dlon - expected_dlon).abs() < 1e-9);
    }

    #[test]
    fn speed_ceiling_caps_acceleration() {
        let mut p = params();
        p.max_speed_mps = Some(101.0);
        let mut state = AppGeneratorState::new(AppId::SPEED, p);
        state.generate(0);
        let s = state.generate(10_000_000); // +5 m/s without the cap
        assert_eq!(s.values, vec![101.0]);
    }
}
