//! Switch-resident traffic monitor.
//!
//! The monitor holds a model of the traffic the configuration should
//! produce (see [`model`]) and compares the frames it actually sees
//! against it, one MAF at a time. Every discrepancy becomes an
//! [`Anomaly`] with one of four kinds:
//!
//! * [`AnomalyKind::MissingData`]: an expected arrival window closed with
//!   no frame in it.
//! * [`AnomalyKind::UnexpectedComm`]: a frame that should not exist as
//!   observed. Unknown VL, arrival outside every open window, more frames
//!   than the MAF expects, malformed bytes, or inter-VL arrival order
//!   violations all land here.
//! * [`AnomalyKind::IncoherentData`]: payload values that break the
//!   configured variation laws.
//! * [`AnomalyKind::SequenceError`]: a gap or replay in the per-VL
//!   sequence numbers.
//!
//! The temporal and order checks reset at each MAF boundary. Sequence
//! tracking and the per-application data windows deliberately persist
//! across MAFs: a gap across a boundary is still a gap.

mod model;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arinc653::AppId;
use crate::arinc664::{decode_frame, peek_vl, Frame, VlId, WireEvent};

pub use model::{
    build_expected_model, ExpectedEmission, ExpectedTrafficModel, ModelError, VlExpectation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyKind {
    MissingData,
    UnexpectedComm,
    IncoherentData,
    SequenceError,
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnomalyKind::MissingData => "MissingData",
            AnomalyKind::UnexpectedComm => "UnexpectedComm",
            AnomalyKind::IncoherentData => "IncoherentData",
            AnomalyKind::SequenceError => "SequenceError",
        };
        f.write_str(s)
    }
}

/// Why the monitor raised an anomaly. Rendered into the report's `detail`
/// string; kept structured so tests can match on fields instead of text.
#[derive(Debug, Clone, PartialEq)]
pub enum AnomalyCause {
    /// An arrival window closed without a frame.
    MissedWindow { earliest_us: u64, latest_us: u64 },
    /// A frame arrived while windows are still open for its VL, but inside
    /// none of them.
    OutsideWindow {
        nearest_earliest_us: u64,
        nearest_latest_us: u64,
    },
    /// All expected frames of the MAF were already seen.
    ExcessFrame { expected_per_maf: usize },
    /// The VL is not part of the configuration.
    UnknownVl,
    /// The frame arrived ahead of VLs that should have preceded it.
    OrderViolation { expected_next: Option<VlId> },
    /// The bytes did not decode as a frame.
    Malformed { reason: String },
    /// Sequence number skipped ahead (lost frames) or fell behind
    /// (replayed frames).
    SequenceBreak {
        expected: u8,
        observed: u8,
        gap: u8,
    },
    /// Consecutive samples moved faster than the law allows.
    RateViolation {
        app: AppId,
        value_index: usize,
        observed_per_s: f64,
        allowed_per_s: f64,
    },
    /// A sample value left the configured range.
    OutOfBounds {
        app: AppId,
        value_index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
}

impl fmt::Display for AnomalyCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnomalyCause::MissedWindow {
                earliest_us,
                latest_us,
            } => write!(
                f,
                "no frame in expected arrival window [{earliest_us}, {latest_us}] us"
            ),
            AnomalyCause::OutsideWindow {
                nearest_earliest_us,
                nearest_latest_us,
            } => write!(
                f,
                "arrival outside every open window, nearest \
                 [{nearest_earliest_us}, {nearest_latest_us}] us"
            ),
            AnomalyCause::ExcessFrame { expected_per_maf } => write!(
                f,
                "frame beyond the {expected_per_maf} expected this major frame"
            ),
            AnomalyCause::UnknownVl => f.write_str("frame on a virtual link absent from the configuration"),
            AnomalyCause::OrderViolation { expected_next } => match expected_next {
                Some(vl) => write!(f, "arrival order violation, {vl} was expected first"),
                None => f.write_str("arrival order violation, no further arrivals were expected"),
            },
            AnomalyCause::Malformed { reason } => write!(f, "malformed frame: {reason}"),
            AnomalyCause::SequenceBreak {
                expected,
                observed,
                gap,
            } => write!(
                f,
                "sequence break: expected {expected}, observed {observed} (gap {gap})"
            ),
            AnomalyCause::RateViolation {
                app,
                value_index,
                observed_per_s,
                allowed_per_s,
            } => write!(
                f,
                "{app} value {value_index} moved {observed_per_s:.6}/s, law allows {allowed_per_s:.6}/s"
            ),
            AnomalyCause::OutOfBounds {
                app,
                value_index,
                value,
                min,
                max,
            } => write!(
                f,
                "{app} value {value_index} = {value:.6} outside [{min:.6}, {max:.6}]"
            ),
        }
    }
}

/// One monitor finding. `vl` is the affected virtual link, or `VL0` when
/// the frame was too damaged to attribute. `t_us` is the detection time:
/// the arrival for frame-triggered checks, the MAF boundary for flushes.
#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub vl: VlId,
    pub t_us: u64,
    pub cause: AnomalyCause,
}

impl Anomaly {
    pub fn detail(&self) -> String {
        self.cause.to_string()
    }
}

/// Per-value constraint of a variation law.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValueLaw {
    pub max_rate_per_s: f64,
    pub min: f64,
    pub max: f64,
    /// Compare consecutive values on the shortest arc of a 360-degree
    /// circle instead of by plain subtraction.
    #[serde(default)]
    pub angular: bool,
}

fn default_window_n() -> usize {
    8
}

fn default_epsilon() -> f64 {
    1e-9
}

/// Plausibility rules for one application's payload.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VariationLaw {
    pub app: AppId,
    /// Samples retained per application for the pairwise comparison.
    #[serde(default = "default_window_n")]
    pub window_n: usize,
    /// Slack added to the rate bound to absorb floating-point noise.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub values: Vec<ValueLaw>,
}

/// Signed shortest-arc difference `b - a` in degrees, in [-180, 180).
pub fn angular_diff_deg(a: f64, b: f64) -> f64 {
    (b - a + 180.0).rem_euclid(360.0) - 180.0
}

/// What the monitor consumes, in arrival-time order. MAF boundaries are
/// explicit events so the monitor never guesses where a MAF ends.
#[derive(Debug, Clone)]
pub enum MonitorEvent {
    Arrival(WireEvent),
    /// End of the MAF whose boundary lies at the contained time.
    MafEnd(u64),
}

struct AppWindow {
    samples: VecDeque<(u64, Vec<f64>)>,
}

/// The monitor itself. Feed it [`MonitorEvent`]s in time order and collect
/// the anomalies each event produces.
pub struct Monitor {
    model: ExpectedTrafficModel,
    laws: Vec<VariationLaw>,
    /// MAF count the transmitter was asked to run; arrivals after this
    /// many boundaries are excess traffic, and no windows are expected.
    expected_mafs: u64,
    current_maf: u64,
    consumed: Vec<Vec<bool>>,
    order_cursor: usize,
    last_seq: BTreeMap<VlId, u8>,
    windows: BTreeMap<AppId, AppWindow>,
    diagnostics: Vec<String>,
    apps_without_law: Vec<AppId>,
}

impl Monitor {
    pub fn new(model: ExpectedTrafficModel, mut laws: Vec<VariationLaw>, expected_mafs: u64) -> Self {
        laws.sort_by_key(|l| l.app);
        let consumed = model
            .vls
            .iter()
            .map(|v| vec![false; v.emissions.len()])
            .collect();
        Monitor {
            model,
            laws,
            expected_mafs,
            current_maf: 0,
            consumed,
            order_cursor: 0,
            last_seq: BTreeMap::new(),
            windows: BTreeMap::new(),
            diagnostics: Vec::new(),
            apps_without_law: Vec::new(),
        }
    }

    /// One-time notes that are not anomalies, e.g. applications with no
    /// configured law.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn ingest(&mut self, event: MonitorEvent) -> Vec<Anomaly> {
        match event {
            MonitorEvent::MafEnd(t) => self.flush_maf(t),
            MonitorEvent::Arrival(ev) => match decode_frame(&ev.raw) {
                Err(e) => vec![Anomaly {
                    kind: AnomalyKind::UnexpectedComm,
                    vl: peek_vl(&ev.raw).unwrap_or(VlId(0)),
                    t_us: ev.t_arrive_us,
                    cause: AnomalyCause::Malformed {
                        reason: e.to_string(),
                    },
                }],
                Ok(frame) => {
                    let mut out = self.check_temporal(ev.t_arrive_us, frame.vl_id);
                    out.extend(self.check_sequence(ev.t_arrive_us, frame.vl_id, frame.vl_seq));
                    out.extend(self.check_data(ev.t_arrive_us, &frame));
                    out
                }
            },
        }
    }

    /// Arrival-window accounting plus the inter-VL order check.
    fn check_temporal(&mut self, t_arrive_us: u64, vl: VlId) -> Vec<Anomaly> {
        let Some(vi) = self.model.vl_index(vl) else {
            return vec![Anomaly {
                kind: AnomalyKind::UnexpectedComm,
                vl,
                t_us: t_arrive_us,
                cause: AnomalyCause::UnknownVl,
            }];
        };
        let mut out = Vec::new();
        let in_run = self.current_maf < self.expected_mafs;
        let maf_start = self.current_maf * self.model.maf_us;
        let exp = &self.model.vls[vi];

        let mut matched = None;
        if in_run {
            for (k, em) in exp.emissions.iter().enumerate() {
                if self.consumed[vi][k] {
                    continue;
                }
                let earliest = maf_start + em.earliest_arrival_us;
                let latest = maf_start + em.latest_arrival_us;
                if (earliest..=latest).contains(&t_arrive_us) {
                    matched = Some(k);
                    break;
                }
            }
        }
        match matched {
            Some(k) => self.consumed[vi][k] = true,
            None => {
                // Distinguish "a window is still open somewhere else" from
                // "this MAF's quota is spent".
                let nearest = if in_run {
                    exp.emissions
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| !self.consumed[vi][*k])
                        .map(|(_, em)| {
                            (
                                maf_start + em.earliest_arrival_us,
                                maf_start + em.latest_arrival_us,
                            )
                        })
                        .min_by_key(|&(earliest, latest)| {
                            if t_arrive_us < earliest {
                                earliest - t_arrive_us
                            } else {
                                t_arrive_us.saturating_sub(latest)
                            }
                        })
                } else {
                    None
                };
                let cause = match nearest {
                    Some((nearest_earliest_us, nearest_latest_us)) => AnomalyCause::OutsideWindow {
                        nearest_earliest_us,
                        nearest_latest_us,
                    },
                    None => AnomalyCause::ExcessFrame {
                        expected_per_maf: if in_run { exp.emissions.len() } else { 0 },
                    },
                };
                out.push(Anomaly {
                    kind: AnomalyKind::UnexpectedComm,
                    vl,
                    t_us: t_arrive_us,
                    cause,
                });
            }
        }

        if in_run {
            // Forward scan: skipping entries is allowed (a dropped frame
            // must not flag the frames after it), but the VL has to appear
            // somewhere ahead of the cursor.
            match self.model.order[self.order_cursor..]
                .iter()
                .position(|&(v, _)| v == vl)
            {
                Some(p) => self.order_cursor += p + 1,
                None => out.push(Anomaly {
                    kind: AnomalyKind::UnexpectedComm,
                    vl,
                    t_us: t_arrive_us,
                    cause: AnomalyCause::OrderViolation {
                        expected_next: self
                            .model
                            .order
                            .get(self.order_cursor)
                            .map(|&(v, _)| v),
                    },
                }),
            }
        }
        out
    }

    /// Per-VL sequence continuity. Senders start at 1, so the first frame
    /// on a VL must carry 1; zero re-synchronizes (a reset sender). After
    /// an error the observed value becomes the new reference, so one loss
    /// is reported once, not echoed by every later frame.
    fn check_sequence(&mut self, t_arrive_us: u64, vl: VlId, seq: u8) -> Option<Anomaly> {
        let prev = self.last_seq.insert(vl, seq);
        if seq == 0 {
            return None;
        }
        let expected = crate::arinc664::next_sequence(prev.unwrap_or(0));
        if seq == expected {
            return None;
        }
        // Distance around the 1..=255 ring from the expected value to the
        // observed one; 254 means the previous frame came again.
        let gap = (seq as i32 - expected as i32).rem_euclid(255) as u8;
        Some(Anomaly {
            kind: AnomalyKind::SequenceError,
            vl,
            t_us: t_arrive_us,
            cause: AnomalyCause::SequenceBreak {
                expected,
                observed: seq,
                gap,
            },
        })
    }

    /// Payload plausibility against the application's variation law:
    /// bounds on every value, then rate between the two newest samples of
    /// the per-application window.
    fn check_data(&mut self, t_arrive_us: u64, frame: &Frame) -> Vec<Anomaly> {
        let app = frame.sample.app;
        let Ok(law_idx) = self.laws.binary_search_by_key(&app, |l| l.app) else {
            if !self.apps_without_law.contains(&app) {
                self.apps_without_law.push(app);
                self.diagnostics
                    .push(format!("no variation law configured for {app}; data checks skipped"));
            }
            return Vec::new();
        };
        let law = &self.laws[law_idx];
        let mut out = Vec::new();
        for (i, (&value, vlaw)) in frame
            .sample
            .values
            .iter()
            .zip(law.values.iter())
            .enumerate()
        {
            if value < vlaw.min || value > vlaw.max {
                out.push(Anomaly {
                    kind: AnomalyKind::IncoherentData,
                    vl: frame.vl_id,
                    t_us: t_arrive_us,
                    cause: AnomalyCause::OutOfBounds {
                        app,
                        value_index: i,
                        value,
                        min: vlaw.min,
                        max: vlaw.max,
                    },
                });
            }
        }

        let window = self
            .windows
            .entry(app)
            .or_insert_with(|| AppWindow {
                samples: VecDeque::new(),
            });
        window
            .samples
            .push_back((frame.sample.timestamp_us, frame.sample.values.clone()));
        while window.samples.len() > law.window_n.max(2) {
            window.samples.pop_front();
        }
        if window.samples.len() >= 2 {
            let (t0, v0) = &window.samples[window.samples.len() - 2];
            let (t1, v1) = &window.samples[window.samples.len() - 1];
            // Absolute: a delayed frame can present an older sample.
            let dt_s = t1.abs_diff(*t0) as f64 / 1e6;
            for (i, ((&a, &b), vlaw)) in v0
                .iter()
                .zip(v1.iter())
                .zip(law.values.iter())
                .enumerate()
            {
                let diff = if vlaw.angular {
                    angular_diff_deg(a, b)
                } else {
                    b - a
                };
                if diff.abs() > vlaw.max_rate_per_s * dt_s + law.epsilon {
                    let observed_per_s = if dt_s > 0.0 {
                        diff.abs() / dt_s
                    } else {
                        f64::INFINITY
                    };
                    out.push(Anomaly {
                        kind: AnomalyKind::IncoherentData,
                        vl: frame.vl_id,
                        t_us: t_arrive_us,
                        cause: AnomalyCause::RateViolation {
                            app,
                            value_index: i,
                            observed_per_s,
                            allowed_per_s: vlaw.max_rate_per_s,
                        },
                    });
                }
            }
        }
        out
    }

    /// Close the current MAF: every unconsumed window is missing data.
    /// Temporal state resets; sequence and data state persist.
    fn flush_maf(&mut self, boundary_us: u64) -> Vec<Anomaly> {
        let mut out = Vec::new();
        if self.current_maf < self.expected_mafs {
            let maf_start = self.current_maf * self.model.maf_us;
            for (vi, exp) in self.model.vls.iter().enumerate() {
                for (k, em) in exp.emissions.iter().enumerate() {
                    if !self.consumed[vi][k] {
                        out.push(Anomaly {
                            kind: AnomalyKind::MissingData,
                            vl: exp.vl,
                            t_us: boundary_us,
                            cause: AnomalyCause::MissedWindow {
                                earliest_us: maf_start + em.earliest_arrival_us,
                                latest_us: maf_start + em.latest_arrival_us,
                            },
                        });
                    }
                }
            }
        }
        for maf_consumed in &mut self.consumed {
            maf_consumed.fill(false);
        }
        self.order_cursor = 0;
        self.current_maf += 1;
        out
    }
}
