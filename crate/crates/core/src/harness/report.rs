//! Run reports.
//!
//! The report is the run's single artifact: what was simulated, what the
//! monitor found, and the verdict. Serialization is canonical (fixed key
//! order, anomalies in detection order) so identical runs produce
//! byte-identical files.

use serde::{Deserialize, Serialize};

use crate::monitor::{Anomaly, AnomalyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub kind: AnomalyKind,
    pub vl: u16,
    pub t: u64,
    pub detail: String,
}

impl From<&Anomaly> for AnomalyRecord {
    fn from(a: &Anomaly) -> Self {
        AnomalyRecord {
            kind: a.kind,
            vl: a.vl.0,
            t: a.t_us,
            detail: a.detail(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnomalyCounts {
    pub missing: u64,
    pub unexpected: u64,
    pub incoherent: u64,
    pub sequence: u64,
}

impl AnomalyCounts {
    pub fn total(&self) -> u64 {
        self.missing + self.unexpected + self.incoherent + self.sequence
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_digest: String,
    pub mafs: u64,
    pub frames_emitted: u64,
    pub frames_received: u64,
    pub anomalies: Vec<AnomalyRecord>,
    pub counts: AnomalyCounts,
    pub verdict: Verdict,
}

impl Report {
    /// Assembles a report; counts and verdict derive from the anomaly
    /// list, so `verdict == Pass` exactly when the list is empty.
    pub fn new(
        config_digest: String,
        mafs: u64,
        frames_emitted: u64,
        frames_received: u64,
        anomalies: &[Anomaly],
    ) -> Self {
        let mut counts = AnomalyCounts::default();
        for a in anomalies {
            match a.kind {
                AnomalyKind::MissingData => counts.missing += 1,
                AnomalyKind::UnexpectedComm => counts.unexpected += 1,
                AnomalyKind::IncoherentData => counts.incoherent += 1,
                AnomalyKind::SequenceError => counts.sequence += 1,
            }
        }
        let verdict = if anomalies.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Report {
            config_digest,
            mafs,
            frames_emitted,
            frames_received,
            anomalies: anomalies.iter().map(AnomalyRecord::from).collect(),
            counts,
            verdict,
        }
    }
}

/// Canonical JSON rendering, newline-terminated.
pub fn emit_report(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}
