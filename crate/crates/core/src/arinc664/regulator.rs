//! Per-VL traffic shaping.
//!
//! The regulator owns the end-system backlog for one virtual link. Frames
//! are encoded into the backlog as samples arrive; emissions happen on
//! regulate calls, at most one per call, and only when the time since the
//! previous emission has reached the BAG. The emitted frame receives the
//! next sequence value at the moment it leaves, so the wire carries
//! 1, 2, ..., 255, 1, ... with no transmitter-introduced jitter beyond the
//! BAG spacing itself.

use std::collections::VecDeque;

use super::codec::{encode_frame, seal, CodecError};
use super::{next_sequence, VirtualLinkConfig};
use crate::arinc653::AppSample;

/// A frame released by the regulator, stamped with its emission time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegulatedEmission {
    pub t_emit_us: u64,
    pub vl_seq: u8,
    pub raw: Vec<u8>,
}

/// Shaping state for one virtual link.
#[derive(Debug, Clone, Default)]
pub struct VlRegulator {
    /// Encoded frames waiting for a BAG slot; sequence and CRC are
    /// finalized at emission.
    backlog: VecDeque<Vec<u8>>,
    last_emission_us: Option<u64>,
    /// Sequence value the next emission will carry.
    next_seq: u8,
}

impl VlRegulator {
    pub fn new() -> Self {
        VlRegulator {
            backlog: VecDeque::new(),
            last_emission_us: None,
            next_seq: 1,
        }
    }

    pub fn backlog_len(&self) -> usize {
        self.backlog.len()
    }

    pub fn last_emission_us(&self) -> Option<u64> {
        self.last_emission_us
    }

    /// Earliest instant a frame could leave, given the backlog and the BAG.
    /// `None` when the backlog is empty.
    pub fn next_opportunity_us(&self, vl: &VirtualLinkConfig) -> Option<u64> {
        if self.backlog.is_empty() {
            return None;
        }
        Some(match self.last_emission_us {
            None => 0,
            Some(last) => last + vl.bag_us(),
        })
    }

    /// Encodes a sample into the backlog. The stored frame carries a
    /// placeholder sequence of 0 until emission assigns the real one.
    pub fn enqueue(
        &mut self,
        sample: &AppSample,
        vl: &VirtualLinkConfig,
    ) -> Result<(), CodecError> {
        let raw = encode_frame(sample, vl, 0)?;
        self.backlog.push_back(raw);
        Ok(())
    }

    /// One regulation step at time `now_us`. Emits the oldest backlog frame
    /// if and only if the backlog is non-empty and either nothing was
    /// emitted yet or `now_us - last_emission >= bag`. Call at every point
    /// an emission could happen, after any enqueues for that instant.
    pub fn regulate(
        &mut self,
        vl: &VirtualLinkConfig,
        now_us: u64,
    ) -> Option<RegulatedEmission> {
        if self.backlog.is_empty() {
            return None;
        }
        if let Some(last) = self.last_emission_us {
            if now_us.saturating_sub(last) < vl.bag_us() {
                return None;
            }
        }
        let mut raw = self.backlog.pop_front().expect("backlog checked non-empty");
        let seq = self.next_seq;
        let n = raw.len();
        raw[n - 5] = seq;
        seal(&mut raw);
        self.next_seq = next_sequence(seq);
        self.last_emission_us = Some(now_us);
        Some(RegulatedEmission {
            t_emit_us: now_us,
            vl_seq: seq,
            raw,
        })
    }
}
