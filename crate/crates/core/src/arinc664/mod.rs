//! Virtual links: configuration, frame codec, BAG regulation, and routing.
//!
//! Each transmitting partition owns one virtual link (VL). Encoded samples
//! queue in the VL's end-system backlog and leave through the regulator,
//! which spaces emissions by at least the bandwidth allocation gap (BAG).
//! The switch forwards frames by VL id according to a static routing table;
//! a tap also delivers a copy of everything to the monitor.

mod codec;
mod regulator;

pub use codec::{
    decode_frame, encode_frame, frame_crc, patch_value, peek_vl, CodecError, Frame,
    FRAME_MIN_BYTES,
};
pub use regulator::{RegulatedEmission, VlRegulator};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arinc653::PartitionId;

/// Virtual link identifier, carried in bytes 4..6 of the frame.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VlId(pub u16);

impl std::fmt::Display for VlId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VL{}", self.0)
    }
}

/// Allowed bandwidth allocation gaps, in milliseconds (powers of two).
pub const ALLOWED_BAG_MS: [u8; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

/// Static description of one virtual link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLinkConfig {
    pub vl_id: VlId,
    /// Bandwidth allocation gap in milliseconds; must be one of
    /// [`ALLOWED_BAG_MS`].
    pub bag_ms: u8,
    /// Largest frame the link accepts, bytes, within 64..=1518.
    pub max_frame_size: u16,
    /// Receive jitter tolerated past the nominal arrival, microseconds.
    pub max_jitter_us: u64,
    pub source_partition: PartitionId,
    /// Receiving endpoint names; never empty.
    pub destinations: Vec<String>,
}

impl VirtualLinkConfig {
    pub fn bag_us(&self) -> u64 {
        u64::from(self.bag_ms) * 1000
    }
}

/// A frame on the wire: the encoded bytes plus transport timestamps. The
/// tap hands these to the monitor unmodified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireEvent {
    pub t_emit_us: u64,
    pub t_arrive_us: u64,
    pub raw: Vec<u8>,
}

/// Next value of the per-VL sequence counter: increments and wraps from 255
/// back to 1; the value 0 is reserved to mark a transmitter reset.
pub fn next_sequence(n: u8) -> u8 {
    match n {
        0 => 1,
        255 => 1,
        n => n + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("no route for {0}")]
    UnknownVl(VlId),
}

/// Static switch routing table: VL id to destination endpoints.
#[derive(Debug, Clone, Default)]
pub struct RoutingTable {
    routes: BTreeMap<VlId, Vec<String>>,
}

impl RoutingTable {
    pub fn from_links(links: &[VirtualLinkConfig]) -> Self {
        RoutingTable {
            routes: links
                .iter()
                .map(|l| (l.vl_id, l.destinations.clone()))
                .collect(),
        }
    }

    /// Destination endpoints for a VL, or `UnknownVl` for unconfigured ids.
    pub fn route(&self, vl: VlId) -> Result<&[String], RouteError> {
        self.routes
            .get(&vl)
            .map(|d| d.as_slice())
            .ok_or(RouteError::UnknownVl(vl))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_increments_and_wraps_skipping_zero() {
        assert_eq!(next_sequence(1), 2);
        assert_eq!(next_sequence(254), 255);
        assert_eq!(next_sequence(255), 1);
        assert_eq!(next_sequence(0), 1);
    }

    proptest::proptest! {
        #[test]
        fn sequence_is_never_zero_and_stays_in_band(start: u8, steps in 1usize..600) {
            let mut s = start;
            for _ in 0..steps {
                s = next_sequence(s);
                proptest::prop_assert!((1..=255).contains(&s));
            }
        }
    }

    #[test]
    fn routing_fans_out_and_rejects_unknown() {
        let links = vec![VirtualLinkConfig {
            vl_id: VlId(7),
            bag_ms: 4,
            max_frame_size: 1518,
            max_jitter_us: 500,
            source_partition: crate::arinc653::PartitionId(1),
            destinations: vec!["cpm2".to_string(), "cpm3".to_string()],
        }];
        let table = RoutingTable::from_links(&links);
        assert_eq!(table.route(VlId(7)).unwrap().len(), 2);
        assert_eq!(table.route(VlId(9)), Err(RouteError::UnknownVl(VlId(9))));
    }
}
