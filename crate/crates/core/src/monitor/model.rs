//! Expected-traffic model.
//!
//! Built from the same configuration the transmitter runs: partition
//! windows produce one sample per activation, samples leave through the
//! BAG regulator, and every frame needs `prop_delay` to reach the switch.
//! The build replays that pipeline symbolically, MAF by MAF, until the
//! per-MAF emission pattern repeats, and freezes the repeating pattern as
//! the expectation. Configurations whose pattern never stabilizes, or whose
//! arrival windows spill past their own MAF, cannot be monitored with
//! per-MAF bookkeeping and are rejected.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::arinc653::MajorFrame;
use crate::arinc664::{VirtualLinkConfig, VlId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("configuration cannot meet its own schedule: {0}")]
    InfeasibleConfig(String),
}

/// One expected frame per MAF: when it nominally leaves the end system and
/// the absolute arrival window at the monitor, all as offsets from the MAF
/// start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedEmission {
    pub nominal_emit_us: u64,
    pub earliest_arrival_us: u64,
    pub latest_arrival_us: u64,
}

/// All expected emissions of one VL within a MAF, in time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlExpectation {
    pub vl: VlId,
    pub emissions: Vec<ExpectedEmission>,
}

/// The monitor's reference: per-VL arrival windows plus the expected
/// inter-VL arrival order, repeating every MAF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedTrafficModel {
    pub maf_us: u64,
    /// Sorted by VL id.
    pub vls: Vec<VlExpectation>,
    /// `(vl, occurrence)` sorted by nominal arrival time, ties by VL id.
    pub order: Vec<(VlId, u32)>,
}

impl ExpectedTrafficModel {
    pub fn vl_index(&self, vl: VlId) -> Option<usize> {
        self.vls.binary_search_by_key(&vl, |e| e.vl).ok()
    }

    pub fn frames_per_maf(&self, vl: VlId) -> usize {
        self.vl_index(vl)
            .map(|i| self.vls[i].emissions.len())
            .unwrap_or(0)
    }

    /// Total expected frames per MAF across all VLs.
    pub fn total_per_maf(&self) -> usize {
        self.vls.iter().map(|v| v.emissions.len()).sum()
    }
}

/// Upper bound on the MAFs replayed while waiting for the emission pattern
/// to repeat. One MAF of start-up transient is typical; anything that has
/// not settled after this many is diverging.
const SETTLE_MAFS: u64 = 4;

/// Replays the transmit pipeline symbolically and freezes the repeating
/// per-MAF pattern. See the module docs for the rejection rules.
pub fn build_expected_model(
    mf: &MajorFrame,
    links: &[VirtualLinkConfig],
    prop_delay_us: u64,
) -> Result<ExpectedTrafficModel, ModelError> {
    let mut link_of_partition: BTreeMap<u8, &VirtualLinkConfig> = BTreeMap::new();
    for l in links {
        link_of_partition.insert(l.source_partition.0, l);
    }
    let mut windows = mf.windows.clone();
    windows.sort_by_key(|w| w.offset_us);

    // last emission per VL, absolute microseconds
    let mut last: BTreeMap<VlId, u64> = BTreeMap::new();
    let mut prev_pattern: Option<BTreeMap<VlId, Vec<u64>>> = None;
    let mut settled: Option<BTreeMap<VlId, Vec<u64>>> = None;

    for maf in 0..SETTLE_MAFS {
        let maf_start = maf * mf.maf_us;
        let mut pattern: BTreeMap<VlId, Vec<u64>> = BTreeMap::new();
        for w in &windows {
            let Some(link) = link_of_partition.get(&w.partition.0) else {
                continue; // partition without a VL emits nothing
            };
            let enqueue = maf_start + w.offset_us;
            let emit = match last.get(&link.vl_id) {
                Some(&prev) => enqueue.max(prev + link.bag_us()),
                None => enqueue,
            };
            last.insert(link.vl_id, emit);
            let offset = emit - maf_start;
            let latest = offset + prop_delay_us + link.max_jitter_us;
            if latest >= mf.maf_us {
                return Err(ModelError::InfeasibleConfig(format!(
                    "{} frame enqueued at MAF offset {} us cannot arrive before the \
                     MAF boundary (latest arrival offset {} us, MAF {} us)",
                    link.vl_id, w.offset_us, latest, mf.maf_us
                )));
            }
            pattern.entry(link.vl_id).or_default().push(offset);
        }
        if prev_pattern.as_ref() == Some(&pattern) {
            settled = Some(pattern);
            break;
        }
        prev_pattern = Some(pattern);
    }
    let Some(pattern) = settled.or_else(|| {
        // Zero emitting windows settles trivially as an empty model.
        prev_pattern
            .as_ref()
            .filter(|p| p.is_empty())
            .cloned()
    }) else {
        return Err(ModelError::InfeasibleConfig(format!(
            "per-MAF emission pattern still shifting after {SETTLE_MAFS} major frames; \
             the backlog never drains to a steady state"
        )));
    };

    let mut vls: Vec<VlExpectation> = Vec::new();
    let mut order: Vec<(u64, VlId, u32)> = Vec::new();
    for (vl, offsets) in &pattern {
        let link = links
            .iter()
            .find(|l| l.vl_id == *vl)
            .expect("pattern entries come from links");
        let mut emissions = Vec::new();
        for (k, &offset) in offsets.iter().enumerate() {
            emissions.push(ExpectedEmission {
                nominal_emit_us: offset,
                earliest_arrival_us: offset + prop_delay_us,
                latest_arrival_us: offset + prop_delay_us + link.max_jitter_us,
            });
            order.push((offset + prop_delay_us, *vl, k as u32));
        }
        vls.push(VlExpectation { vl: *vl, emissions });
    }
    order.sort_by_key(|&(t, vl, k)| (t, vl, k));
    Ok(ExpectedTrafficModel {
        maf_us: mf.maf_us,
        vls,
        order: order.into_iter().map(|(_, vl, k)| (vl, k)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arinc653::{PartitionId, PartitionWindow};

    fn window(p: u8, offset_us: u64, duration_us: u64) -> PartitionWindow {
        PartitionWindow {
            partition: PartitionId(p),
            offset_us,
            duration_us,
        }
    }

    fn link(vl: u16, p: u8, bag_ms: u8, max_jitter_us: u64) -> VirtualLinkConfig {
        VirtualLinkConfig {
            vl_id: VlId(vl),
            bag_ms,
            max_frame_size: 1518,
            max_jitter_us,
            source_partition: PartitionId(p),
            destinations: vec!["cpm2".to_string()],
        }
    }

    fn three_partition_frame() -> (MajorFrame, Vec<VirtualLinkConfig>) {
        (
            MajorFrame {
                maf_us: 300_000,
                windows: vec![
                    window(1, 0, 100_000),
                    window(2, 100_000, 100_000),
                    window(3, 200_000, 100_000),
                ],
            },
            vec![link(1, 1, 4, 500), link(2, 2, 4, 500), link(3, 3, 4, 500)],
        )
    }

    #[test]
    fn one_window_per_partition_yields_window_start_arrivals() {
        let (mf, links) = three_partition_frame();
        let model = build_expected_model(&mf, &links, 100).unwrap();
        assert_eq!(model.vls.len(), 3);
        let vl2 = &model.vls[model.vl_index(VlId(2)).unwrap()];
        assert_eq!(
            vl2.emissions,
            vec![ExpectedEmission {
                nominal_emit_us: 100_000,
                earliest_arrival_us: 100_100,
                latest_arrival_us: 100_600,
            }]
        );
        assert_eq!(
            model.order,
            vec![(VlId(1), 0), (VlId(2), 0), (VlId(3), 0)]
        );
        assert_eq!(model.total_per_maf(), 3);
    }

    #[test]
    fn second_window_inside_the_bag_is_pushed_to_the_bag_boundary() {
        // Two activations 2 ms apart with a 4 ms BAG: the second frame
        // leaves at the BAG boundary, not at its window start.
        let mf = MajorFrame {
            maf_us: 300_000,
            windows: vec![window(1, 0, 1_000), window(1, 2_000, 1_000)],
        };
        let links = vec![link(1, 1, 4, 500)];
        let model = build_expected_model(&mf, &links, 100).unwrap();
        let offsets: Vec<u64> = model.vls[0]
            .emissions
            .iter()
            .map(|e| e.nominal_emit_us)
            .collect();
        assert_eq!(offsets, vec![0, 4_000]);
        assert_eq!(model.order, vec![(VlId(1), 0), (VlId(1), 1)]);
    }

    #[test]
    fn arrival_window_crossing_the_maf_boundary_is_infeasible() {
        let mf = MajorFrame {
            maf_us: 300_000,
            windows: vec![window(1, 299_950, 50)],
        };
        let links = vec![link(1, 1, 4, 500)];
        match build_expected_model(&mf, &links, 100) {
            Err(ModelError::InfeasibleConfig(detail)) => {
                assert!(detail.contains("boundary"), "unexpected detail: {detail}");
            }
            other => panic!("expected InfeasibleConfig, got {other:?}"),
        }
    }

    #[test]
    fn backlog_that_never_drains_is_infeasible() {
        // Two activations per 120 ms MAF against a 64 ms BAG need 128 ms:
        // the emission pattern drifts 8 ms later every MAF and never
        // repeats.
        let mf = MajorFrame {
            maf_us: 120_000,
            windows: vec![window(1, 0, 500), window(1, 1_000, 500)],
        };
        let links = vec![link(1, 1, 64, 0)];
        match build_expected_model(&mf, &links, 0) {
            Err(ModelError::InfeasibleConfig(detail)) => {
                assert!(detail.contains("steady"), "unexpected detail: {detail}");
            }
            other => panic!("expected InfeasibleConfig, got {other:?}"),
        }
    }

    #[test]
    fn growing_backlog_that_crosses_the_boundary_is_infeasible() {
        // Three activations per 10 ms MAF against a 4 ms BAG: by the
        // second MAF an arrival window crosses the MAF boundary.
        let mf = MajorFrame {
            maf_us: 10_000,
            windows: vec![window(1, 0, 500), window(1, 1_000, 500), window(1, 2_000, 500)],
        };
        let links = vec![link(1, 1, 4, 0)];
        assert!(matches!(
            build_expected_model(&mf, &links, 0),
            Err(ModelError::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn partitions_without_links_and_empty_frames_yield_empty_models() {
        let mf = MajorFrame {
            maf_us: 10_000,
            windows: vec![window(9, 0, 500)],
        };
        let model = build_expected_model(&mf, &[], 100).unwrap();
        assert!(model.vls.is_empty());
        assert!(model.order.is_empty());
        assert_eq!(model.frames_per_maf(VlId(1)), 0);
    }
}
