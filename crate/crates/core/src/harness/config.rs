//! Configuration schema and validation.
//!
//! Validation reports every violation it can find in one pass, not just
//! the first: a configuration author fixes the whole list at once.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arinc653::{
    validate_major_frame, AppId, GeneratorParams, MajorFrame, PartitionId,
};
use crate::arinc664::{VirtualLinkConfig, VlId, ALLOWED_BAG_MS};
use crate::faults::FaultScenario;
use crate::monitor::VariationLaw;

/// Which ARINC 653 port a partition writes its samples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortKindConfig {
    Queuing,
    Sampling,
}

fn default_port_kind() -> PortKindConfig {
    PortKindConfig::Queuing
}

fn default_queue_capacity() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub partition: PartitionId,
    pub app: AppId,
    #[serde(default = "default_port_kind")]
    pub port: PortKindConfig,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    pub generator: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub major_frame: MajorFrame,
    pub partitions: Vec<PartitionConfig>,
    pub virtual_links: Vec<VirtualLinkConfig>,
    #[serde(default)]
    pub laws: Vec<VariationLaw>,
    pub prop_delay_us: u64,
    pub run_mafs: u64,
    #[serde(default)]
    pub scenario: Option<FaultScenario>,
}

impl SystemConfig {
    /// Stable identifier of this exact configuration (structure, values,
    /// and scenario): the first 16 hex digits of the SHA-256 of its
    /// canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hex_prefix(&hash, 16)
    }

    pub fn link_for_partition(&self, p: PartitionId) -> Option<&VirtualLinkConfig> {
        self.virtual_links.iter().find(|l| l.source_partition == p)
    }
}

fn hex_prefix(bytes: &[u8], digits: usize) -> String {
    let mut s = String::with_capacity(digits);
    for b in bytes {
        use std::fmt::Write;
        write!(s, "{b:02x}").expect("write to String");
        if s.len() >= digits {
            break;
        }
    }
    s.truncate(digits);
    s
}

#[derive(Debug)]
pub enum ConfigError {
    Parse(serde_json::Error),
    /// Every violation found, not just the first.
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "configuration does not parse: {e}"),
            ConfigError::Invalid(violations) => {
                let n = violations.len();
                let noun = if n == 1 { "problem" } else { "problems" };
                writeln!(f, "configuration invalid ({n} {noun}):")?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses and cross-validates a configuration document.
pub fn load_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let config: SystemConfig = serde_json::from_str(text).map_err(ConfigError::Parse)?;
    let violations = validate_config(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

fn validate_config(config: &SystemConfig) -> Vec<String> {
    let mut out = Vec::new();

    let declared: Vec<PartitionId> = config.partitions.iter().map(|p| p.partition).collect();
    for (i, p) in config.partitions.iter().enumerate() {
        if declared[..i].contains(&p.partition) {
            out.push(format!("{} declared more than once", p.partition));
        }
    }
    for v in validate_major_frame(&config.major_frame, &declared) {
        out.push(v.to_string());
    }

    let mut seen_vl: Vec<VlId> = Vec::new();
    for l in &config.virtual_links {
        if l.vl_id == VlId(0) {
            out.push("vl_id 0 is reserved for unattributable frames".to_string());
        }
        if seen_vl.contains(&l.vl_id) {
            out.push(format!("{} declared more than once", l.vl_id));
        }
        seen_vl.push(l.vl_id);
        if !ALLOWED_BAG_MS.contains(&l.bag_ms) {
            out.push(format!(
                "{}: bag must be one of 1,2,4,8,16,32,64,128 ms, got {}",
                l.vl_id, l.bag_ms
            ));
        }
        if !declared.contains(&l.source_partition) {
            out.push(format!(
                "{}: unknown partition {}",
                l.vl_id, l.source_partition
            ));
        }
        if (l.max_frame_size as usize) < crate::arinc664::FRAME_MIN_BYTES {
            out.push(format!(
                "{}: max_frame_size {} below the {}-byte frame minimum",
                l.vl_id,
                l.max_frame_size,
                crate::arinc664::FRAME_MIN_BYTES
            ));
        }
    }

    let produced: Vec<AppId> = config.partitions.iter().map(|p| p.app).collect();
    let mut seen_law: Vec<AppId> = Vec::new();
    for law in &config.laws {
        if seen_law.contains(&law.app) {
            out.push(format!("more than one law for {}", law.app));
        }
        seen_law.push(law.app);
        if !produced.contains(&law.app) {
            out.push(format!("law for {} but no partition produces it", law.app));
        }
        for (i, v) in law.values.iter().enumerate() {
            if v.min > v.max {
                out.push(format!(
                    "law for {} value {i}: min {} > max {}",
                    law.app, v.min, v.max
                ));
            }
            if v.max_rate_per_s < 0.0 {
                out.push(format!(
                    "law for {} value {i}: negative max_rate_per_s",
                    law.app
                ));
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline_text() -> String {
        std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/baseline.json"
        ))
        .expect("baseline fixture present")
    }

    #[test]
    fn baseline_fixture_loads() {
        let config = load_config(&baseline_text()).unwrap();
        assert_eq!(config.major_frame.maf_us, 300_000);
        assert_eq!(config.partitions.len(), 3);
        assert_eq!(config.virtual_links.len(), 3);
        assert_eq!(config.laws.len(), 3);
        assert_eq!(config.prop_delay_us, 100);
        assert_eq!(config.run_mafs, 100);
        assert!(config.scenario.is_none());
        assert_eq!(config.partitions[0].port, PortKindConfig::Queuing);
        assert_eq!(config.partitions[0].queue_capacity, 8);
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let config = load_config(&baseline_text()).unwrap();
        let d1 = config.digest();
        let d2 = config.digest();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 16);
        assert!(d1.chars().all(|c| c.is_ascii_hexdigit()));
        let mut other = config.clone();
        other.run_mafs += 1;
        assert_ne!(other.digest(), d1);
    }

    #[test]
    fn bad_bag_unknown_partition_and_overlap_all_reported_together() {
        let mut config = load_config(&baseline_text()).unwrap();
        config.virtual_links[0].bag_ms = 3;
        config.virtual_links[1].source_partition = PartitionId(9);
        config.major_frame.windows[2].offset_us = 50_000; // overlaps window 1
        let text = serde_json::to_string(&config).unwrap();
        match load_config(&text) {
            Err(ConfigError::Invalid(violations)) => {
                assert!(violations.iter().any(|v| v.contains("bag must be one of")), "{violations:?}");
                assert!(violations.iter().any(|v| v.contains("unknown partition")), "{violations:?}");
                assert!(violations.iter().any(|v| v.contains("overlap")), "{violations:?}");
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn law_for_unproduced_app_is_rejected() {
        let mut config = load_config(&baseline_text()).unwrap();
        config.laws[0].app = AppId(9);
        let text = serde_json::to_string(&config).unwrap();
        match load_config(&text) {
            Err(ConfigError::Invalid(violations)) => {
                assert!(violations.iter().any(|v| v.contains("no partition produces")));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_is_distinct_from_validation() {
        assert!(matches!(load_config("{not json"), Err(ConfigError::Parse(_))));
    }
}
