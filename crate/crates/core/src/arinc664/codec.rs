//! Frame byte layout and CRC.
//!
//! Layout (all multi-byte integers big-endian):
//!
//! ```text
//! bytes 0..4    constant prefix 03 00 00 00
//! bytes 4..6    vl_id
//! byte  6       source partition
//! byte  7       app_id
//! bytes 8..10   sample_seq
//! bytes 10..18  sample timestamp, microseconds
//! byte  18      value_count
//! bytes 19..    value_count IEEE-754 doubles
//! ...           zero padding up to the 64-byte minimum
//! byte  N-5     vl_seq
//! bytes N-4..N  CRC-32 over bytes 0..N-4
//! ```
//!
//! The CRC is the IEEE 802.3 polynomial (0x04C11DB7 reflected), init and
//! final XOR all-ones. Decoding checks the CRC before interpreting any
//! field, so a flipped bit anywhere in the frame reports `BadCrc` rather
//! than a structural error.

use thiserror::Error;

use super::{VirtualLinkConfig, VlId};
use crate::arinc653::{AppId, AppSample, PartitionId};

/// Shortest legal frame: runt frames are rejected before any parsing.
pub const FRAME_MIN_BYTES: usize = 64;

const PREFIX: [u8; 4] = [0x03, 0x00, 0x00, 0x00];
const HEADER_BYTES: usize = 19;
/// vl_seq byte plus the four CRC bytes.
const TRAILER_BYTES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame of {len} bytes is shorter than the {FRAME_MIN_BYTES}-byte minimum")]
    TooShort { len: usize },
    #[error("frame CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    BadCrc { stored: u32, computed: u32 },
    #[error("unrecognized frame layout: {0}")]
    UnknownLayout(String),
    #[error("encoded frame needs {needed} bytes, above the {max}-byte limit")]
    FrameTooLarge { needed: usize, max: usize },
}

/// Decoded frame content. Transport timestamps live on the enclosing wire
/// event, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub vl_id: VlId,
    pub vl_seq: u8,
    pub source_partition: PartitionId,
    pub sample: AppSample,
}

// Table for the reflected IEEE polynomial, built at compile time.
const CRC_POLY_REFLECTED: u32 = 0xEDB8_8320;
const CRC_TABLE: [u32; 256] = crc_table();

const fn crc_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                CRC_POLY_REFLECTED ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

/// CRC-32 as used in the frame trailer (table-driven).
pub fn frame_crc(data: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in data {
        c = CRC_TABLE[((c ^ u32::from(b)) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

fn frame_len(value_count: usize) -> usize {
    (HEADER_BYTES + 8 * value_count + TRAILER_BYTES).max(FRAME_MIN_BYTES)
}

/// Encodes one sample for a link. Fails only when the payload cannot fit
/// within the link's `max_frame_size`.
pub fn encode_frame(
    sample: &AppSample,
    vl: &VirtualLinkConfig,
    vl_seq: u8,
) -> Result<Vec<u8>, CodecError> {
    let needed = frame_len(sample.values.len());
    if needed > usize::from(vl.max_frame_size) || sample.values.len() > 255 {
        return Err(CodecError::FrameTooLarge {
            needed,
            max: usize::from(vl.max_frame_size),
        });
    }
    let mut raw = vec![0u8; needed];
    raw[0..4].copy_from_slice(&PREFIX);
    raw[4..6].copy_from_slice(&vl.vl_id.0.to_be_bytes());
    raw[6] = vl.source_partition.0;
    raw[7] = sample.app.0;
    raw[8..10].copy_from_slice(&sample.sample_seq.to_be_bytes());
    raw[10..18].copy_from_slice(&sample.timestamp_us.to_be_bytes());
    raw[18] = sample.values.len() as u8;
    for (i, v) in sample.values.iter().enumerate() {
        let at = HEADER_BYTES + 8 * i;
        raw[at..at + 8].copy_from_slice(&v.to_bits().to_be_bytes());
    }
    let n = raw.len();
    raw[n - 5] = vl_seq;
    seal(&mut raw);
    Ok(raw)
}

/// Recomputes and stores the trailer CRC; used after any in-place edit of
/// the frame body.
pub(crate) fn seal(raw: &mut [u8]) {
    let n = raw.len();
    let crc = frame_crc(&raw[..n - 4]);
    raw[n - 4..].copy_from_slice(&crc.to_be_bytes());
}

/// Decodes a raw frame. Checks, in order: minimum length, CRC, prefix,
/// length consistency with the value count, and zero padding.
pub fn decode_frame(raw: &[u8]) -> Result<Frame, CodecError> {
    let n = raw.len();
    if n < FRAME_MIN_BYTES {
        return Err(CodecError::TooShort { len: n });
    }
    let stored = u32::from_be_bytes(raw[n - 4..].try_into().unwrap());
    let computed = frame_crc(&raw[..n - 4]);
    if stored != computed {
        return Err(CodecError::BadCrc { stored, computed });
    }
    if raw[0..4] != PREFIX {
        return Err(CodecError::UnknownLayout(format!(
            "prefix {:02x} {:02x} {:02x} {:02x}",
            raw[0], raw[1], raw[2], raw[3]
        )));
    }
    let value_count = usize::from(raw[18]);
    if frame_len(value_count) != n {
        return Err(CodecError::UnknownLayout(format!(
            "{n}-byte frame cannot hold {value_count} values"
        )));
    }
    let values_end = HEADER_BYTES + 8 * value_count;
    if raw[values_end..n - TRAILER_BYTES].iter().any(|&b| b != 0) {
        return Err(CodecError::UnknownLayout("nonzero padding".to_string()));
    }
    let mut values = Vec::with_capacity(value_count);
    for i in 0..value_count {
        let at = HEADER_BYTES + 8 * i;
        values.push(f64::from_bits(u64::from_be_bytes(
            raw[at..at + 8].try_into().unwrap(),
        )));
    }
    Ok(Frame {
        vl_id: VlId(u16::from_be_bytes(raw[4..6].try_into().unwrap())),
        vl_seq: raw[n - 5],
        source_partition: PartitionId(raw[6]),
        sample: AppSample {
            app: AppId(raw[7]),
            sample_seq: u16::from_be_bytes(raw[8..10].try_into().unwrap()),
            timestamp_us: u64::from_be_bytes(raw[10..18].try_into().unwrap()),
            values,
        },
    })
}

/// VL id straight from the header bytes, without validating the frame.
/// Used to attribute malformed frames and to count per-VL stream positions.
pub fn peek_vl(raw: &[u8]) -> Option<VlId> {
    if raw.len() < 6 {
        return None;
    }
    Some(VlId(u16::from_be_bytes(raw[4..6].try_into().unwrap())))
}

/// Adds `delta` to the stored value at `value_index` and reseals the CRC.
/// The frame must already decode cleanly.
pub fn patch_value(raw: &mut [u8], value_index: usize, delta: f64) -> Result<(), CodecError> {
    let frame = decode_frame(raw)?;
    if value_index >= frame.sample.values.len() {
        return Err(CodecError::UnknownLayout(format!(
            "value index {value_index} out of range ({} values)",
            frame.sample.values.len()
        )));
    }
    let at = HEADER_BYTES + 8 * value_index;
    let new = frame.sample.values[value_index] + delta;
    raw[at..at + 8].copy_from_slice(&new.to_bits().to_be_bytes());
    seal(raw);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arinc653::PartitionId;

    /// Bit-at-a-time CRC, kept deliberately separate from the table route.
    fn crc_bitwise(data: &[u8]) -> u32 {
        let mut c = 0xFFFF_FFFFu32;
        for &b in data {
            c ^= u32::from(b);
            for _ in 0..8 {
                c = if c & 1 != 0 {
                    (c >> 1) ^ 0xEDB8_8320
                } else {
                    c >> 1
                };
            }
        }
        !c
    }

    fn vl(max_frame_size: u16) -> VirtualLinkConfig {
        VirtualLinkConfig {
            vl_id: VlId(2),
            bag_ms: 4,
            max_frame_size,
            max_jitter_us: 500,
            source_partition: PartitionId(2),
            destinations: vec!["cpm2".to_string()],
        }
    }

    fn speed_sample() -> AppSample {
        AppSample {
            app: AppId::SPEED,
            sample_seq: 7,
            timestamp_us: 100_000,
            values: vec![100.15],
        }
    }

    #[test]
    fn crc_matches_the_standard_check_value() {
        assert_eq!(frame_crc(b"123456789"), 0xCBF43926);
        assert_eq!(crc_bitwise(b"123456789"), 0xCBF43926);
    }

    #[test]
    fn table_and_bitwise_crc_agree() {
        let mut data = Vec::new();
        for i in 0..257u32 {
            data.push((i.wrapping_mul(37) & 0xFF) as u8);
            assert_eq!(frame_crc(&data), crc_bitwise(&data));
        }
    }

    #[test]
    fn single_value_frame_has_documented_layout() {
        let raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        assert_eq!(raw.len(), 64);
        assert_eq!(&raw[0..4], &[0x03, 0x00, 0x00, 0x00]);
        assert_eq!(&raw[4..6], &[0x00, 0x02]);
        assert_eq!(raw[6], 2);
        assert_eq!(raw[7], 2);
        assert_eq!(&raw[8..10], &[0x00, 0x07]);
        assert_eq!(raw[18], 1);
        assert_eq!(raw[59], 1); // vl_seq just before the CRC
        let crc = u32::from_be_bytes(raw[60..64].try_into().unwrap());
        assert_eq!(crc, crc_bitwise(&raw[..60]));
    }

    #[test]
    fn decode_recovers_every_field() {
        let sample = AppSample {
            app: AppId::GPS,
            sample_seq: 65_535,
            timestamp_us: u64::MAX / 3,
            values: vec![48.8566, 2.3522],
        };
        let raw = encode_frame(&sample, &vl(1518), 42).unwrap();
        let frame = decode_frame(&raw).unwrap();
        assert_eq!(frame.vl_id, VlId(2));
        assert_eq!(frame.vl_seq, 42);
        assert_eq!(frame.source_partition, PartitionId(2));
        assert_eq!(frame.sample, sample);
    }

    #[test]
    fn reencoding_a_decoded_frame_is_byte_identical() {
        let raw = encode_frame(&speed_sample(), &vl(1518), 9).unwrap();
        let frame = decode_frame(&raw).unwrap();
        let again = encode_frame(&frame.sample, &vl(1518), frame.vl_seq).unwrap();
        assert_eq!(raw, again);
    }

    #[test]
    fn oversized_payload_is_rejected() {
        let sample = AppSample {
            app: AppId::GPS,
            sample_seq: 0,
            timestamp_us: 0,
            values: vec![0.0; 198], // 19 + 1584 + 5 bytes, over any legal limit
        };
        match encode_frame(&sample, &vl(1518), 1) {
            Err(CodecError::FrameTooLarge { needed, max }) => {
                assert_eq!(needed, 1608);
                assert_eq!(max, 1518);
            }
            other => panic!("expected FrameTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn runt_frame_is_too_short() {
        let raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        assert_eq!(
            decode_frame(&raw[..63]),
            Err(CodecError::TooShort { len: 63 })
        );
    }

    #[test]
    fn any_flipped_bit_is_a_crc_error() {
        let raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        for byte in [0usize, 5, 18, 25, 59, 60, 63] {
            let mut bad = raw.clone();
            bad[byte] ^= 0x10;
            assert!(
                matches!(decode_frame(&bad), Err(CodecError::BadCrc { .. })),
                "flip in byte {byte} must fail the CRC check"
            );
        }
    }

    #[test]
    fn wrong_prefix_with_a_valid_crc_is_unknown_layout() {
        let mut raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        raw[0] = 0x04;
        seal(&mut raw);
        assert!(matches!(
            decode_frame(&raw),
            Err(CodecError::UnknownLayout(_))
        ));
    }

    #[test]
    fn nonzero_padding_with_a_valid_crc_is_unknown_layout() {
        let mut raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        raw[40] = 0xAA; // inside the padding region for a 1-value frame
        seal(&mut raw);
        assert!(matches!(
            decode_frame(&raw),
            Err(CodecError::UnknownLayout(_))
        ));
    }

    #[test]
    fn patch_value_changes_one_value_and_reseals() {
        let mut raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        patch_value(&mut raw, 0, 50.0).unwrap();
        let frame = decode_frame(&raw).unwrap();
        assert!((frame.sample.values[0] - 150.15).abs() < 1e-12);
    }

    #[test]
    fn peek_vl_reads_the_header_even_on_corrupt_frames() {
        let mut raw = encode_frame(&speed_sample(), &vl(1518), 1).unwrap();
        raw[30] ^= 0xFF;
        assert_eq!(peek_vl(&raw), Some(VlId(2)));
        assert_eq!(peek_vl(&[0u8; 4]), None);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_preserves_fields(
            app in 0u8..=255,
            sample_seq: u16,
            timestamp_us: u64,
            vl_seq: u8,
            values in proptest::collection::vec(
                proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 1..=3),
        ) {
            let sample = AppSample {
                app: AppId(app),
                sample_seq,
                timestamp_us,
                values,
            };
            let raw = encode_frame(&sample, &vl(1518), vl_seq).unwrap();
            proptest::prop_assert_eq!(raw.len(), 64);
            let frame = decode_frame(&raw).unwrap();
            proptest::prop_assert_eq!(&frame.sample, &sample);
            proptest::prop_assert_eq!(frame.vl_seq, vl_seq);
            let again = encode_frame(&frame.sample, &vl(1518), frame.vl_seq).unwrap();
            proptest::prop_assert_eq!(raw, again);
        }
    }
}
