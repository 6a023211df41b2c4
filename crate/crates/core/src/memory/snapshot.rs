//! `HEBM` binary snapshot of an [`EpisodicMemory`].
//!
//! Layout (all integers little-endian):
//! magic `HEBM`, version `u16`, dim `u32`, capacity tag `u8` (0 unbounded,
//! 1 ring buffer) followed by its size `u64`, entry count `u64`, then each
//! entry as `seq u64`, `value u32`, `dim` x `f64` key components.

use std::collections::{BTreeMap, VecDeque};

use super::{Capacity, EpisodicMemory, MemoryEntry};
use crate::codec::{Decoder, Encoder};
use crate::error::DecodeError;
use crate::scalar::Real;

pub const MEMORY_MAGIC: &[u8; 4] = b"HEBM";

const TAG_UNBOUNDED: u8 = 0;
const TAG_RING: u8 = 1;

impl<T: Real> EpisodicMemory<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_header(MEMORY_MAGIC);
        enc.u32(u32::try_from(self.dim).expect("dim fits u32"));
        match self.capacity {
            Capacity::Unbounded => {
                enc.u8(TAG_UNBOUNDED);
                enc.u64(0);
            }
            Capacity::RingBuffer(m) => {
                enc.u8(TAG_RING);
                enc.u64(m as u64);
            }
        }
        enc.u64(self.entries.len() as u64);
        for entry in &self.entries {
            enc.u64(entry.seq);
            enc.u32(u32::try_from(entry.value).expect("class id fits u32"));
            for &x in &entry.key {
                enc.f64(x.as_f64());
            }
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::with_header(bytes, MEMORY_MAGIC)?;
        let dim = dec.u32()? as usize;
        if dim == 0 {
            return Err(DecodeError::Invalid("dim must be positive".into()));
        }
        let tag = dec.u8()?;
        let size = dec.u64()?;
        let capacity = match tag {
            TAG_UNBOUNDED => Capacity::Unbounded,
            TAG_RING if size > 0 => Capacity::RingBuffer(size as usize),
            TAG_RING => return Err(DecodeError::Invalid("ring buffer size 0".into())),
            other => {
                return Err(DecodeError::Invalid(format!(
                    "unknown capacity tag {other}"
                )))
            }
        };
        let count = dec.u64()?;
        if let Capacity::RingBuffer(m) = capacity {
            if count > m as u64 {
                return Err(DecodeError::Invalid(format!(
                    "{count} entries exceed ring buffer size {m}"
                )));
            }
        }
        // each entry needs at least 12 + 8*dim bytes; reject absurd counts early
        let entry_bytes = 12 + 8 * dim as u64;
        if count.saturating_mul(entry_bytes) > dec.remaining() as u64 {
            return Err(DecodeError::Truncated {
                offset: bytes.len() - dec.remaining(),
                needed: (count.saturating_mul(entry_bytes) - dec.remaining() as u64) as usize,
            });
        }

        let mut entries = VecDeque::with_capacity(count as usize);
        let mut class_counts = BTreeMap::new();
        let mut last_seq: Option<u64> = None;
        for _ in 0..count {
            let seq = dec.u64()?;
            if last_seq.is_some_and(|prev| seq <= prev) {
                return Err(DecodeError::Invalid(
                    "sequence numbers not increasing".into(),
                ));
            }
            last_seq = Some(seq);
            let value = dec.u32()? as usize;
            let mut key = Vec::with_capacity(dim);
            for _ in 0..dim {
                let x = dec.f64()?;
                if !x.is_finite() {
                    return Err(DecodeError::Invalid("non-finite key component".into()));
                }
                key.push(T::lit(x));
            }
            *class_counts.entry(value).or_insert(0) += 1;
            entries.push_back(MemoryEntry { key, value, seq });
        }
        dec.finish()?;

        Ok(EpisodicMemory {
            dim,
            capacity,
            entries,
            class_counts,
            next_seq: last_seq.map_or(0, |s| s + 1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EpisodicMemory<f64> {
        let mut m = EpisodicMemory::new(3, Capacity::RingBuffer(4)).unwrap();
        for i in 0..6 {
            m.write(&[i as f64, -0.5, 1e-300], i % 3).unwrap();
        }
        m
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"HEBM");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(bytes[10], TAG_RING);
        assert_eq!(u64::from_le_bytes(bytes[11..19].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[19..27].try_into().unwrap()), 4);
        assert_eq!(bytes.len(), 27 + 4 * (8 + 4 + 3 * 8));
    }

    #[test]
    fn round_trip_preserves_next_seq() {
        let m = sample();
        let back = EpisodicMemory::<f64>::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.next_seq(), 6);
    }

    #[test]
    fn empty_round_trip() {
        let m = EpisodicMemory::<f64>::unbounded(5).unwrap();
        let back = EpisodicMemory::<f64>::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_header() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EpisodicMemory::<f64>::from_bytes(&bytes),
            Err(DecodeError::BadMagic { .. })
        ));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        assert_eq!(
            EpisodicMemory::<f64>::from_bytes(&bytes),
            Err(DecodeError::UnsupportedVersion {
                found: 9,
                supported: 1
            })
        );
    }

    #[test]
    fn truncated_stream() {
        let bytes = sample().to_bytes();
        for cut in [3, 10, 30, bytes.len() - 1] {
            assert!(
                matches!(
                    EpisodicMemory::<f64>::from_bytes(&bytes[..cut]),
                    Err(DecodeError::Truncated { .. })
                ),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn trailing_garbage() {
        let mut bytes = sample().to_bytes();
        bytes.push(0);
        assert_eq!(
            EpisodicMemory::<f64>::from_bytes(&bytes),
            Err(DecodeError::TrailingBytes(1))
        );
    }
}
