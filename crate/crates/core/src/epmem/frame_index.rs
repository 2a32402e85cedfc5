use std::ops::Range;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FIDX";

/// Sorted timestamp to log-offset index with predecessor lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameIndex {
    times: Vec<f64>,
    offsets: Vec<u64>,
}

impl FrameIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, offset: u64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::validation("frame time must be finite"));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::validation(format!(
                    "frame time {t} is not after the previous frame time {last}"
                )));
            }
        }
        self.times.push(t);
        self.offsets.push(offset);
        Ok(())
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn offset(&self, k: usize) -> u64 {
        self.offsets[k]
    }

    pub fn first(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Position of the latest frame with time ≤ `t`, and the number of key
    /// comparisons spent finding it.
    pub fn predecessor(&self, t: f64) -> (Option<usize>, usize) {
        let (mut lo, mut hi, mut probes) = (0usize, self.times.len(), 0usize);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            probes += 1;
            if self.times[mid] <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (lo.checked_sub(1), probes)
    }

    /// Positions of frames with `start ≤ t ≤ end`.
    pub fn range(&self, start: f64, end: f64) -> Range<usize> {
        let lo = self.times.partition_point(|&x| x < start);
        let hi = self.times.partition_point(|&x| x <= end);
        lo..hi.max(lo)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 16 * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (t, o) in self.times.iter().zip(&self.offsets) {
            out.extend_from_slice(&t.to_le_bytes());
            out.extend_from_slice(&o.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err("missing FIDX header".into());
        }
        let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() != n.checked_mul(16).ok_or("entry count overflows")? {
            return Err(format!("expected {n} entries, found {} bytes", body.len()));
        }
        let mut idx = FrameIndex::new();
        for chunk in body.chunks_exact(16) {
            let t = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let o = u64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
            idx.push(t, o).map_err(|e| e.to_string())?;
        }
        Ok(idx)
    }
}
