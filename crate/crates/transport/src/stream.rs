// Copyright 2026 The roq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Per-stream reliability: offset-addressed segments, cumulative
//! acknowledgements and in-order reassembly.

use std::collections::BTreeMap;

use bytes::{Bytes, BytesMut};

#[derive(Debug, Default)]
pub(crate) struct SendBuf {
    next_offset: u64,
    acked: u64,
    unacked: BTreeMap<u64, Bytes>,
}

impl SendBuf {
    /// Cuts `data` into segments of at most `max` bytes, returning each with
    /// its stream offset. Segments stay buffered until acknowledged.
    pub(crate) fn push(&mut self, data: &[u8], max: usize) -> Vec<(u64, Bytes)> {
        let mut out = Vec::with_capacity(data.len().div_ceil(max));
        for chunk in data.chunks(max) {
            let off = self.next_offset;
            let seg = Bytes::copy_from_slice(chunk);
            self.unacked.insert(off, seg.clone());
            self.next_offset += chunk.len() as u64;
            out.push((off, seg));
        }
        out
    }

    /// Applies a cumulative ack. Returns true if it acknowledged new bytes.
    pub(crate) fn ack(&mut self, upto: u64) -> bool {
        if upto <= self.acked || upto > self.next_offset {
            return false;
        }
        self.acked = upto;
        let keep = self.unacked.split_off(&upto);
        let mut dropped = std::mem::replace(&mut self.unacked, keep);
        // Keep the unacknowledged tail of a segment straddling `upto`.
        if let Some((&off, seg)) = dropped.last_key_value() {
            if off + seg.len() as u64 > upto {
                let (off, seg) = dropped.pop_last().expect("non-empty");
                let cut = (upto - off) as usize;
                self.unacked.insert(upto, seg.slice(cut..));
            }
        }
        true
    }

    pub(crate) fn unacked(&self) -> impl Iterator<Item = (u64, &Bytes)> + '_ {
        self.unacked.iter().map(|(o, b)| (*o, b))
    }

    pub(crate) fn has_unacked(&self) -> bool {
        !self.unacked.is_empty()
    }

    pub(crate) fn sent(&self) -> u64 {
        self.next_offset
    }
}

#[derive(Debug, Default)]
pub(crate) struct RecvBuf {
    next: u64,
    pending: BTreeMap<u64, Bytes>,
}

impl RecvBuf {
    /// Accepts a segment at `offset` and returns the bytes that became
    /// deliverable in order, if any.
    pub(crate) fn insert(&mut self, offset: u64, data: Bytes) -> Option<Bytes> {
        let end = offset + data.len() as u64;
        if end <= self.next || data.is_empty() {
            return None;
        }
        if offset > self.next {
            self.pending.entry(offset).or_insert(data);
            return None;
        }
        let mut out = BytesMut::from(&data[(self.next - offset) as usize..]);
        self.next = end;
        while let Some(entry) = self.pending.first_entry() {
            let off = *entry.key();
            if off > self.next {
                break;
            }
            let seg = entry.remove();
            let seg_end = off + seg.len() as u64;
            if seg_end > self.next {
                out.extend_from_slice(&seg[(self.next - off) as usize..]);
                self.next = seg_end;
            }
        }
        Some(out.freeze())
    }

    /// Next expected offset, i.e. the cumulative ack value.
    pub(crate) fn next(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn segments_and_acks() {
        let mut s = SendBuf::default();
        let segs = s.push(&[7u8; 2500], 1000);
        assert_eq!(
            segs.iter().map(|(o, b)| (*o, b.len())).collect::<Vec<_>>(),
            vec![(0, 1000), (1000, 1000), (2000, 500)]
        );
        assert!(s.ack(1000));
        assert!(!s.ack(1000));
        assert!(!s.ack(9999));
        assert_eq!(s.unacked().count(), 2);
        assert!(s.ack(2500));
        assert!(!s.has_unacked());
    }

    #[test]
    fn reassembly_out_of_order() {
        let mut r = RecvBuf::default();
        assert_eq!(r.insert(3, Bytes::from_static(b"def")), None);
        assert_eq!(r.insert(0, Bytes::from_static(b"abc")).unwrap(), &b"abcdef"[..]);
        assert_eq!(r.insert(0, Bytes::from_static(b"abc")), None);
        assert_eq!(r.next(), 6);
    }

    proptest! {
        // Whatever order and duplication segments arrive in, the delivered
        // bytes are always a prefix of the sent bytes.
        #[test]
        fn delivered_is_prefix(data in proptest::collection::vec(any::<u8>(), 1..4000),
                               max in 1usize..700,
                               order in proptest::collection::vec(any::<prop::sample::Index>(), 0..64)) {
            let mut s = SendBuf::default();
            let segs = s.push(&data, max);
            let mut r = RecvBuf::default();
            let mut got = Vec::new();
            for idx in order.iter() {
                let (o, b) = &segs[idx.index(segs.len())];
                if let Some(out) = r.insert(*o, b.clone()) {
                    got.extend_from_slice(&out);
                }
                prop_assert!(data.starts_with(&got));
            }
            for (o, b) in &segs {
                if let Some(out) = r.insert(*o, b.clone()) {
                    got.extend_from_slice(&out);
                }
            }
            prop_assert_eq!(got, data);
        }
    }
}
