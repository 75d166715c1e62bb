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

//! Datagram layouts for both backends.
//!
//! SecureMux frame:
//! `[1 type][8 connection id][4 stream id][8 offset][2 length][payload][8 tag]`
//!
//! PlainStream segment:
//! `[1 flags][8 connection id][8 seq][2 length][payload]`

use bytes::{Buf, BufMut, Bytes, BytesMut};
use thiserror::Error;

use crate::api::ConnectionId;

pub const TAG_LEN: usize = 8;
pub const FRAME_HEADER_LEN: usize = 1 + 8 + 4 + 8 + 2;
pub const FRAME_OVERHEAD: usize = FRAME_HEADER_LEN + TAG_LEN;
/// Largest stream payload carried in one SecureMux datagram.
pub const MAX_FRAME_PAYLOAD: usize = 1200;

pub const SEGMENT_HEADER_LEN: usize = 1 + 8 + 8 + 2;
/// Largest stream payload carried in one PlainStream segment.
pub const MAX_SEGMENT_PAYLOAD: usize = 1460;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("datagram truncated")]
    Truncated,
    #[error("length field {declared} does not match {actual} payload bytes")]
    BadLength { declared: usize, actual: usize },
    #[error("unknown frame type {0:#04x}")]
    UnknownFrameType(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    /// Client hello: alpn, nonce, certificate, target port.
    Initial = 0x01,
    /// Server hello: nonce, certificate.
    Handshake = 0x02,
    HandshakeDone = 0x03,
    Stream = 0x04,
    /// Cumulative acknowledgement: `offset` is the next expected byte.
    Ack = 0x05,
    /// Connection close: payload is `[8 code][text]`.
    Close = 0x06,
}

impl TryFrom<u8> for FrameType {
    type Error = WireError;

    fn try_from(v: u8) -> Result<Self, WireError> {
        Ok(match v {
            0x01 => FrameType::Initial,
            0x02 => FrameType::Handshake,
            0x03 => FrameType::HandshakeDone,
            0x04 => FrameType::Stream,
            0x05 => FrameType::Ack,
            0x06 => FrameType::Close,
            other => return Err(WireError::UnknownFrameType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub ty: FrameType,
    pub conn: ConnectionId,
    pub stream: u32,
    pub offset: u64,
    pub payload: Bytes,
}

impl Frame {
    pub fn new(ty: FrameType, conn: ConnectionId) -> Self {
        Frame { ty, conn, stream: 0, offset: 0, payload: Bytes::new() }
    }

    /// Serializes the frame and appends `tag_fn(authenticated bytes)`.
    pub fn encode(&self, tag_fn: impl FnOnce(&[u8]) -> [u8; TAG_LEN]) -> Bytes {
        let mut b = BytesMut::with_capacity(FRAME_OVERHEAD + self.payload.len());
        b.put_u8(self.ty as u8);
        b.put_u64(self.conn.0);
        b.put_u32(self.stream);
        b.put_u64(self.offset);
        b.put_u16(self.payload.len() as u16);
        b.put_slice(&self.payload);
        let tag = tag_fn(&b);
        b.put_slice(&tag);
        b.freeze()
    }

    /// Parses a frame; returns it with its tag. Tag verification is the
    /// caller's job since the key depends on connection state.
    pub fn decode(mut buf: Bytes) -> Result<(Frame, [u8; TAG_LEN]), WireError> {
        if buf.len() < FRAME_OVERHEAD {
            return Err(WireError::Truncated);
        }
        let ty = FrameType::try_from(buf.get_u8())?;
        let conn = ConnectionId(buf.get_u64());
        let stream = buf.get_u32();
        let offset = buf.get_u64();
        let len = buf.get_u16() as usize;
        if buf.len() != len + TAG_LEN {
            return Err(WireError::BadLength { declared: len, actual: buf.len().saturating_sub(TAG_LEN) });
        }
        let payload = buf.split_to(len);
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&buf);
        Ok((Frame { ty, conn, stream, offset, payload }, tag))
    }
}

/// Splits an encoded frame into the authenticated region and its tag.
pub fn split_tag(datagram: &[u8]) -> Option<(&[u8], &[u8])> {
    (datagram.len() >= FRAME_OVERHEAD).then(|| datagram.split_at(datagram.len() - TAG_LEN))
}

pub mod flags {
    pub const SYN: u8 = 0x01;
    pub const ACK: u8 = 0x02;
    pub const FIN: u8 = 0x04;
    pub const RST: u8 = 0x08;
    pub const DATA: u8 = 0x10;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub flags: u8,
    pub conn: ConnectionId,
    /// Stream offset for DATA, cumulative ack for ACK.
    pub seq: u64,
    pub payload: Bytes,
}

impl Segment {
    pub fn encode(&self) -> Bytes {
        let mut b = BytesMut::with_capacity(SEGMENT_HEADER_LEN + self.payload.len());
        b.put_u8(self.flags);
        b.put_u64(self.conn.0);
        b.put_u64(self.seq);
        b.put_u16(self.payload.len() as u16);
        b.put_slice(&self.payload);
        b.freeze()
    }

    pub fn decode(mut buf: Bytes) -> Result<Segment, WireError> {
        if buf.len() < SEGMENT_HEADER_LEN {
            return Err(WireError::Truncated);
        }
        let flags = buf.get_u8();
        let conn = ConnectionId(buf.get_u64());
        let seq = buf.get_u64();
        let len = buf.get_u16() as usize;
        if buf.len() != len {
            return Err(WireError::BadLength { declared: len, actual: buf.len() });
        }
        Ok(Segment { flags, conn, seq, payload: buf })
    }

    pub fn has(&self, flag: u8) -> bool {
        self.flags & flag != 0
    }
}

/// `[8 code][text]` body of close frames and FIN segments.
pub fn encode_close(code: u64, text: &str) -> Bytes {
    let mut b = BytesMut::with_capacity(8 + text.len());
    b.put_u64(code);
    b.put_slice(text.as_bytes());
    b.freeze()
}

pub fn decode_close(mut payload: Bytes) -> (u64, String) {
    if payload.len() < 8 {
        return (0, String::new());
    }
    let code = payload.get_u64();
    (code, String::from_utf8_lossy(&payload).into_owned())
}
