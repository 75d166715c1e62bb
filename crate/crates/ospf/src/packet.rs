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

//! OSPF packet types and a compact fixed-layout codec.
//!
//! Every packet starts with `[1 version][1 type][2 length][4 router id]`.
//! On a stream each packet is additionally prefixed with a 4-byte length.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use bytes::{Buf, BufMut};
use roq_bgp::Prefix;
use thiserror::Error;

pub const VERSION: u8 = 2;
pub const HEADER_LEN: usize = 8;
pub const LSA_HEADER_LEN: usize = 15;
pub const LSA_KEY_LEN: usize = 9;
/// First sequence number of a fresh LSA instance.
pub const INITIAL_SEQ: i32 = 0x8000_0001_u32 as i32;
pub const MAX_AGE: u16 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouterId(pub u32);

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Ipv4Addr::from(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LsaType {
    Router = 1,
    ExternalPrefix = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LsaKey {
    pub ty: LsaType,
    pub adv_router: RouterId,
    pub lsa_id: u32,
}

impl fmt::Display for LsaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.ty {
            LsaType::Router => "router",
            LsaType::ExternalPrefix => "external",
        };
        write!(f, "{t}/{}/{}", self.adv_router, self.lsa_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LsaHeader {
    pub key: LsaKey,
    pub seq: i32,
    pub age: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouterLink {
    pub neighbor: RouterId,
    pub cost: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LsaBody {
    Router(Vec<RouterLink>),
    External { prefix: Prefix, cost: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lsa {
    pub header: LsaHeader,
    pub body: LsaBody,
}

impl Lsa {
    pub fn key(&self) -> LsaKey {
        self.header.key
    }

    pub fn is_max_age(&self) -> bool {
        self.header.age >= MAX_AGE
    }

    pub fn encoded_len(&self) -> usize {
        LSA_HEADER_LEN
            + 2
            + match &self.body {
                LsaBody::Router(links) => 2 + 8 * links.len(),
                LsaBody::External { prefix, .. } => 2 + addr_len(prefix) + 4,
            }
    }
}

fn addr_len(p: &Prefix) -> usize {
    match p.addr() {
        IpAddr::V4(_) => 4,
        IpAddr::V6(_) => 16,
    }
}

/// DBD flag bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DdFlags(pub u8);

impl DdFlags {
    pub const MASTER: u8 = 0x01;
    pub const MORE: u8 = 0x02;
    pub const INIT: u8 = 0x04;

    pub fn has(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn init(self) -> bool {
        self.has(Self::INIT)
    }

    pub fn more(self) -> bool {
        self.has(Self::MORE)
    }

    pub fn master(self) -> bool {
        self.has(Self::MASTER)
    }
}

impl fmt::Display for DdFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (bit, name) in [(Self::INIT, "I"), (Self::MORE, "M"), (Self::MASTER, "MS")] {
            if self.has(bit) {
                parts.push(name);
            }
        }
        write!(f, "{}", parts.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hello {
    pub hello_interval: u16,
    pub dead_interval: u16,
    pub neighbors: Vec<RouterId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dbd {
    pub dd_seq: u32,
    pub flags: DdFlags,
    pub headers: Vec<LsaHeader>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PacketBody {
    Hello(Hello),
    DbDescription(Dbd),
    LsRequest(Vec<LsaKey>),
    LsUpdate(Vec<Lsa>),
    LsAck(Vec<LsaHeader>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketType {
    Hello = 1,
    DbDescription = 2,
    LsRequest = 3,
    LsUpdate = 4,
    LsAck = 5,
}

impl fmt::Display for PacketType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketType::Hello => "hello",
            PacketType::DbDescription => "dbd",
            PacketType::LsRequest => "lsr",
            PacketType::LsUpdate => "lsu",
            PacketType::LsAck => "lsack",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OspfPacket {
    pub router_id: RouterId,
    pub body: PacketBody,
}

impl OspfPacket {
    pub fn new(router_id: RouterId, body: PacketBody) -> Self {
        OspfPacket { router_id, body }
    }

    pub fn packet_type(&self) -> PacketType {
        match self.body {
            PacketBody::Hello(_) => PacketType::Hello,
            PacketBody::DbDescription(_) => PacketType::DbDescription,
            PacketBody::LsRequest(_) => PacketType::LsRequest,
            PacketBody::LsUpdate(_) => PacketType::LsUpdate,
            PacketBody::LsAck(_) => PacketType::LsAck,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + match &self.body {
                PacketBody::Hello(h) => 6 + 4 * h.neighbors.len(),
                PacketBody::DbDescription(d) => 7 + LSA_HEADER_LEN * d.headers.len(),
                PacketBody::LsRequest(k) => 2 + LSA_KEY_LEN * k.len(),
                PacketBody::LsUpdate(l) => 2 + l.iter().map(Lsa::encoded_len).sum::<usize>(),
                PacketBody::LsAck(h) => 2 + LSA_HEADER_LEN * h.len(),
            }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("packet truncated")]
    Truncated,
    #[error("unknown packet type {0}")]
    UnknownPacketType(u8),
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}

pub fn encode_packet(p: &OspfPacket) -> Vec<u8> {
    let mut b = Vec::with_capacity(p.encoded_len());
    b.put_u8(VERSION);
    b.put_u8(p.packet_type() as u8);
    b.put_u16(0);
    b.put_u32(p.router_id.0);
    match &p.body {
        PacketBody::Hello(h) => {
            b.put_u16(h.hello_interval);
            b.put_u16(h.dead_interval);
            b.put_u16(h.neighbors.len() as u16);
            for n in &h.neighbors {
                b.put_u32(n.0);
            }
        }
        PacketBody::DbDescription(d) => {
            b.put_u32(d.dd_seq);
            b.put_u8(d.flags.0);
            b.put_u16(d.headers.len() as u16);
            for h in &d.headers {
                put_header(&mut b, h);
            }
        }
        PacketBody::LsRequest(keys) => {
            b.put_u16(keys.len() as u16);
            for k in keys {
                put_key(&mut b, k);
            }
        }
        PacketBody::LsUpdate(lsas) => {
            b.put_u16(lsas.len() as u16);
            for l in lsas {
                put_lsa(&mut b, l);
            }
        }
        PacketBody::LsAck(hs) => {
            b.put_u16(hs.len() as u16);
            for h in hs {
                put_header(&mut b, h);
            }
        }
    }
    let len = b.len() as u16;
    b[2..4].copy_from_slice(&len.to_be_bytes());
    b
}

/// Decodes one complete packet occupying all of `b`.
pub fn decode_packet(b: &[u8]) -> Result<OspfPacket, CodecError> {
    if b.len() < HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let mut r = b;
    if r.get_u8() != VERSION {
        return Err(CodecError::Malformed("version"));
    }
    let ty = r.get_u8();
    let len = r.get_u16() as usize;
    let router_id = RouterId(r.get_u32());
    if len < HEADER_LEN {
        return Err(CodecError::Malformed("length"));
    }
    if b.len() < len {
        return Err(CodecError::Truncated);
    }
    if b.len() > len {
        return Err(CodecError::Malformed("trailing bytes"));
    }
    let body = match ty {
        1 => {
            need(r, 6)?;
            let hello_interval = r.get_u16();
            let dead_interval = r.get_u16();
            let n = r.get_u16() as usize;
            need(r, 4 * n)?;
            let neighbors = (0..n).map(|_| RouterId(r.get_u32())).collect();
            PacketBody::Hello(Hello { hello_interval, dead_interval, neighbors })
        }
        2 => {
            need(r, 7)?;
            let dd_seq = r.get_u32();
            let flags = DdFlags(r.get_u8());
            let n = r.get_u16() as usize;
            let headers = (0..n).map(|_| get_header(&mut r)).collect::<Result<_, _>>()?;
            PacketBody::DbDescription(Dbd { dd_seq, flags, headers })
        }
        3 => {
            need(r, 2)?;
            let n = r.get_u16() as usize;
            PacketBody::LsRequest((0..n).map(|_| get_key(&mut r)).collect::<Result<_, _>>()?)
        }
        4 => {
            need(r, 2)?;
            let n = r.get_u16() as usize;
            PacketBody::LsUpdate((0..n).map(|_| get_lsa(&mut r)).collect::<Result<_, _>>()?)
        }
        5 => {
            need(r, 2)?;
            let n = r.get_u16() as usize;
            PacketBody::LsAck((0..n).map(|_| get_header(&mut r)).collect::<Result<_, _>>()?)
        }
        other => return Err(CodecError::UnknownPacketType(other)),
    };
    if r.has_remaining() {
        return Err(CodecError::Malformed("length mismatch"));
    }
    Ok(OspfPacket { router_id, body })
}

/// Stream record: `[4 length][packet]`.
pub fn encode_framed(p: &OspfPacket) -> Vec<u8> {
    let inner = encode_packet(p);
    let mut b = Vec::with_capacity(4 + inner.len());
    b.put_u32(inner.len() as u32);
    b.extend_from_slice(&inner);
    b
}

/// Decodes the first stream record in `b`, returning the packet and the
/// bytes consumed. `Truncated` means more bytes are needed.
pub fn decode_framed(b: &[u8]) -> Result<(OspfPacket, usize), CodecError> {
    if b.len() < 4 {
        return Err(CodecError::Truncated);
    }
    let len = u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize;
    if len > u16::MAX as usize {
        return Err(CodecError::Malformed("record length"));
    }
    if b.len() < 4 + len {
        return Err(CodecError::Truncated);
    }
    Ok((decode_packet(&b[4..4 + len])?, 4 + len))
}

fn need(r: &[u8], n: usize) -> Result<(), CodecError> {
    if r.remaining() < n {
        Err(CodecError::Truncated)
    } else {
        Ok(())
    }
}

fn put_key(b: &mut Vec<u8>, k: &LsaKey) {
    b.put_u8(k.ty as u8);
    b.put_u32(k.lsa_id);
    b.put_u32(k.adv_router.0);
}

fn get_key(r: &mut &[u8]) -> Result<LsaKey, CodecError> {
    need(r, LSA_KEY_LEN)?;
    let ty = match r.get_u8() {
        1 => LsaType::Router,
        5 => LsaType::ExternalPrefix,
        _ => return Err(CodecError::Malformed("lsa type")),
    };
    let lsa_id = r.get_u32();
    let adv_router = RouterId(r.get_u32());
    Ok(LsaKey { ty, adv_router, lsa_id })
}

fn put_header(b: &mut Vec<u8>, h: &LsaHeader) {
    b.put_u16(h.age);
    put_key(b, &h.key);
    b.put_i32(h.seq);
}

fn get_header(r: &mut &[u8]) -> Result<LsaHeader, CodecError> {
    need(r, LSA_HEADER_LEN)?;
    let age = r.get_u16();
    let key = get_key(r)?;
    let seq = r.get_i32();
    if age > MAX_AGE {
        return Err(CodecError::Malformed("age"));
    }
    Ok(LsaHeader { key, seq, age })
}

fn put_lsa(b: &mut Vec<u8>, l: &Lsa) {
    put_header(b, &l.header);
    let at = b.len();
    b.put_u16(0);
    match &l.body {
        LsaBody::Router(links) => {
            b.put_u16(links.len() as u16);
            for link in links {
                b.put_u32(link.neighbor.0);
                b.put_u32(link.cost);
            }
        }
        LsaBody::External { prefix, cost } => {
            match prefix.addr() {
                IpAddr::V4(a) => {
                    b.put_u8(4);
                    b.put_u8(prefix.len());
                    b.put_slice(&a.octets());
                }
                IpAddr::V6(a) => {
                    b.put_u8(6);
                    b.put_u8(prefix.len());
                    b.put_slice(&a.octets());
                }
            }
            b.put_u32(*cost);
        }
    }
    let body_len = (b.len() - at - 2) as u16;
    b[at..at + 2].copy_from_slice(&body_len.to_be_bytes());
}

fn get_lsa(r: &mut &[u8]) -> Result<Lsa, CodecError> {
    let header = get_header(r)?;
    need(r, 2)?;
    let body_len = r.get_u16() as usize;
    need(r, body_len)?;
    let (mut body, rest) = r.split_at(body_len);
    *r = rest;
    let parsed = match header.key.ty {
        LsaType::Router => {
            need(body, 2)?;
            let n = body.get_u16() as usize;
            need(body, 8 * n)?;
            LsaBody::Router(
                (0..n).map(|_| RouterLink { neighbor: RouterId(body.get_u32()), cost: body.get_u32() }).collect(),
            )
        }
        LsaType::ExternalPrefix => {
            need(body, 2)?;
            let fam = body.get_u8();
            let len = body.get_u8();
            let addr = match fam {
                4 => {
                    need(body, 4)?;
                    let mut o = [0u8; 4];
                    body.copy_to_slice(&mut o);
                    IpAddr::V4(Ipv4Addr::from(o))
                }
                6 => {
                    need(body, 16)?;
                    let mut o = [0u8; 16];
                    body.copy_to_slice(&mut o);
                    IpAddr::V6(Ipv6Addr::from(o))
                }
                _ => return Err(CodecError::Malformed("prefix family")),
            };
            let prefix = Prefix::new(addr, len).map_err(|_| CodecError::Malformed("prefix length"))?;
            if prefix.addr() != addr {
                return Err(CodecError::Malformed("prefix host bits"));
            }
            need(body, 4)?;
            LsaBody::External { prefix, cost: body.get_u32() }
        }
    };
    if body.has_remaining() {
        return Err(CodecError::Malformed("lsa body length"));
    }
    Ok(Lsa { header, body: parsed })
}
