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

//! BGP-4 message framing and encoding.
//!
//! Header: 16-byte all-ones marker, 2-byte total length, 1-byte type.
//! IPv4 routes travel in the classic withdrawn/NLRI fields, IPv6 routes in
//! MP_REACH_NLRI / MP_UNREACH_NLRI. AS_PATH always uses 4-octet AS numbers;
//! an Open whose AS does not fit in 16 bits carries AS_TRANS plus the
//! 4-octet AS capability, so 32-bit numbers survive the round trip.

use std::net::Ipv6Addr;

use thiserror::Error;

use crate::prefix::{Family, Prefix};

pub const MARKER: [u8; 16] = [0xff; 16];
pub const HEADER_LEN: usize = 19;
pub const MAX_MESSAGE_LEN: usize = 4096;
pub const AS_TRANS: u16 = 23456;

const TYPE_OPEN: u8 = 1;
const TYPE_UPDATE: u8 = 2;
const TYPE_NOTIFICATION: u8 = 3;
const TYPE_KEEPALIVE: u8 = 4;

const ATTR_ORIGIN: u8 = 1;
const ATTR_AS_PATH: u8 = 2;
const ATTR_NEXT_HOP: u8 = 3;
const ATTR_MED: u8 = 4;
const ATTR_LOCAL_PREF: u8 = 5;
const ATTR_MP_REACH: u8 = 14;
const ATTR_MP_UNREACH: u8 = 15;

const FLAG_OPTIONAL: u8 = 0x80;
const FLAG_TRANSITIVE: u8 = 0x40;
const FLAG_EXTENDED: u8 = 0x10;

const AS_SEQUENCE: u8 = 2;
const AFI_IPV6: u16 = 2;
const SAFI_UNICAST: u8 = 1;
const CAP_AS4: u8 = 65;
const PARAM_CAPABILITIES: u8 = 2;

/// Notification error codes used by this speaker.
pub mod err {
    pub const HEADER: u8 = 1;
    pub const OPEN: u8 = 2;
    pub const UPDATE: u8 = 3;
    pub const HOLD_EXPIRED: u8 = 4;
    pub const FSM: u8 = 5;
    pub const CEASE: u8 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Igp,
    Egp,
    Incomplete,
}

/// Attributes shared by every prefix of one Update.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathAttrs {
    pub origin: Origin,
    /// Leftmost entry is the most recently traversed AS.
    pub as_path: Vec<u32>,
    /// BGP identifier of the router to forward to.
    pub next_hop: u32,
    pub med: Option<u32>,
    pub local_pref: Option<u32>,
}

impl PathAttrs {
    pub fn new(as_path: Vec<u32>, next_hop: u32) -> Self {
        PathAttrs { origin: Origin::Igp, as_path, next_hop, med: None, local_pref: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Open {
    pub version: u8,
    pub my_as: u32,
    pub hold_time: u16,
    pub bgp_id: u32,
}

/// Withdrawals and announcements. `attrs` is present exactly when `nlri`
/// is non-empty; within each list IPv4 prefixes precede IPv6 ones.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Update {
    pub withdrawn: Vec<Prefix>,
    pub attrs: Option<PathAttrs>,
    pub nlri: Vec<Prefix>,
}

impl Update {
    pub fn withdraw(prefixes: Vec<Prefix>) -> Self {
        Update { withdrawn: prefixes, ..Update::default() }
    }

    pub fn announce(attrs: PathAttrs, nlri: Vec<Prefix>) -> Self {
        Update { withdrawn: Vec::new(), attrs: Some(attrs), nlri }
    }

    /// Every prefix mentioned, withdrawn first.
    pub fn prefixes(&self) -> impl Iterator<Item = &Prefix> {
        self.withdrawn.iter().chain(self.nlri.iter())
    }

    /// Encoded size in bytes, computed without encoding.
    pub fn encoded_len(&self) -> usize {
        let (w4, w6) = split_bytes(&self.withdrawn);
        let (n4, n6) = split_bytes(&self.nlri);
        update_len(self.attrs.as_ref(), w4, w6, n4, n6)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub code: u8,
    pub subcode: u8,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BgpMessage {
    Open(Open),
    Update(Update),
    Keepalive,
    Notification(Notification),
}

impl BgpMessage {
    pub fn notification(code: u8, subcode: u8) -> Self {
        BgpMessage::Notification(Notification { code, subcode, data: Vec::new() })
    }

    pub fn type_code(&self) -> u8 {
        match self {
            BgpMessage::Open(_) => TYPE_OPEN,
            BgpMessage::Update(_) => TYPE_UPDATE,
            BgpMessage::Notification(_) => TYPE_NOTIFICATION,
            BgpMessage::Keepalive => TYPE_KEEPALIVE,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("message of {0} bytes exceeds the 4096-byte limit")]
    MessageTooLarge(usize),
    #[error("message is not well formed: {0}")]
    NotWellFormed(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("incomplete message")]
    NeedMoreData,
    #[error("bad marker")]
    BadMarker,
    #[error("bad message length {0}")]
    BadLength(u16),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("malformed open (subcode {0})")]
    Open(u8),
    #[error("malformed update (subcode {0})")]
    Update(u8),
}

impl DecodeError {
    /// The Notification (code, subcode) to answer this error with, or
    /// `None` when more bytes are simply needed.
    pub fn notification(&self) -> Option<(u8, u8)> {
        match *self {
            DecodeError::NeedMoreData => None,
            DecodeError::BadMarker => Some((err::HEADER, 1)),
            DecodeError::BadLength(_) => Some((err::HEADER, 2)),
            DecodeError::UnknownType(_) => Some((err::HEADER, 3)),
            DecodeError::Open(s) => Some((err::OPEN, s)),
            DecodeError::Update(s) => Some((err::UPDATE, s)),
        }
    }
}

fn split_bytes(ps: &[Prefix]) -> (usize, usize) {
    ps.iter().fold((0, 0), |(a, b), p| match p.family() {
        Family::V4 => (a + p.wire_len(), b),
        Family::V6 => (a, b + p.wire_len()),
    })
}

fn attr_len(value: usize) -> usize {
    if value > 255 {
        4 + value
    } else {
        3 + value
    }
}

fn as_path_value_len(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        2 * n.div_ceil(255) + 4 * n
    }
}

/// Size of an Update given the NLRI byte totals of each section. A section
/// with zero bytes holds no prefixes since every prefix takes at least one.
pub(crate) fn update_len(attrs: Option<&PathAttrs>, w4: usize, w6: usize, n4: usize, n6: usize) -> usize {
    let mut a = 0;
    if let Some(at) = attrs {
        a += attr_len(1) + attr_len(as_path_value_len(at.as_path.len()));
        if n4 > 0 {
            a += attr_len(4);
        }
        if at.med.is_some() {
            a += attr_len(4);
        }
        if at.local_pref.is_some() {
            a += attr_len(4);
        }
        if n6 > 0 {
            a += attr_len(5 + 16 + n6);
        }
    }
    if w6 > 0 {
        a += attr_len(3 + w6);
    }
    HEADER_LEN + 2 + w4 + 2 + a + n4
}

fn families_ordered(ps: &[Prefix]) -> bool {
    ps.windows(2).all(|w| !(w[0].family() == Family::V6 && w[1].family() == Family::V4))
}

fn put_attr(out: &mut Vec<u8>, flags: u8, ty: u8, value: &[u8]) {
    if value.len() > 255 {
        out.push(flags | FLAG_EXTENDED);
        out.push(ty);
        out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    } else {
        out.push(flags);
        out.push(ty);
        out.push(value.len() as u8);
    }
    out.extend_from_slice(value);
}

fn mapped_next_hop(id: u32) -> [u8; 16] {
    std::net::Ipv4Addr::from(id).to_ipv6_mapped().octets()
}

pub fn encode_message(m: &BgpMessage) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&MARKER);
    out.extend_from_slice(&[0, 0]);
    out.push(m.type_code());
    match m {
        BgpMessage::Keepalive => {}
        BgpMessage::Open(o) => {
            out.push(o.version);
            let short = u16::try_from(o.my_as).unwrap_or(AS_TRANS);
            out.extend_from_slice(&short.to_be_bytes());
            out.extend_from_slice(&o.hold_time.to_be_bytes());
            out.extend_from_slice(&o.bgp_id.to_be_bytes());
            if o.my_as > u16::MAX as u32 {
                out.extend_from_slice(&[8, PARAM_CAPABILITIES, 6, CAP_AS4, 4]);
                out.extend_from_slice(&o.my_as.to_be_bytes());
            } else {
                out.push(0);
            }
        }
        BgpMessage::Notification(n) => {
            out.push(n.code);
            out.push(n.subcode);
            out.extend_from_slice(&n.data);
        }
        BgpMessage::Update(u) => encode_update(u, &mut out)?,
    }
    let len = out.len();
    if len > MAX_MESSAGE_LEN {
        return Err(EncodeError::MessageTooLarge(len));
    }
    out[16..18].copy_from_slice(&(len as u16).to_be_bytes());
    Ok(out)
}

fn encode_update(u: &Update, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    if u.attrs.is_some() == u.nlri.is_empty() {
        return Err(EncodeError::NotWellFormed("attributes present iff nlri is non-empty"));
    }
    if !families_ordered(&u.withdrawn) || !families_ordered(&u.nlri) {
        return Err(EncodeError::NotWellFormed("ipv4 prefixes must precede ipv6"));
    }
    // Reject oversize messages before building them.
    let len = u.encoded_len();
    if len > MAX_MESSAGE_LEN {
        return Err(EncodeError::MessageTooLarge(len));
    }
    fn split(ps: &[Prefix]) -> (Vec<&Prefix>, Vec<&Prefix>) {
        ps.iter().partition(|p| p.family() == Family::V4)
    }
    let (w4, w6) = split(&u.withdrawn);
    let (n4, n6) = split(&u.nlri);

    let at = out.len();
    out.extend_from_slice(&[0, 0]);
    for p in &w4 {
        p.write(out);
    }
    let wlen = (out.len() - at - 2) as u16;
    out[at..at + 2].copy_from_slice(&wlen.to_be_bytes());

    let at = out.len();
    out.extend_from_slice(&[0, 0]);
    let mut value = Vec::new();
    if let Some(a) = &u.attrs {
        let origin = match a.origin {
            Origin::Igp => 0,
            Origin::Egp => 1,
            Origin::Incomplete => 2,
        };
        put_attr(out, FLAG_TRANSITIVE, ATTR_ORIGIN, &[origin]);
        for seg in a.as_path.chunks(255) {
            value.push(AS_SEQUENCE);
            value.push(seg.len() as u8);
            for asn in seg {
                value.extend_from_slice(&asn.to_be_bytes());
            }
        }
        put_attr(out, FLAG_TRANSITIVE, ATTR_AS_PATH, &value);
        if !n4.is_empty() {
            put_attr(out, FLAG_TRANSITIVE, ATTR_NEXT_HOP, &a.next_hop.to_be_bytes());
        }
        if let Some(med) = a.med {
            put_attr(out, FLAG_OPTIONAL, ATTR_MED, &med.to_be_bytes());
        }
        if let Some(lp) = a.local_pref {
            put_attr(out, FLAG_TRANSITIVE, ATTR_LOCAL_PREF, &lp.to_be_bytes());
        }
        if !n6.is_empty() {
            value.clear();
            value.extend_from_slice(&AFI_IPV6.to_be_bytes());
            value.push(SAFI_UNICAST);
            value.push(16);
            value.extend_from_slice(&mapped_next_hop(a.next_hop));
            value.push(0);
            for p in &n6 {
                p.write(&mut value);
            }
            put_attr(out, FLAG_OPTIONAL, ATTR_MP_REACH, &value);
        }
    }
    if !w6.is_empty() {
        value.clear();
        value.extend_from_slice(&AFI_IPV6.to_be_bytes());
        value.push(SAFI_UNICAST);
        for p in &w6 {
            p.write(&mut value);
        }
        put_attr(out, FLAG_OPTIONAL, ATTR_MP_UNREACH, &value);
    }
    let alen = (out.len() - at - 2) as u16;
    out[at..at + 2].copy_from_slice(&alen.to_be_bytes());
    for p in &n4 {
        p.write(out);
    }
    Ok(())
}

/// Decodes the first message in `buf`, returning it with the number of
/// bytes consumed. Safe to call repeatedly on a growing stream buffer.
pub fn decode_message(buf: &[u8]) -> Result<(BgpMessage, usize), DecodeError> {
    let marker_seen = buf.len().min(16);
    if buf[..marker_seen].iter().any(|&b| b != 0xff) {
        return Err(DecodeError::BadMarker);
    }
    if buf.len() < HEADER_LEN {
        return Err(DecodeError::NeedMoreData);
    }
    let len = u16::from_be_bytes([buf[16], buf[17]]);
    let ty = buf[18];
    if (len as usize) < HEADER_LEN || len as usize > MAX_MESSAGE_LEN {
        return Err(DecodeError::BadLength(len));
    }
    let min = match ty {
        TYPE_OPEN => HEADER_LEN + 10,
        TYPE_UPDATE => HEADER_LEN + 4,
        TYPE_NOTIFICATION => HEADER_LEN + 2,
        TYPE_KEEPALIVE => HEADER_LEN,
        other => return Err(DecodeError::UnknownType(other)),
    };
    if (len as usize) < min || (ty == TYPE_KEEPALIVE && len as usize != HEADER_LEN) {
        return Err(DecodeError::BadLength(len));
    }
    if buf.len() < len as usize {
        return Err(DecodeError::NeedMoreData);
    }
    let body = &buf[HEADER_LEN..len as usize];
    let msg = match ty {
        TYPE_KEEPALIVE => BgpMessage::Keepalive,
        TYPE_NOTIFICATION => {
            BgpMessage::Notification(Notification { code: body[0], subcode: body[1], data: body[2..].to_vec() })
        }
        TYPE_OPEN => BgpMessage::Open(decode_open(body)?),
        _ => BgpMessage::Update(decode_update(body)?),
    };
    Ok((msg, len as usize))
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn decode_open(body: &[u8]) -> Result<Open, DecodeError> {
    let version = body[0];
    if version != 4 {
        return Err(DecodeError::Open(1));
    }
    let short_as = be16(&body[1..]);
    let hold_time = be16(&body[3..]);
    let bgp_id = be32(&body[5..]);
    let opt_len = body[9] as usize;
    let mut opts = &body[10..];
    if opts.len() != opt_len {
        return Err(DecodeError::Open(0));
    }
    let mut as4 = None;
    while !opts.is_empty() {
        if opts.len() < 2 || opts.len() < 2 + opts[1] as usize {
            return Err(DecodeError::Open(0));
        }
        let (ty, val) = (opts[0], &opts[2..2 + opts[1] as usize]);
        opts = &opts[2 + val.len()..];
        if ty != PARAM_CAPABILITIES {
            return Err(DecodeError::Open(4));
        }
        let mut caps = val;
        while !caps.is_empty() {
            if caps.len() < 2 || caps.len() < 2 + caps[1] as usize {
                return Err(DecodeError::Open(0));
            }
            let (code, cval) = (caps[0], &caps[2..2 + caps[1] as usize]);
            caps = &caps[2 + cval.len()..];
            if code == CAP_AS4 {
                if cval.len() != 4 {
                    return Err(DecodeError::Open(0));
                }
                as4 = Some(be32(cval));
            }
        }
    }
    Ok(Open { version, my_as: as4.unwrap_or(short_as as u32), hold_time, bgp_id })
}

fn read_prefixes(family: Family, mut b: &[u8], out: &mut Vec<Prefix>) -> Result<(), DecodeError> {
    while !b.is_empty() {
        let (p, n) = Prefix::read(family, b).ok_or(DecodeError::Update(10))?;
        out.push(p);
        b = &b[n..];
    }
    Ok(())
}

fn decode_update(body: &[u8]) -> Result<Update, DecodeError> {
    let malformed_list = DecodeError::Update(1);
    let wlen = be16(body) as usize;
    if body.len() < 2 + wlen + 2 {
        return Err(malformed_list);
    }
    let mut withdrawn = Vec::new();
    read_prefixes(Family::V4, &body[2..2 + wlen], &mut withdrawn)?;
    let alen = be16(&body[2 + wlen..]) as usize;
    let attrs_start = 2 + wlen + 2;
    if body.len() < attrs_start + alen {
        return Err(malformed_list);
    }
    let mut attrs = &body[attrs_start..attrs_start + alen];
    let nlri_bytes = &body[attrs_start + alen..];

    let mut seen = [false; 256];
    let mut origin = None;
    let mut as_path = None;
    let mut next_hop = None;
    let mut mp_next_hop = None;
    let mut med = None;
    let mut local_pref = None;
    let mut w6 = Vec::new();
    let mut n6 = Vec::new();
    while !attrs.is_empty() {
        if attrs.len() < 3 {
            return Err(malformed_list);
        }
        let (flags, ty) = (attrs[0], attrs[1]);
        let (vlen, hdr) = if flags & FLAG_EXTENDED != 0 {
            if attrs.len() < 4 {
                return Err(malformed_list);
            }
            (be16(&attrs[2..]) as usize, 4)
        } else {
            (attrs[2] as usize, 3)
        };
        if attrs.len() < hdr + vlen {
            return Err(DecodeError::Update(5));
        }
        let v = &attrs[hdr..hdr + vlen];
        attrs = &attrs[hdr + vlen..];
        if std::mem::replace(&mut seen[ty as usize], true) {
            return Err(malformed_list);
        }
        let optional = flags & FLAG_OPTIONAL != 0;
        let expect_optional = matches!(ty, ATTR_MED | ATTR_MP_REACH | ATTR_MP_UNREACH);
        let known = matches!(
            ty,
            ATTR_ORIGIN | ATTR_AS_PATH | ATTR_NEXT_HOP | ATTR_MED | ATTR_LOCAL_PREF | ATTR_MP_REACH | ATTR_MP_UNREACH
        );
        if !known {
            if !optional {
                return Err(DecodeError::Update(2));
            }
            continue;
        }
        if optional != expect_optional {
            return Err(DecodeError::Update(4));
        }
        let fixed = |n: usize| if v.len() == n { Ok(()) } else { Err(DecodeError::Update(5)) };
        match ty {
            ATTR_ORIGIN => {
                fixed(1)?;
                origin = Some(match v[0] {
                    0 => Origin::Igp,
                    1 => Origin::Egp,
                    2 => Origin::Incomplete,
                    _ => return Err(DecodeError::Update(6)),
                });
            }
            ATTR_AS_PATH => {
                let mut path = Vec::new();
                let mut s = v;
                while !s.is_empty() {
                    if s.len() < 2 || s[0] != AS_SEQUENCE || s[1] == 0 || s.len() < 2 + 4 * s[1] as usize {
                        return Err(DecodeError::Update(11));
                    }
                    let n = s[1] as usize;
                    path.extend(s[2..2 + 4 * n].chunks(4).map(be32));
                    s = &s[2 + 4 * n..];
                }
                as_path = Some(path);
            }
            ATTR_NEXT_HOP => {
                fixed(4)?;
                next_hop = Some(be32(v));
            }
            ATTR_MED => {
                fixed(4)?;
                med = Some(be32(v));
            }
            ATTR_LOCAL_PREF => {
                fixed(4)?;
                local_pref = Some(be32(v));
            }
            ATTR_MP_REACH => {
                if v.len() < 5 || be16(v) != AFI_IPV6 || v[2] != SAFI_UNICAST {
                    return Err(DecodeError::Update(9));
                }
                let nh_len = v[3] as usize;
                if nh_len != 16 || v.len() < 4 + nh_len + 1 {
                    return Err(DecodeError::Update(8));
                }
                let mut o = [0u8; 16];
                o.copy_from_slice(&v[4..20]);
                let nh = Ipv6Addr::from(o).to_ipv4_mapped().ok_or(DecodeError::Update(8))?;
                mp_next_hop = Some(u32::from(nh));
                read_prefixes(Family::V6, &v[21..], &mut n6)?;
            }
            _ => {
                if v.len() < 3 || be16(v) != AFI_IPV6 || v[2] != SAFI_UNICAST {
                    return Err(DecodeError::Update(9));
                }
                read_prefixes(Family::V6, &v[3..], &mut w6)?;
            }
        }
    }
    let mut nlri = Vec::new();
    read_prefixes(Family::V4, nlri_bytes, &mut nlri)?;
    let has_v4 = !nlri.is_empty();
    nlri.extend(n6);
    withdrawn.extend(w6);
    let attrs = if nlri.is_empty() {
        None
    } else {
        let missing = DecodeError::Update(3);
        let next_hop = if has_v4 { next_hop } else { mp_next_hop };
        Some(PathAttrs {
            origin: origin.ok_or(missing.clone())?,
            as_path: as_path.ok_or(missing.clone())?,
            next_hop: next_hop.ok_or(missing)?,
            med,
            local_pref,
        })
    };
    Ok(Update { withdrawn, attrs, nlri })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn keepalive_is_nineteen_bytes() {
        let b = encode_message(&BgpMessage::Keepalive).unwrap();
        let mut want = vec![0xff; 16];
        want.extend_from_slice(&[0x00, 0x13, 0x04]);
        assert_eq!(b, want);
    }

    #[test]
    fn open_layout() {
        let o = BgpMessage::Open(Open { version: 4, my_as: 64500, hold_time: 90, bgp_id: 0x0A00_0001 });
        let b = encode_message(&o).unwrap();
        assert_eq!(b.len(), 29);
        assert_eq!(&b[16..19], &[0, 29, 1]);
        assert_eq!(&b[19..29], &[4, 0xfb, 0xf4, 0, 90, 10, 0, 0, 1, 0]);
        assert_eq!(decode_message(&b).unwrap(), (o, 29));
    }

    #[test]
    fn four_octet_as_in_open() {
        let o = BgpMessage::Open(Open { version: 4, my_as: 4_200_000_000, hold_time: 180, bgp_id: 7 });
        let b = encode_message(&o).unwrap();
        assert_eq!(be16(&b[20..]), AS_TRANS);
        assert_eq!(decode_message(&b).unwrap().0, o);
    }

    #[test]
    fn mixed_family_update() {
        let mut a = PathAttrs::new(vec![64500, 65010], 3);
        a.med = Some(10);
        let u = Update {
            withdrawn: vec![p("10.0.0.0/8"), p("2001:db8::/32")],
            attrs: Some(a),
            nlri: vec![p("203.0.113.0/24"), p("2001:db8:1::/48")],
        };
        let m = BgpMessage::Update(u.clone());
        let b = encode_message(&m).unwrap();
        assert_eq!(b.len(), u.encoded_len());
        assert_eq!(decode_message(&b).unwrap(), (m, b.len()));
    }

    #[test]
    fn v6_only_update_takes_next_hop_from_mp_reach() {
        let u = Update::announce(PathAttrs::new(vec![1], 0x0102_0304), vec![p("2001:db8::/32")]);
        let b = encode_message(&BgpMessage::Update(u.clone())).unwrap();
        assert_eq!(decode_message(&b).unwrap().0, BgpMessage::Update(u));
    }

    #[test]
    fn rejects_ill_formed_updates() {
        let no_attrs = Update { nlri: vec![p("10.0.0.0/8")], ..Update::default() };
        assert!(matches!(encode_message(&BgpMessage::Update(no_attrs)), Err(EncodeError::NotWellFormed(_))));
        let disordered = Update::withdraw(vec![p("::/0"), p("10.0.0.0/8")]);
        assert!(encode_message(&BgpMessage::Update(disordered)).is_err());
    }

    #[test]
    fn long_as_path_uses_extended_length() {
        let path: Vec<u32> = (1..=300).collect();
        let u = Update::announce(PathAttrs::new(path, 1), vec![p("10.0.0.0/8")]);
        let b = encode_message(&BgpMessage::Update(u.clone())).unwrap();
        assert_eq!(b.len(), u.encoded_len());
        assert_eq!(decode_message(&b).unwrap().0, BgpMessage::Update(u));
    }

    #[test]
    fn framing_errors() {
        let ka = encode_message(&BgpMessage::Keepalive).unwrap();
        let mut two = ka.clone();
        two.extend_from_slice(&ka);
        assert_eq!(decode_message(&two).unwrap().1, 19);
        assert_eq!(decode_message(&two[19..]).unwrap().1, 19);

        let open = encode_message(&BgpMessage::Open(Open { version: 4, my_as: 1, hold_time: 90, bgp_id: 1 })).unwrap();
        assert_eq!(decode_message(&open[..10]), Err(DecodeError::NeedMoreData));

        let mut bad = ka.clone();
        bad[5] = 0;
        assert_eq!(decode_message(&bad), Err(DecodeError::BadMarker));
        assert_eq!(decode_message(&bad[..8]), Err(DecodeError::BadMarker));

        let mut bad = ka.clone();
        bad[18] = 9;
        assert_eq!(decode_message(&bad), Err(DecodeError::UnknownType(9)));
        assert_eq!(DecodeError::UnknownType(9).notification(), Some((1, 3)));

        let mut bad = ka;
        bad[17] = 18;
        assert_eq!(decode_message(&bad), Err(DecodeError::BadLength(18)));
    }
}
