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

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub fn max_len(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrefixError {
    #[error("prefix length {len} exceeds {max}")]
    LengthOutOfRange { len: u8, max: u8 },
    #[error("malformed prefix {0:?}")]
    Syntax(String),
}

/// An IPv4 or IPv6 prefix in canonical form: host bits are always zero.
///
/// Orders all IPv4 prefixes before IPv6 ones, then by address and length.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    addr: IpAddr,
    len: u8,
}

impl Prefix {
    /// Builds a prefix, clearing any bits past `len`.
    pub fn new(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        let max = match addr {
            IpAddr::V4(_) => 32,
            IpAddr::V6(_) => 128,
        };
        if len > max {
            return Err(PrefixError::LengthOutOfRange { len, max });
        }
        let addr = match addr {
            IpAddr::V4(a) => {
                let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
                IpAddr::V4(Ipv4Addr::from(u32::from(a) & mask))
            }
            IpAddr::V6(a) => {
                let mask = if len == 0 { 0 } else { u128::MAX << (128 - len) };
                IpAddr::V6(Ipv6Addr::from(u128::from(a) & mask))
            }
        };
        Ok(Prefix { addr, len })
    }

    pub fn v4(addr: Ipv4Addr, len: u8) -> Result<Self, PrefixError> {
        Prefix::new(IpAddr::V4(addr), len)
    }

    pub fn v6(addr: Ipv6Addr, len: u8) -> Result<Self, PrefixError> {
        Prefix::new(IpAddr::V6(addr), len)
    }

    pub fn family(&self) -> Family {
        match self.addr {
            IpAddr::V4(_) => Family::V4,
            IpAddr::V6(_) => Family::V6,
        }
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    /// Bytes this prefix occupies in NLRI encoding: length octet plus the
    /// significant address octets.
    pub fn wire_len(&self) -> usize {
        1 + (self.len as usize).div_ceil(8)
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        out.push(self.len);
        let n = (self.len as usize).div_ceil(8);
        match self.addr {
            IpAddr::V4(a) => out.extend_from_slice(&a.octets()[..n]),
            IpAddr::V6(a) => out.extend_from_slice(&a.octets()[..n]),
        }
    }

    /// Reads one NLRI-encoded prefix; returns it and the bytes consumed.
    pub(crate) fn read(family: Family, buf: &[u8]) -> Option<(Prefix, usize)> {
        let len = *buf.first()?;
        if len > family.max_len() {
            return None;
        }
        let n = (len as usize).div_ceil(8);
        let bytes = buf.get(1..1 + n)?;
        let addr = match family {
            Family::V4 => {
                let mut o = [0u8; 4];
                o[..n].copy_from_slice(bytes);
                IpAddr::V4(Ipv4Addr::from(o))
            }
            Family::V6 => {
                let mut o = [0u8; 16];
                o[..n].copy_from_slice(bytes);
                IpAddr::V6(Ipv6Addr::from(o))
            }
        };
        Some((Prefix::new(addr, len).ok()?, 1 + n))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Prefix {
    type Err = PrefixError;

    /// Parses `addr/len`, canonicalizing host bits.
    fn from_str(s: &str) -> Result<Self, PrefixError> {
        let syntax = || PrefixError::Syntax(s.to_string());
        let (addr, len) = s.split_once('/').ok_or_else(syntax)?;
        let addr: IpAddr = addr.parse().map_err(|_| syntax())?;
        if len.is_empty() || !len.bytes().all(|b| b.is_ascii_digit()) || len.len() > 3 {
            return Err(syntax());
        }
        let len: u16 = len.parse().map_err(|_| syntax())?;
        let len = u8::try_from(len).map_err(|_| syntax())?;
        Prefix::new(addr, len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes_host_bits() {
        let p: Prefix = "10.1.2.3/8".parse().unwrap();
        assert_eq!(p.to_string(), "10.0.0.0/8");
        let p: Prefix = "2001:db8::1/32".parse().unwrap();
        assert_eq!(p.to_string(), "2001:db8::/32");
        assert_eq!("0.0.0.0/0".parse::<Prefix>().unwrap().wire_len(), 1);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert_eq!("203.0.113.0/33".parse::<Prefix>(), Err(PrefixError::LengthOutOfRange { len: 33, max: 32 }));
        assert!("::/129".parse::<Prefix>().is_err());
        assert!("10.0.0.0".parse::<Prefix>().is_err());
        assert!("10.0.0.0/".parse::<Prefix>().is_err());
        assert!("10.0.0.0/-1".parse::<Prefix>().is_err());
    }

    #[test]
    fn v4_sorts_before_v6() {
        let a: Prefix = "255.0.0.0/8".parse().unwrap();
        let b: Prefix = "::/0".parse().unwrap();
        assert!(a < b);
    }

    #[test]
    fn nlri_round_trip() {
        for s in ["203.0.113.0/24", "10.0.0.0/9", "0.0.0.0/0", "2001:db8:80::/41"] {
            let p: Prefix = s.parse().unwrap();
            let mut b = Vec::new();
            p.write(&mut b);
            assert_eq!(b.len(), p.wire_len());
            assert_eq!(Prefix::read(p.family(), &b), Some((p, b.len())));
        }
    }
}
