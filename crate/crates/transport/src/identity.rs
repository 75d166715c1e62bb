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

//! Router identities and the authenticated framing used by SecureMux.
//!
//! Certificates are self-signed stand-ins: a subject name and a 32-byte
//! public key, identified by the SHA-256 fingerprint of both. Frame tags are
//! truncated SHA-256 over `key || frame`; this gives integrity and peer
//! authentication inside the simulator, not confidentiality.

use std::collections::BTreeSet;
use std::fmt;

use bytes::{Buf, BufMut, Bytes, BytesMut};
use sha2::{Digest, Sha256};

use crate::api::ConnectionId;
use crate::wire::TAG_LEN;

pub const ALPN_BGP: &str = "roq-bgp/1";
pub const ALPN_OSPF: &str = "roq-ospf/1";

pub const NONCE_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: String,
    pub public_key: [u8; 32],
}

impl Certificate {
    /// Derives a certificate deterministically from a subject and key seed.
    pub fn self_signed(subject: impl Into<String>, key_seed: &[u8]) -> Self {
        let subject = subject.into();
        let public_key = sha256(&[b"roq-keygen", subject.as_bytes(), key_seed]);
        Certificate { subject, public_key }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(sha256(&[&[self.subject.len() as u8], self.subject.as_bytes(), &self.public_key]))
    }

    pub(crate) fn encode(&self, b: &mut BytesMut) {
        let subject = &self.subject.as_bytes()[..self.subject.len().min(255)];
        b.put_u8(subject.len() as u8);
        b.put_slice(subject);
        b.put_slice(&self.public_key);
    }

    pub(crate) fn decode(b: &mut Bytes) -> Option<Self> {
        if b.remaining() < 1 {
            return None;
        }
        let n = b.get_u8() as usize;
        if b.remaining() < n + 32 {
            return None;
        }
        let subject = String::from_utf8(b.split_to(n).to_vec()).ok()?;
        let mut public_key = [0u8; 32];
        b.copy_to_slice(&mut public_key);
        Some(Certificate { subject, public_key })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trust {
    AcceptAny,
    PinnedFingerprints(BTreeSet<Fingerprint>),
}

impl Trust {
    pub fn admits(&self, fp: &Fingerprint) -> bool {
        match self {
            Trust::AcceptAny => true,
            Trust::PinnedFingerprints(set) => set.contains(fp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityConfig {
    pub identity: Certificate,
    pub trust: Trust,
    pub alpn: String,
}

impl SecurityConfig {
    pub fn new(identity: Certificate, trust: Trust, alpn: impl Into<String>) -> Self {
        SecurityConfig { identity, trust, alpn: alpn.into() }
    }
}

/// Symmetric key used to tag frames of one connection.
#[derive(Clone, PartialEq, Eq)]
pub(crate) struct FrameKey([u8; 32]);

impl fmt::Debug for FrameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FrameKey(..)")
    }
}

impl FrameKey {
    /// Key protecting handshake frames, derivable from the connection id
    /// alone (as with QUIC Initial packets).
    pub(crate) fn initial(conn: ConnectionId) -> Self {
        FrameKey(sha256(&[b"roq-initial", &conn.0.to_be_bytes()]))
    }

    pub(crate) fn session(
        conn: ConnectionId,
        client_nonce: &[u8; NONCE_LEN],
        server_nonce: &[u8; NONCE_LEN],
        client_fp: &Fingerprint,
        server_fp: &Fingerprint,
    ) -> Self {
        FrameKey(sha256(&[
            b"roq-session",
            &conn.0.to_be_bytes(),
            client_nonce,
            server_nonce,
            &client_fp.0,
            &server_fp.0,
        ]))
    }

    pub(crate) fn tag(&self, data: &[u8]) -> [u8; TAG_LEN] {
        let full = sha256(&[&self.0, data]);
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&full[..TAG_LEN]);
        tag
    }

    pub(crate) fn verify(&self, data: &[u8], tag: &[u8]) -> bool {
        self.tag(data).as_slice() == tag
    }
}

fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}
