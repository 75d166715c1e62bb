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

use bytes::Bytes;
use roq_netsim::NodeId;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransportKind {
    /// Reliable byte stream with TCP semantics: one implicit stream.
    PlainStream,
    /// QUIC semantics: authenticated 1-RTT handshake, multiplexed streams.
    SecureMux,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::PlainStream => "plain",
            TransportKind::SecureMux => "secure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EndpointAddress {
    pub node: NodeId,
    pub port: u16,
}

impl EndpointAddress {
    pub fn new(node: NodeId, port: u16) -> Self {
        EndpointAddress { node, port }
    }
}

impl fmt::Display for EndpointAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node, self.port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnectionId(pub u64);

impl fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Which end opened the connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Dialer,
    Listener,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ListenerHandle {
    pub addr: EndpointAddress,
    pub kind: TransportKind,
}

/// Local reference to one end of a connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnectionHandle {
    pub node: NodeId,
    pub id: ConnectionId,
    pub kind: TransportKind,
}

/// Stream identifier: a per-initiator counter starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId {
    pub initiator: Side,
    pub index: u32,
}

const LISTENER_BIT: u32 = 0x8000_0000;

impl StreamId {
    pub(crate) fn to_wire(self) -> u32 {
        match self.initiator {
            Side::Dialer => self.index,
            Side::Listener => self.index | LISTENER_BIT,
        }
    }

    pub(crate) fn from_wire(v: u32) -> Self {
        if v & LISTENER_BIT != 0 {
            StreamId { initiator: Side::Listener, index: v & !LISTENER_BIT }
        } else {
            StreamId { initiator: Side::Dialer, index: v }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamHandle {
    pub conn: ConnectionHandle,
    pub id: StreamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandshakeError {
    AlpnMismatch,
    UntrustedPeer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CloseReason {
    /// Closed by the application on either end.
    Application {
        code: u64,
        text: String,
        by_peer: bool,
    },
    /// No listener at the dialed address.
    Refused,
    Handshake(HandshakeError),
    /// Retransmission limit exhausted.
    Timeout,
}

impl fmt::Display for CloseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CloseReason::Application { code, text, by_peer } => {
                let who = if *by_peer { "peer" } else { "local" };
                write!(f, "{who} close code {code}")?;
                if !text.is_empty() {
                    write!(f, " ({text})")?;
                }
                Ok(())
            }
            CloseReason::Refused => f.write_str("connection refused"),
            CloseReason::Handshake(HandshakeError::AlpnMismatch) => f.write_str("alpn mismatch"),
            CloseReason::Handshake(HandshakeError::UntrustedPeer) => f.write_str("untrusted peer"),
            CloseReason::Timeout => f.write_str("timeout"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnState {
    Handshaking,
    Established,
    Closed(CloseReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportEvent {
    Accepted(ConnectionHandle),
    Established(ConnectionHandle),
    StreamOpened(StreamHandle),
    Data(StreamHandle, Bytes),
    Closed(ConnectionHandle, CloseReason),
}

impl TransportEvent {
    pub fn connection(&self) -> ConnectionHandle {
        match self {
            TransportEvent::Accepted(c) | TransportEvent::Established(c) | TransportEvent::Closed(c, _) => *c,
            TransportEvent::StreamOpened(s) | TransportEvent::Data(s, _) => s.conn,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("address {0} already bound")]
    AddressInUse(EndpointAddress),
    #[error("secure transport requires a security configuration")]
    MissingSecurityConfig,
    #[error("no direct link from {from} to {to}")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("connection is not established")]
    NotEstablished,
    #[error("stream limit of {0} reached")]
    StreamLimitExceeded(u32),
    #[error("stream is closed")]
    StreamClosed,
    #[error("connection is closed")]
    ConnectionClosed,
    #[error("unknown connection")]
    UnknownConnection,
    #[error("unknown stream")]
    UnknownStream,
}
