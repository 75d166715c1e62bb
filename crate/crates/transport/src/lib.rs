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

//! Simulated reliable transports for routing sessions.
//!
//! Two backends share one API. `PlainStream` behaves like TCP: a handshake
//! of one round trip and a single implicit byte stream. `SecureMux` behaves
//! like QUIC: a one round trip handshake that authenticates both ends by
//! certificate and negotiates an application protocol, then any number of
//! independent streams, each datagram carrying an integrity tag.
//!
//! Both retransmit on a timer with exponential backoff and cumulative
//! acknowledgements, so streams deliver bytes in order, exactly once, and
//! never deliver a byte that was not sent.

mod api;
mod identity;
mod stack;
mod stream;
pub mod wire;

pub use api::{
    CloseReason, ConnState, ConnectionHandle, ConnectionId, EndpointAddress, HandshakeError, ListenerHandle, Side,
    StreamHandle, StreamId, TransportError, TransportEvent, TransportKind,
};
pub use identity::{Certificate, Fingerprint, SecurityConfig, Trust, ALPN_BGP, ALPN_OSPF, NONCE_LEN};
pub use stack::{Transport, TransportConfig, TransportStats, TransportTimer};
