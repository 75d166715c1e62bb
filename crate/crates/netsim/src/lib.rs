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

//! Deterministic discrete-event network fabric.
//!
//! A [`Network`] owns a virtual clock with microsecond resolution, a queue of
//! events ordered by `(time, seq)`, a set of nodes joined by symmetric
//! point-to-point links with fixed one-way delay and i.i.d. Bernoulli loss,
//! and an append-only instrumentation stream. Identical seeds and identical
//! schedules give bit-identical runs.
//!
//! The fabric knows nothing about protocols: a [`Handler`] receives each
//! datagram delivery and timer expiry and may send datagrams or arm timers in
//! response. Timer tags are generic so a stack of protocols can share one
//! queue.

mod instrument;
mod link;
mod network;
mod time;

pub use instrument::{write_csv, Record, CSV_HEADER};
pub use link::{LinkId, LinkSpec, LinkStats, DEFAULT_MTU};
pub use network::{Datagram, EventKind, Handler, NetError, Network, NodeId, RunOutcome, SimEvent, StopReason, TimerId};
pub use time::SimTime;

/// Protocol numbers carried on datagrams, in the spirit of IP protocol ids.
pub mod proto {
    pub const PLAIN_STREAM: u8 = 6;
    pub const SECURE_MUX: u8 = 17;
    pub const OSPF: u8 = 89;
}
