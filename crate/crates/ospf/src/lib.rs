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

//! Simplified single-area OSPF over point-to-point links.
//!
//! Routers discover each other with Hellos, synchronize their link state
//! databases through the DBD / LsRequest / LsUpdate / LsAck exchange, flood
//! changes and run SPF. In `OverQuic` mode, once a neighbor reaches TwoWay
//! the routers open a `SecureMux` connection and carry every packet except
//! Hellos on one stream of it. With `delegate_acks` the stream's reliability
//! replaces OSPF acknowledgements, retransmissions and fragmentation.

pub mod conformance;
mod fabric;
mod flood;
mod lsdb;
mod neighbor;
mod packet;
mod router;
mod spf;

pub use fabric::{OspfFabric, OspfTag};
pub use flood::{install_and_flood, FloodAction, FloodCtx, FloodError, FloodOutcome};
pub use lsdb::{lsdb_compare, Freshness, KeyMismatch, Lsdb, MAX_AGE_DIFF};
pub use neighbor::{initial_dd_seq, neighbor_fsm_step, Mode, NbrAction, NbrConfig, NbrEvent, NbrState, Neighbor};
pub use packet::{
    decode_framed, decode_packet, encode_framed, encode_packet, CodecError, Dbd, DdFlags, Hello, Lsa, LsaBody,
    LsaHeader, LsaKey, LsaType, OspfPacket, PacketBody, PacketType, RouterId, RouterLink, HEADER_LEN, INITIAL_SEQ,
    MAX_AGE,
};
pub use router::{
    Ctx, Interface, OspfConfig, OspfObserver, OspfRouter, OspfStats, OspfTimer, PacketPath, MAX_PACKET, OSPF_PORT,
};
pub use spf::{confirmed_links, spf_compute, Destination, Route, RouteTable};
