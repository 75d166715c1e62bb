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

//! A minimal BGP-4 speaker whose sessions run over any transport offered by
//! `roq-transport`.
//!
//! The protocol core is pure: [`fsm_step`], [`decide`], [`process_update`]
//! and [`export`] are functions of their inputs and explicit RIB state.
//! [`BgpSpeaker`] binds them to transport connections and timers, and
//! [`BgpFabric`] hosts several speakers inside one simulated network.

mod codec;
pub mod conformance;
mod fabric;
mod fsm;
mod prefix;
mod rib;
mod speaker;

pub use codec::{
    decode_message, encode_message, err, BgpMessage, DecodeError, EncodeError, Notification, Open, Origin, PathAttrs,
    Update, AS_TRANS, HEADER_LEN, MARKER, MAX_MESSAGE_LEN,
};
pub use fabric::{BgpFabric, BgpTag};
pub use fsm::{
    fsm_step, keepalive_for, BgpState, FsmAction, FsmEvent, Session, SessionParams, DEFAULT_HOLD_TIME, OPEN_HOLD_TIME,
};
pub use prefix::{Family, Prefix, PrefixError};
pub use rib::{decide, export, process_update, PeerId, PeerRef, Rib, RibDelta, RibEntry, UpdateError};
pub use speaker::{
    BgpObserver, BgpSpeaker, BgpTimer, BgpTimerKind, Ctx, Direction, PeerConfig, SpeakerConfig, SpeakerStats, BGP_PORT,
};
