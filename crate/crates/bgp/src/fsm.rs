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

//! Session finite state machine, as a pure transition function.

use std::fmt;
use std::time::Duration;

use roq_netsim::SimTime;

use crate::codec::{err, Notification, Open, Update};

/// Hold time used while waiting for the peer's Open.
pub const OPEN_HOLD_TIME: u16 = 240;
pub const DEFAULT_HOLD_TIME: u16 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BgpState {
    Idle,
    Connect,
    Active,
    OpenSent,
    OpenConfirm,
    Established,
}

impl fmt::Display for BgpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionParams {
    pub local_as: u32,
    pub local_id: u32,
    pub peer_as: u32,
    /// Proposed hold time in seconds; 0 disables hold and keepalive timers.
    pub hold_time: u16,
    /// Listen for the peer instead of dialing.
    pub passive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub params: SessionParams,
    pub state: BgpState,
    pub hold_deadline: Option<SimTime>,
    /// Negotiated hold time, valid from OpenConfirm on.
    pub hold_time: u16,
}

impl Session {
    pub fn new(params: SessionParams) -> Self {
        Session { params, state: BgpState::Idle, hold_deadline: None, hold_time: 0 }
    }

    pub fn keepalive_time(&self) -> u16 {
        keepalive_for(self.hold_time)
    }
}

/// Keepalive interval for a hold time: a third of it, at least 1 s.
pub fn keepalive_for(hold: u16) -> u16 {
    (hold / 3).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsmEvent {
    ManualStart,
    TransportEstablished,
    TransportFailed,
    OpenReceived(Open),
    KeepaliveReceived,
    UpdateReceived(Update),
    NotificationReceived(Notification),
    HoldTimerExpired,
    KeepaliveTimerExpired,
    /// The peer sent bytes that failed decoding or validation; carries the
    /// Notification code and subcode to answer with.
    MessageError(u8, u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsmAction {
    DialTransport,
    SendOpen,
    SendKeepalive,
    SendNotification(u8, u8),
    ProcessUpdate(Update),
    CloseTransport,
    /// (Re)arm the hold timer, in seconds.
    SetHoldTimer(u16),
    SetKeepaliveTimer(u16),
}

fn idle(s: &Session) -> Session {
    Session { params: s.params.clone(), state: BgpState::Idle, hold_deadline: None, hold_time: 0 }
}

fn fsm_error(s: &Session) -> (Session, Vec<FsmAction>) {
    let sub = match s.state {
        BgpState::OpenSent => 1,
        BgpState::OpenConfirm => 2,
        _ => 3,
    };
    (idle(s), vec![FsmAction::SendNotification(err::FSM, sub), FsmAction::CloseTransport])
}

fn after(now: SimTime, secs: u16) -> SimTime {
    now + Duration::from_secs(secs as u64)
}

/// Applies one event. `now` only anchors the hold deadline.
pub fn fsm_step(s: &Session, e: FsmEvent, now: SimTime) -> (Session, Vec<FsmAction>) {
    use BgpState::*;
    use FsmAction as A;
    use FsmEvent as E;

    let with = |state: BgpState, hold_deadline: Option<SimTime>, hold_time: u16| Session {
        params: s.params.clone(),
        state,
        hold_deadline,
        hold_time,
    };
    let unchanged = || (s.clone(), Vec::new());

    match (s.state, e) {
        (Idle, E::ManualStart) => {
            if s.params.passive {
                (with(Active, None, 0), vec![])
            } else {
                (with(Connect, None, 0), vec![A::DialTransport])
            }
        }
        (Idle, _) => unchanged(),
        (_, E::ManualStart) => unchanged(),

        (_, E::TransportFailed) => (idle(s), vec![]),
        (_, E::NotificationReceived(_)) => (idle(s), vec![A::CloseTransport]),

        (Connect | Active, E::TransportEstablished) => {
            if s.params.hold_time == 0 {
                (with(OpenSent, None, 0), vec![A::SendOpen])
            } else {
                (
                    with(OpenSent, Some(after(now, OPEN_HOLD_TIME)), 0),
                    vec![A::SendOpen, A::SetHoldTimer(OPEN_HOLD_TIME)],
                )
            }
        }
        (Connect | Active, E::HoldTimerExpired | E::KeepaliveTimerExpired) => unchanged(),
        (Connect | Active, _) => (idle(s), vec![A::CloseTransport]),

        (OpenSent | OpenConfirm | Established, E::HoldTimerExpired) => {
            (idle(s), vec![A::SendNotification(err::HOLD_EXPIRED, 0), A::CloseTransport])
        }
        (OpenSent | OpenConfirm | Established, E::MessageError(code, sub)) => {
            (idle(s), vec![A::SendNotification(code, sub), A::CloseTransport])
        }
        (_, E::TransportEstablished) => unchanged(),

        (OpenSent, E::OpenReceived(o)) => {
            let reject = |sub| (idle(s), vec![A::SendNotification(err::OPEN, sub), A::CloseTransport]);
            if o.version != 4 {
                return reject(1);
            }
            if o.my_as != s.params.peer_as {
                return reject(2);
            }
            if o.bgp_id == 0 || o.bgp_id == s.params.local_id {
                return reject(3);
            }
            if o.hold_time == 1 || o.hold_time == 2 {
                return reject(6);
            }
            let h = s.params.hold_time.min(o.hold_time);
            if h == 0 {
                (with(OpenConfirm, None, 0), vec![A::SendKeepalive])
            } else {
                (
                    with(OpenConfirm, Some(after(now, h)), h),
                    vec![A::SendKeepalive, A::SetHoldTimer(h), A::SetKeepaliveTimer(keepalive_for(h))],
                )
            }
        }
        (OpenSent, E::KeepaliveTimerExpired) => unchanged(),
        (OpenSent, _) => fsm_error(s),

        (OpenConfirm | Established, E::KeepaliveTimerExpired) => {
            if s.hold_time == 0 {
                unchanged()
            } else {
                (s.clone(), vec![A::SendKeepalive, A::SetKeepaliveTimer(s.keepalive_time())])
            }
        }
        (OpenConfirm | Established, E::KeepaliveReceived) => {
            let h = s.hold_time;
            if h == 0 {
                (with(Established, None, 0), vec![])
            } else {
                (with(Established, Some(after(now, h)), h), vec![A::SetHoldTimer(h)])
            }
        }
        (Established, E::UpdateReceived(u)) => {
            let h = s.hold_time;
            if h == 0 {
                (s.clone(), vec![A::ProcessUpdate(u)])
            } else {
                (with(Established, Some(after(now, h)), h), vec![A::ProcessUpdate(u), A::SetHoldTimer(h)])
            }
        }
        (OpenConfirm | Established, E::OpenReceived(_) | E::UpdateReceived(_)) => fsm_error(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keepalive_floor() {
        assert_eq!(keepalive_for(90), 30);
        assert_eq!(keepalive_for(4), 1);
        assert_eq!(keepalive_for(3), 1);
        assert_eq!(keepalive_for(10), 3);
    }
}
