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

//! Scripted event traces through the session state machine.
//!
//! Each trace starts from Idle and lists, per step, the event fed in, the
//! state expected afterwards and the exact action list. [`run_trace`]
//! replays one and reports the first divergence.

use roq_netsim::SimTime;

use crate::codec::{Notification, Open, PathAttrs, Update};
use crate::fsm::{fsm_step, keepalive_for, BgpState, FsmAction, FsmEvent, Session, SessionParams};

use BgpState::*;
use FsmAction as A;
use FsmEvent as E;

pub type Step = (FsmEvent, BgpState, Vec<FsmAction>);

#[derive(Debug, Clone)]
pub struct Trace {
    pub name: &'static str,
    pub params: SessionParams,
    pub steps: Vec<Step>,
}

const LOCAL_ID: u32 = 0x0A00_0001;

fn params(passive: bool, hold: u16) -> SessionParams {
    SessionParams { local_as: 64501, local_id: LOCAL_ID, peer_as: 64502, hold_time: hold, passive }
}

fn open(hold: u16) -> Open {
    Open { version: 4, my_as: 64502, hold_time: hold, bgp_id: 0x0A00_0002 }
}

fn update() -> Update {
    Update::announce(PathAttrs::new(vec![64502], 2), vec!["10.0.0.0/8".parse().unwrap()])
}

fn cease() -> Notification {
    Notification { code: 6, subcode: 2, data: vec![] }
}

fn bring_up(hold: u16, local: u16) -> Vec<Step> {
    let h = hold.min(local);
    vec![
        (E::ManualStart, Connect, vec![A::DialTransport]),
        (E::TransportEstablished, OpenSent, vec![A::SendOpen, A::SetHoldTimer(240)]),
        (
            E::OpenReceived(open(hold)),
            OpenConfirm,
            vec![A::SendKeepalive, A::SetHoldTimer(h), A::SetKeepaliveTimer(keepalive_for(h))],
        ),
        (E::KeepaliveReceived, Established, vec![A::SetHoldTimer(h)]),
    ]
}

fn prefix_of(steps: &[Step], n: usize) -> Vec<Step> {
    steps[..n].to_vec()
}

fn with(mut base: Vec<Step>, extra: Vec<Step>) -> Vec<Step> {
    base.extend(extra);
    base
}

fn open_sent() -> Vec<Step> {
    prefix_of(&bring_up(90, 90), 2)
}

fn open_confirm() -> Vec<Step> {
    prefix_of(&bring_up(90, 90), 3)
}

fn established() -> Vec<Step> {
    bring_up(90, 90)
}

pub fn fsm_traces() -> Vec<Trace> {
    let t = |name, params, steps| Trace { name, params, steps };
    let dialer = params(false, 90);
    let mut bad_as = open(90);
    bad_as.my_as = 65000;
    let mut same_id = open(90);
    same_id.bgp_id = LOCAL_ID;
    let mut v3 = open(90);
    v3.version = 3;
    let notify = || (E::NotificationReceived(cease()), Idle, vec![A::CloseTransport]);
    vec![
        t("manual start dials", dialer.clone(), vec![(E::ManualStart, Connect, vec![A::DialTransport])]),
        t("passive start waits", params(true, 90), vec![(E::ManualStart, Active, vec![])]),
        t("full bring-up", dialer.clone(), established()),
        t(
            "passive bring-up",
            params(true, 90),
            with(vec![(E::ManualStart, Active, vec![])], established()[1..].to_vec()),
        ),
        t("min hold negotiation", params(false, 180), prefix_of(&bring_up(90, 180), 3)),
        t("keepalive floor of 1 s", dialer.clone(), bring_up(4, 90)),
        t(
            "zero hold disables timers",
            dialer.clone(),
            with(
                open_sent(),
                vec![
                    (E::OpenReceived(open(0)), OpenConfirm, vec![A::SendKeepalive]),
                    (E::KeepaliveReceived, Established, vec![]),
                    (E::KeepaliveTimerExpired, Established, vec![]),
                ],
            ),
        ),
        t(
            "zero local hold skips open hold",
            params(false, 0),
            vec![
                (E::ManualStart, Connect, vec![A::DialTransport]),
                (E::TransportEstablished, OpenSent, vec![A::SendOpen]),
                (E::OpenReceived(open(90)), OpenConfirm, vec![A::SendKeepalive]),
            ],
        ),
        t(
            "hold expiry in Established",
            dialer.clone(),
            with(established(), vec![(E::HoldTimerExpired, Idle, vec![A::SendNotification(4, 0), A::CloseTransport])]),
        ),
        t(
            "hold expiry in OpenSent",
            dialer.clone(),
            with(open_sent(), vec![(E::HoldTimerExpired, Idle, vec![A::SendNotification(4, 0), A::CloseTransport])]),
        ),
        t(
            "hold expiry in OpenConfirm",
            dialer.clone(),
            with(open_confirm(), vec![(E::HoldTimerExpired, Idle, vec![A::SendNotification(4, 0), A::CloseTransport])]),
        ),
        t(
            "keepalive timer in Established",
            dialer.clone(),
            with(
                established(),
                vec![
                    (E::KeepaliveTimerExpired, Established, vec![A::SendKeepalive, A::SetKeepaliveTimer(30)]),
                    (E::KeepaliveReceived, Established, vec![A::SetHoldTimer(90)]),
                ],
            ),
        ),
        t(
            "keepalive timer in OpenConfirm",
            dialer.clone(),
            with(
                open_confirm(),
                vec![(E::KeepaliveTimerExpired, OpenConfirm, vec![A::SendKeepalive, A::SetKeepaliveTimer(30)])],
            ),
        ),
        t(
            "update processed, hold restarted",
            dialer.clone(),
            with(
                established(),
                vec![(E::UpdateReceived(update()), Established, vec![A::ProcessUpdate(update()), A::SetHoldTimer(90)])],
            ),
        ),
        t(
            "update in OpenSent",
            dialer.clone(),
            with(
                open_sent(),
                vec![(E::UpdateReceived(update()), Idle, vec![A::SendNotification(5, 1), A::CloseTransport])],
            ),
        ),
        t(
            "keepalive in OpenSent",
            dialer.clone(),
            with(open_sent(), vec![(E::KeepaliveReceived, Idle, vec![A::SendNotification(5, 1), A::CloseTransport])]),
        ),
        t(
            "update in OpenConfirm",
            dialer.clone(),
            with(
                open_confirm(),
                vec![(E::UpdateReceived(update()), Idle, vec![A::SendNotification(5, 2), A::CloseTransport])],
            ),
        ),
        t(
            "open in Established",
            dialer.clone(),
            with(
                established(),
                vec![(E::OpenReceived(open(90)), Idle, vec![A::SendNotification(5, 3), A::CloseTransport])],
            ),
        ),
        t("notification in Connect", dialer.clone(), with(prefix_of(&established(), 1), vec![notify()])),
        t("notification in OpenSent", dialer.clone(), with(open_sent(), vec![notify()])),
        t("notification in OpenConfirm", dialer.clone(), with(open_confirm(), vec![notify()])),
        t("notification in Established", dialer.clone(), with(established(), vec![notify()])),
        t(
            "transport failure in Connect",
            dialer.clone(),
            with(prefix_of(&established(), 1), vec![(E::TransportFailed, Idle, vec![])]),
        ),
        t(
            "transport failure in Active",
            params(true, 90),
            vec![(E::ManualStart, Active, vec![]), (E::TransportFailed, Idle, vec![])],
        ),
        t("transport failure in OpenSent", dialer.clone(), with(open_sent(), vec![(E::TransportFailed, Idle, vec![])])),
        t(
            "transport failure in Established",
            dialer.clone(),
            with(established(), vec![(E::TransportFailed, Idle, vec![])]),
        ),
        t(
            "bad peer AS",
            dialer.clone(),
            with(
                open_sent(),
                vec![(E::OpenReceived(bad_as), Idle, vec![A::SendNotification(2, 2), A::CloseTransport])],
            ),
        ),
        t(
            "unacceptable hold time",
            dialer.clone(),
            with(
                open_sent(),
                vec![(E::OpenReceived(open(2)), Idle, vec![A::SendNotification(2, 6), A::CloseTransport])],
            ),
        ),
        t(
            "peer reuses our identifier",
            dialer.clone(),
            with(
                open_sent(),
                vec![(E::OpenReceived(same_id), Idle, vec![A::SendNotification(2, 3), A::CloseTransport])],
            ),
        ),
        t(
            "unsupported version",
            dialer.clone(),
            with(open_sent(), vec![(E::OpenReceived(v3), Idle, vec![A::SendNotification(2, 1), A::CloseTransport])]),
        ),
        t(
            "malformed update in Established",
            dialer.clone(),
            with(
                established(),
                vec![(E::MessageError(3, 11), Idle, vec![A::SendNotification(3, 11), A::CloseTransport])],
            ),
        ),
        t(
            "header error in OpenSent",
            dialer.clone(),
            with(open_sent(), vec![(E::MessageError(1, 1), Idle, vec![A::SendNotification(1, 1), A::CloseTransport])]),
        ),
        t(
            "idle ignores all but start",
            dialer.clone(),
            vec![
                (E::HoldTimerExpired, Idle, vec![]),
                (E::KeepaliveReceived, Idle, vec![]),
                (E::TransportEstablished, Idle, vec![]),
                (E::TransportFailed, Idle, vec![]),
                (E::ManualStart, Connect, vec![A::DialTransport]),
                (E::ManualStart, Connect, vec![]),
            ],
        ),
        t(
            "stale timers while connecting",
            dialer.clone(),
            vec![
                (E::ManualStart, Connect, vec![A::DialTransport]),
                (E::HoldTimerExpired, Connect, vec![]),
                (E::KeepaliveTimerExpired, Connect, vec![]),
            ],
        ),
        t(
            "message while connecting resets",
            params(true, 90),
            vec![(E::ManualStart, Active, vec![]), (E::KeepaliveReceived, Idle, vec![A::CloseTransport])],
        ),
        t(
            "restart after teardown",
            dialer,
            with(with(established(), vec![(E::TransportFailed, Idle, vec![])]), established()),
        ),
    ]
}

/// Replays a trace; `Err` names the first step that diverged.
pub fn run_trace(trace: &Trace) -> Result<Session, String> {
    let mut s = Session::new(trace.params.clone());
    for (n, (ev, state, actions)) in trace.steps.iter().enumerate() {
        let (next, got) = fsm_step(&s, ev.clone(), SimTime::from_secs(n as u64));
        if next.state != *state || got != *actions {
            return Err(format!(
                "{}: step {n} ({ev:?}) gave {:?} {got:?}, expected {state:?} {actions:?}",
                trace.name, next.state
            ));
        }
        let timed = matches!(next.state, OpenSent | OpenConfirm | Established);
        if !timed && next.hold_deadline.is_some() {
            return Err(format!("{}: step {n} left a hold deadline in {:?}", trace.name, next.state));
        }
        s = next;
    }
    Ok(s)
}
