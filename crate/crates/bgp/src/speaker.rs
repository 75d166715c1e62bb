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

//! Event-driven BGP speaker: binds sessions to transport connections,
//! feeds the session FSM and propagates RIB changes to peers.

use std::time::Duration;

use bytes::BytesMut;
use log::{debug, info, warn};
use roq_netsim::{Network, NodeId, SimTime, TimerId};
use roq_transport::{
    ConnectionHandle, EndpointAddress, SecurityConfig, StreamHandle, Transport, TransportEvent, TransportKind,
    TransportTimer,
};

use crate::codec::{decode_message, encode_message, err, BgpMessage, DecodeError, Open, PathAttrs};
use crate::fsm::{fsm_step, BgpState, FsmAction, FsmEvent, Session, SessionParams, DEFAULT_HOLD_TIME};
use crate::prefix::Prefix;
use crate::rib::{export, process_update, PeerId, PeerRef, Rib, RibDelta};

pub const BGP_PORT: u16 = 179;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BgpTimerKind {
    Hold,
    Keepalive,
    Restart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BgpTimer {
    pub session: u32,
    pub kind: BgpTimerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Measurement taps. Every method has a no-op default.
pub trait BgpObserver {
    /// Fires once per prefix listed in a received Update, whether announced
    /// or withdrawn.
    fn on_update_received(&mut self, _router: NodeId, _peer: PeerId, _prefix: &Prefix, _t: SimTime) {}
    fn on_locrib_change(&mut self, _router: NodeId, _prefix: &Prefix, _t: SimTime) {}
    fn on_message(&mut self, _router: NodeId, _peer: PeerId, _dir: Direction, _bytes: &[u8], _t: SimTime) {}
    fn on_session_state(&mut self, _router: NodeId, _peer: PeerId, _state: BgpState, _t: SimTime) {}
}

impl BgpObserver for () {}

#[derive(Debug, Clone)]
pub struct PeerConfig {
    pub node: NodeId,
    pub asn: u32,
    pub bgp_id: u32,
    pub transport: TransportKind,
}

#[derive(Debug, Clone)]
pub struct SpeakerConfig {
    pub node: NodeId,
    pub asn: u32,
    pub bgp_id: u32,
    pub hold_time: u16,
    pub port: u16,
    /// Required when any peer uses SecureMux.
    pub security: Option<SecurityConfig>,
    /// Delay before an Idle session is started again.
    pub restart_delay: Duration,
}

impl SpeakerConfig {
    pub fn new(node: NodeId, asn: u32, bgp_id: u32) -> Self {
        SpeakerConfig {
            node,
            asn,
            bgp_id,
            hold_time: DEFAULT_HOLD_TIME,
            port: BGP_PORT,
            security: None,
            restart_delay: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SpeakerStats {
    pub messages_sent: u64,
    pub messages_received: u64,
    pub updates_sent: u64,
    pub updates_received: u64,
    /// RIB entries found holding the local AS; must stay zero.
    pub loop_violations: u64,
}

struct SessionCtx {
    peer: PeerConfig,
    fsm: Session,
    conn: Option<ConnectionHandle>,
    stream: Option<StreamHandle>,
    rx: BytesMut,
    out: Vec<u8>,
    hold_timer: Option<TimerId>,
    keepalive_timer: Option<TimerId>,
    restart_timer: Option<TimerId>,
}

impl SessionCtx {
    fn peer_ref(&self) -> PeerRef {
        PeerRef { id: PeerId(self.peer.bgp_id), asn: self.peer.asn }
    }
}

pub struct BgpSpeaker {
    cfg: SpeakerConfig,
    rib: Rib,
    sessions: Vec<SessionCtx>,
    stats: SpeakerStats,
}

/// Everything a speaker borrows from its surroundings while handling one
/// event.
pub struct Ctx<'a, T> {
    pub net: &'a mut Network<T>,
    pub transport: &'a mut Transport,
    pub observer: &'a mut dyn BgpObserver,
}

impl BgpSpeaker {
    pub fn new(cfg: SpeakerConfig, peers: Vec<PeerConfig>) -> Self {
        let sessions = peers
            .into_iter()
            .map(|peer| {
                let params = SessionParams {
                    local_as: cfg.asn,
                    local_id: cfg.bgp_id,
                    peer_as: peer.asn,
                    hold_time: cfg.hold_time,
                    // The lower identifier dials.
                    passive: peer.bgp_id < cfg.bgp_id,
                };
                SessionCtx {
                    peer,
                    fsm: Session::new(params),
                    conn: None,
                    stream: None,
                    rx: BytesMut::new(),
                    out: Vec::new(),
                    hold_timer: None,
                    keepalive_timer: None,
                    restart_timer: None,
                }
            })
            .collect();
        BgpSpeaker { cfg, rib: Rib::new(), sessions, stats: SpeakerStats::default() }
    }

    pub fn config(&self) -> &SpeakerConfig {
        &self.cfg
    }

    pub fn node(&self) -> NodeId {
        self.cfg.node
    }

    pub fn rib(&self) -> &Rib {
        &self.rib
    }

    pub fn stats(&self) -> SpeakerStats {
        self.stats
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerConfig> {
        self.sessions.iter().map(|s| &s.peer)
    }

    pub fn session_state(&self, peer: PeerId) -> Option<BgpState> {
        self.sessions.iter().find(|s| PeerId(s.peer.bgp_id) == peer).map(|s| s.fsm.state)
    }

    pub fn all_established(&self) -> bool {
        self.sessions.iter().all(|s| s.fsm.state == BgpState::Established)
    }

    /// Opens listeners and starts every session.
    pub fn start<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let mut kinds: Vec<TransportKind> =
            self.sessions.iter().filter(|s| s.fsm.params.passive).map(|s| s.peer.transport).collect();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            let sec = match kind {
                TransportKind::PlainStream => None,
                TransportKind::SecureMux => self.cfg.security.clone(),
            };
            let addr = EndpointAddress::new(self.cfg.node, self.cfg.port);
            if let Err(e) = cx.transport.open_listener(addr, kind, sec) {
                warn!("{}: cannot listen on {addr} ({kind}): {e}", self.cfg.node);
            }
        }
        for i in 0..self.sessions.len() {
            self.feed(cx, i, FsmEvent::ManualStart);
        }
        self.flush(cx);
    }

    /// Installs locally originated routes and advertises them.
    pub fn originate<T>(&mut self, cx: &mut Ctx<'_, T>, routes: Vec<(Prefix, Vec<u32>)>)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let id = self.cfg.bgp_id;
        let delta = self.rib.originate(routes.into_iter().map(|(p, path)| (p, PathAttrs::new(path, id))), cx.net.now());
        self.announce(cx, &delta, None);
        self.flush(cx);
    }

    pub fn on_transport_event<T>(&mut self, cx: &mut Ctx<'_, T>, ev: TransportEvent)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let conn = ev.connection();
        match ev {
            TransportEvent::Accepted(c) => {
                let peer_node = cx.transport.peer_node(c);
                let slot = self.sessions.iter().position(|s| {
                    Some(s.peer.node) == peer_node
                        && s.peer.transport == c.kind
                        && s.fsm.state == BgpState::Active
                        && s.conn.is_none()
                });
                match slot {
                    Some(i) => self.sessions[i].conn = Some(c),
                    None => {
                        debug!("{}: refusing unexpected connection from {peer_node:?}", self.cfg.node);
                        cx.transport.close(cx.net, c, err::CEASE as u64, "no session");
                    }
                }
            }
            TransportEvent::Established(c) => {
                let Some(i) = self.by_conn(c) else { return };
                let s = &mut self.sessions[i];
                if !s.fsm.params.passive || c.kind == TransportKind::PlainStream {
                    match cx.transport.open_stream(c) {
                        Ok(st) => s.stream = Some(st),
                        Err(e) => warn!("{}: open_stream failed: {e}", self.cfg.node),
                    }
                }
                self.feed(cx, i, FsmEvent::TransportEstablished);
            }
            TransportEvent::StreamOpened(st) => {
                let Some(i) = self.by_conn(conn) else { return };
                let s = &mut self.sessions[i];
                if s.stream.is_none() {
                    s.stream = Some(st);
                }
            }
            TransportEvent::Data(st, bytes) => {
                let Some(i) = self.by_conn(conn) else { return };
                let s = &mut self.sessions[i];
                if s.stream.is_none() {
                    s.stream = Some(st);
                }
                if s.stream != Some(st) {
                    return;
                }
                s.rx.extend_from_slice(&bytes);
                self.drain_rx(cx, i);
            }
            TransportEvent::Closed(c, reason) => {
                let Some(i) = self.by_conn(c) else { return };
                debug!("{}: transport to {} closed: {reason}", self.cfg.node, self.sessions[i].peer.node);
                let s = &mut self.sessions[i];
                s.conn = None;
                s.stream = None;
                s.rx.clear();
                s.out.clear();
                self.feed(cx, i, FsmEvent::TransportFailed);
            }
        }
        self.flush(cx);
    }

    pub fn on_timer<T>(&mut self, cx: &mut Ctx<'_, T>, t: BgpTimer, id: TimerId)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let i = t.session as usize;
        let Some(s) = self.sessions.get_mut(i) else { return };
        let slot = match t.kind {
            BgpTimerKind::Hold => &mut s.hold_timer,
            BgpTimerKind::Keepalive => &mut s.keepalive_timer,
            BgpTimerKind::Restart => &mut s.restart_timer,
        };
        if *slot != Some(id) {
            return;
        }
        *slot = None;
        let ev = match t.kind {
            BgpTimerKind::Hold => FsmEvent::HoldTimerExpired,
            BgpTimerKind::Keepalive => FsmEvent::KeepaliveTimerExpired,
            BgpTimerKind::Restart => FsmEvent::ManualStart,
        };
        self.feed(cx, i, ev);
        self.flush(cx);
    }

    fn by_conn(&self, c: ConnectionHandle) -> Option<usize> {
        self.sessions.iter().position(|s| s.conn == Some(c))
    }

    fn drain_rx<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        loop {
            let s = &mut self.sessions[i];
            if s.conn.is_none() {
                return;
            }
            let peer = PeerId(s.peer.bgp_id);
            let (msg, used) = match decode_message(&s.rx) {
                Ok(ok) => ok,
                Err(DecodeError::NeedMoreData) => return,
                Err(e) => {
                    let (code, sub) = e.notification().expect("not NeedMoreData");
                    warn!("{}: bad message from {}: {e}", self.cfg.node, s.peer.node);
                    s.rx.clear();
                    self.feed(cx, i, FsmEvent::MessageError(code, sub));
                    return;
                }
            };
            let raw = s.rx.split_to(used);
            self.stats.messages_received += 1;
            cx.observer.on_message(self.cfg.node, peer, Direction::Received, &raw, cx.net.now());
            let ev = match msg {
                BgpMessage::Open(o) => FsmEvent::OpenReceived(o),
                BgpMessage::Keepalive => FsmEvent::KeepaliveReceived,
                BgpMessage::Notification(n) => {
                    info!(
                        "{}: notification ({}, {}) from {}",
                        self.cfg.node, n.code, n.subcode, self.sessions[i].peer.node
                    );
                    FsmEvent::NotificationReceived(n)
                }
                BgpMessage::Update(u) => {
                    self.stats.updates_received += 1;
                    FsmEvent::UpdateReceived(u)
                }
            };
            self.feed(cx, i, ev);
        }
    }

    /// Runs one FSM event and carries out the resulting actions.
    fn feed<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize, ev: FsmEvent)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let now = cx.net.now();
        let before = self.sessions[i].fsm.state;
        let (next, actions) = fsm_step(&self.sessions[i].fsm, ev, now);
        self.sessions[i].fsm = next;
        let mut follow_up = None;
        for a in actions {
            match a {
                FsmAction::DialTransport => {
                    let s = &self.sessions[i];
                    let remote = EndpointAddress::new(s.peer.node, self.cfg.port);
                    let sec = match s.peer.transport {
                        TransportKind::PlainStream => None,
                        TransportKind::SecureMux => self.cfg.security.clone(),
                    };
                    match cx.transport.dial(cx.net, self.cfg.node, remote, s.peer.transport, sec) {
                        Ok(c) => self.sessions[i].conn = Some(c),
                        Err(e) => {
                            warn!("{}: dial {remote} failed: {e}", self.cfg.node);
                            follow_up = Some(FsmEvent::TransportFailed);
                        }
                    }
                }
                FsmAction::SendOpen => {
                    let open = BgpMessage::Open(Open {
                        version: 4,
                        my_as: self.cfg.asn,
                        hold_time: self.cfg.hold_time,
                        bgp_id: self.cfg.bgp_id,
                    });
                    self.send(cx, i, &open);
                }
                FsmAction::SendKeepalive => self.send(cx, i, &BgpMessage::Keepalive),
                FsmAction::SendNotification(code, sub) => self.send(cx, i, &BgpMessage::notification(code, sub)),
                FsmAction::ProcessUpdate(u) => {
                    let peer = self.sessions[i].peer_ref();
                    for p in u.prefixes() {
                        cx.observer.on_update_received(self.cfg.node, peer.id, p, now);
                    }
                    match process_update(&mut self.rib, peer, &u, self.cfg.asn, now) {
                        Ok(delta) => {
                            for p in &u.nlri {
                                self.check_loops(peer.id, p);
                            }
                            self.announce(cx, &delta, None);
                        }
                        Err(e) => {
                            warn!("{}: rejecting update from {}: {e}", self.cfg.node, self.sessions[i].peer.node);
                            let (code, sub) = e.notification();
                            follow_up = Some(FsmEvent::MessageError(code, sub));
                        }
                    }
                }
                FsmAction::CloseTransport => {
                    self.flush_one(cx, i);
                    let s = &mut self.sessions[i];
                    s.stream = None;
                    s.rx.clear();
                    if let Some(c) = s.conn.take() {
                        cx.transport.close(cx.net, c, 0, "");
                    }
                }
                FsmAction::SetHoldTimer(secs) => self.arm(cx, i, BgpTimerKind::Hold, secs),
                FsmAction::SetKeepaliveTimer(secs) => self.arm(cx, i, BgpTimerKind::Keepalive, secs),
            }
        }
        let after = self.sessions[i].fsm.state;
        if after != before {
            let peer = PeerId(self.sessions[i].peer.bgp_id);
            debug!("{}: session with {} {before} -> {after}", self.cfg.node, self.sessions[i].peer.node);
            cx.observer.on_session_state(self.cfg.node, peer, after, now);
            if after == BgpState::Idle {
                self.session_down(cx, i);
            } else if after == BgpState::Established {
                let all: RibDelta = self.rib.loc_rib().keys().copied().collect();
                self.announce(cx, &all, Some(i));
            }
        }
        if let Some(ev) = follow_up {
            self.feed(cx, i, ev);
        }
    }

    fn session_down<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize)
    where
        T: From<TransportTimer> + From<BgpTimer>,
    {
        let s = &mut self.sessions[i];
        for t in [s.hold_timer.take(), s.keepalive_timer.take()].into_iter().flatten() {
            cx.net.cancel_timer(t);
        }
        s.stream = None;
        s.rx.clear();
        s.out.clear();
        if let Some(c) = s.conn.take() {
            cx.transport.close(cx.net, c, 0, "");
        }
        let peer = PeerId(s.peer.bgp_id);
        let delta = self.rib.drop_peer(peer);
        self.announce(cx, &delta, None);
        let at = cx.net.now() + self.cfg.restart_delay;
        let tag = BgpTimer { session: i as u32, kind: BgpTimerKind::Restart };
        if let Some(old) = self.sessions[i].restart_timer.take() {
            cx.net.cancel_timer(old);
        }
        let id = cx.net.set_timer(self.cfg.node, tag.into(), at).expect("future deadline");
        self.sessions[i].restart_timer = Some(id);
    }

    fn check_loops(&mut self, peer: PeerId, p: &Prefix) {
        let asn = self.cfg.asn;
        let bad = |e: Option<&crate::rib::RibEntry>| e.is_some_and(|e| e.attrs.as_path.contains(&asn));
        if bad(self.rib.adj_in_entry(peer, p)) || bad(self.rib.best(p)) {
            warn!("{}: loop in RIB for {p}", self.cfg.node);
            self.stats.loop_violations += 1;
        }
    }

    /// Exports `delta` to every Established session, or only to `only`.
    fn announce<T>(&mut self, cx: &mut Ctx<'_, T>, delta: &RibDelta, only: Option<usize>) {
        if delta.is_empty() {
            return;
        }
        let now = cx.net.now();
        for p in delta {
            cx.observer.on_locrib_change(self.cfg.node, p, now);
        }
        for i in 0..self.sessions.len() {
            if only.is_some_and(|o| o != i) || self.sessions[i].fsm.state != BgpState::Established {
                continue;
            }
            let to = self.sessions[i].peer_ref();
            for u in export(&self.rib, delta, to, self.cfg.asn, self.cfg.bgp_id) {
                self.stats.updates_sent += 1;
                self.send(cx, i, &BgpMessage::Update(u));
            }
        }
    }

    fn send<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize, m: &BgpMessage) {
        let bytes = match encode_message(m) {
            Ok(b) => b,
            Err(e) => {
                warn!("{}: cannot encode message: {e}", self.cfg.node);
                return;
            }
        };
        let s = &mut self.sessions[i];
        if s.conn.is_none() {
            return;
        }
        self.stats.messages_sent += 1;
        cx.observer.on_message(self.cfg.node, PeerId(s.peer.bgp_id), Direction::Sent, &bytes, cx.net.now());
        s.out.extend_from_slice(&bytes);
    }

    fn arm<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize, kind: BgpTimerKind, secs: u16)
    where
        T: From<BgpTimer>,
    {
        let s = &mut self.sessions[i];
        let slot = match kind {
            BgpTimerKind::Hold => &mut s.hold_timer,
            BgpTimerKind::Keepalive => &mut s.keepalive_timer,
            BgpTimerKind::Restart => &mut s.restart_timer,
        };
        if let Some(old) = slot.take() {
            cx.net.cancel_timer(old);
        }
        let at = cx.net.now() + Duration::from_secs(secs as u64);
        let tag = BgpTimer { session: i as u32, kind };
        *slot = Some(cx.net.set_timer(self.cfg.node, tag.into(), at).expect("future deadline"));
    }

    fn flush<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer>,
    {
        for i in 0..self.sessions.len() {
            self.flush_one(cx, i);
        }
    }

    /// Writes buffered messages once the session has a stream.
    fn flush_one<T>(&mut self, cx: &mut Ctx<'_, T>, i: usize)
    where
        T: From<TransportTimer>,
    {
        let s = &mut self.sessions[i];
        let Some(st) = s.stream else { return };
        if s.out.is_empty() {
            return;
        }
        let out = std::mem::take(&mut s.out);
        if let Err(e) = cx.transport.stream_send(cx.net, st, &out) {
            debug!("{}: send failed: {e}", self.cfg.node);
        }
    }
}
