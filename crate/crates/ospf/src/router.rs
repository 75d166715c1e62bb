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

//! Event-driven OSPF router: hellos, adjacencies, flooding and routes.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use bytes::{Bytes, BytesMut};
use log::{debug, info, warn};
use roq_bgp::Prefix;
use roq_netsim::{proto, Datagram, LinkId, Network, NodeId, SimTime, TimerId};
use roq_transport::{
    ConnectionHandle, EndpointAddress, SecurityConfig, StreamHandle, Transport, TransportEvent, TransportKind,
    TransportTimer,
};

use crate::flood::{install_and_flood, FloodAction, FloodCtx, FloodError, FloodOutcome};
use crate::lsdb::Lsdb;
use crate::neighbor::{neighbor_fsm_step, Mode, NbrAction, NbrConfig, NbrEvent, NbrState, Neighbor};
use crate::packet::{
    decode_framed, decode_packet, encode_framed, encode_packet, CodecError, Hello, Lsa, LsaBody, LsaHeader, LsaKey,
    LsaType, OspfPacket, PacketBody, PacketType, RouterId, RouterLink, HEADER_LEN, INITIAL_SEQ, LSA_HEADER_LEN,
    LSA_KEY_LEN, MAX_AGE,
};
use crate::spf::{spf_compute, RouteTable};

pub const OSPF_PORT: u16 = 89;
/// Largest packet when OSPF does its own fragmentation.
pub const MAX_PACKET: usize = 1200;
/// Bound on a single stream record when fragmentation is left to the stream.
const MAX_STREAM_PACKET: usize = 60_000;

#[derive(Debug, Clone)]
pub struct OspfConfig {
    pub router_id: RouterId,
    pub node: NodeId,
    pub mode: Mode,
    pub delegate_acks: bool,
    pub hello_interval: u16,
    pub dead_interval: u16,
    pub rxmt_interval: u16,
    pub max_quic_retries: u8,
    pub max_packet: usize,
    pub port: u16,
    /// Required in `OverQuic` mode.
    pub security: Option<SecurityConfig>,
}

impl OspfConfig {
    pub fn new(node: NodeId, mode: Mode) -> Self {
        OspfConfig {
            router_id: RouterId(node.0),
            node,
            mode,
            delegate_acks: false,
            hello_interval: 10,
            dead_interval: 40,
            rxmt_interval: 5,
            max_quic_retries: 5,
            max_packet: MAX_PACKET,
            port: OSPF_PORT,
            security: None,
        }
    }
}

/// A point-to-point interface. The neighbor's router id equals its node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub neighbor: NodeId,
    pub link: LinkId,
    pub cost: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OspfTimer {
    Hello,
    Dead(RouterId),
    Rxmt(RouterId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketPath {
    Datagram,
    Stream,
}

/// Measurement taps. Every method has a no-op default.
pub trait OspfObserver {
    fn on_adjacency_change(&mut self, _router: RouterId, _peer: RouterId, _state: NbrState, _t: SimTime) {}
    fn on_lsdb_change(&mut self, _router: RouterId, _key: LsaKey, _seq: i32, _t: SimTime) {}
    fn on_route_table_change(&mut self, _router: RouterId, _t: SimTime) {}
    fn on_packet_sent(
        &mut self,
        _router: RouterId,
        _peer: RouterId,
        _path: PacketPath,
        _ty: PacketType,
        _len: usize,
        _t: SimTime,
    ) {
    }
}

impl OspfObserver for () {}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OspfStats {
    pub hellos_sent: u64,
    pub dbds_sent: u64,
    pub requests_sent: u64,
    pub updates_sent: u64,
    pub acks_sent: u64,
    /// LsUpdates resent because an acknowledgement was overdue.
    pub updates_retransmitted: u64,
    pub hellos_rejected: u64,
    pub packets_dropped: u64,
}

pub struct Ctx<'a, T> {
    pub net: &'a mut Network<T>,
    pub transport: &'a mut Transport,
    pub observer: &'a mut dyn OspfObserver,
}

#[derive(Debug)]
struct Link {
    iface: Interface,
    heard: bool,
    dead_timer: Option<TimerId>,
    rxmt_timer: Option<TimerId>,
    conn: Option<ConnectionHandle>,
    conn_up: bool,
    stream: Option<StreamHandle>,
    rx: BytesMut,
    out: Vec<u8>,
}

impl Link {
    fn drop_conn(&mut self) -> Option<ConnectionHandle> {
        self.conn_up = false;
        self.stream = None;
        self.rx.clear();
        self.out.clear();
        self.conn.take()
    }
}

pub struct OspfRouter {
    cfg: OspfConfig,
    lsdb: Lsdb,
    nbrs: BTreeMap<RouterId, Neighbor>,
    links: BTreeMap<RouterId, Link>,
    routes: RouteTable,
    routes_changed_at: Option<SimTime>,
    externals: BTreeMap<Prefix, u32>,
    next_external_id: u32,
    hello_timer: Option<TimerId>,
    stats: OspfStats,
    queue: VecDeque<(RouterId, NbrEvent)>,
    regenerate: bool,
    spf_needed: bool,
}

impl OspfRouter {
    pub fn new(cfg: OspfConfig, interfaces: Vec<Interface>) -> Self {
        let mut nbrs = BTreeMap::new();
        let mut links = BTreeMap::new();
        for iface in interfaces {
            let peer = RouterId(iface.neighbor.0);
            let mut ncfg = NbrConfig::new(cfg.router_id, peer, cfg.mode);
            ncfg.delegate_acks = cfg.delegate_acks && cfg.mode == Mode::OverQuic;
            ncfg.max_quic_retries = cfg.max_quic_retries;
            ncfg.dbd_page = (packet_limit(&cfg, &ncfg) - HEADER_LEN - 7) / LSA_HEADER_LEN;
            nbrs.insert(peer, Neighbor::new(ncfg));
            links.insert(
                peer,
                Link {
                    iface,
                    heard: false,
                    dead_timer: None,
                    rxmt_timer: None,
                    conn: None,
                    conn_up: false,
                    stream: None,
                    rx: BytesMut::new(),
                    out: Vec::new(),
                },
            );
        }
        OspfRouter {
            cfg,
            lsdb: Lsdb::new(),
            nbrs,
            links,
            routes: RouteTable::new(),
            routes_changed_at: None,
            externals: BTreeMap::new(),
            next_external_id: 1,
            hello_timer: None,
            stats: OspfStats::default(),
            queue: VecDeque::new(),
            regenerate: false,
            spf_needed: false,
        }
    }

    pub fn config(&self) -> &OspfConfig {
        &self.cfg
    }

    pub fn router_id(&self) -> RouterId {
        self.cfg.router_id
    }

    pub fn node(&self) -> NodeId {
        self.cfg.node
    }

    pub fn lsdb(&self) -> &Lsdb {
        &self.lsdb
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    /// When the route table last changed.
    pub fn routes_changed_at(&self) -> Option<SimTime> {
        self.routes_changed_at
    }

    pub fn stats(&self) -> OspfStats {
        self.stats
    }

    pub fn neighbor(&self, peer: RouterId) -> Option<&Neighbor> {
        self.nbrs.get(&peer)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &Neighbor> + '_ {
        self.nbrs.values()
    }

    /// Interface facing `peer`.
    pub fn interface(&self, peer: RouterId) -> Option<&Interface> {
        self.links.get(&peer).map(|l| &l.iface)
    }

    /// Connection currently bound to the adjacency with `peer`.
    pub fn connection(&self, peer: RouterId) -> Option<ConnectionHandle> {
        self.links.get(&peer).and_then(|l| l.conn)
    }

    /// No acknowledgements, requests or stream writes outstanding.
    pub fn is_quiet(&self) -> bool {
        self.nbrs.values().all(|n| n.rxmt.is_empty() && n.requests.is_empty())
            && self.links.values().all(|l| l.out.is_empty())
    }

    /// The Hello for the interface towards `peer`.
    pub fn hello_tick(&self, peer: RouterId) -> OspfPacket {
        let heard = self.links.get(&peer).is_some_and(|l| l.heard);
        OspfPacket::new(
            self.cfg.router_id,
            PacketBody::Hello(Hello {
                hello_interval: self.cfg.hello_interval,
                dead_interval: self.cfg.dead_interval,
                neighbors: if heard { vec![peer] } else { Vec::new() },
            }),
        )
    }

    pub fn start<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        if self.cfg.mode == Mode::OverQuic {
            let addr = EndpointAddress::new(self.cfg.node, self.cfg.port);
            if let Err(e) = cx.transport.open_listener(addr, TransportKind::SecureMux, self.cfg.security.clone()) {
                warn!("{}: cannot listen on {addr}: {e}", self.cfg.router_id);
            }
        }
        self.regenerate = true;
        self.send_hellos(cx);
        self.finish(cx);
    }

    /// Originates (or refreshes) an external prefix.
    pub fn inject_external<T>(&mut self, cx: &mut Ctx<'_, T>, prefix: Prefix, cost: u32)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let id = match self.externals.get(&prefix) {
            Some(id) => *id,
            None => {
                let id = self.next_external_id;
                self.next_external_id += 1;
                self.externals.insert(prefix, id);
                id
            }
        };
        let key = LsaKey { ty: LsaType::ExternalPrefix, adv_router: self.cfg.router_id, lsa_id: id };
        self.originate(cx, key, LsaBody::External { prefix, cost }, 0);
        self.finish(cx);
    }

    /// Flushes a previously injected prefix from every database.
    pub fn withdraw_external<T>(&mut self, cx: &mut Ctx<'_, T>, prefix: Prefix)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let Some(id) = self.externals.remove(&prefix) else { return };
        let key = LsaKey { ty: LsaType::ExternalPrefix, adv_router: self.cfg.router_id, lsa_id: id };
        if let Some(cur) = self.lsdb.get(&key, cx.net.now()) {
            self.originate(cx, key, cur.body, MAX_AGE);
        }
        self.finish(cx);
    }

    pub fn on_datagram<T>(&mut self, cx: &mut Ctx<'_, T>, dg: Datagram)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let pkt = match decode_packet(&dg.payload) {
            Ok(p) => p,
            Err(e) => {
                debug!("{}: bad datagram from {}: {e}", self.cfg.router_id, dg.src);
                self.stats.packets_dropped += 1;
                return;
            }
        };
        let peer = RouterId(dg.src.0);
        if pkt.router_id != peer || !self.links.contains_key(&peer) {
            self.stats.packets_dropped += 1;
            return;
        }
        if self.cfg.mode == Mode::OverQuic && pkt.packet_type() != PacketType::Hello {
            // Everything but Hellos belongs on the stream.
            self.stats.packets_dropped += 1;
            return;
        }
        self.receive(cx, peer, pkt);
        self.finish(cx);
    }

    pub fn on_timer<T>(&mut self, cx: &mut Ctx<'_, T>, t: OspfTimer, id: TimerId)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        match t {
            OspfTimer::Hello => {
                if self.hello_timer != Some(id) {
                    return;
                }
                self.hello_timer = None;
                self.send_hellos(cx);
            }
            OspfTimer::Dead(peer) => {
                let Some(l) = self.links.get_mut(&peer) else { return };
                if l.dead_timer != Some(id) {
                    return;
                }
                l.dead_timer = None;
                l.heard = false;
                info!("{}: neighbor {peer} is dead", self.cfg.router_id);
                self.queue.push_back((peer, NbrEvent::Dead));
            }
            OspfTimer::Rxmt(peer) => {
                let Some(l) = self.links.get_mut(&peer) else { return };
                if l.rxmt_timer != Some(id) {
                    return;
                }
                l.rxmt_timer = None;
                self.queue.push_back((peer, NbrEvent::RxmtTimerExpired));
            }
        }
        self.finish(cx);
    }

    pub fn on_transport_event<T>(&mut self, cx: &mut Ctx<'_, T>, ev: TransportEvent)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        match ev {
            TransportEvent::Accepted(c) => {
                let peer = cx.transport.peer_node(c).map(|n| RouterId(n.0));
                let known = self.cfg.mode == Mode::OverQuic && peer.is_some_and(|p| self.links.contains_key(&p));
                let (true, Some(peer)) = (known, peer) else {
                    cx.transport.close(cx.net, c, 1, "unexpected");
                    return;
                };
                let l = self.links.get_mut(&peer).expect("known");
                if let Some(old) = l.drop_conn() {
                    cx.transport.close(cx.net, old, 0, "replaced");
                    self.queue.push_back((peer, NbrEvent::QuicFailed));
                }
                self.links.get_mut(&peer).expect("known").conn = Some(c);
            }
            TransportEvent::Established(c) => {
                let Some(peer) = self.by_conn(c) else { return };
                let dialer = self.cfg.router_id > peer;
                let l = self.links.get_mut(&peer).expect("bound");
                l.conn_up = true;
                if dialer {
                    match cx.transport.open_stream(c) {
                        Ok(st) => l.stream = Some(st),
                        Err(e) => warn!("{}: open_stream failed: {e}", self.cfg.router_id),
                    }
                }
                if self.nbrs[&peer].state == NbrState::TwoWay {
                    self.queue.push_back((peer, NbrEvent::QuicEstablished));
                }
            }
            TransportEvent::StreamOpened(st) => {
                if let Some(peer) = self.by_conn(st.conn) {
                    let l = self.links.get_mut(&peer).expect("bound");
                    l.stream.get_or_insert(st);
                }
            }
            TransportEvent::Data(st, bytes) => {
                let Some(peer) = self.by_conn(st.conn) else { return };
                let l = self.links.get_mut(&peer).expect("bound");
                if *l.stream.get_or_insert(st) != st {
                    return;
                }
                l.rx.extend_from_slice(&bytes);
                self.drain_stream(cx, peer);
            }
            TransportEvent::Closed(c, reason) => {
                let Some(peer) = self.by_conn(c) else { return };
                debug!("{}: connection to {peer} closed: {reason}", self.cfg.router_id);
                self.links.get_mut(&peer).expect("bound").drop_conn();
                self.queue.push_back((peer, NbrEvent::QuicFailed));
            }
        }
        self.finish(cx);
    }

    fn by_conn(&self, c: ConnectionHandle) -> Option<RouterId> {
        self.links.iter().find(|(_, l)| l.conn == Some(c)).map(|(p, _)| *p)
    }

    fn drain_stream<T>(&mut self, cx: &mut Ctx<'_, T>, peer: RouterId)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        loop {
            let l = self.links.get_mut(&peer).expect("bound");
            let (pkt, used) = match decode_framed(&l.rx) {
                Ok(ok) => ok,
                Err(CodecError::Truncated) => return,
                Err(e) => {
                    warn!("{}: corrupt stream from {peer}: {e}", self.cfg.router_id);
                    if let Some(c) = l.drop_conn() {
                        cx.transport.close(cx.net, c, 1, "malformed");
                    }
                    self.queue.push_back((peer, NbrEvent::QuicFailed));
                    return;
                }
            };
            let _ = l.rx.split_to(used);
            if pkt.router_id != peer || pkt.packet_type() == PacketType::Hello {
                self.stats.packets_dropped += 1;
                continue;
            }
            // Stream traffic proves two-way connectivity.
            if self.nbrs[&peer].state < NbrState::TwoWay {
                self.queue.push_back((peer, NbrEvent::HelloReceived { lists_me: true }));
                self.run_queue(cx);
            }
            self.receive(cx, peer, pkt);
        }
    }

    fn receive<T>(&mut self, cx: &mut Ctx<'_, T>, peer: RouterId, pkt: OspfPacket)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let now = cx.net.now();
        match pkt.body {
            PacketBody::Hello(h) => {
                if h.hello_interval != self.cfg.hello_interval || h.dead_interval != self.cfg.dead_interval {
                    self.stats.hellos_rejected += 1;
                    return;
                }
                let at = now + Duration::from_secs(self.cfg.dead_interval as u64);
                let node = self.cfg.node;
                let l = self.links.get_mut(&peer).expect("known");
                l.heard = true;
                if let Some(old) = l.dead_timer.take() {
                    cx.net.cancel_timer(old);
                }
                l.dead_timer = Some(cx.net.set_timer(node, OspfTimer::Dead(peer).into(), at).expect("future"));
                self.nbrs.get_mut(&peer).expect("known").dead_deadline = Some(at);
                let lists_me = h.neighbors.contains(&self.cfg.router_id);
                self.queue.push_back((peer, NbrEvent::HelloReceived { lists_me }));
            }
            PacketBody::DbDescription(d) => self.queue.push_back((peer, NbrEvent::DbdReceived(d))),
            PacketBody::LsRequest(keys) => self.queue.push_back((peer, NbrEvent::LsRequestReceived(keys))),
            PacketBody::LsAck(hs) => {
                if self.nbrs[&peer].floods() {
                    self.queue.push_back((peer, NbrEvent::LsAckReceived(hs)));
                }
            }
            PacketBody::LsUpdate(lsas) => {
                self.run_queue(cx);
                if !self.nbrs[&peer].floods() {
                    self.stats.packets_dropped += 1;
                    return;
                }
                let headers: Vec<LsaHeader> = lsas.iter().map(|l| l.header).collect();
                let mut batch = Batch::default();
                for lsa in lsas {
                    let res = install_and_flood(
                        FloodCtx { local: self.cfg.router_id, lsdb: &mut self.lsdb, neighbors: &mut self.nbrs, now },
                        lsa.clone(),
                        Some(peer),
                    );
                    match res {
                        Ok(out) => {
                            if out.self_originated {
                                self.reoriginate(cx, &lsa, &mut batch);
                            }
                            self.absorb(cx, out, &lsa, &mut batch);
                        }
                        Err(FloodError::OlderThanStored { newer }) => {
                            batch.updates.entry(peer).or_default().push(newer);
                        }
                    }
                }
                self.send_batch(cx, batch);
                self.queue.push_back((peer, NbrEvent::LsUpdateReceived(headers)));
            }
        }
        self.run_queue(cx);
    }

    /// A neighbor holds a newer copy of an LSA we originated: take it back
    /// with a higher sequence number, or flush it if we no longer want it.
    fn reoriginate<T>(&mut self, cx: &mut Ctx<'_, T>, received: &Lsa, batch: &mut Batch)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let key = received.key();
        let wanted = match key.ty {
            LsaType::Router => Some(self.router_links_body()),
            LsaType::ExternalPrefix => {
                self.externals.iter().find(|(_, id)| **id == key.lsa_id).map(|_| received.body.clone())
            }
        };
        let (body, age) = match wanted {
            Some(b) => (b, 0),
            None if received.is_max_age() => return,
            None => (received.body.clone(), MAX_AGE),
        };
        let lsa = Lsa { header: LsaHeader { key, seq: received.header.seq.saturating_add(1), age }, body };
        self.flood_local(cx, lsa, batch);
    }

    fn router_links_body(&self) -> LsaBody {
        let mut links: Vec<RouterLink> = self
            .nbrs
            .iter()
            .filter(|(_, n)| n.state == NbrState::Full)
            .map(|(p, _)| RouterLink { neighbor: *p, cost: self.links[p].iface.cost })
            .collect();
        links.sort();
        LsaBody::Router(links)
    }

    fn originate<T>(&mut self, cx: &mut Ctx<'_, T>, key: LsaKey, body: LsaBody, age: u16)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let seq = self.lsdb.header(&key, cx.net.now()).map_or(INITIAL_SEQ, |h| h.seq.saturating_add(1));
        let lsa = Lsa { header: LsaHeader { key, seq, age }, body };
        let mut batch = Batch::default();
        self.flood_local(cx, lsa, &mut batch);
        self.send_batch(cx, batch);
    }

    fn flood_local<T>(&mut self, cx: &mut Ctx<'_, T>, lsa: Lsa, batch: &mut Batch)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let out = install_and_flood(
            FloodCtx { local: self.cfg.router_id, lsdb: &mut self.lsdb, neighbors: &mut self.nbrs, now: cx.net.now() },
            lsa.clone(),
            None,
        )
        .expect("local origination is always newer");
        self.absorb(cx, out, &lsa, batch);
    }

    fn absorb<T>(&mut self, cx: &mut Ctx<'_, T>, out: FloodOutcome, lsa: &Lsa, batch: &mut Batch)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        if out.installed {
            cx.observer.on_lsdb_change(self.cfg.router_id, lsa.key(), lsa.header.seq, cx.net.now());
        }
        if out.changed {
            self.spf_needed = true;
        }
        for a in out.actions {
            match a {
                FloodAction::SendLsUpdate { to, lsa } => {
                    batch.updates.entry(to).or_default().push(lsa);
                    self.arm_rxmt(cx, to);
                }
                FloodAction::SendLsAck { to, header } => batch.acks.entry(to).or_default().push(header),
            }
        }
    }

    fn send_batch<T>(&mut self, cx: &mut Ctx<'_, T>, batch: Batch)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        for (to, lsas) in batch.updates {
            self.send_updates(cx, to, lsas);
        }
        for (to, hs) in batch.acks {
            let limit = self.limit(to);
            for chunk in chunks(hs, limit, HEADER_LEN + 2, |_| LSA_HEADER_LEN) {
                self.stats.acks_sent += 1;
                self.send(cx, to, PacketBody::LsAck(chunk));
            }
        }
    }

    fn send_updates<T>(&mut self, cx: &mut Ctx<'_, T>, to: RouterId, lsas: Vec<Lsa>)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let limit = self.limit(to);
        for chunk in chunks(lsas, limit, HEADER_LEN + 2, Lsa::encoded_len) {
            self.stats.updates_sent += 1;
            self.send(cx, to, PacketBody::LsUpdate(chunk));
        }
    }

    fn limit(&self, peer: RouterId) -> usize {
        packet_limit(&self.cfg, &self.nbrs[&peer].cfg)
    }

    fn send_hellos<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let peers: Vec<RouterId> = self.links.keys().copied().collect();
        for p in peers {
            let hello = self.hello_tick(p);
            self.stats.hellos_sent += 1;
            self.send(cx, p, hello.body);
        }
        let at = cx.net.now() + Duration::from_secs(self.cfg.hello_interval as u64);
        self.hello_timer = Some(cx.net.set_timer(self.cfg.node, OspfTimer::Hello.into(), at).expect("future deadline"));
    }

    /// Hellos, and everything in native mode, go out as datagrams; the rest
    /// is queued on the adjacency's stream.
    fn send<T>(&mut self, cx: &mut Ctx<'_, T>, to: RouterId, body: PacketBody) {
        let pkt = OspfPacket::new(self.cfg.router_id, body);
        let ty = pkt.packet_type();
        let now = cx.net.now();
        let l = self.links.get_mut(&to).expect("known neighbor");
        if ty == PacketType::Hello || self.cfg.mode == Mode::Native {
            let bytes = encode_packet(&pkt);
            cx.observer.on_packet_sent(self.cfg.router_id, to, PacketPath::Datagram, ty, bytes.len(), now);
            if let Err(e) = cx.net.send_datagram(self.cfg.node, l.iface.link, proto::OSPF, Bytes::from(bytes)) {
                warn!("{}: send to {to} failed: {e}", self.cfg.router_id);
            }
        } else if l.conn.is_some() {
            let bytes = encode_framed(&pkt);
            cx.observer.on_packet_sent(self.cfg.router_id, to, PacketPath::Stream, ty, bytes.len(), now);
            l.out.extend_from_slice(&bytes);
        } else {
            debug!("{}: no connection to {to}, dropping {ty}", self.cfg.router_id);
            self.stats.packets_dropped += 1;
        }
    }

    fn arm_rxmt<T>(&mut self, cx: &mut Ctx<'_, T>, peer: RouterId)
    where
        T: From<OspfTimer>,
    {
        if !self.nbrs[&peer].cfg.ospf_reliability() && self.nbrs[&peer].state != NbrState::Init {
            return;
        }
        let l = self.links.get_mut(&peer).expect("known");
        if l.rxmt_timer.is_some() {
            return;
        }
        let at = cx.net.now() + Duration::from_secs(self.cfg.rxmt_interval as u64);
        l.rxmt_timer = Some(cx.net.set_timer(self.cfg.node, OspfTimer::Rxmt(peer).into(), at).expect("future"));
    }

    fn run_queue<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        while let Some((peer, ev)) = self.queue.pop_front() {
            self.feed(cx, peer, ev);
        }
    }

    fn feed<T>(&mut self, cx: &mut Ctx<'_, T>, peer: RouterId, ev: NbrEvent)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let now = cx.net.now();
        let before = self.nbrs[&peer].state;
        let rxmt_retry = matches!(ev, NbrEvent::RxmtTimerExpired);
        let (next, actions) = neighbor_fsm_step(&self.nbrs[&peer], ev, &self.lsdb, now);
        self.nbrs.insert(peer, next);
        let after = self.nbrs[&peer].state;
        if after != before {
            debug!("{}: neighbor {peer} {before} -> {after}", self.cfg.router_id);
            cx.observer.on_adjacency_change(self.cfg.router_id, peer, after, now);
        }
        for a in actions {
            match a {
                NbrAction::EstablishQuic => self.establish(cx, peer),
                NbrAction::CloseQuic => {
                    if let Some(c) = self.links.get_mut(&peer).expect("known").drop_conn() {
                        cx.transport.close(cx.net, c, 0, "adjacency down");
                    }
                }
                NbrAction::SendDbd(d) => {
                    self.stats.dbds_sent += 1;
                    self.send(cx, peer, PacketBody::DbDescription(d));
                }
                NbrAction::SendLsRequest(keys) => {
                    let limit = self.limit(peer);
                    for chunk in chunks(keys, limit, HEADER_LEN + 2, |_| LSA_KEY_LEN) {
                        self.stats.requests_sent += 1;
                        self.send(cx, peer, PacketBody::LsRequest(chunk));
                    }
                }
                NbrAction::SendLsUpdate(keys) => {
                    let lsas: Vec<Lsa> = keys
                        .iter()
                        .filter_map(|k| self.lsdb.get(k, now))
                        .map(|mut l| {
                            l.header.age = l.header.age.saturating_add(1).min(MAX_AGE);
                            l
                        })
                        .collect();
                    if rxmt_retry {
                        self.stats.updates_retransmitted += 1;
                    }
                    self.send_updates(cx, peer, lsas);
                }
                NbrAction::FlushAdjacency => {}
                NbrAction::RegenerateRouterLsa => self.regenerate = true,
                NbrAction::ArmRxmt => self.arm_rxmt(cx, peer),
            }
        }
    }

    fn establish<T>(&mut self, cx: &mut Ctx<'_, T>, peer: RouterId)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        let dialer = self.cfg.router_id > peer;
        let l = self.links.get_mut(&peer).expect("known");
        if l.conn_up {
            self.queue.push_back((peer, NbrEvent::QuicEstablished));
            return;
        }
        if !dialer || l.conn.is_some() {
            return;
        }
        let remote = EndpointAddress::new(l.iface.neighbor, self.cfg.port);
        match cx.transport.dial(cx.net, self.cfg.node, remote, TransportKind::SecureMux, self.cfg.security.clone()) {
            Ok(c) => l.conn = Some(c),
            Err(e) => {
                warn!("{}: dial {remote} failed: {e}", self.cfg.router_id);
                self.queue.push_back((peer, NbrEvent::QuicFailed));
            }
        }
    }

    /// Settles follow-up work after any entry point: queued neighbor
    /// events, router LSA regeneration, SPF, flushing and stream writes.
    fn finish<T>(&mut self, cx: &mut Ctx<'_, T>)
    where
        T: From<TransportTimer> + From<OspfTimer>,
    {
        loop {
            self.run_queue(cx);
            if !self.regenerate {
                break;
            }
            self.regenerate = false;
            let key = LsaKey { ty: LsaType::Router, adv_router: self.cfg.router_id, lsa_id: self.cfg.router_id.0 };
            let body = self.router_links_body();
            let current = self.lsdb.get(&key, cx.net.now());
            if current.is_none_or(|c| c.body != body || c.is_max_age()) {
                self.originate(cx, key, body, 0);
            }
        }
        self.collect_flushed();
        // Once a Full adjacency has nothing left to retransmit, the next
        // flood starts a fresh interval.
        for (peer, l) in self.links.iter_mut() {
            let n = &self.nbrs[peer];
            if n.state == NbrState::Full && n.rxmt.is_empty() {
                if let Some(id) = l.rxmt_timer.take() {
                    cx.net.cancel_timer(id);
                }
            }
        }
        if self.spf_needed {
            self.spf_needed = false;
            let table = spf_compute(&self.lsdb, self.cfg.router_id);
            if table != self.routes {
                self.routes = table;
                self.routes_changed_at = Some(cx.net.now());
                cx.observer.on_route_table_change(self.cfg.router_id, cx.net.now());
            }
        }
        for (peer, l) in self.links.iter_mut() {
            let Some(st) = l.stream else { continue };
            if l.out.is_empty() {
                continue;
            }
            let out = std::mem::take(&mut l.out);
            if let Err(e) = cx.transport.stream_send(cx.net, st, &out) {
                debug!("{}: stream write to {peer} failed: {e}", self.cfg.router_id);
            }
        }
    }

    /// Drops flushed LSAs once no neighbor still owes an acknowledgement
    /// for them and no database exchange could still describe them.
    fn collect_flushed(&mut self) {
        if self.nbrs.values().any(|n| matches!(n.state, NbrState::Exchange | NbrState::Loading)) {
            return;
        }
        let dead: Vec<LsaKey> = self
            .lsdb
            .iter()
            .filter(|l| l.is_max_age())
            .map(Lsa::key)
            .filter(|k| self.nbrs.values().all(|n| !n.rxmt.contains_key(k)))
            .collect();
        for k in dead {
            self.lsdb.remove(&k);
        }
    }
}

#[derive(Default)]
struct Batch {
    updates: BTreeMap<RouterId, Vec<Lsa>>,
    acks: BTreeMap<RouterId, Vec<LsaHeader>>,
}

fn packet_limit(cfg: &OspfConfig, n: &NbrConfig) -> usize {
    if n.ospf_reliability() {
        cfg.max_packet
    } else {
        MAX_STREAM_PACKET
    }
}

/// Greedy split of `items` into packets of at most `limit` bytes.
fn chunks<I>(items: Vec<I>, limit: usize, base: usize, size: impl Fn(&I) -> usize) -> Vec<Vec<I>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut len = base;
    for it in items {
        let s = size(&it);
        if !cur.is_empty() && len + s > limit {
            out.push(std::mem::take(&mut cur));
            len = base;
        }
        len += s;
        cur.push(it);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
