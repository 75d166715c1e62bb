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

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use bytes::{Buf, BufMut, Bytes, BytesMut};
use log::{debug, trace};
use rand::RngCore;
use roq_netsim::{proto, Datagram, LinkId, Network, NodeId, TimerId};

use crate::api::*;
use crate::identity::{Certificate, Fingerprint, FrameKey, SecurityConfig, NONCE_LEN};
use crate::stream::{RecvBuf, SendBuf};
use crate::wire::{self, flags, Frame, FrameType, Segment, MAX_FRAME_PAYLOAD, MAX_SEGMENT_PAYLOAD, SEGMENT_HEADER_LEN};

// Close codes carried by transport-level close frames (stream field 0).
const CODE_REFUSED: u64 = 0x02;
const CODE_BAD_CERTIFICATE: u64 = 0x12a;
const CODE_NO_APPLICATION_PROTOCOL: u64 = 0x178;

const CLOSE_TRANSPORT: u32 = 0;
const CLOSE_APPLICATION: u32 = 1;

#[derive(Debug, Clone)]
pub struct TransportConfig {
    /// Streams a SecureMux endpoint may open per connection.
    pub max_streams: u32,
    pub rto_min: Duration,
    /// RTO = max(rto_min, factor × one-way link delay).
    pub rto_delay_factor: u32,
    /// Retransmissions without progress before the connection times out.
    pub max_retries: u32,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig { max_streams: 16, rto_min: Duration::from_millis(100), rto_delay_factor: 3, max_retries: 5 }
    }
}

/// Timer tag owned by the transport layer; one per connection end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransportTimer {
    pub conn: ConnectionId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub datagrams: u64,
    pub bytes: u64,
    pub data_frames: u64,
    pub ack_frames: u64,
    pub retransmissions: u64,
    /// Frames dropped for failing decode or integrity checks.
    pub discarded: u64,
}

struct SecureState {
    local: SecurityConfig,
    client_nonce: [u8; NONCE_LEN],
    peer_fp: Option<Fingerprint>,
    key: Option<FrameKey>,
}

#[derive(Default)]
struct StreamState {
    send: SendBuf,
    recv: RecvBuf,
    announced: bool,
    finished: bool,
}

struct Conn {
    handle: ConnectionHandle,
    side: Side,
    peer: NodeId,
    link: LinkId,
    state: ConnState,
    secure: Option<SecureState>,
    streams: BTreeMap<StreamId, StreamState>,
    next_local_stream: u32,
    handshake_out: Option<Bytes>,
    rto_base: Duration,
    rto: Duration,
    retries: u32,
    timer: Option<TimerId>,
    max_payload: usize,
}

impl Conn {
    fn has_unacked(&self) -> bool {
        self.streams.values().any(|s| s.send.has_unacked())
    }

    fn proto(&self) -> u8 {
        match self.handle.kind {
            TransportKind::PlainStream => proto::PLAIN_STREAM,
            TransportKind::SecureMux => proto::SECURE_MUX,
        }
    }

    fn key(&self) -> FrameKey {
        match self.secure.as_ref().and_then(|s| s.key.clone()) {
            Some(k) => k,
            None => FrameKey::initial(self.handle.id),
        }
    }
}

/// All transport endpoints of one simulation.
///
/// Operations that put bytes on the wire take the [`Network`]; incoming
/// datagrams and timer expiries are fed back through [`Transport::on_datagram`]
/// and [`Transport::on_timer`]. Resulting events queue up per node and are
/// drained with [`Transport::poll_event`].
pub struct Transport {
    cfg: TransportConfig,
    listeners: BTreeMap<(NodeId, u16, TransportKind), Option<SecurityConfig>>,
    conns: BTreeMap<(NodeId, ConnectionId), Conn>,
    events: VecDeque<(NodeId, TransportEvent)>,
    stats: TransportStats,
}

impl Default for Transport {
    fn default() -> Self {
        Transport::new(TransportConfig::default())
    }
}

impl Transport {
    pub fn new(cfg: TransportConfig) -> Self {
        Transport {
            cfg,
            listeners: BTreeMap::new(),
            conns: BTreeMap::new(),
            events: VecDeque::new(),
            stats: TransportStats::default(),
        }
    }

    pub fn config(&self) -> &TransportConfig {
        &self.cfg
    }

    pub fn stats(&self) -> TransportStats {
        self.stats
    }

    pub fn open_listener(
        &mut self,
        addr: EndpointAddress,
        kind: TransportKind,
        sec: Option<SecurityConfig>,
    ) -> Result<ListenerHandle, TransportError> {
        if kind == TransportKind::SecureMux && sec.is_none() {
            return Err(TransportError::MissingSecurityConfig);
        }
        let key = (addr.node, addr.port, kind);
        if self.listeners.contains_key(&key) {
            return Err(TransportError::AddressInUse(addr));
        }
        let sec = if kind == TransportKind::SecureMux { sec } else { None };
        self.listeners.insert(key, sec);
        Ok(ListenerHandle { addr, kind })
    }

    /// Starts a connection. The handle is returned in `Handshaking`; the
    /// outcome arrives later as an `Established` or `Closed` event.
    pub fn dial<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        local: NodeId,
        remote: EndpointAddress,
        kind: TransportKind,
        sec: Option<SecurityConfig>,
    ) -> Result<ConnectionHandle, TransportError> {
        if kind == TransportKind::SecureMux && sec.is_none() {
            return Err(TransportError::MissingSecurityConfig);
        }
        let link =
            net.link_between(local, remote.node).ok_or(TransportError::NoRoute { from: local, to: remote.node })?;
        let id = loop {
            let id = ConnectionId(net.rng().next_u64());
            if !self.conns.contains_key(&(local, id)) && !self.conns.contains_key(&(remote.node, id)) {
                break id;
            }
        };
        let handle = ConnectionHandle { node: local, id, kind };
        let (secure, hello) = match kind {
            TransportKind::PlainStream => {
                let seg = Segment {
                    flags: flags::SYN,
                    conn: id,
                    seq: 0,
                    payload: Bytes::copy_from_slice(&remote.port.to_be_bytes()),
                };
                (None, seg.encode())
            }
            TransportKind::SecureMux => {
                let local_sec = sec.expect("checked above");
                let mut nonce = [0u8; NONCE_LEN];
                net.rng().fill_bytes(&mut nonce);
                let mut p = BytesMut::new();
                p.put_u16(remote.port);
                let alpn = &local_sec.alpn.as_bytes()[..local_sec.alpn.len().min(255)];
                p.put_u8(alpn.len() as u8);
                p.put_slice(alpn);
                p.put_slice(&nonce);
                local_sec.identity.encode(&mut p);
                let mut f = Frame::new(FrameType::Initial, id);
                f.payload = p.freeze();
                let key = FrameKey::initial(id);
                let bytes = f.encode(|d| key.tag(d));
                let st = SecureState { local: local_sec, client_nonce: nonce, peer_fp: None, key: None };
                (Some(st), bytes)
            }
        };
        let conn = self.new_conn(net, handle, Side::Dialer, remote.node, link, secure);
        self.conns.insert((local, id), conn);
        debug!("{local} dialing {remote} over {kind} ({id})");
        self.send_handshake(net, (local, id), hello);
        Ok(handle)
    }

    fn new_conn<T>(
        &self,
        net: &Network<T>,
        handle: ConnectionHandle,
        side: Side,
        peer: NodeId,
        link: LinkId,
        secure: Option<SecureState>,
    ) -> Conn {
        let spec = net.link(link).expect("link exists");
        let rto_base = (spec.one_way_delay * self.cfg.rto_delay_factor).max(self.cfg.rto_min);
        let max_payload = match handle.kind {
            TransportKind::PlainStream => MAX_SEGMENT_PAYLOAD.min(spec.mtu.saturating_sub(SEGMENT_HEADER_LEN)).max(1),
            TransportKind::SecureMux => MAX_FRAME_PAYLOAD,
        };
        Conn {
            handle,
            side,
            peer,
            link,
            state: ConnState::Handshaking,
            secure,
            streams: BTreeMap::new(),
            next_local_stream: 0,
            handshake_out: None,
            rto_base,
            rto: rto_base,
            retries: 0,
            timer: None,
            max_payload,
        }
    }

    pub fn open_stream(&mut self, conn: ConnectionHandle) -> Result<StreamHandle, TransportError> {
        let max_streams = self.cfg.max_streams;
        let c = self.conns.get_mut(&(conn.node, conn.id)).ok_or(TransportError::UnknownConnection)?;
        match c.state {
            ConnState::Handshaking => return Err(TransportError::NotEstablished),
            ConnState::Closed(_) => return Err(TransportError::ConnectionClosed),
            ConnState::Established => {}
        }
        let id = match conn.kind {
            TransportKind::PlainStream => StreamId { initiator: Side::Dialer, index: 0 },
            TransportKind::SecureMux => {
                if c.next_local_stream >= max_streams {
                    return Err(TransportError::StreamLimitExceeded(max_streams));
                }
                let id = StreamId { initiator: c.side, index: c.next_local_stream };
                c.next_local_stream += 1;
                id
            }
        };
        c.streams.entry(id).or_default().announced = true;
        Ok(StreamHandle { conn, id })
    }

    /// Queues `payload` on the stream and transmits it immediately, cut into
    /// datagram-sized segments. Returns the number of bytes accepted.
    pub fn stream_send<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        s: StreamHandle,
        payload: &[u8],
    ) -> Result<usize, TransportError> {
        let key = (s.conn.node, s.conn.id);
        let c = self.conns.get_mut(&key).ok_or(TransportError::UnknownConnection)?;
        match c.state {
            ConnState::Handshaking => return Err(TransportError::NotEstablished),
            ConnState::Closed(_) => return Err(TransportError::ConnectionClosed),
            ConnState::Established => {}
        }
        let st = c.streams.get_mut(&s.id).ok_or(TransportError::UnknownStream)?;
        if st.finished {
            return Err(TransportError::StreamClosed);
        }
        if payload.is_empty() {
            return Ok(0);
        }
        let segs = st.send.push(payload, c.max_payload);
        for (off, seg) in segs {
            self.send_data(net, key, s.id, off, seg);
        }
        self.ensure_timer(net, key);
        Ok(payload.len())
    }

    /// Marks the local sending side of a stream as finished; later sends
    /// fail with `StreamClosed`. Buffered data is still delivered.
    pub fn finish_stream(&mut self, s: StreamHandle) -> Result<(), TransportError> {
        let c = self.conns.get_mut(&(s.conn.node, s.conn.id)).ok_or(TransportError::UnknownConnection)?;
        let st = c.streams.get_mut(&s.id).ok_or(TransportError::UnknownStream)?;
        st.finished = true;
        Ok(())
    }

    /// Closes the connection. Idempotent; both ends observe one `Closed`.
    pub fn close<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        conn: ConnectionHandle,
        code: u64,
        text: &str,
    ) {
        let key = (conn.node, conn.id);
        let Some(c) = self.conns.get(&key) else {
            return;
        };
        if matches!(c.state, ConnState::Closed(_)) {
            return;
        }
        self.send_close(net, key, CLOSE_APPLICATION, code, text);
        self.finish_close(net, key, CloseReason::Application { code, text: text.to_string(), by_peer: false });
    }

    pub fn state(&self, conn: ConnectionHandle) -> Option<&ConnState> {
        self.conns.get(&(conn.node, conn.id)).map(|c| &c.state)
    }

    /// Fingerprint presented by the peer during the handshake; `None` for
    /// PlainStream connections.
    pub fn peer_identity(&self, conn: ConnectionHandle) -> Result<Option<Fingerprint>, TransportError> {
        let c = self.conns.get(&(conn.node, conn.id)).ok_or(TransportError::UnknownConnection)?;
        if c.state != ConnState::Established {
            return Err(TransportError::NotEstablished);
        }
        Ok(c.secure.as_ref().and_then(|s| s.peer_fp))
    }

    pub fn peer_node(&self, conn: ConnectionHandle) -> Option<NodeId> {
        self.conns.get(&(conn.node, conn.id)).map(|c| c.peer)
    }

    /// `(bytes_sent, bytes_received_in_order)` on a stream.
    pub fn stream_offsets(&self, s: StreamHandle) -> Option<(u64, u64)> {
        let c = self.conns.get(&(s.conn.node, s.conn.id))?;
        let st = c.streams.get(&s.id)?;
        Some((st.send.sent(), st.recv.next()))
    }

    /// True when no connection of `node` has handshake or data awaiting
    /// acknowledgement.
    pub fn node_idle(&self, node: NodeId) -> bool {
        self.conns.range((node, ConnectionId(0))..=(node, ConnectionId(u64::MAX))).all(|(_, c)| match c.state {
            ConnState::Closed(_) => true,
            ConnState::Handshaking => false,
            ConnState::Established => !c.has_unacked() && c.handshake_out.is_none(),
        })
    }

    pub fn connections(&self, node: NodeId) -> Vec<ConnectionHandle> {
        self.conns.range((node, ConnectionId(0))..=(node, ConnectionId(u64::MAX))).map(|(_, c)| c.handle).collect()
    }

    pub fn poll_event(&mut self) -> Option<(NodeId, TransportEvent)> {
        self.events.pop_front()
    }

    fn emit(&mut self, node: NodeId, ev: TransportEvent) {
        trace!("{node}: {ev:?}");
        self.events.push_back((node, ev));
    }

    pub fn on_datagram<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, dg: Datagram) {
        match dg.proto {
            proto::PLAIN_STREAM => match Segment::decode(dg.payload.clone()) {
                Ok(seg) => self.on_segment(net, &dg, seg),
                Err(_) => self.stats.discarded += 1,
            },
            proto::SECURE_MUX => match Frame::decode(dg.payload.clone()) {
                Ok((frame, _)) => self.on_frame(net, &dg, frame),
                Err(_) => self.stats.discarded += 1,
            },
            _ => {}
        }
    }

    pub fn on_timer<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, node: NodeId, timer: TransportTimer) {
        let key = (node, timer.conn);
        let max_retries = self.cfg.max_retries;
        let Some(c) = self.conns.get_mut(&key) else {
            return;
        };
        c.timer = None;
        if matches!(c.state, ConnState::Closed(_)) {
            return;
        }
        c.retries += 1;
        if c.retries > max_retries {
            debug!("{node}: connection {} timed out", timer.conn);
            self.finish_close(net, key, CloseReason::Timeout);
            return;
        }
        c.rto *= 2;
        let resend: Vec<Bytes> = match (&c.state, &c.handshake_out) {
            (ConnState::Handshaking, Some(hs)) => vec![hs.clone()],
            _ => Vec::new(),
        };
        let data: Vec<(StreamId, u64, Bytes)> =
            c.streams.iter().flat_map(|(id, st)| st.send.unacked().map(move |(o, b)| (*id, o, b.clone()))).collect();
        let (link, proto) = (c.link, c.proto());
        for hs in resend {
            self.stats.retransmissions += 1;
            self.transmit(net, node, link, proto, hs);
        }
        for (sid, off, seg) in data {
            self.stats.retransmissions += 1;
            self.send_data(net, key, sid, off, seg);
        }
        self.ensure_timer(net, key);
    }

    fn on_segment<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, dg: &Datagram, seg: Segment) {
        let node = dg.dst;
        let key = (node, seg.conn);
        let Some(c) = self.conns.get_mut(&key) else {
            if seg.has(flags::SYN) && !seg.has(flags::ACK) {
                self.accept_plain(net, dg, seg);
            }
            return;
        };
        let (link, dialer) = (c.link, c.side == Side::Dialer);
        if let ConnState::Closed(_) = c.state {
            if !seg.has(flags::FIN) && !seg.has(flags::RST) {
                let fin = Segment { flags: flags::FIN, conn: seg.conn, seq: 0, payload: wire::encode_close(0, "") };
                self.transmit(net, node, link, proto::PLAIN_STREAM, fin.encode());
            }
            return;
        }
        if seg.has(flags::RST) {
            if dialer && c.state == ConnState::Handshaking {
                self.finish_close(net, key, CloseReason::Refused);
            }
            return;
        }
        if seg.has(flags::FIN) {
            let (code, text) = wire::decode_close(seg.payload);
            self.finish_close(net, key, CloseReason::Application { code, text, by_peer: true });
            return;
        }
        if seg.has(flags::SYN) {
            if seg.has(flags::ACK) && dialer {
                if c.state == ConnState::Handshaking {
                    self.establish(net, key);
                }
                let ack = Segment { flags: flags::ACK, conn: seg.conn, seq: 0, payload: Bytes::new() };
                self.transmit(net, node, link, proto::PLAIN_STREAM, ack.encode());
            } else if !dialer {
                if let Some(hs) = c.handshake_out.clone() {
                    self.transmit(net, node, link, proto::PLAIN_STREAM, hs);
                }
            }
            return;
        }
        if !dialer && c.state == ConnState::Handshaking {
            self.establish(net, key);
        }
        let sid = StreamId { initiator: Side::Dialer, index: 0 };
        if seg.has(flags::ACK) {
            self.on_ack(net, key, sid, seg.seq);
        }
        if seg.has(flags::DATA) {
            self.on_stream_data(net, key, sid, seg.seq, seg.payload);
        }
    }

    fn accept_plain<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, dg: &Datagram, seg: Segment) {
        let node = dg.dst;
        let port = if seg.payload.len() >= 2 { u16::from_be_bytes([seg.payload[0], seg.payload[1]]) } else { 0 };
        if !self.listeners.contains_key(&(node, port, TransportKind::PlainStream)) {
            let rst = Segment { flags: flags::RST, conn: seg.conn, seq: 0, payload: Bytes::new() };
            self.transmit(net, node, dg.link, proto::PLAIN_STREAM, rst.encode());
            return;
        }
        let handle = ConnectionHandle { node, id: seg.conn, kind: TransportKind::PlainStream };
        let conn = self.new_conn(net, handle, Side::Listener, dg.src, dg.link, None);
        self.conns.insert((node, seg.conn), conn);
        self.emit(node, TransportEvent::Accepted(handle));
        let synack = Segment { flags: flags::SYN | flags::ACK, conn: seg.conn, seq: 0, payload: Bytes::new() };
        self.send_handshake(net, (node, seg.conn), synack.encode());
    }

    fn on_frame<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, dg: &Datagram, frame: Frame) {
        let node = dg.dst;
        let key = (node, frame.conn);
        let Some((auth, tag)) = wire::split_tag(&dg.payload) else {
            self.stats.discarded += 1;
            return;
        };
        let Some(c) = self.conns.get(&key) else {
            if frame.ty == FrameType::Initial && FrameKey::initial(frame.conn).verify(auth, tag) {
                self.accept_secure(net, dg, frame);
            } else {
                self.stats.discarded += 1;
            }
            return;
        };
        let handshaking = c.state == ConnState::Handshaking;
        let initial_ok = FrameKey::initial(frame.conn).verify(auth, tag);
        let session_ok = c.secure.as_ref().and_then(|s| s.key.as_ref()).is_some_and(|k| k.verify(auth, tag));
        let authentic = match frame.ty {
            FrameType::Initial | FrameType::Handshake => initial_ok,
            // Handshake rejections are sent before any session key exists.
            FrameType::Close => session_ok || (handshaking && initial_ok),
            _ => session_ok,
        };
        if !authentic {
            trace!("{node}: discarding unauthenticated {:?} frame", frame.ty);
            self.stats.discarded += 1;
            return;
        }
        let (link, side) = (c.link, c.side);
        if let ConnState::Closed(_) = c.state {
            if frame.ty != FrameType::Close {
                self.send_close(net, key, CLOSE_TRANSPORT, 0, "");
            }
            return;
        }
        match frame.ty {
            FrameType::Initial => {
                if side == Side::Listener {
                    if let Some(hs) = c.handshake_out.clone() {
                        self.transmit(net, node, link, proto::SECURE_MUX, hs);
                    }
                }
            }
            FrameType::Handshake => {
                if side != Side::Dialer {
                    return;
                }
                if handshaking {
                    self.on_server_hello(net, key, frame.payload);
                } else {
                    self.send_frame(net, key, Frame::new(FrameType::HandshakeDone, frame.conn));
                }
            }
            FrameType::HandshakeDone => {
                if side == Side::Listener && handshaking {
                    self.establish(net, key);
                }
            }
            FrameType::Stream => {
                if side == Side::Listener && handshaking {
                    self.establish(net, key);
                }
                let sid = StreamId::from_wire(frame.stream);
                self.on_stream_data(net, key, sid, frame.offset, frame.payload);
            }
            FrameType::Ack => {
                let sid = StreamId::from_wire(frame.stream);
                self.on_ack(net, key, sid, frame.offset);
            }
            FrameType::Close => {
                let (code, text) = wire::decode_close(frame.payload);
                let reason = if frame.stream == CLOSE_APPLICATION {
                    CloseReason::Application { code, text, by_peer: true }
                } else {
                    match code {
                        CODE_REFUSED => CloseReason::Refused,
                        CODE_NO_APPLICATION_PROTOCOL => CloseReason::Handshake(HandshakeError::AlpnMismatch),
                        CODE_BAD_CERTIFICATE => CloseReason::Handshake(HandshakeError::UntrustedPeer),
                        _ => CloseReason::Application { code, text, by_peer: true },
                    }
                };
                self.finish_close(net, key, reason);
            }
        }
    }

    fn accept_secure<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, dg: &Datagram, frame: Frame) {
        let node = dg.dst;
        let id = frame.conn;
        let reject = |this: &mut Self, net: &mut Network<T>, code: u64| {
            let mut f = Frame::new(FrameType::Close, id);
            f.stream = CLOSE_TRANSPORT;
            f.payload = wire::encode_close(code, "");
            let key = FrameKey::initial(id);
            let bytes = f.encode(|d| key.tag(d));
            this.transmit(net, node, dg.link, proto::SECURE_MUX, bytes);
        };
        let Some(hello) = ClientHello::decode(frame.payload) else {
            self.stats.discarded += 1;
            return;
        };
        let Some(Some(sec)) = self.listeners.get(&(node, hello.port, TransportKind::SecureMux)).cloned() else {
            reject(self, net, CODE_REFUSED);
            return;
        };
        if hello.alpn != sec.alpn {
            debug!("{node}: alpn mismatch ({} vs {})", hello.alpn, sec.alpn);
            reject(self, net, CODE_NO_APPLICATION_PROTOCOL);
            return;
        }
        let client_fp = hello.cert.fingerprint();
        if !sec.trust.admits(&client_fp) {
            debug!("{node}: rejecting untrusted client {}", hello.cert.subject);
            reject(self, net, CODE_BAD_CERTIFICATE);
            return;
        }
        let mut server_nonce = [0u8; NONCE_LEN];
        net.rng().fill_bytes(&mut server_nonce);
        let server_fp = sec.identity.fingerprint();
        let key = FrameKey::session(id, &hello.nonce, &server_nonce, &client_fp, &server_fp);
        let mut p = BytesMut::new();
        p.put_slice(&server_nonce);
        sec.identity.encode(&mut p);
        let mut f = Frame::new(FrameType::Handshake, id);
        f.payload = p.freeze();
        let initial = FrameKey::initial(id);
        let server_hello = f.encode(|d| initial.tag(d));
        let handle = ConnectionHandle { node, id, kind: TransportKind::SecureMux };
        let st = SecureState { local: sec, client_nonce: hello.nonce, peer_fp: Some(client_fp), key: Some(key) };
        let conn = self.new_conn(net, handle, Side::Listener, dg.src, dg.link, Some(st));
        self.conns.insert((node, id), conn);
        self.emit(node, TransportEvent::Accepted(handle));
        self.send_handshake(net, (node, id), server_hello);
    }

    fn on_server_hello<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        key: (NodeId, ConnectionId),
        mut payload: Bytes,
    ) {
        if payload.len() < NONCE_LEN {
            self.stats.discarded += 1;
            return;
        }
        let mut server_nonce = [0u8; NONCE_LEN];
        payload.copy_to_slice(&mut server_nonce);
        let Some(cert) = Certificate::decode(&mut payload) else {
            self.stats.discarded += 1;
            return;
        };
        let c = self.conns.get_mut(&key).expect("caller checked");
        let st = c.secure.as_mut().expect("secure connection");
        let server_fp = cert.fingerprint();
        if !st.local.trust.admits(&server_fp) {
            debug!("{}: server {} not pinned", key.0, cert.subject);
            self.send_close(net, key, CLOSE_TRANSPORT, CODE_BAD_CERTIFICATE, "");
            self.finish_close(net, key, CloseReason::Handshake(HandshakeError::UntrustedPeer));
            return;
        }
        let client_fp = st.local.identity.fingerprint();
        st.key = Some(FrameKey::session(key.1, &st.client_nonce, &server_nonce, &client_fp, &server_fp));
        st.peer_fp = Some(server_fp);
        self.establish(net, key);
        self.send_frame(net, key, Frame::new(FrameType::HandshakeDone, key.1));
    }

    fn establish<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId)) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        c.state = ConnState::Established;
        c.handshake_out = None;
        c.retries = 0;
        c.rto = c.rto_base;
        if let Some(t) = c.timer.take() {
            net.cancel_timer(t);
        }
        let handle = c.handle;
        debug!("{}: {} established", key.0, key.1);
        self.emit(key.0, TransportEvent::Established(handle));
        self.ensure_timer(net, key);
    }

    fn on_stream_data<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        key: (NodeId, ConnectionId),
        sid: StreamId,
        offset: u64,
        payload: Bytes,
    ) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        let handle = c.handle;
        let st = c.streams.entry(sid).or_default();
        let delivered = st.recv.insert(offset, payload);
        let ack_to = st.recv.next();
        let sh = StreamHandle { conn: handle, id: sid };
        if let Some(bytes) = delivered {
            if !st.announced {
                st.announced = true;
                self.emit(key.0, TransportEvent::StreamOpened(sh));
            }
            self.emit(key.0, TransportEvent::Data(sh, bytes));
        }
        self.send_ack(net, key, sid, ack_to);
    }

    fn on_ack<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        key: (NodeId, ConnectionId),
        sid: StreamId,
        upto: u64,
    ) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        let Some(st) = c.streams.get_mut(&sid) else {
            return;
        };
        if st.send.ack(upto) {
            c.retries = 0;
            c.rto = c.rto_base;
            if let Some(t) = c.timer.take() {
                net.cancel_timer(t);
            }
            self.ensure_timer(net, key);
        }
    }

    /// Arms the retransmission timer if something awaits acknowledgement.
    fn ensure_timer<T: From<TransportTimer>>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId)) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        let needed = match c.state {
            ConnState::Handshaking => true,
            ConnState::Established => c.has_unacked(),
            ConnState::Closed(_) => false,
        };
        if !needed {
            if let Some(t) = c.timer.take() {
                net.cancel_timer(t);
            }
            return;
        }
        if c.timer.is_none() {
            let at = net.now() + c.rto;
            let id = net.set_timer(key.0, TransportTimer { conn: key.1 }.into(), at).expect("future deadline");
            c.timer = Some(id);
        }
    }

    fn send_handshake<T: From<TransportTimer>>(
        &mut self,
        net: &mut Network<T>,
        key: (NodeId, ConnectionId),
        bytes: Bytes,
    ) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        c.handshake_out = Some(bytes.clone());
        let (link, proto) = (c.link, c.proto());
        self.transmit(net, key.0, link, proto, bytes);
        self.ensure_timer(net, key);
    }

    fn send_data<T>(
        &mut self,
        net: &mut Network<T>,
        key: (NodeId, ConnectionId),
        sid: StreamId,
        offset: u64,
        seg: Bytes,
    ) {
        self.stats.data_frames += 1;
        let c = &self.conns[&key];
        match c.handle.kind {
            TransportKind::PlainStream => {
                let s = Segment { flags: flags::DATA, conn: key.1, seq: offset, payload: seg };
                let (link, bytes) = (c.link, s.encode());
                self.transmit(net, key.0, link, proto::PLAIN_STREAM, bytes);
            }
            TransportKind::SecureMux => {
                let f = Frame { ty: FrameType::Stream, conn: key.1, stream: sid.to_wire(), offset, payload: seg };
                self.send_frame(net, key, f);
            }
        }
    }

    fn send_ack<T>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId), sid: StreamId, upto: u64) {
        self.stats.ack_frames += 1;
        let c = &self.conns[&key];
        match c.handle.kind {
            TransportKind::PlainStream => {
                let s = Segment { flags: flags::ACK, conn: key.1, seq: upto, payload: Bytes::new() };
                let (link, bytes) = (c.link, s.encode());
                self.transmit(net, key.0, link, proto::PLAIN_STREAM, bytes);
            }
            TransportKind::SecureMux => {
                let mut f = Frame::new(FrameType::Ack, key.1);
                f.stream = sid.to_wire();
                f.offset = upto;
                self.send_frame(net, key, f);
            }
        }
    }

    fn send_close<T>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId), space: u32, code: u64, text: &str) {
        let c = &self.conns[&key];
        match c.handle.kind {
            TransportKind::PlainStream => {
                let s = Segment { flags: flags::FIN, conn: key.1, seq: 0, payload: wire::encode_close(code, text) };
                let (link, bytes) = (c.link, s.encode());
                self.transmit(net, key.0, link, proto::PLAIN_STREAM, bytes);
            }
            TransportKind::SecureMux => {
                let mut f = Frame::new(FrameType::Close, key.1);
                f.stream = space;
                f.payload = wire::encode_close(code, text);
                self.send_frame(net, key, f);
            }
        }
    }

    fn send_frame<T>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId), f: Frame) {
        let c = &self.conns[&key];
        let k = c.key();
        let bytes = f.encode(|d| k.tag(d));
        let link = c.link;
        self.transmit(net, key.0, link, proto::SECURE_MUX, bytes);
    }

    fn transmit<T>(&mut self, net: &mut Network<T>, node: NodeId, link: LinkId, proto: u8, bytes: Bytes) {
        self.stats.datagrams += 1;
        self.stats.bytes += bytes.len() as u64;
        if let Err(e) = net.send_datagram(node, link, proto, bytes) {
            debug!("{node}: datagram not sent: {e}");
        }
    }

    fn finish_close<T>(&mut self, net: &mut Network<T>, key: (NodeId, ConnectionId), reason: CloseReason) {
        let c = self.conns.get_mut(&key).expect("connection exists");
        if matches!(c.state, ConnState::Closed(_)) {
            return;
        }
        c.state = ConnState::Closed(reason.clone());
        c.handshake_out = None;
        if let Some(t) = c.timer.take() {
            net.cancel_timer(t);
        }
        let handle = c.handle;
        debug!("{}: {} closed: {reason}", key.0, key.1);
        self.emit(key.0, TransportEvent::Closed(handle, reason));
    }
}

struct ClientHello {
    port: u16,
    alpn: String,
    nonce: [u8; NONCE_LEN],
    cert: Certificate,
}

impl ClientHello {
    fn decode(mut b: Bytes) -> Option<Self> {
        if b.remaining() < 3 {
            return None;
        }
        let port = b.get_u16();
        let n = b.get_u8() as usize;
        if b.remaining() < n + NONCE_LEN {
            return None;
        }
        let alpn = String::from_utf8(b.split_to(n).to_vec()).ok()?;
        let mut nonce = [0u8; NONCE_LEN];
        b.copy_to_slice(&mut nonce);
        let cert = Certificate::decode(&mut b)?;
        Some(ClientHello { port, alpn, nonce, cert })
    }
}
