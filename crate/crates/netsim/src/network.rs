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

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;

use bytes::Bytes;
use log::{trace, warn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instrument::Record;
use crate::link::{LinkId, LinkSpec, LinkStats};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerId(u64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("a link between {0} and {1} already exists")]
    DuplicateLink(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownEndpoint(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("invalid link: {0}")]
    InvalidLink(&'static str),
    #[error("{node} is not an endpoint of {link}")]
    NotAnEndpoint { node: NodeId, link: LinkId },
    #[error("datagram of {size} bytes exceeds mtu {mtu}")]
    MtuExceeded { size: usize, mtu: usize },
    #[error("timer deadline {at} is before now ({now})")]
    PastDeadline { at: SimTime, now: SimTime },
}

/// A datagram in flight or delivered over a link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub link: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Upper-layer protocol number used to demultiplex at the receiver.
    pub proto: u8,
    pub payload: Bytes,
    pub sent_at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind<T> {
    Deliver(Datagram),
    Timer { owner: NodeId, tag: T, id: TimerId },
    Instrument(Record),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<T> {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind<T>,
}

struct Queued<T>(SimEvent<T>);

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.0.at, self.0.seq) == (other.0.at, other.0.seq)
    }
}

impl<T> Eq for Queued<T> {}

impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Queued<T> {
    // BinaryHeap is a max-heap; invert so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.at, other.0.seq).cmp(&(self.0.at, self.0.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Predicate,
    QueueExhausted,
    TimeCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub at: SimTime,
    pub reason: StopReason,
}

/// Consumer of datagram deliveries and timer expiries.
pub trait Handler<T> {
    fn handle(&mut self, net: &mut Network<T>, event: SimEvent<T>);
}

struct LinkState {
    spec: LinkSpec,
    stats: LinkStats,
}

/// The simulation fabric: virtual clock, event queue, topology, seeded
/// randomness and the instrumentation stream.
///
/// Two independent ChaCha8 streams are derived from the seed: one drives
/// loss decisions, the other is handed to protocols (nonces, identifiers),
/// so protocol draws never shift the loss pattern.
pub struct Network<T> {
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Queued<T>>,
    nodes: BTreeSet<NodeId>,
    links: Vec<LinkState>,
    by_pair: BTreeMap<(NodeId, NodeId), LinkId>,
    live_timers: HashSet<TimerId>,
    next_timer: u64,
    loss_rng: ChaCha8Rng,
    proto_rng: ChaCha8Rng,
    records: Vec<Record>,
    time_cap: Option<SimTime>,
    executed: u64,
    in_flight: usize,
}

impl<T> Network<T> {
    pub fn new(seed: u64) -> Self {
        let mut loss_rng = ChaCha8Rng::seed_from_u64(seed);
        loss_rng.set_stream(0);
        let mut proto_rng = ChaCha8Rng::seed_from_u64(seed);
        proto_rng.set_stream(1);
        Network {
            now: SimTime::ZERO,
            seq: 0,
            queue: BinaryHeap::new(),
            nodes: BTreeSet::new(),
            links: Vec::new(),
            by_pair: BTreeMap::new(),
            live_timers: HashSet::new(),
            next_timer: 0,
            loss_rng,
            proto_rng,
            records: Vec::new(),
            time_cap: None,
            executed: 0,
            in_flight: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn set_time_cap(&mut self, cap: Option<SimTime>) {
        self.time_cap = cap;
    }

    pub fn time_cap(&self) -> Option<SimTime> {
        self.time_cap
    }

    /// Number of events executed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    /// Datagrams sent but not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn add_node(&mut self, id: NodeId) -> Result<NodeId, NetError> {
        if !self.nodes.insert(id) {
            return Err(NetError::DuplicateNode(id));
        }
        Ok(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn add_link(&mut self, spec: LinkSpec) -> Result<LinkId, NetError> {
        for n in [spec.a, spec.b] {
            if !self.nodes.contains(&n) {
                return Err(NetError::UnknownEndpoint(n));
            }
        }
        if spec.a == spec.b {
            return Err(NetError::InvalidLink("endpoints must differ"));
        }
        if spec.one_way_delay.is_zero() {
            return Err(NetError::InvalidLink("one-way delay must be positive"));
        }
        if !(0.0..=1.0).contains(&spec.loss_rate) {
            return Err(NetError::InvalidLink("loss rate must be within [0, 1]"));
        }
        if spec.mtu == 0 {
            return Err(NetError::InvalidLink("mtu must be positive"));
        }
        let key = pair(spec.a, spec.b);
        if self.by_pair.contains_key(&key) {
            return Err(NetError::DuplicateLink(spec.a, spec.b));
        }
        let id = LinkId(self.links.len() as u32);
        self.by_pair.insert(key, id);
        self.links.push(LinkState { spec, stats: LinkStats::default() });
        Ok(id)
    }

    pub fn link(&self, id: LinkId) -> Option<&LinkSpec> {
        self.links.get(id.0 as usize).map(|l| &l.spec)
    }

    pub fn link_stats(&self, id: LinkId) -> Option<LinkStats> {
        self.links.get(id.0 as usize).map(|l| l.stats)
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &LinkSpec)> + '_ {
        self.links.iter().enumerate().map(|(i, l)| (LinkId(i as u32), &l.spec))
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.by_pair.get(&pair(a, b)).copied()
    }

    /// Links attached to `node`, with the node at the other end.
    pub fn neighbors(&self, node: NodeId) -> Vec<(NodeId, LinkId)> {
        self.links().filter_map(|(id, spec)| spec.peer_of(node).map(|peer| (peer, id))).collect()
    }

    pub fn set_loss_rate(&mut self, link: LinkId, loss_rate: f64) -> Result<(), NetError> {
        if !(0.0..=1.0).contains(&loss_rate) {
            return Err(NetError::InvalidLink("loss rate must be within [0, 1]"));
        }
        let l = self.links.get_mut(link.0 as usize).ok_or(NetError::UnknownLink(link))?;
        l.spec.loss_rate = loss_rate;
        Ok(())
    }

    /// Random source for protocol use (nonces, connection ids).
    pub fn rng(&mut self) -> &mut impl RngCore {
        &mut self.proto_rng
    }

    /// Sends `payload` from `from` across `link`. Delivery happens exactly
    /// one link delay later unless the seeded loss draw drops it.
    pub fn send_datagram(&mut self, from: NodeId, link: LinkId, proto: u8, payload: Bytes) -> Result<(), NetError> {
        let now = self.now;
        let l = self.links.get_mut(link.0 as usize).ok_or(NetError::UnknownLink(link))?;
        let dst = l.spec.peer_of(from).ok_or(NetError::NotAnEndpoint { node: from, link })?;
        if payload.len() > l.spec.mtu {
            l.stats.oversize += 1;
            let mtu = l.spec.mtu;
            warn!("{from}->{dst}: dropping {} byte datagram over mtu {mtu}", payload.len());
            self.records.push(Record::new(now, from, "netsim", "mtu_drop", payload.len().to_string()));
            return Err(NetError::MtuExceeded { size: payload.len(), mtu });
        }
        l.stats.sent += 1;
        let loss = l.spec.loss_rate;
        let lost = if loss <= 0.0 {
            false
        } else if loss >= 1.0 {
            true
        } else {
            self.loss_rng.random::<f64>() < loss
        };
        if lost {
            l.stats.lost += 1;
            trace!("{from}->{dst}: lost {} bytes", payload.len());
            return Ok(());
        }
        l.stats.delivered += 1;
        let at = now + l.spec.one_way_delay;
        let dg = Datagram { link, src: from, dst, proto, payload, sent_at: now };
        self.push(at, EventKind::Deliver(dg));
        Ok(())
    }

    pub fn set_timer(&mut self, owner: NodeId, tag: T, at: SimTime) -> Result<TimerId, NetError> {
        if at < self.now {
            return Err(NetError::PastDeadline { at, now: self.now });
        }
        let id = TimerId(self.next_timer);
        self.next_timer += 1;
        self.live_timers.insert(id);
        self.push(at, EventKind::Timer { owner, tag, id });
        Ok(id)
    }

    /// Cancels a pending timer. Cancelling twice, or after expiry, is a no-op.
    pub fn cancel_timer(&mut self, id: TimerId) {
        self.live_timers.remove(&id);
    }

    pub fn timer_pending(&self, id: TimerId) -> bool {
        self.live_timers.contains(&id)
    }

    /// Appends a record to the instrumentation stream at the current time.
    pub fn record(
        &mut self,
        node: NodeId,
        category: impl Into<String>,
        key: impl Into<String>,
        value: impl Into<String>,
    ) {
        self.records.push(Record::new(self.now, node, category, key, value));
    }

    /// Schedules a record to be appended when virtual time reaches `at`.
    pub fn schedule_record(&mut self, at: SimTime, record: Record) -> Result<(), NetError> {
        if at < self.now {
            return Err(NetError::PastDeadline { at, now: self.now });
        }
        self.push(at, EventKind::Instrument(record));
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<Record> {
        std::mem::take(&mut self.records)
    }

    fn push(&mut self, at: SimTime, kind: EventKind<T>) {
        if matches!(kind, EventKind::Deliver(_)) {
            self.in_flight += 1;
        }
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Queued(SimEvent { at, seq, kind }));
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.drop_cancelled();
        self.queue.peek().map(|q| q.0.at)
    }

    fn drop_cancelled(&mut self) {
        while let Some(q) = self.queue.peek() {
            match &q.0.kind {
                EventKind::Timer { id, .. } if !self.live_timers.contains(id) => {
                    self.queue.pop();
                }
                _ => break,
            }
        }
    }

    /// Pops the next event no later than `limit`, advancing the clock.
    /// Instrument events are absorbed into the record stream.
    fn pop_until(&mut self, limit: Option<SimTime>) -> Result<Option<SimEvent<T>>, SimTime> {
        loop {
            self.drop_cancelled();
            let Some(next) = self.queue.peek() else {
                return Ok(None);
            };
            if let Some(limit) = limit {
                if next.0.at > limit {
                    return Err(limit);
                }
            }
            let ev = self.queue.pop().expect("peeked").0;
            debug_assert!(ev.at >= self.now, "causality violated");
            self.now = ev.at;
            self.executed += 1;
            match ev.kind {
                EventKind::Instrument(rec) => self.records.push(rec),
                EventKind::Timer { id, .. } => {
                    self.live_timers.remove(&id);
                    return Ok(Some(ev));
                }
                EventKind::Deliver(_) => {
                    self.in_flight -= 1;
                    return Ok(Some(ev));
                }
            }
        }
    }

    /// Executes a single event. Returns false when nothing was left to run
    /// before the time cap.
    pub fn step<H: Handler<T>>(&mut self, handler: &mut H) -> bool {
        match self.pop_until(self.time_cap) {
            Ok(Some(ev)) => {
                handler.handle(self, ev);
                true
            }
            Ok(None) => false,
            Err(cap) => {
                self.now = cap;
                false
            }
        }
    }

    /// Runs events in (time, seq) order until `pred` holds, the queue
    /// drains, or the configured time cap is reached. The predicate is
    /// evaluated before the first event and after every event.
    pub fn run_until<H, P>(&mut self, handler: &mut H, mut pred: P) -> RunOutcome
    where
        H: Handler<T>,
        P: FnMut(&H, &Network<T>) -> bool,
    {
        loop {
            if pred(handler, self) {
                return self.outcome(StopReason::Predicate);
            }
            match self.pop_until(self.time_cap) {
                Ok(Some(ev)) => handler.handle(self, ev),
                Ok(None) => return self.outcome(StopReason::QueueExhausted),
                Err(cap) => {
                    self.now = cap;
                    return self.outcome(StopReason::TimeCap);
                }
            }
        }
    }

    /// Runs every event scheduled at or before `deadline`, then sets the
    /// clock to `deadline` (bounded by the time cap).
    pub fn run_to<H: Handler<T>>(&mut self, handler: &mut H, deadline: SimTime) -> RunOutcome {
        let (limit, capped) = match self.time_cap {
            Some(cap) if cap < deadline => (cap, true),
            _ => (deadline, false),
        };
        loop {
            match self.pop_until(Some(limit)) {
                Ok(Some(ev)) => handler.handle(self, ev),
                Ok(None) | Err(_) => {
                    self.now = self.now.max(limit);
                    let reason = if capped { StopReason::TimeCap } else { StopReason::Predicate };
                    return self.outcome(reason);
                }
            }
        }
    }

    fn outcome(&self, reason: StopReason) -> RunOutcome {
        RunOutcome { at: self.now, reason }
    }
}

fn pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
