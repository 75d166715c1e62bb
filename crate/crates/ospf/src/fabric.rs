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

use std::collections::{BTreeMap, BTreeSet};

use roq_netsim::{proto, EventKind, Handler, Network, NodeId, SimEvent, SimTime};
use roq_transport::{Transport, TransportTimer};

use crate::neighbor::NbrState;
use crate::packet::RouterId;
use crate::router::{Ctx, OspfObserver, OspfRouter, OspfTimer};

/// Timer tag of a simulation hosting OSPF routers and their transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OspfTag {
    Transport(TransportTimer),
    Ospf(OspfTimer),
}

impl From<TransportTimer> for OspfTag {
    fn from(t: TransportTimer) -> Self {
        OspfTag::Transport(t)
    }
}

impl From<OspfTimer> for OspfTag {
    fn from(t: OspfTimer) -> Self {
        OspfTag::Ospf(t)
    }
}

pub struct OspfFabric<O> {
    pub transport: Transport,
    pub routers: BTreeMap<NodeId, OspfRouter>,
    pub observer: O,
}

macro_rules! cx {
    ($self:ident, $net:expr) => {
        Ctx { net: $net, transport: &mut $self.transport, observer: &mut $self.observer }
    };
}

impl<O: OspfObserver> OspfFabric<O> {
    pub fn new(transport: Transport, observer: O) -> Self {
        OspfFabric { transport, routers: BTreeMap::new(), observer }
    }

    pub fn add(&mut self, router: OspfRouter) {
        self.routers.insert(router.node(), router);
    }

    pub fn router(&self, node: NodeId) -> Option<&OspfRouter> {
        self.routers.get(&node)
    }

    pub fn start_all(&mut self, net: &mut Network<OspfTag>) {
        for r in self.routers.values_mut() {
            r.start(&mut cx!(self, &mut *net));
        }
        self.pump(net);
    }

    pub fn inject_external(&mut self, net: &mut Network<OspfTag>, node: NodeId, prefix: roq_bgp::Prefix, cost: u32) {
        if let Some(r) = self.routers.get_mut(&node) {
            r.inject_external(&mut cx!(self, &mut *net), prefix, cost);
        }
        self.pump(net);
    }

    pub fn withdraw_external(&mut self, net: &mut Network<OspfTag>, node: NodeId, prefix: roq_bgp::Prefix) {
        if let Some(r) = self.routers.get_mut(&node) {
            r.withdraw_external(&mut cx!(self, &mut *net), prefix);
        }
        self.pump(net);
    }

    /// Convergence of `among` (all routers when `None`): adjacencies agree
    /// with the live topology (Full across every working link inside the
    /// set, not Full across a severed one), the databases hold the same
    /// instances, nothing awaits acknowledgement and no datagram is in
    /// flight.
    pub fn converged(&self, net: &Network<OspfTag>, among: Option<&BTreeSet<NodeId>>) -> bool {
        let inside = |n: &NodeId| among.is_none_or(|s| s.contains(n));
        let set: Vec<&OspfRouter> = self.routers.values().filter(|r| inside(&r.node())).collect();
        if net.in_flight() > 0 {
            return false;
        }
        for r in &set {
            if !r.is_quiet() || !self.transport.node_idle(r.node()) {
                return false;
            }
            for n in r.neighbors() {
                let peer = NodeId(n.cfg.peer.0);
                let severed =
                    r.interface(n.cfg.peer).and_then(|i| net.link(i.link)).is_some_and(|l| l.loss_rate >= 1.0);
                let want_full = !severed && inside(&peer) && self.routers.contains_key(&peer);
                if severed && n.state == NbrState::Full || want_full && n.state != NbrState::Full {
                    return false;
                }
            }
        }
        let mut sums = set.iter().map(|r| r.lsdb().summary());
        match sums.next() {
            Some(first) => sums.all(|s| s == first),
            None => true,
        }
    }

    /// Time each router's route table last changed.
    pub fn route_change_times(&self) -> BTreeMap<RouterId, Option<SimTime>> {
        self.routers.values().map(|r| (r.router_id(), r.routes_changed_at())).collect()
    }

    fn pump(&mut self, net: &mut Network<OspfTag>) {
        while let Some((node, ev)) = self.transport.poll_event() {
            if let Some(r) = self.routers.get_mut(&node) {
                r.on_transport_event(&mut cx!(self, &mut *net), ev);
            }
        }
    }
}

impl<O: OspfObserver> Handler<OspfTag> for OspfFabric<O> {
    fn handle(&mut self, net: &mut Network<OspfTag>, ev: SimEvent<OspfTag>) {
        match ev.kind {
            EventKind::Deliver(dg) if dg.proto == proto::OSPF => {
                if let Some(r) = self.routers.get_mut(&dg.dst) {
                    r.on_datagram(&mut cx!(self, &mut *net), dg);
                }
            }
            EventKind::Deliver(dg) => self.transport.on_datagram(net, dg),
            EventKind::Timer { tag: OspfTag::Transport(t), owner, .. } => self.transport.on_timer(net, owner, t),
            EventKind::Timer { tag: OspfTag::Ospf(t), owner, id } => {
                if let Some(r) = self.routers.get_mut(&owner) {
                    r.on_timer(&mut cx!(self, &mut *net), t, id);
                }
            }
            EventKind::Instrument(_) => {}
        }
        self.pump(net);
    }
}
