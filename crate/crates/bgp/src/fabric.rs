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

use std::collections::BTreeMap;

use roq_netsim::{EventKind, Handler, Network, NodeId, SimEvent};
use roq_transport::{Transport, TransportTimer};

use crate::prefix::Prefix;
use crate::speaker::{BgpObserver, BgpSpeaker, BgpTimer, Ctx};

/// Timer tag of a simulation hosting transports and BGP speakers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BgpTag {
    Transport(TransportTimer),
    Bgp(BgpTimer),
}

impl From<TransportTimer> for BgpTag {
    fn from(t: TransportTimer) -> Self {
        BgpTag::Transport(t)
    }
}

impl From<BgpTimer> for BgpTag {
    fn from(t: BgpTimer) -> Self {
        BgpTag::Bgp(t)
    }
}

/// A set of speakers sharing one transport layer, driven by the network's
/// event loop.
pub struct BgpFabric<O> {
    pub transport: Transport,
    pub speakers: BTreeMap<NodeId, BgpSpeaker>,
    pub observer: O,
}

impl<O: BgpObserver> BgpFabric<O> {
    pub fn new(transport: Transport, observer: O) -> Self {
        BgpFabric { transport, speakers: BTreeMap::new(), observer }
    }

    pub fn add(&mut self, speaker: BgpSpeaker) {
        self.speakers.insert(speaker.node(), speaker);
    }

    pub fn speaker(&self, node: NodeId) -> Option<&BgpSpeaker> {
        self.speakers.get(&node)
    }

    pub fn start_all(&mut self, net: &mut Network<BgpTag>) {
        for sp in self.speakers.values_mut() {
            let mut cx = Ctx { net: &mut *net, transport: &mut self.transport, observer: &mut self.observer };
            sp.start(&mut cx);
        }
        self.pump(net);
    }

    pub fn originate(&mut self, net: &mut Network<BgpTag>, node: NodeId, routes: Vec<(Prefix, Vec<u32>)>) {
        if let Some(sp) = self.speakers.get_mut(&node) {
            let mut cx = Ctx { net: &mut *net, transport: &mut self.transport, observer: &mut self.observer };
            sp.originate(&mut cx, routes);
        }
        self.pump(net);
    }

    pub fn all_established(&self) -> bool {
        self.speakers.values().all(|s| s.all_established())
    }

    /// Hands queued transport events to their speakers until none remain.
    fn pump(&mut self, net: &mut Network<BgpTag>) {
        while let Some((node, ev)) = self.transport.poll_event() {
            if let Some(sp) = self.speakers.get_mut(&node) {
                let mut cx = Ctx { net: &mut *net, transport: &mut self.transport, observer: &mut self.observer };
                sp.on_transport_event(&mut cx, ev);
            }
        }
    }
}

impl<O: BgpObserver> Handler<BgpTag> for BgpFabric<O> {
    fn handle(&mut self, net: &mut Network<BgpTag>, ev: SimEvent<BgpTag>) {
        match ev.kind {
            EventKind::Deliver(dg) => self.transport.on_datagram(net, dg),
            EventKind::Timer { tag: BgpTag::Transport(t), owner, .. } => self.transport.on_timer(net, owner, t),
            EventKind::Timer { tag: BgpTag::Bgp(t), owner, id } => {
                if let Some(sp) = self.speakers.get_mut(&owner) {
                    let mut cx = Ctx { net: &mut *net, transport: &mut self.transport, observer: &mut self.observer };
                    sp.on_timer(&mut cx, t, id);
                }
            }
            EventKind::Instrument(_) => {}
        }
        self.pump(net);
    }
}
