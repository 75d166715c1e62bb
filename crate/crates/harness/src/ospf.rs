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

//! The convergence experiment: cold start of a mesh, then one external
//! prefix injected at the lowest-numbered router.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use log::info;
use roq_bgp::Prefix;
use roq_netsim::{Network, NodeId, Record, SimTime, StopReason};
use roq_ospf::{
    Interface, LsaBody, LsaKey, Mode, NbrState, OspfConfig, OspfFabric, OspfObserver, OspfRouter, OspfTag, PacketPath,
    PacketType, RouteTable, RouterId,
};
use roq_transport::{SecurityConfig, Transport, Trust, ALPN_OSPF};

use crate::bgp::{build_network, certificate, check};
use crate::config::{ExperimentConfig, Protocol, TransportChoice};
use crate::HarnessError;

pub const INJECTED_PREFIX: &str = "198.51.100.0/24";
pub const INJECTED_COST: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OspfVariant {
    Native,
    Quic,
    QuicDelegated,
}

impl OspfVariant {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        match (cfg.transport, cfg.delegate_acks) {
            (TransportChoice::TcpLike, _) => OspfVariant::Native,
            (TransportChoice::Quic, false) => OspfVariant::Quic,
            (TransportChoice::Quic, true) => OspfVariant::QuicDelegated,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OspfVariant::Native => "native",
            OspfVariant::Quic => "quic",
            OspfVariant::QuicDelegated => "quic-delegated",
        }
    }
}

/// One convergence phase, measured from its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub started: SimTime,
    /// Last route table change of any router.
    pub routes_settled: Option<SimTime>,
    /// The convergence check first held.
    pub converged: Option<SimTime>,
}

impl Phase {
    pub fn routes_time(&self) -> Option<Duration> {
        self.routes_settled.map(|t| t.saturating_since(self.started))
    }

    pub fn quiet_time(&self) -> Option<Duration> {
        self.converged.map(|t| t - self.started)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketCounts {
    pub by_type: BTreeMap<PacketType, u64>,
    pub bytes: u64,
    pub on_stream: u64,
}

#[derive(Debug, Clone)]
pub struct OspfReport {
    pub variant: OspfVariant,
    pub cold_start: Phase,
    pub reconvergence: Phase,
    pub partial: bool,
    /// Packets sent during the cold start and during reconvergence.
    pub packets: [PacketCounts; 2],
    pub tables: BTreeMap<u32, RouteTable>,
    /// Final databases: key, sequence number and body of each LSA.
    pub lsdbs: BTreeMap<u32, Vec<(LsaKey, i32, LsaBody)>>,
    pub events: Vec<Record>,
}

#[derive(Default)]
struct Counter {
    phase: usize,
    packets: [PacketCounts; 2],
}

impl OspfObserver for Counter {
    fn on_packet_sent(
        &mut self,
        _r: RouterId,
        _p: RouterId,
        path: PacketPath,
        ty: PacketType,
        len: usize,
        _t: SimTime,
    ) {
        let c = &mut self.packets[self.phase];
        *c.by_type.entry(ty).or_default() += 1;
        c.bytes += len as u64;
        if path == PacketPath::Stream {
            c.on_stream += 1;
        }
    }

    fn on_adjacency_change(&mut self, router: RouterId, peer: RouterId, state: NbrState, t: SimTime) {
        log::debug!("{t}: {router} sees {peer} {state}");
    }
}

pub fn run_ospf_experiment(cfg: &ExperimentConfig) -> Result<OspfReport, HarnessError> {
    check(cfg, Protocol::Ospf)?;
    let variant = OspfVariant::of(cfg);
    let mode = match cfg.transport {
        TransportChoice::TcpLike => Mode::Native,
        TransportChoice::Quic => Mode::OverQuic,
    };
    let mut net: Network<OspfTag> = build_network(cfg);
    let pinned: BTreeSet<_> = cfg.nodes.iter().map(|n| certificate(n.id, cfg.seed).fingerprint()).collect();
    let mut fabric = OspfFabric::new(Transport::default(), Counter::default());
    for n in &cfg.nodes {
        let mut oc = OspfConfig::new(NodeId(n.id), mode);
        oc.delegate_acks = cfg.delegate_acks;
        oc.security = Some(SecurityConfig::new(
            certificate(n.id, cfg.seed),
            Trust::PinnedFingerprints(pinned.clone()),
            ALPN_OSPF,
        ));
        let ifaces = cfg
            .links
            .iter()
            .filter_map(|l| {
                let other = if l.a == n.id {
                    l.b
                } else if l.b == n.id {
                    l.a
                } else {
                    return None;
                };
                Some(Interface {
                    neighbor: NodeId(other),
                    link: net.link_between(NodeId(n.id), NodeId(other)).expect("configured"),
                    cost: l.cost,
                })
            })
            .collect();
        fabric.add(OspfRouter::new(oc, ifaces));
    }

    let last_change = |f: &OspfFabric<Counter>| f.route_change_times().values().flatten().max().copied();
    let origin = NodeId(cfg.nodes.iter().map(|n| n.id).min().expect("validated"));

    fabric.start_all(&mut net);
    let out = net.run_until(&mut fabric, |f, net| f.converged(net, None));
    let mut partial = out.reason != StopReason::Predicate;
    let cold_start = Phase {
        started: SimTime::ZERO,
        routes_settled: last_change(&fabric),
        converged: (!partial).then(|| net.now()),
    };
    net.record(origin, "ospf", "cold_start_converged", net.now().as_micros().to_string());
    info!("{}: cold start converged={} at {}", variant.label(), !partial, net.now());

    let mut reconvergence = Phase { started: net.now(), routes_settled: None, converged: None };
    if !partial {
        fabric.observer.phase = 1;
        let prefix: Prefix = INJECTED_PREFIX.parse().expect("literal");
        fabric.inject_external(&mut net, origin, prefix, INJECTED_COST);
        net.record(origin, "ospf", "injected", prefix.to_string());
        let out = net.run_until(&mut fabric, |f, net| f.converged(net, None));
        partial = out.reason != StopReason::Predicate;
        reconvergence.routes_settled = last_change(&fabric).filter(|t| *t >= reconvergence.started);
        reconvergence.converged = (!partial).then(|| net.now());
        net.record(origin, "ospf", "reconverged", net.now().as_micros().to_string());
        info!("{}: reconverged={} at {}", variant.label(), !partial, net.now());
    }

    let tables = fabric.routers.iter().map(|(n, r)| (n.0, r.routes().clone())).collect();
    let lsdbs = fabric
        .routers
        .iter()
        .map(|(n, r)| {
            let v = r.lsdb().iter().map(|l| (l.key(), l.header.seq, l.body.clone())).collect();
            (n.0, v)
        })
        .collect();
    Ok(OspfReport {
        variant,
        cold_start,
        reconvergence,
        partial,
        packets: fabric.observer.packets,
        tables,
        lsdbs,
        events: net.take_records(),
    })
}
