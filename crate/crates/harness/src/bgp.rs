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

//! The propagation experiment: an injector feeds R1, and R1 timestamps each
//! prefix as it comes back from R2 and from R3.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Duration;

use log::info;
use roq_bgp::{
    BgpFabric, BgpObserver, BgpSpeaker, BgpState, BgpTag, Direction, PeerConfig, PeerId, Prefix, SpeakerConfig,
};
use roq_netsim::{LinkSpec, Network, NodeId, Record, SimTime, StopReason};
use roq_transport::{Certificate, SecurityConfig, Transport, TransportKind, Trust, ALPN_BGP};

use crate::config::{ExperimentConfig, Protocol, RibSource, Role, TransportChoice};
use crate::rib::{generate_rib, ingest_rib, Route};
use crate::HarnessError;

/// Timestamps of one prefix at R1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub prefix: Prefix,
    /// Arrival from the injector.
    pub t_injected: Option<SimTime>,
    pub t_r2: Option<SimTime>,
    pub t_r3: Option<SimTime>,
}

impl MeasurementRecord {
    /// Time from arrival at R1 until it has come back from both peers.
    pub fn latency(&self) -> Option<Duration> {
        let (inj, a, b) = (self.t_injected?, self.t_r2?, self.t_r3?);
        Some(a.max(b) - inj)
    }
}

pub type SessionKey = (u32, u32);

#[derive(Debug, Clone)]
pub struct BgpReport {
    pub transport: TransportChoice,
    /// In injection order.
    pub records: Vec<MeasurementRecord>,
    /// The time cap stopped the run before every prefix came back.
    pub partial: bool,
    pub established_at: SimTime,
    pub injected_at: SimTime,
    pub finished_at: SimTime,
    /// Round trip of the shortest path that leaves R1 and returns without
    /// touching the injector.
    pub lower_bound: Duration,
    pub loop_violations: u64,
    /// Bytes of every message sent, per (router, peer) session.
    pub sequences: BTreeMap<SessionKey, Vec<Vec<u8>>>,
    pub events: Vec<Record>,
}

impl BgpReport {
    pub fn complete(&self) -> usize {
        self.records.iter().filter(|r| r.latency().is_some()).count()
    }

    pub fn latencies(&self) -> Vec<Duration> {
        self.records.iter().filter_map(MeasurementRecord::latency).collect()
    }
}

struct Probe {
    r1: NodeId,
    peers: [PeerId; 3],
    index: HashMap<Prefix, usize>,
    times: Vec<[Option<SimTime>; 3]>,
    complete: usize,
    sequences: BTreeMap<SessionKey, Vec<Vec<u8>>>,
    down: Vec<(NodeId, PeerId, SimTime)>,
}

impl BgpObserver for Probe {
    fn on_update_received(&mut self, router: NodeId, peer: PeerId, prefix: &Prefix, t: SimTime) {
        if router != self.r1 {
            return;
        }
        let (Some(slot), Some(&i)) = (self.peers.iter().position(|p| *p == peer), self.index.get(prefix)) else {
            return;
        };
        let entry = &mut self.times[i];
        if entry[slot].is_none() {
            entry[slot] = Some(t);
            if entry.iter().all(Option::is_some) {
                self.complete += 1;
            }
        }
    }

    fn on_message(&mut self, router: NodeId, peer: PeerId, dir: Direction, bytes: &[u8], _t: SimTime) {
        if dir == Direction::Sent {
            self.sequences.entry((router.0, peer.0)).or_default().push(bytes.to_vec());
        }
    }

    fn on_session_state(&mut self, router: NodeId, peer: PeerId, state: BgpState, t: SimTime) {
        if state == BgpState::Idle {
            self.down.push((router, peer, t));
        }
    }
}

pub(crate) fn certificate(node: u32, seed: u64) -> Certificate {
    Certificate::self_signed(format!("router-{node}"), &seed.to_be_bytes())
}

pub(crate) fn build_network<T>(cfg: &ExperimentConfig) -> Network<T> {
    let mut net = Network::new(cfg.seed);
    for n in &cfg.nodes {
        net.add_node(NodeId(n.id)).expect("validated");
    }
    for l in &cfg.links {
        let spec = LinkSpec::new(NodeId(l.a), NodeId(l.b), l.delay).with_loss(l.loss_rate).with_mtu(l.mtu);
        net.add_link(spec).expect("validated");
    }
    net.set_time_cap(Some(SimTime::ZERO + cfg.time_cap));
    net
}

pub fn load_routes(cfg: &ExperimentConfig) -> Result<Vec<Route>, HarnessError> {
    match &cfg.rib {
        Some(RibSource::Generate(n)) => Ok(generate_rib(*n, cfg.seed)),
        Some(RibSource::File(p)) => Ok(ingest_rib(p)?.routes),
        None => Err(HarnessError::Invalid("bgp needs a rib".into())),
    }
}

pub fn run_bgp_experiment(cfg: &ExperimentConfig) -> Result<BgpReport, HarnessError> {
    check(cfg, Protocol::Bgp)?;
    let routes = load_routes(cfg)?;
    run_bgp_with_routes(cfg, &routes)
}

pub fn run_bgp_with_routes(cfg: &ExperimentConfig, routes: &[Route]) -> Result<BgpReport, HarnessError> {
    check(cfg, Protocol::Bgp)?;
    let role = |r| cfg.node_with_role(r).expect("validated");
    let (inj, r1, r2, r3) = (role(Role::Injector), role(Role::R1), role(Role::R2), role(Role::R3));
    let kind = match cfg.transport {
        TransportChoice::TcpLike => TransportKind::PlainStream,
        TransportChoice::Quic => TransportKind::SecureMux,
    };

    let mut net: Network<BgpTag> = build_network(cfg);
    let pinned: BTreeSet<_> = cfg.nodes.iter().map(|n| certificate(n.id, cfg.seed).fingerprint()).collect();
    let mut index = HashMap::with_capacity(routes.len());
    for (i, (p, _)) in routes.iter().enumerate() {
        index.entry(*p).or_insert(i);
    }
    let probe = Probe {
        r1: NodeId(r1),
        peers: [PeerId(inj), PeerId(r2), PeerId(r3)],
        index,
        times: vec![[None; 3]; routes.len()],
        complete: 0,
        sequences: BTreeMap::new(),
        down: Vec::new(),
    };
    let mut fabric = BgpFabric::new(Transport::default(), probe);
    let asn_of = |id: u32| cfg.nodes.iter().find(|n| n.id == id).and_then(|n| n.asn).expect("validated");
    for n in &cfg.nodes {
        let mut sc = SpeakerConfig::new(NodeId(n.id), asn_of(n.id), n.id);
        sc.security =
            Some(SecurityConfig::new(certificate(n.id, cfg.seed), Trust::PinnedFingerprints(pinned.clone()), ALPN_BGP));
        let peers = cfg
            .links
            .iter()
            .filter_map(|l| match (l.a == n.id, l.b == n.id) {
                (true, _) => Some(l.b),
                (_, true) => Some(l.a),
                _ => None,
            })
            .map(|other| PeerConfig {
                node: NodeId(other),
                asn: asn_of(other),
                bgp_id: other,
                // The injector always speaks over the plain stream.
                transport: if n.id == inj || other == inj { TransportKind::PlainStream } else { kind },
            })
            .collect();
        fabric.add(BgpSpeaker::new(sc, peers));
    }

    fabric.start_all(&mut net);
    let up = net.run_until(&mut fabric, |f, _| f.all_established());
    if up.reason != StopReason::Predicate {
        let missing: Vec<String> = fabric
            .speakers
            .values()
            .flat_map(|s| {
                s.peers()
                    .filter(|p| s.session_state(PeerId(p.bgp_id)) != Some(BgpState::Established))
                    .map(move |p| format!("{}-{}", s.node().0, p.node.0))
            })
            .collect();
        return Err(HarnessError::SessionFailed(format!(
            "sessions {} not established by {}",
            missing.join(", "),
            net.now()
        )));
    }
    let established_at = net.now();
    net.record(NodeId(r1), "bgp", "established", established_at.as_micros().to_string());
    info!("{}: all sessions established at {established_at}", cfg.transport);

    let injected_at = net.now();
    fabric.originate(&mut net, NodeId(inj), routes.to_vec());
    net.record(NodeId(inj), "bgp", "injected", routes.len().to_string());
    let total = routes.len();
    let out = net.run_until(&mut fabric, |f, _| f.observer.complete >= total);
    let partial = out.reason != StopReason::Predicate;
    let finished_at = net.now();
    net.record(NodeId(r1), "bgp", "complete", fabric.observer.complete.to_string());
    info!(
        "{}: {}/{} prefixes back at {finished_at}{}",
        cfg.transport,
        fabric.observer.complete,
        total,
        if partial { " (partial)" } else { "" }
    );

    let loop_violations = fabric
        .speakers
        .values()
        .map(|s| s.stats().loop_violations + s.rib().entries_containing(s.config().asn) as u64)
        .sum();
    let lower_bound = [r2, r3].iter().filter_map(|x| cfg.link(r1, *x)).map(|l| 2 * l.delay).min().unwrap_or_default();
    let probe = fabric.observer;
    for (router, peer, t) in &probe.down {
        log::warn!("session {}-{} went idle at {t}", router.0, peer.0);
    }
    let records = routes
        .iter()
        .zip(&probe.times)
        .map(|((p, _), [inj, a, b])| MeasurementRecord { prefix: *p, t_injected: *inj, t_r2: *a, t_r3: *b })
        .collect();
    Ok(BgpReport {
        transport: cfg.transport,
        records,
        partial,
        established_at,
        injected_at,
        finished_at,
        lower_bound,
        loop_violations,
        sequences: probe.sequences,
        events: net.take_records(),
    })
}

pub(crate) fn check(cfg: &ExperimentConfig, want: Protocol) -> Result<(), HarnessError> {
    if cfg.protocol != want {
        return Err(HarnessError::Invalid(format!("expected a {want:?} configuration")));
    }
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Config(crate::config::ConfigErrors(errs)))
    }
}
