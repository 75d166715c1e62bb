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

//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::mem::discriminant;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roq_bgp::{BgpMessage, BgpState, FsmAction, FsmEvent, Notification, Open, Origin, PathAttrs, Prefix, Update};
use roq_harness::ospf::{INJECTED_COST, INJECTED_PREFIX};
use roq_harness::*;
use roq_netsim::{EventKind, Handler, LinkSpec, Network, NodeId, SimEvent};
use roq_ospf::{
    Dbd, DdFlags, Destination, Hello, Lsa, LsaBody, LsaHeader, LsaKey, LsaType, Lsdb, NbrAction, NbrEvent, NbrState,
    OspfPacket, PacketBody, Route, RouteTable, RouterId, RouterLink, INITIAL_SEQ, MAX_AGE,
};
use roq_transport::{
    Certificate, CloseReason, ConnState, EndpointAddress, SecurityConfig, Transport, TransportEvent, TransportKind,
    TransportTimer, Trust, ALPN_BGP,
};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(name: &str, start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took <= limit, "{name} took {took:.1?}, limit {limit:?}");
    Ok(took)
}

// ---------------------------------------------------------------------
// 1. Codec round-trips

fn random_prefix(rng: &mut ChaCha8Rng) -> Prefix {
    if rng.random_bool(0.8) {
        Prefix::v4(Ipv4Addr::from(rng.random::<u32>()), rng.random_range(0..=32)).unwrap()
    } else {
        Prefix::v6(Ipv6Addr::from(rng.random::<u128>()), rng.random_range(0..=128)).unwrap()
    }
}

fn random_bgp(rng: &mut ChaCha8Rng) -> BgpMessage {
    match rng.random_range(0..4) {
        0 => BgpMessage::Keepalive,
        1 => BgpMessage::Open(Open {
            version: 4,
            my_as: rng.random_range(1..=u32::MAX),
            hold_time: rng.random(),
            bgp_id: rng.random(),
        }),
        2 => BgpMessage::Notification(Notification {
            code: rng.random_range(1..=6),
            subcode: rng.random(),
            data: (0..rng.random_range(0..32)).map(|_| rng.random()).collect(),
        }),
        _ => {
            // The codec carries v4 prefixes before v6 ones.
            let prefixes = |rng: &mut ChaCha8Rng| {
                let mut v: Vec<Prefix> = (0..rng.random_range(0..30)).map(|_| random_prefix(rng)).collect();
                v.sort_by_key(|p| p.family() != roq_bgp::Family::V4);
                v
            };
            let withdrawn = prefixes(rng);
            let nlri = prefixes(rng);
            let attrs = (!nlri.is_empty()).then(|| PathAttrs {
                origin: [Origin::Igp, Origin::Egp, Origin::Incomplete][rng.random_range(0..3)],
                as_path: (0..rng.random_range(0..10)).map(|_| rng.random()).collect(),
                next_hop: rng.random(),
                med: rng.random_bool(0.5).then(|| rng.random()),
                local_pref: rng.random_bool(0.5).then(|| rng.random()),
            });
            BgpMessage::Update(Update { withdrawn, attrs, nlri })
        }
    }
}

fn random_header(rng: &mut ChaCha8Rng) -> LsaHeader {
    LsaHeader {
        key: LsaKey {
            ty: if rng.random_bool(0.5) { LsaType::Router } else { LsaType::ExternalPrefix },
            adv_router: RouterId(rng.random()),
            lsa_id: rng.random(),
        },
        seq: rng.random(),
        age: rng.random_range(0..=MAX_AGE),
    }
}

fn random_lsa(rng: &mut ChaCha8Rng) -> Lsa {
    let header = random_header(rng);
    let body = match header.key.ty {
        LsaType::Router => LsaBody::Router(
            (0..rng.random_range(0..12))
                .map(|_| RouterLink { neighbor: RouterId(rng.random()), cost: rng.random() })
                .collect(),
        ),
        LsaType::ExternalPrefix => LsaBody::External { prefix: random_prefix(rng), cost: rng.random() },
    };
    Lsa { header, body }
}

fn random_ospf(rng: &mut ChaCha8Rng) -> OspfPacket {
    let n = rng.random_range(0..24);
    let body = match rng.random_range(0..5) {
        0 => PacketBody::Hello(Hello {
            hello_interval: rng.random(),
            dead_interval: rng.random(),
            neighbors: (0..n).map(|_| RouterId(rng.random())).collect(),
        }),
        1 => PacketBody::DbDescription(Dbd {
            dd_seq: rng.random(),
            flags: DdFlags(rng.random_range(0..8)),
            headers: (0..n).map(|_| random_header(rng)).collect(),
        }),
        2 => PacketBody::LsRequest((0..n).map(|_| random_header(rng).key).collect()),
        3 => PacketBody::LsUpdate((0..n / 3).map(|_| random_lsa(rng)).collect()),
        _ => PacketBody::LsAck((0..n).map(|_| random_header(rng)).collect()),
    };
    OspfPacket::new(RouterId(rng.random()), body)
}

fn codec_round_trips() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    for i in 0..10_000 {
        let m = random_bgp(&mut rng);
        let wire = roq_bgp::encode_message(&m).map_err(|e| format!("bgp #{i}: {e}"))?;
        let (back, used) = roq_bgp::decode_message(&wire).map_err(|e| format!("bgp #{i}: {e:?}"))?;
        ensure!(back == m && used == wire.len(), "bgp #{i} differs after round trip");
    }
    for i in 0..10_000 {
        let p = random_ospf(&mut rng);
        let wire = roq_ospf::encode_packet(&p);
        ensure!(roq_ospf::decode_packet(&wire).as_ref() == Ok(&p), "ospf #{i} differs after round trip");
    }
    let took = within("codec", start, Duration::from_secs(10))?;
    Ok(format!("10000 bgp + 10000 ospf in {took:.2?}"))
}

// ---------------------------------------------------------------------
// 2. Transport fuzz

const A: NodeId = NodeId(1);
const B: NodeId = NodeId(2);

#[derive(Default)]
struct World {
    t: Transport,
    got: Vec<u8>,
    established: HashSet<NodeId>,
    closed: Vec<(NodeId, CloseReason)>,
}

impl Handler<TransportTimer> for World {
    fn handle(&mut self, net: &mut Network<TransportTimer>, ev: SimEvent<TransportTimer>) {
        match ev.kind {
            EventKind::Deliver(dg) => self.t.on_datagram(net, dg),
            EventKind::Timer { owner, tag, .. } => self.t.on_timer(net, owner, tag),
            EventKind::Instrument(_) => {}
        }
        while let Some((n, e)) = self.t.poll_event() {
            match e {
                TransportEvent::Established(_) => {
                    self.established.insert(n);
                }
                TransportEvent::Data(_, b) if n == B => self.got.extend_from_slice(&b),
                TransportEvent::Closed(_, r) => self.closed.push((n, r)),
                _ => {}
            }
        }
    }
}

fn security(name: &str, trust: Trust) -> Option<SecurityConfig> {
    Some(SecurityConfig::new(Certificate::self_signed(name, b"acceptance"), trust, ALPN_BGP))
}

fn pair(seed: u64, loss: f64) -> Network<TransportTimer> {
    let mut n = Network::new(seed);
    n.add_node(A).unwrap();
    n.add_node(B).unwrap();
    n.add_link(LinkSpec::new(A, B, Duration::from_millis(5)).with_loss(loss)).unwrap();
    n
}

/// One scenario: random sends under random loss; the receiver's byte log
/// must be a prefix of the sent bytes at every checkpoint and equal at the
/// end.
fn fuzz_scenario(kind: TransportKind, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss = rng.random_range(0.0..=0.10);
    let mut net = pair(seed, loss);
    let mut w = World::default();
    let (sa, sb) = match kind {
        TransportKind::PlainStream => (None, None),
        TransportKind::SecureMux => (security("A", Trust::AcceptAny), security("B", Trust::AcceptAny)),
    };
    w.t.open_listener(EndpointAddress::new(B, 179), kind, sb).unwrap();
    let c = w.t.dial(&mut net, A, EndpointAddress::new(B, 179), kind, sa).unwrap();
    net.run_until(&mut w, |w, _| w.t.state(c) == Some(&ConnState::Established) || !w.closed.is_empty());
    ensure!(w.t.state(c) == Some(&ConnState::Established), "seed {seed}: handshake failed at loss {loss:.3}");
    let s = w.t.open_stream(c).map_err(|e| format!("seed {seed}: {e:?}"))?;
    let mut sent = Vec::new();
    for _ in 0..rng.random_range(1..12) {
        let len = rng.random_range(1..6000);
        let chunk: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        w.t.stream_send(&mut net, s, &chunk).map_err(|e| format!("seed {seed}: {e:?}"))?;
        sent.extend_from_slice(&chunk);
        let step = Duration::from_micros(rng.random_range(0..20_000));
        net.run_to(&mut w, net.now() + step);
        ensure!(sent.starts_with(&w.got), "seed {seed}: receive log is not a prefix of the sent bytes");
    }
    net.run_until(&mut w, |w, _| w.got.len() >= sent.len() || !w.closed.is_empty());
    ensure!(w.closed.is_empty(), "seed {seed}: connection closed {:?}", w.closed);
    ensure!(w.got == sent, "seed {seed}: delivered {} of {} bytes", w.got.len(), sent.len());
    Ok(sent.len())
}

fn pinned_rejection(seed: u64, loss: f64, pin_on_client: bool) -> Result<(), String> {
    let mut net = pair(seed, loss);
    let mut w = World::default();
    let stranger = Certificate::self_signed("C", b"acceptance").fingerprint();
    let pinned = Trust::PinnedFingerprints([stranger].into_iter().collect());
    let (client, server) = if pin_on_client {
        (security("A", pinned), security("B", Trust::AcceptAny))
    } else {
        (security("A", Trust::AcceptAny), security("B", pinned))
    };
    w.t.open_listener(EndpointAddress::new(B, 179), TransportKind::SecureMux, server).unwrap();
    w.t.dial(&mut net, A, EndpointAddress::new(B, 179), TransportKind::SecureMux, client).unwrap();
    net.run_until(&mut w, |_, _| false);
    ensure!(w.established.is_empty(), "seed {seed}: unpinned peer established at {:?}", w.established);
    ensure!(!w.closed.is_empty(), "seed {seed}: handshake neither failed nor completed");
    Ok(())
}

fn transport_fuzz() -> Verdict {
    let start = Instant::now();
    let mut bytes = 0;
    for kind in [TransportKind::PlainStream, TransportKind::SecureMux] {
        for seed in 0..500u64 {
            bytes += fuzz_scenario(kind, seed * 2 + 1)?;
        }
    }
    for seed in 0..50u64 {
        pinned_rejection(seed, (seed % 6) as f64 * 0.02, seed % 2 == 0)?;
    }
    let took = within("transport fuzz", start, Duration::from_secs(30))?;
    Ok(format!("2 x 500 scenarios, {bytes} bytes, 50 pinned rejections in {took:.2?}"))
}

// ---------------------------------------------------------------------
// 3-5. Triangle propagation

const TRIANGLE_SEED: u64 = 2026;

struct TriangleRuns {
    tcp: BgpReport,
    quic: BgpReport,
    cfg: ExperimentConfig,
    took: [Duration; 2],
}

fn triangle_runs() -> Result<TriangleRuns, String> {
    let cfg = |t| ExperimentConfig::bgp_triangle(t, 10_000, TRIANGLE_SEED);
    let run = |t| {
        let start = Instant::now();
        run_bgp_experiment(&cfg(t)).map(|r| (r, start.elapsed())).map_err(|e| format!("{t}: {e}"))
    };
    let (tcp, quic) = std::thread::scope(|s| {
        let a = s.spawn(|| run(TransportChoice::TcpLike));
        let b = s.spawn(|| run(TransportChoice::Quic));
        (a.join().unwrap(), b.join().unwrap())
    });
    let ((tcp, t0), (quic, t1)) = (tcp?, quic?);
    Ok(TriangleRuns { tcp, quic, cfg: cfg(TransportChoice::TcpLike), took: [t0, t1] })
}

/// Shortest delay between two nodes over simple paths avoiding `skip`.
fn shortest(cfg: &ExperimentConfig, from: u32, to: u32, skip: u32) -> Option<Duration> {
    fn walk(cfg: &ExperimentConfig, at: u32, to: u32, seen: &mut Vec<u32>, d: Duration, best: &mut Option<Duration>) {
        if at == to {
            *best = Some(best.map_or(d, |b| b.min(d)));
            return;
        }
        for l in &cfg.links {
            let next = if l.a == at {
                l.b
            } else if l.b == at {
                l.a
            } else {
                continue;
            };
            if !seen.contains(&next) {
                seen.push(next);
                walk(cfg, next, to, seen, d + l.delay, best);
                seen.pop();
            }
        }
    }
    let mut best = None;
    walk(cfg, from, to, &mut vec![from, skip], Duration::ZERO, &mut best);
    best
}

fn median_us(r: &BgpReport) -> u64 {
    let lat: Vec<u64> = r.latencies().iter().map(|d| d.as_micros() as u64).collect();
    summarize(&lat).map_or(0, |s| s.p50)
}

fn triangle_complete(runs: &TriangleRuns) -> Verdict {
    let cfg = &runs.cfg;
    let role = |r| cfg.node_with_role(r).unwrap();
    let (inj, r1) = (role(Role::Injector), role(Role::R1));
    // Each reflector's copy must travel R1 -> Rx -> R1 without the injector.
    let legs: Vec<Duration> = [Role::R2, Role::R3]
        .iter()
        .map(|r| shortest(cfg, r1, role(*r), inj).map(|d| 2 * d).ok_or("reflector unreachable"))
        .collect::<Result<_, _>>()?;
    let floor = *legs.iter().max().unwrap();
    let mut lines = Vec::new();
    for (r, took) in [(&runs.tcp, runs.took[0]), (&runs.quic, runs.took[1])] {
        ensure!(took <= Duration::from_secs(60), "{}: took {took:.1?}", r.transport);
        ensure!(!r.partial, "{}: time cap reached", r.transport);
        ensure!(r.records.len() == 10_000, "{}: {} records", r.transport, r.records.len());
        ensure!(r.complete() == 10_000, "{}: only {} complete", r.transport, r.complete());
        ensure!(
            r.lower_bound == *legs.iter().min().unwrap(),
            "{}: reported bound {:?}, expected {:?}",
            r.transport,
            r.lower_bound,
            legs.iter().min().unwrap()
        );
        let lat = r.latencies();
        let min = *lat.iter().min().unwrap();
        ensure!(min >= floor, "{}: latency {min:?} below the physical floor {floor:?}", r.transport);
        lines.push(format!("{} min {min:?} p50 {}us ({took:.1?})", r.transport, median_us(r)));
    }
    Ok(format!("10000/10000 on both; floor {floor:?}; {}", lines.join(", ")))
}

fn not_significantly_slower(runs: &TriangleRuns) -> Verdict {
    let (a, b) = (median_us(&runs.tcp), median_us(&runs.quic));
    ensure!(a > 0, "tcp-like median is zero");
    let ratio = b as f64 / a as f64;
    ensure!(ratio <= 2.0, "median ratio {ratio:.3} exceeds 2.0");
    let (sa, sb) = (&runs.tcp.sequences, &runs.quic.sequences);
    ensure!(sa.keys().eq(sb.keys()), "different session sets");
    for (k, seq) in sa {
        ensure!(seq == &sb[k], "session {k:?}: message sequences differ ({} vs {})", seq.len(), sb[k].len());
    }
    let msgs: usize = sa.values().map(Vec::len).sum();
    Ok(format!("ratio {ratio:.3}; {msgs} messages identical across {} sessions", sa.len()))
}

// ---------------------------------------------------------------------
// 6-7. Mesh convergence

const MESH_SEED: u64 = 6;

/// Every simple path; per destination the cheapest cost, ties broken by
/// the lowest first hop.
fn all_paths(adj: &BTreeMap<u32, BTreeMap<u32, u32>>, root: u32) -> BTreeMap<u32, (u32, u32)> {
    fn walk(
        adj: &BTreeMap<u32, BTreeMap<u32, u32>>,
        at: u32,
        label: (u32, Option<u32>),
        root: u32,
        seen: &mut BTreeSet<u32>,
        best: &mut BTreeMap<u32, (u32, u32)>,
    ) {
        let cand = (label.0, label.1.unwrap_or(root));
        let slot = best.entry(at).or_insert(cand);
        *slot = (*slot).min(cand);
        for (&n, &w) in adj.get(&at).into_iter().flatten() {
            if seen.insert(n) {
                walk(adj, n, (label.0 + w, label.1.or(Some(n))), root, seen, best);
                seen.remove(&n);
            }
        }
    }
    let mut best = BTreeMap::new();
    walk(adj, root, (0, None), root, &mut BTreeSet::from([root]), &mut best);
    best
}

fn expected_table(adj: &BTreeMap<u32, BTreeMap<u32, u32>>, root: u32, externals: &[(u32, Prefix, u32)]) -> RouteTable {
    let paths = all_paths(adj, root);
    let mut t: RouteTable = paths
        .iter()
        .map(|(r, (c, nh))| (Destination::Router(RouterId(*r)), Route { next_hop: RouterId(*nh), cost: *c }))
        .collect();
    for (adv, p, cost) in externals {
        if let Some((c, nh)) = paths.get(adv) {
            let cand = Route { next_hop: RouterId(*nh), cost: c + cost };
            let slot = t.entry(Destination::Prefix(*p)).or_insert(cand);
            if (cand.cost, cand.next_hop) < (slot.cost, slot.next_hop) {
                *slot = cand;
            }
        }
    }
    t
}

fn lsa(adv: u32, id: u32, ty: LsaType, body: LsaBody) -> Lsa {
    Lsa {
        header: LsaHeader { key: LsaKey { ty, adv_router: RouterId(adv), lsa_id: id }, seq: INITIAL_SEQ, age: 0 },
        body,
    }
}

fn random_graphs() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC6);
    for g in 0..1000 {
        let n = rng.random_range(1..=8u32);
        let mut adv: BTreeMap<u32, Vec<RouterLink>> = (1..=n).map(|i| (i, vec![])).collect();
        let mut adj: BTreeMap<u32, BTreeMap<u32, u32>> = BTreeMap::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if rng.random_bool(0.45) {
                    let (wa, wb) = (rng.random_range(1..12), rng.random_range(1..12));
                    adv.get_mut(&a).unwrap().push(RouterLink { neighbor: RouterId(b), cost: wa });
                    adv.get_mut(&b).unwrap().push(RouterLink { neighbor: RouterId(a), cost: wb });
                    adj.entry(a).or_default().insert(b, wa);
                    adj.entry(b).or_default().insert(a, wb);
                }
            }
        }
        let mut db = Lsdb::new();
        for (r, links) in adv {
            db.install(lsa(r, r, LsaType::Router, LsaBody::Router(links)), roq_netsim::SimTime::ZERO);
        }
        let mut externals = Vec::new();
        for i in 0..rng.random_range(0..3u32) {
            let p: Prefix = format!("10.{}.0.0/16", rng.random_range(0..2)).parse().unwrap();
            let (a, cost) = (rng.random_range(1..=n), rng.random_range(0..15));
            db.install(
                lsa(a, 100 + i, LsaType::ExternalPrefix, LsaBody::External { prefix: p, cost }),
                roq_netsim::SimTime::ZERO,
            );
            externals.push((a, p, cost));
        }
        for root in 1..=n {
            let got = roq_ospf::spf_compute(&db, RouterId(root));
            ensure!(got == expected_table(&adj, root, &externals), "graph {g} root {root}: SPF differs from oracle");
        }
    }
    Ok(())
}

fn mesh_cfg(variant: OspfVariant, seed: u64) -> ExperimentConfig {
    let (t, d) = match variant {
        OspfVariant::Native => (TransportChoice::TcpLike, false),
        OspfVariant::Quic => (TransportChoice::Quic, false),
        OspfVariant::QuicDelegated => (TransportChoice::Quic, true),
    };
    ExperimentConfig::ospf_mesh(6, t, d, seed)
}

fn check_mesh(cfg: &ExperimentConfig, r: &OspfReport) -> Result<(), String> {
    let v = r.variant.label();
    ensure!(!r.partial, "{v}: time cap reached");
    ensure!(r.cold_start.converged.is_some() && r.reconvergence.converged.is_some(), "{v}: no convergence");
    ensure!(r.lsdbs.len() == cfg.nodes.len(), "{v}: {} databases", r.lsdbs.len());
    let first = r.lsdbs.values().next().unwrap();
    for (id, db) in &r.lsdbs {
        ensure!(db == first, "{v}: router {id} database differs");
    }
    let mut adj: BTreeMap<u32, BTreeMap<u32, u32>> = BTreeMap::new();
    for l in &cfg.links {
        adj.entry(l.a).or_default().insert(l.b, l.cost);
        adj.entry(l.b).or_default().insert(l.a, l.cost);
    }
    let origin = cfg.nodes.iter().map(|n| n.id).min().unwrap();
    let ext = [(origin, INJECTED_PREFIX.parse().unwrap(), INJECTED_COST)];
    for n in &cfg.nodes {
        let table = r.tables.get(&n.id).ok_or(format!("{v}: router {} has no table", n.id))?;
        ensure!(*table == expected_table(&adj, n.id, &ext), "{v}: router {} table differs from oracle", n.id);
    }
    Ok(())
}

fn mesh_correct(native: &OspfReport, quic: &OspfReport) -> Verdict {
    let start = Instant::now();
    check_mesh(&mesh_cfg(OspfVariant::Native, MESH_SEED), native)?;
    check_mesh(&mesh_cfg(OspfVariant::Quic, MESH_SEED), quic)?;
    random_graphs()?;
    let took = within("mesh checks", start, Duration::from_secs(60))?;
    Ok(format!(
        "cold start native {:?}, quic {:?}; 6 identical databases each; 1000 random graphs ({took:.1?})",
        native.cold_start.quiet_time().unwrap(),
        quic.cold_start.quiet_time().unwrap()
    ))
}

fn overhead_ordering(native: &OspfReport, quic: &OspfReport, delegated: &OspfReport) -> Verdict {
    let t = |r: &OspfReport| r.reconvergence.quiet_time().ok_or(format!("{}: never reconverged", r.variant.label()));
    let (n, q, d) = (t(native)?, t(quic)?, t(delegated)?);
    ensure!(q >= n, "quic {q:?} reconverged faster than native {n:?}");
    ensure!(d <= q, "delegated {d:?} slower than quic {q:?}");
    let routes = |r: &OspfReport| r.reconvergence.routes_time().unwrap_or_default();
    Ok(format!(
        "reconvergence native {n:?} <= quic {q:?} >= delegated {d:?} (last route change {:?}/{:?}/{:?})",
        routes(native),
        routes(quic),
        routes(delegated)
    ))
}

// ---------------------------------------------------------------------
// 8. Loss

fn loss_resilience() -> Verdict {
    let mut bgp = ExperimentConfig::bgp_triangle(TransportChoice::Quic, 1_000, 5).with_loss(0.05);
    bgp.time_cap = Duration::from_secs(300);
    let ospf: Vec<ExperimentConfig> = [OspfVariant::Native, OspfVariant::Quic, OspfVariant::QuicDelegated]
        .into_iter()
        .map(|v| {
            let mut c = mesh_cfg(v, 55).with_loss(0.05);
            c.time_cap = Duration::from_secs(300);
            c
        })
        .collect();
    let (b, o) = std::thread::scope(|s| {
        let b = s.spawn(|| run_bgp_experiment(&bgp));
        let o: Vec<_> = ospf.iter().map(|c| s.spawn(move || run_ospf_experiment(c))).collect();
        (b.join().unwrap(), o.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>())
    });
    let b = b.map_err(|e| format!("bgp: {e}"))?;
    ensure!(!b.partial && b.complete() == 1_000, "bgp: {}/1000 complete", b.complete());
    ensure!(b.loop_violations == 0, "bgp: {} loop violations", b.loop_violations);
    let mut parts = vec![format!("bgp 1000/1000 by {}", b.finished_at)];
    for r in o {
        let r = r.map_err(|e| e.to_string())?;
        let v = r.variant.label();
        ensure!(!r.partial, "{v}: time cap reached");
        let done = r.reconvergence.converged.ok_or(format!("{v}: not converged"))?;
        let first = r.lsdbs.values().next().unwrap();
        ensure!(r.lsdbs.values().all(|d| d == first), "{v}: databases differ");
        parts.push(format!("{v} converged by {done}"));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------
// 9. Determinism

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bgp = ExperimentConfig::bgp_triangle(TransportChoice::Quic, 2_000, 9).with_loss(0.02);
    let ospf = mesh_cfg(OspfVariant::Quic, 9).with_loss(0.02);
    let mut total = 0;
    for (name, cfg) in [("bgp", &bgp), ("ospf", &ospf)] {
        let mut outs = Vec::new();
        for run in 0..2 {
            let dir = root.path().join(format!("{name}-{run}"));
            match cfg.protocol {
                Protocol::Bgp => emit_report(&run_bgp_experiment(cfg).map_err(|e| e.to_string())?, &dir),
                Protocol::Ospf => emit_ospf_report(&run_ospf_experiment(cfg).map_err(|e| e.to_string())?, &dir),
            }
            .map_err(|e| e.to_string())?;
            outs.push(files(&dir));
        }
        ensure!(outs[0].keys().eq(outs[1].keys()), "{name}: different file sets");
        for (f, bytes) in &outs[0] {
            ensure!(bytes == &outs[1][f], "{name}: {f} differs between runs");
            total += bytes.len();
        }
    }
    Ok(format!("bgp and ospf outputs byte-identical ({total} bytes)"))
}

// ---------------------------------------------------------------------
// 10. State machine conformance

fn conformance() -> Verdict {
    let bgp = roq_bgp::conformance::fsm_traces();
    let ospf = roq_ospf::conformance::neighbor_traces();
    ensure!(bgp.len() >= 20 && ospf.len() >= 20, "{} bgp / {} ospf traces", bgp.len(), ospf.len());
    for t in &bgp {
        roq_bgp::conformance::run_trace(t).map_err(|e| format!("bgp {}: {e}", t.name))?;
    }
    for t in &ospf {
        roq_ospf::conformance::run_trace(t).map_err(|e| format!("ospf {}: {e}", t.name))?;
    }
    let bgp_steps: Vec<_> = bgp.iter().flat_map(|t| &t.steps).collect();
    let hold_expiry = bgp_steps.iter().any(|(e, s, a)| {
        *e == FsmEvent::HoldTimerExpired
            && *s == BgpState::Idle
            && a.iter().any(|x| matches!(x, FsmAction::SendNotification(4, _)))
    });
    ensure!(hold_expiry, "no hold-timer expiry -> Notification -> Idle step");
    let states: BTreeSet<_> = bgp_steps.iter().map(|(_, s, _)| *s).collect();
    ensure!(states.len() == 6, "bgp traces reach {} states", states.len());
    let events: HashSet<_> = bgp_steps.iter().map(|(e, _, _)| discriminant(e)).collect();
    ensure!(events.len() == 10, "bgp traces feed {} of 10 events", events.len());

    let exhaustion = ospf.iter().any(|t| {
        let down = t.steps.iter().position(|(e, s, _)| *e == NbrEvent::QuicFailed && *s == NbrState::Down);
        down.is_some_and(|i| t.steps[..i].iter().any(|(e, _, _)| *e == NbrEvent::QuicFailed))
    });
    ensure!(exhaustion, "no QUIC retry exhaustion -> Down trace");
    let dead = ospf
        .iter()
        .flat_map(|t| &t.steps)
        .any(|(e, s, a)| *e == NbrEvent::Dead && *s == NbrState::Down && a.contains(&NbrAction::FlushAdjacency));
    ensure!(dead, "no dead-interval teardown step");
    let nstates: BTreeSet<_> = ospf.iter().flat_map(|t| &t.steps).map(|(_, s, _)| *s).collect();
    ensure!(nstates.len() == 7, "ospf traces reach {} states", nstates.len());
    let nevents: HashSet<_> = ospf.iter().flat_map(|t| &t.steps).map(|(e, _, _)| discriminant(e)).collect();
    ensure!(nevents.len() == 9, "ospf traces feed {} of 9 events", nevents.len());
    Ok(format!("{} bgp + {} ospf traces", bgp.len(), ospf.len()))
}

// ---------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    })
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    results.push(("codec round-trips", guarded(codec_round_trips)));
    results.push(("transport ordered-prefix fuzz", guarded(transport_fuzz)));

    let runs = catch_unwind(triangle_runs).unwrap_or_else(|_| Err("triangle run panicked".into()));
    match &runs {
        Ok(runs) => {
            results.push(("triangle completeness", guarded(|| triangle_complete(runs))));
            results.push(("quic not significantly slower", guarded(|| not_significantly_slower(runs))));
            results.push((
                "loop freedom",
                guarded(|| {
                    let v = runs.tcp.loop_violations + runs.quic.loop_violations;
                    ensure!(v == 0, "{v} RIB entries held the local AS");
                    Ok("0 violations in 20000 propagated routes".into())
                }),
            ));
        }
        Err(e) => {
            let why = Err(e.clone());
            results.push(("triangle completeness", why.clone()));
            results.push(("quic not significantly slower", why.clone()));
            results.push(("loop freedom", why));
        }
    }

    let mesh: Result<Vec<OspfReport>, String> = std::thread::scope(|s| {
        let hs: Vec<_> = [OspfVariant::Native, OspfVariant::Quic, OspfVariant::QuicDelegated]
            .into_iter()
            .map(|v| s.spawn(move || run_ospf_experiment(&mesh_cfg(v, MESH_SEED))))
            .collect();
        hs.into_iter().map(|h| h.join().unwrap().map_err(|e| e.to_string())).collect()
    });
    match &mesh {
        Ok(m) => {
            results.push(("ospf mesh correctness", guarded(|| mesh_correct(&m[0], &m[1]))));
            results.push(("ospf overhead ordering", guarded(|| overhead_ordering(&m[0], &m[1], &m[2]))));
        }
        Err(e) => {
            results.push(("ospf mesh correctness", Err(e.clone())));
            results.push(("ospf overhead ordering", Err(e.clone())));
        }
    }
    results.push(("loss resilience", guarded(loss_resilience)));
    results.push(("determinism", guarded(determinism)));
    results.push(("fsm conformance", guarded(conformance)));

    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        match v {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
