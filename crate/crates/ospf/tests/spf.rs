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
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roq_bgp::Prefix;
use roq_netsim::SimTime;
use roq_ospf::*;

fn router_lsa(id: u32, links: &[(u32, u32)]) -> Lsa {
    Lsa {
        header: LsaHeader {
            key: LsaKey { ty: LsaType::Router, adv_router: RouterId(id), lsa_id: id },
            seq: INITIAL_SEQ,
            age: 0,
        },
        body: LsaBody::Router(links.iter().map(|&(n, cost)| RouterLink { neighbor: RouterId(n), cost }).collect()),
    }
}

fn external(adv: u32, id: u32, prefix: Prefix, cost: u32) -> Lsa {
    Lsa {
        header: LsaHeader {
            key: LsaKey { ty: LsaType::ExternalPrefix, adv_router: RouterId(adv), lsa_id: id },
            seq: INITIAL_SEQ,
            age: 0,
        },
        body: LsaBody::External { prefix, cost },
    }
}

fn db_of(lsas: impl IntoIterator<Item = Lsa>) -> Lsdb {
    let mut db = Lsdb::new();
    for l in lsas {
        db.install(l, SimTime::ZERO);
    }
    db
}

fn route(nh: u32, cost: u32) -> Route {
    Route { next_hop: RouterId(nh), cost }
}

#[test]
fn triangle_prefers_two_cheap_hops() {
    let (a, b, c) = (1, 2, 3);
    let db =
        db_of([router_lsa(a, &[(b, 1), (c, 5)]), router_lsa(b, &[(a, 1), (c, 1)]), router_lsa(c, &[(a, 5), (b, 1)])]);
    let t = spf_compute(&db, RouterId(a));
    assert_eq!(t[&Destination::Router(RouterId(c))], route(b, 2));
    assert_eq!(t[&Destination::Router(RouterId(b))], route(b, 1));
    assert_eq!(t[&Destination::Router(RouterId(a))], route(a, 0));
}

#[test]
fn one_sided_link_is_ignored() {
    let db = db_of([router_lsa(1, &[(2, 1)]), router_lsa(2, &[])]);
    let t = spf_compute(&db, RouterId(1));
    assert_eq!(t.len(), 1);
    assert!(confirmed_links(&db)[&RouterId(1)].is_empty());
}

#[test]
fn lone_root_sees_only_itself() {
    let db = db_of([router_lsa(7, &[])]);
    let t = spf_compute(&db, RouterId(7));
    assert_eq!(t.into_iter().collect::<Vec<_>>(), vec![(Destination::Router(RouterId(7)), route(7, 0))]);
}

#[test]
fn equal_cost_paths_take_lowest_next_hop() {
    // Square 1-2-4 and 1-3-4, all costs 1.
    let db = db_of([
        router_lsa(1, &[(3, 1), (2, 1)]),
        router_lsa(2, &[(1, 1), (4, 1)]),
        router_lsa(3, &[(1, 1), (4, 1)]),
        router_lsa(4, &[(3, 1), (2, 1)]),
        external(4, 1, Prefix::v4(Ipv4Addr::new(203, 0, 113, 0), 24).unwrap(), 3),
    ]);
    let t = spf_compute(&db, RouterId(1));
    assert_eq!(t[&Destination::Router(RouterId(4))], route(2, 2));
    let p = Prefix::v4(Ipv4Addr::new(203, 0, 113, 0), 24).unwrap();
    assert_eq!(t[&Destination::Prefix(p)], route(2, 5));
}

#[test]
fn flushed_lsa_removes_router() {
    let mut gone = router_lsa(2, &[(1, 1)]);
    gone.header.age = MAX_AGE;
    let db = db_of([router_lsa(1, &[(2, 1)]), gone]);
    assert_eq!(spf_compute(&db, RouterId(1)).len(), 1);
}

/// Every simple path from `root`, returning per destination the cheapest
/// cost and the smallest first hop among the cheapest paths.
fn all_paths_oracle(adj: &BTreeMap<u32, BTreeMap<u32, u32>>, root: u32) -> BTreeMap<u32, (u32, u32)> {
    fn walk(
        adj: &BTreeMap<u32, BTreeMap<u32, u32>>,
        at: u32,
        cost: u32,
        first: Option<u32>,
        seen: &mut BTreeSet<u32>,
        best: &mut BTreeMap<u32, (u32, u32)>,
        root: u32,
    ) {
        let label = (cost, first.unwrap_or(root));
        let slot = best.entry(at).or_insert(label);
        if label < *slot {
            *slot = label;
        }
        for (&n, &w) in adj.get(&at).into_iter().flatten() {
            if seen.insert(n) {
                walk(adj, n, cost + w, first.or(Some(n)), seen, best, root);
                seen.remove(&n);
            }
        }
    }
    let mut best = BTreeMap::new();
    let mut seen = BTreeSet::from([root]);
    walk(adj, root, 0, None, &mut seen, &mut best, root);
    best
}

#[test]
fn thousand_random_graphs_match_all_paths_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5bf);
    for g in 0..1000 {
        let n = rng.random_range(1..=8u32);
        let mut advertised: BTreeMap<u32, Vec<(u32, u32)>> = (1..=n).map(|i| (i, vec![])).collect();
        // Symmetric adjacency the oracle walks; one-sided adverts stay out.
        let mut adj: BTreeMap<u32, BTreeMap<u32, u32>> = BTreeMap::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if !rng.random_bool(0.5) {
                    continue;
                }
                let (wa, wb) = (rng.random_range(1..10), rng.random_range(1..10));
                match rng.random_range(0..6) {
                    0 => advertised.get_mut(&a).unwrap().push((b, wa)),
                    1 => advertised.get_mut(&b).unwrap().push((a, wb)),
                    _ => {
                        advertised.get_mut(&a).unwrap().push((b, wa));
                        advertised.get_mut(&b).unwrap().push((a, wb));
                        adj.entry(a).or_default().insert(b, wa);
                        adj.entry(b).or_default().insert(a, wb);
                    }
                }
            }
        }
        let mut lsas: Vec<Lsa> = advertised.iter().map(|(r, l)| router_lsa(*r, l)).collect();
        let mut prefixes = Vec::new();
        for i in 0..rng.random_range(0..4u32) {
            let adv = rng.random_range(1..=n);
            let p = Prefix::v4(Ipv4Addr::new(10, rng.random_range(0..3), 0, 0), 16).unwrap();
            let cost = rng.random_range(0..20);
            lsas.push(external(adv, i, p, cost));
            prefixes.push((adv, p, cost));
        }
        let db = db_of(lsas);
        let root = rng.random_range(1..=n);
        let table = spf_compute(&db, RouterId(root));
        let oracle = all_paths_oracle(&adj, root);

        let mut expect = RouteTable::new();
        for (r, (c, nh)) in &oracle {
            expect.insert(Destination::Router(RouterId(*r)), route(*nh, *c));
        }
        for (adv, p, cost) in prefixes {
            if let Some((c, nh)) = oracle.get(&adv) {
                let cand = route(*nh, c + cost);
                let slot = expect.entry(Destination::Prefix(p)).or_insert(cand);
                if (cand.cost, cand.next_hop) < (slot.cost, slot.next_hop) {
                    *slot = cand;
                }
            }
        }
        assert_eq!(table, expect, "graph {g}, root {root}, adverts {advertised:?}");
    }
}
