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

//! Shortest path first over the link state database.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use roq_bgp::Prefix;

use crate::lsdb::Lsdb;
use crate::packet::{LsaBody, RouterId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Destination {
    Router(RouterId),
    Prefix(Prefix),
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Router(r) => write!(f, "router {r}"),
            Destination::Prefix(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Route {
    /// First hop; the root itself for local destinations.
    pub next_hop: RouterId,
    pub cost: u32,
}

pub type RouteTable = BTreeMap<Destination, Route>;

/// Directed edges usable by SPF: a link counts only when both ends
/// advertise it. Flushed LSAs are ignored.
pub fn confirmed_links(db: &Lsdb) -> BTreeMap<RouterId, Vec<(RouterId, u32)>> {
    let mut adv: BTreeMap<RouterId, Vec<(RouterId, u32)>> = BTreeMap::new();
    for lsa in db.iter().filter(|l| !l.is_max_age()) {
        if let LsaBody::Router(links) = &lsa.body {
            adv.entry(lsa.header.key.adv_router).or_default().extend(links.iter().map(|l| (l.neighbor, l.cost)));
        }
    }
    let pairs: BTreeSet<(RouterId, RouterId)> =
        adv.iter().flat_map(|(a, ls)| ls.iter().map(move |(b, _)| (*a, *b))).collect();
    adv.iter()
        .map(|(a, ls)| {
            let kept = ls.iter().copied().filter(|(b, _)| pairs.contains(&(*b, *a))).collect();
            (*a, kept)
        })
        .collect()
}

/// Dijkstra from `root`. Equal-cost alternatives resolve to the lowest
/// next-hop router id.
pub fn spf_compute(db: &Lsdb, root: RouterId) -> RouteTable {
    let graph = confirmed_links(db);
    // Labels compare by (cost, next hop), so the settled label of a node is
    // the cheapest path with the smallest first hop.
    let mut best: BTreeMap<RouterId, (u32, RouterId)> = BTreeMap::new();
    let mut frontier: BTreeSet<(u32, RouterId, RouterId)> = BTreeSet::new();
    let mut done: BTreeSet<RouterId> = BTreeSet::new();
    best.insert(root, (0, root));
    frontier.insert((0, root, root));
    while let Some((cost, nh, node)) = frontier.pop_first() {
        if !done.insert(node) {
            continue;
        }
        for (next, w) in graph.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            if done.contains(next) {
                continue;
            }
            let hop = if node == root { *next } else { nh };
            let cand = (cost.saturating_add(*w), hop);
            if best.get(next).is_none_or(|cur| cand < *cur) {
                if let Some(cur) = best.insert(*next, cand) {
                    frontier.remove(&(cur.0, cur.1, *next));
                }
                frontier.insert((cand.0, cand.1, *next));
            }
        }
    }

    let mut table = RouteTable::new();
    for (r, (cost, nh)) in &best {
        table.insert(Destination::Router(*r), Route { next_hop: *nh, cost: *cost });
    }
    for lsa in db.iter().filter(|l| !l.is_max_age()) {
        if let LsaBody::External { prefix, cost } = &lsa.body {
            let Some((base, nh)) = best.get(&lsa.header.key.adv_router) else {
                continue;
            };
            let cand = Route { next_hop: *nh, cost: base.saturating_add(*cost) };
            let slot = table.entry(Destination::Prefix(*prefix)).or_insert(cand);
            if (cand.cost, cand.next_hop) < (slot.cost, slot.next_hop) {
                *slot = cand;
            }
        }
    }
    table
}
