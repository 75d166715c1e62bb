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

//! Routing information bases, best-path selection and route export.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use roq_netsim::SimTime;
use thiserror::Error;

use crate::codec::{err, update_len, PathAttrs, Update, MAX_MESSAGE_LEN};
use crate::prefix::{Family, Prefix};

/// Identifies where a route came from: the peer's BGP identifier, or
/// [`PeerId::LOCAL`] for routes originated by this router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId(pub u32);

impl PeerId {
    pub const LOCAL: PeerId = PeerId(0);
}

/// What the RIB needs to know about the other end of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeerRef {
    pub id: PeerId,
    pub asn: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibEntry {
    pub prefix: Prefix,
    pub attrs: Arc<PathAttrs>,
    pub learned_from: PeerId,
    pub t_received: SimTime,
}

impl RibEntry {
    fn same_route(&self, other: &RibEntry) -> bool {
        self.learned_from == other.learned_from && self.attrs == other.attrs
    }
}

/// Prefixes whose Loc-RIB best route changed, in prefix order.
pub type RibDelta = BTreeSet<Prefix>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpdateError {
    #[error("empty AS_PATH from external peer")]
    EmptyAsPath,
    #[error("AS_PATH starts with {first}, peer is AS {peer}")]
    FirstAsMismatch { first: u32, peer: u32 },
}

impl UpdateError {
    pub fn notification(&self) -> (u8, u8) {
        (err::UPDATE, 11)
    }
}

#[derive(Debug, Default)]
pub struct Rib {
    adj_in: BTreeMap<PeerId, BTreeMap<Prefix, RibEntry>>,
    loc: BTreeMap<Prefix, RibEntry>,
    loop_rejections: u64,
}

/// Best path: shortest AS_PATH, then lowest peer identifier.
pub fn decide<'a, I>(prefix: &Prefix, candidates: I) -> Option<&'a RibEntry>
where
    I: IntoIterator<Item = &'a RibEntry>,
{
    candidates.into_iter().filter(|e| e.prefix == *prefix).min_by_key(|e| (e.attrs.as_path.len(), e.learned_from))
}

impl Rib {
    pub fn new() -> Self {
        Rib::default()
    }

    pub fn loc_rib(&self) -> &BTreeMap<Prefix, RibEntry> {
        &self.loc
    }

    pub fn best(&self, prefix: &Prefix) -> Option<&RibEntry> {
        self.loc.get(prefix)
    }

    pub fn adj_rib_in(&self, peer: PeerId) -> Option<&BTreeMap<Prefix, RibEntry>> {
        self.adj_in.get(&peer)
    }

    pub fn adj_in_entry(&self, peer: PeerId, prefix: &Prefix) -> Option<&RibEntry> {
        self.adj_in.get(&peer)?.get(prefix)
    }

    /// Announcements discarded because their AS_PATH held the local AS.
    pub fn loop_rejections(&self) -> u64 {
        self.loop_rejections
    }

    /// Every entry in any table whose AS_PATH contains `asn`.
    pub fn entries_containing(&self, asn: u32) -> usize {
        self.adj_in
            .values()
            .flat_map(|m| m.values())
            .chain(self.loc.values())
            .filter(|e| e.attrs.as_path.contains(&asn))
            .count()
    }

    /// Installs locally originated routes.
    pub fn originate<I>(&mut self, routes: I, now: SimTime) -> RibDelta
    where
        I: IntoIterator<Item = (Prefix, PathAttrs)>,
    {
        let table = self.adj_in.entry(PeerId::LOCAL).or_default();
        let mut touched = Vec::new();
        for (prefix, attrs) in routes {
            table.insert(
                prefix,
                RibEntry { prefix, attrs: Arc::new(attrs), learned_from: PeerId::LOCAL, t_received: now },
            );
            touched.push(prefix);
        }
        self.redecide(touched)
    }

    /// Forgets everything learned from `peer`, as when its session drops.
    pub fn drop_peer(&mut self, peer: PeerId) -> RibDelta {
        match self.adj_in.remove(&peer) {
            Some(m) => self.redecide(m.into_keys()),
            None => RibDelta::new(),
        }
    }

    fn redecide<I: IntoIterator<Item = Prefix>>(&mut self, prefixes: I) -> RibDelta {
        let mut delta = RibDelta::new();
        for p in prefixes {
            let best = decide(&p, self.adj_in.values().filter_map(|m| m.get(&p))).cloned();
            let changed = match (self.loc.get(&p), &best) {
                (None, None) => false,
                (Some(old), Some(new)) => !old.same_route(new),
                _ => true,
            };
            if changed {
                match best {
                    Some(e) => self.loc.insert(p, e),
                    None => self.loc.remove(&p),
                };
                delta.insert(p);
            }
        }
        delta
    }
}

/// Applies an Update from `peer` and returns the prefixes whose best route
/// changed. Malformed updates leave the RIB untouched.
pub fn process_update(
    rib: &mut Rib,
    peer: PeerRef,
    u: &Update,
    local_as: u32,
    now: SimTime,
) -> Result<RibDelta, UpdateError> {
    if let (Some(a), false) = (&u.attrs, u.nlri.is_empty()) {
        match a.as_path.first() {
            None => return Err(UpdateError::EmptyAsPath),
            Some(&first) if first != peer.asn => return Err(UpdateError::FirstAsMismatch { first, peer: peer.asn }),
            _ => {}
        }
    }
    let table = rib.adj_in.entry(peer.id).or_default();
    let mut touched = Vec::with_capacity(u.withdrawn.len() + u.nlri.len());
    for p in &u.withdrawn {
        if table.remove(p).is_some() {
            touched.push(*p);
        }
    }
    if let Some(attrs) = &u.attrs {
        let looped = attrs.as_path.contains(&local_as);
        let attrs = Arc::new(attrs.clone());
        for p in &u.nlri {
            if looped {
                rib.loop_rejections += 1;
                // A looped announcement replaces, and so withdraws, any
                // earlier route for the prefix.
                if table.remove(p).is_some() {
                    touched.push(*p);
                }
                continue;
            }
            table.insert(*p, RibEntry { prefix: *p, attrs: attrs.clone(), learned_from: peer.id, t_received: now });
            touched.push(*p);
        }
    }
    Ok(rib.redecide(touched))
}

/// Builds the Updates that tell `to` about every prefix in `delta`.
///
/// A best route learned from `to` itself is withdrawn (split horizon); one
/// whose path already holds `to`'s AS is skipped; anything else is sent
/// with the local AS prepended and the next hop set to `local_id`. Prefixes
/// sharing attributes are packed into messages of at most 4096 bytes.
pub fn export(rib: &Rib, delta: &RibDelta, to: PeerRef, local_as: u32, local_id: u32) -> Vec<Update> {
    let mut withdrawn = Vec::new();
    let mut groups: BTreeMap<PathAttrs, Vec<Prefix>> = BTreeMap::new();
    for p in delta {
        match rib.best(p) {
            None => withdrawn.push(*p),
            Some(e) if e.learned_from == to.id => withdrawn.push(*p),
            Some(e) if e.attrs.as_path.contains(&to.asn) => {}
            Some(e) => {
                let mut as_path = Vec::with_capacity(e.attrs.as_path.len() + 1);
                as_path.push(local_as);
                as_path.extend_from_slice(&e.attrs.as_path);
                let attrs =
                    PathAttrs { origin: e.attrs.origin, as_path, next_hop: local_id, med: None, local_pref: None };
                groups.entry(attrs).or_default().push(*p);
            }
        }
    }
    let mut out = pack(None, withdrawn);
    for (attrs, prefixes) in groups {
        out.extend(pack(Some(attrs), prefixes));
    }
    out
}

/// Greedily fills Updates up to the size cap. Prefixes arrive sorted, so
/// IPv4 entries precede IPv6 ones in every message.
fn pack(attrs: Option<PathAttrs>, prefixes: Vec<Prefix>) -> Vec<Update> {
    let mut out = Vec::new();
    let mut cur: Vec<Prefix> = Vec::new();
    let (mut b4, mut b6) = (0usize, 0usize);
    let size = |b4, b6| match &attrs {
        None => update_len(None, b4, b6, 0, 0),
        Some(a) => update_len(Some(a), 0, 0, b4, b6),
    };
    let finish = |cur: Vec<Prefix>| match &attrs {
        None => Update::withdraw(cur),
        Some(a) => Update::announce(a.clone(), cur),
    };
    for p in prefixes {
        let (n4, n6) = match p.family() {
            Family::V4 => (b4 + p.wire_len(), b6),
            Family::V6 => (b4, b6 + p.wire_len()),
        };
        if size(n4, n6) > MAX_MESSAGE_LEN && !cur.is_empty() {
            out.push(finish(std::mem::take(&mut cur)));
            (b4, b6) = (0, 0);
            match p.family() {
                Family::V4 => b4 = p.wire_len(),
                Family::V6 => b6 = p.wire_len(),
            }
        } else {
            (b4, b6) = (n4, n6);
        }
        cur.push(p);
    }
    if !cur.is_empty() {
        out.push(finish(cur));
    }
    out
}
