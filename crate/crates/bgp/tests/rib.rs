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

use proptest::prelude::*;
use roq_bgp::*;
use roq_netsim::SimTime;

fn p(s: &str) -> Prefix {
    s.parse().unwrap()
}

fn peer(id: u32, asn: u32) -> PeerRef {
    PeerRef { id: PeerId(id), asn }
}

fn announce(path: &[u32], prefixes: &[Prefix]) -> Update {
    Update::announce(PathAttrs::new(path.to_vec(), 9), prefixes.to_vec())
}

#[test]
fn sole_candidate_wins() {
    let mut rib = Rib::new();
    let d = process_update(&mut rib, peer(2, 65001), &announce(&[65001], &[p("10.0.0.0/8")]), 64500, SimTime::ZERO)
        .unwrap();
    assert_eq!(d, BTreeSet::from([p("10.0.0.0/8")]));
    let best = rib.best(&p("10.0.0.0/8")).unwrap();
    assert_eq!(best.attrs.as_path, vec![65001]);
    assert_eq!(best.learned_from, PeerId(2));
}

#[test]
fn looped_path_is_discarded() {
    let mut rib = Rib::new();
    let u = announce(&[65001, 64500, 65002], &[p("10.0.0.0/8")]);
    let d = process_update(&mut rib, peer(2, 65001), &u, 64500, SimTime::ZERO).unwrap();
    assert!(d.is_empty());
    assert!(rib.adj_in_entry(PeerId(2), &p("10.0.0.0/8")).is_none());
    assert_eq!(rib.loop_rejections(), 1);
    assert_eq!(rib.entries_containing(64500), 0);
}

#[test]
fn withdrawing_best_promotes_alternate() {
    let mut rib = Rib::new();
    let pfx = p("192.0.2.0/24");
    process_update(&mut rib, peer(3, 65003), &announce(&[65003], &[pfx]), 64500, SimTime::ZERO).unwrap();
    process_update(&mut rib, peer(2, 65002), &announce(&[65002, 1], &[pfx]), 64500, SimTime::ZERO).unwrap();
    assert_eq!(rib.best(&pfx).unwrap().learned_from, PeerId(3));
    let d = process_update(&mut rib, peer(3, 65003), &Update::withdraw(vec![pfx]), 64500, SimTime::ZERO).unwrap();
    assert_eq!(d, BTreeSet::from([pfx]));
    assert_eq!(rib.best(&pfx).unwrap().learned_from, PeerId(2));
}

#[test]
fn export_rules() {
    let mut rib = Rib::new();
    let a = p("10.0.0.0/8");
    let b = p("172.16.0.0/12");
    process_update(&mut rib, peer(2, 65002), &announce(&[65002], &[a]), 64500, SimTime::ZERO).unwrap();
    process_update(&mut rib, peer(3, 65003), &announce(&[65003, 65004], &[b]), 64500, SimTime::ZERO).unwrap();
    let delta = BTreeSet::from([a, b]);

    // Back to the peer it came from: withdraw. To the other: prepend.
    let to2 = export(&rib, &delta, peer(2, 65002), 64500, 1);
    assert_eq!(to2.len(), 2);
    assert_eq!(to2[0], Update::withdraw(vec![a]));
    assert_eq!(to2[1].nlri, vec![b]);
    assert_eq!(to2[1].attrs.as_ref().unwrap().as_path, vec![64500, 65003, 65004]);
    assert_eq!(to2[1].attrs.as_ref().unwrap().next_hop, 1);

    // A peer whose AS already appears in the path is skipped.
    let to4 = export(&rib, &delta, peer(4, 65004), 64500, 1);
    assert_eq!(to4.len(), 1);
    assert_eq!(to4[0].nlri, vec![a]);
}

#[test]
fn packing_respects_the_size_cap() {
    let mut rib = Rib::new();
    let prefixes: Vec<Prefix> = (0..3000u32)
        .map(|i| Prefix::v4(Ipv4Addr::from(0x0A00_0000 + (i << 8)), 24).unwrap())
        .chain((0..200u32).map(|i| format!("2001:db8:{i:x}::/48").parse().unwrap()))
        .collect();
    let delta = rib.originate(prefixes.iter().map(|p| (*p, PathAttrs::new(vec![65010], 1))), SimTime::ZERO);
    let ups = export(&rib, &delta, peer(2, 65002), 64500, 1);
    assert!(ups.len() > 1);
    let mut seen = Vec::new();
    for u in &ups {
        let b = encode_message(&BgpMessage::Update(u.clone())).unwrap();
        assert!(b.len() <= MAX_MESSAGE_LEN);
        let (BgpMessage::Update(back), _) = decode_message(&b).unwrap() else { panic!("not an update") };
        seen.extend(back.nlri);
    }
    assert_eq!(seen, prefixes);
    // Greedy packing: all but the last message are nearly full.
    for u in &ups[..ups.len() - 1] {
        assert!(u.encoded_len() > MAX_MESSAGE_LEN - 20, "{}", u.encoded_len());
    }
}

/// Brute-force Loc-RIB: replays all updates into plain maps and picks the
/// best per prefix by sorting every candidate.
fn oracle(ops: &[(u32, Update)], local_as: u32) -> BTreeMap<Prefix, (usize, u32)> {
    let mut adj: BTreeMap<(u32, Prefix), Vec<u32>> = BTreeMap::new();
    for (peer, u) in ops {
        for w in &u.withdrawn {
            adj.remove(&(*peer, *w));
        }
        if let Some(a) = &u.attrs {
            for n in &u.nlri {
                if a.as_path.contains(&local_as) {
                    adj.remove(&(*peer, *n));
                } else {
                    adj.insert((*peer, *n), a.as_path.clone());
                }
            }
        }
    }
    let mut best: BTreeMap<Prefix, (usize, u32)> = BTreeMap::new();
    for ((peer, pfx), path) in adj {
        let cand = (path.len(), peer);
        best.entry(pfx).and_modify(|b| *b = (*b).min(cand)).or_insert(cand);
    }
    best
}

fn arb_op() -> impl Strategy<Value = (u32, Update)> {
    let prefixes = proptest::sample::subsequence(
        vec![p("10.0.0.0/8"), p("10.1.0.0/16"), p("192.0.2.0/24"), p("2001:db8::/32")],
        0..=4,
    );
    (1u32..=3, prefixes.clone(), prefixes, proptest::collection::vec(1u32..6, 0..4), any::<bool>()).prop_map(
        |(peer, w, n, tail, looped)| {
            let mut path = vec![65000 + peer];
            path.extend(tail.iter().map(|t| 65100 + t));
            if looped {
                path.push(64500);
            }
            let attrs = (!n.is_empty()).then(|| PathAttrs::new(path, peer));
            (peer, Update { withdrawn: w, attrs, nlri: n })
        },
    )
}

proptest! {
    #[test]
    fn loc_rib_matches_brute_force(ops in proptest::collection::vec(arb_op(), 1..40)) {
        let mut rib = Rib::new();
        let mut before: BTreeMap<Prefix, RibEntry> = BTreeMap::new();
        for (i, (peer_id, u)) in ops.iter().enumerate() {
            let d = process_update(&mut rib, peer(*peer_id, 65000 + peer_id), u, 64500, SimTime::from_micros(i as u64)).unwrap();
            // The delta is exactly the set of prefixes whose best changed.
            let after = rib.loc_rib().clone();
            let keys: BTreeSet<Prefix> = before.keys().chain(after.keys()).copied().collect();
            let changed: BTreeSet<Prefix> = keys.into_iter().filter(|k| {
                match (before.get(k), after.get(k)) {
                    (Some(x), Some(y)) => x.learned_from != y.learned_from || x.attrs != y.attrs,
                    (None, None) => false,
                    _ => true,
                }
            }).collect();
            prop_assert_eq!(d, changed);
            before = after;
        }
        let want = oracle(&ops, 64500);
        let got: BTreeMap<Prefix, (usize, u32)> = rib
            .loc_rib()
            .iter()
            .map(|(p, e)| (*p, (e.attrs.as_path.len(), e.learned_from.0)))
            .collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(rib.entries_containing(64500), 0);
    }
}
