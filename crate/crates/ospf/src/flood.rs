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

//! Installing new LSA instances and flooding them to adjacencies.

use std::collections::BTreeMap;

use roq_netsim::SimTime;
use thiserror::Error;

use crate::lsdb::{lsdb_compare, Freshness, Lsdb};
use crate::neighbor::Neighbor;
use crate::packet::{Lsa, LsaHeader, RouterId, MAX_AGE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FloodAction {
    SendLsUpdate { to: RouterId, lsa: Lsa },
    SendLsAck { to: RouterId, header: LsaHeader },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FloodOutcome {
    pub actions: Vec<FloodAction>,
    /// The instance was stored.
    pub installed: bool,
    /// Routing-relevant contents changed; the route table needs recomputing.
    pub changed: bool,
    /// A neighbor holds a newer instance of one of our own LSAs.
    pub self_originated: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FloodError {
    /// The received copy is older than ours; `newer` goes back to the sender.
    #[error("received instance of {} is older than the stored one", newer.header.key)]
    OlderThanStored { newer: Lsa },
}

pub struct FloodCtx<'a> {
    pub local: RouterId,
    pub lsdb: &'a mut Lsdb,
    pub neighbors: &'a mut BTreeMap<RouterId, Neighbor>,
    pub now: SimTime,
}

/// Handles one LSA arriving from `from`, or originated locally when `from`
/// is `None`.
pub fn install_and_flood(cx: FloodCtx<'_>, lsa: Lsa, from: Option<RouterId>) -> Result<FloodOutcome, FloodError> {
    let FloodCtx { local, lsdb, neighbors, now } = cx;
    let key = lsa.key();
    let mut out = FloodOutcome::default();
    let ack = |to: RouterId, neighbors: &BTreeMap<RouterId, Neighbor>, out: &mut FloodOutcome| {
        if neighbors.get(&to).is_some_and(|n| n.cfg.ospf_reliability()) {
            out.actions.push(FloodAction::SendLsAck { to, header: lsa.header });
        }
    };

    let stored = lsdb.header(&key, now);
    let verdict = match (&stored, from) {
        (_, None) | (None, _) => Freshness::ANewer,
        (Some(mine), Some(_)) => lsdb_compare(&lsa.header, mine).expect("same key"),
    };
    match verdict {
        Freshness::Same => {
            let from = from.expect("local origination is always newer");
            let implied = neighbors.get_mut(&from).and_then(|n| n.rxmt.remove(&key)).is_some();
            if !implied {
                ack(from, neighbors, &mut out);
            }
            return Ok(out);
        }
        Freshness::BNewer => {
            let newer = lsdb.get(&key, now).expect("stored");
            return Err(FloodError::OlderThanStored { newer });
        }
        Freshness::ANewer => {}
    }

    if let Some(from) = from {
        if stored.is_none() && lsa.header.age >= MAX_AGE && !neighbors.values().any(|n| n.state_exchanging()) {
            // Flushing something we never had: acknowledge and forget.
            ack(from, neighbors, &mut out);
            return Ok(out);
        }
        if key.adv_router == local {
            out.self_originated = true;
        }
    }

    out.changed = lsdb.install(lsa.clone(), now);
    out.installed = true;
    let mut copy = lsa.clone();
    copy.header.age = copy.header.age.saturating_add(1).min(MAX_AGE);
    for (id, n) in neighbors.iter_mut() {
        if n.requests.get(&key).is_some_and(|want| lsdb_compare(&lsa.header, want) != Ok(Freshness::BNewer)) {
            n.requests.remove(&key);
        }
        if Some(*id) == from {
            n.rxmt.remove(&key);
            continue;
        }
        if !n.floods() {
            continue;
        }
        out.actions.push(FloodAction::SendLsUpdate { to: *id, lsa: copy.clone() });
        if n.cfg.ospf_reliability() {
            n.rxmt.insert(key, copy.header);
        } else {
            n.rxmt.remove(&key);
        }
    }
    if let Some(from) = from {
        ack(from, neighbors, &mut out);
    }
    Ok(out)
}

impl Neighbor {
    fn state_exchanging(&self) -> bool {
        matches!(self.state, crate::neighbor::NbrState::Exchange | crate::neighbor::NbrState::Loading)
    }
}
