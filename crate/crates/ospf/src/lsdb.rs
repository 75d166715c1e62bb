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

//! The link state database and instance comparison.
//!
//! Ages are tracked lazily: each entry remembers the age it was installed
//! with and when, and its current age is derived from the clock on demand.

use std::collections::BTreeMap;
use std::time::Duration;

use roq_netsim::SimTime;
use thiserror::Error;

use crate::packet::{Lsa, LsaHeader, LsaKey, MAX_AGE};

/// Ages closer than this are considered equal.
pub const MAX_AGE_DIFF: u16 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Freshness {
    ANewer,
    Same,
    BNewer,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("compared headers of different LSAs ({0} vs {1})")]
pub struct KeyMismatch(pub LsaKey, pub LsaKey);

/// Higher sequence wins; for equal sequences the younger copy wins when the
/// ages differ by more than [`MAX_AGE_DIFF`].
pub fn lsdb_compare(a: &LsaHeader, b: &LsaHeader) -> Result<Freshness, KeyMismatch> {
    if a.key != b.key {
        return Err(KeyMismatch(a.key, b.key));
    }
    Ok(if a.seq != b.seq {
        if a.seq > b.seq {
            Freshness::ANewer
        } else {
            Freshness::BNewer
        }
    } else if a.age.abs_diff(b.age) > MAX_AGE_DIFF {
        if a.age < b.age {
            Freshness::ANewer
        } else {
            Freshness::BNewer
        }
    } else {
        Freshness::Same
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Stored {
    lsa: Lsa,
    installed_at: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lsdb {
    entries: BTreeMap<LsaKey, Stored>,
}

fn aged(age: u16, since: Duration) -> u16 {
    let secs = since.as_secs().min(MAX_AGE as u64) as u16;
    age.saturating_add(secs).min(MAX_AGE)
}

impl Lsdb {
    pub fn new() -> Self {
        Lsdb::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &LsaKey) -> bool {
        self.entries.contains_key(key)
    }

    /// The stored instance with its age as of `now`.
    pub fn get(&self, key: &LsaKey, now: SimTime) -> Option<Lsa> {
        self.entries.get(key).map(|s| {
            let mut lsa = s.lsa.clone();
            lsa.header.age = aged(lsa.header.age, now.saturating_since(s.installed_at));
            lsa
        })
    }

    pub fn header(&self, key: &LsaKey, now: SimTime) -> Option<LsaHeader> {
        self.entries
            .get(key)
            .map(|s| LsaHeader { age: aged(s.lsa.header.age, now.saturating_since(s.installed_at)), ..s.lsa.header })
    }

    /// Installs `lsa` as received, replacing any previous instance. Returns
    /// true if the routing-relevant contents changed.
    pub fn install(&mut self, lsa: Lsa, now: SimTime) -> bool {
        let changed = match self.entries.get(&lsa.key()) {
            None => !lsa.is_max_age(),
            Some(old) => old.lsa.body != lsa.body || old.lsa.is_max_age() != lsa.is_max_age(),
        };
        self.entries.insert(lsa.key(), Stored { lsa, installed_at: now });
        changed
    }

    pub fn remove(&mut self, key: &LsaKey) -> Option<Lsa> {
        self.entries.remove(key).map(|s| s.lsa)
    }

    pub fn keys(&self) -> impl Iterator<Item = &LsaKey> + '_ {
        self.entries.keys()
    }

    /// Stored instances, ages as installed.
    pub fn iter(&self) -> impl Iterator<Item = &Lsa> + '_ {
        self.entries.values().map(|s| &s.lsa)
    }

    pub fn headers(&self, now: SimTime) -> Vec<LsaHeader> {
        self.entries.keys().filter_map(|k| self.header(k, now)).collect()
    }

    /// Key to sequence number map, the age-independent identity of the
    /// database contents.
    pub fn summary(&self) -> BTreeMap<LsaKey, i32> {
        self.entries.iter().map(|(k, s)| (*k, s.lsa.header.seq)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{LsaBody, LsaType, RouterId, INITIAL_SEQ};

    fn h(seq: i32, age: u16) -> LsaHeader {
        LsaHeader { key: LsaKey { ty: LsaType::Router, adv_router: RouterId(1), lsa_id: 0 }, seq, age }
    }

    #[test]
    fn compare_examples() {
        let s1 = 0x8000_0001_u32 as i32;
        let s2 = 0x8000_0002_u32 as i32;
        assert_eq!(lsdb_compare(&h(s2, 0), &h(s1, 0)), Ok(Freshness::ANewer));
        assert_eq!(lsdb_compare(&h(s1, 100), &h(s1, 10)), Ok(Freshness::BNewer));
        assert_eq!(lsdb_compare(&h(s1, 12), &h(s1, 10)), Ok(Freshness::Same));
        let mut other = h(s1, 0);
        other.key.lsa_id = 9;
        assert!(lsdb_compare(&h(s1, 0), &other).is_err());
    }

    #[test]
    fn lazy_aging() {
        let mut db = Lsdb::new();
        let lsa = Lsa { header: h(INITIAL_SEQ, 3), body: LsaBody::Router(vec![]) };
        assert!(db.install(lsa.clone(), SimTime::from_secs(10)));
        assert_eq!(db.header(&lsa.key(), SimTime::from_millis(12_500)).unwrap().age, 5);
        assert_eq!(db.header(&lsa.key(), SimTime::from_secs(99_999)).unwrap().age, MAX_AGE);
    }
}
