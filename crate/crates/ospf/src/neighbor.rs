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

//! Point-to-point neighbor state machine and database exchange.
//!
//! In `OverQuic` mode reaching TwoWay asks the driver for a secure
//! connection and the database exchange waits until it is up; every packet
//! after that travels on the connection's stream. Hellos stay on datagrams.

use std::collections::BTreeMap;
use std::fmt;

use roq_netsim::SimTime;

use crate::lsdb::{lsdb_compare, Freshness, Lsdb};
use crate::packet::{Dbd, DdFlags, LsaHeader, LsaKey, RouterId, MAX_AGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NbrState {
    Down,
    Init,
    TwoWay,
    ExStart,
    Exchange,
    Loading,
    Full,
}

impl fmt::Display for NbrState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NbrState::Down => "Down",
            NbrState::Init => "Init",
            NbrState::TwoWay => "TwoWay",
            NbrState::ExStart => "ExStart",
            NbrState::Exchange => "Exchange",
            NbrState::Loading => "Loading",
            NbrState::Full => "Full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Native,
    OverQuic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Native => "native",
            Mode::OverQuic => "quic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NbrConfig {
    pub local: RouterId,
    pub peer: RouterId,
    pub mode: Mode,
    /// Leave reliability to the stream: no LsAcks, no retransmissions.
    /// Only meaningful in `OverQuic` mode.
    pub delegate_acks: bool,
    pub max_quic_retries: u8,
    /// LSA headers per DBD packet.
    pub dbd_page: usize,
}

impl NbrConfig {
    pub fn new(local: RouterId, peer: RouterId, mode: Mode) -> Self {
        NbrConfig { local, peer, mode, delegate_acks: false, max_quic_retries: 5, dbd_page: 64 }
    }

    /// Whether OSPF itself retransmits and acknowledges.
    pub fn ospf_reliability(&self) -> bool {
        !(self.mode == Mode::OverQuic && self.delegate_acks)
    }

    pub fn is_master(&self) -> bool {
        self.local > self.peer
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NbrEvent {
    HelloReceived { lists_me: bool },
    Dead,
    QuicEstablished,
    QuicFailed,
    DbdReceived(Dbd),
    LsRequestReceived(Vec<LsaKey>),
    LsUpdateReceived(Vec<LsaHeader>),
    LsAckReceived(Vec<LsaHeader>),
    RxmtTimerExpired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NbrAction {
    EstablishQuic,
    CloseQuic,
    SendDbd(Dbd),
    SendLsRequest(Vec<LsaKey>),
    /// Send the current database copies of these LSAs.
    SendLsUpdate(Vec<LsaKey>),
    FlushAdjacency,
    RegenerateRouterLsa,
    ArmRxmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub cfg: NbrConfig,
    pub state: NbrState,
    /// A secure connection to the peer exists or is being set up.
    pub conn: bool,
    pub quic_retries: u8,
    /// A connection retry waits for the retransmission timer.
    pub retry_pending: bool,
    pub dead_deadline: Option<SimTime>,
    pub dd_seq: u32,
    /// Headers not yet described to the peer.
    pub summary: Vec<LsaHeader>,
    pub last_dbd: Option<Dbd>,
    /// LSAs to request from the peer.
    pub requests: BTreeMap<LsaKey, LsaHeader>,
    /// Flooded LSAs awaiting acknowledgement.
    pub rxmt: BTreeMap<LsaKey, LsaHeader>,
}

impl Neighbor {
    pub fn new(cfg: NbrConfig) -> Self {
        Neighbor {
            cfg,
            state: NbrState::Down,
            conn: false,
            quic_retries: 0,
            retry_pending: false,
            dead_deadline: None,
            dd_seq: 0,
            summary: Vec::new(),
            last_dbd: None,
            requests: BTreeMap::new(),
            rxmt: BTreeMap::new(),
        }
    }

    /// True while the adjacency can carry flooded LSAs.
    pub fn floods(&self) -> bool {
        self.state >= NbrState::Exchange
    }
}

/// Opening DBD sequence number. Any deterministic value works; mixing in
/// the clock keeps successive exchanges distinct.
pub fn initial_dd_seq(local: RouterId, now: SimTime) -> u32 {
    (now.as_micros() / 1000) as u32 ^ local.0.rotate_left(16)
}

/// Pure transition: the neighbor's next state and the actions the driver
/// must carry out. `lsdb` is read to describe and compare database contents.
pub fn neighbor_fsm_step(n: &Neighbor, e: NbrEvent, lsdb: &Lsdb, now: SimTime) -> (Neighbor, Vec<NbrAction>) {
    let mut s = Step { n: n.clone(), out: Vec::new(), lsdb, now };
    s.handle(e);
    (s.n, s.out)
}

struct Step<'a> {
    n: Neighbor,
    out: Vec<NbrAction>,
    lsdb: &'a Lsdb,
    now: SimTime,
}

impl Step<'_> {
    fn reliable(&self) -> bool {
        self.n.cfg.ospf_reliability()
    }

    fn arm(&mut self) {
        if self.reliable() && !self.out.contains(&NbrAction::ArmRxmt) {
            self.out.push(NbrAction::ArmRxmt);
        }
    }

    fn handle(&mut self, e: NbrEvent) {
        use NbrState::*;
        match e {
            NbrEvent::HelloReceived { lists_me } => match self.n.state {
                Down => {
                    self.n.state = Init;
                    if lists_me {
                        self.two_way();
                    }
                }
                Init => {
                    if lists_me && !self.n.retry_pending {
                        self.two_way();
                    }
                }
                _ => {
                    if !lists_me {
                        self.teardown(Init);
                    }
                }
            },
            NbrEvent::Dead => {
                if self.n.state != Down {
                    self.teardown(Down);
                    self.n.quic_retries = 0;
                    self.n.retry_pending = false;
                }
            }
            NbrEvent::QuicEstablished => {
                if self.n.cfg.mode == Mode::OverQuic && self.n.state == TwoWay {
                    self.n.quic_retries = 0;
                    self.exstart();
                }
            }
            NbrEvent::QuicFailed => {
                if self.n.cfg.mode != Mode::OverQuic || self.n.state < TwoWay {
                    return;
                }
                self.n.conn = false;
                if self.n.quic_retries >= self.n.cfg.max_quic_retries {
                    self.teardown(Down);
                    self.n.quic_retries = 0;
                    self.n.retry_pending = false;
                } else {
                    self.teardown(Init);
                    self.n.retry_pending = true;
                    self.out.push(NbrAction::ArmRxmt);
                }
            }
            NbrEvent::DbdReceived(d) => self.dbd(d),
            NbrEvent::LsRequestReceived(keys) => {
                if self.n.state >= Exchange && !keys.is_empty() {
                    self.out.push(NbrAction::SendLsUpdate(keys));
                }
            }
            NbrEvent::LsUpdateReceived(headers) => {
                if self.n.state < Exchange {
                    return;
                }
                for h in &headers {
                    let satisfied =
                        self.n.requests.get(&h.key).is_some_and(|want| lsdb_compare(h, want) != Ok(Freshness::BNewer));
                    if satisfied {
                        self.n.requests.remove(&h.key);
                    }
                }
                if self.n.state == Loading && self.n.requests.is_empty() {
                    self.n.state = Full;
                    self.out.push(NbrAction::RegenerateRouterLsa);
                }
            }
            NbrEvent::LsAckReceived(headers) => {
                for h in &headers {
                    if self.n.rxmt.get(&h.key).is_some_and(|sent| lsdb_compare(h, sent) == Ok(Freshness::Same)) {
                        self.n.rxmt.remove(&h.key);
                    }
                }
            }
            NbrEvent::RxmtTimerExpired => self.rxmt_expired(),
        }
    }

    fn two_way(&mut self) {
        match self.n.cfg.mode {
            Mode::Native => self.exstart(),
            Mode::OverQuic => {
                self.n.state = NbrState::TwoWay;
                self.n.conn = true;
                self.out.push(NbrAction::EstablishQuic);
            }
        }
    }

    /// Leaves the adjacency, dropping everything learned during exchange.
    fn teardown(&mut self, to: NbrState) {
        let was_full = self.n.state == NbrState::Full;
        self.n.state = to;
        self.clear_exchange();
        self.n.rxmt.clear();
        self.out.push(NbrAction::FlushAdjacency);
        if was_full {
            self.out.push(NbrAction::RegenerateRouterLsa);
        }
        if self.n.conn {
            self.n.conn = false;
            self.out.push(NbrAction::CloseQuic);
        }
    }

    fn clear_exchange(&mut self) {
        self.n.summary.clear();
        self.n.last_dbd = None;
        self.n.requests.clear();
    }

    fn exstart(&mut self) {
        let was_full = self.n.state == NbrState::Full;
        self.n.state = NbrState::ExStart;
        self.clear_exchange();
        self.n.rxmt.clear();
        if was_full {
            self.out.push(NbrAction::RegenerateRouterLsa);
        }
        self.n.dd_seq = initial_dd_seq(self.n.cfg.local, self.now);
        let mut flags = DdFlags::INIT | DdFlags::MORE;
        if self.n.cfg.is_master() {
            flags |= DdFlags::MASTER;
        }
        let d = Dbd { dd_seq: self.n.dd_seq, flags: DdFlags(flags), headers: Vec::new() };
        self.n.last_dbd = Some(d.clone());
        self.out.push(NbrAction::SendDbd(d));
        if self.n.cfg.is_master() {
            self.arm();
        }
    }

    fn begin_exchange(&mut self) {
        self.n.state = NbrState::Exchange;
        self.n.summary = self.lsdb.headers(self.now);
    }

    /// Adds every described LSA that is missing or stale locally to the
    /// request list.
    fn learn(&mut self, headers: &[LsaHeader]) {
        for h in headers {
            let want = match self.lsdb.header(&h.key, self.now) {
                None => h.age < MAX_AGE,
                Some(mine) => lsdb_compare(h, &mine) == Ok(Freshness::ANewer),
            };
            if want {
                self.n.requests.insert(h.key, *h);
            }
        }
    }

    /// Builds the next DBD from the remaining summary.
    fn next_page(&mut self, master: bool) -> Dbd {
        let take = self.n.cfg.dbd_page.min(self.n.summary.len());
        let headers: Vec<LsaHeader> = self.n.summary.drain(..take).collect();
        let mut flags = 0;
        if !self.n.summary.is_empty() {
            flags |= DdFlags::MORE;
        }
        if master {
            flags |= DdFlags::MASTER;
        }
        let d = Dbd { dd_seq: self.n.dd_seq, flags: DdFlags(flags), headers };
        self.n.last_dbd = Some(d.clone());
        d
    }

    fn last_more(&self) -> bool {
        self.n.last_dbd.as_ref().is_some_and(|d| d.flags.more())
    }

    fn dbd(&mut self, d: Dbd) {
        use NbrState::*;
        let master = self.n.cfg.is_master();
        match self.n.state {
            Down | TwoWay => {}
            Init => {
                // Only native adjacencies may infer two-way from a DBD.
                if self.n.cfg.mode == Mode::Native {
                    self.exstart();
                    self.dbd(d);
                }
            }
            ExStart => {
                let f = d.flags;
                if !master && f.init() && f.more() && f.master() && d.headers.is_empty() {
                    self.n.dd_seq = d.dd_seq;
                    self.begin_exchange();
                    let reply = self.next_page(false);
                    self.out.push(NbrAction::SendDbd(reply));
                } else if master && !f.init() && !f.master() && d.dd_seq == self.n.dd_seq {
                    self.begin_exchange();
                    self.learn(&d.headers);
                    self.master_next(f.more());
                }
            }
            Exchange => {
                let f = d.flags;
                if master {
                    if f.init() && !f.master() {
                        // The slave's opening DBD, overtaken by events.
                    } else if f.init() || f.master() {
                        self.mismatch();
                    } else if d.dd_seq == self.n.dd_seq {
                        self.learn(&d.headers);
                        self.master_next(f.more());
                    } else if d.dd_seq != self.n.dd_seq.wrapping_sub(1) {
                        self.mismatch();
                    }
                } else if !f.master() {
                    self.mismatch();
                } else if d.dd_seq == self.n.dd_seq {
                    // Duplicate: the master missed our reply.
                    if let Some(last) = self.n.last_dbd.clone() {
                        self.out.push(NbrAction::SendDbd(last));
                    }
                } else if !f.init() && d.dd_seq == self.n.dd_seq.wrapping_add(1) {
                    self.n.dd_seq = d.dd_seq;
                    self.learn(&d.headers);
                    let reply = self.next_page(false);
                    let done = !f.more() && !reply.flags.more();
                    self.out.push(NbrAction::SendDbd(reply));
                    if done {
                        self.exchange_done();
                    }
                } else {
                    self.mismatch();
                }
            }
            Loading | Full => {
                if d.flags.init() && d.flags.master() && !master && d.dd_seq != self.n.dd_seq {
                    // The master restarted the exchange.
                    self.mismatch();
                    self.dbd(d);
                } else if !master && d.dd_seq == self.n.dd_seq {
                    if let Some(last) = self.n.last_dbd.clone() {
                        self.out.push(NbrAction::SendDbd(last));
                    }
                }
            }
        }
    }

    fn master_next(&mut self, slave_more: bool) {
        if !self.last_more() && !slave_more {
            self.exchange_done();
            return;
        }
        self.n.dd_seq = self.n.dd_seq.wrapping_add(1);
        let d = self.next_page(true);
        self.out.push(NbrAction::SendDbd(d));
        self.arm();
    }

    fn mismatch(&mut self) {
        self.out.push(NbrAction::FlushAdjacency);
        self.exstart();
    }

    fn exchange_done(&mut self) {
        if self.n.requests.is_empty() {
            self.n.state = NbrState::Full;
            self.out.push(NbrAction::RegenerateRouterLsa);
        } else {
            self.n.state = NbrState::Loading;
            let keys = self.n.requests.keys().copied().collect();
            self.out.push(NbrAction::SendLsRequest(keys));
            self.arm();
        }
    }

    fn rxmt_expired(&mut self) {
        use NbrState::*;
        if self.n.state == Init && self.n.retry_pending {
            self.n.retry_pending = false;
            self.n.quic_retries += 1;
            self.n.state = TwoWay;
            self.n.conn = true;
            self.out.push(NbrAction::EstablishQuic);
            return;
        }
        if !self.reliable() {
            return;
        }
        match self.n.state {
            ExStart if self.n.cfg.is_master() => {
                if let Some(d) = self.n.last_dbd.clone() {
                    self.out.push(NbrAction::SendDbd(d));
                    self.arm();
                }
            }
            Exchange if self.n.cfg.is_master() => {
                if let Some(d) = self.n.last_dbd.clone() {
                    self.out.push(NbrAction::SendDbd(d));
                    self.arm();
                }
            }
            Loading => {
                let keys = self.n.requests.keys().copied().collect();
                self.out.push(NbrAction::SendLsRequest(keys));
                self.arm();
            }
            _ => {}
        }
        if self.n.state >= Exchange && !self.n.rxmt.is_empty() {
            let keys = self.n.rxmt.keys().copied().collect();
            self.out.push(NbrAction::SendLsUpdate(keys));
            self.arm();
        }
    }
}
