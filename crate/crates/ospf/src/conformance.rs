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

//! Scripted event traces through the neighbor state machine.
//!
//! Every trace names its starting neighbor and database, then lists per
//! step the event, the expected state and the exact action list. All steps
//! run at the same virtual instant, so DBD sequence numbers are fixed.

use roq_netsim::SimTime;

use crate::lsdb::Lsdb;
use crate::neighbor::{initial_dd_seq, neighbor_fsm_step, Mode, NbrAction, NbrConfig, NbrEvent, NbrState, Neighbor};
use crate::packet::{Dbd, DdFlags, Lsa, LsaBody, LsaHeader, LsaKey, LsaType, RouterId, RouterLink, INITIAL_SEQ};

use NbrAction as A;
use NbrEvent as E;
use NbrState::*;

pub type Step = (NbrEvent, NbrState, Vec<NbrAction>);

#[derive(Debug, Clone)]
pub struct Trace {
    pub name: &'static str,
    pub start: Neighbor,
    pub lsdb: Lsdb,
    pub steps: Vec<Step>,
}

pub const NOW: SimTime = SimTime::from_secs(100);
const LOCAL: RouterId = RouterId(2);
/// Lower id: we are master towards it.
const LOW: RouterId = RouterId(1);
/// Higher id: we are slave towards it.
const HIGH: RouterId = RouterId(3);

fn nbr(peer: RouterId, mode: Mode) -> Neighbor {
    Neighbor::new(NbrConfig::new(LOCAL, peer, mode))
}

fn delegated(peer: RouterId) -> Neighbor {
    let mut c = NbrConfig::new(LOCAL, peer, Mode::OverQuic);
    c.delegate_acks = true;
    Neighbor::new(c)
}

fn in_state(mut n: Neighbor, s: NbrState) -> Neighbor {
    n.state = s;
    n.conn = n.cfg.mode == Mode::OverQuic && s >= TwoWay;
    n
}

fn key(adv: u32) -> LsaKey {
    LsaKey { ty: LsaType::Router, adv_router: RouterId(adv), lsa_id: adv }
}

fn header(adv: u32, seq: i32) -> LsaHeader {
    LsaHeader { key: key(adv), seq, age: 1 }
}

/// One LSA of router 9, installed at time zero.
fn one_lsa_db() -> Lsdb {
    let mut db = Lsdb::new();
    db.install(
        Lsa {
            header: LsaHeader { key: key(9), seq: INITIAL_SEQ, age: 0 },
            body: LsaBody::Router(vec![RouterLink { neighbor: RouterId(8), cost: 1 }]),
        },
        SimTime::ZERO,
    );
    db
}

fn dbd(dd_seq: u32, flags: u8, headers: Vec<LsaHeader>) -> Dbd {
    Dbd { dd_seq, flags: DdFlags(flags), headers }
}

const I: u8 = DdFlags::INIT;
const M: u8 = DdFlags::MORE;
const MS: u8 = DdFlags::MASTER;

fn seq0() -> u32 {
    initial_dd_seq(LOCAL, NOW)
}

fn hello(lists_me: bool) -> NbrEvent {
    E::HelloReceived { lists_me }
}

fn trace(name: &'static str, start: Neighbor, steps: Vec<Step>) -> Trace {
    Trace { name, start, lsdb: Lsdb::new(), steps }
}

/// Master side of a native exchange with empty databases, ending Full.
fn master_bring_up() -> Vec<Step> {
    let s = seq0();
    vec![
        (hello(false), Init, vec![]),
        (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
        (E::DbdReceived(dbd(s, 0, vec![])), Exchange, vec![A::SendDbd(dbd(s + 1, MS, vec![])), A::ArmRxmt]),
        (E::DbdReceived(dbd(s + 1, 0, vec![])), Full, vec![A::RegenerateRouterLsa]),
    ]
}

/// Slave side of a native exchange with empty databases, ending Full.
fn slave_bring_up() -> Vec<Step> {
    vec![
        (hello(true), ExStart, vec![A::SendDbd(dbd(seq0(), I | M, vec![]))]),
        (E::DbdReceived(dbd(500, I | M | MS, vec![])), Exchange, vec![A::SendDbd(dbd(500, 0, vec![]))]),
        (E::DbdReceived(dbd(501, MS, vec![])), Full, vec![A::SendDbd(dbd(501, 0, vec![])), A::RegenerateRouterLsa]),
    ]
}

pub fn neighbor_traces() -> Vec<Trace> {
    let s = seq0();
    let mut v = vec![
        trace("hello_without_me_goes_init", nbr(LOW, Mode::Native), vec![(hello(false), Init, vec![])]),
        trace(
            "native_two_way_starts_exchange_as_master",
            nbr(LOW, Mode::Native),
            vec![(hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt])],
        ),
        trace(
            "native_two_way_starts_exchange_as_slave",
            nbr(HIGH, Mode::Native),
            vec![(hello(false), Init, vec![]), (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M, vec![]))])],
        ),
        trace("native_master_reaches_full", nbr(LOW, Mode::Native), master_bring_up()),
        trace("native_slave_reaches_full", nbr(HIGH, Mode::Native), slave_bring_up()),
        trace(
            "dbd_in_init_implies_two_way",
            in_state(nbr(HIGH, Mode::Native), Init),
            vec![(
                E::DbdReceived(dbd(700, I | M | MS, vec![])),
                Exchange,
                vec![A::SendDbd(dbd(s, I | M, vec![])), A::SendDbd(dbd(700, 0, vec![]))],
            )],
        ),
        trace(
            "slave_answers_duplicate_with_last_dbd",
            nbr(HIGH, Mode::Native),
            vec![
                (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M, vec![]))]),
                (E::DbdReceived(dbd(500, I | M | MS, vec![])), Exchange, vec![A::SendDbd(dbd(500, 0, vec![]))]),
                (E::DbdReceived(dbd(500, I | M | MS, vec![])), Exchange, vec![A::SendDbd(dbd(500, 0, vec![]))]),
            ],
        ),
        trace(
            "master_sequence_mismatch_restarts",
            nbr(LOW, Mode::Native),
            vec![
                (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
                (E::DbdReceived(dbd(s, 0, vec![])), Exchange, vec![A::SendDbd(dbd(s + 1, MS, vec![])), A::ArmRxmt]),
                (
                    E::DbdReceived(dbd(s + 7, 0, vec![])),
                    ExStart,
                    vec![A::FlushAdjacency, A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt],
                ),
            ],
        ),
        trace(
            "master_resends_initial_dbd",
            nbr(LOW, Mode::Native),
            vec![
                (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
                (E::RxmtTimerExpired, ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
            ],
        ),
        trace(
            "full_dead_tears_down",
            nbr(LOW, Mode::Native),
            [master_bring_up(), vec![(E::Dead, Down, vec![A::FlushAdjacency, A::RegenerateRouterLsa])]].concat(),
        ),
        trace(
            "one_way_hello_drops_to_init",
            nbr(HIGH, Mode::Native),
            [slave_bring_up(), vec![(hello(false), Init, vec![A::FlushAdjacency, A::RegenerateRouterLsa])]].concat(),
        ),
        trace(
            "request_answered_with_update",
            nbr(LOW, Mode::Native),
            [master_bring_up(), vec![(E::LsRequestReceived(vec![key(2)]), Full, vec![A::SendLsUpdate(vec![key(2)])])]]
                .concat(),
        ),
        trace(
            "unacked_update_is_retransmitted",
            {
                let mut n = in_state(nbr(LOW, Mode::Native), Full);
                n.rxmt.insert(key(2), header(2, INITIAL_SEQ));
                n
            },
            vec![
                (E::RxmtTimerExpired, Full, vec![A::SendLsUpdate(vec![key(2)]), A::ArmRxmt]),
                (E::LsAckReceived(vec![header(2, INITIAL_SEQ)]), Full, vec![]),
                (E::RxmtTimerExpired, Full, vec![]),
            ],
        ),
        trace("dead_in_down_is_ignored", nbr(LOW, Mode::Native), vec![(E::Dead, Down, vec![])]),
        trace(
            "hello_in_down_with_me_listed_skips_init",
            nbr(HIGH, Mode::OverQuic),
            vec![(hello(true), TwoWay, vec![A::EstablishQuic])],
        ),
        trace(
            "quic_two_way_asks_for_connection",
            in_state(nbr(LOW, Mode::OverQuic), Init),
            vec![(hello(true), TwoWay, vec![A::EstablishQuic])],
        ),
        trace(
            "quic_established_starts_exchange",
            nbr(LOW, Mode::OverQuic),
            vec![
                (hello(false), Init, vec![]),
                (hello(true), TwoWay, vec![A::EstablishQuic]),
                (hello(true), TwoWay, vec![]),
                (E::QuicEstablished, ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
            ],
        ),
        trace(
            "quic_dbd_before_two_way_is_ignored",
            in_state(nbr(HIGH, Mode::OverQuic), Init),
            vec![(E::DbdReceived(dbd(1, I | M | MS, vec![])), Init, vec![])],
        ),
        trace(
            "quic_failure_retries_after_rxmt",
            nbr(LOW, Mode::OverQuic),
            vec![
                (hello(true), TwoWay, vec![A::EstablishQuic]),
                (E::QuicFailed, Init, vec![A::FlushAdjacency, A::ArmRxmt]),
                (hello(true), Init, vec![]),
                (E::RxmtTimerExpired, TwoWay, vec![A::EstablishQuic]),
                (E::QuicEstablished, ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
            ],
        ),
        trace("quic_retry_exhaustion_goes_down", nbr(LOW, Mode::OverQuic), {
            let mut steps = vec![(hello(true), TwoWay, vec![A::EstablishQuic])];
            for _ in 0..5 {
                steps.push((E::QuicFailed, Init, vec![A::FlushAdjacency, A::ArmRxmt]));
                steps.push((E::RxmtTimerExpired, TwoWay, vec![A::EstablishQuic]));
            }
            steps.push((E::QuicFailed, Down, vec![A::FlushAdjacency]));
            steps.push((hello(true), TwoWay, vec![A::EstablishQuic]));
            steps
        }),
        trace(
            "quic_full_dead_closes_connection",
            in_state(nbr(LOW, Mode::OverQuic), Full),
            vec![(E::Dead, Down, vec![A::FlushAdjacency, A::RegenerateRouterLsa, A::CloseQuic])],
        ),
        trace(
            "quic_full_connection_loss_reverts_to_init",
            in_state(nbr(LOW, Mode::OverQuic), Full),
            vec![(E::QuicFailed, Init, vec![A::FlushAdjacency, A::RegenerateRouterLsa, A::ArmRxmt])],
        ),
        trace(
            "quic_two_way_dead_closes_pending_connection",
            in_state(nbr(HIGH, Mode::OverQuic), TwoWay),
            vec![(E::Dead, Down, vec![A::FlushAdjacency, A::CloseQuic])],
        ),
        trace(
            "delegated_exchange_never_arms_timers",
            delegated(LOW),
            vec![
                (hello(true), TwoWay, vec![A::EstablishQuic]),
                (E::QuicEstablished, ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![]))]),
                (E::RxmtTimerExpired, ExStart, vec![]),
                (E::DbdReceived(dbd(s, 0, vec![])), Exchange, vec![A::SendDbd(dbd(s + 1, MS, vec![]))]),
                (E::DbdReceived(dbd(s + 1, 0, vec![])), Full, vec![A::RegenerateRouterLsa]),
            ],
        ),
        trace(
            "quic_slave_restart_from_full",
            in_state(nbr(HIGH, Mode::OverQuic), Full),
            vec![(
                E::DbdReceived(dbd(900, I | M | MS, vec![])),
                Exchange,
                vec![
                    A::FlushAdjacency,
                    A::RegenerateRouterLsa,
                    A::SendDbd(dbd(s, I | M, vec![])),
                    A::SendDbd(dbd(900, 0, vec![])),
                ],
            )],
        ),
    ];

    // Exchanges that need to fetch or describe database contents.
    let db = one_lsa_db();
    let ours = db.headers(NOW);
    let newer = header(9, INITIAL_SEQ + 1);
    v.push(Trace {
        name: "slave_requests_newer_instance",
        start: nbr(HIGH, Mode::Native),
        lsdb: db.clone(),
        steps: vec![
            (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M, vec![]))]),
            (E::DbdReceived(dbd(500, I | M | MS, vec![])), Exchange, vec![A::SendDbd(dbd(500, 0, ours.clone()))]),
            (
                E::DbdReceived(dbd(501, MS, vec![newer])),
                Loading,
                vec![A::SendDbd(dbd(501, 0, vec![])), A::SendLsRequest(vec![key(9)]), A::ArmRxmt],
            ),
            (E::RxmtTimerExpired, Loading, vec![A::SendLsRequest(vec![key(9)]), A::ArmRxmt]),
            (E::LsUpdateReceived(vec![newer]), Full, vec![A::RegenerateRouterLsa]),
        ],
    });
    v.push(Trace {
        name: "master_pages_its_summary",
        start: {
            let mut c = NbrConfig::new(LOCAL, LOW, Mode::Native);
            c.dbd_page = 1;
            Neighbor::new(c)
        },
        lsdb: {
            let mut db = one_lsa_db();
            let mut second = db.get(&key(9), NOW).expect("fixture");
            second.header.key = key(7);
            db.install(second, SimTime::ZERO);
            db
        },
        steps: {
            let mut db = one_lsa_db();
            let mut second = db.get(&key(9), NOW).expect("fixture");
            second.header.key = key(7);
            db.install(second, SimTime::ZERO);
            let hs = db.headers(NOW);
            vec![
                (hello(true), ExStart, vec![A::SendDbd(dbd(s, I | M | MS, vec![])), A::ArmRxmt]),
                (
                    E::DbdReceived(dbd(s, 0, vec![])),
                    Exchange,
                    vec![A::SendDbd(dbd(s + 1, M | MS, vec![hs[0]])), A::ArmRxmt],
                ),
                (
                    E::DbdReceived(dbd(s + 1, 0, vec![])),
                    Exchange,
                    vec![A::SendDbd(dbd(s + 2, MS, vec![hs[1]])), A::ArmRxmt],
                ),
                (E::DbdReceived(dbd(s + 2, 0, vec![])), Full, vec![A::RegenerateRouterLsa]),
            ]
        },
    });
    v
}

/// Replays `trace`, returning the final neighbor or the first divergence.
pub fn run_trace(trace: &Trace) -> Result<Neighbor, String> {
    let mut n = trace.start.clone();
    for (i, (ev, state, actions)) in trace.steps.iter().enumerate() {
        let (next, got) = neighbor_fsm_step(&n, ev.clone(), &trace.lsdb, NOW);
        if next.state != *state || got != *actions {
            return Err(format!(
                "{}: step {i} ({ev:?}) gave {:?} {got:?}, expected {state:?} {actions:?}",
                trace.name, next.state
            ));
        }
        let quic_ok = next.conn == (next.cfg.mode == Mode::OverQuic && next.state >= TwoWay);
        if !quic_ok {
            return Err(format!("{}: step {i} connection flag {} in {:?}", trace.name, next.conn, next.state));
        }
        n = next;
    }
    Ok(n)
}
