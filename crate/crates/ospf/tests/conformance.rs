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

use std::collections::HashSet;
use std::mem::discriminant;

use roq_ospf::conformance::{neighbor_traces, run_trace};
use roq_ospf::{NbrAction, NbrEvent, NbrState};

#[test]
fn every_trace_conforms() {
    let traces = neighbor_traces();
    assert!(traces.len() >= 20, "{}", traces.len());
    let failures: Vec<String> = traces.iter().filter_map(|t| run_trace(t).err()).collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn traces_cover_states_events_and_actions() {
    let mut states = HashSet::new();
    let mut events = HashSet::new();
    let mut actions = HashSet::new();
    for t in neighbor_traces() {
        for (e, s, a) in &t.steps {
            states.insert(*s);
            events.insert(discriminant(e));
            actions.extend(a.iter().map(discriminant));
        }
    }
    use NbrState::*;
    for s in [Down, Init, TwoWay, ExStart, Exchange, Loading, Full] {
        assert!(states.contains(&s), "{s} never reached");
    }
    let all_events = [
        NbrEvent::HelloReceived { lists_me: true },
        NbrEvent::Dead,
        NbrEvent::QuicEstablished,
        NbrEvent::QuicFailed,
        NbrEvent::DbdReceived(roq_ospf::Dbd { dd_seq: 0, flags: Default::default(), headers: vec![] }),
        NbrEvent::LsRequestReceived(vec![]),
        NbrEvent::LsUpdateReceived(vec![]),
        NbrEvent::LsAckReceived(vec![]),
        NbrEvent::RxmtTimerExpired,
    ];
    for e in &all_events {
        assert!(events.contains(&discriminant(e)), "{e:?} never fed");
    }
    let all_actions = [
        NbrAction::EstablishQuic,
        NbrAction::CloseQuic,
        NbrAction::SendDbd(roq_ospf::Dbd { dd_seq: 0, flags: Default::default(), headers: vec![] }),
        NbrAction::SendLsRequest(vec![]),
        NbrAction::SendLsUpdate(vec![]),
        NbrAction::FlushAdjacency,
        NbrAction::RegenerateRouterLsa,
        NbrAction::ArmRxmt,
    ];
    for a in &all_actions {
        assert!(actions.contains(&discriminant(a)), "{a:?} never emitted");
    }
}
