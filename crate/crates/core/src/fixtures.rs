//! Built-in example models. The JSON files under `fixtures/` are these
//! values serialized.

use std::collections::{BTreeMap, BTreeSet};

use crate::constructions::{extended_space_from_system, ExtendedSpace};
use crate::model::{Agent, Event, History, Message, Strand, StrandId, StrandSpace};
use crate::protocols::{Action, JointProtocol, ProtocolSpec};
use crate::systems::HistorySet;

fn agent(a: &str) -> Agent {
    Agent::new(a).expect("fixture token")
}

fn space(strands: &[(&str, &str, &[&str])]) -> StrandSpace {
    let mut list = Vec::new();
    let mut assignment = BTreeMap::new();
    for &(id, a, trace) in strands {
        let id = StrandId::new(id).expect("fixture token");
        let trace = trace.iter().map(|t| t.parse().expect("fixture term")).collect();
        assignment.insert(id.clone(), agent(a));
        list.push(Strand::new(id, trace));
    }
    StrandSpace::new(list, assignment)
}

fn history(events: &[&str]) -> History {
    events.iter().map(|e| e.parse::<Event>().expect("fixture event")).collect()
}

fn history_set(per_agent: &[(&str, &[&[&str]])]) -> HistorySet {
    let map = per_agent
        .iter()
        .map(|&(a, hs)| (agent(a), hs.iter().map(|h| history(h)).collect::<BTreeSet<_>>()))
        .collect();
    HistorySet::new(map).expect("fixture history set")
}

fn monotone(events: &[&str]) -> ProtocolSpec {
    ProtocolSpec::Monotone(history(events).events().to_vec())
}

fn sends(messages: &[&str]) -> BTreeSet<Action> {
    messages
        .iter()
        .map(|m| Action::Send(Message::new(m).expect("fixture token")))
        .collect()
}

fn joint(per_agent: Vec<(&str, ProtocolSpec)>) -> JointProtocol {
    let map = per_agent.into_iter().map(|(a, p)| (agent(a), p)).collect();
    JointProtocol::new(map, BTreeSet::new()).expect("fixture protocol")
}

pub fn empty_space() -> StrandSpace {
    space(&[])
}

/// One send strand and one receive strand, for different agents.
pub fn ping_space() -> StrandSpace {
    space(&[("send", "a", &["+u"]), ("recv", "b", &["-u"])])
}

/// Agent 2 exchanges u/v with agent 1 and x/y with agent 3; `s_ab` is agent
/// `b`'s strand in its exchange with `a`.
pub fn r1_space() -> StrandSpace {
    space(&[
        ("s12", "2", &["+u", "-v"]),
        ("s21", "1", &["-u", "+v"]),
        ("s32", "2", &["+x", "-y"]),
        ("s23", "3", &["-x", "+y"]),
    ])
}

/// Agent 2 talks to exactly one of agents 1 and 3.
pub fn r1_system() -> HistorySet {
    history_set(&[
        ("1", &[&[], &["recv u"], &["recv u", "sent v"]]),
        (
            "2",
            &[
                &[],
                &["sent u"],
                &["sent x"],
                &["sent u", "recv v"],
                &["sent x", "recv y"],
            ],
        ),
        ("3", &[&[], &["recv x"], &["recv x", "sent y"]]),
    ])
}

pub fn r1_extended_space() -> ExtendedSpace {
    extended_space_from_system(&r1_system()).expect("fixture system")
}

/// Agent 2 chooses between sending u and sending x; the others respond.
pub fn r1_choice_protocol() -> JointProtocol {
    joint(vec![
        ("1", monotone(&["recv u", "sent v"])),
        ("2", ProtocolSpec::table(vec![(History::empty(), sends(&["u", "x"]))])),
        ("3", monotone(&["recv x", "sent y"])),
    ])
}

pub fn nack_space() -> StrandSpace {
    space(&[
        ("s1", "1", &["+u"]),
        ("s2a", "2", &["-u", "+ack"]),
        ("s2b", "2", &["+nack", "-u", "+ack"]),
    ])
}

/// Agent 2 sends nack unless u already arrived, and acks u.
pub fn nack_protocol() -> JointProtocol {
    joint(vec![
        ("1", monotone(&["sent u"])),
        (
            "2",
            ProtocolSpec::table(vec![
                (History::empty(), sends(&["nack"])),
                (history(&["recv u"]), sends(&["ack"])),
                (history(&["sent nack", "recv u"]), sends(&["ack"])),
            ]),
        ),
    ])
}

pub fn nack_system() -> HistorySet {
    history_set(&[
        ("1", &[&[], &["sent u"]]),
        (
            "2",
            &[
                &[],
                &["sent nack"],
                &["recv u"],
                &["sent nack", "recv u"],
                &["recv u", "sent ack"],
                &["sent nack", "recv u", "sent ack"],
            ],
        ),
    ])
}

/// Agent 1 sends u1, waits for u2, sends u3; agent 2 answers u1 with u2.
pub fn u123_protocol() -> JointProtocol {
    joint(vec![
        ("1", monotone(&["sent u1", "recv u2", "sent u3"])),
        ("2", monotone(&["recv u1", "sent u2", "recv u3"])),
    ])
}
