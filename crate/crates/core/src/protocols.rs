//! Protocols: maps from local histories to nonempty sets of actions, and
//! the round semantics generating runs from a joint protocol.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Config;
use crate::engine::{deliverable, encode, Histories};
use crate::error::{Error, Result};
use crate::index::code;
use crate::model::{Agent, Event, GlobalState, History, Message};
use crate::runset::RunSet;
use crate::systems::explore;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Send(Message),
    NoOp,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Send(u) => write!(f, "send {u}"),
            Action::NoOp => f.write_str("no-op"),
        }
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "no-op" {
            return Ok(Action::NoOp);
        }
        match s.split_once(' ') {
            Some(("send", u)) => Ok(Action::Send(Message::new(u)?)),
            _ => Err(Error::Parse {
                what: "action",
                text: s.to_string(),
            }),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub type ActionSet = BTreeSet<Action>;

pub fn no_op() -> ActionSet {
    BTreeSet::from([Action::NoOp])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolSpec {
    /// Send the next listed message once all earlier listed events occurred.
    Monotone(Vec<Event>),
    /// Set union of the members' action sets.
    Union(Vec<ProtocolSpec>),
    /// Exact-history lookup with a fallback set.
    Table {
        entries: Vec<(History, ActionSet)>,
        default: ActionSet,
    },
}

impl ProtocolSpec {
    pub fn table(entries: Vec<(History, ActionSet)>) -> Self {
        ProtocolSpec::Table {
            entries,
            default: no_op(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProtocolSpec::Monotone(_) => Ok(()),
            ProtocolSpec::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::Protocol("empty union".into()));
                }
                parts.iter().try_for_each(ProtocolSpec::validate)
            }
            ProtocolSpec::Table { entries, default } => {
                if default.is_empty() {
                    return Err(Error::Protocol("empty default action set".into()));
                }
                let mut seen = BTreeSet::new();
                for (h, actions) in entries {
                    if actions.is_empty() {
                        return Err(Error::Protocol(format!("empty action set at {h}")));
                    }
                    if !seen.insert(h) {
                        return Err(Error::Protocol(format!("history {h} listed twice")));
                    }
                }
                Ok(())
            }
        }
    }

    /// The monotone sequences of a monotone spec or of a union of them.
    pub fn monotone_components(&self) -> Option<Vec<&[Event]>> {
        match self {
            ProtocolSpec::Monotone(seq) => Some(vec![seq.as_slice()]),
            ProtocolSpec::Union(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.monotone_components()?);
                }
                Some(out)
            }
            ProtocolSpec::Table { .. } => None,
        }
    }

    /// Messages mentioned anywhere in the spec.
    pub fn messages(&self) -> BTreeSet<Message> {
        let mut out = BTreeSet::new();
        self.collect_messages(&mut out);
        out
    }

    fn collect_messages(&self, out: &mut BTreeSet<Message>) {
        let add_actions = |out: &mut BTreeSet<Message>, set: &ActionSet| {
            for a in set {
                if let Action::Send(u) = a {
                    out.insert(u.clone());
                }
            }
        };
        match self {
            ProtocolSpec::Monotone(seq) => out.extend(seq.iter().map(|e| e.message.clone())),
            ProtocolSpec::Union(parts) => parts.iter().for_each(|p| p.collect_messages(out)),
            ProtocolSpec::Table { entries, default } => {
                for (h, set) in entries {
                    out.extend(h.events().iter().map(|e| e.message.clone()));
                    add_actions(out, set);
                }
                add_actions(out, default);
            }
        }
    }

    /// Table agreeing with the monotone rule for `seq` on every history over
    /// `alphabet` of length at most `bound`; only non-default rows are kept.
    pub fn compile_monotone(seq: &[Event], alphabet: &[Event], bound: usize) -> Self {
        let rule = ProtocolSpec::Monotone(seq.to_vec());
        let mut entries = Vec::new();
        for h in histories_upto(alphabet, bound) {
            let actions = eval_protocol(&rule, &h);
            if actions != no_op() {
                entries.push((h, actions));
            }
        }
        ProtocolSpec::table(entries)
    }
}

/// Length of the longest prefix of `seq` whose events all occur in `h`,
/// counting repeated events with multiplicity.
fn satisfied_prefix(seq: &[Event], h: &History) -> usize {
    let mut available: HashMap<&Event, usize> = HashMap::new();
    for e in h.events() {
        *available.entry(e).or_default() += 1;
    }
    let mut i = 0;
    for e in seq {
        match available.get_mut(e) {
            Some(n) if *n > 0 => {
                *n -= 1;
                i += 1;
            }
            _ => break,
        }
    }
    i
}

pub fn eval_protocol(p: &ProtocolSpec, h: &History) -> ActionSet {
    match p {
        ProtocolSpec::Monotone(seq) => {
            let i = satisfied_prefix(seq, h);
            match seq.get(i) {
                Some(e) if e.is_sent() => BTreeSet::from([Action::Send(e.message.clone())]),
                _ => no_op(),
            }
        }
        ProtocolSpec::Union(parts) => parts.iter().flat_map(|q| eval_protocol(q, h)).collect(),
        ProtocolSpec::Table { entries, default } => entries
            .iter()
            .find(|(k, _)| k == h)
            .map(|(_, set)| set.clone())
            .unwrap_or_else(|| default.clone()),
    }
}

/// One protocol per agent over a declared message universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointProtocol {
    pub per_agent: BTreeMap<Agent, ProtocolSpec>,
    pub messages: BTreeSet<Message>,
}

impl JointProtocol {
    /// The universe is the declared messages plus every message mentioned.
    pub fn new(per_agent: BTreeMap<Agent, ProtocolSpec>, messages: BTreeSet<Message>) -> Result<Self> {
        for p in per_agent.values() {
            p.validate()?;
        }
        let mut messages = messages;
        for p in per_agent.values() {
            messages.extend(p.messages());
        }
        Ok(Self { per_agent, messages })
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.per_agent.keys()
    }
}

/// The possible next global states under the round semantics: each agent
/// stays, records a send its protocol allows, or records a receive that the
/// sends in the new state cover.
pub fn tau_step(jp: &JointProtocol, g: &GlobalState, cfg: &Config) -> Result<BTreeSet<GlobalState>> {
    let agents: Vec<Agent> = jp.agents().cloned().collect();
    let messages: Vec<Message> = jp.messages.iter().cloned().collect();
    let mut hist = Histories::new(messages.len());
    let mut current = Vec::with_capacity(agents.len());
    for a in &agents {
        let h = g.get(a).ok_or_else(|| Error::UnknownAgent(a.clone()))?;
        let codes: Option<Vec<u16>> = h.events().iter().map(|e| encode(e, &messages)).collect();
        let codes = codes.ok_or_else(|| Error::Protocol(format!("history {h} leaves the message universe")))?;
        current.push(hist.intern(&codes));
    }
    let choices: Vec<Vec<u32>> = agents
        .iter()
        .zip(&current)
        .map(|(a, &h)| {
            let mut out = vec![h];
            for c in option_codes(&jp.per_agent[a], &hist.history(h, &messages), &messages) {
                out.push(hist.append(h, c));
            }
            out
        })
        .collect();
    let mut out = BTreeSet::new();
    let mut pick = vec![0usize; agents.len()];
    loop {
        let state: Vec<u32> = pick.iter().enumerate().map(|(k, &p)| choices[k][p]).collect();
        if deliverable(&hist, &state, cfg.delivery) {
            out.insert(GlobalState::new(
                agents
                    .iter()
                    .zip(&state)
                    .map(|(a, &h)| (a.clone(), hist.history(h, &messages)))
                    .collect(),
            ));
        }
        let mut k = 0;
        while k < pick.len() {
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == pick.len() {
            break;
        }
    }
    Ok(out)
}

/// Event codes an agent may append: the sends its protocol allows, then a
/// receive of every universe message.
fn option_codes(p: &ProtocolSpec, h: &History, messages: &[Message]) -> Vec<u16> {
    let mut out = Vec::new();
    for action in eval_protocol(p, h) {
        if let Action::Send(u) = action {
            if let Ok(m) = messages.binary_search(&u) {
                out.push(code(m as u16, false));
            }
        }
    }
    out.extend((0..messages.len()).map(|m| code(m as u16, true)));
    out
}

/// All run prefixes of length `horizon` from the empty state.
pub fn generate_runs(jp: &JointProtocol, horizon: usize, cfg: &Config) -> Result<RunSet> {
    let agents: Vec<Agent> = jp.agents().cloned().collect();
    let messages: Vec<Message> = jp.messages.iter().cloned().collect();
    let specs: Vec<&ProtocolSpec> = agents.iter().map(|a| &jp.per_agent[a]).collect();
    let mut hist = Histories::new(messages.len());
    let mut memo: HashMap<(usize, u32), Vec<u16>> = HashMap::new();
    explore(
        &agents,
        &messages,
        horizon,
        cfg,
        &mut hist,
        &mut |k, h, hist| {
            memo.entry((k, h))
                .or_insert_with(|| option_codes(specs[k], &hist.history(h, &messages), &messages))
                .clone()
        },
    )
}

/// Every history over `alphabet` with at most `bound` events, shortest first.
pub fn histories_upto(alphabet: &[Event], bound: usize) -> Vec<History> {
    let mut out = vec![History::empty()];
    let mut layer = vec![History::empty()];
    for _ in 0..bound {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for h in &layer {
            for e in alphabet {
                next.push(h.appended(e.clone()));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// The sent and received events over the given messages.
pub fn event_alphabet(messages: &BTreeSet<Message>) -> Vec<Event> {
    messages
        .iter()
        .flat_map(|m| [Event::sent(m.clone()), Event::recv(m.clone())])
        .collect()
}

/// Whether `table` agrees with the monotone rule for `candidate` on every
/// history of length at most `bound` over the events of both.
pub fn is_monotone_realization(candidate: &[Event], table: &ProtocolSpec, bound: usize) -> bool {
    let mut messages = table.messages();
    messages.extend(candidate.iter().map(|e| e.message.clone()));
    let rule = ProtocolSpec::Monotone(candidate.to_vec());
    histories_upto(&event_alphabet(&messages), bound)
        .iter()
        .all(|h| eval_protocol(table, h) == eval_protocol(&rule, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn e(s: &str) -> Event {
        s.parse().unwrap()
    }

    fn h(evs: &[&str]) -> History {
        History::new(evs.iter().map(|x| e(x)).collect())
    }

    fn send(u: &str) -> ActionSet {
        BTreeSet::from([Action::Send(Message::new(u).unwrap())])
    }

    fn u123() -> ProtocolSpec {
        ProtocolSpec::Monotone(vec![e("sent u1"), e("recv u2"), e("sent u3")])
    }

    #[test]
    fn monotone_narration() {
        let p = u123();
        assert_eq!(eval_protocol(&p, &h(&[])), send("u1"));
        assert_eq!(eval_protocol(&p, &h(&["sent u1"])), no_op());
        assert_eq!(eval_protocol(&p, &h(&["sent u1", "recv u2"])), send("u3"));
        assert_eq!(eval_protocol(&p, &h(&["sent u1", "recv u2", "sent u3"])), no_op());
    }

    #[test]
    fn repeated_events_count_with_multiplicity() {
        let p = ProtocolSpec::Monotone(vec![e("recv a"), e("recv a"), e("sent b")]);
        assert_eq!(eval_protocol(&p, &h(&["recv a"])), no_op());
        assert_eq!(eval_protocol(&p, &h(&["recv a", "recv a"])), send("b"));
    }

    #[test]
    fn table_and_union() {
        let t = ProtocolSpec::table(vec![(h(&[]), send("u"))]);
        assert_eq!(eval_protocol(&t, &h(&[])), send("u"));
        assert_eq!(eval_protocol(&t, &h(&["recv u"])), no_op());
        let both = ProtocolSpec::Union(vec![
            ProtocolSpec::Monotone(vec![e("sent u")]),
            ProtocolSpec::Monotone(vec![e("sent x")]),
        ]);
        let mut expect = send("u");
        expect.extend(send("x"));
        assert_eq!(eval_protocol(&both, &h(&[])), expect);
        assert!(ProtocolSpec::Union(vec![]).validate().is_err());
    }

    #[test]
    fn no_op_protocol_stutters() {
        let mut per_agent = BTreeMap::new();
        per_agent.insert(Agent::new("a").unwrap(), ProtocolSpec::table(vec![]));
        let jp = JointProtocol::new(per_agent, BTreeSet::new()).unwrap();
        let g = GlobalState::initial(jp.agents());
        assert_eq!(tau_step(&jp, &g, &Config::default()).unwrap(), BTreeSet::from([g.clone()]));
        let runs = generate_runs(&jp, 5, &Config::default()).unwrap();
        assert_eq!(runs.len(), 1);
    }

    #[test]
    fn same_round_delivery() {
        let jp = fixtures::u123_protocol();
        let g = GlobalState::initial(jp.agents());
        let next = tau_step(&jp, &g, &Config::default()).unwrap();
        let mut both = g.clone();
        both.set(Agent::new("1").unwrap(), h(&["sent u1"]));
        both.set(Agent::new("2").unwrap(), h(&["recv u1"]));
        assert!(next.contains(&both));
    }

    #[test]
    fn nack_protocol_first_round() {
        let jp = fixtures::nack_protocol();
        let g = GlobalState::initial(jp.agents());
        let next = tau_step(&jp, &g, &Config::default()).unwrap();
        let mut sends_u = g.clone();
        sends_u.set(Agent::new("1").unwrap(), h(&["sent u"]));
        let mut sends_nack = g.clone();
        sends_nack.set(Agent::new("2").unwrap(), h(&["sent nack"]));
        assert!(next.contains(&sends_u));
        assert!(next.contains(&sends_nack));
    }

    #[test]
    fn nack_runs() {
        let runs = generate_runs(&fixtures::nack_protocol(), 6, &Config::default()).unwrap();
        let two = runs.histories_of(&Agent::new("2").unwrap());
        assert!(two.contains(&h(&["sent nack", "recv u", "sent ack"])));
        assert!(two.contains(&h(&["recv u", "sent ack"])));
        assert!(!two.contains(&h(&["recv u", "sent ack", "sent nack"])));
    }

    #[test]
    fn choice_protocol_never_gives_agent_two_four_events() {
        let runs = generate_runs(&fixtures::r1_choice_protocol(), 6, &Config::default()).unwrap();
        let two = runs.histories_of(&Agent::new("2").unwrap());
        assert!(two.iter().all(|x| x.len() < 4));
    }

    #[test]
    fn monotone_realization() {
        let seq = vec![e("sent u1"), e("recv u2"), e("sent u3")];
        let messages: BTreeSet<Message> = seq.iter().map(|x| x.message.clone()).collect();
        let compiled = ProtocolSpec::compile_monotone(&seq, &event_alphabet(&messages), 4);
        assert!(is_monotone_realization(&seq, &compiled, 4));

        let nack_table = &fixtures::nack_protocol().per_agent[&Agent::new("2").unwrap()];
        let cand = vec![e("sent nack"), e("recv u"), e("sent ack")];
        assert!(!is_monotone_realization(&cand, nack_table, 3));
    }

    #[test]
    fn choice_table_has_no_monotone_realization() {
        let jp = fixtures::r1_choice_protocol();
        let table = &jp.per_agent[&Agent::new("2").unwrap()];
        let alphabet = event_alphabet(&jp.messages);
        for candidate in histories_upto(&alphabet, 3) {
            assert!(!is_monotone_realization(candidate.events(), table, 2));
        }
    }

    fn arb_union() -> impl Strategy<Value = (Vec<Vec<Event>>, Vec<Event>)> {
        let alphabet = event_alphabet(&["a", "b", "c"].iter().map(|m| Message::new(m).unwrap()).collect());
        let ev = proptest::sample::select(alphabet);
        (
            prop::collection::vec(prop::collection::vec(ev.clone(), 0..4), 1..4),
            prop::collection::vec(ev, 0..6),
        )
    }

    proptest! {
        #[test]
        fn union_is_pointwise((parts, hist) in arb_union()) {
            let h = History::new(hist);
            let union = ProtocolSpec::Union(parts.iter().cloned().map(ProtocolSpec::Monotone).collect());
            let expect: ActionSet = parts
                .iter()
                .flat_map(|p| eval_protocol(&ProtocolSpec::Monotone(p.clone()), &h))
                .collect();
            prop_assert_eq!(eval_protocol(&union, &h), expect);
        }
    }
}
