//! Shared value model: messages, signed terms, events, strands, strand
//! spaces, histories and global states.
//!
//! Everything here is an immutable value. Node indices are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

fn check_token(text: &str) -> Result<()> {
    if text.is_empty() || text.chars().any(char::is_whitespace) {
        return Err(Error::InvalidToken(text.to_string()));
    }
    Ok(())
}

macro_rules! token {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(text: &str) -> Result<Self> {
                check_token(text)?;
                Ok(Self(Arc::from(text)))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                Self::new(&text).map_err(serde::de::Error::custom)
            }
        }
    };
}

token!(
    /// An opaque message token. Message structure is not modeled.
    Message
);
token!(
    /// An agent name.
    Agent
);
token!(
    /// A strand identifier, unique within a space.
    StrandId
);

impl From<StrandId> for Agent {
    fn from(id: StrandId) -> Self {
        Agent(id.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// `+u` (send) or `-u` (receive).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedTerm {
    pub sign: Sign,
    pub message: Message,
}

impl SignedTerm {
    pub fn send(message: Message) -> Self {
        Self {
            sign: Sign::Positive,
            message,
        }
    }

    pub fn recv(message: Message) -> Self {
        Self {
            sign: Sign::Negative,
            message,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    /// The event this term stands for: `+u` is `sent(u)`, `-u` is `recv(u)`.
    pub fn to_event(&self) -> Event {
        let kind = match self.sign {
            Sign::Positive => EventKind::Sent,
            Sign::Negative => EventKind::Recv,
        };
        Event {
            kind,
            message: self.message.clone(),
        }
    }
}

impl fmt::Display for SignedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.sign {
            Sign::Positive => '+',
            Sign::Negative => '-',
        };
        write!(f, "{sign}{}", self.message)
    }
}

impl fmt::Debug for SignedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for SignedTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            what: "signed term",
            text: s.to_string(),
        };
        let mut chars = s.chars();
        let sign = match chars.next() {
            Some('+') => Sign::Positive,
            // U+2212 is accepted on input; output always uses '-'.
            Some('-') | Some('\u{2212}') => Sign::Negative,
            _ => return Err(bad()),
        };
        let message = Message::new(chars.as_str()).map_err(|_| bad())?;
        Ok(Self { sign, message })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Sent,
    Recv,
}

/// `sent(u)` or `recv(u)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub message: Message,
}

impl Event {
    pub fn sent(message: Message) -> Self {
        Self {
            kind: EventKind::Sent,
            message,
        }
    }

    pub fn recv(message: Message) -> Self {
        Self {
            kind: EventKind::Recv,
            message,
        }
    }

    pub fn is_sent(&self) -> bool {
        self.kind == EventKind::Sent
    }

    /// Inverse of [`SignedTerm::to_event`].
    pub fn to_term(&self) -> SignedTerm {
        let sign = match self.kind {
            EventKind::Sent => Sign::Positive,
            EventKind::Recv => Sign::Negative,
        };
        SignedTerm {
            sign,
            message: self.message.clone(),
        }
    }
}

impl From<SignedTerm> for Event {
    fn from(t: SignedTerm) -> Self {
        t.to_event()
    }
}

impl From<Event> for SignedTerm {
    fn from(e: Event) -> Self {
        e.to_term()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Sent => "sent",
            EventKind::Recv => "recv",
        };
        write!(f, "{kind} {}", self.message)
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Sent => "sent",
            EventKind::Recv => "recv",
        };
        write!(f, "{kind}({})", self.message)
    }
}

impl FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            what: "event",
            text: s.to_string(),
        };
        let (kind, rest) = s.split_once(' ').ok_or_else(bad)?;
        let kind = match kind {
            "sent" => EventKind::Sent,
            "recv" => EventKind::Recv,
            _ => return Err(bad()),
        };
        let message = Message::new(rest).map_err(|_| bad())?;
        Ok(Self { kind, message })
    }
}

macro_rules! serde_via_display {
    ($name:ident) => {
        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_display!(SignedTerm);
serde_via_display!(Event);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strand {
    pub id: StrandId,
    pub trace: Vec<SignedTerm>,
}

impl Strand {
    pub fn new(id: StrandId, trace: Vec<SignedTerm>) -> Self {
        Self { id, trace }
    }

    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }
}

/// `<s,i>`, with `1 <= i <= |tr(s)|`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub strand: StrandId,
    pub index: usize,
}

impl Node {
    pub fn new(strand: StrandId, index: usize) -> Self {
        Self { strand, index }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.strand, self.index)
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A strand space together with its agents and agent assignment.
///
/// Construction never fails; [`validate_space`] reports every problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrandSpace {
    strands: Vec<Strand>,
    agents: BTreeSet<Agent>,
    assignment: BTreeMap<StrandId, Agent>,
    messages: BTreeSet<Message>,
}

impl StrandSpace {
    /// Builds a space whose agents and messages are exactly those mentioned.
    pub fn new(strands: Vec<Strand>, assignment: BTreeMap<StrandId, Agent>) -> Self {
        let agents = assignment.values().cloned().collect();
        let messages = strands
            .iter()
            .flat_map(|s| s.trace.iter().map(|t| t.message.clone()))
            .collect();
        Self {
            strands,
            agents,
            assignment,
            messages,
        }
    }

    pub fn from_parts(
        strands: Vec<Strand>,
        agents: BTreeSet<Agent>,
        assignment: BTreeMap<StrandId, Agent>,
        messages: BTreeSet<Message>,
    ) -> Self {
        Self {
            strands,
            agents,
            assignment,
            messages,
        }
    }

    /// Each strand is executed by its own agent, named after the strand.
    pub fn identity(strands: Vec<Strand>) -> Self {
        let assignment = strands
            .iter()
            .map(|s| (s.id.clone(), Agent::from(s.id.clone())))
            .collect();
        Self::new(strands, assignment)
    }

    /// Same strands, reassigned so that every strand is its own agent.
    pub fn with_identity_assignment(&self) -> Self {
        let mut out = Self::identity(self.strands.clone());
        out.messages.extend(self.messages.iter().cloned());
        out
    }

    pub fn with_agents(mut self, agents: impl IntoIterator<Item = Agent>) -> Self {
        self.agents.extend(agents);
        self
    }

    pub fn with_messages(mut self, messages: impl IntoIterator<Item = Message>) -> Self {
        self.messages.extend(messages);
        self
    }

    pub fn strands(&self) -> &[Strand] {
        &self.strands
    }

    pub fn strand(&self, id: &StrandId) -> Option<&Strand> {
        self.strands.iter().find(|s| &s.id == id)
    }

    pub fn agents(&self) -> &BTreeSet<Agent> {
        &self.agents
    }

    pub fn assignment(&self) -> &BTreeMap<StrandId, Agent> {
        &self.assignment
    }

    pub fn agent_of(&self, id: &StrandId) -> Option<&Agent> {
        self.assignment.get(id)
    }

    /// Declared message universe.
    pub fn messages(&self) -> &BTreeSet<Message> {
        &self.messages
    }

    /// All nodes `<s,i>`, strand by strand in declaration order.
    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.strands
            .iter()
            .flat_map(|s| (1..=s.len()).map(move |i| Node::new(s.id.clone(), i)))
    }

    pub fn node_count(&self) -> usize {
        self.strands.iter().map(Strand::len).sum()
    }

    pub fn is_identity_assignment(&self) -> bool {
        self.strands.len() == self.agents.len()
            && self.strands.iter().all(|s| {
                self.assignment
                    .get(&s.id)
                    .is_some_and(|a| a.as_str() == s.id.as_str())
            })
    }
}

/// `term(<s,i>)`.
pub fn term_of(space: &StrandSpace, node: &Node) -> Result<SignedTerm> {
    let strand = space
        .strand(&node.strand)
        .ok_or_else(|| Error::UnknownStrand(node.strand.clone()))?;
    if node.index == 0 || node.index > strand.len() {
        return Err(Error::NodeOutOfRange(node.clone()));
    }
    Ok(strand.trace[node.index - 1].clone())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceProblem {
    DuplicateStrand(StrandId),
    EmptyTrace(StrandId),
    UnassignedStrand(StrandId),
    UndeclaredAgent { strand: StrandId, agent: Agent },
    AssignmentForUnknownStrand(StrandId),
    UndeclaredMessage { strand: StrandId, message: Message },
}

impl fmt::Display for SpaceProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateStrand(s) => write!(f, "duplicate strand id {s}"),
            Self::EmptyTrace(s) => write!(f, "empty trace on strand {s}"),
            Self::UnassignedStrand(s) => write!(f, "unassigned strand {s}"),
            Self::UndeclaredAgent { strand, agent } => {
                write!(f, "strand {strand} is assigned to undeclared agent {agent}")
            }
            Self::AssignmentForUnknownStrand(s) => {
                write!(f, "assignment mentions unknown strand {s}")
            }
            Self::UndeclaredMessage { strand, message } => {
                write!(f, "strand {strand} uses undeclared message {message}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpaceReport {
    pub problems: Vec<SpaceProblem>,
}

impl SpaceReport {
    pub fn is_well_formed(&self) -> bool {
        self.problems.is_empty()
    }
}

pub fn validate_space(space: &StrandSpace) -> SpaceReport {
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for strand in &space.strands {
        if !seen.insert(strand.id.clone()) {
            problems.push(SpaceProblem::DuplicateStrand(strand.id.clone()));
        }
        if strand.trace.is_empty() {
            problems.push(SpaceProblem::EmptyTrace(strand.id.clone()));
        }
        match space.assignment.get(&strand.id) {
            None => problems.push(SpaceProblem::UnassignedStrand(strand.id.clone())),
            Some(agent) if !space.agents.contains(agent) => {
                problems.push(SpaceProblem::UndeclaredAgent {
                    strand: strand.id.clone(),
                    agent: agent.clone(),
                })
            }
            Some(_) => {}
        }
        let mut reported = BTreeSet::new();
        for term in &strand.trace {
            if !space.messages.contains(&term.message) && reported.insert(&term.message) {
                problems.push(SpaceProblem::UndeclaredMessage {
                    strand: strand.id.clone(),
                    message: term.message.clone(),
                });
            }
        }
    }
    for id in space.assignment.keys() {
        if !seen.contains(id) {
            problems.push(SpaceProblem::AssignmentForUnknownStrand(id.clone()));
        }
    }
    SpaceReport { problems }
}

/// An agent's local state: the events it has performed, in order.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History(Vec<Event>);

impl History {
    pub fn new(events: Vec<Event>) -> Self {
        Self(events)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn events(&self) -> &[Event] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, event: Event) {
        self.0.push(event);
    }

    pub fn appended(&self, event: Event) -> Self {
        let mut out = self.clone();
        out.push(event);
        out
    }

    pub fn is_prefix_of(&self, other: &History) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Every prefix, from the empty history up to `self` itself.
    pub fn prefixes(&self) -> impl Iterator<Item = History> + '_ {
        (0..=self.0.len()).map(|k| History(self.0[..k].to_vec()))
    }

    /// The events as a sorted multiset.
    pub fn multiset(&self) -> Vec<Event> {
        let mut out = self.0.clone();
        out.sort();
        out
    }
}

impl FromIterator<Event> for History {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e:?}")?;
        }
        f.write_str(">")
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One history per agent.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalState(BTreeMap<Agent, History>);

impl GlobalState {
    pub fn new(locals: BTreeMap<Agent, History>) -> Self {
        Self(locals)
    }

    /// Every agent in the empty history.
    pub fn initial<'a>(agents: impl IntoIterator<Item = &'a Agent>) -> Self {
        Self(agents.into_iter().map(|a| (a.clone(), History::empty())).collect())
    }

    pub fn locals(&self) -> &BTreeMap<Agent, History> {
        &self.0
    }

    pub fn get(&self, agent: &Agent) -> Option<&History> {
        self.0.get(agent)
    }

    pub fn set(&mut self, agent: Agent, history: History) {
        self.0.insert(agent, history);
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.0.keys()
    }
}

impl fmt::Debug for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}
