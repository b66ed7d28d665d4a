//! Dense integer view of a space used by the enumeration engines.
//!
//! Strands are sorted by id, agents and messages by name. An event or signed
//! term is coded as `message * 2 + (receive as u16)`.

use std::collections::BTreeSet;

use crate::bundles::{Bundle, ConflictRelation};
use crate::error::{Error, Result};
use crate::model::{Agent, Event, Message, Node, SignedTerm, StrandId, StrandSpace};

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) fn code(message: u16, recv: bool) -> u16 {
    message * 2 + recv as u16
}

pub(crate) fn is_recv(code: u16) -> bool {
    code & 1 == 1
}

pub(crate) fn message_of(code: u16) -> usize {
    (code >> 1) as usize
}

#[derive(Debug, Clone)]
pub(crate) struct Index {
    pub strands: Vec<StrandId>,
    pub agent_of: Vec<usize>,
    pub agents: Vec<Agent>,
    pub agent_strands: Vec<Vec<usize>>,
    pub messages: Vec<Message>,
    pub traces: Vec<Vec<u16>>,
    pub offset: Vec<usize>,
    pub node_strand: Vec<usize>,
    pub conflicts: Vec<Vec<usize>>,
}

impl Index {
    pub fn new(space: &StrandSpace, conf: Option<&ConflictRelation>) -> Result<Self> {
        let report = crate::model::validate_space(space);
        if let Some(problem) = report.problems.first() {
            return Err(Error::MalformedSpace(problem.to_string()));
        }
        for s in space.strands() {
            if s.len() > u8::MAX as usize {
                return Err(Error::MalformedSpace(format!("strand {} is too long", s.id)));
            }
        }
        let mut order: Vec<&crate::model::Strand> = space.strands().iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));

        let agents: Vec<Agent> = space.agents().iter().cloned().collect();
        let mut messages: BTreeSet<Message> = space.messages().clone();
        for s in &order {
            messages.extend(s.trace.iter().map(|t| t.message.clone()));
        }
        let messages: Vec<Message> = messages.into_iter().collect();
        if messages.len() >= (u16::MAX / 2) as usize {
            return Err(Error::MalformedSpace("too many messages".into()));
        }

        let mut ix = Index {
            strands: Vec::with_capacity(order.len()),
            agent_of: Vec::with_capacity(order.len()),
            agent_strands: vec![Vec::new(); agents.len()],
            agents,
            messages,
            traces: Vec::with_capacity(order.len()),
            offset: Vec::with_capacity(order.len() + 1),
            node_strand: Vec::new(),
            conflicts: vec![Vec::new(); order.len()],
        };
        let mut total = 0;
        for (k, s) in order.iter().enumerate() {
            let agent = &space.assignment()[&s.id];
            let a = ix.agents.binary_search(agent).expect("validated");
            ix.strands.push(s.id.clone());
            ix.agent_of.push(a);
            ix.agent_strands[a].push(k);
            let trace = s.trace.iter().map(|t| ix.term_code(t)).collect();
            ix.traces.push(trace);
            ix.offset.push(total);
            ix.node_strand.extend(std::iter::repeat_n(k, s.len()));
            total += s.len();
        }
        ix.offset.push(total);

        if let Some(conf) = conf {
            for (a, b) in conf.pairs() {
                let i = ix.strand(a)?;
                let j = ix.strand(b)?;
                if ix.agent_of[i] != ix.agent_of[j] {
                    return Err(Error::MalformedSpace(format!(
                        "conflict pair spans agents: {a} and {b}"
                    )));
                }
                ix.conflicts[i].push(j);
                if i != j {
                    ix.conflicts[j].push(i);
                }
            }
        }
        Ok(ix)
    }

    pub fn strand(&self, id: &StrandId) -> Result<usize> {
        self.strands
            .binary_search(id)
            .map_err(|_| Error::UnknownStrand(id.clone()))
    }

    pub fn message(&self, m: &Message) -> Option<u16> {
        self.messages.binary_search(m).ok().map(|i| i as u16)
    }

    pub fn term_code(&self, t: &SignedTerm) -> u16 {
        let m = self.message(&t.message).expect("message indexed");
        code(m, !t.is_positive())
    }

    pub fn event(&self, code: u16) -> Event {
        let m = self.messages[message_of(code)].clone();
        if is_recv(code) {
            Event::recv(m)
        } else {
            Event::sent(m)
        }
    }

    pub fn node_count(&self) -> usize {
        *self.offset.last().unwrap_or(&0)
    }

    pub fn node_code(&self, node: usize) -> u16 {
        let s = self.node_strand[node];
        self.traces[s][node - self.offset[s]]
    }

    pub fn node_id(&self, node: usize) -> Node {
        let s = self.node_strand[node];
        Node::new(self.strands[s].clone(), node - self.offset[s] + 1)
    }

    pub fn node_index(&self, node: &Node) -> Result<usize> {
        let s = self.strand(&node.strand)?;
        if node.index == 0 || node.index > self.traces[s].len() {
            return Err(Error::NodeOutOfRange(node.clone()));
        }
        Ok(self.offset[s] + node.index - 1)
    }
}

/// A bundle in index form: per-strand heights and, per node, the sending node
/// of its incoming edge (`NONE` for sends and absent nodes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct IBundle {
    pub heights: Box<[u8]>,
    pub sender: Box<[u32]>,
}

impl IBundle {
    pub fn empty(ix: &Index) -> Self {
        Self {
            heights: vec![0; ix.strands.len()].into(),
            sender: vec![NONE; ix.node_count()].into(),
        }
    }

    pub fn present(&self, ix: &Index, node: usize) -> bool {
        let s = ix.node_strand[node];
        node - ix.offset[s] < self.heights[s] as usize
    }

    pub fn agent_counts(&self, ix: &Index) -> Vec<usize> {
        let mut out = vec![0; ix.agents.len()];
        for (s, &h) in self.heights.iter().enumerate() {
            out[ix.agent_of[s]] += h as usize;
        }
        out
    }

    pub fn size(&self) -> usize {
        self.heights.iter().map(|&h| h as usize).sum()
    }

    pub fn to_bundle(&self, ix: &Index) -> Bundle {
        let heights = ix
            .strands
            .iter()
            .zip(self.heights.iter())
            .map(|(s, &h)| (s.clone(), h as usize))
            .collect();
        let edges = self
            .sender
            .iter()
            .enumerate()
            .filter(|(_, &from)| from != NONE)
            .map(|(to, &from)| (ix.node_id(from as usize), ix.node_id(to)))
            .collect();
        Bundle::from_parts(heights, edges)
    }

    /// Index form of a public bundle. Shape problems are reported as errors;
    /// axiom violations are left for the validator.
    pub fn from_bundle(ix: &Index, bundle: &Bundle) -> Result<Self> {
        let mut out = Self::empty(ix);
        for (s, &h) in bundle.heights() {
            let k = ix.strand(s)?;
            if h > ix.traces[k].len() {
                return Err(Error::InvalidBundle(format!(
                    "height {h} exceeds the length of strand {s}"
                )));
            }
            out.heights[k] = h as u8;
        }
        for (from, to) in bundle.edges() {
            let f = ix.node_index(from)?;
            let t = ix.node_index(to)?;
            if out.sender[t] != NONE {
                return Err(Error::InvalidBundle(format!("node {to} has two incoming edges")));
            }
            out.sender[t] = f as u32;
        }
        Ok(out)
    }
}
