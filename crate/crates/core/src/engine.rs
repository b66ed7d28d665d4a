//! Interners shared by the run-producing engines.
//!
//! Histories are interned as a trie over event codes, global states as
//! vectors of history ids, and run prefixes as a trie over global states.

use std::collections::HashMap;

use crate::error::Result;
use crate::index::{is_recv, message_of};
use crate::model::{Agent, Event, History, Message};
use crate::runset::{RunSet, RunSetBuilder};

pub(crate) const ROOT: u32 = 0;

#[derive(Debug)]
pub(crate) struct Histories {
    nodes: Vec<(u32, u16)>,
    lens: Vec<u16>,
    map: HashMap<(u32, u16), u32>,
    /// Per history, (sent, received) counts per message.
    counts: Vec<Box<[(u16, u16)]>>,
    messages: usize,
}

impl Histories {
    pub fn new(messages: usize) -> Self {
        Self {
            nodes: vec![(u32::MAX, 0)],
            lens: vec![0],
            map: HashMap::new(),
            counts: vec![vec![(0, 0); messages].into()],
            messages,
        }
    }

    pub fn append(&mut self, h: u32, code: u16) -> u32 {
        if let Some(&id) = self.map.get(&(h, code)) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push((h, code));
        self.lens.push(self.lens[h as usize] + 1);
        let mut counts = self.counts[h as usize].clone();
        let slot = &mut counts[message_of(code)];
        if is_recv(code) {
            slot.1 += 1;
        } else {
            slot.0 += 1;
        }
        self.counts.push(counts);
        self.map.insert((h, code), id);
        id
    }

    pub fn intern(&mut self, codes: &[u16]) -> u32 {
        codes.iter().fold(ROOT, |h, &c| self.append(h, c))
    }

    pub fn codes(&self, mut h: u32) -> Vec<u16> {
        let mut out = Vec::with_capacity(self.lens[h as usize] as usize);
        while h != ROOT {
            let (parent, code) = self.nodes[h as usize];
            out.push(code);
            h = parent;
        }
        out.reverse();
        out
    }

    pub fn counts(&self, h: u32) -> &[(u16, u16)] {
        &self.counts[h as usize]
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn history(&self, h: u32, messages: &[Message]) -> History {
        self.codes(h)
            .into_iter()
            .map(|c| decode(c, messages))
            .collect()
    }
}

pub(crate) fn decode(code: u16, messages: &[Message]) -> Event {
    let m = messages[message_of(code)].clone();
    if is_recv(code) {
        Event::recv(m)
    } else {
        Event::sent(m)
    }
}

pub(crate) fn encode(e: &Event, messages: &[Message]) -> Option<u16> {
    messages
        .binary_search(&e.message)
        .ok()
        .map(|m| crate::index::code(m as u16, !e.is_sent()))
}

/// Whether the combined sends cover the combined receives of one global state.
pub(crate) fn deliverable(
    hist: &Histories,
    state: &[u32],
    delivery: crate::config::Delivery,
) -> bool {
    (0..hist.messages()).all(|m| {
        let (mut sent, mut recv) = (0usize, 0usize);
        for &h in state {
            let (s, r) = hist.counts(h)[m];
            sent += s as usize;
            recv += r as usize;
        }
        match delivery {
            crate::config::Delivery::Consuming => recv <= sent,
            crate::config::Delivery::Broadcast => recv == 0 || sent > 0,
        }
    })
}

#[derive(Debug, Default)]
pub(crate) struct States {
    list: Vec<Box<[u32]>>,
    map: HashMap<Box<[u32]>, u32>,
}

impl States {
    pub fn intern(&mut self, state: &[u32]) -> u32 {
        if let Some(&id) = self.map.get(state) {
            return id;
        }
        let id = self.list.len() as u32;
        let boxed: Box<[u32]> = state.into();
        self.list.push(boxed.clone());
        self.map.insert(boxed, id);
        id
    }

    pub fn get(&self, id: u32) -> &[u32] {
        &self.list[id as usize]
    }
}

/// Run prefixes as paths from the root; node 0 is the initial state.
#[derive(Debug)]
pub(crate) struct Trie {
    nodes: Vec<(u32, u32)>,
    map: HashMap<(u32, u32), u32>,
}

impl Trie {
    pub fn new(initial_state: u32) -> Self {
        Self {
            nodes: vec![(u32::MAX, initial_state)],
            map: HashMap::new(),
        }
    }

    pub fn child(&mut self, parent: u32, state: u32) -> (u32, bool) {
        if let Some(&id) = self.map.get(&(parent, state)) {
            return (id, false);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push((parent, state));
        self.map.insert((parent, state), id);
        (id, true)
    }

    pub fn state(&self, node: u32) -> u32 {
        self.nodes[node as usize].1
    }

    pub fn path(&self, mut node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        loop {
            let (parent, state) = self.nodes[node as usize];
            out.push(state);
            if parent == u32::MAX {
                break;
            }
            node = parent;
        }
        out.reverse();
        out
    }
}

/// Collects the run prefixes ending at `finals` into a canonical run set.
pub(crate) fn collect_runs(
    horizon: usize,
    agents: &[Agent],
    messages: &[Message],
    hist: &Histories,
    states: &States,
    trie: &Trie,
    finals: impl IntoIterator<Item = u32>,
) -> Result<RunSet> {
    let mut builder = RunSetBuilder::new(horizon, agents.to_vec());
    let mut local: HashMap<u32, u32> = HashMap::new();
    let mut row = Vec::with_capacity((horizon + 1) * agents.len());
    for node in finals {
        row.clear();
        for state in trie.path(node) {
            for &h in states.get(state) {
                let id = match local.get(&h) {
                    Some(&id) => id,
                    None => {
                        let id = builder.add_history(hist.history(h, messages));
                        local.insert(h, id);
                        id
                    }
                };
                row.push(id);
            }
        }
        builder.push_row(&row)?;
    }
    Ok(builder.finish())
}
