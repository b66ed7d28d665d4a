//! Run prefixes and canonical sets of them.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Agent, GlobalState, History};

/// Global states `g_0, ..., g_T`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunPrefix {
    pub states: Vec<GlobalState>,
}

impl RunPrefix {
    pub fn new(states: Vec<GlobalState>) -> Self {
        Self { states }
    }

    /// `T`, the index of the last state.
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn local(&self, agent: &Agent, m: usize) -> Option<&History> {
        self.states.get(m).and_then(|g| g.get(agent))
    }

    pub fn last(&self) -> Option<&GlobalState> {
        self.states.last()
    }

    /// Total number of events in the final state.
    pub fn final_events(&self) -> usize {
        self.last()
            .map(|g| g.locals().values().map(History::len).sum())
            .unwrap_or(0)
    }
}

impl fmt::Debug for RunPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (m, g) in self.states.iter().enumerate() {
            if m > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{m}:")?;
            for (a, h) in g.locals() {
                write!(f, " {a}={h:?}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for RunPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A set of run prefixes of one horizon over one agent set.
///
/// Runs are rows of history ids into a sorted table holding exactly the
/// histories in use, so structural equality is set equality.
#[derive(Clone, PartialEq, Eq)]
pub struct RunSet {
    horizon: usize,
    agents: Vec<Agent>,
    table: Vec<History>,
    runs: BTreeSet<Box<[u32]>>,
}

impl RunSet {
    pub fn new(
        horizon: usize,
        agents: impl IntoIterator<Item = Agent>,
        prefixes: impl IntoIterator<Item = RunPrefix>,
    ) -> Result<Self> {
        let agents: BTreeSet<Agent> = agents.into_iter().collect();
        let mut builder = RunSetBuilder::new(horizon, agents.into_iter().collect());
        for run in prefixes {
            builder.push_prefix(&run)?;
        }
        Ok(builder.finish())
    }

    pub fn empty(horizon: usize, agents: impl IntoIterator<Item = Agent>) -> Self {
        let agents: BTreeSet<Agent> = agents.into_iter().collect();
        RunSetBuilder::new(horizon, agents.into_iter().collect()).finish()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Every history occurring anywhere in the set, sorted.
    pub fn histories(&self) -> &[History] {
        &self.table
    }

    pub fn iter(&self) -> impl Iterator<Item = RunPrefix> + '_ {
        self.runs.iter().map(|row| self.expand(row))
    }

    fn expand(&self, row: &[u32]) -> RunPrefix {
        let width = self.agents.len();
        let states = (0..=self.horizon)
            .map(|m| {
                GlobalState::new(
                    self.agents
                        .iter()
                        .enumerate()
                        .map(|(k, a)| (a.clone(), self.table[row[m * width + k] as usize].clone()))
                        .collect(),
                )
            })
            .collect();
        RunPrefix::new(states)
    }

    fn row_of(&self, run: &RunPrefix) -> Option<Box<[u32]>> {
        if run.states.len() != self.horizon + 1 {
            return None;
        }
        let mut row = Vec::with_capacity(run.states.len() * self.agents.len());
        for g in &run.states {
            if g.locals().len() != self.agents.len() {
                return None;
            }
            for a in &self.agents {
                let h = g.get(a)?;
                row.push(self.table.binary_search(h).ok()? as u32);
            }
        }
        Some(row.into())
    }

    pub fn contains(&self, run: &RunPrefix) -> bool {
        self.row_of(run).is_some_and(|row| self.runs.contains(&row))
    }

    /// Histories of `agent` at any time in any run.
    pub fn histories_of(&self, agent: &Agent) -> BTreeSet<History> {
        let Ok(k) = self.agents.binary_search(agent) else {
            return BTreeSet::new();
        };
        let width = self.agents.len();
        let mut ids = BTreeSet::new();
        for row in &self.runs {
            for m in 0..=self.horizon {
                ids.insert(row[m * width + k]);
            }
        }
        ids.into_iter().map(|i| self.table[i as usize].clone()).collect()
    }

    /// Global states occurring at any time in any run.
    pub fn global_states(&self) -> BTreeSet<GlobalState> {
        let width = self.agents.len();
        let mut rows = BTreeSet::new();
        for row in &self.runs {
            for m in 0..=self.horizon {
                rows.insert(&row[m * width..(m + 1) * width]);
            }
        }
        rows.into_iter()
            .map(|ids| {
                GlobalState::new(
                    self.agents
                        .iter()
                        .zip(ids)
                        .map(|(a, &i)| (a.clone(), self.table[i as usize].clone()))
                        .collect(),
                )
            })
            .collect()
    }

    /// Members passing `keep`, as a new canonical set.
    pub fn filter(&self, mut keep: impl FnMut(&RunPrefix) -> bool) -> RunSet {
        let mut builder = RunSetBuilder::new(self.horizon, self.agents.clone());
        for run in self.iter() {
            if keep(&run) {
                builder.push_prefix(&run).expect("same shape");
            }
        }
        builder.finish()
    }

    /// `(self \ other, other \ self)`. Sets must share horizon and agents.
    pub fn differences(&self, other: &RunSet) -> Result<(RunSet, RunSet)> {
        if self.horizon != other.horizon {
            return Err(Error::HorizonMismatch {
                left: self.horizon,
                right: other.horizon,
            });
        }
        if self.agents != other.agents {
            return Err(Error::AgentMismatch);
        }
        // Remap both sides into one table, then compare rows.
        let mut union: Vec<&History> = self.table.iter().chain(other.table.iter()).collect();
        union.sort();
        union.dedup();
        let remap = |table: &[History]| -> Vec<u32> {
            table
                .iter()
                .map(|h| union.binary_search(&h).expect("in union") as u32)
                .collect()
        };
        let (left_map, right_map) = (remap(&self.table), remap(&other.table));
        let convert = |rows: &BTreeSet<Box<[u32]>>, map: &[u32]| -> BTreeSet<Box<[u32]>> {
            rows.iter()
                .map(|r| r.iter().map(|&i| map[i as usize]).collect())
                .collect()
        };
        let left = convert(&self.runs, &left_map);
        let right = convert(&other.runs, &right_map);
        let build = |rows: Vec<&Box<[u32]>>| {
            let mut builder = RunSetBuilder::new(self.horizon, self.agents.clone());
            let mut local = HashMap::new();
            for row in rows {
                let ids: Vec<u32> = row
                    .iter()
                    .map(|&u| {
                        *local
                            .entry(u)
                            .or_insert_with(|| builder.add_history(union[u as usize].clone()))
                    })
                    .collect();
                builder.push_row(&ids).expect("same shape");
            }
            builder.finish()
        };
        Ok((
            build(left.difference(&right).collect()),
            build(right.difference(&left).collect()),
        ))
    }
}

impl fmt::Debug for RunSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RunSet(horizon {}, {} agents, {} runs)",
            self.horizon,
            self.agents.len(),
            self.runs.len()
        )
    }
}

/// Accumulates rows over a provisional history table, sorted on `finish`.
#[derive(Debug)]
pub(crate) struct RunSetBuilder {
    horizon: usize,
    agents: Vec<Agent>,
    ids: HashMap<History, u32>,
    table: Vec<History>,
    rows: Vec<Box<[u32]>>,
}

impl RunSetBuilder {
    pub fn new(horizon: usize, agents: Vec<Agent>) -> Self {
        Self {
            horizon,
            agents,
            ids: HashMap::new(),
            table: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_history(&mut self, h: History) -> u32 {
        if let Some(&id) = self.ids.get(&h) {
            return id;
        }
        let id = self.table.len() as u32;
        self.table.push(h.clone());
        self.ids.insert(h, id);
        id
    }

    pub fn push_row(&mut self, row: &[u32]) -> Result<()> {
        if row.len() != (self.horizon + 1) * self.agents.len() {
            return Err(Error::RunShape(format!(
                "expected {} states over {} agents",
                self.horizon + 1,
                self.agents.len()
            )));
        }
        self.rows.push(row.into());
        Ok(())
    }

    pub fn push_prefix(&mut self, run: &RunPrefix) -> Result<()> {
        if run.states.len() != self.horizon + 1 {
            return Err(Error::RunShape(format!(
                "run has {} states, expected {}",
                run.states.len(),
                self.horizon + 1
            )));
        }
        let mut row = Vec::with_capacity(run.states.len() * self.agents.len());
        for (m, g) in run.states.iter().enumerate() {
            let extra = g.agents().find(|a| self.agents.binary_search(a).is_err());
            if let Some(a) = extra {
                return Err(Error::RunShape(format!("state {m} mentions unknown agent {a}")));
            }
            for a in self.agents.clone() {
                let h = g
                    .get(&a)
                    .ok_or_else(|| Error::RunShape(format!("state {m} has no history for {a}")))?;
                row.push(self.add_history(h.clone()));
            }
        }
        self.rows.push(row.into());
        Ok(())
    }

    pub fn finish(self) -> RunSet {
        let mut order: Vec<u32> = (0..self.table.len() as u32).collect();
        order.sort_by(|&a, &b| self.table[a as usize].cmp(&self.table[b as usize]));
        let mut remap = vec![0u32; self.table.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut used = vec![false; self.table.len()];
        let runs: BTreeSet<Box<[u32]>> = self
            .rows
            .into_iter()
            .map(|row| {
                row.iter()
                    .map(|&i| {
                        used[i as usize] = true;
                        remap[i as usize]
                    })
                    .collect()
            })
            .collect();
        // Drop unused histories and compact the ids.
        let mut table = Vec::new();
        let mut compact = vec![u32::MAX; order.len()];
        let mut slots: Vec<Option<History>> = self.table.into_iter().map(Some).collect();
        for &old in &order {
            if used[old as usize] {
                compact[remap[old as usize] as usize] = table.len() as u32;
                table.push(slots[old as usize].take().expect("each slot once"));
            }
        }
        let runs = runs
            .into_iter()
            .map(|row| row.iter().map(|&i| compact[i as usize]).collect())
            .collect();
        RunSet {
            horizon: self.horizon,
            agents: self.agents,
            table,
            runs,
        }
    }
}
