//! Run-based strand systems: message-passing conditions, generation from
//! per-agent history sets, extraction, comparison, and the check that a
//! space's bundles and a system's runs realize the same per-agent events.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::bundles::{enumerate_indexed, Bundle, ConflictRelation};
use crate::config::{Config, Delivery};
use crate::engine::{collect_runs, deliverable, encode, Histories, States, Trie, ROOT};
use crate::error::{Error, Result};
use crate::index::Index;
use crate::model::{Agent, Event, EventKind, History, Message, StrandSpace};

pub use crate::runset::{RunPrefix, RunSet};

/// Per-agent history sets, each containing the empty history and closed
/// under prefixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistorySet {
    per_agent: BTreeMap<Agent, BTreeSet<History>>,
}

impl HistorySet {
    pub fn new(per_agent: BTreeMap<Agent, BTreeSet<History>>) -> Result<Self> {
        for (a, set) in &per_agent {
            if !set.contains(&History::empty()) {
                return Err(Error::HistorySet(format!("V_{a} lacks the empty history")));
            }
            for h in set {
                if let Some(p) = h.prefixes().find(|p| !set.contains(p)) {
                    return Err(Error::HistorySet(format!(
                        "V_{a} contains {h} but not its prefix {p}"
                    )));
                }
            }
        }
        Ok(Self { per_agent })
    }

    pub fn per_agent(&self) -> &BTreeMap<Agent, BTreeSet<History>> {
        &self.per_agent
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.per_agent.keys()
    }

    pub fn get(&self, a: &Agent) -> Option<&BTreeSet<History>> {
        self.per_agent.get(a)
    }

    /// Messages mentioned in any history.
    pub fn messages(&self) -> BTreeSet<Message> {
        self.per_agent
            .values()
            .flatten()
            .flat_map(|h| h.events().iter().map(|e| e.message.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpViolation {
    pub agent: Option<Agent>,
    pub time: usize,
    pub detail: String,
    /// For an unmatched receive, the event itself.
    pub event: Option<Event>,
}

impl fmt::Display for MpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.agent {
            Some(a) => write!(f, "agent {a} at time {}: {}", self.time, self.detail),
            None => write!(f, "time {}: {}", self.time, self.detail),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MpReport {
    /// Local states are histories over the universe, for exactly the agents.
    pub histories: Option<MpViolation>,
    /// Every receive is matched by a send.
    pub delivery: Option<MpViolation>,
    /// Starts empty and grows by at most one event per agent per step.
    pub growth: Option<MpViolation>,
}

impl MpReport {
    pub fn passes(&self) -> bool {
        self.histories.is_none() && self.delivery.is_none() && self.growth.is_none()
    }
}

impl fmt::Display for MpReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in [
            ("histories over the universe", &self.histories),
            ("receives matched by sends", &self.delivery),
            ("one event per step", &self.growth),
        ] {
            match v {
                None => writeln!(f, "{name}: pass")?,
                Some(v) => writeln!(f, "{name}: FAIL ({v})")?,
            }
        }
        Ok(())
    }
}

pub fn check_mp(
    universe: &BTreeSet<Message>,
    agents: &BTreeSet<Agent>,
    run: &RunPrefix,
    cfg: &Config,
) -> MpReport {
    let mut report = MpReport::default();

    'outer: for (m, g) in run.states.iter().enumerate() {
        let domain: BTreeSet<&Agent> = g.agents().collect();
        if domain != agents.iter().collect() {
            report.histories = Some(MpViolation {
                agent: None,
                time: m,
                detail: "state does not cover exactly the agent set".into(),
                event: None,
            });
            break;
        }
        for (a, h) in g.locals() {
            if let Some(e) = h.events().iter().find(|e| !universe.contains(&e.message)) {
                report.histories = Some(MpViolation {
                    agent: Some(a.clone()),
                    time: m,
                    detail: format!("event {e} is outside the message universe"),
                    event: Some(e.clone()),
                });
                break 'outer;
            }
        }
    }

    'growth: for (m, g) in run.states.iter().enumerate() {
        for (a, h) in g.locals() {
            let ok = if m == 0 {
                h.is_empty()
            } else {
                match run.states[m - 1].get(a) {
                    Some(prev) => {
                        prev.is_prefix_of(h) && h.len() <= prev.len() + 1
                    }
                    None => true,
                }
            };
            if !ok {
                let detail = if m == 0 {
                    "initial history is not empty"
                } else {
                    "history neither stays nor appends one event"
                };
                report.growth = Some(MpViolation {
                    agent: Some(a.clone()),
                    time: m,
                    detail: detail.into(),
                    event: None,
                });
                break 'growth;
            }
        }
    }

    for (m, g) in run.states.iter().enumerate() {
        let mut sent: BTreeMap<&Message, usize> = BTreeMap::new();
        let mut recv: BTreeMap<&Message, usize> = BTreeMap::new();
        for h in g.locals().values() {
            for e in h.events() {
                let slot = match e.kind {
                    EventKind::Sent => &mut sent,
                    EventKind::Recv => &mut recv,
                };
                *slot.entry(&e.message).or_default() += 1;
            }
        }
        let unmatched = recv.iter().find(|(u, &r)| {
            let s = sent.get(*u).copied().unwrap_or(0);
            match cfg.delivery {
                Delivery::Consuming => r > s,
                Delivery::Broadcast => s == 0,
            }
        });
        if let Some((u, _)) = unmatched {
            let event = Event::recv((*u).clone());
            let agent = g
                .locals()
                .iter()
                .find(|(_, h)| h.events().contains(&event))
                .map(|(a, _)| a.clone());
            report.delivery = Some(MpViolation {
                agent,
                time: m,
                detail: format!("recv {u} has no matching send"),
                event: Some(event),
            });
            break;
        }
    }
    report
}

/// All run prefixes of length `horizon` that satisfy the message-passing
/// conditions and keep every agent inside its history set.
pub fn generate_system(hs: &HistorySet, horizon: usize, cfg: &Config) -> Result<RunSet> {
    let agents: Vec<Agent> = hs.agents().cloned().collect();
    let messages: Vec<Message> = hs.messages().into_iter().collect();
    let mut hist = Histories::new(messages.len());
    // allowed[a][h] lists the events agent a may append to history h.
    let mut allowed: Vec<HashMap<u32, Vec<u16>>> = vec![HashMap::new(); agents.len()];
    for (k, a) in agents.iter().enumerate() {
        for h in &hs.per_agent[a] {
            let codes: Vec<u16> = h
                .events()
                .iter()
                .map(|e| encode(e, &messages).expect("message collected"))
                .collect();
            if let Some((&last, init)) = codes.split_last() {
                let parent = hist.intern(init);
                let list = allowed[k].entry(parent).or_default();
                if !list.contains(&last) {
                    list.push(last);
                }
            }
        }
        for list in allowed[k].values_mut() {
            list.sort_unstable();
        }
    }
    let none = Vec::new();
    explore(
        &agents,
        &messages,
        horizon,
        cfg,
        &mut hist,
        &mut |k, h, _| allowed[k].get(&h).unwrap_or(&none).clone(),
    )
}

/// Layered exploration where each agent either stutters or appends one of
/// the events offered by `options`, subject to the delivery ledger.
pub(crate) fn explore(
    agents: &[Agent],
    messages: &[Message],
    horizon: usize,
    cfg: &Config,
    hist: &mut Histories,
    options: &mut dyn FnMut(usize, u32, &Histories) -> Vec<u16>,
) -> Result<RunSet> {
    let mut budget = cfg.budget();
    let mut states = States::default();
    let initial = states.intern(&vec![ROOT; agents.len()]);
    let mut trie = Trie::new(initial);
    let mut succ: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut frontier = vec![0u32];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for &node in &frontier {
            let state = trie.state(node);
            if let std::collections::hash_map::Entry::Vacant(slot) = succ.entry(state) {
                slot.insert(successors(agents.len(), states.get(state).to_vec(), cfg.delivery, hist, &mut states, options));
            }
            for &s in &succ[&state] {
                let (child, _) = trie.child(node, s);
                budget.charge(1)?;
                next.push(child);
            }
        }
        frontier = next;
    }
    collect_runs(horizon, agents, messages, hist, &states, &trie, frontier)
}

fn successors(
    n: usize,
    current: Vec<u32>,
    delivery: Delivery,
    hist: &mut Histories,
    states: &mut States,
    options: &mut dyn FnMut(usize, u32, &Histories) -> Vec<u16>,
) -> Vec<u32> {
    let choices: Vec<Vec<u32>> = (0..n)
        .map(|k| {
            let h = current[k];
            let mut out = vec![h];
            for code in options(k, h, hist) {
                out.push(hist.append(h, code));
            }
            out
        })
        .collect();
    let mut out = Vec::new();
    let mut pick = vec![0usize; n];
    let mut state = current.clone();
    loop {
        for k in 0..n {
            state[k] = choices[k][pick[k]];
        }
        if deliverable(hist, &state, delivery) {
            out.push(states.intern(&state));
        }
        // Odometer over the per-agent choice lists.
        let mut k = 0;
        while k < n {
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// `V_a`: every history agent `a` has at any time of any run.
pub fn extract_histories(runs: &RunSet) -> Result<HistorySet> {
    let per_agent = runs
        .agents()
        .iter()
        .map(|a| {
            let mut set = runs.histories_of(a);
            set.insert(History::empty());
            (a.clone(), set)
        })
        .collect();
    HistorySet::new(per_agent)
}

#[derive(Clone, Debug)]
pub struct EqualityReport {
    pub only_left: RunSet,
    pub only_right: RunSet,
}

impl EqualityReport {
    pub fn equal(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty()
    }

    /// A member of the symmetric difference with the most events at the
    /// horizon, together with the side it comes from.
    pub fn witness(&self) -> Option<(Side, RunPrefix)> {
        let pick = |set: &RunSet| {
            set.iter()
                .fold(None::<RunPrefix>, |best, r| match best {
                    Some(b) if b.final_events() >= r.final_events() => Some(b),
                    _ => Some(r),
                })
        };
        pick(&self.only_left)
            .map(|r| (Side::Left, r))
            .or_else(|| pick(&self.only_right).map(|r| (Side::Right, r)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for EqualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.equal() {
            return writeln!(f, "equal");
        }
        writeln!(
            f,
            "unequal: {} only on the left, {} only on the right",
            self.only_left.len(),
            self.only_right.len()
        )?;
        if let Some((side, run)) = self.witness() {
            let side = match side {
                Side::Left => "left",
                Side::Right => "right",
            };
            writeln!(f, "witness ({side} only): {run}")?;
        }
        Ok(())
    }
}

pub fn systems_equal(left: &RunSet, right: &RunSet) -> Result<EqualityReport> {
    let (only_left, only_right) = left.differences(right)?;
    Ok(EqualityReport {
        only_left,
        only_right,
    })
}

/// An agent's events in a history or a bundle, as a sorted multiset.
pub type EventBag = Vec<Event>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunClauseViolation {
    pub agent: Agent,
    pub history: History,
    pub run: RunPrefix,
    pub time: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleClauseViolation {
    pub agent: Agent,
    pub events: EventBag,
    pub bundle: Bundle,
}

#[derive(Clone, Debug, Default)]
pub struct HistoryPreservingReport {
    /// Histories of runs that no bundle realizes, one per distinct
    /// (agent, history).
    pub run_clause: Vec<RunClauseViolation>,
    /// Bundles whose per-agent events no run history realizes.
    pub bundle_clause: Vec<BundleClauseViolation>,
}

impl HistoryPreservingReport {
    pub fn holds(&self) -> bool {
        self.run_clause.is_empty() && self.bundle_clause.is_empty()
    }
}

impl fmt::Display for HistoryPreservingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.run_clause.first() {
            None => writeln!(f, "every run history is realized by a bundle: pass")?,
            Some(v) => writeln!(
                f,
                "every run history is realized by a bundle: FAIL ({} cases; agent {} history {} at time {})",
                self.run_clause.len(),
                v.agent,
                v.history,
                v.time
            )?,
        }
        let widest = self.bundle_clause.iter().max_by_key(|v| v.events.len());
        match widest {
            None => writeln!(f, "every bundle is realized by a run history: pass")?,
            Some(v) => {
                let events: Vec<String> = v.events.iter().map(Event::to_string).collect();
                writeln!(
                    f,
                    "every bundle is realized by a run history: FAIL ({} cases; agent {} with {} events [{}] in bundle {})",
                    self.bundle_clause.len(),
                    v.agent,
                    v.events.len(),
                    events.join(", "),
                    v.bundle
                )?
            }
        }
        Ok(())
    }
}

/// Checks both directions: every run history is the event multiset of the
/// agent's nodes in some bundle, and every bundle's per-agent event multiset
/// occurs as a run history.
pub fn check_history_preserving(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    runs: &RunSet,
    max_nodes: usize,
    cfg: &Config,
) -> Result<HistoryPreservingReport> {
    let ix = Index::new(space, conf)?;
    let mut budget = cfg.budget();
    let (bundles, _) = enumerate_indexed(&ix, max_nodes, cfg.delivery, &mut budget)?;

    let bag_of = |b: &crate::index::IBundle, a: usize| -> EventBag {
        let mut out: EventBag = ix.agent_strands[a]
            .iter()
            .flat_map(|&s| ix.traces[s][..b.heights[s] as usize].iter().map(|&c| ix.event(c)))
            .collect();
        out.sort();
        out
    };

    let mut realized: BTreeMap<&Agent, BTreeSet<EventBag>> = BTreeMap::new();
    let mut per_bundle: Vec<Vec<EventBag>> = Vec::with_capacity(bundles.len());
    for b in &bundles {
        let bags: Vec<EventBag> = (0..ix.agents.len()).map(|a| bag_of(b, a)).collect();
        for (a, bag) in bags.iter().enumerate() {
            realized.entry(&ix.agents[a]).or_default().insert(bag.clone());
        }
        per_bundle.push(bags);
    }

    let mut report = HistoryPreservingReport::default();
    let mut run_bags: BTreeMap<Agent, BTreeSet<EventBag>> = BTreeMap::new();
    let mut reported: BTreeSet<(Agent, History)> = BTreeSet::new();
    for run in runs.iter() {
        for (m, g) in run.states.iter().enumerate() {
            for (a, h) in g.locals() {
                let bag = h.multiset();
                run_bags.entry(a.clone()).or_default().insert(bag.clone());
                let covered = realized.get(a).is_some_and(|set| set.contains(&bag));
                if !covered && reported.insert((a.clone(), h.clone())) {
                    report.run_clause.push(RunClauseViolation {
                        agent: a.clone(),
                        history: h.clone(),
                        run: run.clone(),
                        time: m,
                    });
                }
            }
        }
    }

    for (b, bags) in bundles.iter().zip(&per_bundle) {
        for (a, bag) in bags.iter().enumerate() {
            let agent = &ix.agents[a];
            let covered = run_bags.get(agent).is_some_and(|set| set.contains(bag));
            if !covered {
                report.bundle_clause.push(BundleClauseViolation {
                    agent: agent.clone(),
                    events: bag.clone(),
                    bundle: b.to_bundle(&ix),
                });
            }
        }
    }
    Ok(report)
}
