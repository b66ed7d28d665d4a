//! The one-step bundle relation, chains of bundles, and the translation of
//! a space into run prefixes.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::bundles::{enumerate_indexed, Bundle, ConflictRelation};
use crate::config::{Bijection, Budget, Config};
use crate::engine::{collect_runs, Histories, States, Trie, ROOT};
use crate::error::{Error, Result};
use crate::index::{IBundle, Index, NONE};
use crate::model::{Agent, Event, GlobalState, History, StrandId, StrandSpace};
use crate::runset::{RunPrefix, RunSet};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StepWitness {
    /// Image of every strand active in the earlier bundle.
    pub f: BTreeMap<StrandId, StrandId>,
    /// Per agent, the strand that grew and the event of its new node.
    pub extensions: BTreeMap<Agent, Option<(StrandId, Event)>>,
}

impl StepWitness {
    pub fn event(&self, agent: &Agent) -> Option<&Event> {
        self.extensions.get(agent)?.as_ref().map(|(_, e)| e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChainPrefix {
    pub bundles: Vec<Bundle>,
    pub witnesses: Vec<StepWitness>,
}

impl ChainPrefix {
    /// Number of steps.
    pub fn len(&self) -> usize {
        self.witnesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Index form of a witness: `f` per strand (`NONE` off the active set) and
/// per agent the grown strand with its new event code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct IStep {
    pub f: Vec<u32>,
    pub ext: Vec<Option<(usize, u16)>>,
}

impl IStep {
    fn to_witness(&self, ix: &Index) -> StepWitness {
        let f = self
            .f
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != NONE)
            .map(|(s, &t)| (ix.strands[s].clone(), ix.strands[t as usize].clone()))
            .collect();
        let extensions = ix
            .agents
            .iter()
            .zip(&self.ext)
            .map(|(a, e)| {
                (
                    a.clone(),
                    e.map(|(s, c)| (ix.strands[s].clone(), ix.event(c))),
                )
            })
            .collect();
        StepWitness { f, extensions }
    }

    pub fn codes(&self) -> Vec<Option<u16>> {
        self.ext.iter().map(|e| e.map(|(_, c)| c)).collect()
    }
}

/// Witnesses for `b1 ↦ b2`. With `all`, every witness with a distinct
/// extension map; otherwise at most the first one found.
pub(crate) fn step_witnesses(
    ix: &Index,
    b1: &IBundle,
    b2: &IBundle,
    bijection: Bijection,
    all: bool,
) -> Vec<IStep> {
    let c1 = b1.agent_counts(ix);
    let c2 = b2.agent_counts(ix);
    if c1.iter().zip(&c2).any(|(&x, &y)| y < x || y > x + 1) {
        return Vec::new();
    }
    let active: Vec<usize> = (0..ix.strands.len()).filter(|&s| b1.heights[s] > 0).collect();
    let options: Vec<Vec<usize>> = active
        .iter()
        .map(|&s| {
            let h = b1.heights[s] as usize;
            let prefix = &ix.traces[s][..h];
            let fits = |t: usize| b2.heights[t] as usize >= h && &ix.traces[t][..h] == prefix;
            match bijection {
                Bijection::Identity => fits(s).then_some(s).into_iter().collect(),
                Bijection::Search => {
                    let mut out: Vec<usize> = ix.agent_strands[ix.agent_of[s]]
                        .iter()
                        .copied()
                        .filter(|&t| fits(t))
                        .collect();
                    // Try the identity first so stuttering steps report it.
                    if let Some(pos) = out.iter().position(|&t| t == s) {
                        out.remove(pos);
                        out.insert(0, s);
                    }
                    out
                }
            }
        })
        .collect();
    let mut search = Search {
        ix,
        b1,
        b2,
        active: &active,
        options: &options,
        f: vec![NONE; ix.strands.len()],
        taken: vec![false; ix.strands.len()],
        out: Vec::new(),
        seen: HashSet::new(),
        all,
    };
    search.run(0);
    search.out
}

struct Search<'a> {
    ix: &'a Index,
    b1: &'a IBundle,
    b2: &'a IBundle,
    active: &'a [usize],
    options: &'a [Vec<usize>],
    f: Vec<u32>,
    taken: Vec<bool>,
    out: Vec<IStep>,
    seen: HashSet<Vec<Option<(usize, u16)>>>,
    all: bool,
}

impl Search<'_> {
    fn done(&self) -> bool {
        !self.all && !self.out.is_empty()
    }

    fn run(&mut self, k: usize) {
        if self.done() {
            return;
        }
        if k == self.active.len() {
            if self.edges_preserved() {
                let ext = self.extensions();
                if self.seen.insert(ext.clone()) {
                    self.out.push(IStep {
                        f: self.f.clone(),
                        ext,
                    });
                }
            }
            return;
        }
        let s = self.active[k];
        for &t in &self.options[k] {
            if self.taken[t] {
                continue;
            }
            self.taken[t] = true;
            self.f[s] = t as u32;
            self.run(k + 1);
            self.taken[t] = false;
            self.f[s] = NONE;
            if self.done() {
                return;
            }
        }
    }

    fn map_node(&self, node: usize) -> usize {
        let s = self.ix.node_strand[node];
        self.ix.offset[self.f[s] as usize] + (node - self.ix.offset[s])
    }

    fn edges_preserved(&self) -> bool {
        (0..self.ix.node_count()).all(|node| {
            let from = self.b1.sender[node];
            from == NONE || self.b2.sender[self.map_node(node)] == self.map_node(from as usize) as u32
        })
    }

    fn extensions(&self) -> Vec<Option<(usize, u16)>> {
        let mut base = vec![0usize; self.ix.strands.len()];
        for &s in self.active {
            base[self.f[s] as usize] = self.b1.heights[s] as usize;
        }
        self.ix
            .agent_strands
            .iter()
            .map(|strands| {
                strands.iter().find_map(|&t| {
                    let h = self.b2.heights[t] as usize;
                    (h > base[t]).then(|| (t, self.ix.traces[t][h - 1]))
                })
            })
            .collect()
    }
}

/// Decides `b1 ↦ b2`, returning one witness when it holds.
pub fn check_step(
    space: &StrandSpace,
    b1: &Bundle,
    b2: &Bundle,
    cfg: &Config,
) -> Result<Option<StepWitness>> {
    let ix = Index::new(space, None)?;
    let i1 = IBundle::from_bundle(&ix, b1)?;
    let i2 = IBundle::from_bundle(&ix, b2)?;
    Ok(step_witnesses(&ix, &i1, &i2, cfg.bijection, false)
        .first()
        .map(|w| w.to_witness(&ix)))
}

/// Every valid bundle within the node budget and the memoized step relation
/// between them.
pub(crate) struct StepGraph {
    pub ix: Index,
    pub bundles: Vec<IBundle>,
    by_counts: HashMap<Vec<usize>, Vec<u32>>,
    succ: Vec<Option<Vec<(u32, Vec<IStep>)>>>,
    bijection: Bijection,
}

impl StepGraph {
    pub fn new(
        space: &StrandSpace,
        conf: Option<&ConflictRelation>,
        max_nodes: usize,
        cfg: &Config,
        budget: &mut Budget,
    ) -> Result<Self> {
        let ix = Index::new(space, conf)?;
        let (bundles, _) = enumerate_indexed(&ix, max_nodes, cfg.delivery, budget)?;
        let mut by_counts: HashMap<Vec<usize>, Vec<u32>> = HashMap::new();
        for (k, b) in bundles.iter().enumerate() {
            by_counts.entry(b.agent_counts(&ix)).or_default().push(k as u32);
        }
        let succ = vec![None; bundles.len()];
        Ok(Self {
            ix,
            bundles,
            by_counts,
            succ,
            bijection: cfg.bijection,
        })
    }

    /// Id of the empty bundle, which sorts first in enumeration order.
    pub fn empty(&self) -> u32 {
        0
    }

    pub fn successors(&mut self, b: u32) -> &[(u32, Vec<IStep>)] {
        if self.succ[b as usize].is_none() {
            let list = self.compute(b);
            self.succ[b as usize] = Some(list);
        }
        self.succ[b as usize].as_deref().expect("just filled")
    }

    fn compute(&self, b: u32) -> Vec<(u32, Vec<IStep>)> {
        let from = &self.bundles[b as usize];
        let counts = from.agent_counts(&self.ix);
        let agents = counts.len();
        let mut targets: Vec<u32> = Vec::new();
        for mask in 0u64..(1u64 << agents) {
            let key: Vec<usize> = counts
                .iter()
                .enumerate()
                .map(|(a, &c)| c + ((mask >> a) & 1) as usize)
                .collect();
            if let Some(ids) = self.by_counts.get(&key) {
                targets.extend(ids);
            }
        }
        targets.sort_unstable();
        targets
            .into_iter()
            .filter_map(|t| {
                let steps = step_witnesses(&self.ix, from, &self.bundles[t as usize], self.bijection, true);
                (!steps.is_empty()).then_some((t, steps))
            })
            .collect()
    }

    /// Fewest steps from the empty bundle, per bundle, exploring up to
    /// `max_depth` steps.
    pub fn depths(&mut self, max_depth: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.bundles.len()];
        let start = self.empty();
        depth[start as usize] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            let d = depth[b as usize].expect("queued with depth");
            if d == max_depth {
                continue;
            }
            let next: Vec<u32> = self.successors(b).iter().map(|(t, _)| *t).collect();
            for t in next {
                if depth[t as usize].is_none() {
                    depth[t as usize] = Some(d + 1);
                    queue.push_back(t);
                }
            }
        }
        depth
    }
}

/// All chain prefixes `B_0 ↦ ... ↦ B_horizon` with bundles of at most
/// `max_nodes` nodes. Prefixes differing only in the extension events chosen
/// by different bijections are listed separately.
pub fn enumerate_chain_prefixes(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    horizon: usize,
    max_nodes: usize,
    cfg: &Config,
) -> Result<Vec<ChainPrefix>> {
    let mut budget = cfg.budget();
    let mut graph = StepGraph::new(space, conf, max_nodes, cfg, &mut budget)?;
    let mut out = Vec::new();
    let mut path: Vec<(u32, Option<IStep>)> = vec![(graph.empty(), None)];
    chain_rec(&mut graph, horizon, &mut path, &mut out, &mut budget)?;
    Ok(out)
}

fn chain_rec(
    graph: &mut StepGraph,
    horizon: usize,
    path: &mut Vec<(u32, Option<IStep>)>,
    out: &mut Vec<ChainPrefix>,
    budget: &mut Budget,
) -> Result<()> {
    if path.len() == horizon + 1 {
        budget.charge(1)?;
        let ix = &graph.ix;
        out.push(ChainPrefix {
            bundles: path
                .iter()
                .map(|(b, _)| graph.bundles[*b as usize].to_bundle(ix))
                .collect(),
            witnesses: path
                .iter()
                .filter_map(|(_, w)| w.as_ref().map(|w| w.to_witness(ix)))
                .collect(),
        });
        return Ok(());
    }
    let last = path.last().expect("nonempty").0;
    let next = graph.successors(last).to_vec();
    for (t, steps) in next {
        for step in steps {
            path.push((t, Some(step)));
            chain_rec(graph, horizon, path, out, budget)?;
            path.pop();
        }
    }
    Ok(())
}

fn chain_agents(chain: &ChainPrefix) -> Vec<Agent> {
    chain
        .witnesses
        .first()
        .map(|w| w.extensions.keys().cloned().collect())
        .unwrap_or_default()
}

/// `hist_a^m`: the events agent `a` performed over the first `m` steps.
pub fn hist(chain: &ChainPrefix, a: &Agent, m: usize) -> Result<History> {
    if m > chain.len() {
        return Err(Error::TimeOutOfRange {
            time: m,
            len: chain.len(),
        });
    }
    Ok(chain.witnesses[..m]
        .iter()
        .filter_map(|w| w.event(a).cloned())
        .collect())
}

/// The run prefix `r^C` read off a chain, over the given agents.
pub fn run_from_chain(chain: &ChainPrefix, agents: &[Agent]) -> RunPrefix {
    let mut agents = agents.to_vec();
    if agents.is_empty() {
        agents = chain_agents(chain);
    }
    let mut g = GlobalState::initial(&agents);
    let mut states = vec![g.clone()];
    for w in &chain.witnesses {
        for a in &agents {
            if let Some(e) = w.event(a) {
                let h = g.get(a).expect("initialized").appended(e.clone());
                g.set(a.clone(), h);
            }
        }
        states.push(g.clone());
    }
    RunPrefix::new(states)
}

/// The run prefixes of all chains of length `horizon`, as a set.
pub fn translate(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    horizon: usize,
    max_nodes: usize,
    cfg: &Config,
) -> Result<RunSet> {
    let mut budget = cfg.budget();
    let mut graph = StepGraph::new(space, conf, max_nodes, cfg, &mut budget)?;
    let agents = graph.ix.agents.clone();
    let messages = graph.ix.messages.clone();

    let mut hist = Histories::new(messages.len());
    let mut states = States::default();
    let initial = states.intern(&vec![ROOT; agents.len()]);
    let mut trie = Trie::new(initial);

    let mut frontier: Vec<(u32, u32)> = vec![(0, graph.empty())];
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let mut scratch = vec![0u32; agents.len()];
    for _ in 0..horizon {
        seen.clear();
        let mut next = Vec::new();
        for &(node, b) in &frontier {
            let current: Vec<u32> = states.get(trie.state(node)).to_vec();
            let succ = graph.successors(b);
            for (t, steps) in succ {
                let mut done: HashSet<Vec<Option<u16>>> = HashSet::new();
                for step in steps {
                    let codes = step.codes();
                    if !done.insert(codes.clone()) {
                        continue;
                    }
                    for (a, c) in codes.iter().enumerate() {
                        scratch[a] = match c {
                            Some(c) => hist.append(current[a], *c),
                            None => current[a],
                        };
                    }
                    let state = states.intern(&scratch);
                    let (child, _) = trie.child(node, state);
                    if seen.insert((child, *t)) {
                        budget.charge(1)?;
                        next.push((child, *t));
                    }
                }
            }
        }
        frontier = next;
    }
    let mut finals: Vec<u32> = frontier.iter().map(|&(n, _)| n).collect();
    finals.sort_unstable();
    finals.dedup();
    collect_runs(horizon, &agents, &messages, &hist, &states, &trie, finals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::tests::strand;
    use std::collections::BTreeSet;

    fn cfg() -> Config {
        Config::default()
    }

    fn e(s: &str) -> Event {
        s.parse().unwrap()
    }

    fn sid(s: &str) -> StrandId {
        StrandId::new(s).unwrap()
    }

    fn ag(s: &str) -> Agent {
        Agent::new(s).unwrap()
    }

    #[test]
    fn stuttering_step_uses_identity() {
        let space = fixtures::r1_space();
        let b = Bundle::build(&space, &[("s12", 1), ("s21", 1)], &[(("s12", 1), ("s21", 1))]).unwrap();
        let w = check_step(&space, &b, &b, &cfg()).unwrap().unwrap();
        assert!(w.f.iter().all(|(s, t)| s == t));
        assert!(w.extensions.values().all(Option::is_none));
    }

    #[test]
    fn first_send_extends_agent_two() {
        let space = fixtures::r1_space();
        let b1 = Bundle::empty(&space);
        let b2 = Bundle::build(&space, &[("s12", 1)], &[]).unwrap();
        let w = check_step(&space, &b1, &b2, &cfg()).unwrap().unwrap();
        assert_eq!(w.event(&ag("2")), Some(&e("sent u")));
        assert_eq!(w.event(&ag("1")), None);
    }

    #[test]
    fn bijection_moves_a_prefix_between_strands() {
        let mut assignment = BTreeMap::new();
        assignment.insert(sid("s"), ag("a"));
        assignment.insert(sid("t"), ag("a"));
        let space = StrandSpace::new(
            vec![strand("s", &["+u"]), strand("t", &["+u", "+v"])],
            assignment,
        );
        let b1 = Bundle::build(&space, &[("s", 1)], &[]).unwrap();
        let b2 = Bundle::build(&space, &[("t", 2)], &[]).unwrap();
        let w = check_step(&space, &b1, &b2, &cfg()).unwrap().unwrap();
        assert_eq!(w.f.get(&sid("s")), Some(&sid("t")));
        assert_eq!(w.event(&ag("a")), Some(&e("sent v")));

        let strict = cfg().with_bijection(Bijection::Identity);
        assert!(check_step(&space, &b1, &b2, &strict).unwrap().is_none());
    }

    #[test]
    fn two_nodes_for_one_agent_is_not_a_step() {
        let space = fixtures::r1_space();
        let b2 = Bundle::build(&space, &[("s12", 1), ("s32", 1)], &[]).unwrap();
        assert!(check_step(&space, &Bundle::empty(&space), &b2, &cfg()).unwrap().is_none());
    }

    #[test]
    fn edges_must_be_preserved() {
        let space = StrandSpace::identity(vec![
            strand("a", &["+u"]),
            strand("b", &["+u"]),
            strand("r", &["-u"]),
        ]);
        let via_a = Bundle::build(&space, &[("a", 1), ("b", 1), ("r", 1)], &[(("a", 1), ("r", 1))]).unwrap();
        let via_b = Bundle::build(&space, &[("a", 1), ("b", 1), ("r", 1)], &[(("b", 1), ("r", 1))]).unwrap();
        assert!(check_step(&space, &via_a, &via_b, &cfg()).unwrap().is_none());
    }

    #[test]
    fn horizon_zero_is_the_empty_chain() {
        let space = fixtures::r1_space();
        let chains = enumerate_chain_prefixes(&space, None, 0, 8, &cfg()).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].bundles, vec![Bundle::empty(&space)]);
        let runs = translate(&space, None, 0, 8, &cfg()).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs.iter().next().unwrap().states.len(), 1);
    }

    fn exchange(space: &StrandSpace) -> Bundle {
        Bundle::build(
            space,
            &[("s12", 2), ("s21", 2)],
            &[(("s12", 1), ("s21", 1)), (("s21", 2), ("s12", 2))],
        )
        .unwrap()
    }

    #[test]
    fn exchange_chain_and_its_histories() {
        let space = fixtures::r1_space();
        let chains = enumerate_chain_prefixes(&space, None, 4, 8, &cfg()).unwrap();
        let full = exchange(&space);
        let chain = chains
            .iter()
            .find(|c| c.bundles.last() == Some(&full) && c.bundles[1].node_count() == 1)
            .expect("four single-node steps reach the exchange");
        for pair in chain.bundles.windows(2) {
            assert!(check_step(&space, &pair[0], &pair[1], &cfg()).unwrap().is_some());
        }
        let h = |evs: &[&str]| History::new(evs.iter().map(|x| e(x)).collect());
        assert_eq!(hist(chain, &ag("2"), 4).unwrap(), h(&["sent u", "recv v"]));
        assert_eq!(hist(chain, &ag("3"), 4).unwrap(), History::empty());
        assert_eq!(hist(chain, &ag("2"), 0).unwrap(), History::empty());
        assert!(hist(chain, &ag("2"), 5).is_err());

        let agents: Vec<Agent> = space.agents().iter().cloned().collect();
        let run = run_from_chain(chain, &agents);
        assert_eq!(run.states.len(), 5);
        assert_eq!(run.local(&ag("1"), 4).unwrap(), &h(&["recv u", "sent v"]));
    }

    #[test]
    fn stuttering_chain_gives_constant_run() {
        let space = fixtures::ping_space();
        let chains = enumerate_chain_prefixes(&space, None, 3, 2, &cfg()).unwrap();
        let stutter = chains
            .iter()
            .find(|c| c.bundles.iter().all(|b| b.node_count() == 0))
            .unwrap();
        let agents: Vec<Agent> = space.agents().iter().cloned().collect();
        let run = run_from_chain(stutter, &agents);
        assert_eq!(run.states.len(), 4);
        assert!(run.states.iter().all(|g| g == &GlobalState::initial(&agents)));
    }

    #[test]
    fn nack_space_reaches_ack_then_nack() {
        let space = fixtures::nack_space();
        let runs = translate(&space, None, 3, 6, &cfg()).unwrap();
        let target = History::new(vec![e("recv u"), e("sent ack"), e("sent nack")]);
        assert!(runs.histories_of(&ag("2")).contains(&target));
    }

    #[test]
    fn translate_matches_chain_enumeration() {
        for (space, conf) in [
            (fixtures::ping_space(), None),
            (fixtures::nack_space(), None),
            (fixtures::r1_space(), None),
            {
                let ext = fixtures::r1_extended_space();
                (ext.space, Some(ext.conf))
            },
        ] {
            let agents: Vec<Agent> = space.agents().iter().cloned().collect();
            let max = space.node_count();
            let chains = enumerate_chain_prefixes(&space, conf.as_ref(), 3, max, &cfg()).unwrap();
            let naive: BTreeSet<RunPrefix> = chains.iter().map(|c| run_from_chain(c, &agents)).collect();
            let fast = translate(&space, conf.as_ref(), 3, max, &cfg()).unwrap();
            let fast: BTreeSet<RunPrefix> = fast.iter().collect();
            assert_eq!(naive, fast);
        }
    }

    #[test]
    fn per_step_growth_is_bounded() {
        let space = fixtures::r1_space();
        let runs = translate(&space, None, 4, 8, &cfg()).unwrap();
        for run in runs.iter() {
            for pair in run.states.windows(2) {
                for (a, h) in pair[1].locals() {
                    let before = pair[0].get(a).unwrap();
                    assert!(h.len() <= before.len() + 1);
                    assert!(before.is_prefix_of(h));
                }
            }
        }
    }

    #[test]
    fn state_limit_is_enforced() {
        let space = fixtures::r1_space();
        let tight = cfg().with_max_states(10);
        assert!(matches!(
            translate(&space, None, 6, 8, &tight),
            Err(Error::StateLimit { limit: 10 })
        ));
    }
}
