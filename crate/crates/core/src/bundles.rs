//! Bundles: strand prefixes plus a receive-to-send matching.
//!
//! A bundle stores one height per strand, so the node set is closed under
//! strand predecessors by construction. The axioms left to check are the
//! unique-sender condition, acyclicity and, for extended spaces, freedom
//! from conflicting strands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::{Budget, Config, Delivery};
use crate::error::{Error, Result};
use crate::index::{is_recv, message_of, IBundle, Index, NONE};
use crate::model::{GlobalState, Node, StrandId, StrandSpace};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bundle {
    heights: BTreeMap<StrandId, usize>,
    edges: BTreeSet<(Node, Node)>,
}

impl Bundle {
    /// Every strand of `space` at height 0.
    pub fn empty(space: &StrandSpace) -> Self {
        Self {
            heights: space.strands().iter().map(|s| (s.id.clone(), 0)).collect(),
            edges: BTreeSet::new(),
        }
    }

    pub fn from_parts(heights: BTreeMap<StrandId, usize>, edges: BTreeSet<(Node, Node)>) -> Self {
        Self { heights, edges }
    }

    /// Convenience constructor from string ids; unlisted strands get height 0.
    pub fn build(
        space: &StrandSpace,
        heights: &[(&str, usize)],
        edges: &[((&str, usize), (&str, usize))],
    ) -> Result<Self> {
        let mut out = Self::empty(space);
        for &(s, h) in heights {
            out.heights.insert(StrandId::new(s)?, h);
        }
        for &((s, i), (t, j)) in edges {
            out.edges.insert((
                Node::new(StrandId::new(s)?, i),
                Node::new(StrandId::new(t)?, j),
            ));
        }
        Ok(out)
    }

    pub fn heights(&self) -> &BTreeMap<StrandId, usize> {
        &self.heights
    }

    pub fn edges(&self) -> &BTreeSet<(Node, Node)> {
        &self.edges
    }

    pub fn height(&self, s: &StrandId) -> usize {
        self.heights.get(s).copied().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.heights.values().sum()
    }

    pub fn contains(&self, node: &Node) -> bool {
        node.index >= 1 && node.index <= self.height(&node.strand)
    }

    pub fn with_height(mut self, s: StrandId, h: usize) -> Self {
        self.heights.insert(s, h);
        self
    }

    pub fn with_edge(mut self, from: Node, to: Node) -> Self {
        self.edges.insert((from, to));
        self
    }

    pub fn without_edge(mut self, from: &Node, to: &Node) -> Self {
        self.edges.remove(&(from.clone(), to.clone()));
        self
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let heights: Vec<String> = self
            .heights
            .iter()
            .filter(|(_, &h)| h > 0)
            .map(|(s, h)| format!("{s}:{h}"))
            .collect();
        let edges: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{{{}}} [{}]", heights.join(" "), edges.join(" "))
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-agent symmetric conflict relation, stored as normalized pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConflictRelation {
    pairs: BTreeSet<(StrandId, StrandId)>,
}

impl ConflictRelation {
    pub fn new(pairs: impl IntoIterator<Item = (StrandId, StrandId)>) -> Self {
        let mut out = Self::default();
        for (a, b) in pairs {
            out.insert(a, b);
        }
        out
    }

    pub fn insert(&mut self, a: StrandId, b: StrandId) {
        if a <= b {
            self.pairs.insert((a, b));
        } else {
            self.pairs.insert((b, a));
        }
    }

    pub fn contains(&self, a: &StrandId, b: &StrandId) -> bool {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.pairs.contains(&key)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&StrandId, &StrandId)> {
        self.pairs.iter().map(|(a, b)| (a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConflictProblem {
    UnknownStrand(StrandId),
    SpansAgents(StrandId, StrandId),
    SelfConflict(StrandId),
}

impl fmt::Display for ConflictProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownStrand(s) => write!(f, "conflict pair mentions unknown strand {s}"),
            Self::SpansAgents(a, b) => write!(f, "conflict pair spans agents: {a} and {b}"),
            Self::SelfConflict(s) => write!(f, "strand {s} conflicts with itself"),
        }
    }
}

pub fn validate_conflicts(space: &StrandSpace, conf: &ConflictRelation) -> Vec<ConflictProblem> {
    let mut out = Vec::new();
    for (a, b) in conf.pairs() {
        let (ga, gb) = (space.agent_of(a), space.agent_of(b));
        let known_a = space.strand(a).is_some();
        let known_b = space.strand(b).is_some();
        if !known_a {
            out.push(ConflictProblem::UnknownStrand(a.clone()));
        }
        if !known_b && a != b {
            out.push(ConflictProblem::UnknownStrand(b.clone()));
        }
        if !(known_a && known_b) {
            continue;
        }
        if a == b {
            out.push(ConflictProblem::SelfConflict(a.clone()));
        } else if ga != gb {
            out.push(ConflictProblem::SpansAgents(a.clone(), b.clone()));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    /// Heights within trace lengths; edges join present `+u` and `-u` nodes.
    Structure,
    Finite,
    /// Every present receive has exactly one incoming edge.
    UniqueSender,
    /// Present nodes are closed under strand predecessors.
    PrefixClosed,
    Acyclic,
    /// No two conflicting strands both have a present node.
    ConflictFree,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::Structure,
        Axiom::Finite,
        Axiom::UniqueSender,
        Axiom::PrefixClosed,
        Axiom::Acyclic,
        Axiom::ConflictFree,
    ];
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::Structure => "structure",
            Axiom::Finite => "finite",
            Axiom::UniqueSender => "unique sender",
            Axiom::PrefixClosed => "prefix closed",
            Axiom::Acyclic => "acyclic",
            Axiom::ConflictFree => "conflict free",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomFailure {
    pub axiom: Axiom,
    pub node: Option<Node>,
    pub detail: String,
}

impl fmt::Display for AxiomFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "{} fails at {n}: {}", self.axiom, self.detail),
            None => write!(f, "{} fails: {}", self.axiom, self.detail),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleReport {
    pub failures: Vec<AxiomFailure>,
    /// Whether a conflict relation was supplied.
    pub conflicts_checked: bool,
}

impl BundleReport {
    pub fn passes(&self, axiom: Axiom) -> bool {
        !self.failures.iter().any(|f| f.axiom == axiom)
    }

    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed_axioms(&self) -> BTreeSet<Axiom> {
        self.failures.iter().map(|f| f.axiom).collect()
    }
}

impl fmt::Display for BundleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axiom in Axiom::ALL {
            let status = if axiom == Axiom::ConflictFree && !self.conflicts_checked {
                "not checked"
            } else if self.passes(axiom) {
                "pass"
            } else {
                "FAIL"
            };
            writeln!(f, "{axiom}: {status}")?;
        }
        for failure in &self.failures {
            writeln!(f, "  {failure}")?;
        }
        Ok(())
    }
}

pub fn validate_bundle(
    space: &StrandSpace,
    bundle: &Bundle,
    conf: Option<&ConflictRelation>,
    cfg: &Config,
) -> Result<BundleReport> {
    let ix = Index::new(space, None)?;
    let mut failures = Vec::new();
    let mut fail = |axiom, node: Option<Node>, detail: String| {
        failures.push(AxiomFailure {
            axiom,
            node,
            detail,
        })
    };

    let mut heights = vec![0usize; ix.strands.len()];
    for (s, &h) in bundle.heights() {
        let k = ix.strand(s)?;
        let len = ix.traces[k].len();
        if h > len {
            fail(
                Axiom::Structure,
                None,
                format!("height {h} of strand {s} exceeds its length {len}"),
            );
        }
        heights[k] = h.min(len);
    }
    let present = |node: usize| {
        let s = ix.node_strand[node];
        node - ix.offset[s] < heights[s]
    };

    // Structurally sound edges, as (sender, receiver) node indices.
    let mut good_edges = Vec::new();
    for (from, to) in bundle.edges() {
        ix.strand(&from.strand)?;
        ix.strand(&to.strand)?;
        let (f, t) = match (ix.node_index(from), ix.node_index(to)) {
            (Ok(f), Ok(t)) => (f, t),
            _ => {
                fail(
                    Axiom::Structure,
                    None,
                    format!("edge {from}->{to} names a node outside its strand"),
                );
                continue;
            }
        };
        if !present(f) || !present(t) {
            fail(
                Axiom::Structure,
                Some(to.clone()),
                format!("edge {from}->{to} leaves the bundle's nodes"),
            );
            continue;
        }
        let (cf, ct) = (ix.node_code(f), ix.node_code(t));
        if is_recv(cf) || !is_recv(ct) || message_of(cf) != message_of(ct) {
            fail(
                Axiom::Structure,
                Some(to.clone()),
                format!("edge {from}->{to} does not join +u to -u"),
            );
            continue;
        }
        good_edges.push((f, t));
    }

    let mut incoming = vec![0usize; ix.node_count()];
    let mut outgoing = vec![0usize; ix.node_count()];
    for &(f, t) in &good_edges {
        incoming[t] += 1;
        outgoing[f] += 1;
    }
    for node in 0..ix.node_count() {
        if !present(node) {
            continue;
        }
        let code = ix.node_code(node);
        if is_recv(code) && incoming[node] != 1 {
            let detail = if incoming[node] == 0 {
                "receive has no sender".to_string()
            } else {
                format!("receive has {} senders", incoming[node])
            };
            fail(Axiom::UniqueSender, Some(ix.node_id(node)), detail);
        }
        if !is_recv(code) && outgoing[node] > 1 && cfg.delivery == Delivery::Consuming {
            fail(
                Axiom::UniqueSender,
                Some(ix.node_id(node)),
                format!("send feeds {} receives", outgoing[node]),
            );
        }
    }

    if let Some(cycle_at) = find_cycle(&ix, &heights, &good_edges) {
        fail(
            Axiom::Acyclic,
            Some(ix.node_id(cycle_at)),
            "causal graph has a cycle".into(),
        );
    }

    if let Some(conf) = conf {
        for (a, b) in conf.pairs() {
            if bundle.height(a) >= 1 && bundle.height(b) >= 1 {
                fail(
                    Axiom::ConflictFree,
                    None,
                    format!("conflicting strands {a} and {b} both appear"),
                );
            }
        }
    }

    Ok(BundleReport {
        failures,
        conflicts_checked: conf.is_some(),
    })
}

/// Some node on a cycle of the causal graph, if there is one.
fn find_cycle(ix: &Index, heights: &[usize], edges: &[(usize, usize)]) -> Option<usize> {
    let n = ix.node_count();
    let present = |node: usize| {
        let s = ix.node_strand[node];
        node - ix.offset[s] < heights[s]
    };
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for node in 0..n {
        let s = ix.node_strand[node];
        if present(node) && node + 1 < ix.offset[s + 1] && present(node + 1) {
            succ[node].push(node + 1);
            indeg[node + 1] += 1;
        }
    }
    for &(f, t) in edges {
        succ[f].push(t);
        indeg[t] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| present(v) && indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    let total = (0..n).filter(|&v| present(v)).count();
    if seen == total {
        None
    } else {
        (0..n).find(|&v| present(v) && indeg[v] > 0)
    }
}

/// Edge count of the longest causal path, or `None` on a cycle.
pub(crate) fn longest_path(ix: &Index, b: &IBundle) -> Option<usize> {
    let n = ix.node_count();
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut total = 0;
    for node in 0..n {
        if !b.present(ix, node) {
            continue;
        }
        total += 1;
        let s = ix.node_strand[node];
        if node > ix.offset[s] {
            succ[node - 1].push(node);
            indeg[node] += 1;
        }
        let from = b.sender[node];
        if from != NONE {
            succ[from as usize].push(node);
            indeg[node] += 1;
        }
    }
    let mut depth = vec![0usize; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| b.present(ix, v) && indeg[v] == 0).collect();
    let mut seen = 0;
    let mut best = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        best = best.max(depth[v]);
        for &w in &succ[v] {
            depth[w] = depth[w].max(depth[v] + 1);
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    (seen == total).then_some(best)
}

/// Length, in edges, of the longest causal path through the bundle.
pub fn bundle_height(space: &StrandSpace, bundle: &Bundle) -> Result<usize> {
    let cfg = Config::default().with_delivery(Delivery::Broadcast);
    let report = validate_bundle(space, bundle, None, &cfg)?;
    if let Some(f) = report.failures.first() {
        return Err(Error::InvalidBundle(f.to_string()));
    }
    let ix = Index::new(space, None)?;
    let b = IBundle::from_bundle(&ix, bundle)?;
    Ok(longest_path(&ix, &b).expect("validated acyclic"))
}

pub fn strand_height(space: &StrandSpace, bundle: &Bundle, s: &StrandId) -> Result<usize> {
    if space.strand(s).is_none() {
        return Err(Error::UnknownStrand(s.clone()));
    }
    Ok(bundle.height(s))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleEnumeration {
    pub bundles: Vec<Bundle>,
    /// True when some prefix choice was skipped for exceeding `max_nodes`.
    pub node_budget_hit: bool,
}

pub fn enumerate_bundles(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    max_nodes: usize,
    cfg: &Config,
) -> Result<BundleEnumeration> {
    let ix = Index::new(space, conf)?;
    let mut budget = cfg.budget();
    let (bundles, node_budget_hit) = enumerate_indexed(&ix, max_nodes, cfg.delivery, &mut budget)?;
    Ok(BundleEnumeration {
        bundles: bundles.iter().map(|b| b.to_bundle(&ix)).collect(),
        node_budget_hit,
    })
}

/// All valid bundles of the indexed space with at most `max_nodes` nodes, in
/// lexicographic order of heights and then sender choices.
pub(crate) fn enumerate_indexed(
    ix: &Index,
    max_nodes: usize,
    delivery: Delivery,
    budget: &mut Budget,
) -> Result<(Vec<IBundle>, bool)> {
    let mut out = Vec::new();
    let mut hit = ix.node_count() > max_nodes;
    let mut heights = vec![0u8; ix.strands.len()];
    heights_rec(ix, 0, 0, max_nodes, &mut heights, &mut |h| {
        matchings(ix, h, delivery, &mut |b| {
            budget.charge(1)?;
            out.push(b);
            Ok(())
        })
    })?;
    if max_nodes < ix.node_count() {
        hit = true;
    }
    Ok((out, hit))
}

fn heights_rec(
    ix: &Index,
    s: usize,
    used: usize,
    max_nodes: usize,
    heights: &mut Vec<u8>,
    emit: &mut dyn FnMut(&[u8]) -> Result<()>,
) -> Result<()> {
    if s == ix.strands.len() {
        return emit(heights);
    }
    let len = ix.traces[s].len();
    for h in 0..=len {
        if used + h > max_nodes {
            break;
        }
        if h > 0 && ix.conflicts[s].iter().any(|&t| t == s || (t < s && heights[t] > 0)) {
            break;
        }
        heights[s] = h as u8;
        heights_rec(ix, s + 1, used + h, max_nodes, heights, emit)?;
    }
    heights[s] = 0;
    Ok(())
}

fn matchings(
    ix: &Index,
    heights: &[u8],
    delivery: Delivery,
    emit: &mut dyn FnMut(IBundle) -> Result<()>,
) -> Result<()> {
    let mut base = IBundle::empty(ix);
    base.heights.copy_from_slice(heights);
    let receives: Vec<usize> = (0..ix.node_count())
        .filter(|&n| base.present(ix, n) && is_recv(ix.node_code(n)))
        .collect();
    let sends: Vec<usize> = (0..ix.node_count())
        .filter(|&n| base.present(ix, n) && !is_recv(ix.node_code(n)))
        .collect();
    let candidates: Vec<Vec<usize>> = receives
        .iter()
        .map(|&r| {
            let m = message_of(ix.node_code(r));
            let rs = ix.node_strand[r];
            sends
                .iter()
                .copied()
                .filter(|&snd| message_of(ix.node_code(snd)) == m)
                // A sender later on the receiver's own strand closes a cycle.
                .filter(|&snd| ix.node_strand[snd] != rs || snd < r)
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Ok(());
    }
    let mut used = vec![false; ix.node_count()];
    match_rec(ix, &receives, &candidates, 0, delivery, &mut used, &mut base, emit)
}

#[allow(clippy::too_many_arguments)]
fn match_rec(
    ix: &Index,
    receives: &[usize],
    candidates: &[Vec<usize>],
    k: usize,
    delivery: Delivery,
    used: &mut [bool],
    b: &mut IBundle,
    emit: &mut dyn FnMut(IBundle) -> Result<()>,
) -> Result<()> {
    if k == receives.len() {
        if longest_path(ix, b).is_some() {
            emit(b.clone())?;
        }
        return Ok(());
    }
    let r = receives[k];
    for &snd in &candidates[k] {
        if delivery == Delivery::Consuming && used[snd] {
            continue;
        }
        used[snd] = true;
        b.sender[r] = snd as u32;
        match_rec(ix, receives, candidates, k + 1, delivery, used, b, emit)?;
        used[snd] = false;
    }
    b.sender[r] = NONE;
    Ok(())
}

/// Whether `g` and `bundle` agree strand by strand on their event prefixes.
/// Only meaningful when each strand is its own agent.
pub fn message_equivalent(space: &StrandSpace, g: &GlobalState, bundle: &Bundle) -> Result<bool> {
    if !space.is_identity_assignment() {
        return Err(Error::NotIdentityAssignment);
    }
    for agent in g.agents() {
        if space.strand(&StrandId::new(agent.as_str())?).is_none() {
            return Err(Error::UnknownAgent(agent.clone()));
        }
    }
    for strand in space.strands() {
        let empty = crate::model::History::empty();
        let history = g
            .get(&crate::model::Agent::from(strand.id.clone()))
            .unwrap_or(&empty);
        if bundle.height(&strand.id) != history.len() {
            return Ok(false);
        }
        let agrees = history
            .events()
            .iter()
            .zip(&strand.trace)
            .all(|(e, t)| &t.to_event() == e);
        if !agrees {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::tests::strand;
    use crate::model::{Agent, History};

    fn cfg() -> Config {
        Config::default()
    }

    pub(crate) fn r1_exchange(space: &StrandSpace) -> Bundle {
        Bundle::build(
            space,
            &[("s12", 2), ("s21", 2)],
            &[(("s12", 1), ("s21", 1)), (("s21", 2), ("s12", 2))],
        )
        .unwrap()
    }

    #[test]
    fn empty_bundle_is_valid() {
        let space = fixtures::r1_space();
        let report = validate_bundle(&space, &Bundle::empty(&space), None, &cfg()).unwrap();
        assert!(report.is_valid());
        assert_eq!(bundle_height(&space, &Bundle::empty(&space)).unwrap(), 0);
    }

    #[test]
    fn exchange_bundle_validates_and_has_height_three() {
        let space = fixtures::r1_space();
        let b = r1_exchange(&space);
        assert!(validate_bundle(&space, &b, None, &cfg()).unwrap().is_valid());
        assert_eq!(bundle_height(&space, &b).unwrap(), 3);
        let s = |x: &str| StrandId::new(x).unwrap();
        assert_eq!(strand_height(&space, &b, &s("s12")).unwrap(), 2);
        assert_eq!(strand_height(&space, &b, &s("s23")).unwrap(), 0);
        assert!(strand_height(&space, &b, &s("zz")).is_err());
    }

    #[test]
    fn dropped_edge_fails_unique_sender_only() {
        let space = fixtures::r1_space();
        let from = Node::new(StrandId::new("s21").unwrap(), 2);
        let to = Node::new(StrandId::new("s12").unwrap(), 2);
        let b = r1_exchange(&space).without_edge(&from, &to);
        let report = validate_bundle(&space, &b, None, &cfg()).unwrap();
        assert_eq!(report.failed_axioms(), BTreeSet::from([Axiom::UniqueSender]));
        assert_eq!(report.failures[0].node.as_ref(), Some(&to));
    }

    #[test]
    fn single_send_has_height_zero() {
        let space = StrandSpace::identity(vec![strand("s", &["+u"])]);
        let b = Bundle::build(&space, &[("s", 1)], &[]).unwrap();
        assert_eq!(bundle_height(&space, &b).unwrap(), 0);
    }

    #[test]
    fn cycle_is_attributed_to_acyclicity() {
        let space = StrandSpace::identity(vec![strand("p", &["-a", "+b"]), strand("q", &["-b", "+a"])]);
        let b = Bundle::build(
            &space,
            &[("p", 2), ("q", 2)],
            &[(("q", 2), ("p", 1)), (("p", 2), ("q", 1))],
        )
        .unwrap();
        let report = validate_bundle(&space, &b, None, &cfg()).unwrap();
        assert_eq!(report.failed_axioms(), BTreeSet::from([Axiom::Acyclic]));
        assert!(bundle_height(&space, &b).is_err());
    }

    #[test]
    fn fanout_depends_on_delivery() {
        let space = StrandSpace::identity(vec![
            strand("s", &["+u"]),
            strand("r1", &["-u"]),
            strand("r2", &["-u"]),
        ]);
        let b = Bundle::build(
            &space,
            &[("s", 1), ("r1", 1), ("r2", 1)],
            &[(("s", 1), ("r1", 1)), (("s", 1), ("r2", 1))],
        )
        .unwrap();
        let strict = validate_bundle(&space, &b, None, &cfg()).unwrap();
        assert_eq!(strict.failed_axioms(), BTreeSet::from([Axiom::UniqueSender]));
        let loose = cfg().with_delivery(Delivery::Broadcast);
        assert!(validate_bundle(&space, &b, None, &loose).unwrap().is_valid());

        let strict_all = enumerate_bundles(&space, None, 3, &cfg()).unwrap();
        let loose_all = enumerate_bundles(&space, None, 3, &loose).unwrap();
        assert!(!strict_all.bundles.contains(&b));
        assert!(loose_all.bundles.contains(&b));
    }

    #[test]
    fn structure_problems_are_reported() {
        let space = fixtures::r1_space();
        let b = Bundle::build(&space, &[("s12", 3)], &[]).unwrap();
        let report = validate_bundle(&space, &b, None, &cfg()).unwrap();
        assert!(!report.passes(Axiom::Structure));

        let b = Bundle::build(&space, &[("s12", 1), ("s23", 1)], &[(("s12", 1), ("s23", 1))]).unwrap();
        let report = validate_bundle(&space, &b, None, &cfg()).unwrap();
        assert!(!report.passes(Axiom::Structure));

        let b = Bundle::build(&space, &[("nope", 1)], &[]).unwrap();
        assert!(validate_bundle(&space, &b, None, &cfg()).is_err());
    }

    #[test]
    fn enumeration_with_zero_budget_is_the_empty_bundle() {
        let space = fixtures::r1_space();
        let e = enumerate_bundles(&space, None, 0, &cfg()).unwrap();
        assert_eq!(e.bundles, vec![Bundle::empty(&space)]);
        assert!(e.node_budget_hit);
    }

    #[test]
    fn natural_space_has_a_full_bundle() {
        let space = fixtures::r1_space();
        let e = enumerate_bundles(&space, None, 8, &cfg()).unwrap();
        assert!(!e.node_budget_hit);
        assert!(e.bundles.iter().any(|b| b.node_count() == 8));
        for b in &e.bundles {
            assert!(validate_bundle(&space, b, None, &cfg()).unwrap().is_valid());
        }
    }

    #[test]
    fn conflicts_prune_enumeration() {
        let ext = fixtures::r1_extended_space();
        let e = enumerate_bundles(&ext.space, Some(&ext.conf), 8, &cfg()).unwrap();
        let two = Agent::new("2").unwrap();
        for b in &e.bundles {
            let active = ext
                .space
                .strands()
                .iter()
                .filter(|s| ext.space.agent_of(&s.id) == Some(&two) && b.height(&s.id) > 0)
                .count();
            assert!(active <= 1, "{b:?}");
            assert!(validate_bundle(&ext.space, b, Some(&ext.conf), &cfg()).unwrap().is_valid());
        }
    }

    #[test]
    fn enumeration_order_is_stable() {
        let space = fixtures::nack_space();
        let a = enumerate_bundles(&space, None, 6, &cfg()).unwrap();
        let b = enumerate_bundles(&space, None, 6, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn message_equivalence() {
        let space = fixtures::r1_space().with_identity_assignment();
        let empty_state = GlobalState::initial(space.agents());
        assert!(message_equivalent(&space, &empty_state, &Bundle::empty(&space)).unwrap());

        let mut g = empty_state.clone();
        let h = |evs: &[&str]| History::new(evs.iter().map(|e| e.parse().unwrap()).collect());
        g.set(Agent::new("s12").unwrap(), h(&["sent u", "recv v"]));
        g.set(Agent::new("s21").unwrap(), h(&["recv u", "sent v"]));
        let b = r1_exchange(&space);
        assert!(message_equivalent(&space, &g, &b).unwrap());
        assert!(!message_equivalent(&space, &g, &Bundle::empty(&space)).unwrap());

        assert!(matches!(
            message_equivalent(&fixtures::r1_space(), &g, &b),
            Err(Error::NotIdentityAssignment)
        ));
    }

    #[test]
    fn conflict_validation() {
        let space = fixtures::r1_space();
        let s = |x: &str| StrandId::new(x).unwrap();
        let conf = ConflictRelation::new([(s("s12"), s("s21"))]);
        let problems = validate_conflicts(&space, &conf);
        assert_eq!(problems.len(), 1);
        assert!(problems[0].to_string().contains("conflict pair spans agents"));
        let ok = ConflictRelation::new([(s("s32"), s("s12"))]);
        assert!(validate_conflicts(&space, &ok).is_empty());
        assert!(ok.contains(&s("s12"), &s("s32")));
    }
}
