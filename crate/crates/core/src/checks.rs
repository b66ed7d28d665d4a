//! Bounded checks of the correspondences between spaces, systems and
//! protocols. Each returns a report naming what was checked and, when the
//! property fails, a witness.

use std::collections::BTreeSet;
use std::fmt;

use crate::bundles::{enumerate_bundles, longest_path, message_equivalent, ConflictRelation};
use crate::chains::{translate, StepGraph};
use crate::config::Config;
use crate::constructions::{extended_space_from_system, space_from_monotone, StrandLayout};
use crate::error::{Error, Result};
use crate::model::{GlobalState, Message, StrandSpace};
use crate::protocols::{generate_runs, JointProtocol};
use crate::systems::{
    check_history_preserving, check_mp, extract_histories, generate_system, systems_equal, HistorySet,
    RunSet,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub title: String,
    pub holds: bool,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            holds: true,
            details: Vec::new(),
        }
    }

    fn fail(&mut self, detail: impl Into<String>) {
        self.holds = false;
        self.details.push(detail.into());
    }

    fn note(&mut self, detail: impl Into<String>) {
        self.details.push(detail.into());
    }

    pub fn holds(&self) -> bool {
        self.holds
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.holds { "holds" } else { "FAILS" };
        writeln!(f, "{}: {status}", self.title)?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

/// Every run satisfies the message-passing conditions and the set equals
/// the system generated by its own extracted histories.
pub fn strand_system_property(runs: &RunSet, universe: &BTreeSet<Message>, cfg: &Config) -> Result<CheckReport> {
    let mut report = CheckReport::new("run set is a strand system");
    let agents = runs.agents().iter().cloned().collect();
    let bad = runs.iter().find_map(|run| {
        let mp = check_mp(universe, &agents, &run, cfg);
        (!mp.passes()).then_some((run, mp))
    });
    if let Some((run, mp)) = bad {
        report.fail(format!("run violates the message-passing conditions: {run}"));
        for line in mp.to_string().lines() {
            report.note(line.to_string());
        }
    }
    let hs = extract_histories(runs)?;
    let regenerated = generate_system(&hs, runs.horizon(), cfg)?;
    let eq = systems_equal(runs, &regenerated)?;
    report.note(format!(
        "{} runs at horizon {}; regenerated {}",
        runs.len(),
        runs.horizon(),
        regenerated.len()
    ));
    if !eq.equal() {
        report.fail(format!("differs from the system generated by its histories: {}", eq.to_string().trim_end()));
    }
    Ok(report)
}

/// With each strand its own agent, the global states of the translation and
/// the bundles correspond one to one up to message-equivalence.
pub fn message_equivalence(space: &StrandSpace, horizon: usize, max_nodes: usize, cfg: &Config) -> Result<CheckReport> {
    let space = space.with_identity_assignment();
    let mut report = CheckReport::new("global states and bundles are message-equivalent");
    let runs = translate(&space, None, horizon, max_nodes, cfg)?;
    let states: BTreeSet<GlobalState> = runs.global_states();
    let bundles = enumerate_bundles(&space, None, max_nodes, cfg)?.bundles;
    let mut unmatched_states = 0;
    for g in &states {
        let mut found = false;
        for b in &bundles {
            if message_equivalent(&space, g, b)? {
                found = true;
                break;
            }
        }
        if !found {
            if unmatched_states == 0 {
                report.fail(format!("global state {g:?} matches no bundle"));
            }
            unmatched_states += 1;
        }
    }
    let mut unmatched_bundles = 0;
    for b in &bundles {
        let mut found = false;
        for g in &states {
            if message_equivalent(&space, g, b)? {
                found = true;
                break;
            }
        }
        if !found {
            if unmatched_bundles == 0 {
                report.fail(format!("bundle {b} matches no global state"));
            }
            unmatched_bundles += 1;
        }
    }
    report.note(format!(
        "{} global states, {} bundles; {unmatched_states} states and {unmatched_bundles} bundles unmatched",
        states.len(),
        bundles.len()
    ));
    Ok(report)
}

/// No strand space represents the system through a history-preserving
/// translation; checked on the given space by finding a failing clause.
pub fn not_history_preserving(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    runs: &RunSet,
    max_nodes: usize,
    cfg: &Config,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("space fails to preserve the system's histories");
    let hp = check_history_preserving(space, conf, runs, max_nodes, cfg)?;
    for line in hp.to_string().lines() {
        report.note(line.to_string());
    }
    if hp.holds() {
        report.fail("both clauses hold, so this space preserves the histories");
    }
    Ok(report)
}

/// The extended space built from a history set translates back to the
/// system it came from.
pub fn extended_round_trip(hs: &HistorySet, horizon: usize, cfg: &Config) -> Result<CheckReport> {
    let mut report = CheckReport::new("extended space built from the system translates back to it");
    let ext = extended_space_from_system(hs)?;
    let max = ext.space.node_count();
    let translated = translate(&ext.space, Some(&ext.conf), horizon, max, cfg)?;
    let generated = generate_system(hs, horizon, cfg)?;
    compare(&mut report, &translated, &generated)?;
    Ok(report)
}

/// The space built from a monotone joint protocol translates to the
/// protocol's runs.
pub fn monotone_round_trip(jp: &JointProtocol, horizon: usize, layout: StrandLayout, cfg: &Config) -> Result<CheckReport> {
    let mut report = CheckReport::new("space built from the monotone protocol translates to its runs");
    let space = space_from_monotone(jp, None, layout)?;
    let max = space.node_count();
    let translated = translate(&space, None, horizon, max, cfg)?;
    let generated = generate_runs(jp, horizon, cfg)?;
    compare(&mut report, &translated, &generated)?;
    Ok(report)
}

fn compare(report: &mut CheckReport, translated: &RunSet, generated: &RunSet) -> Result<()> {
    let eq = systems_equal(translated, generated)?;
    report.note(format!("translated {} runs, generated {}", translated.len(), generated.len()));
    if !eq.equal() {
        report.fail(eq.to_string().trim_end().to_string());
    }
    Ok(())
}

/// A bundle first reached after `n` steps has height at most `2n`.
pub fn height_bound(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    max_steps: usize,
    max_nodes: usize,
    cfg: &Config,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(format!("bundle height is at most twice the chain length (n <= {max_steps})"));
    let mut budget = cfg.budget();
    let mut graph = StepGraph::new(space, conf, max_nodes, cfg, &mut budget)?;
    let depths = graph.depths(max_steps);
    let mut reached = 0;
    for (b, depth) in graph.bundles.iter().zip(&depths) {
        let Some(n) = depth else { continue };
        reached += 1;
        let height = longest_path(&graph.ix, b).expect("enumerated bundles are acyclic");
        if height > 2 * n {
            report.fail(format!(
                "bundle {} has height {height} after {n} steps",
                b.to_bundle(&graph.ix)
            ));
        }
    }
    report.note(format!("{reached} bundles reachable within {max_steps} steps"));
    Ok(report)
}

/// With each strand its own agent, every bundle ends a chain no longer than
/// its node count.
pub fn chain_reachability(
    space: &StrandSpace,
    conf: Option<&ConflictRelation>,
    max_nodes: usize,
    cfg: &Config,
) -> Result<CheckReport> {
    if conf.is_some_and(|c| !c.is_empty()) {
        return Err(Error::MalformedSpace(
            "chain reachability is checked with each strand its own agent, where conflicts cannot apply".into(),
        ));
    }
    let space = space.with_identity_assignment();
    let mut report = CheckReport::new("every bundle ends a chain of at most its node count");
    let mut budget = cfg.budget();
    let mut graph = StepGraph::new(&space, conf, max_nodes, cfg, &mut budget)?;
    let depths = graph.depths(max_nodes);
    let mut misses = 0;
    for (b, depth) in graph.bundles.iter().zip(&depths) {
        let size = b.size();
        match depth {
            Some(d) if *d <= size => {}
            _ => {
                misses += 1;
                if misses == 1 {
                    report.fail(format!("bundle {} is not reached within {size} steps", b.to_bundle(&graph.ix)));
                }
            }
        }
    }
    report.note(format!("{} bundles, {misses} misses", graph.bundles.len()));
    Ok(report)
}
