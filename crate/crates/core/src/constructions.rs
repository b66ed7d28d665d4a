//! Spaces built from systems and from monotone protocols.

use std::collections::{BTreeMap, BTreeSet};

use crate::bundles::{validate_conflicts, ConflictRelation};
use crate::error::{Error, Result};
use crate::model::{validate_space, Agent, Message, SignedTerm, Strand, StrandId, StrandSpace};
use crate::protocols::JointProtocol;
use crate::systems::HistorySet;

/// A strand space with a per-agent conflict relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedSpace {
    pub space: StrandSpace,
    pub conf: ConflictRelation,
}

impl ExtendedSpace {
    /// Every problem with the space and with its conflict pairs.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_space(&self.space)
            .problems
            .iter()
            .map(ToString::to_string)
            .collect();
        out.extend(validate_conflicts(&self.space, &self.conf).iter().map(ToString::to_string));
        out
    }
}

fn terms_id(agent: &Agent, terms: &[SignedTerm]) -> Result<StrandId> {
    let body: Vec<String> = terms.iter().map(ToString::to_string).collect();
    StrandId::new(&format!("{agent}/{}", body.join(".")))
}

/// One strand per agent and nonempty history, tracing that history; two
/// strands of one agent conflict whenever their histories differ.
pub fn extended_space_from_system(hs: &HistorySet) -> Result<ExtendedSpace> {
    let mut strands = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut conf = ConflictRelation::default();
    let mut ids = BTreeSet::new();
    for (agent, histories) in hs.per_agent() {
        let mut mine = Vec::new();
        for h in histories.iter().filter(|h| !h.is_empty()) {
            let trace: Vec<SignedTerm> = h.events().iter().map(|e| e.to_term()).collect();
            let id = terms_id(agent, &trace)?;
            if !ids.insert(id.clone()) {
                return Err(Error::MalformedSpace(format!("strand id {id} is ambiguous")));
            }
            assignment.insert(id.clone(), agent.clone());
            for other in &mine {
                conf.insert(StrandId::clone(other), id.clone());
            }
            mine.push(id.clone());
            strands.push(Strand::new(id, trace));
        }
    }
    let space = StrandSpace::from_parts(
        strands,
        hs.agents().cloned().collect(),
        assignment,
        hs.messages(),
    );
    Ok(ExtendedSpace { space, conf })
}

/// How monotone components become strands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StrandLayout {
    /// One strand per component carrying its whole sequence; bundles use
    /// its prefixes.
    #[default]
    Maximal,
    /// One strand per nonempty prefix of every component.
    AllPrefixes,
}

/// Strands for a joint protocol whose agents run monotone specs or unions of
/// them, plus one single receive strand per agent and universe message.
pub fn space_from_monotone(
    jp: &JointProtocol,
    universe: Option<&BTreeSet<Message>>,
    layout: StrandLayout,
) -> Result<StrandSpace> {
    let universe = universe.cloned().unwrap_or_else(|| jp.messages.clone());
    let mut strands = Vec::new();
    let mut assignment = BTreeMap::new();
    for (agent, spec) in &jp.per_agent {
        let parts = spec
            .monotone_components()
            .ok_or_else(|| Error::Protocol(format!("agent {agent} does not run a monotone protocol")))?;
        for (i, seq) in parts.iter().enumerate() {
            let trace: Vec<SignedTerm> = seq.iter().map(|e| e.to_term()).collect();
            let lengths: Vec<usize> = match layout {
                StrandLayout::Maximal if trace.is_empty() => vec![],
                StrandLayout::Maximal => vec![trace.len()],
                StrandLayout::AllPrefixes => (1..=trace.len()).collect(),
            };
            for n in lengths {
                let id = match layout {
                    StrandLayout::Maximal => StrandId::new(&format!("{agent}/{}", i + 1))?,
                    StrandLayout::AllPrefixes => StrandId::new(&format!("{agent}/{}.{n}", i + 1))?,
                };
                assignment.insert(id.clone(), agent.clone());
                strands.push(Strand::new(id, trace[..n].to_vec()));
            }
        }
        for u in &universe {
            let id = StrandId::new(&format!("{agent}/-{u}"))?;
            assignment.insert(id.clone(), agent.clone());
            strands.push(Strand::new(id, vec![SignedTerm::recv(u.clone())]));
        }
    }
    let mut messages = universe;
    messages.extend(jp.messages.iter().cloned());
    Ok(StrandSpace::from_parts(
        strands,
        jp.agents().cloned().collect(),
        assignment,
        messages,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{Event, History};
    use crate::protocols::ProtocolSpec;

    fn ag(s: &str) -> Agent {
        Agent::new(s).unwrap()
    }

    fn traces_of(space: &StrandSpace, agent: &str) -> BTreeSet<String> {
        space
            .strands()
            .iter()
            .filter(|s| space.agent_of(&s.id) == Some(&ag(agent)))
            .map(|s| s.trace.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
            .collect()
    }

    #[test]
    fn trivial_system_gives_empty_space() {
        let hs = HistorySet::new(BTreeMap::from([(ag("a"), BTreeSet::from([History::empty()]))])).unwrap();
        let ext = extended_space_from_system(&hs).unwrap();
        assert!(ext.space.strands().is_empty());
        assert!(ext.conf.is_empty());
    }

    #[test]
    fn r1_strands_and_conflicts() {
        let ext = extended_space_from_system(&fixtures::r1_system()).unwrap();
        let count = |a: &str| traces_of(&ext.space, a).len();
        assert_eq!((count("1"), count("2"), count("3")), (2, 4, 2));
        // Four agent-2 strands pairwise in conflict, plus one pair each for 1 and 3.
        assert_eq!(ext.conf.len(), 6 + 1 + 1);
        assert!(ext.problems().is_empty());
    }

    #[test]
    fn single_history_has_no_conflicts() {
        let sent_u: History = History::new(vec!["sent u".parse().unwrap()]);
        let hs = HistorySet::new(BTreeMap::from([(ag("a"), BTreeSet::from([History::empty(), sent_u]))])).unwrap();
        let ext = extended_space_from_system(&hs).unwrap();
        assert_eq!(ext.space.strands().len(), 1);
        assert_eq!(ext.space.strands()[0].trace[0].to_string(), "+u");
        assert!(ext.conf.is_empty());
    }

    #[test]
    fn smallest_monotone_space() {
        let jp = JointProtocol::new(
            BTreeMap::from([(ag("a"), ProtocolSpec::Monotone(vec!["sent u".parse().unwrap()]))]),
            BTreeSet::new(),
        )
        .unwrap();
        let space = space_from_monotone(&jp, None, StrandLayout::AllPrefixes).unwrap();
        assert_eq!(traces_of(&space, "a"), BTreeSet::from(["+u".to_string(), "-u".to_string()]));
    }

    #[test]
    fn u123_prefix_strands() {
        let jp = fixtures::u123_protocol();
        let space = space_from_monotone(&jp, None, StrandLayout::AllPrefixes).unwrap();
        let expect: BTreeSet<String> = ["+u1", "+u1,-u2", "+u1,-u2,+u3", "-u1", "-u2", "-u3"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(traces_of(&space, "1"), expect);
        assert!(validate_space(&space).is_well_formed());

        let maximal = space_from_monotone(&jp, None, StrandLayout::Maximal).unwrap();
        assert_eq!(traces_of(&maximal, "1").len(), 4);
    }

    #[test]
    fn empty_protocol_gives_receive_strands() {
        let jp = JointProtocol::new(
            BTreeMap::from([(ag("a"), ProtocolSpec::Monotone(vec![])), (ag("b"), ProtocolSpec::Monotone(vec![]))]),
            BTreeSet::from([Message::new("u").unwrap()]),
        )
        .unwrap();
        let space = space_from_monotone(&jp, None, StrandLayout::AllPrefixes).unwrap();
        assert_eq!(space.strands().len(), 2);
        assert!(space.strands().iter().all(|s| s.trace.len() == 1 && !s.trace[0].is_positive()));
    }

    #[test]
    fn tables_are_rejected() {
        let jp = fixtures::nack_protocol();
        assert!(space_from_monotone(&jp, None, StrandLayout::Maximal).is_err());
        let _ = Event::sent(Message::new("u").unwrap());
    }
}
