//! JSON model documents, tagged by a top-level `kind`.
//!
//! Parsing checks syntax and shape only; [`Document::problems`] reports
//! semantic issues and [`Document::into_model`] builds library values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bundles::{validate_conflicts, Bundle, ConflictRelation};
use crate::chains::ChainPrefix;
use crate::config::Config;
use crate::constructions::ExtendedSpace;
use crate::error::{Error, Result};
use crate::model::{validate_space, Agent, Event, GlobalState, History, Message, Node, SignedTerm, Strand, StrandId, StrandSpace};
use crate::protocols::{no_op, Action, JointProtocol, ProtocolSpec};
use crate::systems::{check_mp, HistorySet, RunPrefix, RunSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Document {
    Space(SpaceDoc),
    ExtendedSpace(SpaceDoc),
    System(SystemDoc),
    Protocol(ProtocolDoc),
    Runs(RunsDoc),
    Bundles(BundlesDoc),
    Chains(ChainsDoc),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub messages: Vec<Message>,
    pub agents: Vec<Agent>,
    pub strands: Vec<StrandDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<Vec<(StrandId, StrandId)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrandDoc {
    pub id: StrandId,
    pub agent: Agent,
    pub trace: Vec<SignedTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub agents: Vec<Agent>,
    pub histories: BTreeMap<Agent, Vec<Vec<Event>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub agents: BTreeMap<Agent, SpecDoc>,
    #[serde(default)]
    pub messages: Vec<Message>,
}

/// Exactly one of `monotone`, `union` and `table`; `default` goes with a table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<Vec<Event>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union: Option<Vec<SpecDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<EntryDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<Action>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub history: Vec<Event>,
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunsDoc {
    pub horizon: usize,
    pub runs: Vec<Vec<BTreeMap<Agent, Vec<Event>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDoc {
    pub heights: BTreeMap<StrandId, usize>,
    pub edges: Vec<((StrandId, usize), (StrandId, usize))>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundlesDoc {
    pub max_nodes: usize,
    pub bundles: Vec<BundleDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    pub bundles: Vec<BundleDoc>,
    /// Per step, the event each agent appended, or null.
    pub extensions: Vec<BTreeMap<Agent, Option<Event>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainsDoc {
    pub horizon: usize,
    pub max_nodes: usize,
    pub chains: Vec<ChainDoc>,
}

/// Library values a document stands for.
#[derive(Clone, Debug)]
pub enum Model {
    Space(StrandSpace),
    ExtendedSpace(ExtendedSpace),
    System(HistorySet),
    Protocol(JointProtocol),
    Runs(RunSet),
    Bundles(Vec<Bundle>),
    Chains(Vec<ChainDoc>),
}

pub fn parse_document(text: &str) -> Result<Document> {
    Ok(serde_json::from_str(text)?)
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Space(_) => "space",
            Document::ExtendedSpace(_) => "extended-space",
            Document::System(_) => "system",
            Document::Protocol(_) => "protocol",
            Document::Runs(_) => "runs",
            Document::Bundles(_) => "bundles",
            Document::Chains(_) => "chains",
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("documents serialize");
        out.push('\n');
        out
    }

    /// Semantic problems; empty for a well-formed document.
    pub fn problems(&self) -> Vec<String> {
        match self {
            Document::Space(d) | Document::ExtendedSpace(d) => {
                let (space, conf) = space_from_doc(d);
                let mut out: Vec<String> = validate_space(&space).problems.iter().map(ToString::to_string).collect();
                if let Some(conf) = conf {
                    out.extend(validate_conflicts(&space, &conf).iter().map(ToString::to_string));
                }
                let mut seen = BTreeSet::new();
                for a in &d.agents {
                    if !seen.insert(a) {
                        out.push(format!("agent {a} declared twice"));
                    }
                }
                out
            }
            Document::System(d) => system_from_doc(d).err().map(|e| vec![e.to_string()]).unwrap_or_default(),
            Document::Protocol(d) => match protocol_from_doc(d) {
                Err(e) => vec![e.to_string()],
                Ok(jp) => {
                    let declared: BTreeSet<Message> = d.messages.iter().cloned().collect();
                    jp.messages
                        .difference(&declared)
                        .map(|m| format!("undeclared message {m}"))
                        .collect()
                }
            },
            Document::Runs(d) => match runs_from_doc(d) {
                Err(e) => vec![e.to_string()],
                Ok(runs) => {
                    let universe: BTreeSet<Message> = runs
                        .histories()
                        .iter()
                        .flat_map(|h| h.events().iter().map(|e| e.message.clone()))
                        .collect();
                    let agents: BTreeSet<Agent> = runs.agents().iter().cloned().collect();
                    let cfg = Config::default();
                    runs.iter()
                        .filter_map(|r| {
                            let mp = check_mp(&universe, &agents, &r, &cfg);
                            (!mp.passes()).then(|| format!("run violates the message-passing conditions: {}", mp.to_string().trim_end().replace('\n', "; ")))
                        })
                        .take(1)
                        .collect()
                }
            },
            Document::Bundles(_) | Document::Chains(_) => Vec::new(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        let problems = self.problems();
        if let Some(p) = problems.first() {
            return Err(Error::Document(p.clone()));
        }
        Ok(match self {
            Document::Space(d) => match space_from_doc(&d) {
                (space, None) => Model::Space(space),
                (space, Some(conf)) => Model::ExtendedSpace(ExtendedSpace { space, conf }),
            },
            Document::ExtendedSpace(d) => {
                let (space, conf) = space_from_doc(&d);
                Model::ExtendedSpace(ExtendedSpace {
                    space,
                    conf: conf.unwrap_or_default(),
                })
            }
            Document::System(d) => Model::System(system_from_doc(&d)?),
            Document::Protocol(d) => Model::Protocol(protocol_from_doc(&d)?),
            Document::Runs(d) => Model::Runs(runs_from_doc(&d)?),
            Document::Bundles(d) => Model::Bundles(d.bundles.iter().map(bundle_from_doc).collect()),
            Document::Chains(d) => Model::Chains(d.chains),
        })
    }

    pub fn from_space(space: &StrandSpace) -> Self {
        Document::Space(space_doc(space, None))
    }

    pub fn from_extended(ext: &ExtendedSpace) -> Self {
        Document::ExtendedSpace(space_doc(&ext.space, Some(&ext.conf)))
    }

    pub fn from_system(hs: &HistorySet) -> Self {
        Document::System(SystemDoc {
            agents: hs.agents().cloned().collect(),
            histories: hs
                .per_agent()
                .iter()
                .map(|(a, set)| (a.clone(), set.iter().map(|h| h.events().to_vec()).collect()))
                .collect(),
        })
    }

    pub fn from_protocol(jp: &JointProtocol) -> Self {
        Document::Protocol(ProtocolDoc {
            agents: jp.per_agent.iter().map(|(a, p)| (a.clone(), spec_doc(p))).collect(),
            messages: jp.messages.iter().cloned().collect(),
        })
    }

    pub fn from_runs(runs: &RunSet) -> Self {
        Document::Runs(RunsDoc {
            horizon: runs.horizon(),
            runs: runs
                .iter()
                .map(|r| {
                    r.states
                        .iter()
                        .map(|g| g.locals().iter().map(|(a, h)| (a.clone(), h.events().to_vec())).collect())
                        .collect()
                })
                .collect(),
        })
    }

    pub fn from_bundles(max_nodes: usize, bundles: &[Bundle]) -> Self {
        Document::Bundles(BundlesDoc {
            max_nodes,
            bundles: bundles.iter().map(bundle_doc).collect(),
        })
    }

    pub fn from_chains(horizon: usize, max_nodes: usize, chains: &[ChainPrefix]) -> Self {
        Document::Chains(ChainsDoc {
            horizon,
            max_nodes,
            chains: chains
                .iter()
                .map(|c| ChainDoc {
                    bundles: c.bundles.iter().map(bundle_doc).collect(),
                    extensions: c
                        .witnesses
                        .iter()
                        .map(|w| w.extensions.iter().map(|(a, e)| (a.clone(), e.as_ref().map(|(_, e)| e.clone()))).collect())
                        .collect(),
                })
                .collect(),
        })
    }
}

fn space_doc(space: &StrandSpace, conf: Option<&ConflictRelation>) -> SpaceDoc {
    SpaceDoc {
        messages: space.messages().iter().cloned().collect(),
        agents: space.agents().iter().cloned().collect(),
        strands: space
            .strands()
            .iter()
            .map(|s| StrandDoc {
                id: s.id.clone(),
                agent: space.agent_of(&s.id).cloned().expect("assigned strand"),
                trace: s.trace.clone(),
            })
            .collect(),
        conflicts: conf.map(|c| c.pairs().map(|(a, b)| (a.clone(), b.clone())).collect()),
    }
}

fn space_from_doc(d: &SpaceDoc) -> (StrandSpace, Option<ConflictRelation>) {
    let strands = d.strands.iter().map(|s| Strand::new(s.id.clone(), s.trace.clone())).collect();
    let assignment = d.strands.iter().map(|s| (s.id.clone(), s.agent.clone())).collect();
    let space = StrandSpace::from_parts(
        strands,
        d.agents.iter().cloned().collect(),
        assignment,
        d.messages.iter().cloned().collect(),
    );
    let conf = d.conflicts.as_ref().map(|pairs| ConflictRelation::new(pairs.iter().cloned()));
    (space, conf)
}

fn system_from_doc(d: &SystemDoc) -> Result<HistorySet> {
    let declared: BTreeSet<&Agent> = d.agents.iter().collect();
    if let Some(a) = d.histories.keys().find(|a| !declared.contains(a)) {
        return Err(Error::HistorySet(format!("histories given for undeclared agent {a}")));
    }
    let mut per_agent = BTreeMap::new();
    for a in &d.agents {
        let list = d
            .histories
            .get(a)
            .ok_or_else(|| Error::HistorySet(format!("no histories for agent {a}")))?;
        let set: BTreeSet<History> = list.iter().map(|h| History::new(h.clone())).collect();
        if set.len() != list.len() {
            return Err(Error::HistorySet(format!("V_{a} lists a history twice")));
        }
        per_agent.insert(a.clone(), set);
    }
    HistorySet::new(per_agent)
}

fn spec_doc(p: &ProtocolSpec) -> SpecDoc {
    match p {
        ProtocolSpec::Monotone(seq) => SpecDoc {
            monotone: Some(seq.clone()),
            ..SpecDoc::default()
        },
        ProtocolSpec::Union(parts) => SpecDoc {
            union: Some(parts.iter().map(spec_doc).collect()),
            ..SpecDoc::default()
        },
        ProtocolSpec::Table { entries, default } => SpecDoc {
            table: Some(
                entries
                    .iter()
                    .map(|(h, set)| EntryDoc {
                        history: h.events().to_vec(),
                        actions: set.iter().cloned().collect(),
                    })
                    .collect(),
            ),
            default: Some(default.iter().cloned().collect()),
            ..SpecDoc::default()
        },
    }
}

fn spec_from_doc(d: &SpecDoc) -> Result<ProtocolSpec> {
    let given = [d.monotone.is_some(), d.union.is_some(), d.table.is_some()]
        .iter()
        .filter(|&&x| x)
        .count();
    if given != 1 {
        return Err(Error::Protocol("a spec has exactly one of monotone, union, table".into()));
    }
    if d.default.is_some() && d.table.is_none() {
        return Err(Error::Protocol("default is only allowed with a table".into()));
    }
    let spec = if let Some(seq) = &d.monotone {
        ProtocolSpec::Monotone(seq.clone())
    } else if let Some(parts) = &d.union {
        ProtocolSpec::Union(parts.iter().map(spec_from_doc).collect::<Result<_>>()?)
    } else {
        let entries = d.table.as_ref().expect("counted above");
        let default = match &d.default {
            Some(list) => list.iter().cloned().collect(),
            None => no_op(),
        };
        ProtocolSpec::Table {
            entries: entries
                .iter()
                .map(|e| (History::new(e.history.clone()), e.actions.iter().cloned().collect()))
                .collect(),
            default,
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn protocol_from_doc(d: &ProtocolDoc) -> Result<JointProtocol> {
    let per_agent = d
        .agents
        .iter()
        .map(|(a, s)| Ok((a.clone(), spec_from_doc(s)?)))
        .collect::<Result<_>>()?;
    JointProtocol::new(per_agent, d.messages.iter().cloned().collect())
}

fn runs_from_doc(d: &RunsDoc) -> Result<RunSet> {
    let agents: BTreeSet<Agent> = d
        .runs
        .iter()
        .flatten()
        .flat_map(|g| g.keys().cloned())
        .collect();
    let prefixes = d.runs.iter().map(|states| {
        RunPrefix::new(
            states
                .iter()
                .map(|g| GlobalState::new(g.iter().map(|(a, h)| (a.clone(), History::new(h.clone()))).collect()))
                .collect(),
        )
    });
    let set = RunSet::new(d.horizon, agents, prefixes)?;
    if set.len() != d.runs.len() {
        return Err(Error::RunShape("a run is listed twice".into()));
    }
    Ok(set)
}

fn bundle_doc(b: &Bundle) -> BundleDoc {
    BundleDoc {
        heights: b.heights().clone(),
        edges: b
            .edges()
            .iter()
            .map(|(f, t)| ((f.strand.clone(), f.index), (t.strand.clone(), t.index)))
            .collect(),
    }
}

fn bundle_from_doc(d: &BundleDoc) -> Bundle {
    Bundle::from_parts(
        d.heights.clone(),
        d.edges
            .iter()
            .map(|((s, i), (t, j))| (Node::new(s.clone(), *i), Node::new(t.clone(), *j)))
            .collect(),
    )
}

/// Built-in fixture documents, keyed by file stem.
pub fn fixture_documents() -> Vec<(&'static str, Document)> {
    use crate::fixtures as f;
    vec![
        ("empty_space", Document::from_space(&f::empty_space())),
        ("ping_space", Document::from_space(&f::ping_space())),
        ("r1_space", Document::from_space(&f::r1_space())),
        ("r1_extended_space", Document::from_extended(&f::r1_extended_space())),
        ("r1_system", Document::from_system(&f::r1_system())),
        ("r1_choice_protocol", Document::from_protocol(&f::r1_choice_protocol())),
        ("nack_space", Document::from_space(&f::nack_space())),
        ("nack_system", Document::from_system(&f::nack_system())),
        ("nack_protocol", Document::from_protocol(&f::nack_protocol())),
        ("u123_protocol", Document::from_protocol(&f::u123_protocol())),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::path::PathBuf;

    fn fixture_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
    }

    #[test]
    fn fixture_files_match_builtins() {
        let write = std::env::var_os("STRANDLAB_WRITE_FIXTURES").is_some();
        for (name, doc) in fixture_documents() {
            let path = fixture_dir().join(format!("{name}.json"));
            let text = doc.to_json();
            if write {
                std::fs::write(&path, &text).unwrap();
            }
            let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
            assert_eq!(on_disk, text, "{name} is stale");
        }
    }

    #[test]
    fn documents_round_trip() {
        for (name, doc) in fixture_documents() {
            let text = doc.to_json();
            let parsed = parse_document(&text).unwrap();
            assert_eq!(parsed, doc, "{name}");
            assert_eq!(parsed.to_json(), text, "{name}");
            assert!(parsed.problems().is_empty(), "{name}: {:?}", parsed.problems());
        }
    }

    #[test]
    fn models_round_trip() {
        let doc = Document::from_space(&fixtures::r1_space());
        match doc.into_model().unwrap() {
            Model::Space(s) => assert_eq!(s, fixtures::r1_space()),
            other => panic!("{other:?}"),
        }
        match Document::from_protocol(&fixtures::nack_protocol()).into_model().unwrap() {
            Model::Protocol(jp) => assert_eq!(jp, fixtures::nack_protocol()),
            other => panic!("{other:?}"),
        }
        match Document::from_system(&fixtures::r1_system()).into_model().unwrap() {
            Model::System(hs) => assert_eq!(hs, fixtures::r1_system()),
            other => panic!("{other:?}"),
        }
        let runs = crate::chains::translate(&fixtures::ping_space(), None, 2, 2, &Config::default()).unwrap();
        let text = Document::from_runs(&runs).to_json();
        match parse_document(&text).unwrap().into_model().unwrap() {
            Model::Runs(back) => assert_eq!(back, runs),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_and_invalid_documents() {
        assert!(parse_document("{").is_err());
        assert!(parse_document(r#"{"kind":"space","messages":[]}"#).is_err());
        assert!(parse_document(r#"{"kind":"nonsense"}"#).is_err());
        let bad_term = r#"{"kind":"space","messages":["u"],"agents":["a"],"strands":[{"id":"s","agent":"a","trace":["*u"]}]}"#;
        assert!(parse_document(bad_term).is_err());

        let cross = r#"{"kind":"space","messages":["u"],"agents":["a","b"],
            "strands":[{"id":"s","agent":"a","trace":["+u"]},{"id":"t","agent":"b","trace":["-u"]}],
            "conflicts":[["s","t"]]}"#;
        let doc = parse_document(cross).unwrap();
        assert!(doc.problems()[0].contains("conflict pair spans agents"));

        let undeclared = r#"{"kind":"space","messages":[],"agents":["a"],"strands":[{"id":"s","agent":"a","trace":["+u"]}]}"#;
        assert!(!parse_document(undeclared).unwrap().problems().is_empty());

        let open = r#"{"kind":"system","agents":["a"],"histories":{"a":[[],["sent u","sent v"]]}}"#;
        assert!(!parse_document(open).unwrap().problems().is_empty());
    }
}
