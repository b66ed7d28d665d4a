//! Property tests over small random spaces and history sets.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use strandlab::doc::{parse_document, Document, Model};
use strandlab::{
    check_mp, enumerate_bundles, extended_space_from_system, extract_histories, generate_system, translate,
    validate_bundle, Agent, Config, Event, History, HistorySet, SignedTerm, Strand, StrandId, StrandSpace,
};

fn term() -> impl Strategy<Value = SignedTerm> {
    (prop::bool::ANY, prop::sample::select(vec!["u", "v"])).prop_map(|(send, m)| {
        let m = m.parse().unwrap();
        if send {
            SignedTerm::send(m)
        } else {
            SignedTerm::recv(m)
        }
    })
}

/// Up to three strands with traces of length 1 to 3, over agents a and b.
fn space() -> impl Strategy<Value = StrandSpace> {
    prop::collection::vec((prop::collection::vec(term(), 1..=3), prop::sample::select(vec!["a", "b"])), 0..=3).prop_map(
        |strands| {
            let mut list = Vec::new();
            let mut assignment = BTreeMap::new();
            for (i, (trace, agent)) in strands.into_iter().enumerate() {
                let id = StrandId::new(&format!("s{i}")).unwrap();
                assignment.insert(id.clone(), Agent::new(agent).unwrap());
                list.push(Strand::new(id, trace));
            }
            StrandSpace::new(list, assignment)
        },
    )
}

fn event() -> impl Strategy<Value = Event> {
    prop::sample::select(vec!["sent u", "recv u", "sent v", "recv v"]).prop_map(|e| e.parse().unwrap())
}

/// Prefix-closed history sets for agents a and b, histories of at most two events.
fn history_set() -> impl Strategy<Value = HistorySet> {
    let per_agent = || prop::collection::vec(prop::collection::vec(event(), 1..=2), 0..=3);
    (per_agent(), per_agent()).prop_map(|(a, b)| {
        let close = |hs: Vec<Vec<Event>>| {
            let mut set = BTreeSet::from([History::empty()]);
            for h in hs {
                for n in 1..=h.len() {
                    set.insert(History::new(h[..n].to_vec()));
                }
            }
            set
        };
        HistorySet::new(BTreeMap::from([(Agent::new("a").unwrap(), close(a)), (Agent::new("b").unwrap(), close(b))]))
            .unwrap()
    })
}

fn cfg() -> Config {
    Config::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumerated_bundles_are_valid(space in space()) {
        let found = enumerate_bundles(&space, None, space.node_count(), &cfg()).unwrap();
        prop_assert!(!found.bundles.is_empty());
        let distinct: BTreeSet<_> = found.bundles.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), found.bundles.len());
        for b in &found.bundles {
            prop_assert!(validate_bundle(&space, b, None, &cfg()).unwrap().is_valid(), "{}", b);
        }
    }

    #[test]
    fn translations_are_strand_systems(space in space()) {
        let runs = translate(&space, None, 3, space.node_count(), &cfg()).unwrap();
        let agents: BTreeSet<Agent> = runs.agents().iter().cloned().collect();
        for r in runs.iter() {
            let mp = check_mp(space.messages(), &agents, &r, &cfg());
            prop_assert!(mp.passes(), "{}", mp);
        }
        let regen = generate_system(&extract_histories(&runs).unwrap(), 3, &cfg()).unwrap();
        prop_assert_eq!(regen, runs);
    }

    #[test]
    fn identity_translation_matches_bundles(space in space()) {
        // Every bundle is reachable within its node count, so that horizon suffices.
        let n = space.node_count();
        let report = strandlab::checks::message_equivalence(&space, n, n, &cfg()).unwrap();
        prop_assert!(report.holds(), "{}", report);
    }

    #[test]
    fn space_documents_round_trip(space in space()) {
        let text = Document::from_space(&space).to_json();
        let back = parse_document(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        match back.into_model().unwrap() {
            Model::Space(s) => prop_assert_eq!(s, space),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn extended_spaces_round_trip(hs in history_set()) {
        let ext = extended_space_from_system(&hs).unwrap();
        prop_assert!(ext.problems().is_empty());
        let t = translate(&ext.space, Some(&ext.conf), 3, ext.space.node_count(), &cfg()).unwrap();
        let g = generate_system(&hs, 3, &cfg()).unwrap();
        prop_assert_eq!(t, g);
    }

    #[test]
    fn system_documents_round_trip(hs in history_set()) {
        let text = Document::from_system(&hs).to_json();
        match parse_document(&text).unwrap().into_model().unwrap() {
            Model::System(back) => prop_assert_eq!(back, hs),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
