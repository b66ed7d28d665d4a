use std::path::PathBuf;
use std::process::{Command, Output};

use strandlab::doc::{parse_document, Document, Model};
use strandlab::{Agent, StrandId};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn strandlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strandlab"))
        .args(args)
        .env_remove("STRANDLAB_MAX_STATES")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn validate_well_formed_fixtures() {
    for f in [
        "r1_space.json",
        "r1_extended_space.json",
        "r1_system.json",
        "r1_choice_protocol.json",
        "nack_space.json",
        "nack_protocol.json",
        "nack_system.json",
        "u123_protocol.json",
        "ping_space.json",
        "empty_space.json",
    ] {
        let out = strandlab(&["validate", &fixture(f)]);
        assert_eq!(code(&out), 0, "{f}: {}", stdout(&out));
    }
}

#[test]
fn validate_reports_cross_agent_conflict() {
    let out = strandlab(&["validate", &fixture("invalid/cross_agent_conflict.json")]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("conflict pair spans agents"));
}

#[test]
fn validate_rejects_malformed_document() {
    assert_eq!(code(&strandlab(&["validate", &fixture("invalid/malformed.json")])), 2);
    assert_eq!(code(&strandlab(&["validate", "/nonexistent/file.json"])), 2);
}

#[test]
fn validate_reports_open_history_set() {
    let out = strandlab(&["validate", &fixture("invalid/open_system.json")]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("prefix"));
}

#[test]
fn bundles_include_the_full_exchange() {
    let out = strandlab(&["enumerate", &fixture("r1_space.json"), "--bundles", "--max-nodes", "8"]);
    assert_eq!(code(&out), 0);
    match parse_document(&stdout(&out)).unwrap().into_model().unwrap() {
        Model::Bundles(bundles) => {
            assert!(bundles.iter().any(|b| b.node_count() == 8 && b.edges().len() == 4));
            assert!(bundles.iter().all(|b| b.node_count() <= 8));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn generated_system_keeps_agent_two_short() {
    let out = strandlab(&["enumerate", &fixture("r1_system.json"), "--gen-system", "--horizon", "6"]);
    assert_eq!(code(&out), 0);
    let Model::Runs(runs) = parse_document(&stdout(&out)).unwrap().into_model().unwrap() else {
        panic!("not runs");
    };
    assert_eq!(runs.horizon(), 6);
    let two = Agent::new("2").unwrap();
    let lens: Vec<usize> = runs.histories_of(&two).iter().map(|h| h.len()).collect();
    assert!(lens.iter().all(|&n| n <= 2));
    assert!(lens.contains(&2));
}

#[test]
fn empty_space_translates_to_one_stutter() {
    let out = strandlab(&["enumerate", &fixture("empty_space.json"), "--translate", "--horizon", "3"]);
    assert_eq!(code(&out), 0);
    let Document::Runs(doc) = parse_document(&stdout(&out)).unwrap() else {
        panic!("not runs");
    };
    assert_eq!(doc.runs.len(), 1);
    assert_eq!(doc.runs[0].len(), 4);
}

#[test]
fn chains_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chains.json");
    let out = strandlab(&[
        "enumerate",
        &fixture("ping_space.json"),
        "--chains",
        "--horizon",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let Document::Chains(doc) = parse_document(&text).unwrap() else {
        panic!("not chains");
    };
    assert_eq!(doc.horizon, 2);
    let full = doc.chains.iter().find(|c| {
        c.bundles
            .last()
            .is_some_and(|b| b.heights.values().sum::<usize>() == 2)
    });
    // The chain ends at the bundle with both strands.
    let recv = StrandId::new("recv").unwrap();
    assert_eq!(full.expect("a two-node chain").bundles.last().unwrap().heights[&recv], 1);
    assert_eq!(text, Document::Chains(doc).to_json());
}

#[test]
fn enumerate_misuse_is_a_usage_error() {
    assert_eq!(code(&strandlab(&["enumerate", &fixture("r1_system.json"), "--translate"])), 2);
    assert_eq!(code(&strandlab(&["enumerate", &fixture("r1_space.json"), "--gen-system"])), 2);
    assert_eq!(code(&strandlab(&["enumerate", &fixture("r1_protocol.json"), "--run-protocol"])), 2);
    assert_eq!(code(&strandlab(&["enumerate", &fixture("r1_space.json")])), 2);
    assert_eq!(
        code(&strandlab(&["enumerate", &fixture("r1_space.json"), "--bundles", "--chains"])),
        2
    );
}

#[test]
fn extended_round_trip_holds() {
    let out = strandlab(&["check", "--theorem", "5", &fixture("r1_system.json")]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn natural_space_is_a_strict_superset() {
    let out = strandlab(&[
        "check",
        "--equal",
        &fixture("r1_space.json"),
        &fixture("r1_system.json"),
        "--horizon",
        "8",
    ]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.contains("0 only on the right"), "{text}");
    let witness = text.lines().find(|l| l.starts_with("witness (left only)")).unwrap();
    let last = witness.rsplit(" ; ").next().unwrap();
    let two = last.split(' ').find(|p| p.starts_with("2=")).unwrap();
    assert_eq!(two.matches("sent(").count() + two.matches("recv(").count(), 4, "{two}");
}

#[test]
fn height_bound_on_natural_space() {
    let out = strandlab(&["check", "--lemma", "1", &fixture("r1_space.json"), "--horizon", "5"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn chain_reachability_rejects_conflicts() {
    assert_eq!(code(&strandlab(&["check", "--lemma", "2", &fixture("nack_space.json")])), 0);
    assert_eq!(code(&strandlab(&["check", "--lemma", "2", &fixture("r1_extended_space.json")])), 2);
}

#[test]
fn history_preservation_checks() {
    let natural = strandlab(&[
        "check",
        "--history-preserving",
        &fixture("r1_space.json"),
        &fixture("r1_system.json"),
    ]);
    assert_eq!(code(&natural), 1);
    let counterexample = strandlab(&["check", "--theorem", "3", &fixture("r1_space.json"), &fixture("r1_system.json")]);
    assert_eq!(code(&counterexample), 0);
    let extended = strandlab(&[
        "check",
        "--history-preserving",
        &fixture("r1_extended_space.json"),
        &fixture("r1_system.json"),
    ]);
    assert_eq!(code(&extended), 0, "{}", stdout(&extended));
}

#[test]
fn strand_system_and_message_equivalence_checks() {
    let ok = |args: &[&str]| {
        let out = strandlab(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stdout(&out));
    };
    ok(&["check", "--theorem", "1", &fixture("r1_space.json")]);
    ok(&["check", "--theorem", "4", &fixture("r1_extended_space.json")]);
    ok(&["check", "--theorem", "6", &fixture("nack_protocol.json"), &fixture("u123_protocol.json")]);
    ok(&["check", "--theorem", "2", &fixture("ping_space.json"), &fixture("nack_space.json")]);
    ok(&["check", "--theorem", "7", &fixture("u123_protocol.json"), "--horizon", "5"]);
    assert_eq!(code(&strandlab(&["check", "--theorem", "6", &fixture("r1_space.json")])), 2);
    assert_eq!(code(&strandlab(&["check", "--theorem", "7", &fixture("nack_protocol.json")])), 2);
}

#[test]
fn all_prefix_layout_breaks_the_round_trip() {
    let out = strandlab(&[
        "check",
        "--theorem",
        "7",
        &fixture("u123_protocol.json"),
        "--horizon",
        "4",
        "--layout",
        "all-prefixes",
    ]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
}

#[test]
fn check_usage_errors() {
    assert_eq!(code(&strandlab(&["check", "--theorem", "8", &fixture("r1_space.json")])), 2);
    assert_eq!(code(&strandlab(&["check", "--lemma", "3", &fixture("r1_space.json")])), 2);
    assert_eq!(code(&strandlab(&["check", "--equal", &fixture("r1_space.json")])), 2);
    assert_eq!(code(&strandlab(&["check", &fixture("r1_space.json")])), 2);
    assert_eq!(code(&strandlab(&["check", "--theorem", "5", &fixture("invalid/malformed.json")])), 2);
    assert_eq!(code(&strandlab(&["frobnicate"])), 2);
    assert_eq!(code(&strandlab(&[])), 2);
    assert_eq!(code(&strandlab(&["--help"])), 0);
}

#[test]
fn state_limit_aborts_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_strandlab"))
        .args(["enumerate", &fixture("r1_space.json"), "--translate", "--horizon", "6"])
        .env("STRANDLAB_MAX_STATES", "50")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("STRANDLAB_MAX_STATES"));

    let bad = Command::new(env!("CARGO_BIN_EXE_strandlab"))
        .args(["validate", &fixture("r1_space.json")])
        .env("STRANDLAB_MAX_STATES", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn broadcast_delivery_admits_more_runs() {
    let count = |delivery: &str| {
        let out = strandlab(&[
            "enumerate",
            &fixture("nack_space.json"),
            "--translate",
            "--horizon",
            "3",
            "--delivery",
            delivery,
        ]);
        assert_eq!(code(&out), 0);
        let Document::Runs(doc) = parse_document(&stdout(&out)).unwrap() else {
            panic!("not runs");
        };
        doc.runs.len()
    };
    assert!(count("broadcast") > count("consuming"));
}

#[test]
fn suite_passes() {
    let out = strandlab(&["suite"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
