//! Strand spaces, bundles and chains, run-based strand systems, protocols,
//! and the translations between them, checked by bounded enumeration.

pub mod bundles;
pub mod chains;
pub mod checks;
pub mod config;
pub mod constructions;
pub mod doc;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod protocols;
pub mod systems;

mod engine;
mod index;
mod runset;

pub use bundles::{
    bundle_height, enumerate_bundles, message_equivalent, strand_height, validate_bundle,
    validate_conflicts, Axiom, Bundle, BundleReport, ConflictRelation,
};
pub use chains::{check_step, enumerate_chain_prefixes, hist, run_from_chain, translate, ChainPrefix, StepWitness};
pub use config::{Bijection, Config, Delivery};
pub use constructions::{extended_space_from_system, space_from_monotone, ExtendedSpace, StrandLayout};
pub use error::{Error, Result};
pub use model::{
    term_of, validate_space, Agent, Event, EventKind, GlobalState, History, Message, Node, Sign,
    SignedTerm, Strand, StrandId, StrandSpace,
};
pub use protocols::{
    eval_protocol, generate_runs, is_monotone_realization, tau_step, Action, JointProtocol, ProtocolSpec,
};
pub use systems::{
    check_history_preserving, check_mp, extract_histories, generate_system, systems_equal, HistorySet,
    RunPrefix, RunSet,
};
