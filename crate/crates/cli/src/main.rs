use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use strandlab::checks::{self, CheckReport};
use strandlab::doc::{parse_document, Document, Model};
use strandlab::{
    enumerate_bundles, enumerate_chain_prefixes, fixtures, generate_runs, generate_system,
    systems_equal, translate, ConflictRelation, Config, Delivery, Error, Message, RunSet, StrandLayout,
    StrandSpace,
};

#[derive(Parser)]
#[command(name = "strandlab", version, about = "Strand spaces and strand systems, checked by bounded enumeration")]
struct Cli {
    /// How sends feed receives.
    #[arg(long, global = true, value_enum, default_value_t = DeliveryArg::Consuming)]
    delivery: DeliveryArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeliveryArg {
    /// Every receive consumes its own earlier send.
    Consuming,
    /// One send may feed any number of receives.
    Broadcast,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum LayoutArg {
    #[default]
    Maximal,
    AllPrefixes,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a model document is well formed.
    Validate { path: PathBuf },
    /// Enumerate bundles, chains or runs of a model.
    Enumerate(EnumerateArgs),
    /// Check a property of one or more models.
    Check(CheckArgs),
    /// Run every built-in check on the bundled fixtures.
    Suite,
}

#[derive(Args, Clone, Copy)]
struct Bounds {
    /// Run length, or the number of chain steps.
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    /// Largest bundle considered; defaults to the node count of the space.
    #[arg(long)]
    max_nodes: Option<usize>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("what").required(true).args(["bundles", "chains", "translate", "gen_system", "run_protocol"])))]
struct EnumerateArgs {
    path: PathBuf,
    #[arg(long)]
    bundles: bool,
    #[arg(long)]
    chains: bool,
    #[arg(long)]
    translate: bool,
    #[arg(long)]
    gen_system: bool,
    #[arg(long)]
    run_protocol: bool,
    #[command(flatten)]
    bounds: Bounds,
    /// Write the document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("property").required(true).args(["equal", "history_preserving", "theorem", "lemma"])))]
struct CheckArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// The two inputs yield the same run set.
    #[arg(long)]
    equal: bool,
    /// The space preserves the histories of the runs.
    #[arg(long)]
    history_preserving: bool,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    theorem: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    lemma: Option<u8>,
    #[command(flatten)]
    bounds: Bounds,
    /// Strand layout for spaces built from monotone protocols.
    #[arg(long, value_enum, default_value_t)]
    layout: LayoutArg,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Lib(Error::StateLimit { limit }) => write!(
                f,
                "enumeration exceeded {}={limit}; raise the limit or lower the bounds",
                strandlab::config::MAX_STATES_ENV
            ),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = std::panic::catch_unwind(|| run(cli));
    match result {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(1),
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Outcome {
    let delivery = match cli.delivery {
        DeliveryArg::Consuming => Delivery::Consuming,
        DeliveryArg::Broadcast => Delivery::Broadcast,
    };
    let cfg = Config::from_env()?.with_delivery(delivery);
    match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Enumerate(args) => enumerate(&args, &cfg),
        Command::Check(args) => check(&args, &cfg),
        Command::Suite => suite(&cfg),
    }
}

fn read(path: &Path) -> Result<Document, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text).map_err(|e| Failure::Usage(format!("{}: parse error: {e}", path.display())))
}

fn load(path: &Path) -> Result<Model, Failure> {
    read(path)?
        .into_model()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> Outcome {
    let doc = read(path)?;
    let problems = doc.problems();
    for p in &problems {
        println!("{}: {p}", path.display());
    }
    if problems.is_empty() {
        println!("{}: well-formed {}", path.display(), doc.kind());
    }
    Ok(problems.is_empty())
}

struct SpaceInput {
    space: StrandSpace,
    conf: Option<ConflictRelation>,
}

fn space_input(path: &Path) -> Result<SpaceInput, Failure> {
    match load(path)? {
        Model::Space(space) => Ok(SpaceInput { space, conf: None }),
        Model::ExtendedSpace(e) => Ok(SpaceInput {
            space: e.space,
            conf: Some(e.conf),
        }),
        _ => Err(Failure::Usage(format!("{} is not a space", path.display()))),
    }
}

fn max_nodes(bounds: &Bounds, space: &StrandSpace) -> usize {
    bounds.max_nodes.unwrap_or_else(|| space.node_count())
}

/// The run set a document stands for, with its message universe.
fn runs_of(path: &Path, bounds: &Bounds, cfg: &Config) -> Result<(RunSet, BTreeSet<Message>), Failure> {
    let h = bounds.horizon;
    Ok(match load(path)? {
        Model::Space(s) => (translate(&s, None, h, max_nodes(bounds, &s), cfg)?, s.messages().clone()),
        Model::ExtendedSpace(e) => (
            translate(&e.space, Some(&e.conf), h, max_nodes(bounds, &e.space), cfg)?,
            e.space.messages().clone(),
        ),
        Model::System(hs) => (generate_system(&hs, h, cfg)?, hs.messages()),
        Model::Protocol(jp) => (generate_runs(&jp, h, cfg)?, jp.messages.clone()),
        Model::Runs(r) => {
            let universe = r
                .histories()
                .iter()
                .flat_map(|h| h.events().iter().map(|e| e.message.clone()))
                .collect();
            (r, universe)
        }
        Model::Bundles(_) | Model::Chains(_) => {
            return Err(Failure::Usage(format!("{} does not describe runs", path.display())))
        }
    })
}

fn enumerate(args: &EnumerateArgs, cfg: &Config) -> Outcome {
    let b = &args.bounds;
    let doc = if args.bundles || args.chains {
        let input = space_input(&args.path)?;
        let n = max_nodes(b, &input.space);
        if args.bundles {
            let found = enumerate_bundles(&input.space, input.conf.as_ref(), n, cfg)?;
            Document::from_bundles(n, &found.bundles)
        } else {
            let chains = enumerate_chain_prefixes(&input.space, input.conf.as_ref(), b.horizon, n, cfg)?;
            Document::from_chains(b.horizon, n, &chains)
        }
    } else {
        let model = load(&args.path)?;
        let wanted = if args.translate {
            "space"
        } else if args.gen_system {
            "system"
        } else {
            "protocol"
        };
        let runs = match (wanted, model) {
            ("space", Model::Space(s)) => translate(&s, None, b.horizon, max_nodes(b, &s), cfg)?,
            ("space", Model::ExtendedSpace(e)) => {
                translate(&e.space, Some(&e.conf), b.horizon, max_nodes(b, &e.space), cfg)?
            }
            ("system", Model::System(hs)) => generate_system(&hs, b.horizon, cfg)?,
            ("protocol", Model::Protocol(jp)) => generate_runs(&jp, b.horizon, cfg)?,
            _ => return Err(Failure::Usage(format!("{} is not a {wanted}", args.path.display()))),
        };
        Document::from_runs(&runs)
    };
    let text = doc.to_json();
    match &args.out {
        Some(out) => std::fs::write(out, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn expect_paths(args: &CheckArgs, n: usize, what: &str) -> Result<(), Failure> {
    if args.paths.len() == n {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} takes {n} input(s), got {}", args.paths.len())))
    }
}

fn print_all(reports: &[CheckReport]) -> bool {
    for r in reports {
        print!("{r}");
    }
    reports.iter().all(CheckReport::holds)
}

fn check(args: &CheckArgs, cfg: &Config) -> Outcome {
    let b = &args.bounds;
    if args.equal {
        expect_paths(args, 2, "--equal")?;
        let (left, _) = runs_of(&args.paths[0], b, cfg)?;
        let (right, _) = runs_of(&args.paths[1], b, cfg)?;
        let eq = systems_equal(&left, &right)?;
        println!("left: {} runs, right: {} runs at horizon {}", left.len(), right.len(), b.horizon);
        print!("{eq}");
        return Ok(eq.equal());
    }
    if args.history_preserving {
        expect_paths(args, 2, "--history-preserving")?;
        let input = space_input(&args.paths[0])?;
        let (runs, _) = runs_of(&args.paths[1], b, cfg)?;
        let n = max_nodes(b, &input.space);
        let hp = strandlab::check_history_preserving(&input.space, input.conf.as_ref(), &runs, n, cfg)?;
        print!("{hp}");
        return Ok(hp.holds());
    }
    let mut reports = Vec::new();
    match (args.theorem, args.lemma) {
        (Some(1 | 4), _) => {
            for p in &args.paths {
                space_input(p)?;
                let (runs, universe) = runs_of(p, b, cfg)?;
                reports.push(checks::strand_system_property(&runs, &universe, cfg)?);
            }
        }
        (Some(6), _) => {
            for p in &args.paths {
                let Model::Protocol(_) = load(p)? else {
                    return Err(Failure::Usage(format!("{} is not a protocol", p.display())));
                };
                let (runs, universe) = runs_of(p, b, cfg)?;
                reports.push(checks::strand_system_property(&runs, &universe, cfg)?);
            }
        }
        (Some(2), _) => {
            for p in &args.paths {
                let input = space_input(p)?;
                let n = max_nodes(b, &input.space);
                reports.push(checks::message_equivalence(&input.space, b.horizon, n, cfg)?);
            }
        }
        (Some(3), _) => {
            expect_paths(args, 2, "this check")?;
            let input = space_input(&args.paths[0])?;
            let (runs, _) = runs_of(&args.paths[1], b, cfg)?;
            let n = max_nodes(b, &input.space);
            reports.push(checks::not_history_preserving(&input.space, input.conf.as_ref(), &runs, n, cfg)?);
        }
        (Some(5), _) => {
            for p in &args.paths {
                let Model::System(hs) = load(p)? else {
                    return Err(Failure::Usage(format!("{} is not a system", p.display())));
                };
                reports.push(checks::extended_round_trip(&hs, b.horizon, cfg)?);
            }
        }
        (Some(7), _) => {
            let layout = match args.layout {
                LayoutArg::Maximal => StrandLayout::Maximal,
                LayoutArg::AllPrefixes => StrandLayout::AllPrefixes,
            };
            for p in &args.paths {
                let Model::Protocol(jp) = load(p)? else {
                    return Err(Failure::Usage(format!("{} is not a protocol", p.display())));
                };
                reports.push(checks::monotone_round_trip(&jp, b.horizon, layout, cfg)?);
            }
        }
        (None, Some(k)) => {
            for p in &args.paths {
                let input = space_input(p)?;
                let n = max_nodes(b, &input.space);
                reports.push(if k == 1 {
                    checks::height_bound(&input.space, input.conf.as_ref(), b.horizon, n, cfg)?
                } else {
                    checks::chain_reachability(&input.space, input.conf.as_ref(), n, cfg)?
                });
            }
        }
        _ => return Err(Failure::Usage("choose one property to check".into())),
    }
    Ok(print_all(&reports))
}

fn suite(cfg: &Config) -> Outcome {
    let ext_nack = strandlab::extended_space_from_system(&fixtures::nack_system())?;
    let r1_ext = fixtures::r1_extended_space();
    let u123 = space_from(fixtures::u123_protocol())?;
    let spaces: Vec<(&str, StrandSpace, Option<ConflictRelation>)> = vec![
        ("ping", fixtures::ping_space(), None),
        ("r1", fixtures::r1_space(), None),
        ("nack", fixtures::nack_space(), None),
        ("r1 extended", r1_ext.space.clone(), Some(r1_ext.conf.clone())),
        ("nack extended", ext_nack.space.clone(), Some(ext_nack.conf.clone())),
        ("u123 monotone", u123, None),
    ];
    let mut lines: Vec<(String, bool)> = Vec::new();
    let mut record = |name: &str, r: CheckReport| {
        lines.push((format!("{name}: {}", r.title), r.holds()));
    };
    for (name, space, _) in spaces.iter().take(3) {
        record(name, checks::message_equivalence(space, 4, 8, cfg)?);
    }
    for (name, space, conf) in &spaces {
        let n = space.node_count().min(8);
        record(name, checks::height_bound(space, conf.as_ref(), 5, n, cfg)?);
        if conf.is_none() {
            record(name, checks::chain_reachability(space, None, n, cfg)?);
        }
        let runs = translate(space, conf.as_ref(), 6, space.node_count(), cfg)?;
        record(name, checks::strand_system_property(&runs, space.messages(), cfg)?);
    }
    for (name, jp) in [
        ("u123", fixtures::u123_protocol()),
        ("nack", fixtures::nack_protocol()),
        ("r1 choice", fixtures::r1_choice_protocol()),
    ] {
        let runs = generate_runs(&jp, 6, cfg)?;
        record(name, checks::strand_system_property(&runs, &jp.messages, cfg)?);
    }
    let r1_runs = generate_system(&fixtures::r1_system(), 6, cfg)?;
    record("r1", checks::not_history_preserving(&fixtures::r1_space(), None, &r1_runs, 8, cfg)?);
    record("r1", checks::extended_round_trip(&fixtures::r1_system(), 5, cfg)?);
    record("nack", checks::extended_round_trip(&fixtures::nack_system(), 5, cfg)?);
    record("u123", checks::monotone_round_trip(&fixtures::u123_protocol(), 6, StrandLayout::Maximal, cfg)?);

    let naive = translate(&fixtures::nack_space(), None, 6, fixtures::nack_space().node_count(), cfg)?;
    let eq = systems_equal(&naive, &generate_runs(&fixtures::nack_protocol(), 6, cfg)?)?;
    lines.push(("nack: natural space differs from the protocol's runs".into(), !eq.equal()));

    for (line, ok) in &lines {
        println!("{} {line}", if *ok { "PASS" } else { "FAIL" });
    }
    Ok(lines.iter().all(|(_, ok)| *ok))
}

fn space_from(jp: strandlab::JointProtocol) -> Result<StrandSpace, Failure> {
    Ok(strandlab::space_from_monotone(&jp, None, StrandLayout::Maximal)?)
}
