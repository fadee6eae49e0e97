//! Command-line surface.
//!
//! Five subcommands: `allocate` runs a deterministic mechanism on an
//! instance file, `rsdq` computes the uniform-ordering lottery exactly or
//! by sampling, `audit` searches for property violations on an instance or
//! an exhaustive profile grid, `dominance` compares two probability
//! matrices, and `find-manipulation` hunts for a single profitable lie.
//!
//! Exit codes: 0 when everything holds or output was produced, 2 when a
//! violation witness was found, 1 on usage, validation, or budget errors.
//! Reports go to stdout as JSON and are byte-identical across runs with
//! the same inputs and seed; `--timing` adds a wall-clock field at the
//! cost of that guarantee.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::axioms::{
    self, find_bossiness, find_bossiness_at, find_group_manipulation_capped,
    find_manipulation_capped, find_manipulation_grid, find_neutrality_violation,
    find_neutrality_violation_at, find_rand_manipulation_capped, find_reallocation_capped,
    pareto_c_efficient_capped, LexProfiles, ParetoPrefs, SearchMode, DEFAULT_SEARCH_CAP,
};
use crate::error::{Error, Result};
use crate::instance::{build_mechanism, sha256_hex, InstanceFile, Labels, MatrixFile, MechanismFile};
use crate::mechanisms::{
    build_identical_profile, build_identical_profile_seq, AgentOrdering, Mechanism, MechanismSpec,
};
use crate::model::{AgentId, PickingSequence, Quota};
use crate::prefs::{GeneralSetPref, LexProfile};
use crate::randomized::{
    envy_witnesses, equal_treatment_witnesses, ld_dominates, ld_prefers, ordering_count,
    rsdq_exact_capped, rsdq_sample, sd_dominates, DEFAULT_ENUMERATION_CAP,
};
use crate::rational::Rational;
use crate::report::{
    self, allocation_bundles, AgentDominanceOut, AllocateBody, AuditBody, DominanceBody,
    IdenticalProfileOut, InstanceMeta, ManipulationBody, PropertyOut, Report, RsdqExactBody,
    RsdqSampleBody,
};

#[derive(Parser)]
#[command(name = "qmech", version, about = "Quota mechanisms: allocation, lotteries, audits")]
struct Cli {
    /// Add wall-clock milliseconds to the report (breaks byte-identity).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a deterministic mechanism on an instance file.
    Allocate(AllocateArgs),
    /// Exact or sampled uniform-ordering lottery probabilities.
    Rsdq(RsdqArgs),
    /// Search for property violations on an instance or a profile grid.
    Audit(AuditArgs),
    /// Compare two probability matrices under a preference profile.
    Dominance(DominanceArgs),
    /// Search one instance for a single profitable lie.
    #[command(name = "find-manipulation")]
    FindManipulation(FindManipulationArgs),
}

#[derive(Args)]
struct MechanismArgs {
    /// sd | sequential | interleave | bossy | imposed | rsdq
    #[arg(long)]
    mechanism: Option<String>,
    /// Dictator order as comma-separated agent labels (sd).
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// Picking sequence as comma-separated agent labels (interleave).
    #[arg(long, value_delimiter = ',')]
    sequence: Option<Vec<String>>,
    /// Positional bundle sizes, e.g. 2,1,1. Overrides the instance file.
    #[arg(long, value_delimiter = ',')]
    quota: Option<Vec<usize>>,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    mech: MechanismArgs,
    /// Also construct the identical-rankings profile that reproduces the
    /// allocation, and check that it does.
    #[arg(long)]
    identical_profile: bool,
}

#[derive(Args)]
struct RsdqArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Positional bundle sizes, e.g. 2,1,1. Overrides the instance file.
    #[arg(long, value_delimiter = ',')]
    quota: Option<Vec<usize>>,
    /// Enumerate every dictator ordering (the default).
    #[arg(long, conflicts_with = "sample")]
    exact: bool,
    /// Estimate by this many sampled orderings instead of enumerating.
    #[arg(long)]
    sample: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Include the full lottery support (every ordering and its outcome).
    #[arg(long)]
    support: bool,
    /// Also write the matrix as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Enumeration budget for exact mode.
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args)]
struct AuditArgs {
    /// Audit the single profile in this file.
    #[arg(long, conflicts_with_all = ["agents", "objects"])]
    instance: Option<PathBuf>,
    /// Grid mode: audit every profile with this many agents...
    #[arg(long, requires = "objects")]
    agents: Option<usize>,
    /// ...and this many objects.
    #[arg(long, requires = "agents")]
    objects: Option<usize>,
    #[command(flatten)]
    mech: MechanismArgs,
    /// Comma-separated subset of sp, nonbossy, neutral, pareto, groupsp,
    /// realloc, envyfree, ete. Defaults by mechanism kind.
    #[arg(long, value_delimiter = ',')]
    properties: Option<Vec<String>>,
    /// Evaluation budget per property search.
    #[arg(long)]
    cap: Option<u64>,
    /// Largest coalition size for groupsp and realloc.
    #[arg(long, default_value_t = 2)]
    max_coalition: usize,
    /// Check this many random profiles instead of the whole grid.
    #[arg(long)]
    sample: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct DominanceArgs {
    #[arg(long)]
    matrix_a: PathBuf,
    #[arg(long)]
    matrix_b: PathBuf,
    /// Instance file providing the preference profile and labels.
    #[arg(long)]
    instance: PathBuf,
    /// ld (downward-lexicographic) or sd (stochastic dominance).
    #[arg(long, default_value = "ld")]
    relation: String,
}

#[derive(Args)]
struct FindManipulationArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    mech: MechanismArgs,
    /// Evaluation budget.
    #[arg(long)]
    cap: Option<u64>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let started = Instant::now();
    match dispatch(&cli, started) {
        Ok(exit) => exit,
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::BudgetExceeded { .. }) {
                eprintln!(
                    "hint: raise --cap, shrink the instance, or use --sample where available"
                );
            }
            1
        }
    }
}

fn dispatch(cli: &Cli, started: Instant) -> Result<i32> {
    match &cli.command {
        Command::Allocate(args) => cmd_allocate(args, cli.timing, started),
        Command::Rsdq(args) => cmd_rsdq(args, cli.timing, started),
        Command::Audit(args) => cmd_audit(args, cli.timing, started),
        Command::Dominance(args) => cmd_dominance(args, cli.timing, started),
        Command::FindManipulation(args) => cmd_find_manipulation(args, cli.timing, started),
    }
}

fn emit<T: serde::Serialize + serde::de::DeserializeOwned>(
    mut report: Report<T>,
    timing: bool,
    started: Instant,
) {
    if timing {
        report.timing_ms = Some(started.elapsed().as_millis() as u64);
    }
    println!("{}", report.to_json_pretty());
}

fn file_meta(path: &Path, sha256: String) -> InstanceMeta {
    InstanceMeta {
        path: Some(path.display().to_string()),
        sha256,
    }
}

fn grid_meta(agents: usize, objects: usize) -> InstanceMeta {
    InstanceMeta {
        path: None,
        sha256: sha256_hex(format!("grid:agents={agents};objects={objects}").as_bytes()),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInstance(msg.into())
}

/// What a mechanism flag set resolves to.
enum ResolvedMech {
    Det(MechanismSpec),
    Rsdq(Quota),
    /// Serial dictatorship with no fixed order: audit them all.
    AllSerialOrders(Quota),
}

impl ResolvedMech {
    fn kind(&self) -> &'static str {
        match self {
            ResolvedMech::Det(spec) => spec.kind(),
            ResolvedMech::Rsdq(_) => "rsdq",
            ResolvedMech::AllSerialOrders(_) => "sd",
        }
    }
}

fn file_mech_kind(file: &MechanismFile) -> &'static str {
    match file {
        MechanismFile::Serial { .. } => "sd",
        MechanismFile::Sequential { .. } => "sequential",
        MechanismFile::Interleave { .. } => "interleave",
        MechanismFile::Bossy {} => "bossy",
        MechanismFile::Imposed { .. } => "imposed",
    }
}

fn resolve_quota(args: &MechanismArgs, file: Option<&InstanceFile>) -> Option<Quota> {
    args.quota
        .clone()
        .map(Quota::new)
        .or_else(|| file.and_then(|f| f.quota()))
}

fn resolve_mechanism(
    args: &MechanismArgs,
    file: Option<&InstanceFile>,
    labels: &Labels,
) -> Result<ResolvedMech> {
    let file_mech = file.and_then(|f| f.mechanism.as_ref());
    let kind = match (&args.mechanism, file_mech) {
        (Some(k), _) => k.as_str(),
        (None, Some(m)) => file_mech_kind(m),
        (None, None) => {
            return Err(invalid(
                "no mechanism: pass --mechanism or add one to the instance file",
            ))
        }
    };
    let quota = resolve_quota(args, file);
    let need_quota = || {
        quota
            .clone()
            .ok_or_else(|| invalid("this mechanism needs --quota or a quota in the instance file"))
    };
    let agents_from = |labels_list: &[String]| -> Result<Vec<AgentId>> {
        labels_list.iter().map(|l| labels.agent(l)).collect()
    };
    let resolved = match kind {
        "rsdq" => ResolvedMech::Rsdq(need_quota()?),
        "sd" => {
            let order = match (&args.order, file_mech) {
                (Some(o), _) => Some(AgentOrdering::new(agents_from(o)?)?),
                (None, Some(MechanismFile::Serial { order })) => {
                    Some(AgentOrdering::new(agents_from(order)?)?)
                }
                _ => None,
            };
            match order {
                Some(order) => ResolvedMech::Det(MechanismSpec::SerialDictatorQuota {
                    order,
                    quota: need_quota()?,
                }),
                None => ResolvedMech::AllSerialOrders(need_quota()?),
            }
        }
        "sequential" => match file_mech {
            Some(m @ MechanismFile::Sequential { .. }) => {
                ResolvedMech::Det(build_mechanism(m, labels, quota.as_ref())?)
            }
            _ => {
                return Err(invalid(
                    "sequential mechanisms need their policy in the instance file",
                ))
            }
        },
        "interleave" => {
            let sequence = match (&args.sequence, file_mech) {
                (Some(s), _) => PickingSequence::new(agents_from(s)?),
                (None, Some(MechanismFile::Interleave { sequence })) => {
                    PickingSequence::new(agents_from(sequence)?)
                }
                _ => return Err(invalid("interleave needs --sequence")),
            };
            ResolvedMech::Det(MechanismSpec::Interleaving { sequence })
        }
        "bossy" => ResolvedMech::Det(MechanismSpec::BossyFixture {
            quota: need_quota()?,
        }),
        "imposed" => match file_mech {
            Some(m @ MechanismFile::Imposed { .. }) => {
                ResolvedMech::Det(build_mechanism(m, labels, quota.as_ref())?)
            }
            _ => {
                return Err(invalid(
                    "imposed mechanisms need their allocation in the instance file",
                ))
            }
        },
        other => return Err(invalid(format!("unknown mechanism kind {other:?}"))),
    };
    Ok(resolved)
}

fn cmd_allocate(args: &AllocateArgs, timing: bool, started: Instant) -> Result<i32> {
    let (file, digest) = InstanceFile::from_path(&args.instance)?;
    let labels = file.labels()?;
    let profile = file.profile(&labels)?;
    let resolved = resolve_mechanism(&args.mech, Some(&file), &labels)?;
    let spec = match resolved {
        ResolvedMech::Det(spec) => spec,
        ResolvedMech::Rsdq(_) => {
            return Err(invalid("rsdq is a lottery; use the rsdq command"))
        }
        ResolvedMech::AllSerialOrders(_) => {
            return Err(invalid("allocate needs a dictator order: pass --order"))
        }
    };
    spec.validate(profile.agents(), profile.objects())?;
    let alloc = spec.allocate(&profile)?;
    let identical_profile = if args.identical_profile {
        let constructed = match &spec {
            MechanismSpec::SerialDictatorQuota { order, quota } => {
                build_identical_profile(&profile, order, quota)?
            }
            MechanismSpec::SequentialDictatorQuota { policy, quota } => {
                build_identical_profile_seq(&profile, policy, quota)?
            }
            _ => {
                return Err(invalid(
                    "--identical-profile applies to sd and sequential mechanisms",
                ))
            }
        };
        let replay = spec.allocate(&constructed)?;
        Some(IdenticalProfileOut {
            ranking: labels.ranking_labels(constructed.pref(AgentId(0))),
            reproduces_allocation: replay == alloc,
        })
    } else {
        None
    };
    let body = AllocateBody {
        mechanism: spec.kind().to_string(),
        quota: spec.quota().map(|q| q.sizes().to_vec()),
        bundles: allocation_bundles(&alloc, &labels),
        identical_profile,
    };
    emit(
        Report {
            command: "allocate".into(),
            instance: file_meta(&args.instance, digest),
            mode: "exact".into(),
            seed: None,
            results: body,
            timing_ms: None,
        },
        timing,
        started,
    );
    Ok(0)
}

fn cmd_rsdq(args: &RsdqArgs, timing: bool, started: Instant) -> Result<i32> {
    let (file, digest) = InstanceFile::from_path(&args.instance)?;
    let labels = file.labels()?;
    let profile = file.profile(&labels)?;
    let quota = args
        .quota
        .clone()
        .map(Quota::new)
        .or_else(|| file.quota())
        .ok_or_else(|| invalid("rsdq needs --quota or a quota in the instance file"))?;
    quota.validate(profile.agents(), profile.objects())?;
    match args.sample {
        None => {
            let cap = args.cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
            let (matrix, support) = rsdq_exact_capped(&profile, &quota, cap)?;
            if let Some(csv_path) = &args.csv {
                std::fs::write(csv_path, report::matrix_csv(&matrix, &labels))?;
            }
            let body = RsdqExactBody {
                quota: quota.sizes().to_vec(),
                orderings: support.total_orderings(),
                matrix: report::matrix_rows(&matrix),
                support: args
                    .support
                    .then(|| report::support_entries(&support, &labels)),
            };
            emit(
                Report {
                    command: "rsdq".into(),
                    instance: file_meta(&args.instance, digest),
                    mode: "exact".into(),
                    seed: None,
                    results: body,
                    timing_ms: None,
                },
                timing,
                started,
            );
        }
        Some(trials) => {
            if args.support {
                return Err(invalid("--support needs exact mode"));
            }
            let sampled = rsdq_sample(&profile, &quota, trials, args.seed)?;
            if let Some(csv_path) = &args.csv {
                std::fs::write(csv_path, report::sampled_csv(&sampled, &labels))?;
            }
            let body = RsdqSampleBody {
                quota: quota.sizes().to_vec(),
                trials,
                matrix: report::sampled_rows(&sampled),
            };
            emit(
                Report {
                    command: "rsdq".into(),
                    instance: file_meta(&args.instance, digest),
                    mode: "sampled".into(),
                    seed: Some(args.seed),
                    results: body,
                    timing_ms: None,
                },
                timing,
                started,
            );
        }
    }
    Ok(0)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Property {
    Sp,
    NonBossy,
    Neutral,
    Pareto,
    GroupSp,
    Realloc,
    EnvyFree,
    Ete,
}

impl Property {
    fn parse(token: &str) -> Result<Property> {
        Ok(match token {
            "sp" => Property::Sp,
            "nonbossy" => Property::NonBossy,
            "neutral" => Property::Neutral,
            "pareto" => Property::Pareto,
            "groupsp" => Property::GroupSp,
            "realloc" => Property::Realloc,
            "envyfree" => Property::EnvyFree,
            "ete" => Property::Ete,
            other => return Err(invalid(format!("unknown property {other:?}"))),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Property::Sp => "strategyproofness",
            Property::NonBossy => "non-bossiness",
            Property::Neutral => "neutrality",
            Property::Pareto => "pareto-efficiency",
            Property::GroupSp => "group-strategyproofness",
            Property::Realloc => "reallocation-proofness",
            Property::EnvyFree => "envyfreeness",
            Property::Ete => "equal-treatment",
        }
    }

    fn randomized_only(self) -> bool {
        matches!(self, Property::EnvyFree | Property::Ete)
    }

    fn deterministic_only(self) -> bool {
        matches!(
            self,
            Property::NonBossy
                | Property::Neutral
                | Property::Pareto
                | Property::GroupSp
                | Property::Realloc
        )
    }
}

fn resolve_properties(args: &AuditArgs, target: &ResolvedMech) -> Result<Vec<Property>> {
    let randomized = matches!(target, ResolvedMech::Rsdq(_));
    let props: Vec<Property> = match &args.properties {
        Some(tokens) => tokens
            .iter()
            .map(|t| Property::parse(t))
            .collect::<Result<_>>()?,
        None => {
            if randomized {
                vec![Property::Sp, Property::EnvyFree, Property::Ete]
            } else {
                vec![
                    Property::Sp,
                    Property::NonBossy,
                    Property::Neutral,
                    Property::Pareto,
                ]
            }
        }
    };
    for &p in &props {
        if randomized && p.deterministic_only() {
            return Err(invalid(format!(
                "property {} applies to deterministic mechanisms only",
                p.name()
            )));
        }
        if !randomized && p.randomized_only() {
            return Err(invalid(format!(
                "property {} applies to the rsdq lottery only",
                p.name()
            )));
        }
    }
    Ok(props)
}

/// Streams the profiles an audit should visit: the whole grid, or a
/// seeded random sample of it.
fn profile_stream(
    agents: usize,
    objects: usize,
    mode: SearchMode,
) -> Box<dyn Iterator<Item = LexProfile>> {
    match mode {
        SearchMode::Exhaustive { .. } => Box::new(LexProfiles::new(agents, objects)),
        SearchMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new(
                (0..trials).map(move |_| axioms::random_profile(&mut rng, agents, objects)),
            )
        }
    }
}

struct PropResult {
    evaluations: u64,
    witness: Option<Value>,
}

/// Runs one deterministic-mechanism property over the whole grid (or a
/// sample of it), spending at most `cap` evaluations.
fn run_det_property_grid(
    prop: Property,
    mech: &MechanismSpec,
    agents: usize,
    objects: usize,
    mode: SearchMode,
    max_coalition: usize,
    cap: u64,
    labels: &Labels,
) -> Result<PropResult> {
    match prop {
        Property::Sp => {
            let out = find_manipulation_grid(mech, agents, objects, mode)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::manipulation_value(&w, labels)),
            })
        }
        Property::NonBossy => {
            let out = find_bossiness(mech, agents, objects, mode)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::bossiness_value(&w, labels)),
            })
        }
        Property::Neutral => {
            let out = find_neutrality_violation(mech, agents, objects, mode)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::neutrality_value(&w, labels)),
            })
        }
        Property::Pareto => {
            let mut remaining = cap;
            let mut evaluations = 0u64;
            for profile in profile_stream(agents, objects, mode) {
                let alloc = mech.allocate(&profile)?;
                let out =
                    pareto_c_efficient_capped(&alloc, &ParetoPrefs::Lex(&profile), remaining)?;
                evaluations += out.evaluations;
                remaining = remaining.saturating_sub(out.evaluations);
                if let Some(w) = out.witness {
                    let mut v = report::pareto_value(&w, labels);
                    v["profile"] = report::profile_value(&profile, labels);
                    v["allocation"] = report::allocation_value(&alloc, labels);
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(v),
                    });
                }
            }
            Ok(PropResult {
                evaluations,
                witness: None,
            })
        }
        Property::GroupSp => {
            let mut remaining = cap;
            let mut evaluations = 0u64;
            for profile in profile_stream(agents, objects, mode) {
                let out =
                    find_group_manipulation_capped(mech, &profile, max_coalition, remaining)?;
                evaluations += out.evaluations;
                remaining = remaining.saturating_sub(out.evaluations);
                if let Some(w) = out.witness {
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(report::group_manipulation_value(&w, labels)),
                    });
                }
            }
            Ok(PropResult {
                evaluations,
                witness: None,
            })
        }
        Property::Realloc => {
            let mut remaining = cap;
            let mut evaluations = 0u64;
            for profile in profile_stream(agents, objects, mode) {
                let out = find_reallocation_capped(mech, &profile, max_coalition, remaining)?;
                evaluations += out.evaluations;
                remaining = remaining.saturating_sub(out.evaluations);
                if let Some(w) = out.witness {
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(report::reallocation_value(&w, labels)),
                    });
                }
            }
            Ok(PropResult {
                evaluations,
                witness: None,
            })
        }
        Property::EnvyFree | Property::Ete => {
            Err(invalid("randomized property reached a deterministic audit"))
        }
    }
}

/// Runs one lottery property over the grid, computing the exact lottery
/// for each profile visited.
fn run_rsdq_property_grid(
    prop: Property,
    quota: &Quota,
    agents: usize,
    objects: usize,
    mode: SearchMode,
    cap: u64,
    labels: &Labels,
) -> Result<PropResult> {
    let orderings = ordering_count(agents, quota.positions());
    let profiles: u128 = match mode {
        SearchMode::Exhaustive { .. } => axioms::profile_space(agents, objects),
        SearchMode::Sampled { trials, .. } => trials as u128,
    };
    let per_profile: u128 = match prop {
        Property::Sp => (agents as u128)
            .saturating_mul(axioms::factorial(objects))
            .saturating_mul(orderings)
            .saturating_add(orderings),
        _ => orderings,
    };
    let required = profiles.saturating_mul(per_profile);
    if required > cap as u128 {
        return Err(Error::BudgetExceeded { required, cap });
    }
    let mut evaluations = 0u64;
    for profile in profile_stream(agents, objects, mode) {
        match prop {
            Property::Sp => {
                let out = find_rand_manipulation_capped(&profile, quota, cap)?;
                evaluations += out.evaluations;
                if let Some(w) = out.witness {
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(report::rand_manipulation_value(&w, labels)),
                    });
                }
            }
            Property::EnvyFree => {
                let (matrix, _) = rsdq_exact_capped(&profile, quota, cap)?;
                evaluations += (agents * (agents - 1)) as u64;
                if let Some(w) = envy_witnesses(&matrix, &profile).into_iter().next() {
                    let mut v = report::envy_value(&w, labels);
                    v["profile"] = report::profile_value(&profile, labels);
                    v["matrix"] = serde_json::json!(report::matrix_rows(&matrix));
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(v),
                    });
                }
            }
            Property::Ete => {
                let (matrix, _) = rsdq_exact_capped(&profile, quota, cap)?;
                evaluations += (agents * agents.saturating_sub(1) / 2) as u64;
                if let Some(&(a, b)) =
                    equal_treatment_witnesses(&matrix, &profile).first()
                {
                    let mut v = report::equal_treatment_value(a, b, labels);
                    v["profile"] = report::profile_value(&profile, labels);
                    v["matrix"] = serde_json::json!(report::matrix_rows(&matrix));
                    return Ok(PropResult {
                        evaluations,
                        witness: Some(v),
                    });
                }
            }
            _ => return Err(invalid("deterministic property reached the lottery audit")),
        }
    }
    Ok(PropResult {
        evaluations,
        witness: None,
    })
}

/// Audits a single fixed profile.
fn run_det_property_instance(
    prop: Property,
    mech: &MechanismSpec,
    profile: &LexProfile,
    general: Option<&[GeneralSetPref]>,
    max_coalition: usize,
    cap: u64,
    labels: &Labels,
) -> Result<PropResult> {
    match prop {
        Property::Sp => {
            let out = find_manipulation_capped(mech, profile, cap)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::manipulation_value(&w, labels)),
            })
        }
        Property::NonBossy => {
            let out = find_bossiness_at(mech, profile)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::bossiness_value(&w, labels)),
            })
        }
        Property::Neutral => {
            let out = find_neutrality_violation_at(mech, profile)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::neutrality_value(&w, labels)),
            })
        }
        Property::Pareto => {
            let alloc = mech.allocate(profile)?;
            let prefs = match general {
                Some(g) => ParetoPrefs::General(g),
                None => ParetoPrefs::Lex(profile),
            };
            let out = pareto_c_efficient_capped(&alloc, &prefs, cap)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| {
                    let mut v = report::pareto_value(&w, labels);
                    v["allocation"] = report::allocation_value(&alloc, labels);
                    v
                }),
            })
        }
        Property::GroupSp => {
            let out = find_group_manipulation_capped(mech, profile, max_coalition, cap)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out
                    .witness
                    .map(|w| report::group_manipulation_value(&w, labels)),
            })
        }
        Property::Realloc => {
            let out = find_reallocation_capped(mech, profile, max_coalition, cap)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out.witness.map(|w| report::reallocation_value(&w, labels)),
            })
        }
        Property::EnvyFree | Property::Ete => {
            Err(invalid("randomized property reached a deterministic audit"))
        }
    }
}

fn run_rsdq_property_instance(
    prop: Property,
    quota: &Quota,
    profile: &LexProfile,
    cap: u64,
    labels: &Labels,
) -> Result<PropResult> {
    let agents = profile.agents();
    match prop {
        Property::Sp => {
            let out = find_rand_manipulation_capped(profile, quota, cap)?;
            Ok(PropResult {
                evaluations: out.evaluations,
                witness: out
                    .witness
                    .map(|w| report::rand_manipulation_value(&w, labels)),
            })
        }
        Property::EnvyFree => {
            let (matrix, _) = rsdq_exact_capped(profile, quota, cap)?;
            let witness = envy_witnesses(&matrix, profile).into_iter().next().map(|w| {
                let mut v = report::envy_value(&w, labels);
                v["matrix"] = serde_json::json!(report::matrix_rows(&matrix));
                v
            });
            Ok(PropResult {
                evaluations: (agents * (agents - 1)) as u64,
                witness,
            })
        }
        Property::Ete => {
            let (matrix, _) = rsdq_exact_capped(profile, quota, cap)?;
            let witness = equal_treatment_witnesses(&matrix, profile)
                .first()
                .map(|&(a, b)| {
                    let mut v = report::equal_treatment_value(a, b, labels);
                    v["matrix"] = serde_json::json!(report::matrix_rows(&matrix));
                    v
                });
            Ok(PropResult {
                evaluations: (agents * agents.saturating_sub(1) / 2) as u64,
                witness,
            })
        }
        _ => Err(invalid("deterministic property reached the lottery audit")),
    }
}

/// Every injective dictator ordering of `positions` out of `agents`, in
/// lexicographic order.
fn all_orderings(agents: usize, positions: usize) -> Vec<AgentOrdering> {
    use itertools::Itertools;
    (0..agents as u32)
        .map(AgentId)
        .permutations(positions)
        .map(|p| AgentOrdering::new(p).expect("permutations are injective"))
        .collect()
}

fn annotate_order(witness: &mut Value, order: &AgentOrdering, labels: &Labels) {
    if let Value::Object(map) = witness {
        map.insert(
            "order".to_string(),
            serde_json::json!(labels.ordering_labels(order)),
        );
    }
}

fn cmd_audit(args: &AuditArgs, timing: bool, started: Instant) -> Result<i32> {
    let cap = args.cap.unwrap_or(DEFAULT_SEARCH_CAP);
    let loaded = match &args.instance {
        Some(path) => Some(InstanceFile::from_path(path)?),
        None => None,
    };
    let (labels, meta, scope, agents, objects) = match (&loaded, args.agents, args.objects) {
        (Some((file, digest)), None, None) => {
            let labels = file.labels()?;
            let (n, m) = (labels.agents(), labels.objects());
            let meta = file_meta(args.instance.as_ref().unwrap(), digest.clone());
            (labels, meta, "instance", n, m)
        }
        (None, Some(n), Some(m)) => {
            (Labels::synthetic(n, m), grid_meta(n, m), "grid", n, m)
        }
        _ => {
            return Err(invalid(
                "audit needs either --instance or both --agents and --objects",
            ))
        }
    };
    let file_ref = loaded.as_ref().map(|(f, _)| f);
    let target = resolve_mechanism(&args.mech, file_ref, &labels)?;
    match &target {
        ResolvedMech::Det(spec) => spec.validate(agents, objects)?,
        ResolvedMech::Rsdq(q) | ResolvedMech::AllSerialOrders(q) => q.validate(agents, objects)?,
    }
    let props = resolve_properties(args, &target)?;
    let mode = match args.sample {
        Some(trials) => SearchMode::Sampled {
            trials,
            seed: args.seed,
        },
        None => SearchMode::Exhaustive { cap },
    };
    let quota_out = match &target {
        ResolvedMech::Det(spec) => spec.quota().map(|q| q.sizes().to_vec()),
        ResolvedMech::Rsdq(q) | ResolvedMech::AllSerialOrders(q) => Some(q.sizes().to_vec()),
    };

    let mut properties = Vec::with_capacity(props.len());
    for &prop in &props {
        let result = match (&target, scope) {
            (ResolvedMech::Det(spec), "instance") => {
                let (file, _) = loaded.as_ref().unwrap();
                let profile = file.profile(&labels)?;
                let general = file.general_profile(&labels)?;
                run_det_property_instance(
                    prop,
                    spec,
                    &profile,
                    general.as_deref(),
                    args.max_coalition,
                    cap,
                    &labels,
                )?
            }
            (ResolvedMech::Det(spec), _) => run_det_property_grid(
                prop,
                spec,
                agents,
                objects,
                mode,
                args.max_coalition,
                cap,
                &labels,
            )?,
            (ResolvedMech::Rsdq(quota), "instance") => {
                let (file, _) = loaded.as_ref().unwrap();
                let profile = file.profile(&labels)?;
                run_rsdq_property_instance(prop, quota, &profile, cap, &labels)?
            }
            (ResolvedMech::Rsdq(quota), _) => {
                run_rsdq_property_grid(prop, quota, agents, objects, mode, cap, &labels)?
            }
            (ResolvedMech::AllSerialOrders(quota), sc) => {
                let mut total = PropResult {
                    evaluations: 0,
                    witness: None,
                };
                for order in all_orderings(agents, quota.positions()) {
                    let spec = MechanismSpec::SerialDictatorQuota {
                        order: order.clone(),
                        quota: quota.clone(),
                    };
                    let mut result = if sc == "instance" {
                        let (file, _) = loaded.as_ref().unwrap();
                        let profile = file.profile(&labels)?;
                        let general = file.general_profile(&labels)?;
                        run_det_property_instance(
                            prop,
                            &spec,
                            &profile,
                            general.as_deref(),
                            args.max_coalition,
                            cap,
                            &labels,
                        )?
                    } else {
                        run_det_property_grid(
                            prop,
                            &spec,
                            agents,
                            objects,
                            mode,
                            args.max_coalition,
                            cap,
                            &labels,
                        )?
                    };
                    total.evaluations += result.evaluations;
                    if let Some(mut w) = result.witness.take() {
                        annotate_order(&mut w, &order, &labels);
                        total.witness = Some(w);
                        break;
                    }
                }
                total
            }
        };
        properties.push(PropertyOut {
            property: prop.name().to_string(),
            holds: result.witness.is_none(),
            checked: result.evaluations,
            witness: result.witness,
        });
    }

    let any_violation = properties.iter().any(|p| !p.holds);
    let body = AuditBody {
        mechanism: target.kind().to_string(),
        scope: scope.to_string(),
        agents,
        objects,
        quota: quota_out,
        properties,
    };
    emit(
        Report {
            command: "audit".into(),
            instance: meta,
            mode: match mode {
                SearchMode::Exhaustive { .. } => "exhaustive".into(),
                SearchMode::Sampled { .. } => "sampled".into(),
            },
            seed: matches!(mode, SearchMode::Sampled { .. }).then_some(args.seed),
            results: body,
            timing_ms: None,
        },
        timing,
        started,
    );
    Ok(if any_violation { 2 } else { 0 })
}

/// True when every preference prefix of `pref` holds at least as much
/// probability mass under `a` as under `b`.
fn sd_weakly_prefers(pref: &crate::prefs::LexOrder, a: &[Rational], b: &[Rational]) -> bool {
    let mut mass_a = Rational::zero();
    let mut mass_b = Rational::zero();
    for &obj in pref.ranking() {
        mass_a = &mass_a + &a[obj.index()];
        mass_b = &mass_b + &b[obj.index()];
        if mass_a < mass_b {
            return false;
        }
    }
    true
}

fn cmd_dominance(args: &DominanceArgs, timing: bool, started: Instant) -> Result<i32> {
    let (file, digest) = InstanceFile::from_path(&args.instance)?;
    let labels = file.labels()?;
    let profile = file.profile(&labels)?;
    let (matrix_a_file, a_digest) = MatrixFile::from_path(&args.matrix_a)?;
    let (matrix_b_file, b_digest) = MatrixFile::from_path(&args.matrix_b)?;
    let a = matrix_a_file.to_rand_allocation()?;
    let b = matrix_b_file.to_rand_allocation()?;
    for (name, matrix) in [("matrix-a", &a), ("matrix-b", &b)] {
        if matrix.agents() != profile.agents() || matrix.objects() != profile.objects() {
            return Err(invalid(format!(
                "{name} is {}x{} but the instance has {} agents and {} objects",
                matrix.agents(),
                matrix.objects(),
                profile.agents(),
                profile.objects()
            )));
        }
    }
    let (first_dom, second_dom, per_agent) = match args.relation.as_str() {
        "ld" => {
            let per_agent = (0..profile.agents())
                .map(|i| {
                    let agent = AgentId(i as u32);
                    let pref = profile.pref(agent);
                    let verdict = match ld_prefers(pref, a.row(agent), b.row(agent)) {
                        std::cmp::Ordering::Greater => "first",
                        std::cmp::Ordering::Less => "second",
                        std::cmp::Ordering::Equal => "equal",
                    };
                    AgentDominanceOut {
                        agent: labels.agent_label(agent).to_string(),
                        prefers: verdict.to_string(),
                    }
                })
                .collect();
            (
                ld_dominates(&a, &b, &profile),
                ld_dominates(&b, &a, &profile),
                per_agent,
            )
        }
        "sd" => {
            let per_agent = (0..profile.agents())
                .map(|i| {
                    let agent = AgentId(i as u32);
                    let pref = profile.pref(agent);
                    let a_weak = sd_weakly_prefers(pref, a.row(agent), b.row(agent));
                    let b_weak = sd_weakly_prefers(pref, b.row(agent), a.row(agent));
                    let verdict = match (a_weak, b_weak) {
                        (true, true) => "equal",
                        (true, false) => "first",
                        (false, true) => "second",
                        (false, false) => "incomparable",
                    };
                    AgentDominanceOut {
                        agent: labels.agent_label(agent).to_string(),
                        prefers: verdict.to_string(),
                    }
                })
                .collect();
            (
                sd_dominates(&a, &b, &profile),
                sd_dominates(&b, &a, &profile),
                per_agent,
            )
        }
        other => return Err(invalid(format!("unknown relation {other:?} (ld or sd)"))),
    };
    let body = DominanceBody {
        relation: args.relation.clone(),
        matrix_a_sha256: a_digest,
        matrix_b_sha256: b_digest,
        first_dominates_second: first_dom,
        second_dominates_first: second_dom,
        per_agent,
    };
    emit(
        Report {
            command: "dominance".into(),
            instance: file_meta(&args.instance, digest),
            mode: "exact".into(),
            seed: None,
            results: body,
            timing_ms: None,
        },
        timing,
        started,
    );
    Ok(0)
}

fn cmd_find_manipulation(
    args: &FindManipulationArgs,
    timing: bool,
    started: Instant,
) -> Result<i32> {
    let (file, digest) = InstanceFile::from_path(&args.instance)?;
    let labels = file.labels()?;
    let profile = file.profile(&labels)?;
    let target = resolve_mechanism(&args.mech, Some(&file), &labels)?;
    let cap = args.cap.unwrap_or(DEFAULT_SEARCH_CAP);
    let (kind, found, checked, witness) = match &target {
        ResolvedMech::Det(spec) => {
            spec.validate(profile.agents(), profile.objects())?;
            let out = find_manipulation_capped(spec, &profile, cap)?;
            (
                spec.kind(),
                out.witness.is_some(),
                out.evaluations,
                out.witness.map(|w| report::manipulation_value(&w, &labels)),
            )
        }
        ResolvedMech::Rsdq(quota) => {
            let out = find_rand_manipulation_capped(&profile, quota, cap)?;
            (
                "rsdq",
                out.witness.is_some(),
                out.evaluations,
                out.witness
                    .map(|w| report::rand_manipulation_value(&w, &labels)),
            )
        }
        ResolvedMech::AllSerialOrders(_) => {
            return Err(invalid("find-manipulation needs a dictator order: pass --order"))
        }
    };
    let body = ManipulationBody {
        mechanism: kind.to_string(),
        found,
        checked,
        witness,
    };
    emit(
        Report {
            command: "find-manipulation".into(),
            instance: file_meta(&args.instance, digest),
            mode: "exhaustive".into(),
            seed: None,
            results: body,
            timing_ms: None,
        },
        timing,
        started,
    );
    Ok(if found { 2 } else { 0 })
}
