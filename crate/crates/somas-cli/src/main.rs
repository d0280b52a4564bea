//! Command-line front end: load a model, judge formulas, report full
//! contribution, export dependence graphs.
//!
//! Model files are either the JSON schema understood by
//! [`somas::json::somas_from_json`] or a scenario stub, an object with a
//! `"scenario"` key naming a built-in family (`two_trains`,
//! `two_trains_strict`, `task_delegation`, `community`) plus that family's
//! parameters. Community stubs wire up the registration evaluator for
//! `com(...)` atoms automatically.
//!
//! Exit codes are a stable scripting contract: 0 means the answer is
//! positive (holds, fully contributes, validation clean), 1 means the
//! answer is negative or the model is invalid, 2 means the invocation
//! itself failed (unreadable file, syntax error, unknown name, blown
//! enumeration cap).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use somas::checker::{Checker, ComHookFn, ContributionVerdict};
use somas::decomp::{
    dependence_graph, export_dot, export_dot_layered, fcon_somas_opts, layers,
    star_dependence_graph, ContributionSet, FconOptions, DEFAULT_CANDIDATE_CAP,
};
use somas::gen::{random_formula, random_model, GenLimits};
use somas::json::{somas_from_json, LoadError};
use somas::logic::{
    parse_formula, parse_goal, render_formula, render_goal, subformulas, Formula, TemporalGoal,
};
use somas::model::{AgentId, Somas, StateId};
use somas::scenarios::{
    community_hook, community_model, task_delegation, two_trains, two_trains_strict,
    CommunityConfig,
};

#[derive(Parser)]
#[command(name = "somas", version, about = "Analyze self-organizing multi-agent models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model file for structural defects
    Validate(ValidateArgs),
    /// Decide whether formulas hold at a state
    Check(CheckArgs),
    /// Judge coalitions for full contribution, or search for all of them
    Fullcontrib(FullcontribArgs),
    /// Print a who-hears-whom dependence graph as DOT
    Graph(GraphArgs),
    /// Cross-check the labeling checker against path enumeration on random models
    Fuzz(FuzzArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Model file (JSON schema or scenario stub)
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Model file (JSON schema or scenario stub)
    #[arg(long)]
    model: PathBuf,
    /// State to evaluate at; overrides the query file's state
    #[arg(long)]
    state: Option<String>,
    /// Formula to check; repeatable, appended after query-file formulas
    #[arg(long = "formula")]
    formulas: Vec<String>,
    /// Query file supplying a state and formulas
    #[arg(long)]
    query: Option<PathBuf>,
    /// Emit verdicts as JSON instead of plain text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FullcontribArgs {
    /// Model file (JSON schema or scenario stub)
    #[arg(long)]
    model: PathBuf,
    /// State to evaluate at; overrides the query file's state
    #[arg(long)]
    state: Option<String>,
    /// Temporal goal (X f, G f, F f, or f U g); repeatable
    #[arg(long = "goal")]
    goals: Vec<String>,
    /// Comma-separated agent names: judge this coalition instead of searching
    #[arg(long, value_delimiter = ',')]
    coalition: Option<Vec<String>>,
    /// Query file supplying state, goals, and coalitions
    #[arg(long)]
    query: Option<PathBuf>,
    /// Emit the report as JSON instead of plain text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GraphArgs {
    /// Model file (JSON schema or scenario stub)
    #[arg(long)]
    model: PathBuf,
    /// State whose compliant-reachable region feeds the graph; defaults to
    /// the first declared state
    #[arg(long)]
    state: Option<String>,
    /// Comma-separated coalition whose compliant runs to follow (default:
    /// every agent)
    #[arg(long, value_delimiter = ',')]
    coalition: Option<Vec<String>>,
    /// Group nodes into ranked layer clusters
    #[arg(long)]
    layers: bool,
}

#[derive(Args)]
struct FuzzArgs {
    /// Base RNG seed; model i is drawn from seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random models to draw
    #[arg(long, default_value_t = 100)]
    models: u64,
    /// Formulas checked per model
    #[arg(long, default_value_t = 10)]
    formulas: usize,
}

/// On-disk query bundle: where to evaluate and what to ask there.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryFile {
    #[serde(default)]
    state: Option<String>,
    #[serde(default)]
    formulas: Vec<String>,
    #[serde(default)]
    goals: Vec<String>,
    #[serde(default)]
    coalitions: Option<Vec<Vec<String>>>,
}

struct Failure {
    code: u8,
    message: String,
}

/// Exit 2: the invocation itself is broken (I/O, syntax, unknown names).
fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Exit 1: the file parses but does not describe a usable model.
fn content(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Fullcontrib(args) => cmd_fullcontrib(args),
        Cmd::Graph(args) => cmd_graph(args),
        Cmd::Fuzz(args) => cmd_fuzz(args),
    }
}

/// A loaded model plus the community-atom evaluator when the file was a
/// community stub; plain models cannot answer `com(...)` atoms.
struct Loaded {
    somas: Somas,
    hook: Option<Box<ComHookFn>>,
}

impl Loaded {
    fn checker(&self) -> Checker<'_> {
        match &self.hook {
            Some(h) => Checker::with_com_hook(&self.somas, &**h),
            None => Checker::new(&self.somas),
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Loaded, Failure> {
    let text = read_file(path)?;
    if let Ok(serde_json::Value::Object(map)) = serde_json::from_str(&text) {
        if map.contains_key("scenario") {
            return load_scenario(map);
        }
    }
    match somas_from_json(&text) {
        Ok(somas) => Ok(Loaded { somas, hook: None }),
        Err(e @ LoadError::Json(_)) => Err(usage(e.to_string())),
        Err(e @ LoadError::Content(_)) => Err(content(e.to_string())),
    }
}

fn load_scenario(mut map: serde_json::Map<String, serde_json::Value>) -> Result<Loaded, Failure> {
    let name = match map.remove("scenario") {
        Some(serde_json::Value::String(s)) => s,
        _ => return Err(content("scenario name must be a string")),
    };
    let no_extra_keys = |map: &serde_json::Map<String, serde_json::Value>| match map.keys().next()
    {
        Some(key) => Err(content(format!("unknown field `{key}` for scenario `{name}`"))),
        None => Ok(()),
    };
    match name.as_str() {
        "two_trains" | "two_trains_strict" => {
            let mut speed = |key: &str| match map.remove(key) {
                Some(v) => v
                    .as_i64()
                    .ok_or_else(|| content(format!("`{key}` must be an integer"))),
                None => Err(content(format!("scenario `{name}` needs `{key}`"))),
            };
            let u1 = speed("u1")?;
            let u2 = speed("u2")?;
            no_extra_keys(&map)?;
            let somas = if name == "two_trains" {
                two_trains(u1, u2)
            } else {
                two_trains_strict(u1, u2)
            };
            Ok(Loaded { somas, hook: None })
        }
        "task_delegation" => {
            no_extra_keys(&map)?;
            Ok(Loaded { somas: task_delegation(), hook: None })
        }
        "community" => {
            let cfg: CommunityConfig = serde_json::from_value(serde_json::Value::Object(map))
                .map_err(|e| content(format!("bad community config: {e}")))?;
            let somas = community_model(&cfg).map_err(|e| content(e.to_string()))?;
            Ok(Loaded { somas, hook: Some(community_hook(cfg)) })
        }
        other => Err(content(format!("unknown scenario `{other}`"))),
    }
}

fn require_valid(somas: &Somas) -> Result<(), Failure> {
    let report = somas.validate();
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(content(format!("invalid model: {v}"))),
    }
}

fn read_query(path: &Path) -> Result<QueryFile, Failure> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad query file: {e}")))
}

fn resolve_state(somas: &Somas, name: &str) -> Result<StateId, Failure> {
    somas
        .cgs
        .state_id(name)
        .ok_or_else(|| usage(format!("unknown state `{name}`")))
}

fn resolve_coalition(somas: &Somas, names: &[String]) -> Result<BTreeSet<AgentId>, Failure> {
    names
        .iter()
        .map(|n| {
            somas
                .cgs
                .agent_id(n)
                .ok_or_else(|| usage(format!("unknown agent `{n}`")))
        })
        .collect()
}

/// Every name a formula mentions must resolve against the model, agents
/// and propositions alike, before the checker sees it.
fn check_names(somas: &Somas, f: &Formula) -> Result<(), Failure> {
    for name in f.referenced_names() {
        if somas.cgs.agent_id(&name).is_none() {
            return Err(usage(format!("unknown agent `{name}` in formula")));
        }
    }
    for sub in subformulas(f) {
        if let Formula::Prop(p) = sub {
            if !somas.cgs.props.contains(&p) {
                return Err(usage(format!("unknown proposition `{p}`")));
            }
        }
    }
    Ok(())
}

fn parse_formula_arg(somas: &Somas, text: &str) -> Result<Formula, Failure> {
    let f = parse_formula(text).map_err(|e| usage(e.to_string()))?;
    check_names(somas, &f)?;
    Ok(f)
}

fn parse_goal_arg(somas: &Somas, text: &str) -> Result<TemporalGoal, Failure> {
    let g = parse_goal(text).map_err(|e| usage(e.to_string()))?;
    check_names(somas, &g.with_coalition(&BTreeSet::new()))?;
    Ok(g)
}

fn candidate_cap() -> Result<usize, Failure> {
    match std::env::var("SOMAS_CANDIDATE_CAP") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| usage(format!("SOMAS_CANDIDATE_CAP must be an integer, got `{text}`"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_CANDIDATE_CAP),
        Err(e) => Err(usage(format!("SOMAS_CANDIDATE_CAP: {e}"))),
    }
}

/// Agent names in lexicographic order, the fixed order of every report.
fn agent_names(somas: &Somas, ids: &BTreeSet<AgentId>) -> Vec<String> {
    let mut out: Vec<String> = ids
        .iter()
        .map(|a| somas.cgs.agent_name(*a).to_string())
        .collect();
    out.sort();
    out
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| usage(format!("cannot serialize: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, Failure> {
    let loaded = load_model(&args.model)?;
    let report = loaded.somas.validate();
    for v in &report.violations {
        println!("{v}");
    }
    Ok(if report.is_valid() { 0 } else { 1 })
}

#[derive(Serialize)]
struct CheckReport {
    state: String,
    formula: String,
    holds: bool,
}

fn cmd_check(args: CheckArgs) -> Result<u8, Failure> {
    let loaded = load_model(&args.model)?;
    require_valid(&loaded.somas)?;
    let query = args.query.as_deref().map(read_query).transpose()?;
    let state_name = args
        .state
        .or_else(|| query.as_ref().and_then(|qf| qf.state.clone()))
        .ok_or_else(|| usage("no state given; use --state or a query file"))?;
    let q = resolve_state(&loaded.somas, &state_name)?;
    let mut texts = query.map(|qf| qf.formulas).unwrap_or_default();
    texts.extend(args.formulas);
    if texts.is_empty() {
        return Err(usage("no formula given; use --formula or a query file"));
    }

    let checker = loaded.checker();
    let mut reports = Vec::new();
    let mut all_hold = true;
    for text in &texts {
        let f = parse_formula_arg(&loaded.somas, text)?;
        let holds = checker.check(q, &f).map_err(|e| usage(e.to_string()))?;
        all_hold &= holds;
        reports.push(CheckReport {
            state: state_name.clone(),
            formula: render_formula(&f),
            holds,
        });
    }

    if args.json {
        if let [only] = reports.as_slice() {
            print_json(only)?;
        } else {
            print_json(&reports)?;
        }
    } else if let [only] = reports.as_slice() {
        println!("{}", if only.holds { "true" } else { "false" });
    } else {
        for r in &reports {
            println!("{}\t{}", if r.holds { "true" } else { "false" }, r.formula);
        }
    }
    Ok(if all_hold { 0 } else { 1 })
}

#[derive(Serialize)]
struct VerdictReport {
    state: String,
    coalition: Vec<String>,
    goal: String,
    semantic: bool,
    structural: bool,
    minimal: bool,
    full: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<String>>,
}

fn verdict_report(somas: &Somas, state: &str, v: ContributionVerdict) -> VerdictReport {
    VerdictReport {
        state: state.to_string(),
        coalition: agent_names(somas, &v.coalition),
        goal: render_goal(&v.goal),
        semantic: v.semantic,
        structural: v.structural,
        minimal: v.minimal,
        full: v.full(),
        witness: v.witness.as_ref().map(|w| agent_names(somas, w)),
    }
}

#[derive(Serialize)]
struct SetReport {
    state: String,
    entries: Vec<EntryReport>,
    rejections: Vec<RejectionReport>,
}

#[derive(Serialize)]
struct EntryReport {
    coalition: Vec<String>,
    goal: String,
}

#[derive(Serialize)]
struct RejectionReport {
    coalition: Vec<String>,
    reason: String,
}

/// Coalitions print smallest first, ties broken by member names; a fixed
/// order keeps the golden files stable.
fn coalition_key(names: &[String]) -> (usize, Vec<String>) {
    (names.len(), names.to_vec())
}

fn set_report(somas: &Somas, state: &str, set: &ContributionSet) -> SetReport {
    let mut entries: Vec<EntryReport> = set
        .entries
        .iter()
        .map(|(ids, goal)| EntryReport {
            coalition: agent_names(somas, ids),
            goal: render_goal(goal),
        })
        .collect();
    entries.sort_by(|l, r| {
        coalition_key(&l.coalition)
            .cmp(&coalition_key(&r.coalition))
            .then_with(|| l.goal.cmp(&r.goal))
    });
    let mut rejections: Vec<RejectionReport> = set
        .rejections
        .iter()
        .map(|(ids, reason)| RejectionReport {
            coalition: agent_names(somas, ids),
            reason: reason.as_str().to_string(),
        })
        .collect();
    rejections.sort_by(|l, r| {
        coalition_key(&l.coalition)
            .cmp(&coalition_key(&r.coalition))
            .then_with(|| l.reason.cmp(&r.reason))
    });
    SetReport { state: state.to_string(), entries, rejections }
}

fn cmd_fullcontrib(args: FullcontribArgs) -> Result<u8, Failure> {
    let loaded = load_model(&args.model)?;
    require_valid(&loaded.somas)?;
    let query = args.query.as_deref().map(read_query).transpose()?;
    let state_name = args
        .state
        .or_else(|| query.as_ref().and_then(|qf| qf.state.clone()))
        .ok_or_else(|| usage("no state given; use --state or a query file"))?;
    let q = resolve_state(&loaded.somas, &state_name)?;

    let mut goal_texts = query
        .as_ref()
        .map(|qf| qf.goals.clone())
        .unwrap_or_default();
    goal_texts.extend(args.goals);
    let goals: Vec<TemporalGoal> = goal_texts
        .iter()
        .map(|t| parse_goal_arg(&loaded.somas, t))
        .collect::<Result<_, _>>()?;

    let mut coalitions: Vec<Vec<String>> = Vec::new();
    if let Some(names) = args.coalition {
        coalitions.push(names);
    }
    if let Some(more) = query.and_then(|qf| qf.coalitions) {
        coalitions.extend(more);
    }

    if !coalitions.is_empty() {
        if goals.is_empty() {
            return Err(usage("no goal given; use --goal or a query file"));
        }
        let checker = loaded.checker();
        let mut reports = Vec::new();
        let mut all_full = true;
        for names in &coalitions {
            let ids = resolve_coalition(&loaded.somas, names)?;
            for goal in &goals {
                let v = checker
                    .full_contribution(&ids, q, goal)
                    .map_err(|e| usage(e.to_string()))?;
                all_full &= v.full();
                reports.push(verdict_report(&loaded.somas, &state_name, v));
            }
        }
        if args.json {
            if let [only] = reports.as_slice() {
                print_json(only)?;
            } else {
                print_json(&reports)?;
            }
        } else {
            for r in &reports {
                let mut line = format!(
                    "coalition {{{}}}  goal {}  semantic={} structural={} minimal={} full={}",
                    r.coalition.join(","),
                    r.goal,
                    r.semantic,
                    r.structural,
                    r.minimal,
                    r.full
                );
                if let Some(w) = &r.witness {
                    line.push_str(&format!("  witness {{{}}}", w.join(",")));
                }
                println!("{line}");
            }
        }
        return Ok(if all_full { 0 } else { 1 });
    }

    let opts = FconOptions {
        com_hook: loaded.hook.as_deref(),
        candidate_cap: candidate_cap()?,
    };
    let set = fcon_somas_opts(&loaded.somas, q, &goals, &opts).map_err(|e| usage(e.to_string()))?;
    let report = set_report(&loaded.somas, &state_name, &set);
    if args.json {
        print_json(&report)?;
    } else {
        println!("state {}", report.state);
        for e in &report.entries {
            println!("entry {{{}}}  goal {}", e.coalition.join(","), e.goal);
        }
        for r in &report.rejections {
            println!("rejection {{{}}}  reason {}", r.coalition.join(","), r.reason);
        }
    }
    Ok(0)
}

fn cmd_graph(args: GraphArgs) -> Result<u8, Failure> {
    let loaded = load_model(&args.model)?;
    require_valid(&loaded.somas)?;
    let state_name = match args.state {
        Some(s) => s,
        None => loaded
            .somas
            .cgs
            .states
            .first()
            .cloned()
            .ok_or_else(|| content("model declares no states"))?,
    };
    let q = resolve_state(&loaded.somas, &state_name)?;
    let graph = match &args.coalition {
        Some(names) => {
            let ids = resolve_coalition(&loaded.somas, names)?;
            dependence_graph(&loaded.somas, &ids, q).map_err(|e| usage(e.to_string()))?
        }
        None => star_dependence_graph(&loaded.somas, q).map_err(|e| usage(e.to_string()))?,
    };
    let dot = if args.layers {
        export_dot_layered(&graph, &layers(&graph))
    } else {
        export_dot(&graph)
    };
    print!("{dot}");
    Ok(0)
}

fn cmd_fuzz(args: FuzzArgs) -> Result<u8, Failure> {
    let limits = GenLimits::default();
    let mut comparisons = 0u64;
    let mut disagreements = 0u64;
    for i in 0..args.models {
        let seed = args.seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let somas = random_model(&mut rng, &limits);
        let checker = Checker::new(&somas);
        for _ in 0..args.formulas {
            let f = random_formula(&mut rng, &somas, 2);
            for idx in 0..somas.cgs.state_count() {
                let q = StateId(idx);
                let fast = checker.check(q, &f).map_err(|e| usage(e.to_string()))?;
                let slow = checker
                    .brute_force_check(q, &f)
                    .map_err(|e| usage(e.to_string()))?;
                comparisons += 1;
                if fast != slow {
                    disagreements += 1;
                    println!(
                        "disagreement: seed {seed} state {} formula {}: labeling says {fast}, enumeration says {slow}",
                        somas.cgs.state_name(q),
                        f
                    );
                }
            }
        }
    }
    println!("{} models, {comparisons} comparisons, {disagreements} disagreements", args.models);
    Ok(if disagreements == 0 { 0 } else { 1 })
}
