//! `mdq`: check, analyze, chase, query and assess multidimensional ontologies.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use mdq_core::analysis::{analyze, Verdict};
use mdq_core::chase::{chase, ChaseConfig, ChaseVariant, TraceEvent};
use mdq_core::loader::load_database;
use mdq_core::md::{check_referential, validate_instance, validate_schema};
use mdq_core::quality::{quality_assess, AssessConfig};
use mdq_core::query::{answer_bcq, answer_cq, answer_via_chase, QueryConfig, DEFAULT_DEPTH_BUDGET};
use mdq_core::{load_program_files, Database, Ontology, Tuple};

#[derive(Parser)]
#[command(name = "mdq", version, about = "Multidimensional Datalog± ontologies for contextual data quality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the ontology, validate dimensions and check data against categories.
    Check(Common),
    /// Classify rules and decide weak stickiness, stickiness and separability.
    Analyze(Common),
    /// Run the chase and report the resulting instance and constraint violations.
    Chase(ChaseArgs),
    /// Answer a named query.
    Query(QueryArgs),
    /// Assess data quality against a context.
    Assess(AssessArgs),
}

#[derive(Args)]
struct Common {
    /// Ontology files; `include` statements are followed.
    #[arg(required = true)]
    ontology: Vec<PathBuf>,
    /// Directory holding `<Predicate>.csv` tables (overrides `data` statements).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Restricted,
    Oblivious,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dump {
    Facts,
    Trace,
    None,
}

#[derive(Args)]
struct ChaseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Variant::Restricted)]
    variant: Variant,
    #[arg(long, default_value_t = ChaseConfig::default().max_steps)]
    max_steps: usize,
    #[arg(long, default_value_t = ChaseConfig::default().max_nulls)]
    max_nulls: usize,
    #[arg(long, value_enum, default_value_t = Dump::Facts)]
    dump: Dump,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Topdown,
    Chase,
    Both,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: Common,
    /// Name of a query declared in the ontology.
    #[arg(long)]
    query: String,
    #[arg(long, value_enum, default_value_t = Engine::Topdown)]
    engine: Engine,
    /// Maximum derivation depth for the top-down engine (default: $MDQ_DEPTH_BUDGET or 64).
    #[arg(long)]
    depth_budget: Option<usize>,
    /// Print a proof for every answer.
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: Common,
    /// File mapping base relations into the context.
    #[arg(long)]
    mapping: PathBuf,
    /// File defining quality predicates and quality versions.
    #[arg(long)]
    quality: PathBuf,
    /// Query to answer over the quality versions.
    #[arg(long)]
    query: Option<String>,
    #[arg(long, value_enum)]
    report: Option<Format>,
    #[arg(long)]
    depth_budget: Option<usize>,
}

/// A failure that ends the run with exit status 2.
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type Run = Result<bool, Usage>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Vec::new();
    let result = match cli.command {
        Command::Check(c) => check(&c, &mut out),
        Command::Analyze(c) => analyze_cmd(&c, &mut out),
        Command::Chase(c) => chase_cmd(&c, &mut out),
        Command::Query(c) => query_cmd(&c, &mut out),
        Command::Assess(c) => assess_cmd(&c, &mut out),
    };
    let _ = std::io::stdout().write_all(&out);
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Usage(msg)) => {
            eprintln!("{}", msg.trim_end());
            ExitCode::from(2)
        }
    }
}

fn load(files: &[PathBuf]) -> Result<Ontology, Usage> {
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    Ok(load_program_files(&refs)?)
}

fn data(o: &Ontology, dir: Option<&Path>) -> Result<Database, Usage> {
    Ok(load_database(o, dir)?)
}

fn depth_budget(flag: Option<usize>) -> Result<usize, Usage> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("MDQ_DEPTH_BUDGET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Usage(format!("MDQ_DEPTH_BUDGET must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_DEPTH_BUDGET),
    }
}

fn render_tuple(t: &Tuple) -> String {
    t.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn render_fact(p: &str, t: &Tuple) -> String {
    format!("{p}({})", render_tuple(t))
}

fn emit(out: &mut Vec<u8>, doc: &Json) {
    let _ = serde_json::to_writer_pretty(&mut *out, doc);
    out.push(b'\n');
}

fn check(c: &Common, out: &mut Vec<u8>) -> Run {
    let o = load(&c.ontology)?;
    let db = data(&o, c.data.as_deref())?;
    let mut problems: Vec<String> = validate_schema(&o.schema).violations.iter().map(ToString::to_string).collect();
    for inst in o.schema.instances(&db) {
        problems.extend(validate_instance(&inst, false).violations.iter().map(ToString::to_string));
    }
    problems.extend(check_referential(&db, &o.schema).iter().map(ToString::to_string));
    match c.format {
        Format::Text => {
            let _ = writeln!(
                out,
                "dimensions: {}, relations: {}, rules: {}, constraints: {}, queries: {}, facts: {}",
                o.schema.dimensions.len(),
                o.schema.relations.len(),
                o.rules.len(),
                o.constraints.len(),
                o.queries.len(),
                db.fact_count()
            );
            for p in &problems {
                let _ = writeln!(out, "problem: {p}");
            }
        }
        Format::Structured => emit(
            out,
            &json!({
                "dimensions": o.schema.dimensions.len(),
                "relations": o.schema.relations.len(),
                "rules": o.rules.len(),
                "constraints": o.constraints.len(),
                "queries": o.queries.len(),
                "facts": db.fact_count(),
                "problems": problems,
            }),
        ),
    }
    Ok(problems.is_empty())
}

fn analyze_cmd(c: &Common, out: &mut Vec<u8>) -> Run {
    let o = load(&c.ontology)?;
    let a = analyze(&o);
    match c.format {
        Format::Text => {
            let _ = write!(out, "{a}");
        }
        Format::Structured => emit(out, &serde_json::to_value(&a)?),
    }
    Ok(a.weakly_sticky == Verdict::Accept)
}

fn chase_cmd(c: &ChaseArgs, out: &mut Vec<u8>) -> Run {
    let o = load(&c.common.ontology)?;
    let db = data(&o, c.common.data.as_deref())?;
    let config = ChaseConfig {
        variant: match c.variant {
            Variant::Restricted => ChaseVariant::Restricted,
            Variant::Oblivious => ChaseVariant::Oblivious,
        },
        max_steps: c.max_steps,
        max_nulls: c.max_nulls,
        schedule_seed: None,
    };
    let r = chase(&db, &o, &config);
    let facts: Vec<String> = r
        .state
        .facts()
        .relations()
        .flat_map(|(p, rel)| rel.iter().map(move |t| render_fact(p, t)))
        .collect();
    let trace: Vec<String> = r
        .state
        .trace
        .iter()
        .map(|e| match e {
            TraceEvent::Tgd { step, rule, added, .. } => {
                let added: Vec<String> = added.iter().map(|(p, t)| render_fact(p, t)).collect();
                format!("step {step} {rule}: {}", added.join(" "))
            }
            TraceEvent::Egd { rule, replaced, by, .. } => format!("{rule}: {replaced} := {by}"),
        })
        .collect();
    let ncs: Vec<(String, Vec<String>)> = r
        .nc_violations
        .iter()
        .map(|v| (v.rule.to_string(), v.facts.iter().map(|(p, t)| render_fact(p, t)).collect()))
        .collect();
    let egds: Vec<String> = r
        .egd_violations
        .iter()
        .map(|v| format!("{}: {} != {}", v.rule, v.left, v.right))
        .collect();
    match c.common.format {
        Format::Text => {
            let _ = writeln!(
                out,
                "terminated: {}, rounds: {}, steps: {}, nulls: {}, facts: {}",
                r.terminated,
                r.rounds,
                r.state.step,
                r.state.nulls.len(),
                facts.len()
            );
            if let Some(b) = &r.budget_exceeded {
                let _ = writeln!(out, "budget exceeded: {b}");
            }
            let lines = match c.dump {
                Dump::Facts => &facts,
                Dump::Trace => &trace,
                Dump::None => &Vec::new(),
            };
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            for (rule, fs) in &ncs {
                let _ = writeln!(out, "violation {rule}: {}", fs.join(", "));
            }
            for e in &egds {
                let _ = writeln!(out, "egd violation {e}");
            }
        }
        Format::Structured => {
            let mut doc = json!({
                "terminated": r.terminated,
                "budget_exceeded": r.budget_exceeded,
                "rounds": r.rounds,
                "steps": r.state.step,
                "nulls": r.state.nulls,
                "nc_violations": ncs.iter().map(|(rule, f)| json!({"rule": rule, "facts": f})).collect::<Vec<_>>(),
                "egd_violations": egds,
            });
            match c.dump {
                Dump::Facts => doc["facts"] = json!(facts),
                Dump::Trace => doc["trace"] = json!(trace),
                Dump::None => {}
            }
            emit(out, &doc);
        }
    }
    Ok(r.terminated && ncs.is_empty() && egds.is_empty())
}

fn query_cmd(c: &QueryArgs, out: &mut Vec<u8>) -> Run {
    let o = load(&c.common.ontology)?;
    let db = data(&o, c.common.data.as_deref())?;
    let q = o
        .query(&c.query)
        .ok_or_else(|| Usage(format!("no query named `{}`", c.query)))?;
    let config = QueryConfig { depth_budget: depth_budget(c.depth_budget)?, require_weakly_sticky: true };
    let mut notes: Vec<String> = Vec::new();
    let top = match c.engine {
        Engine::Chase => None,
        _ => match answer_cq(&db, &o.rules, q, &config) {
            Ok(a) => Some(a),
            Err(e) => {
                notes.push(format!("topdown: {e}"));
                None
            }
        },
    };
    let via = match c.engine {
        Engine::Topdown => None,
        _ => match answer_via_chase(&db, &o, q, &ChaseConfig::default()) {
            Ok(a) => Some(a),
            Err(e) => {
                notes.push(format!("chase: {e}"));
                None
            }
        },
    };
    let mut ok = notes.is_empty();
    if let (Some(a), Some(b)) = (&top, &via) {
        if a != b {
            notes.push("engines disagree".into());
            ok = false;
        }
    }
    let answers: BTreeSet<Tuple> = top.or(via).unwrap_or_default();
    let mut proofs = Vec::new();
    if c.explain && ok {
        let targets: Vec<Tuple> = if q.is_boolean() { vec![Vec::new()] } else { answers.iter().cloned().collect() };
        for a in targets {
            let outcome = answer_bcq(&db, &o.rules, &q.instantiate(&a), &config).map_err(Usage::from)?;
            proofs.push((a, outcome.proof.map(|p| p.to_string()).unwrap_or_default()));
        }
    }
    match c.common.format {
        Format::Text => {
            let _ = writeln!(out, "{q}");
            if q.is_boolean() && ok {
                let _ = writeln!(out, "{}", if answers.is_empty() { "false" } else { "true" });
            }
            for a in answers.iter().filter(|_| !q.is_boolean()) {
                let _ = writeln!(out, "{}", render_tuple(a));
            }
            for (a, p) in &proofs {
                let _ = writeln!(out, "proof of ({}):", render_tuple(a));
                let _ = write!(out, "{p}");
            }
            for n in &notes {
                let _ = writeln!(out, "error: {n}");
            }
        }
        Format::Structured => emit(
            out,
            &json!({
                "query": q.to_string(),
                "answers": answers.iter().map(|a| a.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "proofs": proofs.iter().map(|(a, p)| json!({"answer": render_tuple(a), "proof": p})).collect::<Vec<_>>(),
                "errors": notes,
            }),
        ),
    }
    Ok(ok)
}

fn assess_cmd(c: &AssessArgs, out: &mut Vec<u8>) -> Run {
    let mut files = c.common.ontology.clone();
    files.push(c.mapping.clone());
    files.push(c.quality.clone());
    let o = load(&files)?;
    let db = data(&o, c.common.data.as_deref())?;
    let q = match &c.query {
        Some(name) => Some(o.query(name).ok_or_else(|| Usage(format!("no query named `{name}`")))?),
        None => None,
    };
    let config = AssessConfig {
        query: QueryConfig { depth_budget: depth_budget(c.depth_budget)?, require_weakly_sticky: true },
        chase: ChaseConfig::default(),
    };
    let a = match quality_assess(&db, &o, q, &config) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return Ok(false);
        }
    };
    let answers: Vec<Vec<String>> = a
        .answers
        .iter()
        .flatten()
        .map(|t| t.iter().map(ToString::to_string).collect())
        .collect();
    match c.report.unwrap_or(c.common.format) {
        Format::Text => {
            let _ = write!(out, "{}", a.report);
            for (base, version) in &a.versions {
                let _ = writeln!(out, "quality version of {base}:");
                for t in version {
                    let _ = writeln!(out, "  {}", render_tuple(t));
                }
            }
            if let Some(r) = &a.rewritten {
                let _ = writeln!(out, "{r}");
                for t in &answers {
                    let _ = writeln!(out, "{}", t.join(", "));
                }
            }
        }
        Format::Structured => {
            let versions: serde_json::Map<String, Json> = a
                .versions
                .iter()
                .map(|(b, v)| {
                    let rows: Vec<Vec<String>> = v.iter().map(|t| t.iter().map(ToString::to_string).collect()).collect();
                    (b.to_string(), json!(rows))
                })
                .collect();
            emit(
                out,
                &json!({
                    "report": serde_json::to_value(&a.report)?,
                    "versions": versions,
                    "query": a.rewritten.as_ref().map(ToString::to_string),
                    "answers": a.rewritten.as_ref().map(|_| answers),
                }),
            );
        }
    }
    Ok(true)
}
