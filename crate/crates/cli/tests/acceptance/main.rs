//! Acceptance checks for the hospital scenario. Prints one line per criterion and exits
//! non-zero if any of them fails.

mod gen;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use mdq_core::analysis::{analyze, classify_rule, is_weakly_sticky, RuleClass, Separability, Verdict};
use mdq_core::chase::{chase, ChaseConfig};
use mdq_core::loader::load_database;
use mdq_core::md::{AttributeKind, PredicateKind};
use mdq_core::quality::{build_context, compute_quality_version, discard_violations, quality_assess, AssessConfig, Ratio};
use mdq_core::query::{answer_cq, answer_via_chase, QueryConfig};
use mdq_core::{load_program_files, parse_program, parse_sources, tuple, Database, Ontology, Tuple, Value};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/hospital")
}

fn load(files: &[&str]) -> Ontology {
    let paths: Vec<PathBuf> = files
        .iter()
        .map(|f| match *f {
            "oracle.mdq" => Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/acceptance/oracle.mdq"),
            f => fixtures().join(f),
        })
        .collect();
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    load_program_files(&refs).expect("fixture ontology loads")
}

fn data(o: &Ontology) -> Database {
    load_database(o, None).expect("fixture data loads")
}

fn set(rows: &[&[&str]]) -> BTreeSet<Tuple> {
    rows.iter().map(|r| tuple(r)).collect()
}

fn mdq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdq"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("MDQ_DEPTH_BUDGET")
        .output()
        .expect("mdq runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mark_shifts() -> Check {
    let start = Instant::now();
    let o = load(&["hospital.mdq"]);
    let db = data(&o);
    let want = set(&[&["2005-09-09"]]);
    for name in ["MarkShifts", "MarkShiftsW2"] {
        let q = o.query(name).unwrap();
        let td = answer_cq(&db, &o.rules, q, &QueryConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        let ch = answer_via_chase(&db, &o, q, &ChaseConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        ensure(td == want, || format!("{name} top-down gave {td:?}"))?;
        ensure(ch == want, || format!("{name} chase gave {ch:?}"))?;
    }
    let out = mdq(&["query", "hospital.mdq", "--query", "MarkShifts", "--engine", "both"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    ensure(out.status.success() && rows == ["2005-09-09"], || format!("cli printed {rows:?}"))?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(2), || format!("took {t:?}"))?;
    Ok(format!("MarkShifts = MarkShiftsW2 = {{2005-09-09}} on both engines and the cli in {t:.2?}"))
}

fn clean_measurements() -> BTreeSet<Tuple> {
    set(&[&["2005-09-05T12:10", "TomWaits", "38.2"], &["2005-09-06T11:50", "TomWaits", "37.1"]])
}

fn quality_version() -> Check {
    let o = load(&["hospital_core.mdq", "mapping.mdq", "quality.mdq"]);
    let db = data(&o);
    let doctor = o.query("Doctor").unwrap();
    let out = quality_assess(&db, &o, Some(doctor), &AssessConfig::default()).map_err(|e| e.to_string())?;
    let version = &out.versions["Measurements"];
    ensure(*version == clean_measurements(), || format!("quality version {version:?}"))?;
    let answers = out.answers.unwrap_or_default();
    ensure(answers == set(&[&["2005-09-05T12:10", "TomWaits", "38.2"]]), || format!("Doctor^q gave {answers:?}"))?;
    let r = out.report.relation("Measurements").ok_or("no report for Measurements")?;
    ensure((r.ratio.numerator, r.ratio.denominator) == (2, 6), || format!("ratio {}", r.ratio))?;
    ensure(r.ratio == Ratio::new(1, 3), || "ratio is not one third".into())?;
    Ok(format!("quality version has {} tuples, Doctor^q has {} answer, ratio {}", version.len(), answers.len(), r.ratio))
}

fn violation() -> Check {
    let o = load(&["hospital_core.mdq", "mapping.mdq", "quality.mdq"]);
    let db = data(&o);
    let result = chase(&db, &o, &ChaseConfig::default());
    let v = &result.nc_violations;
    ensure(v.len() == 1, || format!("{} violations", v.len()))?;
    ensure(&*v[0].rule == "intensive_closed", || format!("violated {}", v[0].rule))?;
    let culprit = tuple(&["W3", "2005-09-07", "TomWaits"]);
    ensure(v[0].facts.iter().any(|(p, t)| &**p == "PatientWard" && *t == culprit), || {
        format!("trigger facts {:?}", v[0].facts)
    })?;
    let ctx = build_context(&db, &o.mappings).map_err(|e| e.to_string())?;
    let (clean, removed) = discard_violations(&ctx, &o, &ChaseConfig::default());
    ensure(removed.len() == 1, || format!("discarded {removed:?}"))?;
    let cfg = QueryConfig::default();
    let with = compute_quality_version(&clean, &o, "Measurements", &cfg).map_err(|e| e.to_string())?;
    let without = compute_quality_version(&ctx, &o, "Measurements", &cfg).map_err(|e| e.to_string())?;
    ensure(with == without, || format!("discarding changed the version: {with:?} vs {without:?}"))?;
    ensure(!with.iter().any(|t| t[0].as_const().is_some_and(|s| s.starts_with("2005-09-07"))), || {
        "a Sep 7 tuple is in the quality version".into()
    })?;
    Ok("only intensive_closed on PatientWard(W3, 2005-09-07, TomWaits); the quality version does not depend on it".into())
}

/// Runs 1000 generated sets; returns how many were rejected, the first rejection, and
/// the number of downcast rules seen.
fn random_suite(o: &Ontology, plain_frontier: bool) -> Result<(usize, Option<String>, usize), String> {
    let mut g = gen::RuleGen::new(&o.schema, StdRng::seed_from_u64(7));
    g.downcast_plain_frontier = plain_frontier;
    let (mut rejected, mut first, mut downcasts) = (0, None, 0);
    for _ in 0..1000 {
        let rs = g.rule_set();
        for r in &rs {
            match classify_rule(r, &o.schema) {
                RuleClass::DowncastTgd => downcasts += 1,
                RuleClass::DimensionalTgd { .. } => {}
                c => return Err(format!("generated rule `{r}` classified as {c}")),
            }
        }
        if let Verdict::Reject { witness } = is_weakly_sticky(&rs) {
            rejected += 1;
            first.get_or_insert_with(|| {
                let text: Vec<String> = rs.iter().map(|r| r.to_string()).collect();
                format!("{}.{} in {}", witness.rule, witness.variable, text.join(" "))
            });
        }
    }
    Ok((rejected, first, downcasts))
}

fn weak_stickiness() -> Check {
    let o = load(&["hospital.mdq"]);
    let bad = parse_program(
        "predicate R(a, b).\npredicate S(a, b).\ntgd c1: exists z. R(y, z) <- R(x, y).\ntgd c2: S(x, z) <- R(x, y), R(y, z).\n",
    )
    .map_err(|e| e.to_string())?;
    match is_weakly_sticky(&bad.rules) {
        Verdict::Reject { witness } if &*witness.variable == "y" => {}
        v => return Err(format!("counterexample verdict {v:?}")),
    }
    let (restricted, first, _) = random_suite(&o, false)?;
    ensure(restricted == 0, || format!("{restricted} sets rejected without copied non-categorical values, first at {}", first.unwrap()))?;
    let (rejected, first, downcasts) = random_suite(&o, true)?;
    let summary = format!(
        "counterexample rejected at y; 1000/1000 sets accepted when downcasts copy no non-categorical value; \
         {} of 1000 unrestricted sets accepted ({downcasts} downcasts)",
        1000 - rejected
    );
    let Some(first) = first else { return Ok(summary) };
    // Smallest instance of the rejections: k1 keeps inventing non-categorical values and
    // k2 turns each of them into a new ward, so r7 joins on an unbounded position.
    let core = std::fs::read_to_string(fixtures().join("hospital_core.mdq")).map_err(|e| e.to_string())?;
    let extra = "tgd k1: exists z. WorkingSchedules(u, d; t, z) <- WorkingSchedules(u, d; n, t).\n\
                 tgd k2: exists w. UnitWard(u, w), PatientWard(w, d; n) <- WorkingSchedules(u, d; n, t).\n";
    let small = parse_sources(&[("core", &core), ("extra", extra)]).map_err(|e| e.to_string())?;
    let minimal = match is_weakly_sticky(&small.rules) {
        Verdict::Reject { witness } => format!("{}.{}", witness.rule, witness.variable),
        Verdict::Accept => "accepted".into(),
    };
    let witness = first.split(" in ").next().unwrap_or_default().to_string();
    Err(format!("{summary}; first generated rejection at {witness}; {{r7, k1, k2}} rejected at {minimal}"))
}

fn separability() -> Check {
    let core = analyze(&load(&["hospital_core.mdq"])).separability;
    let full = analyze(&load(&["hospital.mdq"])).separability;
    ensure(core == Separability::Guaranteed, || format!("core: {core:?}"))?;
    ensure(matches!(full, Separability::NotGuaranteed { .. }), || format!("full: {full:?}"))?;
    Ok("core guaranteed, with the downcast rule not guaranteed".into())
}

/// The fixture data reduced to its dimension instances.
fn dimension_data(o: &Ontology, db: &Database) -> Database {
    let mut out = db.clone();
    for r in &o.schema.relations {
        for t in db.tuples(&r.name).cloned().collect::<Vec<_>>() {
            out.remove(&r.name, &t);
        }
    }
    for (p, _) in db.relations() {
        if !matches!(
            o.schema.predicate_kind(p),
            Some(PredicateKind::Category(_) | PredicateKind::ParentChild(_) | PredicateKind::Categorical(_))
        ) {
            for t in db.tuples(p).cloned().collect::<Vec<_>>() {
                out.remove(p, &t);
            }
        }
    }
    out
}

fn fact(p: &str, values: &[&str]) -> (String, Tuple) {
    (p.to_string(), tuple(values))
}

fn random_fact(o: &Ontology, dims: &Database, rng: &mut StdRng) -> (String, Tuple) {
    let rels: Vec<_> = o.schema.relations.iter().filter(|r| &*r.name != "Thermometer").collect();
    let rel = rels.choose(rng).unwrap();
    let values = rel
        .attributes
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Categorical(c) => dims.tuples(c).collect::<Vec<_>>().choose(rng).unwrap()[0].clone(),
            AttributeKind::NonCategorical(_) => {
                let vocab: &[&str] = match &*a.name {
                    "patient" => &["TomWaits", "LouReed", "ElvisCostello", "NinaSimone"],
                    "nurse" => &["Mark", "Helen", "Cathy"],
                    "type" => &["Certified", "NonCertified"],
                    _ => &["night", "morning"],
                };
                Value::constant(vocab.choose(rng).unwrap())
            }
        })
        .collect();
    (rel.name.to_string(), values)
}

/// Compares both engines on `facts` over the dimension data for every query.
fn compare(o: &Ontology, dims: &Database, facts: &[(String, Tuple)]) -> Result<(), String> {
    let mut db = dims.clone();
    for (p, t) in facts {
        db.insert(p, t.clone()).map_err(|e| e.to_string())?;
    }
    for q in o.queries.iter().filter(|q| &*q.name != "Doctor") {
        let td = answer_cq(&db, &o.rules, q, &QueryConfig::default());
        let ch = answer_via_chase(&db, o, q, &ChaseConfig::default());
        match (&td, &ch) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => return Err(format!("{} on {facts:?}: top-down {td:?}, chase {ch:?}", q.name)),
        }
    }
    Ok(())
}

fn oracle() -> Check {
    let o = load(&["hospital.mdq", "oracle.mdq"]);
    let dims = dimension_data(&o, &data(&o));
    let pool = [
        fact("PatientWard", &["W1", "2005-09-05", "TomWaits"]),
        fact("PatientWard", &["W2", "2005-09-06", "LouReed"]),
        fact("PatientWard", &["W4", "2005-09-05", "LouReed"]),
        fact("WorkingSchedules", &["Standard", "2005-09-09", "Mark", "NonCertified"]),
        fact("WorkingSchedules", &["Intensive", "2005-09-05", "Cathy", "Certified"]),
        fact("WorkingSchedules", &["Standard", "2005-09-05", "Helen", "Certified"]),
        fact("Shifts", &["W1", "2005-09-09", "Mark", "night"]),
        fact("Shifts", &["W2", "2005-09-06", "Helen", "morning"]),
        fact("DischargePatients", &["H2", "2005-10-05", "ElvisCostello"]),
        fact("DischargePatients", &["H1", "2005-09-06", "LouReed"]),
        fact("PatientUnit", &["Standard", "2005-09-05", "LouReed"]),
        fact("PatientUnit", &["Intensive", "2005-09-07", "TomWaits"]),
    ];
    let subsets = 1usize << pool.len();
    for mask in 0..subsets {
        let facts: Vec<_> = (0..pool.len()).filter(|i| mask >> i & 1 == 1).map(|i| pool[i].clone()).collect();
        compare(&o, &dims, &facts)?;
    }
    let mut rng = StdRng::seed_from_u64(11);
    let random = 200;
    for _ in 0..random {
        let n = rng.gen_range(1..=25);
        let facts: Vec<_> = (0..n).map(|_| random_fact(&o, &dims, &mut rng)).collect();
        compare(&o, &dims, &facts)?;
    }
    let queries = o.queries.len() - usize::from(o.query("Doctor").is_some());
    Ok(format!("{subsets} subsets and {random} random instances agree on {queries} queries"))
}

/// The fixture with every categorical fact copied `k` times under renamed non-categorical values.
fn scaled(o: &Ontology, db: &Database, k: usize) -> Database {
    let mut out = db.clone();
    for r in &o.schema.relations {
        for t in db.tuples(&r.name).cloned().collect::<Vec<_>>() {
            for i in 1..k {
                let copy = t
                    .iter()
                    .enumerate()
                    .map(|(j, v)| match (r.category_at(j), v.as_const()) {
                        (None, Some(c)) => Value::constant(&format!("{c}~{i}")),
                        _ => v.clone(),
                    })
                    .collect();
                out.insert(&r.name, copy).unwrap();
            }
        }
    }
    out
}

fn scaling() -> Check {
    let o = load(&["hospital.mdq", "oracle.mdq"]);
    let db = data(&o);
    let suite = ["MarkShifts", "StandardSep5", "ElvisUnit", "AllUnits", "InstitutionPatients", "NurseForPatient", "EarlyPatients"];
    let mut points = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let db = scaled(&o, &db, k);
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            for name in suite {
                answer_cq(&db, &o.rules, o.query(name).unwrap(), &QueryConfig::default())
                    .map_err(|e| format!("{name} at x{k}: {e}"))?;
            }
            best = best.min(start.elapsed());
        }
        points.push(((k as f64).ln(), best.as_secs_f64().max(1e-6).ln(), k, best));
    }
    let n = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let times: Vec<String> = points.iter().map(|p| format!("x{}={:.1?}", p.2, p.3)).collect();
    ensure(slope < 3.0, || format!("log-log slope {slope:.2} ({})", times.join(", ")))?;
    Ok(format!("log-log slope {slope:.2} ({})", times.join(", ")))
}

fn determinism() -> Check {
    let mut commands: Vec<Vec<&str>> = vec![
        vec!["check", "hospital.mdq"],
        vec!["analyze", "hospital.mdq"],
        vec!["analyze", "hospital_core.mdq", "--format", "structured"],
        vec!["chase", "hospital_core.mdq", "--dump", "facts"],
        vec!["chase", "hospital.mdq", "--dump", "trace"],
        vec!["chase", "hospital.mdq", "--variant", "oblivious", "--format", "structured"],
        vec!["assess", "hospital_core.mdq", "--mapping", "mapping.mdq", "--quality", "quality.mdq", "--query", "Doctor"],
        vec![
            "assess", "hospital_core.mdq", "--mapping", "mapping.mdq", "--quality", "quality.mdq", "--query", "Doctor",
            "--report", "structured",
        ],
    ];
    for q in ["MarkShifts", "MarkShiftsW2", "MarkShiftsW4", "StandardSep5", "ElvisUnit"] {
        commands.push(vec!["query", "hospital.mdq", "--query", q, "--engine", "both", "--explain"]);
        commands.push(vec!["query", "hospital.mdq", "--query", q, "--format", "structured"]);
    }
    for c in &commands {
        let runs: Vec<Output> = (0..3).map(|_| mdq(c)).collect();
        for r in &runs[1..] {
            ensure(r.stdout == runs[0].stdout && r.stderr == runs[0].stderr && r.status == runs[0].status, || {
                format!("`mdq {}` differs between runs", c.join(" "))
            })?;
        }
        ensure(runs[0].status.code().is_some_and(|c| c <= 1), || format!("`mdq {}` failed to run", c.join(" ")))?;
    }
    Ok(format!("{} commands byte-identical over 3 runs", commands.len()))
}

/// Criteria that cannot hold as stated; see the README. They still print FAIL but only
/// change the exit status if they start passing.
const KNOWN_FAILURES: &[usize] = &[4];

fn main() -> ExitCode {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let criteria: [fn() -> Check; 8] =
        [mark_shifts, quality_version, violation, weak_stickiness, separability, oracle, scaling, determinism];
    let mut unexpected = Vec::new();
    for (i, c) in criteria.iter().enumerate().filter(|(i, _)| only.is_none_or(|n| n == i + 1)) {
        let n = i + 1;
        let known = KNOWN_FAILURES.contains(&n);
        match c() {
            Ok(detail) => {
                println!("criterion {n}: PASS - {detail}");
                if known {
                    unexpected.push(n);
                }
            }
            Err(detail) => {
                println!("criterion {n}: FAIL - {detail}");
                if !known {
                    unexpected.push(n);
                }
            }
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
