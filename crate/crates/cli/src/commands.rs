//! Command handlers: one function per verb, each producing both text and
//! a canonical-JSON document.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ikmf_core::canon;
use ikmf_core::error::{Error, Result};
use ikmf_core::format::FormatId;
use ikmf_core::kap::{load_policies, validate_aip};
use ikmf_core::kea::{Gazetteer, PatternSet};
use ikmf_core::krr::{parse_pattern, parse_rules, KnowledgeGraph, Node, Ontology, Taxonomy};
use ikmf_core::store::{BlobId, Pid};
use ikmf_core::Engine;

use crate::{AuditCommand, Command, KbCommand, KbFiles, PolicyCommand, SearchMode};

/// What a handler produced: a JSON document, text lines, and an optional
/// domain failure (kind, message) that maps to exit code 1.
pub struct CommandOutput {
    pub json: Value,
    pub text: String,
    pub failure: Option<(String, String)>,
}

impl CommandOutput {
    fn ok(json: Value, text: String) -> Self {
        CommandOutput {
            json,
            text,
            failure: None,
        }
    }

    pub fn json_line(&self) -> String {
        canon::canonicalize_value(&self.json)
    }
}

pub fn dispatch(store: &Path, command: &Command) -> Result<CommandOutput> {
    match command {
        Command::Ingest { files, source_hint, format } => {
            ingest(store, files, source_hint, format.as_deref())
        }
        Command::Mine { pids, gazetteer, patterns } => {
            mine(store, pids, gazetteer.as_deref(), patterns.as_deref())
        }
        Command::Search { mode, digest, query, concept, pattern, k } => search(
            store,
            *mode,
            digest.as_deref(),
            query.as_deref(),
            concept.as_deref(),
            pattern.as_deref(),
            *k,
        ),
        Command::Query { pattern } => run_query(store, pattern),
        Command::Reason => reason(store),
        Command::Archive { pid, out, include_kb } => {
            archive(store, pid, out.as_deref(), *include_kb)
        }
        Command::Reproduce { pid } => reproduce(store, pid),
        Command::Policy { command: PolicyCommand::Run { policies, dry_run } } => {
            policy_run(store, policies, *dry_run)
        }
        Command::Audit { command: AuditCommand::Fixity } => audit_fixity(store),
        Command::Audit { command: AuditCommand::Aip { file } } => audit_aip(file),
        Command::Kb { command: KbCommand::Import(files) } => kb_import(store, files),
        Command::Kb { command: KbCommand::Export(files) } => kb_export(store, files),
    }
}

fn ingest(
    store: &Path,
    files: &[PathBuf],
    source_hint: &str,
    format: Option<&str>,
) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let mut assets = Vec::new();
    let mut text = String::new();
    for file in files {
        let bytes = fs::read(file)
            .map_err(|e| Error::Storage(format!("{}: {e}", file.display())))?;
        let hint = if source_hint.is_empty() {
            file.display().to_string()
        } else {
            source_hint.to_string()
        };
        let asset = engine.ingest(&bytes, &hint, format.map(FormatId::new))?;
        let format_name = asset
            .format
            .as_ref()
            .map(|f| f.to_string())
            .unwrap_or_default();
        writeln!(text, "{}  {}  {}", asset.pid, format_name, asset.blob).expect("write to string");
        assets.push(json!({
            "pid": asset.pid.as_str(),
            "blob": asset.blob.as_str(),
            "format": format_name,
            "source_hint": asset.source_hint,
        }));
    }
    Ok(CommandOutput::ok(json!({"assets": assets}), text))
}

fn load_gazetteer(path: Option<&Path>) -> Result<Gazetteer> {
    match path {
        Some(p) => Gazetteer::from_json(&fs::read_to_string(p)?),
        None => Ok(Gazetteer::default()),
    }
}

fn load_patterns(path: Option<&Path>) -> Result<PatternSet> {
    match path {
        Some(p) => PatternSet::from_json(&fs::read_to_string(p)?),
        None => Ok(PatternSet::default()),
    }
}

fn mine(
    store: &Path,
    pids: &[String],
    gazetteer: Option<&Path>,
    patterns: Option<&Path>,
) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let pids: Vec<Pid> = pids.iter().map(|p| Pid::parse(p)).collect::<Result<_>>()?;
    let gazetteer = load_gazetteer(gazetteer)?;
    let patterns = load_patterns(patterns)?;
    let report = engine.mine(&pids, &gazetteer, &patterns)?;

    let mut text = format!("trace {}\n", report.trace_id);
    for (label, class, link) in &report.links {
        writeln!(text, "link  {label} ({class}): {link:?}").expect("write to string");
    }
    writeln!(
        text,
        "asserted {} facts, inferred {}, {} ambiguous, skipped predicates: {:?}",
        report.assertions_added, report.inferred, report.ambiguous, report.skipped_predicates
    )
    .expect("write to string");
    let json = serde_json::to_value(&report)?;
    Ok(CommandOutput::ok(json, text))
}

fn search(
    store: &Path,
    mode: SearchMode,
    digest: Option<&str>,
    query: Option<&str>,
    concept: Option<&str>,
    pattern: Option<&Path>,
    k: usize,
) -> Result<CommandOutput> {
    let mut engine = Engine::open_read_only(store)?;
    match mode {
        SearchMode::Exact => {
            let digest = digest
                .ok_or_else(|| Error::Invalid("--digest is required for exact search".into()))?;
            let pids = engine.exact_match(&BlobId::parse(digest)?);
            let text = pids.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n");
            let json = json!({"pids": pids.iter().map(|p| p.as_str()).collect::<Vec<_>>()});
            Ok(CommandOutput::ok(json, text))
        }
        SearchMode::Syntactic => {
            let query = query
                .ok_or_else(|| Error::Invalid("--query is required for syntactic search".into()))?;
            hits_output(engine.syntactic_search(query, k))
        }
        SearchMode::Semantic => {
            let concept = concept
                .ok_or_else(|| Error::Invalid("--concept is required for semantic search".into()))?;
            hits_output(engine.semantic_search(concept, k)?)
        }
        SearchMode::Reason => {
            let pattern = pattern
                .ok_or_else(|| Error::Invalid("--pattern is required for reasoning search".into()))?;
            rows_output(&mut engine, pattern)
        }
    }
}

fn hits_output(hits: Vec<ikmf_core::content::SearchHit>) -> Result<CommandOutput> {
    let mut text = String::new();
    for h in &hits {
        writeln!(text, "{:.6}  {}  {}", h.score, h.pid, h.snippet.replace('\n', " "))
            .expect("write to string");
    }
    Ok(CommandOutput::ok(json!({"hits": hits}), text))
}

fn rows_output(engine: &mut Engine, pattern_file: &Path) -> Result<CommandOutput> {
    let pattern = parse_pattern(&fs::read_to_string(pattern_file)?)?;
    let rows = engine.query(&pattern)?;
    let mut text = String::new();
    for row in &rows {
        let line: Vec<&str> = row.iter().map(Node::display).collect();
        writeln!(text, "{}", line.join("\t")).expect("write to string");
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|row| {
            Value::Object(
                pattern
                    .projection
                    .iter()
                    .zip(row)
                    .map(|(var, node)| (var.clone(), serde_json::to_value(node).expect("node serializes")))
                    .collect(),
            )
        })
        .collect();
    Ok(CommandOutput::ok(
        json!({"projection": pattern.projection, "rows": json_rows}),
        text,
    ))
}

fn run_query(store: &Path, pattern: &Path) -> Result<CommandOutput> {
    let mut engine = Engine::open_read_only(store)?;
    rows_output(&mut engine, pattern)
}

fn reason(store: &Path) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let inferred = engine.materialize();
    let violations = engine.check_consistency();
    let mut text = format!("inferred {inferred} assertions\n");
    for v in &violations {
        writeln!(text, "violation {:?}: {}", v.kind, v.explanation).expect("write to string");
    }
    if violations.is_empty() {
        text.push_str("consistent\n");
    }
    Ok(CommandOutput::ok(
        json!({"inferred": inferred, "violations": serde_json::to_value(&violations)?}),
        text,
    ))
}

fn archive(store: &Path, pid: &str, out: Option<&Path>, include_kb: bool) -> Result<CommandOutput> {
    let engine = Engine::open_read_only(store)?;
    let pid = Pid::parse(pid)?;
    let bytes = engine.build_aip(&pid, include_kb)?;
    let report = validate_aip(&bytes);
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| {
            PathBuf::from(format!("aip-{}.tar", pid.as_str().trim_start_matches("ikmf:")))
        });
    fs::write(&path, &bytes)?;
    let json = json!({
        "path": path.display().to_string(),
        "bytes": bytes.len(),
        "valid": report.ok(),
        "checks": serde_json::to_value(&report.checks)?,
    });
    let text = format!(
        "wrote {} ({} bytes), validation {}",
        path.display(),
        bytes.len(),
        if report.ok() { "passed" } else { "FAILED" }
    );
    let failure = (!report.ok()).then(|| {
        (
            "AipValidation".to_string(),
            "freshly built package failed validation".to_string(),
        )
    });
    Ok(CommandOutput { json, text, failure })
}

fn reproduce(store: &Path, pid: &str) -> Result<CommandOutput> {
    let engine = Engine::open_read_only(store)?;
    let pid = Pid::parse(pid)?;
    let report = engine.reproduce(&pid)?;
    let mut text = format!("match: {}\n", report.matched);
    for c in &report.comparisons {
        writeln!(
            text,
            "{}  {}.{}  recorded {}  reproduced {}",
            if c.equal { "ok " } else { "DIFF" },
            c.step,
            c.output,
            c.recorded,
            c.reproduced
        )
        .expect("write to string");
    }
    let failure = (!report.matched).then(|| {
        let step = report
            .first_divergence()
            .map(|c| c.step.clone())
            .unwrap_or_default();
        (
            "ReproductionMismatch".to_string(),
            format!("first divergent step: {step}"),
        )
    });
    Ok(CommandOutput {
        json: serde_json::to_value(&report)?,
        text,
        failure,
    })
}

fn policy_run(store: &Path, policies: &Path, dry_run: bool) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let policies = load_policies(&fs::read_to_string(policies)?, &registry_view(&engine))?;
    if dry_run {
        let plans = engine.evaluate_policies(&policies)?;
        let mut text = String::new();
        for p in &plans {
            writeln!(text, "plan  {}  {}  {:?}", p.pid, p.policy_id, p.action)
                .expect("write to string");
        }
        if plans.is_empty() {
            text.push_str("nothing to do\n");
        }
        return Ok(CommandOutput::ok(
            json!({"planned": serde_json::to_value(&plans)?, "executed": []}),
            text,
        ));
    }
    let executed = engine.run_policies(&policies)?;
    let mut text = String::new();
    for (plan, outcome) in &executed {
        writeln!(text, "done  {}  {}  {:?}", plan.pid, plan.policy_id, outcome)
            .expect("write to string");
    }
    if executed.is_empty() {
        text.push_str("nothing to do\n");
    }
    let executed_json: Vec<Value> = executed
        .iter()
        .map(|(plan, outcome)| {
            json!({"plan": serde_json::to_value(plan).expect("plan serializes"),
                   "outcome": serde_json::to_value(outcome).expect("outcome serializes")})
        })
        .collect();
    Ok(CommandOutput::ok(json!({"executed": executed_json}), text))
}

/// Policies validate migrator ids against the registry; expose the
/// engine's registry without cloning implementations.
fn registry_view(engine: &Engine) -> ikmf_core::prov::OperationRegistry {
    let mut registry = ikmf_core::prov::OperationRegistry::new();
    for (id, version) in engine.operations() {
        registry
            .register(&id, &version, std::sync::Arc::new(|_, _| Err("view only".into())))
            .expect("fresh registry accepts each pair once");
    }
    registry
}

fn audit_fixity(store: &Path) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let records = engine.audit_fixity()?;
    let mut text = String::new();
    let mut failures = 0;
    for r in &records {
        writeln!(text, "{}  {}", if r.ok { "ok    " } else { "FAILED" }, r.pid)
            .expect("write to string");
        if !r.ok {
            failures += 1;
        }
    }
    let failure = (failures > 0).then(|| {
        (
            "IntegrityError".to_string(),
            format!("{failures} asset(s) failed fixity"),
        )
    });
    Ok(CommandOutput {
        json: json!({"checked": records.len(), "failures": failures,
                     "records": serde_json::to_value(&records).expect("records serialize")}),
        text,
        failure,
    })
}

fn audit_aip(file: &Path) -> Result<CommandOutput> {
    let bytes = fs::read(file)?;
    let report = validate_aip(&bytes);
    let mut text = String::new();
    for c in &report.checks {
        writeln!(text, "{}  {}  {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail)
            .expect("write to string");
    }
    let failure = (!report.ok()).then(|| {
        (
            "AipValidation".to_string(),
            format!("{} failed check(s)", report.checks.iter().filter(|c| !c.pass).count()),
        )
    });
    Ok(CommandOutput {
        json: serde_json::to_value(&report)?,
        text,
        failure,
    })
}

fn kb_import(store: &Path, files: &KbFiles) -> Result<CommandOutput> {
    let mut engine = Engine::open(store)?;
    let mut loaded = Vec::new();
    if let Some(path) = &files.ontology {
        engine.set_ontology(Ontology::from_json(&fs::read_to_string(path)?)?)?;
        loaded.push("ontology");
    }
    if let Some(path) = &files.taxonomy {
        engine.set_taxonomy(Taxonomy::from_json(&fs::read_to_string(path)?)?)?;
        loaded.push("taxonomy");
    }
    if let Some(path) = &files.rules {
        engine.set_rules(parse_rules(&fs::read_to_string(path)?)?)?;
        loaded.push("rules");
    }
    if let Some(path) = &files.graph {
        let graph = KnowledgeGraph::from_json(engine.ontology(), &fs::read_to_string(path)?)?;
        engine.replace_graph(graph)?;
        loaded.push("graph");
    }
    if loaded.is_empty() {
        return Err(Error::Invalid(
            "nothing to import: pass --ontology, --taxonomy, --rules, or --graph".into(),
        ));
    }
    Ok(CommandOutput::ok(
        json!({"imported": loaded}),
        format!("imported {}", loaded.join(", ")),
    ))
}

fn kb_export(store: &Path, files: &KbFiles) -> Result<CommandOutput> {
    let engine = Engine::open_read_only(store)?;
    let mut written = Vec::new();
    if let Some(path) = &files.ontology {
        fs::write(path, canon::to_canonical_json_line(engine.ontology())?)?;
        written.push(path.display().to_string());
    }
    if let Some(path) = &files.taxonomy {
        fs::write(path, canon::to_canonical_json_line(engine.taxonomy())?)?;
        written.push(path.display().to_string());
    }
    if let Some(path) = &files.rules {
        let text: String = engine
            .rules()
            .iter()
            .map(|r| format!("{}\n", r.to_text()))
            .collect();
        fs::write(path, text)?;
        written.push(path.display().to_string());
    }
    if let Some(path) = &files.graph {
        fs::write(
            path,
            canon::to_canonical_json_line(&engine.graph().to_persisted())?,
        )?;
        written.push(path.display().to_string());
    }
    if written.is_empty() {
        return Err(Error::Invalid(
            "nothing to export: pass --ontology, --taxonomy, --rules, or --graph".into(),
        ));
    }
    Ok(CommandOutput::ok(
        json!({"written": written}),
        format!("wrote {}", written.join(", ")),
    ))
}
