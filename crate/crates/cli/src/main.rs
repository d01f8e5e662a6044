//! `ikmf` — the command surface binding the mining and archiving streams.
//!
//! Exit codes: 0 success, 1 domain failure (printed as a single
//! `ERROR <kind>: message` line on stderr), 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ikmf", version, about = "Knowledge mining with a trustworthy archiving stream")]
struct Cli {
    /// Store root directory. The IKMF_STORE environment variable
    /// overrides this flag.
    #[arg(long, global = true, default_value = "./ikmf-store")]
    store: PathBuf,

    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Text)]
    output: OutputMode,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputMode {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest files as new assets.
    Ingest {
        /// Files to ingest.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Free-text provenance hint recorded on each asset.
        #[arg(long, default_value = "")]
        source_hint: String,
        /// Media type override (skips signature/heuristic identification).
        #[arg(long)]
        format: Option<String>,
    },
    /// Run the standard mining pipeline over assets.
    Mine {
        /// Asset pids to mine together (fusion spans all of them).
        #[arg(required = true)]
        pids: Vec<String>,
        /// Gazetteer file (canonical JSON).
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Extraction pattern file (canonical JSON).
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Discover assets through one of the four modalities.
    Search {
        #[arg(long, value_enum)]
        mode: SearchMode,
        /// Blob digest (exact mode).
        #[arg(long)]
        digest: Option<String>,
        /// Query text (syntactic mode).
        #[arg(long)]
        query: Option<String>,
        /// Concept id or label (semantic mode).
        #[arg(long)]
        concept: Option<String>,
        /// Query pattern file (reason mode).
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Evaluate a conjunctive query pattern against the knowledge graph.
    Query {
        /// Query pattern file.
        #[arg(long)]
        pattern: PathBuf,
    },
    /// Materialize inferences and check consistency.
    Reason,
    /// Build, validate, and write the archival package for an asset.
    Archive {
        pid: String,
        /// Output tar path (defaults to aip-<pid hex>.tar).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include the knowledge-base snapshot in the package.
        #[arg(long)]
        include_kb: bool,
    },
    /// Re-execute the captured trace of an asset and compare digests.
    Reproduce { pid: String },
    /// Policy-driven preservation.
    Policy {
        #[command(subcommand)]
        command: PolicyCommand,
    },
    /// Integrity auditing.
    Audit {
        #[command(subcommand)]
        command: AuditCommand,
    },
    /// Import and export the knowledge base.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchMode {
    Exact,
    Syntactic,
    Semantic,
    Reason,
}

#[derive(Debug, Subcommand)]
enum PolicyCommand {
    /// Evaluate policies and execute the planned actions to a fixpoint.
    Run {
        /// Policy file: canonical JSON array of policies.
        #[arg(long)]
        policies: PathBuf,
        /// Plan only; execute nothing.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Debug, Subcommand)]
enum AuditCommand {
    /// Verify fixity of every asset; exits 1 on any failure.
    Fixity,
    /// Validate a serialized archival package.
    Aip { file: PathBuf },
}

#[derive(Debug, Args)]
struct KbFiles {
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Rule file in the line-oriented text syntax.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Knowledge-graph snapshot (canonical JSON).
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    /// Load ontology, taxonomy, rules, or a graph snapshot into the store.
    Import(KbFiles),
    /// Write the store's knowledge base out to files.
    Export(KbFiles),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // IKMF_STORE overrides --store.
    let store = std::env::var_os("IKMF_STORE")
        .map(PathBuf::from)
        .unwrap_or_else(|| cli.store.clone());

    match commands::dispatch(&store, &cli.command) {
        Ok(output) => {
            match cli.output {
                OutputMode::Json => println!("{}", output.json_line().trim_end()),
                OutputMode::Text => {
                    if !output.text.is_empty() {
                        println!("{}", output.text.trim_end());
                    }
                }
            }
            match output.failure {
                Some((kind, message)) => {
                    eprintln!("ERROR {kind}: {message}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.kind());
            ExitCode::from(1)
        }
    }
}
