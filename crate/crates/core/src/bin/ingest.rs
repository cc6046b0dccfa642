//! Run-file validation CLI.
//!
//! `ingest validate <run-file> --candidates <file>` parses the run,
//! normalizes it, checks every ranked document against the candidate
//! pools, prints the validation report, and exits 0 iff the run is
//! accepted.

use anyhow::Context;
use clap::{Parser, Subcommand};
use livelab_core::run::{load_candidates, load_run_file, validate_against_candidates};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ingest", about = "Validate pre-computed run submissions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a run file and validate it against candidate lists.
    Validate {
        /// Run file in six-column format: qid Q0 docid rank score tag.
        run_file: PathBuf,
        /// Candidate list file: one `context<TAB>docid( docid)*` per line.
        #[arg(long)]
        candidates: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(accepted) => {
            if accepted {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate {
            run_file,
            candidates,
        } => {
            let rs = load_run_file(&run_file)
                .with_context(|| format!("parsing {}", run_file.display()))?;
            let pools = load_candidates(&candidates)
                .with_context(|| format!("parsing {}", candidates.display()))?;
            let report = validate_against_candidates(&rs, &pools);
            print!(
                "run tag: {}\nqueries: {}\nlines: {}\n{}",
                rs.tag,
                rs.rankings.len(),
                rs.line_count,
                report.render_text()
            );
            Ok(report.accepted)
        }
    }
}
