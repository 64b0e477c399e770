use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxlab::config::Format;
use proxlab::function::list_catalog;
use proxlab::report::{write_csv, write_jsonl};
use proxlab::{run, LoadedConfig, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "proxlab", version, about = "Proximal-mapping metric and dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every experiment of a config and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long, env = "PROXLAB_SEED")]
        seed: Option<u64>,
        /// Report file; `-` writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for the report when `--out` is not given.
        #[arg(long, env = "PROXLAB_OUT_DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Run experiments concurrently (output order is unchanged).
        #[arg(long)]
        parallel: bool,
    },
    /// Print the function catalog, optionally filtered by name.
    List {
        #[arg(default_value = "")]
        filter: String,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<LoadedConfig, ExitCode> {
    LoadedConfig::from_path(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn report_path(cfg: &LoadedConfig, config: &Path, out_dir: Option<PathBuf>, format: Format) -> PathBuf {
    let dir = out_dir
        .or_else(|| cfg.config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("reports"));
    let stem = config.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    dir.join(format!("{stem}.{}", format.extension()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { filter } => {
            for e in list_catalog(&filter) {
                println!("{:<16} {:<26} {}", e.name, e.params, e.prox);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!(
                    "ok: {} functions, {} experiments",
                    cfg.functions.len(),
                    cfg.config.experiments.len()
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, seed, out, out_dir, format, parallel } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if parallel && !cfg!(feature = "parallel") {
                eprintln!("warning: built without the `parallel` feature; running sequentially");
            }
            let format = format.or(cfg.config.output.format).unwrap_or_default();
            let outcome = run(&cfg, &RunOptions { seed, parallel, timestamp: None });
            let path = out.unwrap_or_else(|| report_path(&cfg, &config, out_dir, format));
            let written = if path.as_os_str() == "-" {
                emit(&outcome.records, format, io::stdout().lock())
            } else {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    if let Err(e) = std::fs::create_dir_all(parent) {
                        eprintln!("error: cannot create {}: {e}", parent.display());
                        return ExitCode::from(2);
                    }
                }
                File::create(&path).and_then(|f| emit(&outcome.records, format, BufWriter::new(f)))
            };
            if let Err(e) = written {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
            eprintln!(
                "{} records, {} failed -> {}",
                outcome.records.len(),
                outcome.failures(),
                path.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
    }
}

fn emit<W: Write>(records: &[proxlab::report::Record], format: Format, w: W) -> io::Result<()> {
    match format {
        Format::Jsonl => write_jsonl(records, w),
        Format::Csv => write_csv(records, w),
    }
}
