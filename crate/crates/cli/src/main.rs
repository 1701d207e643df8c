use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sobolevlab_cli::config::ExperimentConfig;
use sobolevlab_cli::ops::{describe, ObjectKind};
use sobolevlab_cli::run::{run_suite, summary_lines};
use sobolevlab_cli::{store, suites, CliError};

#[derive(Parser)]
#[command(name = "sobolevlab", version, about = "Run and inspect sobolev-lab experiment suites")]
struct Cli {
    /// Output root; each suite writes to <out>/<suite>.
    #[arg(long, global = true, env = "SOBOLEVLAB_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite from a config file or a bundled suite.
    Run {
        #[arg(long, conflicts_with = "suite", required_unless_present = "suite")]
        config: Option<PathBuf>,
        #[arg(long)]
        suite: Option<String>,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config tolerance scale.
        #[arg(long)]
        tolerance_scale: Option<f64>,
    },
    /// Summarize a stored object (`id` or `suite/id`).
    Describe { id: String },
    /// Write a stored object as JSON, CSV or OBJ.
    Export {
        id: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Destination file; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Table to export from a report (CSV).
        #[arg(long)]
        table: Option<String>,
    },
    /// List the bundled suites.
    ListSuites,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Obj,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sobolevlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config,
            suite,
            jobs,
            seed,
            tolerance_scale,
        } => {
            let mut cfg = match (config, suite) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(name)) => suites::bundled(&name).map_err(|e| match e {
                    CliError::NotFound(m) => CliError::Usage(m),
                    e => e,
                })?,
                (None, None) => unreachable!("clap requires one of --config and --suite"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tolerance_scale {
                cfg.tolerance_scale = t;
            }
            cfg.validate()?;
            let out = store::resolve_out(cli.out.as_deref(), cfg.output_dir.as_deref());
            let (report, dir) = run_suite(&cfg, &out, jobs)?;
            for line in summary_lines(&report) {
                emit(&format!("{line}\n"));
            }
            emit(&format!("report: {}\n", dir.join("report.json").display()));
            Ok(report.exit_code())
        }
        Command::Describe { id } => {
            let obj = store::find_object(&store::resolve_out(cli.out.as_deref(), None), &id)?;
            emit(&format!("{}\n", describe(&obj)?.trim_end()));
            Ok(0)
        }
        Command::Export {
            id,
            format,
            output,
            table,
        } => {
            let obj = store::find_object(&store::resolve_out(cli.out.as_deref(), None), &id)?;
            let text = export(&obj, format, table.as_deref())?;
            match output {
                Some(p) => store::write(&p, text.as_bytes())?,
                None => emit(&text),
            }
            Ok(0)
        }
        Command::ListSuites => {
            for (name, _) in suites::BUNDLED {
                let cfg = suites::bundled(name)?;
                emit(&format!("{name:24} {:2} operations  {}\n", cfg.operations.len(), cfg.description));
            }
            Ok(0)
        }
    }
}

fn export(obj: &sobolevlab_cli::ops::StoredObject, format: Format, table: Option<&str>) -> Result<String, CliError> {
    use sobolev_lab::lab::DecayCurve;
    use sobolev_lab::report::ExperimentReport;
    use sobolev_lab::spike::{bigraph_obj, height_field_csv, SpikeProfile};

    let malformed = |e: serde_json::Error| CliError::Io(format!("stored object {} is malformed: {e}", obj.id));
    let unsupported = |what: &str| CliError::Usage(format!("{what} export is not available for {:?} objects", obj.kind));
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&obj.data).expect("value serializes") + "\n"),
        Format::Csv => match obj.kind {
            ObjectKind::Curve => {
                let c: DecayCurve = serde_json::from_value(obj.data.clone()).map_err(malformed)?;
                Ok(c.to_csv("value"))
            }
            ObjectKind::Profile => {
                let p: SpikeProfile = serde_json::from_value(obj.data.clone()).map_err(malformed)?;
                Ok(height_field_csv(&p, 65)?)
            }
            ObjectKind::Report => {
                let r: ExperimentReport = serde_json::from_value(obj.data.clone()).map_err(malformed)?;
                let t = match table {
                    Some(name) => r
                        .table(name)
                        .ok_or_else(|| CliError::NotFound(format!("table {name:?} in report {}", obj.id)))?,
                    None if r.tables.len() == 1 => &r.tables[0],
                    None => {
                        let names: Vec<&str> = r.tables.iter().map(|t| t.name.as_str()).collect();
                        return Err(CliError::Usage(format!("report has tables {names:?}; pick one with --table")));
                    }
                };
                Ok(t.to_csv())
            }
            _ => Err(unsupported("CSV")),
        },
        Format::Obj => match obj.kind {
            ObjectKind::Profile => {
                let p: SpikeProfile = serde_json::from_value(obj.data.clone()).map_err(malformed)?;
                Ok(bigraph_obj(&p, 24, 96)?)
            }
            _ => Err(unsupported("OBJ")),
        },
    }
}
