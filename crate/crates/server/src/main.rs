//! `personnel`: schema migration, record import/export, ID cards, orphan
//! vacuum, benchmarks and the HTTP server.
//!
//! Exit status is 0 on success, 1 on an operational failure and 2 on a
//! usage error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use personnel_core::bench::{self, BenchPlan};
use personnel_core::idcard::{render_card, CardLayout};
use personnel_core::records::{self, Record};
use personnel_core::schema::{self, Target};
use personnel_core::{EmployeeRecord, PhotoStore, StorageStrategy, StudentRecord, Table};
use personnel_server::{build_state, serve, Settings};

#[derive(Debug, Parser)]
#[command(name = "personnel", version, about = "Personnel records with photos and ID cards")]
struct Cli {
    /// Settings file (TOML); `PERSONNEL_*` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Photo storage strategy: large_object or inline_bytes.
    #[arg(long, global = true)]
    strategy: Option<StorageStrategy>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply migrations up to a version (default: latest).
    Migrate {
        #[arg(long, default_value = "latest")]
        target: Target,
    },
    /// Write the versioned migration scripts to a directory.
    Ddl {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Report what the schema has and lacks; exits 1 when incomplete.
    Verify,
    /// Run the HTTP API until SIGINT or SIGTERM.
    Serve {
        /// Overrides the configured bind address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Insert rows from a CSV file with a header of field names.
    Import {
        #[arg(long)]
        table: Table,
        #[arg(long)]
        file: PathBuf,
    },
    /// Write all rows of a table as CSV (`-` for stdout).
    Export {
        #[arg(long)]
        table: Table,
        #[arg(long)]
        file: PathBuf,
    },
    /// Render one ID card as PNG.
    Idcard {
        #[arg(long)]
        table: Table,
        #[arg(long)]
        id: i32,
        #[arg(long)]
        out: PathBuf,
        /// Card layout file; defaults to the configured layout.
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Unlink large objects that no row references.
    VacuumOrphans,
    /// Run a storage benchmark plan in scratch databases.
    Bench {
        #[arg(long)]
        spec_file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref()).context("loading settings")?;
    if let Some(s) = cli.strategy {
        settings.strategy = s;
    }
    match cli.command {
        Command::Migrate { target } => {
            let mut client = settings.database.connect()?;
            let report = schema::migrate(&mut client, settings.strategy, target)?;
            println!(
                "schema at version {} ({})",
                report.current_version(),
                settings.strategy
            );
            if !report.is_complete() {
                println!("missing: {}", report.missing_objects.join(", "));
            }
        }
        Command::Ddl { out_dir } => {
            for path in schema::write_migration_files(&out_dir, settings.strategy)? {
                println!("{}", path.display());
            }
        }
        Command::Verify => {
            let mut client = settings.database.connect()?;
            let report = schema::verify_schema(&mut client, settings.strategy)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_complete() {
                bail!("schema incomplete: {}", report.missing_objects.join(", "));
            }
        }
        Command::Serve { bind } => {
            if let Some(b) = bind {
                settings.server.bind = b;
            }
            serve_blocking(&settings)?;
        }
        Command::Import { table, file } => {
            let mut client = settings.database.connect()?;
            let input = BufReader::new(File::open(&file).with_context(|| format!("opening {}", file.display()))?);
            let report = match table {
                Table::Employees => records::import_csv::<EmployeeRecord>(&mut client, input)?,
                Table::Students => records::import_csv::<StudentRecord>(&mut client, input)?,
            };
            println!("inserted {}", report.inserted);
            for (line, reason) in &report.rejected {
                println!("rejected line {line}: {reason}");
            }
        }
        Command::Export { table, file } => {
            let mut client = settings.database.connect()?;
            let out: Box<dyn Write> = if file == Path::new("-") {
                Box::new(io::stdout().lock())
            } else {
                Box::new(BufWriter::new(
                    File::create(&file).with_context(|| format!("creating {}", file.display()))?,
                ))
            };
            let n = match table {
                Table::Employees => records::export_csv::<EmployeeRecord>(&mut client, out)?,
                Table::Students => records::export_csv::<StudentRecord>(&mut client, out)?,
            };
            eprintln!("exported {n} rows");
        }
        Command::Idcard { table, id, out, layout } => {
            let layout = match layout {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    CardLayout::parse(&text)?
                }
                None => settings.layout(table)?,
            };
            let mut client = settings.database.connect()?;
            let store = PhotoStore::new(settings.strategy);
            let png = match table {
                Table::Employees => card::<EmployeeRecord>(&mut client, &store, id, &layout)?,
                Table::Students => card::<StudentRecord>(&mut client, &store, id, &layout)?,
            };
            std::fs::write(&out, png).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
        }
        Command::VacuumOrphans => {
            let mut client = settings.database.connect()?;
            let n = PhotoStore::new(settings.strategy).vacuum_orphans(&mut client)?;
            println!("reclaimed {n}");
        }
        Command::Bench { spec_file, out } => {
            let text = std::fs::read_to_string(&spec_file)
                .with_context(|| format!("reading {}", spec_file.display()))?;
            let plan = BenchPlan::from_toml_str(&text)?;
            let reports = bench::run_plan(&settings.database, &plan, |r| {
                log::info!(
                    "{} {} B x{}: verified={} residue={}",
                    r.spec.strategy,
                    r.spec.size_bytes,
                    r.spec.concurrency,
                    r.verified,
                    r.residue
                );
            })?;
            std::fs::write(&out, bench::report_to_csv(&reports)?)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(bad) = reports.iter().find(|r| !r.verified || r.residue != 0) {
                bail!(
                    "benchmark {} {} B x{} failed verification",
                    bad.spec.strategy,
                    bad.spec.size_bytes,
                    bad.spec.concurrency
                );
            }
        }
    }
    Ok(())
}

fn card<R: Record>(
    client: &mut postgres::Client,
    store: &PhotoStore,
    id: i32,
    layout: &CardLayout,
) -> Result<Vec<u8>> {
    let rec = records::get::<R>(client, id)?
        .with_context(|| format!("no {} with id {id}", R::TABLE.slug()))?;
    let photo = store.fetch_photo(client, R::TABLE, id)?;
    Ok(render_card(&rec, photo.as_ref(), layout)?.into_bytes())
}

fn serve_blocking(settings: &Settings) -> Result<()> {
    let state = build_state(settings)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&settings.server.bind)
            .await
            .with_context(|| format!("binding {}", settings.server.bind))?;
        log::info!("listening on {}", listener.local_addr()?);
        // Tests read the bound port from this line.
        println!("listening on {}", listener.local_addr()?);
        serve(listener, state, shutdown_signal()).await?;
        log::info!("stopped");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
