//! `roadatlas` command line: batch processing, the API server, and report export.
//!
//! Exit codes: 0 success, 1 finished with per-image failures, 2 usage or configuration error.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::api::{router, AppState, JobRunner};
use crate::ingest::{persist, prepare, scan_dir, IngestItem};
use crate::pipeline::{run_ordered, Models, PipelineConfig};
use crate::store::{export_report, DefectFilter, ExportFormat, Store};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURES: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "roadatlas", version, about = "Road defect and road-marking processing, storage and API")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Process every image in a folder and store the results.
    Process {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "ROADATLAS_DATA_ROOT")]
        data_root: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for the pipeline stage.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Skip images whose file name is already in the store.
        #[arg(long)]
        skip_processed: bool,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long, env = "ROADATLAS_DATA_ROOT")]
        data_root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Pipeline configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a defect report.
    Export {
        #[arg(long, env = "ROADATLAS_DATA_ROOT")]
        data_root: PathBuf,
        /// csv or json
        #[arg(long)]
        format: String,
        #[arg(long)]
        validated_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Counts behind the `process` summary line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProcessSummary {
    pub processed: usize,
    pub defects: usize,
    pub markings: usize,
    pub failures: usize,
}

impl std::fmt::Display for ProcessSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "processed={} defects={} markings={} failures={}",
            self.processed, self.defects, self.markings, self.failures
        )
    }
}

fn usage(msg: impl std::fmt::Display) -> u8 {
    eprintln!("roadatlas: {msg}");
    EXIT_USAGE
}

pub fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Process { input, data_root, config, jobs, skip_processed } => {
            process_cmd(&input, &data_root, &config, usize::from(jobs), skip_processed)
        }
        Command::Serve { data_root, port, host, config } => {
            serve_cmd(&data_root, SocketAddr::new(host, port), config.as_deref())
        }
        Command::Export { data_root, format, validated_only, out } => {
            export_cmd(&data_root, &format, validated_only, &out)
        }
    }
}

/// Runs the pipeline over `items` on `jobs` threads, then stores results in input order.
pub fn process_items(
    store: &Store,
    items: Vec<Result<IngestItem, crate::ingest::Unreadable>>,
    cfg: &PipelineConfig,
    models: &Models,
    jobs: usize,
) -> (ProcessSummary, Vec<(String, String)>) {
    let prepared = run_ordered(items, jobs, |item| match item {
        Ok(item) => (item.source_name.clone(), prepare(&item, models, cfg)),
        Err(u) => (u.source_name, Err(u.error)),
    });
    let mut summary = ProcessSummary::default();
    let mut failures = Vec::new();
    for (name, result) in prepared {
        match result.and_then(|p| persist(store, p, cfg)) {
            Ok(done) => {
                summary.processed += 1;
                summary.defects += done.defect_ids.len();
                summary.markings += done.marking_ids.len();
            }
            Err(e) => failures.push((name, e.to_string())),
        }
    }
    summary.failures = failures.len();
    (summary, failures)
}

fn process_cmd(input: &Path, data_root: &Path, config: &Path, jobs: usize, skip_processed: bool) -> u8 {
    let cfg = match PipelineConfig::load(config) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let mut items = match scan_dir(input) {
        Ok(i) => i,
        Err(e) => return usage(format!("cannot read input folder {}: {e}", input.display())),
    };
    let store = match Store::open(data_root) {
        Ok(s) => s,
        Err(e) => return usage(format!("cannot open data root {}: {e}", data_root.display())),
    };
    if skip_processed {
        items.retain(|i| match i {
            Ok(item) if store.has_source(&item.source_name) => {
                log::info!("skipping {} (already processed)", item.source_name);
                false
            }
            _ => true,
        });
    }
    let models = Models::fallback(&cfg);
    let (summary, failures) = process_items(&store, items, &cfg, &models, jobs);
    for (name, reason) in &failures {
        eprintln!("failed: {name}: {reason}");
    }
    println!("{summary}");
    if summary.failures == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURES
    }
}

fn serve_cmd(data_root: &Path, addr: SocketAddr, config: Option<&Path>) -> u8 {
    let cfg = match config.map(PipelineConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return usage(e),
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(r) => r,
        Err(e) => return usage(format!("cannot start runtime: {e}")),
    };
    let listener = match runtime.block_on(tokio::net::TcpListener::bind(addr)) {
        Ok(l) => l,
        Err(e) => return usage(format!("cannot listen on {addr}: {e}")),
    };
    let store = match Store::open(data_root) {
        Ok(s) => Arc::new(s),
        Err(e) => return usage(format!("cannot open data root {}: {e}", data_root.display())),
    };
    let cfg = Arc::new(cfg);
    let jobs = match JobRunner::new(Arc::clone(&store), Models::fallback(&cfg), Arc::clone(&cfg)) {
        Ok(j) => j,
        Err(e) => return usage(format!("cannot recover job queue: {e}")),
    };
    jobs.start();
    let app = router(AppState { store, cfg, jobs: Arc::clone(&jobs) });
    eprintln!("roadatlas: listening on http://{}", listener.local_addr().unwrap_or(addr));
    let served = runtime.block_on(async {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                eprintln!("roadatlas: shutting down");
            })
            .await
    });
    jobs.shutdown();
    match served {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("roadatlas: server error: {e}");
            EXIT_FAILURES
        }
    }
}

fn export_cmd(data_root: &Path, format: &str, validated_only: bool, out: &Path) -> u8 {
    let format: ExportFormat = match format.parse() {
        Ok(f) => f,
        Err(e) => return usage(e),
    };
    if !data_root.is_dir() {
        return usage(format!("data root {} does not exist", data_root.display()));
    }
    let store = match Store::open(data_root) {
        Ok(s) => s,
        Err(e) => return usage(format!("cannot open data root {}: {e}", data_root.display())),
    };
    let bytes = match export_report(&store, format, &DefectFilter::default(), validated_only) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("roadatlas: export failed: {e}");
            return EXIT_FAILURES;
        }
    };
    if let Err(e) = std::fs::write(out, bytes) {
        eprintln!("roadatlas: cannot write {}: {e}", out.display());
        return EXIT_FAILURES;
    }
    EXIT_OK
}
