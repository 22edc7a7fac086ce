//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperlens_core::explore::edge_table;
use hyperlens_core::hypercore::{EmbeddingMatrix, Hypergraph, ImageManifest};
use hyperlens_core::layout::{layout_hypergraph, LayoutParams};
use hyperlens_core::progress::Progress;
use hyperlens_core::simeval::{ces, ces_weighted, hnmi};
use hyperlens_core::synthbench::{run_perturbation_bench, run_roc_bench, BenchConfig, PerturbKind, RocConfig};
use serde_json::json;

use crate::api::{self, AppState, ServeConfig};
use crate::build::{construct, ConstructSpec, Method};
use crate::session::{Session, Sources};

#[derive(Debug, Parser)]
#[command(name = "hyperlens", version, about = "Build, evaluate and explore image hypergraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a hypergraph from embeddings or soft memberships.
    Construct(ConstructArgs),
    /// Compare a generated hypergraph against a ground truth.
    Eval(EvalArgs),
    /// Run a synthetic measure benchmark.
    Synthbench(SynthArgs),
    /// Compute the spatial layout of a hypergraph.
    Layout(LayoutArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write the live hypergraph, a report or an edge table from a session.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Fuzzifier.
    #[arg(long, default_value_t = 2.0)]
    f: f64,
    /// Membership threshold.
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    /// Cluster counts for mgk, comma separated.
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// HGSMX1 file for threshold-import.
    #[arg(long)]
    membership: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_edge_size: usize,
    /// Add one edge per value (or bin) of this manifest field. Repeatable.
    #[arg(long = "metadata-field")]
    metadata_fields: Vec<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the soft memberships (fcm, pcm).
    #[arg(long)]
    membership_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMeasure {
    Ces,
    CesWeighted,
    Hnmi,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    gen: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMeasure::All)]
    measure: EvalMeasure,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Unused; accepted for uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Replace,
    Rewire,
    Overseg,
    Imbalanced,
    Roc,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    kind: BenchKind,
    /// Repetitions per level (graphs per model for roc).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long)]
    hypergraph: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Session file. Loaded if it exists, otherwise created from the sources below.
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    hypergraph: Option<PathBuf>,
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    /// Thumbnail cache directory; defaults next to the session file.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Seed for layouts and sampled summaries.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    Hypergraph,
    Report,
    Csv,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(value_enum)]
    kind: ExportKind,
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `argv` and runs the command. Returns the process exit code:
/// 0 on success, 1 when the command fails, 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Construct(a) => cmd_construct(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synthbench(a) => cmd_synthbench(a),
        Command::Layout(a) => cmd_layout(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn cmd_construct(a: ConstructArgs) -> anyhow::Result<()> {
    let emb = EmbeddingMatrix::read_file(&a.embeddings, None)?;
    let manifest = a.manifest.as_ref().map(ImageManifest::read_json).transpose()?;
    if let Some(m) = &manifest {
        emb.check_manifest(m)?;
    }
    let mut spec = ConstructSpec::new(a.method);
    spec.k = a.k;
    spec.f = a.f;
    spec.t = a.t;
    if let Some(k_list) = a.k_list {
        spec.k_list = k_list;
    }
    spec.seed = a.seed;
    spec.membership = a.membership;
    spec.min_edge_size = a.min_edge_size;
    spec.metadata_fields = a.metadata_fields;
    if let Some(b) = a.bins {
        spec.bins = b;
    }
    let out = construct(&spec, &emb, manifest.as_ref(), &Progress::new())?;
    out.hypergraph.write_json(&a.out)?;
    if let Some(path) = a.membership_out {
        match &out.membership {
            Some(soft) => soft.write_file(&path)?,
            None => bail!("{:?} produces no soft memberships", a.method),
        }
    }
    println!("{} edges over {} images -> {}", out.hypergraph.m(), out.hypergraph.n, a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let gt = Hypergraph::read_json(&a.gt)?;
    let gen = Hypergraph::read_json(&a.gen)?;
    let mut report = serde_json::Map::new();
    let all = a.measure == EvalMeasure::All;
    if all || a.measure == EvalMeasure::Ces {
        let r = ces(&gt, &gen)?;
        println!("ces={:.6} S={:.6} R={:.6}", r.ces, r.s, r.r);
        report.insert("ces".into(), serde_json::to_value(r)?);
    }
    if all || a.measure == EvalMeasure::CesWeighted {
        let r = ces_weighted(&gt, &gen)?;
        println!("ces_weighted={:.6} S={:.6} R={:.6}", r.ces, r.s, r.r);
        report.insert("ces_weighted".into(), serde_json::to_value(r)?);
    }
    if all || a.measure == EvalMeasure::Hnmi {
        let v = hnmi(&gt, &gen)?;
        println!("hnmi={v:.6}");
        report.insert("hnmi".into(), v.into());
    }
    if let Some(path) = a.report {
        write_json(&path, &report)?;
    }
    Ok(())
}

fn cmd_synthbench(a: SynthArgs) -> anyhow::Result<()> {
    let kinds: &[PerturbKind] = match a.kind {
        BenchKind::Replace => &[PerturbKind::Replace],
        BenchKind::Rewire => &[PerturbKind::Rewire],
        BenchKind::Overseg => &[PerturbKind::Overseg],
        BenchKind::Imbalanced => &[PerturbKind::ImbalancedSmall, PerturbKind::ImbalancedLarge],
        BenchKind::Roc => {
            let mut cfg = RocConfig {
                seed: a.seed,
                ..RocConfig::default()
            };
            if let Some(r) = a.reps {
                cfg.per_model = r;
            }
            let result = run_roc_bench(&cfg)?;
            result.write_outputs(&a.out)?;
            for m in &result.measures {
                println!("{}: auc={:.4} null={:.4}", m.measure.name(), m.auc, m.null_auc);
            }
            return Ok(());
        }
    };
    for &kind in kinds {
        let mut cfg = BenchConfig::defaults(kind);
        cfg.seed = a.seed;
        if let Some(r) = a.reps {
            cfg.reps = r;
        }
        let result = run_perturbation_bench(&cfg)?;
        let dir = if kinds.len() > 1 { a.out.join(kind.name()) } else { a.out.clone() };
        result.write_outputs(&dir)?;
        println!("{}: {} runs -> {}", kind.name(), result.runs.len(), dir.display());
    }
    Ok(())
}

fn cmd_layout(a: LayoutArgs) -> anyhow::Result<()> {
    let h = Hypergraph::read_json(&a.hypergraph)?;
    let emb = EmbeddingMatrix::read_file(&a.embeddings, None)?;
    let params = LayoutParams {
        seed: a.seed,
        ..LayoutParams::default()
    };
    let layout = layout_hypergraph(&h, &emb, &params)?;
    write_json(&a.out, &layout)
}

fn open_or_create_session(a: &ServeArgs) -> anyhow::Result<Session> {
    if a.session.exists() {
        return Session::load(&a.session).with_context(|| format!("loading {}", a.session.display()));
    }
    let (Some(manifest), Some(embeddings), Some(hypergraph)) = (&a.manifest, &a.embeddings, &a.hypergraph) else {
        bail!(
            "{} does not exist; pass --manifest, --embeddings and --hypergraph to start a new session",
            a.session.display()
        );
    };
    let h = Hypergraph::read_json(hypergraph)?;
    let sources = Sources {
        manifest: manifest.clone(),
        embeddings: embeddings.clone(),
        query_embeddings: a.query_embeddings.clone(),
    };
    let session = Session::create(sources, h)?;
    session.save(&a.session)?;
    Ok(session)
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let session = open_or_create_session(&a)?;
    let thumb_dir = a.cache_dir.clone().unwrap_or_else(|| {
        let mut p = a.session.clone().into_os_string();
        p.push(".thumbs");
        PathBuf::from(p)
    });
    let config = ServeConfig {
        session_path: Some(a.session.clone()),
        thumb_dir,
        layout: LayoutParams {
            seed: a.seed,
            ..LayoutParams::default()
        },
        ..ServeConfig::default()
    };
    let state = AppState::new(session, config);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad --host/--port")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{addr}");
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, api::router(state.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    if let Some(path) = state.save()? {
        eprintln!("saved {}", path.display());
    }
    Ok(())
}

fn cmd_export(a: ExportArgs) -> anyhow::Result<()> {
    let session = Session::load(&a.session)?;
    let live = session.live();
    match a.kind {
        ExportKind::Hypergraph => live.write_json(&a.out)?,
        ExportKind::Report => {
            let rows = edge_table(live, session.embeddings(), session.dispersion(), None, None)?;
            let log = session.log();
            let report = json!({
                "revision": log.revision(),
                "n": live.n,
                "m": live.m(),
                "transactions": log.transactions().len(),
                "edges": rows,
            });
            write_json(&a.out, &report)?;
        }
        ExportKind::Csv => {
            let rows = edge_table(live, session.embeddings(), session.dispersion(), None, None)?;
            let mut w = csv::Writer::from_path(&a.out)?;
            w.write_record(["id", "name", "size", "status", "origin", "dispersion"])?;
            for r in rows {
                let status = serde_json::to_value(r.status)?;
                let origin = serde_json::to_value(r.origin)?;
                w.write_record([
                    r.id.0.to_string(),
                    r.name,
                    r.size.to_string(),
                    status.as_str().unwrap_or_default().to_string(),
                    origin.as_str().unwrap_or_default().to_string(),
                    r.dispersion.map(|d| d.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
